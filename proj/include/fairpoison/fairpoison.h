/*
 * C interface to the fairness poisoning library.
 *
 * Every function returns an fp_status. On failure, fp_last_error() holds a
 * message for the calling thread until its next call into the library.
 * Objects handed out through an out-parameter are owned by the caller and
 * released with the matching *_free function; strings with fp_string_free.
 */
#ifndef FAIRPOISON_FAIRPOISON_H_
#define FAIRPOISON_FAIRPOISON_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(FAIRPOISON_BUILDING_LIBRARY)
#define FAIRPOISON_API __declspec(dllexport)
#else
#define FAIRPOISON_API __declspec(dllimport)
#endif
#else
#define FAIRPOISON_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fp_status {
  FP_OK = 0,
  FP_ERR_INVALID_ARGUMENT = 1,
  FP_ERR_IO = 2,
  FP_ERR_PARSE = 3,
  FP_ERR_NUMERIC = 4,
  FP_ERR_CONVERGENCE = 5,
  FP_ERR_INTERNAL = 6
} fp_status;

typedef struct fp_dataset fp_dataset;
typedef struct fp_model fp_model;
typedef struct fp_attack_result fp_attack_result;
typedef struct fp_report fp_report;

FAIRPOISON_API const char* fp_version(void);
FAIRPOISON_API const char* fp_status_name(fp_status status);
/* Never NULL; empty when the last call on this thread succeeded. */
FAIRPOISON_API const char* fp_last_error(void);
FAIRPOISON_API void fp_string_free(char* s);

/* ---- datasets ---- */

FAIRPOISON_API fp_status fp_dataset_generate(size_t n_samples,
                                             double separation, double rotation,
                                             uint64_t seed, fp_dataset** out);
/* Columns: features..., label (+1/-1), group (privileged/unprivileged/none).
 * label_column and group_column may be NULL for the defaults. */
FAIRPOISON_API fp_status fp_dataset_load_csv(const char* path,
                                             const char* label_column,
                                             const char* group_column,
                                             fp_dataset** out);
FAIRPOISON_API fp_status fp_dataset_save_csv(const fp_dataset* data,
                                             const char* path);
FAIRPOISON_API fp_status fp_dataset_shape(const fp_dataset* data,
                                          size_t* n_samples,
                                          size_t* n_features);
FAIRPOISON_API fp_status fp_dataset_counts(const fp_dataset* data,
                                           size_t* positive, size_t* privileged,
                                           size_t* unprivileged,
                                           size_t* untagged);
/* 50/30/20 split. */
FAIRPOISON_API fp_status fp_dataset_split(const fp_dataset* data, uint64_t seed,
                                          fp_dataset** train,
                                          fp_dataset** validation,
                                          fp_dataset** test);
FAIRPOISON_API void fp_dataset_free(fp_dataset* data);

/* ---- models ---- */

/* loss: "logistic" or "squared_hinge". reg_c <= 0 selects C by stratified
 * 5-fold cross-validation over {0.5, 1, 5, 10}. */
FAIRPOISON_API fp_status fp_model_train_linear(const fp_dataset* train,
                                               const char* loss, double reg_c,
                                               uint64_t seed, fp_model** out);
/* kind: "gaussian_nb", "decision_tree", "random_forest" or "rbf_svm". */
FAIRPOISON_API fp_status fp_model_train_target(const fp_dataset* train,
                                               const char* kind, uint64_t seed,
                                               fp_model** out);
FAIRPOISON_API fp_status fp_model_from_json(const char* json, fp_model** out);
FAIRPOISON_API fp_status fp_model_load(const char* path, fp_model** out);
FAIRPOISON_API fp_status fp_model_to_json(const fp_model* model, char** out);
FAIRPOISON_API fp_status fp_model_save(const fp_model* model, const char* path);
/* Metrics as a JSON object; undefined values are null. */
FAIRPOISON_API fp_status fp_model_evaluate(const fp_model* model,
                                           const fp_dataset* data,
                                           double fairness_epsilon,
                                           char** metrics_json);
FAIRPOISON_API fp_status fp_model_predict(const fp_model* model,
                                          const fp_dataset* data,
                                          int* predictions, size_t capacity);
FAIRPOISON_API void fp_model_free(fp_model* model);

/* ---- attacks ---- */

typedef struct fp_attack_options {
  double step_size; /* standardized feature units */
  double stop_threshold;
  int max_iterations;
  double budget_fraction; /* used when budget_count < 0 */
  int64_t budget_count;
  double lambda; /* < 0: unprivileged / privileged count */
  int standardize;
  int generic;      /* nonzero: maximize plain validation loss */
  const char* loss; /* attacked learner; NULL = "logistic" */
  double reg_c;     /* <= 0: select by cross-validation */
  uint64_t seed;
} fp_attack_options;

FAIRPOISON_API void fp_attack_options_init(fp_attack_options* options);
/* Newline-separated list of every invalid field; empty string when valid. */
FAIRPOISON_API fp_status
fp_attack_options_check(const fp_attack_options* options, char** problems);

FAIRPOISON_API fp_status fp_attack_run(const fp_dataset* train,
                                       const fp_dataset* validation,
                                       const fp_attack_options* options,
                                       fp_attack_result** out);
FAIRPOISON_API fp_status fp_attack_points(const fp_attack_result* result,
                                          fp_dataset** out);
FAIRPOISON_API fp_status
fp_attack_poisoned_model(const fp_attack_result* result, fp_model** out);
/* CSV with columns iteration,point_index,value,step_size. */
FAIRPOISON_API fp_status fp_attack_trace_csv(const fp_attack_result* result,
                                             char** out);
FAIRPOISON_API void fp_attack_result_free(fp_attack_result* result);

/* ---- experiments ---- */

typedef struct fp_experiment_options {
  const char* sweep;    /* "separation", "fraction" or "transfer" */
  const double* values; /* separations or fractions; may be NULL */
  size_t n_values;
  size_t runs;
  uint64_t seed;
  size_t jobs;
  size_t n_samples;  /* synthetic data */
  double separation; /* fraction and transfer sweeps, synthetic data */
  double rotation;
  double budget_fraction; /* separation and transfer sweeps */
  int include_black_box;
  int include_generic;
  const char* target_loss; /* black-box target; NULL = "squared_hinge" */
  const char* dataset_name;
  fp_attack_options attack; /* budget fields ignored */
} fp_experiment_options;

FAIRPOISON_API void fp_experiment_options_init(fp_experiment_options* options);
/* data == NULL runs on synthetic data. */
FAIRPOISON_API fp_status fp_experiment_run(const fp_experiment_options* options,
                                           const fp_dataset* data,
                                           fp_report** out);
FAIRPOISON_API fp_status fp_report_csv(const fp_report* report, char** out);
FAIRPOISON_API fp_status fp_report_json(const fp_report* report, char** out);
FAIRPOISON_API fp_status fp_report_failed_runs(const fp_report* report,
                                               size_t* failed);
FAIRPOISON_API void fp_report_free(fp_report* report);

#ifdef __cplusplus
}
#endif

#endif /* FAIRPOISON_FAIRPOISON_H_ */
