#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "fairpoison/attack.hpp"
#include "fairpoison/error.hpp"
#include "fairpoison/experiments.hpp"
#include "fairpoison/fairness.hpp"
#include "fairpoison/fairpoison.h"
#include "fairpoison/serialization.hpp"
#include "fairpoison/target_models.hpp"

struct fp_dataset {
  fairpoison::SampleSet data;
};

struct fp_model {
  fairpoison::AnyModel model;
};

struct fp_attack_result {
  fairpoison::AttackResult result;
};

struct fp_report {
  fairpoison::ExperimentReport report;
};

namespace {

using fairpoison::Error;
using fairpoison::ErrorKind;

thread_local std::string last_error;

fp_status StatusOf(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return FP_ERR_INVALID_ARGUMENT;
    case ErrorKind::kIo:
      return FP_ERR_IO;
    case ErrorKind::kParse:
      return FP_ERR_PARSE;
    case ErrorKind::kNumeric:
      return FP_ERR_NUMERIC;
    case ErrorKind::kConvergence:
      return FP_ERR_CONVERGENCE;
  }
  return FP_ERR_INTERNAL;
}

// Runs body, translating exceptions into status codes and the thread's
// error message.
template <typename F>
fp_status Guard(F&& body) {
  last_error.clear();
  try {
    body();
    return FP_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return StatusOf(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return FP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return FP_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown exception";
    return FP_ERR_INTERNAL;
  }
}

template <typename T>
const T& Require(const T* p, const char* what) {
  if (p == nullptr) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + " is null");
  }
  return *p;
}

const char* RequireText(const char* p, const char* what) {
  if (p == nullptr) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + " is null");
  }
  return p;
}

template <typename T>
void RequireOut(T** out) {
  if (out == nullptr)
    throw Error(ErrorKind::kInvalidArgument, "output pointer is null");
  *out = nullptr;
}

char* CopyString(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string ReadFile(const char* path) {
  std::ifstream in(RequireText(path, "path"), std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, std::string("cannot open ") + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIo, std::string("cannot read ") + path);
  return buf.str();
}

void WriteFile(const char* path, const std::string& text) {
  std::ofstream out(RequireText(path, "path"), std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, std::string("cannot create ") + path);
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, std::string("cannot write ") + path);
}

fairpoison::AttackConfig ToConfig(const fp_attack_options& o) {
  fairpoison::AttackConfig c;
  c.step_size = o.step_size;
  c.stop_threshold = o.stop_threshold;
  c.max_iterations = o.max_iterations;
  if (o.budget_count >= 0) {
    c.budget =
        fairpoison::PoisonCount{static_cast<std::size_t>(o.budget_count)};
  } else {
    c.budget = fairpoison::PoisonFraction{o.budget_fraction};
  }
  if (o.lambda >= 0.0) {
    c.lambda = fairpoison::FixedLambda{o.lambda};
  } else {
    c.lambda = fairpoison::PriorsRatioLambda{};
  }
  c.standardize = o.standardize != 0;
  c.seed = o.seed;
  return c;
}

double ResolveC(const fairpoison::SampleSet& train, fairpoison::LossKind loss,
                double reg_c, uint64_t seed) {
  if (reg_c > 0.0) return reg_c;
  return fairpoison::SelectC(train, loss, fairpoison::kDefaultCGrid, 5, seed);
}

}  // namespace

extern "C" {

const char* fp_version(void) { return "0.1.0"; }

const char* fp_status_name(fp_status status) {
  switch (status) {
    case FP_OK:
      return "ok";
    case FP_ERR_INVALID_ARGUMENT:
      return "invalid_argument";
    case FP_ERR_IO:
      return "io";
    case FP_ERR_PARSE:
      return "parse";
    case FP_ERR_NUMERIC:
      return "numeric";
    case FP_ERR_CONVERGENCE:
      return "convergence";
    case FP_ERR_INTERNAL:
      return "internal";
  }
  return "unknown";
}

const char* fp_last_error(void) { return last_error.c_str(); }

void fp_string_free(char* s) { delete[] s; }

fp_status fp_dataset_generate(size_t n_samples, double separation,
                              double rotation, uint64_t seed,
                              fp_dataset** out) {
  return Guard([&] {
    RequireOut(out);
    *out = new fp_dataset{
        fairpoison::GenerateSynthetic({n_samples, separation, rotation, seed})};
  });
}

fp_status fp_dataset_load_csv(const char* path, const char* label_column,
                              const char* group_column, fp_dataset** out) {
  return Guard([&] {
    RequireOut(out);
    fairpoison::CsvSchema schema;
    if (label_column) schema.label_column = label_column;
    if (group_column) schema.sensitive_column = group_column;
    *out =
        new fp_dataset{fairpoison::LoadCsv(RequireText(path, "path"), schema)};
  });
}

fp_status fp_dataset_save_csv(const fp_dataset* data, const char* path) {
  return Guard([&] {
    fairpoison::SaveCsv(Require(data, "dataset").data,
                        RequireText(path, "path"));
  });
}

fp_status fp_dataset_shape(const fp_dataset* data, size_t* n_samples,
                           size_t* n_features) {
  return Guard([&] {
    const auto& d = Require(data, "dataset").data;
    if (n_samples) *n_samples = d.size();
    if (n_features) *n_features = d.dim();
  });
}

fp_status fp_dataset_counts(const fp_dataset* data, size_t* positive,
                            size_t* privileged, size_t* unprivileged,
                            size_t* untagged) {
  return Guard([&] {
    const auto& d = Require(data, "dataset").data;
    using fairpoison::GroupTag;
    if (positive) *positive = d.CountLabel(1);
    if (privileged) *privileged = d.CountGroup(GroupTag::kPrivileged);
    if (unprivileged) *unprivileged = d.CountGroup(GroupTag::kUnprivileged);
    if (untagged) *untagged = d.CountGroup(GroupTag::kNone);
  });
}

fp_status fp_dataset_split(const fp_dataset* data, uint64_t seed,
                           fp_dataset** train, fp_dataset** validation,
                           fp_dataset** test) {
  return Guard([&] {
    RequireOut(train);
    RequireOut(validation);
    RequireOut(test);
    auto split = fairpoison::Split(Require(data, "dataset").data, {}, seed);
    auto a = std::make_unique<fp_dataset>(fp_dataset{std::move(split.train)});
    auto b =
        std::make_unique<fp_dataset>(fp_dataset{std::move(split.validation)});
    auto c = std::make_unique<fp_dataset>(fp_dataset{std::move(split.test)});
    *train = a.release();
    *validation = b.release();
    *test = c.release();
  });
}

void fp_dataset_free(fp_dataset* data) { delete data; }

fp_status fp_model_train_linear(const fp_dataset* train, const char* loss,
                                double reg_c, uint64_t seed, fp_model** out) {
  return Guard([&] {
    RequireOut(out);
    const auto& d = Require(train, "dataset").data;
    const auto kind = fairpoison::ParseLossKind(loss ? loss : "logistic");
    const double c = ResolveC(d, kind, reg_c, seed);
    *out = new fp_model{fairpoison::TrainLinear(d, kind, c)};
  });
}

fp_status fp_model_train_target(const fp_dataset* train, const char* kind,
                                uint64_t seed, fp_model** out) {
  return Guard([&] {
    RequireOut(out);
    const auto& d = Require(train, "dataset").data;
    const std::string name = RequireText(kind, "model kind");
    fairpoison::TargetModel model;
    if (name == "gaussian_nb") {
      model = fairpoison::TrainGaussianNb(d);
    } else if (name == "decision_tree") {
      model = fairpoison::TrainDecisionTree(d, {});
    } else if (name == "random_forest") {
      fairpoison::ForestParams params;
      params.seed = seed;
      model = fairpoison::TrainRandomForest(d, params);
    } else if (name == "rbf_svm") {
      model = fairpoison::TrainRbfSvm(d, {});
    } else {
      throw Error(ErrorKind::kInvalidArgument,
                  "unknown model kind '" + name + "'");
    }
    *out = new fp_model{std::move(model)};
  });
}

fp_status fp_model_from_json(const char* json, fp_model** out) {
  return Guard([&] {
    RequireOut(out);
    *out = new fp_model{fairpoison::ModelFromJson(RequireText(json, "json"))};
  });
}

fp_status fp_model_load(const char* path, fp_model** out) {
  return Guard([&] {
    RequireOut(out);
    *out = new fp_model{fairpoison::ModelFromJson(ReadFile(path))};
  });
}

fp_status fp_model_to_json(const fp_model* model, char** out) {
  return Guard([&] {
    RequireOut(out);
    *out = CopyString(fairpoison::ModelToJson(Require(model, "model").model) +
                      "\n");
  });
}

fp_status fp_model_save(const fp_model* model, const char* path) {
  return Guard([&] {
    WriteFile(path,
              fairpoison::ModelToJson(Require(model, "model").model) + "\n");
  });
}

fp_status fp_model_evaluate(const fp_model* model, const fp_dataset* data,
                            double fairness_epsilon, char** metrics_json) {
  return Guard([&] {
    RequireOut(metrics_json);
    const auto& d = Require(data, "dataset").data;
    const auto preds =
        fairpoison::PredictAny(Require(model, "model").model, d.features());
    const auto record =
        fairpoison::EvaluatePredictions(preds, d, fairness_epsilon);
    *metrics_json = CopyString(fairpoison::MetricsToJson(record) + "\n");
  });
}

fp_status fp_model_predict(const fp_model* model, const fp_dataset* data,
                           int* predictions, size_t capacity) {
  return Guard([&] {
    const auto& d = Require(data, "dataset").data;
    if (predictions == nullptr || capacity < d.size()) {
      throw Error(ErrorKind::kInvalidArgument, "prediction buffer too small");
    }
    const auto preds =
        fairpoison::PredictAny(Require(model, "model").model, d.features());
    std::copy(preds.begin(), preds.end(), predictions);
  });
}

void fp_model_free(fp_model* model) { delete model; }

void fp_attack_options_init(fp_attack_options* options) {
  if (options == nullptr) return;
  const fairpoison::AttackConfig d;
  *options = fp_attack_options{};
  options->step_size = d.step_size;
  options->stop_threshold = d.stop_threshold;
  options->max_iterations = d.max_iterations;
  options->budget_fraction =
      std::get<fairpoison::PoisonFraction>(d.budget).fraction;
  options->budget_count = -1;
  options->lambda = -1.0;
  options->standardize = d.standardize ? 1 : 0;
  options->generic = 0;
  options->loss = nullptr;
  options->reg_c = 0.0;
  options->seed = 0;
}

fp_status fp_attack_options_check(const fp_attack_options* options,
                                  char** problems) {
  return Guard([&] {
    RequireOut(problems);
    const auto& o = Require(options, "options");
    auto list = ToConfig(o).Validate();
    if (o.loss != nullptr) {
      try {
        fairpoison::ParseLossKind(o.loss);
      } catch (const Error& e) {
        list.push_back(e.what());
      }
    }
    std::string joined;
    for (const auto& p : list) joined += p + "\n";
    *problems = CopyString(joined);
  });
}

fp_status fp_attack_run(const fp_dataset* train, const fp_dataset* validation,
                        const fp_attack_options* options,
                        fp_attack_result** out) {
  return Guard([&] {
    RequireOut(out);
    const auto& o = Require(options, "options");
    const auto& tr = Require(train, "train").data;
    const auto& val = Require(validation, "validation").data;
    const auto loss = fairpoison::ParseLossKind(o.loss ? o.loss : "logistic");
    const fairpoison::ModelSpec spec{
        loss, ResolveC(tr, loss, o.reg_c, o.seed), {}};
    const auto config = ToConfig(o);
    auto result = o.generic
                      ? fairpoison::RunGenericAttack(tr, val, spec, config)
                      : fairpoison::RunAttack(tr, val, spec, config);
    *out = new fp_attack_result{std::move(result)};
  });
}

fp_status fp_attack_points(const fp_attack_result* result, fp_dataset** out) {
  return Guard([&] {
    RequireOut(out);
    const auto& r = Require(result, "attack result").result;
    *out = new fp_dataset{fairpoison::PoisonSampleSet(
        r.points, r.poisoned_train.feature_names())};
  });
}

fp_status fp_attack_poisoned_model(const fp_attack_result* result,
                                   fp_model** out) {
  return Guard([&] {
    RequireOut(out);
    *out = new fp_model{Require(result, "attack result").result.model};
  });
}

fp_status fp_attack_trace_csv(const fp_attack_result* result, char** out) {
  return Guard([&] {
    RequireOut(out);
    *out = CopyString(
        fairpoison::TraceToCsv(Require(result, "attack result").result.trace));
  });
}

void fp_attack_result_free(fp_attack_result* result) { delete result; }

void fp_experiment_options_init(fp_experiment_options* options) {
  if (options == nullptr) return;
  *options = fp_experiment_options{};
  options->sweep = "separation";
  options->runs = 10;
  options->jobs = 1;
  options->n_samples = 2000;
  options->separation = 0.0;
  options->rotation = fairpoison::SyntheticSource{}.rotation;
  options->budget_fraction = 0.05;
  options->include_black_box = 1;
  options->include_generic = 0;
  fp_attack_options_init(&options->attack);
}

fp_status fp_experiment_run(const fp_experiment_options* options,
                            const fp_dataset* data, fp_report** out) {
  return Guard([&] {
    RequireOut(out);
    const auto& o = Require(options, "options");
    fairpoison::ExperimentOptions e;
    e.attack = ToConfig(o.attack);
    e.attack.budget = fairpoison::PoisonFraction{o.budget_fraction};
    e.runs = o.runs;
    e.seed = o.seed;
    e.jobs = o.jobs;
    e.include_black_box = o.include_black_box != 0;
    e.include_generic = o.include_generic != 0;
    if (o.target_loss)
      e.black_box.target_loss = fairpoison::ParseLossKind(o.target_loss);
    if (o.dataset_name) e.dataset_name = o.dataset_name;
    if (o.attack.loss && fairpoison::ParseLossKind(o.attack.loss) !=
                             fairpoison::LossKind::kLogistic) {
      throw Error(ErrorKind::kInvalidArgument,
                  "experiments attack a logistic-regression learner");
    }
    if (o.values == nullptr && o.n_values > 0) {
      throw Error(ErrorKind::kInvalidArgument, "values is null");
    }
    const std::vector<double> values(o.values, o.values + o.n_values);
    const fairpoison::SyntheticSource synthetic{o.n_samples, o.separation,
                                                o.rotation};
    fairpoison::DataSource source = synthetic;
    if (data) source = data->data;
    const std::string sweep = RequireText(o.sweep, "sweep");
    fairpoison::ExperimentReport report;
    if (sweep == "separation") {
      if (data) {
        throw Error(ErrorKind::kInvalidArgument,
                    "the separation sweep runs on synthetic data only");
      }
      report = fairpoison::RunSeparationSweep(values, synthetic, e);
    } else if (sweep == "fraction") {
      report = fairpoison::RunFractionSweep(source, values, e);
    } else if (sweep == "transfer") {
      report = fairpoison::RunTransferStudy(source, e);
    } else {
      throw Error(ErrorKind::kInvalidArgument, "unknown sweep '" + sweep + "'");
    }
    *out = new fp_report{std::move(report)};
  });
}

fp_status fp_report_csv(const fp_report* report, char** out) {
  return Guard([&] {
    RequireOut(out);
    *out = CopyString(fairpoison::ReportCsv(Require(report, "report").report));
  });
}

fp_status fp_report_json(const fp_report* report, char** out) {
  return Guard([&] {
    RequireOut(out);
    *out = CopyString(fairpoison::ReportJson(Require(report, "report").report));
  });
}

fp_status fp_report_failed_runs(const fp_report* report, size_t* failed) {
  return Guard([&] {
    if (failed == nullptr)
      throw Error(ErrorKind::kInvalidArgument, "output pointer is null");
    *failed = Require(report, "report").report.failed_runs;
  });
}

void fp_report_free(fp_report* report) { delete report; }

}  // extern "C"
