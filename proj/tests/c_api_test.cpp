#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "fairpoison/fairpoison.h"

namespace {

std::string TempPath(const std::string& name) {
  const char* root = std::getenv("FAIRPOISON_TEST_TMP");
  std::filesystem::path dir =
      root ? root : std::filesystem::temp_directory_path() / "fairpoison_c_api";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string Take(char* s) {
  std::string out = s ? s : "";
  fp_string_free(s);
  return out;
}

fp_dataset* Generate(size_t n, double separation, uint64_t seed) {
  fp_dataset* d = nullptr;
  REQUIRE(fp_dataset_generate(n, separation, 0.7853981633974483, seed, &d) ==
          FP_OK);
  return d;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(fp_version()) == "0.1.0");
  CHECK(std::string(fp_status_name(FP_ERR_PARSE)) == "parse");
  CHECK(std::string(fp_last_error()).empty());
}

TEST_CASE("null arguments are rejected with a message") {
  fp_dataset* d = nullptr;
  CHECK(fp_dataset_generate(100, 1.0, 0.0, 0, nullptr) ==
        FP_ERR_INVALID_ARGUMENT);
  CHECK(fp_dataset_load_csv(nullptr, nullptr, nullptr, &d) ==
        FP_ERR_INVALID_ARGUMENT);
  CHECK_FALSE(std::string(fp_last_error()).empty());
  size_t n = 0, dim = 0;
  CHECK(fp_dataset_shape(nullptr, &n, &dim) == FP_ERR_INVALID_ARGUMENT);
  fp_dataset_free(nullptr);
  fp_model_free(nullptr);
  fp_string_free(nullptr);
}

TEST_CASE("errors are categorized") {
  fp_dataset* d = nullptr;
  CHECK(fp_dataset_generate(100, -1.0, 0.0, 0, &d) == FP_ERR_INVALID_ARGUMENT);
  CHECK(d == nullptr);
  CHECK(fp_dataset_load_csv(TempPath("missing.csv").c_str(), nullptr, nullptr,
                            &d) == FP_ERR_IO);
  fp_model* m = nullptr;
  CHECK(fp_model_from_json("{not json", &m) == FP_ERR_PARSE);
  CHECK(m == nullptr);
}

TEST_CASE("dataset generate, save, load and split") {
  fp_dataset* d = Generate(200, 4.0, 1);
  size_t n = 0, dim = 0;
  REQUIRE(fp_dataset_shape(d, &n, &dim) == FP_OK);
  CHECK(n == 200);
  CHECK(dim == 2);
  size_t pos = 0, priv = 0, unpriv = 0, none = 0;
  REQUIRE(fp_dataset_counts(d, &pos, &priv, &unpriv, &none) == FP_OK);
  CHECK(priv + unpriv == 200);
  CHECK(none == 0);

  const std::string path = TempPath("data.csv");
  REQUIRE(fp_dataset_save_csv(d, path.c_str()) == FP_OK);
  fp_dataset* back = nullptr;
  REQUIRE(fp_dataset_load_csv(path.c_str(), nullptr, nullptr, &back) == FP_OK);
  size_t pos2 = 0, priv2 = 0, unpriv2 = 0, none2 = 0;
  fp_dataset_counts(back, &pos2, &priv2, &unpriv2, &none2);
  CHECK(pos2 == pos);
  CHECK(priv2 == priv);

  fp_dataset *train = nullptr, *val = nullptr, *test = nullptr;
  REQUIRE(fp_dataset_split(d, 3, &train, &val, &test) == FP_OK);
  fp_dataset_shape(train, &n, &dim);
  CHECK(n == 100);
  fp_dataset_shape(test, &n, &dim);
  CHECK(n == 40);
  for (fp_dataset* p : {d, back, train, val, test}) fp_dataset_free(p);
}

TEST_CASE("train, serialize, evaluate and predict") {
  fp_dataset* d = Generate(300, 5.0, 2);
  fp_model* m = nullptr;
  REQUIRE(fp_model_train_linear(d, "logistic", -1.0, 0, &m) == FP_OK);
  const std::string json = Take([&] {
    char* s = nullptr;
    REQUIRE(fp_model_to_json(m, &s) == FP_OK);
    return s;
  }());
  fp_model* copy = nullptr;
  REQUIRE(fp_model_from_json(json.c_str(), &copy) == FP_OK);

  std::vector<int> a(300), b(300);
  REQUIRE(fp_model_predict(m, d, a.data(), a.size()) == FP_OK);
  REQUIRE(fp_model_predict(copy, d, b.data(), b.size()) == FP_OK);
  CHECK(a == b);
  CHECK(fp_model_predict(m, d, a.data(), 10) == FP_ERR_INVALID_ARGUMENT);

  char* metrics = nullptr;
  REQUIRE(fp_model_evaluate(m, d, 0.2, &metrics) == FP_OK);
  CHECK(Take(metrics).find("\"demographic_parity\"") != std::string::npos);

  fp_model* tree = nullptr;
  REQUIRE(fp_model_train_target(d, "decision_tree", 0, &tree) == FP_OK);
  const std::string path = TempPath("tree.json");
  REQUIRE(fp_model_save(tree, path.c_str()) == FP_OK);
  fp_model* loaded = nullptr;
  REQUIRE(fp_model_load(path.c_str(), &loaded) == FP_OK);
  REQUIRE(fp_model_predict(tree, d, a.data(), a.size()) == FP_OK);
  REQUIRE(fp_model_predict(loaded, d, b.data(), b.size()) == FP_OK);
  CHECK(a == b);
  CHECK(fp_model_train_target(d, "knn", 0, &tree) == FP_ERR_INVALID_ARGUMENT);

  for (fp_model* p : {m, copy, tree, loaded}) fp_model_free(p);
  fp_dataset_free(d);
}

TEST_CASE("attack options validation lists every problem") {
  fp_attack_options o;
  fp_attack_options_init(&o);
  char* problems = nullptr;
  REQUIRE(fp_attack_options_check(&o, &problems) == FP_OK);
  CHECK(Take(problems).empty());
  o.step_size = 0.0;
  o.max_iterations = 0;
  o.loss = "hinge";
  REQUIRE(fp_attack_options_check(&o, &problems) == FP_OK);
  const std::string text = Take(problems);
  CHECK(text.find("step_size") != std::string::npos);
  CHECK(text.find("max_iterations") != std::string::npos);
  CHECK(text.find("hinge") != std::string::npos);
}

TEST_CASE("attack run yields the requested poison") {
  fp_dataset* d = Generate(200, 5.0, 4);
  fp_dataset *train = nullptr, *val = nullptr, *test = nullptr;
  REQUIRE(fp_dataset_split(d, 4, &train, &val, &test) == FP_OK);
  fp_attack_options o;
  fp_attack_options_init(&o);
  o.budget_count = 3;
  o.max_iterations = 5;
  o.reg_c = 1.0;
  fp_attack_result* r = nullptr;
  REQUIRE(fp_attack_run(train, val, &o, &r) == FP_OK);
  fp_dataset* points = nullptr;
  REQUIRE(fp_attack_points(r, &points) == FP_OK);
  size_t n = 0, dim = 0, pos = 0, priv = 0, unpriv = 0, none = 0;
  fp_dataset_shape(points, &n, &dim);
  CHECK(n == 3);
  fp_dataset_counts(points, &pos, &priv, &unpriv, &none);
  CHECK(none == 3);
  fp_model* poisoned = nullptr;
  REQUIRE(fp_attack_poisoned_model(r, &poisoned) == FP_OK);
  char* trace = nullptr;
  REQUIRE(fp_attack_trace_csv(r, &trace) == FP_OK);
  CHECK(Take(trace).rfind("iteration,point_index,value,step_size", 0) == 0);
  fp_model_free(poisoned);
  fp_dataset_free(points);
  fp_attack_result_free(r);
  for (fp_dataset* p : {d, train, val, test}) fp_dataset_free(p);
}

TEST_CASE("experiment report through the C interface") {
  fp_experiment_options o;
  fp_experiment_options_init(&o);
  const double fractions[] = {0.0};
  o.sweep = "fraction";
  o.values = fractions;
  o.n_values = 1;
  o.runs = 1;
  o.n_samples = 200;
  o.separation = 5.0;
  o.attack.reg_c = 1.0;
  fp_report* r = nullptr;
  REQUIRE(fp_experiment_run(&o, nullptr, &r) == FP_OK);
  size_t failed = 99;
  REQUIRE(fp_report_failed_runs(r, &failed) == FP_OK);
  CHECK(failed == 0);
  char* csv = nullptr;
  REQUIRE(fp_report_csv(r, &csv) == FP_OK);
  CHECK(Take(csv).rfind("schema_version,", 0) == 0);
  char* json = nullptr;
  REQUIRE(fp_report_json(r, &json) == FP_OK);
  CHECK(Take(json).find("\"schema_version\": 1") != std::string::npos);
  fp_report_free(r);

  o.sweep = "diagonal";
  CHECK(fp_experiment_run(&o, nullptr, &r) == FP_ERR_INVALID_ARGUMENT);
}
