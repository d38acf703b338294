// Command-line front end. Everything below goes through the C API.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fairpoison/fairpoison.h"

namespace {

namespace fs = std::filesystem;

// Exit codes: 0 success, 1 usage, otherwise 1 + fp_status.
int ExitCode(fp_status s) { return s == FP_OK ? 0 : 1 + static_cast<int>(s); }

struct Failure {
  fp_status status;
  std::string message;
};

void Check(fp_status s) {
  if (s != FP_OK) throw Failure{s, fp_last_error()};
}

void Log(const std::string& level, const std::string& cmd,
         const std::string& msg, const std::string& extra = "") {
  std::cerr << "level=" << level << " cmd=" << cmd << " msg=\"" << msg << '"';
  if (!extra.empty()) std::cerr << ' ' << extra;
  std::cerr << '\n';
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset =
    std::unique_ptr<fp_dataset, Deleter<fp_dataset, fp_dataset_free>>;
using Model = std::unique_ptr<fp_model, Deleter<fp_model, fp_model_free>>;
using AttackResult =
    std::unique_ptr<fp_attack_result,
                    Deleter<fp_attack_result, fp_attack_result_free>>;
using Report = std::unique_ptr<fp_report, Deleter<fp_report, fp_report_free>>;

std::string TakeString(char* s) {
  std::string out(s ? s : "");
  fp_string_free(s);
  return out;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.flush();
  if (!out) throw Failure{FP_ERR_IO, "cannot write " + path.string()};
}

Dataset LoadData(const std::string& path) {
  fp_dataset* d = nullptr;
  Check(fp_dataset_load_csv(path.c_str(), nullptr, nullptr, &d));
  return Dataset(d);
}

// Reads a flat key = value file and scopes every key to the subcommand being
// run, so one file format serves all subcommands.
class SubcommandConfig : public CLI::ConfigBase {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigBase::from_config(input);
    const auto subs = app_->get_subcommands();
    if (subs.empty()) return items;
    for (auto& item : items) {
      if (!item.parents.empty()) {
        throw CLI::ConfigError("config sections are not supported: " +
                               item.fullname());
      }
      item.parents = {subs.front()->get_name()};
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

std::string Shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Round-trip default string so the echoed config reproduces the run exactly.
CLI::Option* Real(CLI::App* sub, const std::string& name, double& value,
                  const std::string& description) {
  return sub->add_option(name, value, description)
      ->default_str(Shortest(value));
}

struct Common {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
};

CLI::App* AddCommand(CLI::App& app, const std::string& name,
                     const std::string& description, Common& common,
                     bool needs_out_dir = true) {
  CLI::App* sub = app.add_subcommand(name, description);
  sub->fallthrough();
  sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
  sub->add_option("--jobs", common.jobs, "Worker threads for experiments")
      ->capture_default_str();
  if (needs_out_dir) {
    sub->add_option("--out-dir", common.out_dir, "Output directory")
        ->required();
  }
  return sub;
}

// Creates the output directory and echoes the effective configuration.
fs::path PrepareOutDir(const CLI::App& sub, const Common& common) {
  fs::path dir(common.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw Failure{FP_ERR_IO,
                  "cannot create " + dir.string() + ": " + ec.message()};
  std::string config = sub.config_to_str(true, false);
  WriteText(dir / "config.toml", config);
  return dir;
}

void ReportProblems(const std::string& cmd,
                    const std::vector<std::string>& problems) {
  std::string joined;
  for (const auto& p : problems) {
    Log("error", cmd, p);
    joined += (joined.empty() ? "" : "; ") + p;
  }
  throw Failure{FP_ERR_INVALID_ARGUMENT, std::to_string(problems.size()) +
                                             " invalid setting(s): " + joined};
}

std::vector<std::string> SplitLines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

struct AttackFlags {
  double step_size = 0.1;
  double stop_threshold = 1e-5;
  int max_iterations = 100;
  double budget_fraction = 0.05;
  std::int64_t budget_count = -1;
  double lambda = -1.0;
  bool no_standardize = false;
  std::string loss = "logistic";
  double reg_c = 0.0;

  void Register(CLI::App* sub) {
    Real(sub, "--step-size", step_size, "Step length in standardized units");
    Real(sub, "--stop-threshold", stop_threshold,
         "Stop when the objective changes by at most this");
    sub->add_option("--max-iter", max_iterations, "Iterations per poison point")
        ->capture_default_str();
    Real(sub, "--lambda", lambda,
         "Privileged-group weight; negative uses the group-size ratio");
    sub->add_flag("--no-standardize", no_standardize,
                  "Take steps in raw feature units");
  }

  fp_attack_options Options(std::uint64_t seed) const {
    fp_attack_options o;
    fp_attack_options_init(&o);
    o.step_size = step_size;
    o.stop_threshold = stop_threshold;
    o.max_iterations = max_iterations;
    o.budget_fraction = budget_fraction;
    o.budget_count = budget_count;
    o.lambda = lambda;
    o.standardize = no_standardize ? 0 : 1;
    o.loss = loss.c_str();
    o.reg_c = reg_c;
    o.seed = seed;
    return o;
  }

  std::vector<std::string> Problems(std::uint64_t seed) const {
    const fp_attack_options o = Options(seed);
    char* text = nullptr;
    Check(fp_attack_options_check(&o, &text));
    return SplitLines(TakeString(text));
  }
};

const char* const kTargetKinds[] = {"gaussian_nb", "decision_tree",
                                    "random_forest", "rbf_svm"};

bool IsTargetKind(const std::string& s) {
  for (const char* k : kTargetKinds) {
    if (s == k) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness poisoning attacks on linear classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fp_version()));
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));
  app.set_config("--config", "",
                 "Flat key = value config file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  Common common;

  // generate
  std::size_t n_samples = 2000;
  double separation = 0.0;
  double rotation = std::numbers::pi / 4.0;
  CLI::App* generate =
      AddCommand(app, "generate", "Draw a synthetic dataset", common);
  generate->add_option("--n", n_samples, "Number of samples")
      ->capture_default_str();
  Real(generate, "--separation", separation,
       "Distance between class centroids");
  Real(generate, "--rotation", rotation, "Rotation angle for the group draw");

  // inspect
  std::string data_path;
  CLI::App* inspect =
      AddCommand(app, "inspect", "Print dataset counts", common, false);
  inspect->add_option("--data", data_path, "Dataset CSV")->required();

  // split
  CLI::App* split =
      AddCommand(app, "split", "Split a dataset 50/30/20", common);
  split->add_option("--data", data_path, "Dataset CSV")->required();

  // train
  std::string model_kind = "logistic";
  std::string eval_path;
  double reg_c = 0.0;
  CLI::App* train = AddCommand(app, "train", "Train a model", common);
  train->add_option("--data", data_path, "Training CSV")->required();
  train
      ->add_option("--model", model_kind,
                   "logistic, squared_hinge, gaussian_nb, decision_tree, "
                   "random_forest or rbf_svm")
      ->capture_default_str();
  Real(train, "--reg-c", reg_c,
       "Linear models: C; 0 selects by cross-validation");
  train->add_option("--eval", eval_path,
                    "CSV to evaluate on (default: training data)");

  // attack
  std::string train_path, validation_path;
  bool generic = false;
  AttackFlags attack_flags;
  CLI::App* attack = AddCommand(app, "attack", "Craft poison points", common);
  attack->add_option("--train", train_path, "Training CSV")->required();
  attack->add_option("--validation", validation_path, "Validation CSV")
      ->required();
  Real(attack, "--budget-fraction", attack_flags.budget_fraction,
       "Poison points as a fraction of the training size");
  attack
      ->add_option(
          "--budget-count", attack_flags.budget_count,
          "Absolute number of poison points; negative uses the fraction")
      ->capture_default_str();
  attack->add_option("--loss", attack_flags.loss, "Attacked learner loss")
      ->capture_default_str();
  Real(attack, "--reg-c", attack_flags.reg_c,
       "C; 0 selects by cross-validation");
  attack->add_flag("--generic", generic,
                   "Maximize plain validation loss instead");
  attack_flags.Register(attack);

  // evaluate
  std::string model_path;
  double epsilon = 0.2;
  CLI::App* evaluate =
      AddCommand(app, "evaluate", "Score a model on a dataset", common);
  evaluate->add_option("--model", model_path, "Model JSON")->required();
  evaluate->add_option("--data", data_path, "Dataset CSV")->required();
  Real(evaluate, "--epsilon", epsilon, "Disparate impact tolerance");

  // experiment
  std::string sweep = "separation";
  std::vector<double> values;
  std::size_t runs = 10;
  double budget_fraction = 0.05;
  std::string dataset_name = "dataset";
  std::string target_loss = "squared_hinge";
  bool no_black_box = false;
  bool generic_baseline = false;
  AttackFlags experiment_flags;
  CLI::App* experiment =
      AddCommand(app, "experiment", "Run an experiment sweep", common);
  experiment->add_option("--sweep", sweep, "separation, fraction or transfer")
      ->capture_default_str();
  CLI::Option* values_opt = experiment->add_option(
      "--values", values,
      "Separations or fractions (defaults: 0..9 / 0.05 0.1 0.2 0.3)");
  CLI::Option* runs_opt =
      experiment
          ->add_option("--runs", runs, "Runs per setting (transfer default: 5)")
          ->capture_default_str();
  experiment->add_option("--data", data_path,
                         "Dataset CSV instead of synthetic data");
  experiment
      ->add_option("--dataset-name", dataset_name,
                   "Label for --data in reports")
      ->capture_default_str();
  experiment->add_option("--n", n_samples, "Synthetic sample count")
      ->capture_default_str();
  Real(experiment, "--separation", separation,
       "Synthetic separation for fraction and transfer sweeps");
  Real(experiment, "--rotation", rotation, "Synthetic rotation angle");
  Real(experiment, "--budget-fraction", budget_fraction,
       "Budget for separation and transfer sweeps");
  experiment
      ->add_option("--target-loss", target_loss, "Black-box linear target loss")
      ->capture_default_str();
  experiment->add_flag("--no-black-box", no_black_box,
                       "Skip the black-box scenario");
  experiment->add_flag("--generic-baseline", generic_baseline,
                       "Add the error-generic attack");
  experiment_flags.Register(experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (generate->parsed()) {
      std::vector<std::string> problems;
      if (n_samples < 10) problems.push_back("n must be at least 10");
      if (!(separation >= 0.0) || !std::isfinite(separation)) {
        problems.push_back("separation must be finite and non-negative");
      }
      if (!std::isfinite(rotation))
        problems.push_back("rotation must be finite");
      if (!problems.empty()) ReportProblems("generate", problems);
      const fs::path dir = PrepareOutDir(*generate, common);
      fp_dataset* raw = nullptr;
      Check(fp_dataset_generate(n_samples, separation, rotation, common.seed,
                                &raw));
      Dataset data(raw);
      Check(
          fp_dataset_save_csv(data.get(), (dir / "data.csv").string().c_str()));
      Log("info", "generate", "wrote dataset",
          "path=" + (dir / "data.csv").string() +
              " rows=" + std::to_string(n_samples));
    } else if (inspect->parsed()) {
      Dataset data = LoadData(data_path);
      std::size_t n = 0, d = 0, pos = 0, priv = 0, unpriv = 0, none = 0;
      Check(fp_dataset_shape(data.get(), &n, &d));
      Check(fp_dataset_counts(data.get(), &pos, &priv, &unpriv, &none));
      std::cout << "samples: " << n << "\nfeatures: " << d
                << "\npositive: " << pos << "\nnegative: " << n - pos
                << "\nprivileged: " << priv << "\nunprivileged: " << unpriv
                << "\nuntagged: " << none << '\n';
    } else if (split->parsed()) {
      Dataset data = LoadData(data_path);
      const fs::path dir = PrepareOutDir(*split, common);
      fp_dataset *a = nullptr, *b = nullptr, *c = nullptr;
      Check(fp_dataset_split(data.get(), common.seed, &a, &b, &c));
      Dataset tr(a), va(b), te(c);
      Check(
          fp_dataset_save_csv(tr.get(), (dir / "train.csv").string().c_str()));
      Check(fp_dataset_save_csv(va.get(),
                                (dir / "validation.csv").string().c_str()));
      Check(fp_dataset_save_csv(te.get(), (dir / "test.csv").string().c_str()));
      Log("info", "split", "wrote splits", "dir=" + dir.string());
    } else if (train->parsed()) {
      std::vector<std::string> problems;
      const bool linear =
          model_kind == "logistic" || model_kind == "squared_hinge";
      if (!linear && !IsTargetKind(model_kind)) {
        problems.push_back("unknown model '" + model_kind + "'");
      }
      if (reg_c < 0.0 || !std::isfinite(reg_c)) {
        problems.push_back("reg-c must be finite and non-negative");
      }
      if (!problems.empty()) ReportProblems("train", problems);
      Dataset data = LoadData(data_path);
      Dataset eval_data = eval_path.empty() ? nullptr : LoadData(eval_path);
      const fs::path dir = PrepareOutDir(*train, common);
      fp_model* raw = nullptr;
      if (linear) {
        Check(fp_model_train_linear(data.get(), model_kind.c_str(), reg_c,
                                    common.seed, &raw));
      } else {
        Check(fp_model_train_target(data.get(), model_kind.c_str(), common.seed,
                                    &raw));
      }
      Model model(raw);
      Check(fp_model_save(model.get(), (dir / "model.json").string().c_str()));
      char* metrics = nullptr;
      Check(fp_model_evaluate(model.get(),
                              eval_data ? eval_data.get() : data.get(), 0.2,
                              &metrics));
      WriteText(dir / "metrics.json", TakeString(metrics));
      Log("info", "train", "wrote model and metrics", "dir=" + dir.string());
    } else if (attack->parsed()) {
      auto problems = attack_flags.Problems(common.seed);
      if (attack_flags.reg_c < 0.0)
        problems.push_back("reg-c must be non-negative");
      if (!problems.empty()) ReportProblems("attack", problems);
      Dataset tr = LoadData(train_path);
      Dataset va = LoadData(validation_path);
      const fs::path dir = PrepareOutDir(*attack, common);
      fp_attack_options options = attack_flags.Options(common.seed);
      options.generic = generic ? 1 : 0;
      fp_attack_result* raw = nullptr;
      Check(fp_attack_run(tr.get(), va.get(), &options, &raw));
      AttackResult result(raw);
      fp_dataset* points_raw = nullptr;
      Check(fp_attack_points(result.get(), &points_raw));
      Dataset points(points_raw);
      Check(fp_dataset_save_csv(points.get(),
                                (dir / "poison.csv").string().c_str()));
      fp_model* model_raw = nullptr;
      Check(fp_attack_poisoned_model(result.get(), &model_raw));
      Model model(model_raw);
      Check(fp_model_save(model.get(),
                          (dir / "poisoned_model.json").string().c_str()));
      char* trace = nullptr;
      Check(fp_attack_trace_csv(result.get(), &trace));
      WriteText(dir / "trace.csv", TakeString(trace));
      std::size_t count = 0;
      Check(fp_dataset_shape(points.get(), &count, nullptr));
      Log("info", "attack", "wrote poison points",
          "dir=" + dir.string() + " points=" + std::to_string(count));
    } else if (evaluate->parsed()) {
      if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        ReportProblems("evaluate", {"epsilon must lie in [0, 1]"});
      }
      fp_model* raw = nullptr;
      Check(fp_model_load(model_path.c_str(), &raw));
      Model model(raw);
      Dataset data = LoadData(data_path);
      const fs::path dir = PrepareOutDir(*evaluate, common);
      char* metrics = nullptr;
      Check(fp_model_evaluate(model.get(), data.get(), epsilon, &metrics));
      WriteText(dir / "metrics.json", TakeString(metrics));
      Log("info", "evaluate", "wrote metrics", "dir=" + dir.string());
    } else if (experiment->parsed()) {
      const bool fraction = sweep == "fraction";
      if (runs_opt->count() == 0 && sweep == "transfer") {
        runs = 5;
        runs_opt->clear();
        runs_opt->add_result("5");
      }
      if (values.empty()) {
        values = fraction ? std::vector<double>{0.05, 0.10, 0.20, 0.30}
                          : std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
        values_opt->clear();
        for (double v : values) values_opt->add_result(Shortest(v));
      }
      auto problems = experiment_flags.Problems(common.seed);
      if (sweep != "separation" && sweep != "fraction" && sweep != "transfer") {
        problems.push_back("sweep must be separation, fraction or transfer");
      }
      if (sweep == "separation" && !data_path.empty()) {
        problems.push_back("the separation sweep runs on synthetic data only");
      }
      if (runs == 0) problems.push_back("runs must be at least 1");
      if (common.jobs == 0) problems.push_back("jobs must be at least 1");
      if (n_samples < 10) problems.push_back("n must be at least 10");
      if (!(budget_fraction >= 0.0))
        problems.push_back("budget-fraction must be non-negative");
      if (target_loss != "logistic" && target_loss != "squared_hinge") {
        problems.push_back("target-loss must be logistic or squared_hinge");
      }
      for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          problems.push_back("values must be finite and non-negative");
          break;
        }
      }
      if (!problems.empty()) ReportProblems("experiment", problems);
      Dataset data = data_path.empty() ? nullptr : LoadData(data_path);
      const fs::path dir = PrepareOutDir(*experiment, common);

      fp_experiment_options options;
      fp_experiment_options_init(&options);
      options.sweep = sweep.c_str();
      options.values = values.data();
      options.n_values = values.size();
      options.runs = runs;
      options.seed = common.seed;
      options.jobs = common.jobs;
      options.n_samples = n_samples;
      options.separation = separation;
      options.rotation = rotation;
      options.budget_fraction = budget_fraction;
      options.include_black_box = no_black_box ? 0 : 1;
      options.include_generic = generic_baseline ? 1 : 0;
      options.target_loss = target_loss.c_str();
      options.dataset_name = dataset_name.c_str();
      options.attack = experiment_flags.Options(common.seed);
      Log("info", "experiment", "starting",
          "sweep=" + sweep + " runs=" + std::to_string(runs) +
              " settings=" + std::to_string(values.size()) +
              " jobs=" + std::to_string(common.jobs));
      fp_report* raw = nullptr;
      Check(fp_experiment_run(&options, data.get(), &raw));
      Report report(raw);
      char* csv = nullptr;
      Check(fp_report_csv(report.get(), &csv));
      WriteText(dir / "report.csv", TakeString(csv));
      char* json = nullptr;
      Check(fp_report_json(report.get(), &json));
      WriteText(dir / "report.json", TakeString(json));
      std::size_t failed = 0;
      Check(fp_report_failed_runs(report.get(), &failed));
      if (failed > 0) {
        Log("warn", "experiment",
            "runs failed and were excluded from aggregates",
            "failed=" + std::to_string(failed));
      }
      Log("info", "experiment", "wrote report", "dir=" + dir.string());
    }
  } catch (const Failure& f) {
    Log("error", app.get_subcommands().front()->get_name(), f.message,
        std::string("status=") + fp_status_name(f.status));
    return ExitCode(f.status);
  }
  return 0;
}
