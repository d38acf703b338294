#include "fairpoison/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <thread>
#include <tuple>

#include "fairpoison/error.hpp"
#include "fairpoison/random.hpp"
#include "fairpoison/target_models.hpp"
#include "json.hpp"

namespace fairpoison {

namespace {

constexpr const char* kWhiteBox = "white_box";
constexpr const char* kBlackBox = "black_box";
constexpr const char* kGeneric = "generic";

const char* LinearTargetName(LossKind loss) {
  return loss == LossKind::kLogistic ? "logistic_regression" : "linear_svm";
}

// Runs f(0..n-1) on up to `jobs` threads. f must not throw.
void ParallelFor(std::size_t n, std::size_t jobs,
                 const std::function<void(std::size_t)>& f) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) f(i);
  };
  if (jobs == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(jobs);
  for (std::size_t k = 0; k < jobs; ++k) threads.emplace_back(worker);
}

struct PreparedRun {
  DataSplit split;
  SampleSet surrogate_train;
  SampleSet surrogate_validation;
  std::string dataset;
  std::optional<double> separation;
  std::uint64_t seed = 0;
  std::string test_digest;
};

PreparedRun Prepare(const DataSource& source, std::uint64_t seed,
                    const ExperimentOptions& options) {
  const std::uint64_t surrogate_seed =
      DeriveSeed(seed, options.black_box.surrogate_data_seed);
  if (const auto* synthetic = std::get_if<SyntheticSource>(&source)) {
    SampleSet data =
        GenerateSynthetic({synthetic->n_samples, synthetic->separation,
                           synthetic->rotation, seed});
    DataSplit split = Split(data, options.split, seed);
    SampleSet other =
        GenerateSynthetic({synthetic->n_samples, synthetic->separation,
                           synthetic->rotation, surrogate_seed});
    DataSplit other_split = Split(other, options.split, surrogate_seed);
    std::string digest = Fnv1aHex(split.test_indices);
    return PreparedRun{std::move(split),
                       std::move(other_split.train),
                       std::move(other_split.validation),
                       "synthetic",
                       synthetic->separation,
                       seed,
                       std::move(digest)};
  }
  const SampleSet& data = std::get<SampleSet>(source);
  DataSplit split = Split(data, options.split, seed);
  // No second draw exists for fixed data: the surrogate gets one half of the
  // validation split and the attacker scores on the other half.
  const std::size_t n_val = split.validation.size();
  std::vector<std::size_t> first(n_val / 2), second(n_val - n_val / 2);
  std::iota(first.begin(), first.end(), std::size_t{0});
  std::iota(second.begin(), second.end(), n_val / 2);
  SampleSet surrogate_train = split.validation.Subset(first);
  SampleSet surrogate_validation = split.validation.Subset(second);
  std::string digest = Fnv1aHex(split.test_indices);
  return PreparedRun{std::move(split),
                     std::move(surrogate_train),
                     std::move(surrogate_validation),
                     options.dataset_name,
                     std::nullopt,
                     seed,
                     std::move(digest)};
}

double PickC(const SampleSet& train, LossKind loss, std::uint64_t seed,
             const ExperimentOptions& options) {
  return SelectC(train, loss, options.c_grid, options.cv_folds, seed);
}

RunRecord BaseRecord(const PreparedRun& run, const char* scenario,
                     double fraction, std::size_t run_index) {
  RunRecord r;
  r.scenario = scenario;
  r.dataset = run.dataset;
  r.separation = run.separation;
  r.budget_fraction = fraction;
  r.run = run_index;
  r.seed = run.seed;
  r.test_digest = run.test_digest;
  return r;
}

AttackConfig BudgetedConfig(const ExperimentOptions& options, double fraction,
                            std::size_t train_size, std::uint64_t seed) {
  AttackConfig config = options.attack;
  config.budget =
      PoisonCount{ResolveBudget(PoisonFraction{fraction}, train_size)};
  config.seed = seed;
  return config;
}

MetricsRecord Evaluate(const LinearModel& model, const SampleSet& test) {
  return EvaluatePredictions(Predict(model, test.features()), test);
}

// White-box: the attacker differentiates through the deployed logistic
// regression and scores on the real validation split.
RunRecord RunWhiteBox(const PreparedRun& run, double fraction,
                      std::size_t run_index, bool generic,
                      const ExperimentOptions& options) {
  RunRecord record =
      BaseRecord(run, generic ? kGeneric : kWhiteBox, fraction, run_index);
  record.model = LinearTargetName(LossKind::kLogistic);
  const SampleSet& train = run.split.train;
  const double c = PickC(train, LossKind::kLogistic, run.seed, options);
  const ModelSpec spec{LossKind::kLogistic, c, {}};
  const AttackConfig config =
      BudgetedConfig(options, fraction, train.size(), run.seed);
  const AttackResult result =
      generic ? RunGenericAttack(train, run.split.validation, spec, config)
              : RunAttack(train, run.split.validation, spec, config);
  record.poison_count = result.points.size();
  record.clean = Evaluate(TrainLinear(train, spec.loss, c), run.split.test);
  record.poisoned = Evaluate(TrainLinear(result.poisoned_train, spec.loss, c),
                             run.split.test);
  return record;
}

SampleSet CraftBlackBoxPoison(const PreparedRun& run, double fraction,
                              const ExperimentOptions& options) {
  const LossKind loss = options.black_box.surrogate_loss;
  const double c = PickC(run.surrogate_train, loss, run.seed, options);
  const ModelSpec spec{loss, c, {}};
  const AttackConfig config =
      BudgetedConfig(options, fraction, run.split.train.size(), run.seed);
  const AttackResult result =
      RunAttack(run.surrogate_train, run.surrogate_validation, spec, config);
  return PoisonSampleSet(result.points, run.split.train.feature_names());
}

RunRecord TransferLinear(const PreparedRun& run, const SampleSet& poison,
                         LossKind target_loss, const char* scenario,
                         double fraction, std::size_t run_index,
                         const ExperimentOptions& options) {
  RunRecord record = BaseRecord(run, scenario, fraction, run_index);
  record.model = LinearTargetName(target_loss);
  record.poison_count = poison.size();
  const SampleSet& train = run.split.train;
  const double c = PickC(train, target_loss, run.seed, options);
  record.clean = Evaluate(TrainLinear(train, target_loss, c), run.split.test);
  record.poisoned = Evaluate(TrainLinear(train.Concat(poison), target_loss, c),
                             run.split.test);
  return record;
}

RunRecord RunBlackBox(const PreparedRun& run, double fraction,
                      std::size_t run_index, const ExperimentOptions& options) {
  const SampleSet poison = CraftBlackBoxPoison(run, fraction, options);
  return TransferLinear(run, poison, options.black_box.target_loss, kBlackBox,
                        fraction, run_index, options);
}

TargetModel TrainTarget(const std::string& name, const SampleSet& train,
                        std::uint64_t seed) {
  if (name == "gaussian_nb") return TrainGaussianNb(train);
  if (name == "decision_tree") return TrainDecisionTree(train, TreeParams{});
  if (name == "random_forest") {
    ForestParams params;
    params.seed = seed;
    return TrainRandomForest(train, params);
  }
  return TrainRbfSvm(train, RbfSvmParams{});
}

std::vector<RunRecord> RunTransfer(const PreparedRun& run, double fraction,
                                   std::size_t run_index,
                                   const ExperimentOptions& options) {
  const SampleSet poison = CraftBlackBoxPoison(run, fraction, options);
  std::vector<RunRecord> out;
  for (LossKind loss : {LossKind::kLogistic, LossKind::kSquaredHinge}) {
    out.push_back(TransferLinear(run, poison, loss, kBlackBox, fraction,
                                 run_index, options));
  }
  const SampleSet poisoned_train = run.split.train.Concat(poison);
  for (const char* name :
       {"rbf_svm", "gaussian_nb", "decision_tree", "random_forest"}) {
    RunRecord record = BaseRecord(run, kBlackBox, fraction, run_index);
    record.model = name;
    record.poison_count = poison.size();
    const TargetModel clean = TrainTarget(name, run.split.train, run.seed);
    const TargetModel dirty = TrainTarget(name, poisoned_train, run.seed);
    record.clean = EvaluatePredictions(
        PredictTarget(clean, run.split.test.features()), run.split.test);
    record.poisoned = EvaluatePredictions(
        PredictTarget(dirty, run.split.test.features()), run.split.test);
    out.push_back(std::move(record));
  }
  return out;
}

// One unit of work whose failure is recorded against the rows it would have
// produced.
struct Unit {
  const char* scenario;
  std::vector<std::string> models;
  std::function<std::vector<RunRecord>(const PreparedRun&)> body;
};

std::vector<RunRecord> ExecuteTask(const DataSource& source, double fraction,
                                   std::size_t run_index,
                                   const std::vector<Unit>& units,
                                   const ExperimentOptions& options) {
  const std::uint64_t seed = options.seed + run_index;
  std::optional<PreparedRun> run;
  std::string prepare_error;
  try {
    run = Prepare(source, seed, options);
  } catch (const std::exception& e) {
    prepare_error = e.what();
  }
  std::vector<RunRecord> out;
  for (const Unit& unit : units) {
    std::string error = prepare_error;
    if (run) {
      try {
        auto records = unit.body(*run);
        out.insert(out.end(), std::make_move_iterator(records.begin()),
                   std::make_move_iterator(records.end()));
        continue;
      } catch (const std::exception& e) {
        error = e.what();
      }
    }
    for (const std::string& model : unit.models) {
      RunRecord r;
      r.scenario = unit.scenario;
      if (const auto* s = std::get_if<SyntheticSource>(&source)) {
        r.dataset = "synthetic";
        r.separation = s->separation;
      } else {
        r.dataset = options.dataset_name;
      }
      r.budget_fraction = fraction;
      r.run = run_index;
      r.seed = seed;
      r.model = model;
      if (run) r.test_digest = run->test_digest;
      r.error = error.empty() ? "unknown failure" : error;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<Unit> AttackUnits(double fraction, std::size_t run_index,
                              const ExperimentOptions& options) {
  std::vector<Unit> units;
  units.push_back(Unit{kWhiteBox,
                       {LinearTargetName(LossKind::kLogistic)},
                       [=, &options](const PreparedRun& run) {
                         return std::vector<RunRecord>{RunWhiteBox(
                             run, fraction, run_index, false, options)};
                       }});
  if (options.include_black_box) {
    units.push_back(Unit{kBlackBox,
                         {LinearTargetName(options.black_box.target_loss)},
                         [=, &options](const PreparedRun& run) {
                           return std::vector<RunRecord>{
                               RunBlackBox(run, fraction, run_index, options)};
                         }});
  }
  if (options.include_generic) {
    units.push_back(Unit{kGeneric,
                         {LinearTargetName(LossKind::kLogistic)},
                         [=, &options](const PreparedRun& run) {
                           return std::vector<RunRecord>{RunWhiteBox(
                               run, fraction, run_index, true, options)};
                         }});
  }
  return units;
}

void CheckOptions(const ExperimentOptions& options) {
  const auto problems = options.Validate();
  if (problems.empty()) return;
  std::string message = "experiment options:";
  for (const auto& p : problems) message += "\n  " + p;
  throw Error(ErrorKind::kInvalidArgument, message);
}

ExperimentReport Assemble(std::string sweep, std::vector<double> parameters,
                          std::vector<std::vector<RunRecord>> per_task,
                          const ExperimentOptions& options) {
  ExperimentReport report;
  report.sweep = std::move(sweep);
  report.runs_configured = options.runs;
  report.options = options;
  report.parameters = std::move(parameters);
  for (auto& task : per_task) {
    for (auto& r : task) {
      if (!r.error.empty()) ++report.failed_runs;
      report.records.push_back(std::move(r));
    }
  }
  report.aggregates = Aggregate(report.records);
  return report;
}

// Tasks are (parameter, run) pairs in row-major order; results are merged in
// that order regardless of completion order.
ExperimentReport Sweep(std::string name, const std::vector<double>& parameters,
                       const ExperimentOptions& options,
                       const std::function<std::vector<RunRecord>(
                           std::size_t param, std::size_t run)>& task) {
  const std::size_t n = parameters.size() * options.runs;
  std::vector<std::vector<RunRecord>> results(n);
  ParallelFor(n, options.jobs, [&](std::size_t i) {
    results[i] = task(i / options.runs, i % options.runs);
  });
  return Assemble(std::move(name), parameters, std::move(results), options);
}

std::string Num(double v) { return FormatDouble(v); }

std::string OptionalNum(const std::optional<double>& v) {
  return v ? FormatDouble(*v) : "NA";
}

nlohmann::ordered_json JsonOptional(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::vector<std::string> ExperimentOptions::Validate() const {
  std::vector<std::string> problems = attack.Validate();
  if (runs == 0) problems.push_back("runs must be at least 1");
  if (cv_folds < 2) problems.push_back("cv_folds must be at least 2");
  if (c_grid.empty()) problems.push_back("c_grid must not be empty");
  for (double c : c_grid) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      problems.push_back("c_grid values must be positive and finite");
      break;
    }
  }
  const double total = split.train + split.validation + split.test;
  if (!(split.train > 0.0 && split.validation > 0.0 && split.test > 0.0) ||
      std::abs(total - 1.0) > 1e-9) {
    problems.push_back("split fractions must be positive and sum to 1");
  }
  return problems;
}

std::string Fnv1aHex(const std::vector<std::size_t>& values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t v : values) {
    auto x = static_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

MetricSummary Summarize(const std::vector<std::optional<double>>& values) {
  MetricSummary s;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++s.count;
    } else {
      ++s.excluded;
    }
  }
  if (s.count == 0) return s;
  const double mean = sum / static_cast<double>(s.count);
  s.mean = mean;
  if (s.count > 1) {
    double ss = 0.0;
    for (const auto& v : values) {
      if (v) ss += (*v - mean) * (*v - mean);
    }
    s.std_dev = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  return s;
}

std::vector<AggregateRow> Aggregate(const std::vector<RunRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::optional<double>,
                         double, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) {
    Key key{r.scenario, r.dataset, r.separation, r.budget_fraction, r.model};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (const Key& key : order) {
    const auto& members = groups.at(key);
    std::size_t failed = 0;
    for (const RunRecord* r : members) failed += r->error.empty() ? 0 : 1;
    for (const char* set : {"clean", "poisoned", "delta"}) {
      AggregateRow row;
      std::tie(row.scenario, row.dataset, row.separation, row.budget_fraction,
               row.model) = key;
      row.metric_set = set;
      row.runs = members.size();
      row.failed_runs = failed;
      for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        std::vector<std::optional<double>> values;
        for (const RunRecord* r : members) {
          if (!r->error.empty()) continue;
          const auto c = MetricByIndex(*r->clean, k);
          const auto p = MetricByIndex(*r->poisoned, k);
          if (row.metric_set == "clean") {
            values.push_back(c);
          } else if (row.metric_set == "poisoned") {
            values.push_back(p);
          } else {
            values.push_back(c && p ? std::optional<double>(*p - *c)
                                    : std::nullopt);
          }
        }
        row.metrics.push_back(Summarize(values));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

ExperimentReport RunSeparationSweep(const std::vector<double>& separations,
                                    const SyntheticSource& base,
                                    const ExperimentOptions& options) {
  CheckOptions(options);
  if (separations.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "separation sweep needs values");
  }
  for (double s : separations) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "separations must be finite and non-negative");
    }
  }
  const auto* fraction = std::get_if<PoisonFraction>(&options.attack.budget);
  if (!fraction) {
    throw Error(ErrorKind::kInvalidArgument,
                "separation sweep needs a fractional budget");
  }
  const double f = fraction->fraction;
  return Sweep("separation", separations, options,
               [&](std::size_t p, std::size_t run) {
                 SyntheticSource source = base;
                 source.separation = separations[p];
                 return ExecuteTask(source, f, run,
                                    AttackUnits(f, run, options), options);
               });
}

ExperimentReport RunFractionSweep(const DataSource& source,
                                  const std::vector<double>& fractions,
                                  const ExperimentOptions& options) {
  CheckOptions(options);
  if (fractions.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "fraction sweep needs values");
  }
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "fractions must be finite and non-negative");
    }
  }
  return Sweep(
      "fraction", fractions, options, [&](std::size_t p, std::size_t run) {
        return ExecuteTask(source, fractions[p], run,
                           AttackUnits(fractions[p], run, options), options);
      });
}

ExperimentReport RunTransferStudy(const DataSource& source,
                                  const ExperimentOptions& options) {
  CheckOptions(options);
  const auto* fraction = std::get_if<PoisonFraction>(&options.attack.budget);
  if (!fraction) {
    throw Error(ErrorKind::kInvalidArgument,
                "transfer study needs a fractional budget");
  }
  const double f = fraction->fraction;
  return Sweep("transfer", {f}, options, [&](std::size_t, std::size_t run) {
    std::vector<Unit> units{
        Unit{kBlackBox,
             {"logistic_regression", "linear_svm", "rbf_svm", "gaussian_nb",
              "decision_tree", "random_forest"},
             [&, run](const PreparedRun& prepared) {
               return RunTransfer(prepared, f, run, options);
             }}};
    return ExecuteTask(source, f, run, units, options);
  });
}

std::string ReportCsv(const ExperimentReport& report) {
  std::string out =
      "schema_version,sweep,scenario,dataset,separation,budget_fraction,"
      "poison_count,run,seed,model,metric_set,test_digest,status," +
      MetricsCsvHeader() + "\n";
  std::string missing;
  for (std::size_t k = 0; k < kMetricNames.size(); ++k) missing += "NA,";
  missing += Num(kDefaultFairnessEpsilon) + ",NA";
  for (const RunRecord& r : report.records) {
    for (const char* set : {"clean", "poisoned"}) {
      out += std::to_string(kReportSchemaVersion) + ',' + report.sweep + ',' +
             r.scenario + ',' + r.dataset + ',' + OptionalNum(r.separation) +
             ',' + Num(r.budget_fraction) + ',' +
             std::to_string(r.poison_count) + ',' + std::to_string(r.run) +
             ',' + std::to_string(r.seed) + ',' + r.model + ',' + set + ',' +
             r.test_digest + ',' + (r.error.empty() ? "ok" : "failed") + ',';
      if (r.error.empty()) {
        out += MetricsCsvRow(std::string_view(set) == "clean" ? *r.clean
                                                              : *r.poisoned);
      } else {
        out += missing;
      }
      out += '\n';
    }
  }
  return out;
}

std::string ReportJson(const ExperimentReport& report) {
  using Json = nlohmann::ordered_json;
  const ExperimentOptions& o = report.options;
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["sweep"] = report.sweep;
  j["runs_configured"] = report.runs_configured;
  j["seed"] = o.seed;
  j["parameters"] = report.parameters;

  Json attack;
  attack["step_size"] = o.attack.step_size;
  attack["stop_threshold"] = o.attack.stop_threshold;
  attack["max_iterations"] = o.attack.max_iterations;
  if (const auto* f = std::get_if<PoisonFraction>(&o.attack.budget)) {
    attack["budget_fraction"] = f->fraction;
  } else {
    attack["budget_count"] = std::get<PoisonCount>(o.attack.budget).count;
  }
  if (const auto* fixed = std::get_if<FixedLambda>(&o.attack.lambda)) {
    attack["lambda"] = fixed->value;
  } else {
    attack["lambda"] = "priors_ratio";
  }
  attack["standardize"] = o.attack.standardize;
  j["attack"] = attack;
  j["cv_folds"] = o.cv_folds;
  j["c_grid"] = o.c_grid;
  j["split"] = {o.split.train, o.split.validation, o.split.test};
  j["black_box"] = {
      {"enabled", o.include_black_box},
      {"surrogate_loss", LossKindName(o.black_box.surrogate_loss)},
      {"target_loss", LossKindName(o.black_box.target_loss)},
      {"surrogate_data_seed", o.black_box.surrogate_data_seed}};
  j["include_generic"] = o.include_generic;

  j["failed_runs"] = report.failed_runs;
  Json failures = Json::array();
  for (const RunRecord& r : report.records) {
    if (r.error.empty()) continue;
    failures.push_back({{"scenario", r.scenario},
                        {"dataset", r.dataset},
                        {"separation", JsonOptional(r.separation)},
                        {"budget_fraction", r.budget_fraction},
                        {"run", r.run},
                        {"model", r.model},
                        {"error", r.error}});
  }
  j["failures"] = failures;

  Json aggregates = Json::array();
  for (const AggregateRow& row : report.aggregates) {
    Json a;
    a["scenario"] = row.scenario;
    a["dataset"] = row.dataset;
    a["separation"] = JsonOptional(row.separation);
    a["budget_fraction"] = row.budget_fraction;
    a["model"] = row.model;
    a["metric_set"] = row.metric_set;
    a["runs"] = row.runs;
    a["failed_runs"] = row.failed_runs;
    Json metrics;
    for (std::size_t k = 0; k < row.metrics.size(); ++k) {
      const MetricSummary& s = row.metrics[k];
      metrics[std::string(kMetricNames[k])] = {{"mean", JsonOptional(s.mean)},
                                               {"std", s.std_dev},
                                               {"count", s.count},
                                               {"excluded", s.excluded}};
    }
    a["metrics"] = metrics;
    aggregates.push_back(std::move(a));
  }
  j["aggregates"] = aggregates;
  return j.dump(2) + "\n";
}

}  // namespace fairpoison
