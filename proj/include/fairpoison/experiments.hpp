#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fairpoison/attack.hpp"
#include "fairpoison/dataset.hpp"
#include "fairpoison/fairness.hpp"
#include "fairpoison/linear_model.hpp"

namespace fairpoison {

inline constexpr int kReportSchemaVersion = 1;

struct WhiteBox {};

/// The attacker optimizes against a surrogate trained on data disjoint from
/// the target's training set; the poison is then handed to the target.
struct BlackBox {
  LossKind surrogate_loss = LossKind::kLogistic;
  LossKind target_loss = LossKind::kSquaredHinge;
  // Stream mixed into the run seed to draw the surrogate's synthetic data.
  std::uint64_t surrogate_data_seed = 1;
};

using Scenario = std::variant<WhiteBox, BlackBox>;

struct SyntheticSource {
  std::size_t n_samples = 2000;
  double separation = 0.0;
  double rotation = std::numbers::pi / 4.0;
};

/// Synthetic data is regenerated per run; a fixed sample set is re-split
/// per run.
using DataSource = std::variant<SyntheticSource, SampleSet>;

struct ExperimentOptions {
  AttackConfig attack;  // budget applies to the separation sweep only
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::size_t cv_folds = 5;
  std::vector<double> c_grid{std::begin(kDefaultCGrid),
                             std::end(kDefaultCGrid)};
  SplitFractions split;
  bool include_black_box = true;
  bool include_generic = false;
  BlackBox black_box;
  std::string dataset_name = "dataset";  // descriptor for SampleSet sources

  /// Every violated constraint, empty when valid.
  std::vector<std::string> Validate() const;
};

struct RunRecord {
  std::string scenario;  // white_box, black_box or generic
  std::string dataset;
  std::optional<double> separation;  // synthetic sources only
  double budget_fraction = 0.0;
  std::size_t poison_count = 0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::string model;  // target model evaluated
  // FNV-1a over the test row indices; identical for clean and poisoned.
  std::string test_digest;
  std::optional<MetricsRecord> clean;  // unset when the run failed
  std::optional<MetricsRecord> poisoned;
  std::string error;
};

struct MetricSummary {
  std::optional<double> mean;
  double std_dev = 0.0;  // sample standard deviation; 0 for one value
  std::size_t count = 0;
  std::size_t excluded = 0;  // undefined values left out
};

struct AggregateRow {
  std::string scenario;
  std::string dataset;
  std::optional<double> separation;
  double budget_fraction = 0.0;
  std::string model;
  std::string metric_set;  // clean, poisoned or delta (poisoned - clean)
  std::size_t runs = 0;
  std::size_t failed_runs = 0;
  std::vector<MetricSummary> metrics;  // kMetricNames order
};

struct ExperimentReport {
  std::string sweep;
  std::size_t runs_configured = 0;
  std::vector<RunRecord> records;  // (parameter, run, scenario, model) order
  std::vector<AggregateRow> aggregates;
  std::size_t failed_runs = 0;
  ExperimentOptions options;
  std::vector<double> parameters;  // separations or fractions swept
};

std::vector<AggregateRow> Aggregate(const std::vector<RunRecord>& records);

/// Mean and sample standard deviation of the defined values.
MetricSummary Summarize(const std::vector<std::optional<double>>& values);

/// For each separation and run: generate, split, select C, attack and
/// evaluate clean vs poisoned on the test split.
ExperimentReport RunSeparationSweep(const std::vector<double>& separations,
                                    const SyntheticSource& base,
                                    const ExperimentOptions& options);

/// Same protocol for each poison fraction on a fixed source.
ExperimentReport RunFractionSweep(const DataSource& source,
                                  const std::vector<double>& fractions,
                                  const ExperimentOptions& options);

/// One black-box attack per run against a logistic surrogate, transferred to
/// logistic regression, linear SVM, RBF SVM, Gaussian NB, a decision tree
/// and a random forest.
ExperimentReport RunTransferStudy(const DataSource& source,
                                  const ExperimentOptions& options);

/// Tidy CSV: one row per record and metric set.
std::string ReportCsv(const ExperimentReport& report);

/// JSON summary with aggregates and failures.
std::string ReportJson(const ExperimentReport& report);

std::string Fnv1aHex(const std::vector<std::size_t>& values);

}  // namespace fairpoison
