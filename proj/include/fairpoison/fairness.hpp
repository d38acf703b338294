#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fairpoison/dataset.hpp"

namespace fairpoison {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct GroupedConfusion {
  ConfusionCounts privileged;
  ConfusionCounts unprivileged;

  bool operator==(const GroupedConfusion&) const = default;
};

GroupedConfusion Confusion(std::span<const int> predictions,
                           std::span<const int> labels,
                           std::span<const GroupTag> groups);

// Undefined values (empty groups, zero denominators) are nullopt.

/// P(yhat=+1 | unprivileged) - P(yhat=+1 | privileged).
std::optional<double> DemographicParity(const GroupedConfusion& conf);

/// P(yhat=+1 | unprivileged) / P(yhat=+1 | privileged).
std::optional<double> DisparateImpact(const GroupedConfusion& conf);

/// ((FPR_p - FPR_u) + (TPR_p - TPR_u)) / 2.
std::optional<double> AverageOddsDifference(const GroupedConfusion& conf);

struct GroupRates {
  std::optional<double> fnr_priv;
  std::optional<double> fnr_unpriv;
  std::optional<double> fpr_priv;
  std::optional<double> fpr_unpriv;
  std::optional<double> accuracy;
};

GroupRates Rates(const GroupedConfusion& conf);

inline constexpr double kDefaultFairnessEpsilon = 0.2;

struct MetricsRecord {
  std::optional<double> accuracy;
  std::optional<double> demographic_parity;
  std::optional<double> disparate_impact;
  std::optional<double> average_odds_difference;
  std::optional<double> fnr_priv;
  std::optional<double> fnr_unpriv;
  std::optional<double> fpr_priv;
  std::optional<double> fpr_unpriv;
  double fairness_epsilon = kDefaultFairnessEpsilon;

  /// D < 1 - epsilon; undefined when D is.
  std::optional<bool> DisparateImpactUnfair() const;

  bool operator==(const MetricsRecord&) const = default;
};

MetricsRecord ComputeMetrics(const GroupedConfusion& conf,
                             double epsilon = kDefaultFairnessEpsilon);

/// Confusion + metrics for predictions on an evaluation set. Samples tagged
/// GroupTag::kNone are rejected.
MetricsRecord EvaluatePredictions(std::span<const int> predictions,
                                  const SampleSet& data,
                                  double epsilon = kDefaultFairnessEpsilon);

inline constexpr std::array<std::string_view, 8> kMetricNames = {
    "accuracy",         "demographic_parity",
    "disparate_impact", "average_odds_difference",
    "fnr_priv",         "fnr_unpriv",
    "fpr_priv",         "fpr_unpriv"};

/// Metric value by position in kMetricNames.
std::optional<double> MetricByIndex(const MetricsRecord& record,
                                    std::size_t index);

/// Flat JSON object; undefined values are null.
std::string MetricsToJson(const MetricsRecord& record);
MetricsRecord MetricsFromJson(const std::string& text);

/// CSV header and row with stable column order; undefined values are "NA".
std::string MetricsCsvHeader();
std::string MetricsCsvRow(const MetricsRecord& record);

}  // namespace fairpoison
