#include "fairpoison/fairness.hpp"

#include "fairpoison/error.hpp"
#include "json.hpp"

namespace fairpoison {

GroupedConfusion Confusion(std::span<const int> predictions,
                           std::span<const int> labels,
                           std::span<const GroupTag> groups) {
  if (predictions.size() != labels.size() || labels.size() != groups.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "confusion: predictions, labels and groups differ in length");
  }
  GroupedConfusion conf;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ConfusionCounts* counts = nullptr;
    switch (groups[i]) {
      case GroupTag::kPrivileged:
        counts = &conf.privileged;
        break;
      case GroupTag::kUnprivileged:
        counts = &conf.unprivileged;
        break;
      case GroupTag::kNone:
        throw Error(
            ErrorKind::kInvalidArgument,
            "confusion: sample " + std::to_string(i) + " has no group tag");
    }
    const bool predicted_pos = predictions[i] == 1;
    const bool actual_pos = labels[i] == 1;
    if (predicted_pos) {
      ++(actual_pos ? counts->tp : counts->fp);
    } else {
      ++(actual_pos ? counts->fn : counts->tn);
    }
  }
  return conf;
}

namespace {

std::optional<double> Ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> PositiveRate(const ConfusionCounts& c) {
  return Ratio(c.tp + c.fp, c.total());
}

std::optional<double> Tpr(const ConfusionCounts& c) {
  return Ratio(c.tp, c.tp + c.fn);
}
std::optional<double> Fpr(const ConfusionCounts& c) {
  return Ratio(c.fp, c.fp + c.tn);
}
std::optional<double> Fnr(const ConfusionCounts& c) {
  return Ratio(c.fn, c.fn + c.tp);
}

}  // namespace

std::optional<double> DemographicParity(const GroupedConfusion& conf) {
  const auto unpriv = PositiveRate(conf.unprivileged);
  const auto priv = PositiveRate(conf.privileged);
  if (!unpriv || !priv) return std::nullopt;
  return *unpriv - *priv;
}

std::optional<double> DisparateImpact(const GroupedConfusion& conf) {
  const auto unpriv = PositiveRate(conf.unprivileged);
  const auto priv = PositiveRate(conf.privileged);
  if (!unpriv || !priv || *priv == 0.0) return std::nullopt;
  return *unpriv / *priv;
}

std::optional<double> AverageOddsDifference(const GroupedConfusion& conf) {
  const auto fpr_p = Fpr(conf.privileged);
  const auto fpr_u = Fpr(conf.unprivileged);
  const auto tpr_p = Tpr(conf.privileged);
  const auto tpr_u = Tpr(conf.unprivileged);
  if (!fpr_p || !fpr_u || !tpr_p || !tpr_u) return std::nullopt;
  return 0.5 * ((*fpr_p - *fpr_u) + (*tpr_p - *tpr_u));
}

GroupRates Rates(const GroupedConfusion& conf) {
  const auto& p = conf.privileged;
  const auto& u = conf.unprivileged;
  return GroupRates{Fnr(p), Fnr(u), Fpr(p), Fpr(u),
                    Ratio(p.tp + p.tn + u.tp + u.tn, p.total() + u.total())};
}

std::optional<bool> MetricsRecord::DisparateImpactUnfair() const {
  if (!disparate_impact) return std::nullopt;
  return *disparate_impact < 1.0 - fairness_epsilon;
}

MetricsRecord ComputeMetrics(const GroupedConfusion& conf, double epsilon) {
  const GroupRates r = Rates(conf);
  MetricsRecord m;
  m.accuracy = r.accuracy;
  m.demographic_parity = DemographicParity(conf);
  m.disparate_impact = DisparateImpact(conf);
  m.average_odds_difference = AverageOddsDifference(conf);
  m.fnr_priv = r.fnr_priv;
  m.fnr_unpriv = r.fnr_unpriv;
  m.fpr_priv = r.fpr_priv;
  m.fpr_unpriv = r.fpr_unpriv;
  m.fairness_epsilon = epsilon;
  return m;
}

MetricsRecord EvaluatePredictions(std::span<const int> predictions,
                                  const SampleSet& data, double epsilon) {
  return ComputeMetrics(Confusion(predictions, data.labels(), data.groups()),
                        epsilon);
}

std::optional<double> MetricByIndex(const MetricsRecord& r, std::size_t index) {
  switch (index) {
    case 0:
      return r.accuracy;
    case 1:
      return r.demographic_parity;
    case 2:
      return r.disparate_impact;
    case 3:
      return r.average_odds_difference;
    case 4:
      return r.fnr_priv;
    case 5:
      return r.fnr_unpriv;
    case 6:
      return r.fpr_priv;
    case 7:
      return r.fpr_unpriv;
    default:
      throw Error(ErrorKind::kInvalidArgument, "metric index out of range");
  }
}

std::string MetricsToJson(const MetricsRecord& record) {
  nlohmann::ordered_json j;
  for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
    const auto v = MetricByIndex(record, k);
    j[std::string(kMetricNames[k])] = v ? nlohmann::ordered_json(*v) : nullptr;
  }
  j["fairness_epsilon"] = record.fairness_epsilon;
  const auto unfair = record.DisparateImpactUnfair();
  j["disparate_impact_unfair"] =
      unfair ? nlohmann::ordered_json(*unfair) : nullptr;
  return j.dump(2);
}

MetricsRecord MetricsFromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("metrics JSON: ") + e.what());
  }
  auto get = [&](std::string_view key) -> std::optional<double> {
    const auto it = j.find(std::string(key));
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) {
      throw Error(ErrorKind::kParse, "metrics JSON: field '" +
                                         std::string(key) + "' is not numeric");
    }
    return it->get<double>();
  };
  MetricsRecord r;
  r.accuracy = get("accuracy");
  r.demographic_parity = get("demographic_parity");
  r.disparate_impact = get("disparate_impact");
  r.average_odds_difference = get("average_odds_difference");
  r.fnr_priv = get("fnr_priv");
  r.fnr_unpriv = get("fnr_unpriv");
  r.fpr_priv = get("fpr_priv");
  r.fpr_unpriv = get("fpr_unpriv");
  r.fairness_epsilon =
      get("fairness_epsilon").value_or(kDefaultFairnessEpsilon);
  return r;
}

std::string MetricsCsvHeader() {
  std::string out;
  for (auto name : kMetricNames) {
    out += name;
    out += ',';
  }
  out += "fairness_epsilon,disparate_impact_unfair";
  return out;
}

std::string MetricsCsvRow(const MetricsRecord& record) {
  std::string out;
  for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
    const auto v = MetricByIndex(record, k);
    out += v ? FormatDouble(*v) : "NA";
    out += ',';
  }
  out += FormatDouble(record.fairness_epsilon);
  out += ',';
  const auto unfair = record.DisparateImpactUnfair();
  out += unfair ? (*unfair ? "true" : "false") : "NA";
  return out;
}

}  // namespace fairpoison
