#include "fairpoison/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairpoison/error.hpp"
#include "fairpoison/random.hpp"

namespace fairpoison {

BoxBounds::BoxBounds(Vector lower_bound, Vector upper_bound)
    : lower(std::move(lower_bound)), upper(std::move(upper_bound)) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "box bounds need matching, non-empty lower/upper vectors");
  }
  if (!lower.allFinite() || !upper.allFinite() ||
      (lower.array() > upper.array()).any()) {
    throw Error(ErrorKind::kInvalidArgument,
                "box bounds must be finite with lower <= upper");
  }
}

Vector BoxBounds::Project(const Vector& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

bool BoxBounds::Contains(const Vector& x) const {
  return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

std::size_t ResolveBudget(const PoisonBudget& budget, std::size_t n) {
  if (const auto* count = std::get_if<PoisonCount>(&budget)) {
    return count->count;
  }
  const double fraction = std::get<PoisonFraction>(budget).fraction;
  if (!(fraction >= 0.0) || !std::isfinite(fraction)) {
    throw Error(ErrorKind::kInvalidArgument,
                "poison fraction must be a finite value >= 0");
  }
  return static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
}

std::vector<std::string> AttackConfig::Validate() const {
  std::vector<std::string> problems;
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    problems.emplace_back("step_size must be positive");
  }
  if (!(stop_threshold > 0.0) || !std::isfinite(stop_threshold)) {
    problems.emplace_back("stop_threshold must be positive");
  }
  if (max_iterations <= 0) {
    problems.emplace_back("max_iterations must be positive");
  }
  if (const auto* f = std::get_if<PoisonFraction>(&budget)) {
    if (!(f->fraction >= 0.0) || !std::isfinite(f->fraction)) {
      problems.emplace_back("budget fraction must be >= 0");
    }
  }
  if (const auto* fixed = std::get_if<FixedLambda>(&lambda)) {
    if (!(fixed->value >= 0.0) || !std::isfinite(fixed->value)) {
      problems.emplace_back("lambda must be a finite value >= 0");
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Objectives

AttackObjective BuildFairnessObjective(const SampleSet& validation,
                                       const LambdaPolicy& policy) {
  const auto parts = PartitionByGroup(validation);
  const std::size_t p = parts.unprivileged.size();
  const std::size_t m = parts.privileged.size();
  if (p == 0 || m == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "fairness objective needs both privileged and unprivileged "
                "validation samples");
  }
  AttackObjective obj;
  obj.unprivileged_count = p;
  obj.privileged_count = m;
  obj.lambda = std::holds_alternative<PriorsRatioLambda>(policy)
                   ? static_cast<double>(p) / static_cast<double>(m)
                   : std::get<FixedLambda>(policy).value;
  obj.features = validation.features();
  obj.targets.resize(validation.size());
  obj.weights.resize(validation.size());
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const bool unprivileged = validation.groups()[i] == GroupTag::kUnprivileged;
    obj.targets[i] = unprivileged ? 1 : -1;
    obj.weights[i] = unprivileged ? 1.0 : obj.lambda;
  }
  return obj;
}

AttackObjective BuildGenericObjective(const SampleSet& validation) {
  if (validation.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "empty validation set");
  }
  AttackObjective obj;
  obj.features = validation.features();
  obj.targets = validation.labels();
  obj.weights.assign(validation.size(), 1.0);
  obj.lambda = 1.0;
  obj.unprivileged_count = validation.CountGroup(GroupTag::kUnprivileged);
  obj.privileged_count = validation.CountGroup(GroupTag::kPrivileged);
  return obj;
}

double AttackerLoss(const AttackObjective& objective,
                    const LinearModel& model) {
  const Vector f = DecisionValues(model, objective.features);
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    total += objective.weights[k] *
             EvalMarginLoss(model.loss, objective.targets[k] * f(i)).value;
  }
  return total;
}

Vector AttackerLossGradient(const AttackObjective& objective,
                            const LinearModel& model) {
  const Vector f = DecisionValues(model, objective.features);
  const auto d = static_cast<Eigen::Index>(model.dim());
  Vector coeff(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double t = objective.targets[k];
    coeff(i) =
        objective.weights[k] * t * EvalMarginLoss(model.loss, t * f(i)).d1;
  }
  Vector g(d + 1);
  g.head(d) = objective.features.transpose() * coeff;
  g(d) = coeff.sum();
  return g;
}

// ---------------------------------------------------------------------------
// Implicit gradient

Matrix PoisonMixedDerivative(const LinearModel& model,
                             const PoisonPoint& point) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  const double y = point.label;
  const double margin = y * (model.weights.dot(point.features) + model.bias);
  const MarginLoss l = EvalMarginLoss(model.loss, margin);
  Vector augmented(d + 1);
  augmented << point.features, 1.0;
  // Row j: loss'' w_j [x; 1]' + y loss' e_j'.
  Matrix mixed = l.d2 * model.weights * augmented.transpose();
  mixed.leftCols(d).diagonal().array() += y * l.d1;
  return mixed;
}

Vector PoisonGradient(const AttackObjective& objective, const SampleSet& train,
                      const PoisonPoint& point, const LinearModel& at_optimum) {
  if (static_cast<std::size_t>(point.features.size()) != train.dim()) {
    throw Error(ErrorKind::kInvalidArgument, "poison point dimension mismatch");
  }
  const SampleSet working =
      train.WithAppended(point.features, point.label, GroupTag::kNone);
  const Matrix hessian = ComputeLossTerms(at_optimum, working).hessian;
  const Eigen::LLT<Matrix> llt(hessian);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kNumeric,
                "training Hessian is not positive definite");
  }
  const Vector adjoint = llt.solve(AttackerLossGradient(objective, at_optimum));
  Vector gradient = -(PoisonMixedDerivative(at_optimum, point) * adjoint);
  if (!gradient.allFinite()) {
    throw Error(ErrorKind::kNumeric, "non-finite poisoning gradient");
  }
  return gradient;
}

// ---------------------------------------------------------------------------
// Optimization

double EvaluatePoison(const SampleSet& train, const AttackObjective& objective,
                      const PoisonPoint& point, const ModelSpec& spec,
                      const LinearModel* warm_start, LinearModel* trained) {
  const SampleSet working =
      train.WithAppended(point.features, point.label, GroupTag::kNone);
  LinearModel model =
      TrainLinear(working, spec.loss, spec.reg_c, spec.train, warm_start);
  const double value = AttackerLoss(objective, model);
  if (trained) *trained = std::move(model);
  return value;
}

PointOptimization OptimizePoint(
    const SampleSet& train, const AttackObjective& objective,
    const PoisonPoint& init, const BoxBounds& bounds, const ModelSpec& spec,
    const AttackConfig& config, std::size_t point_index,
    const Vector* step_scale, const LinearModel* warm_start) {
  const auto problems = config.Validate();
  if (!problems.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "attack config: " + problems.front());
  }
  if (static_cast<std::size_t>(bounds.lower.size()) != train.dim()) {
    throw Error(ErrorKind::kInvalidArgument, "bounds dimension mismatch");
  }
  const Vector scale =
      step_scale ? *step_scale : Vector::Ones(bounds.lower.size());

  PointOptimization out;
  out.point = PoisonPoint{bounds.Project(init.features), init.label};
  out.value =
      EvaluatePoison(train, objective, out.point, spec, warm_start, &out.model);
  double step = config.step_size;
  out.trace.push_back(TraceEntry{0, point_index, out.value, step});

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    out.iterations = iter;
    const Vector gradient =
        PoisonGradient(objective, train, out.point, out.model);
    const Vector direction = scale.cwiseProduct(gradient);
    const double norm = direction.norm();
    if (!(norm > 0.0)) break;
    PoisonPoint candidate{
        bounds.Project(out.point.features +
                       (step / norm) * scale.cwiseProduct(direction)),
        out.point.label};
    if (candidate.features == out.point.features) break;

    LinearModel candidate_model;
    const double candidate_value = EvaluatePoison(
        train, objective, candidate, spec, &out.model, &candidate_model);
    const double change = candidate_value - out.value;
    if (candidate_value > out.value) {
      out.point = std::move(candidate);
      out.model = std::move(candidate_model);
      out.value = candidate_value;
      out.trace.push_back(TraceEntry{iter, point_index, out.value, step});
    } else {
      step *= 0.5;
    }
    if (std::abs(change) <= config.stop_threshold) break;
  }
  return out;
}

std::vector<PoisonPoint> InitPoints(const SampleSet& train, std::size_t budget,
                                    std::uint64_t seed) {
  if (budget > 0 && train.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "cannot initialize poison points from an empty set");
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (budget <= train.size()) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < budget; ++k) {
      std::swap(order[k], order[k + rng.Index(order.size() - k)]);
    }
    chosen.assign(order.begin(), order.begin() + static_cast<long>(budget));
  } else {
    for (std::size_t k = 0; k < budget; ++k) {
      chosen.push_back(rng.Index(train.size()));
    }
  }
  std::vector<PoisonPoint> points;
  points.reserve(budget);
  for (std::size_t i : chosen) {
    points.push_back(PoisonPoint{train.row(i), -train.labels()[i]});
  }
  return points;
}

Vector FeatureScale(const SampleSet& data) {
  if (data.empty()) return Vector::Ones(static_cast<Eigen::Index>(data.dim()));
  const Eigen::RowVectorXd mean = data.features().colwise().mean();
  Vector scale =
      ((data.features().rowwise() - mean).array().square().colwise().sum() /
       static_cast<double>(data.size()))
          .sqrt()
          .transpose();
  for (auto& s : scale) {
    if (!(s > 0.0)) s = 1.0;
  }
  return scale;
}

AttackResult RunGreedyAttack(const SampleSet& train,
                             const AttackObjective& objective,
                             const ModelSpec& spec,
                             const AttackConfig& config) {
  const auto problems = config.Validate();
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw Error(ErrorKind::kInvalidArgument, "attack config: " + joined);
  }
  const std::size_t budget = ResolveBudget(config.budget, train.size());
  BoxBounds bounds = config.bounds ? *config.bounds : [&] {
    auto [lo, hi] = FeatureRange(train);
    return BoxBounds(std::move(lo), std::move(hi));
  }();
  const Vector scale =
      config.standardize ? FeatureScale(train)
                         : Vector::Ones(static_cast<Eigen::Index>(train.dim()));

  const auto inits = InitPoints(train, budget, config.seed);
  SampleSet working = train;
  LinearModel model = TrainLinear(working, spec.loss, spec.reg_c, spec.train);
  std::vector<PoisonPoint> points;
  std::vector<TraceEntry> trace;
  for (std::size_t k = 0; k < budget; ++k) {
    PointOptimization opt = OptimizePoint(working, objective, inits[k], bounds,
                                          spec, config, k, &scale, &model);
    working = working.WithAppended(opt.point.features, opt.point.label,
                                   GroupTag::kNone);
    model = std::move(opt.model);
    trace.insert(trace.end(), opt.trace.begin(), opt.trace.end());
    points.push_back(std::move(opt.point));
  }
  return AttackResult{std::move(working), std::move(points), std::move(trace),
                      std::move(model), std::move(bounds)};
}

AttackResult RunAttack(const SampleSet& train, const SampleSet& validation,
                       const ModelSpec& spec, const AttackConfig& config) {
  return RunGreedyAttack(
      train, BuildFairnessObjective(validation, config.lambda), spec, config);
}

AttackResult RunGenericAttack(const SampleSet& train,
                              const SampleSet& validation,
                              const ModelSpec& spec,
                              const AttackConfig& config) {
  return RunGreedyAttack(train, BuildGenericObjective(validation), spec,
                         config);
}

SampleSet PoisonSampleSet(const std::vector<PoisonPoint>& points,
                          const std::vector<std::string>& feature_names) {
  const auto d = static_cast<Eigen::Index>(feature_names.size());
  Matrix features(static_cast<Eigen::Index>(points.size()), d);
  std::vector<int> labels;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].features.size() != d) {
      throw Error(ErrorKind::kInvalidArgument,
                  "poison point dimension mismatch");
    }
    features.row(static_cast<Eigen::Index>(k)) = points[k].features.transpose();
    labels.push_back(points[k].label);
  }
  return SampleSet(std::move(features), std::move(labels),
                   std::vector<GroupTag>(points.size(), GroupTag::kNone),
                   feature_names);
}

std::string TraceToCsv(const std::vector<TraceEntry>& trace) {
  std::string out = "iteration,point_index,value,step_size\n";
  for (const auto& e : trace) {
    out += std::to_string(e.iteration) + ',' + std::to_string(e.point_index) +
           ',' + FormatDouble(e.value) + ',' + FormatDouble(e.step_size) + '\n';
  }
  return out;
}

}  // namespace fairpoison
