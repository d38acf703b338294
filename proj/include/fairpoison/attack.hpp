#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fairpoison/dataset.hpp"
#include "fairpoison/linear_model.hpp"

namespace fairpoison {

struct BoxBounds {
  Vector lower;
  Vector upper;

  BoxBounds(Vector lower_bound, Vector upper_bound);

  /// Component-wise clamp.
  Vector Project(const Vector& x) const;
  bool Contains(const Vector& x) const;
};

struct PoisonPoint {
  Vector features;
  int label = 1;
};

struct PriorsRatioLambda {};
struct FixedLambda {
  double value = 1.0;
};
using LambdaPolicy = std::variant<PriorsRatioLambda, FixedLambda>;

struct PoisonCount {
  std::size_t count = 0;
};
struct PoisonFraction {
  double fraction = 0.05;
};
using PoisonBudget = std::variant<PoisonCount, PoisonFraction>;

/// Number of poison points for a clean training set of size n;
/// fractions round to nearest.
std::size_t ResolveBudget(const PoisonBudget& budget, std::size_t n);

struct AttackConfig {
  double step_size = 0.1;  // in standardized feature units
  double stop_threshold = 1e-5;
  int max_iterations = 100;
  PoisonBudget budget = PoisonFraction{0.05};
  LambdaPolicy lambda = PriorsRatioLambda{};
  std::optional<BoxBounds> bounds;  // unset: clean-train feature min/max
  bool standardize = true;
  std::uint64_t seed = 0;

  /// Every violated constraint, empty when valid.
  std::vector<std::string> Validate() const;
};

/// The learner the attacker differentiates through.
struct ModelSpec {
  LossKind loss = LossKind::kLogistic;
  double reg_c = 1.0;
  TrainConfig train;
};

/// Weighted validation loss sum_i weight_i * loss(x_i, target_i, theta).
///
/// The fairness objective relabels unprivileged samples as +1 (weight 1)
/// and privileged samples as -1 (weight lambda); maximizing it pushes
/// unprivileged samples negative and privileged samples positive.
struct AttackObjective {
  Matrix features;
  std::vector<int> targets;
  std::vector<double> weights;
  double lambda = 1.0;
  std::size_t unprivileged_count = 0;
  std::size_t privileged_count = 0;
};

AttackObjective BuildFairnessObjective(const SampleSet& validation,
                                       const LambdaPolicy& policy);

/// Error-generic objective: true labels, unit weights.
AttackObjective BuildGenericObjective(const SampleSet& validation);

double AttackerLoss(const AttackObjective& objective, const LinearModel& model);

/// Gradient of AttackerLoss with respect to theta = [w; b].
Vector AttackerLossGradient(const AttackObjective& objective,
                            const LinearModel& model);

/// d x (d+1) derivative of grad_theta loss(x_c, y_c, theta) with respect
/// to x_c.
Matrix PoisonMixedDerivative(const LinearModel& model,
                             const PoisonPoint& point);

/// Implicit gradient of the attacker loss with respect to the poison point:
///   -(d/dx_c grad_theta L_train) (hess_theta L_train)^-1 grad_theta A.
/// `at_optimum` must minimize the training objective on train + {point}.
/// The explicit term is zero for linear models.
Vector PoisonGradient(const AttackObjective& objective, const SampleSet& train,
                      const PoisonPoint& point, const LinearModel& at_optimum);

struct TraceEntry {
  int iteration = 0;
  std::size_t point_index = 0;
  double value = 0.0;
  double step_size = 0.0;
};

struct PointOptimization {
  PoisonPoint point;
  double value = 0.0;
  LinearModel model;              // optimum on train + {point}
  std::vector<TraceEntry> trace;  // accepted iterates only
  int iterations = 0;
};

/// Attacker loss after training on train + {point}.
double EvaluatePoison(const SampleSet& train, const AttackObjective& objective,
                      const PoisonPoint& point, const ModelSpec& spec,
                      const LinearModel* warm_start = nullptr,
                      LinearModel* trained = nullptr);

/// Projected gradient ascent on a single poison point. Steps that do not
/// increase the attacker loss are rejected and halve the step size; the
/// loop stops once a step changes the loss by at most stop_threshold, the
/// projected step is zero, or max_iterations is reached.
///
/// `step_scale` holds per-feature standard deviations; the step is taken in
/// standardized coordinates (unit scale when null).
PointOptimization OptimizePoint(const SampleSet& train,
                                const AttackObjective& objective,
                                const PoisonPoint& init,
                                const BoxBounds& bounds, const ModelSpec& spec,
                                const AttackConfig& config,
                                std::size_t point_index = 0,
                                const Vector* step_scale = nullptr,
                                const LinearModel* warm_start = nullptr);

/// Random training points with flipped labels; sampled without replacement
/// unless budget exceeds the set size.
std::vector<PoisonPoint> InitPoints(const SampleSet& train, std::size_t budget,
                                    std::uint64_t seed);

struct AttackResult {
  SampleSet poisoned_train;
  std::vector<PoisonPoint> points;
  std::vector<TraceEntry> trace;
  LinearModel model;  // optimum on poisoned_train
  BoxBounds bounds;
};

/// Greedy attack: each point is added to the working set, optimized once,
/// then frozen before the next one.
AttackResult RunGreedyAttack(const SampleSet& train,
                             const AttackObjective& objective,
                             const ModelSpec& spec, const AttackConfig& config);

AttackResult RunAttack(const SampleSet& train, const SampleSet& validation,
                       const ModelSpec& spec, const AttackConfig& config);

AttackResult RunGenericAttack(const SampleSet& train,
                              const SampleSet& validation,
                              const ModelSpec& spec,
                              const AttackConfig& config);

/// Poison points as a sample set with GroupTag::kNone.
SampleSet PoisonSampleSet(const std::vector<PoisonPoint>& points,
                          const std::vector<std::string>& feature_names);

std::string TraceToCsv(const std::vector<TraceEntry>& trace);

/// Per-feature population standard deviation, zeros replaced by one.
Vector FeatureScale(const SampleSet& data);

}  // namespace fairpoison
