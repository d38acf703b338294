#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairpoison/dataset.hpp"

namespace fairpoison {

enum class LossKind { kLogistic, kSquaredHinge };

const char* LossKindName(LossKind kind) noexcept;
LossKind ParseLossKind(const std::string& name);

/// f(x) = w'x + b. Parameters are packed as theta = [w; b] wherever a flat
/// vector is needed.
struct LinearModel {
  Vector weights;
  double bias = 0.0;
  LossKind loss = LossKind::kLogistic;
  double reg_c = 1.0;

  std::size_t dim() const noexcept {
    return static_cast<std::size_t>(weights.size());
  }

  Vector Theta() const;
  static LinearModel FromTheta(const Vector& theta, LossKind loss,
                               double reg_c);
};

/// Loss as a function of the margin m = y f(x), with its first two
/// derivatives in m.
struct MarginLoss {
  double value;
  double d1;
  double d2;
};

MarginLoss EvalMarginLoss(LossKind kind, double margin) noexcept;

Vector DecisionValues(const LinearModel& model, const Matrix& features);

/// sign(w'x + b) with sign(0) = +1.
std::vector<int> Predict(const LinearModel& model, const Matrix& features);

struct LossTerms {
  Vector losses;     // per-sample loss
  Matrix gradients;  // n x (d+1), row i = grad_theta loss_i
  Matrix hessian;    // (d+1) x (d+1) Hessian of the regularized objective
};

/// Per-sample losses and gradients plus the Hessian of the training
/// objective (1/C) |w|^2 / 2 + sum_i loss_i; the bias is unregularized.
LossTerms ComputeLossTerms(const LinearModel& model, const SampleSet& data);

double TrainingObjective(const LinearModel& model, const SampleSet& data);
Vector TrainingGradient(const LinearModel& model, const SampleSet& data);

struct TrainConfig {
  double tolerance = 1e-8;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
};

struct TrainResult {
  LinearModel model;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> objective_trace;  // objective after each iteration
};

/// Damped Newton minimization of the training objective. `warm_start`, when
/// given, must have the data's dimension.
TrainResult TrainLinearDetailed(const SampleSet& data, LossKind loss,
                                double reg_c, const TrainConfig& config = {},
                                const LinearModel* warm_start = nullptr);

LinearModel TrainLinear(const SampleSet& data, LossKind loss, double reg_c,
                        const TrainConfig& config = {},
                        const LinearModel* warm_start = nullptr);

/// Stratified fold assignment: fold index per sample. Each class is
/// shuffled by `seed` and dealt round-robin.
std::vector<std::size_t> StratifiedFolds(std::span<const int> labels,
                                         std::size_t folds, std::uint64_t seed);

/// Mean held-out accuracy per grid value.
std::vector<double> CrossValidationScores(const SampleSet& data, LossKind loss,
                                          std::span<const double> grid,
                                          std::size_t folds, std::uint64_t seed,
                                          const TrainConfig& config = {});

/// Grid value with the best mean fold accuracy; ties go to the smallest C.
double SelectC(const SampleSet& data, LossKind loss,
               std::span<const double> grid, std::size_t folds,
               std::uint64_t seed, const TrainConfig& config = {});

inline constexpr double kDefaultCGrid[] = {0.5, 1.0, 5.0, 10.0};

}  // namespace fairpoison
