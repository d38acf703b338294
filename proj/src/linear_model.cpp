#include "fairpoison/linear_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fairpoison/error.hpp"
#include "fairpoison/random.hpp"

namespace fairpoison {

const char* LossKindName(LossKind kind) noexcept {
  return kind == LossKind::kLogistic ? "logistic" : "squared_hinge";
}

LossKind ParseLossKind(const std::string& name) {
  if (name == "logistic") return LossKind::kLogistic;
  if (name == "squared_hinge" || name == "svm" || name == "linear_svm") {
    return LossKind::kSquaredHinge;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown loss kind '" + name + "'");
}

Vector LinearModel::Theta() const {
  Vector theta(weights.size() + 1);
  theta << weights, bias;
  return theta;
}

LinearModel LinearModel::FromTheta(const Vector& theta, LossKind loss,
                                   double reg_c) {
  return LinearModel{theta.head(theta.size() - 1), theta(theta.size() - 1),
                     loss, reg_c};
}

MarginLoss EvalMarginLoss(LossKind kind, double margin) noexcept {
  if (kind == LossKind::kLogistic) {
    // log(1 + exp(-m)) in a form that neither overflows nor cancels.
    const double value = margin > 0.0 ? std::log1p(std::exp(-margin))
                                      : -margin + std::log1p(std::exp(margin));
    const double e = std::exp(-std::abs(margin));
    const double sig_neg = margin > 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
    const double sig_pos = margin > 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    return {value, -sig_neg, sig_pos * sig_neg};
  }
  const double slack = 1.0 - margin;
  if (slack <= 0.0) return {0.0, 0.0, 0.0};
  return {slack * slack, -2.0 * slack, 2.0};
}

namespace {

void CheckDims(const LinearModel& model, std::size_t d) {
  if (model.dim() != d) {
    throw Error(ErrorKind::kInvalidArgument,
                "model dimension " + std::to_string(model.dim()) +
                    " does not match data dimension " + std::to_string(d));
  }
}

// Objective value and gradient in one pass.
double ObjectiveAndGradient(const Vector& theta, const SampleSet& data,
                            LossKind loss, double reg_c, Vector* gradient) {
  const auto d = static_cast<Eigen::Index>(data.dim());
  const auto w = theta.head(d);
  const double b = theta(d);
  const Vector f = (data.features() * w).array() + b;
  double value = 0.5 * w.squaredNorm() / reg_c;
  Vector coeff(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double y = data.labels()[static_cast<std::size_t>(i)];
    const MarginLoss l = EvalMarginLoss(loss, y * f(i));
    value += l.value;
    coeff(i) = l.d1 * y;
  }
  if (gradient) {
    gradient->resize(d + 1);
    gradient->head(d) = w / reg_c + data.features().transpose() * coeff;
    (*gradient)(d) = coeff.sum();
  }
  return value;
}

Matrix Hessian(const Vector& theta, const SampleSet& data, LossKind loss,
               double reg_c) {
  const auto d = static_cast<Eigen::Index>(data.dim());
  const auto n = static_cast<Eigen::Index>(data.size());
  const Vector f = (data.features() * theta.head(d)).array() + theta(d);
  Matrix augmented(n, d + 1);
  augmented.leftCols(d) = data.features();
  augmented.col(d).setOnes();
  Vector curvature(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = data.labels()[static_cast<std::size_t>(i)];
    curvature(i) = EvalMarginLoss(loss, y * f(i)).d2;
  }
  Matrix h = augmented.transpose() * curvature.asDiagonal() * augmented;
  h.diagonal().head(d).array() += 1.0 / reg_c;
  return h;
}

void ValidateTrainingInput(const SampleSet& data, double reg_c,
                           const TrainConfig& config) {
  if (!(reg_c > 0.0) || !std::isfinite(reg_c)) {
    throw Error(ErrorKind::kInvalidArgument, "C must be positive and finite");
  }
  if (!(config.tolerance > 0.0) || config.max_iterations <= 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "tolerance and max_iterations must be positive");
  }
  if (data.size() < 2 || data.CountLabel(1) == 0 || data.CountLabel(-1) == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "training needs at least two samples from both classes");
  }
}

}  // namespace

Vector DecisionValues(const LinearModel& model, const Matrix& features) {
  CheckDims(model, static_cast<std::size_t>(features.cols()));
  return (features * model.weights).array() + model.bias;
}

std::vector<int> Predict(const LinearModel& model, const Matrix& features) {
  const Vector f = DecisionValues(model, features);
  std::vector<int> out(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    out[static_cast<std::size_t>(i)] = f(i) >= 0.0 ? 1 : -1;
  }
  return out;
}

LossTerms ComputeLossTerms(const LinearModel& model, const SampleSet& data) {
  CheckDims(model, data.dim());
  const auto d = static_cast<Eigen::Index>(data.dim());
  const auto n = static_cast<Eigen::Index>(data.size());
  const Vector f = DecisionValues(model, data.features());
  LossTerms terms;
  terms.losses.resize(n);
  terms.gradients.resize(n, d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = data.labels()[static_cast<std::size_t>(i)];
    const MarginLoss l = EvalMarginLoss(model.loss, y * f(i));
    terms.losses(i) = l.value;
    terms.gradients.row(i).head(d) = (l.d1 * y) * data.features().row(i);
    terms.gradients(i, d) = l.d1 * y;
  }
  terms.hessian = Hessian(model.Theta(), data, model.loss, model.reg_c);
  return terms;
}

double TrainingObjective(const LinearModel& model, const SampleSet& data) {
  CheckDims(model, data.dim());
  return ObjectiveAndGradient(model.Theta(), data, model.loss, model.reg_c,
                              nullptr);
}

Vector TrainingGradient(const LinearModel& model, const SampleSet& data) {
  CheckDims(model, data.dim());
  Vector g;
  ObjectiveAndGradient(model.Theta(), data, model.loss, model.reg_c, &g);
  return g;
}

TrainResult TrainLinearDetailed(const SampleSet& data, LossKind loss,
                                double reg_c, const TrainConfig& config,
                                const LinearModel* warm_start) {
  ValidateTrainingInput(data, reg_c, config);
  const auto p = static_cast<Eigen::Index>(data.dim() + 1);
  Vector theta = Vector::Zero(p);
  if (warm_start) {
    CheckDims(*warm_start, data.dim());
    theta = warm_start->Theta();
  }

  TrainResult result;
  Vector gradient;
  double value = ObjectiveAndGradient(theta, data, loss, reg_c, &gradient);
  result.objective_trace.push_back(value);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const double gnorm = gradient.norm();
    if (gnorm <= config.tolerance) {
      result.model = LinearModel::FromTheta(theta, loss, reg_c);
      result.iterations = iter;
      result.gradient_norm = gnorm;
      return result;
    }

    Matrix h = Hessian(theta, data, loss, reg_c);
    Eigen::LLT<Matrix> llt(h);
    // The squared hinge can leave the bias direction flat away from the
    // optimum; add Levenberg damping until the factorization succeeds.
    double damping = 1e-10 * std::max(1.0, h.diagonal().maxCoeff());
    while (llt.info() != Eigen::Success) {
      Matrix damped = h;
      damped.diagonal().array() += damping;
      llt.compute(damped);
      damping *= 10.0;
    }
    const Vector direction = llt.solve(-gradient);
    const double slope = gradient.dot(direction);

    // Near the optimum objective differences drop below rounding, so a step
    // that leaves the objective unchanged up to rounding is also accepted
    // when it shrinks the gradient.
    const double rounding = 1e-13 * std::max(1.0, std::abs(value));
    double step = 1.0;
    bool accepted = false;
    Vector candidate;
    Vector candidate_gradient;
    double candidate_value = value;
    for (int ls = 0; ls < 60; ++ls) {
      candidate = theta + step * direction;
      candidate_value = ObjectiveAndGradient(candidate, data, loss, reg_c,
                                             &candidate_gradient);
      if (candidate_value <= value + 1e-4 * step * slope ||
          (candidate_value <= value + rounding &&
           candidate_gradient.norm() < gnorm)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      throw Error(ErrorKind::kConvergence,
                  "line search failed; gradient norm " + FormatDouble(gnorm));
    }
    theta = std::move(candidate);
    gradient = std::move(candidate_gradient);
    value = candidate_value;
    result.objective_trace.push_back(value);
  }
  const double gnorm = gradient.norm();
  if (gnorm <= config.tolerance) {
    result.model = LinearModel::FromTheta(theta, loss, reg_c);
    result.iterations = config.max_iterations;
    result.gradient_norm = gnorm;
    return result;
  }
  throw Error(ErrorKind::kConvergence,
              "training did not converge in " +
                  std::to_string(config.max_iterations) +
                  " iterations; final gradient norm " + FormatDouble(gnorm));
}

LinearModel TrainLinear(const SampleSet& data, LossKind loss, double reg_c,
                        const TrainConfig& config,
                        const LinearModel* warm_start) {
  return TrainLinearDetailed(data, loss, reg_c, config, warm_start).model;
}

std::vector<std::size_t> StratifiedFolds(std::span<const int> labels,
                                         std::size_t folds,
                                         std::uint64_t seed) {
  if (folds < 2) {
    throw Error(ErrorKind::kInvalidArgument, "cv_folds must be >= 2");
  }
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? positives : negatives).push_back(i);
  }
  if (positives.size() < folds || negatives.size() < folds) {
    throw Error(ErrorKind::kInvalidArgument,
                "not enough samples of each class for " +
                    std::to_string(folds) + " stratified folds");
  }
  Rng rng(seed);
  rng.Shuffle(positives);
  rng.Shuffle(negatives);
  std::vector<std::size_t> assignment(labels.size());
  std::size_t next = 0;
  for (const auto* group : {&positives, &negatives}) {
    for (std::size_t i : *group) assignment[i] = next++ % folds;
  }
  return assignment;
}

namespace {

void ValidateGrid(std::span<const double> grid) {
  if (grid.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "C grid is empty");
  }
  std::set<double> seen;
  for (double c : grid) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "C grid values must be positive");
    }
    if (!seen.insert(c).second) {
      throw Error(ErrorKind::kInvalidArgument,
                  "C grid values must be distinct");
    }
  }
}

}  // namespace

std::vector<double> CrossValidationScores(const SampleSet& data, LossKind loss,
                                          std::span<const double> grid,
                                          std::size_t folds, std::uint64_t seed,
                                          const TrainConfig& config) {
  ValidateGrid(grid);
  const auto assignment = StratifiedFolds(data.labels(), folds, seed);
  std::vector<double> scores(grid.size(), 0.0);
  for (std::size_t fold = 0; fold < folds; ++fold) {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      (assignment[i] == fold ? test_idx : train_idx).push_back(i);
    }
    const SampleSet train = data.Subset(train_idx);
    const SampleSet test = data.Subset(test_idx);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const LinearModel model = TrainLinear(train, loss, grid[g], config);
      const auto predicted = Predict(model, test.features());
      std::size_t correct = 0;
      for (std::size_t i = 0; i < predicted.size(); ++i) {
        correct += predicted[i] == test.labels()[i];
      }
      scores[g] +=
          static_cast<double>(correct) / static_cast<double>(predicted.size());
    }
  }
  for (double& s : scores) s /= static_cast<double>(folds);
  return scores;
}

double SelectC(const SampleSet& data, LossKind loss,
               std::span<const double> grid, std::size_t folds,
               std::uint64_t seed, const TrainConfig& config) {
  ValidateGrid(grid);
  if (grid.size() == 1) return grid.front();
  const auto scores =
      CrossValidationScores(data, loss, grid, folds, seed, config);
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (scores[g] > scores[best] ||
        (scores[g] == scores[best] && grid[g] < grid[best])) {
      best = g;
    }
  }
  return grid[best];
}

}  // namespace fairpoison
