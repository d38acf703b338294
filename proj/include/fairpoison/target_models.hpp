#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fairpoison/dataset.hpp"
#include "fairpoison/random.hpp"

namespace fairpoison {

// Models used only as black-box transfer targets. None of them is
// differentiated through.

struct GaussianNb {
  double prior_negative = 0.5;
  double prior_positive = 0.5;
  Matrix means;      // 2 x d, row 0 = class -1, row 1 = class +1
  Matrix variances;  // 2 x d, floored at kVarianceFloor
};

inline constexpr double kVarianceFloor = 1e-9;

GaussianNb TrainGaussianNb(const SampleSet& data);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // x[feature] <= threshold
  int right = -1;
  int label = 1;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int PredictRow(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::size_t Depth() const;
};

struct TreeParams {
  std::size_t max_depth = 8;
  std::size_t min_leaf = 5;
  // Features drawn per split; unset means all features.
  std::optional<std::size_t> features_per_split;
};

struct SplitChoice {
  std::size_t feature = 0;
  double threshold = 0.0;
  double child_impurity = 0.0;  // size-weighted Gini of the two children
};

/// Best Gini split of data[indices] over `features`, thresholds at midpoints
/// of consecutive distinct values, both children >= min_leaf. Ties keep the
/// earliest (feature, threshold) in scan order.
std::optional<SplitChoice> BestGiniSplit(
    const SampleSet& data, const std::vector<std::size_t>& indices,
    const std::vector<std::size_t>& features, std::size_t min_leaf);

/// CART with Gini impurity. `rng` is only consulted when
/// features_per_split is set.
DecisionTree TrainDecisionTree(const SampleSet& data, const TreeParams& params,
                               Rng* rng = nullptr);

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::uint64_t seed = 0;
};

struct ForestParams {
  std::size_t n_trees = 100;
  TreeParams tree{8, 5, std::nullopt};  // features_per_split unset -> sqrt(d)
  std::uint64_t seed = 0;
};

RandomForest TrainRandomForest(const SampleSet& data,
                               const ForestParams& params);

/// Majority vote; ties go to +1.
int MajorityVote(const std::vector<int>& votes);

struct RbfSvm {
  Matrix support_vectors;
  Vector coefficients;  // alpha_i * y_i for each support vector
  double bias = 0.0;
  double gamma = 1.0;
  double reg_c = 1.0;

  double DecisionValue(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct RbfSvmParams {
  double reg_c = 1.0;
  std::optional<double> gamma;  // unset -> 1/d
  double tolerance = 1e-3;
  std::size_t max_iterations = 10'000'000;
};

struct RbfSvmTraining {
  RbfSvm model;
  Vector alpha;  // dual coefficients for every training sample
  double dual_objective = 0.0;
  std::size_t iterations = 0;
};

double RbfKernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                 const Eigen::Ref<const Eigen::RowVectorXd>& b, double gamma);

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j).
double RbfDualObjective(const SampleSet& data, const Vector& alpha,
                        double gamma);

/// Dual C-SVM by SMO with maximal-violating-pair selection, stopping when the
/// KKT gap is at most `tolerance`.
RbfSvmTraining TrainRbfSvmDetailed(const SampleSet& data,
                                   const RbfSvmParams& params);
RbfSvm TrainRbfSvm(const SampleSet& data, const RbfSvmParams& params);

using TargetModel =
    std::variant<GaussianNb, DecisionTree, RandomForest, RbfSvm>;

std::vector<int> PredictTarget(const TargetModel& model,
                               const Matrix& features);

const char* TargetModelName(const TargetModel& model) noexcept;

}  // namespace fairpoison
