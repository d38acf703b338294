#include "fairpoison/target_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "fairpoison/error.hpp"

namespace fairpoison {

namespace {

void RequireBothClasses(const SampleSet& data, const char* who) {
  if (data.CountLabel(1) == 0 || data.CountLabel(-1) == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(who) + " needs samples from both classes");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

GaussianNb TrainGaussianNb(const SampleSet& data) {
  RequireBothClasses(data, "Gaussian naive Bayes");
  const auto d = static_cast<Eigen::Index>(data.dim());
  GaussianNb nb;
  nb.means = Matrix::Zero(2, d);
  nb.variances = Matrix::Zero(2, d);
  double counts[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = data.labels()[i] == 1 ? 1 : 0;
    counts[c] += 1.0;
    nb.means.row(c) += data.features().row(static_cast<Eigen::Index>(i));
  }
  for (int c = 0; c < 2; ++c) nb.means.row(c) /= counts[c];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = data.labels()[i] == 1 ? 1 : 0;
    const auto diff =
        data.features().row(static_cast<Eigen::Index>(i)) - nb.means.row(c);
    nb.variances.row(c) += diff.cwiseProduct(diff);
  }
  for (int c = 0; c < 2; ++c) {
    nb.variances.row(c) /= counts[c];
    nb.variances.row(c) = nb.variances.row(c).cwiseMax(kVarianceFloor);
  }
  const double n = static_cast<double>(data.size());
  nb.prior_negative = counts[0] / n;
  nb.prior_positive = counts[1] / n;
  return nb;
}

namespace {

int PredictNb(const GaussianNb& nb,
              const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  double log_joint[2] = {std::log(nb.prior_negative),
                         std::log(nb.prior_positive)};
  for (int c = 0; c < 2; ++c) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double var = nb.variances(c, j);
      const double diff = x(j) - nb.means(c, j);
      log_joint[c] += -0.5 * std::log(2.0 * std::numbers::pi * var) -
                      0.5 * diff * diff / var;
    }
  }
  return log_joint[1] >= log_joint[0] ? 1 : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// CART

int DecisionTree::PredictRow(
    const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].label;
}

std::size_t DecisionTree::Depth() const {
  std::vector<std::size_t> depth(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (nodes[i].feature >= 0) {
      depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
    }
  }
  return deepest;
}

namespace {

// n * Gini impurity of a node with the given class counts.
double WeightedGini(double positives, double negatives) {
  const double n = positives + negatives;
  if (n == 0.0) return 0.0;
  return n - (positives * positives + negatives * negatives) / n;
}

int MajorityLabel(const SampleSet& data, const std::vector<std::size_t>& idx) {
  std::size_t positives = 0;
  for (std::size_t i : idx) positives += data.labels()[i] == 1;
  return 2 * positives >= idx.size() ? 1 : -1;
}

}  // namespace

std::optional<SplitChoice> BestGiniSplit(
    const SampleSet& data, const std::vector<std::size_t>& indices,
    const std::vector<std::size_t>& features, std::size_t min_leaf) {
  const std::size_t n = indices.size();
  double total_pos = 0.0;
  for (std::size_t i : indices) total_pos += data.labels()[i] == 1;
  const double total_neg = static_cast<double>(n) - total_pos;

  std::optional<SplitChoice> best;
  std::vector<std::size_t> order = indices;
  for (std::size_t f : features) {
    const auto col = static_cast<Eigen::Index>(f);
    auto value = [&](std::size_t i) {
      return data.features()(static_cast<Eigen::Index>(i), col);
    };
    std::stable_sort(
        order.begin(), order.end(),
        [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    double left_pos = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      left_pos += data.labels()[order[k]] == 1;
      const double lo = value(order[k]);
      const double hi = value(order[k + 1]);
      if (!(lo < hi)) continue;
      const std::size_t n_left = k + 1;
      if (n_left < min_leaf || n - n_left < min_leaf) continue;
      const double left_neg = static_cast<double>(n_left) - left_pos;
      const double impurity =
          (WeightedGini(left_pos, left_neg) +
           WeightedGini(total_pos - left_pos, total_neg - left_neg)) /
          static_cast<double>(n);
      if (!best || impurity < best->child_impurity) {
        double threshold = lo + (hi - lo) / 2.0;
        if (!(threshold < hi)) threshold = lo;
        best = SplitChoice{f, threshold, impurity};
      }
    }
  }
  return best;
}

namespace {

struct TreeBuilder {
  const SampleSet& data;
  const TreeParams& params;
  Rng* rng;
  std::vector<TreeNode> nodes;

  std::vector<std::size_t> CandidateFeatures() {
    std::vector<std::size_t> all(data.dim());
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (!params.features_per_split ||
        *params.features_per_split >= all.size()) {
      return all;
    }
    rng->Shuffle(all);
    all.resize(std::max<std::size_t>(1, *params.features_per_split));
    std::sort(all.begin(), all.end());
    return all;
  }

  int Build(const std::vector<std::size_t>& idx, std::size_t depth) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{-1, 0.0, -1, -1, MajorityLabel(data, idx)});
    std::size_t positives = 0;
    for (std::size_t i : idx) positives += data.labels()[i] == 1;
    const bool pure = positives == 0 || positives == idx.size();
    if (pure || depth >= params.max_depth || idx.size() < 2 * params.min_leaf) {
      return id;
    }
    const auto split = BestGiniSplit(data, idx, CandidateFeatures(),
                                     std::max<std::size_t>(1, params.min_leaf));
    if (!split) return id;
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    const auto col = static_cast<Eigen::Index>(split->feature);
    for (std::size_t i : idx) {
      (data.features()(static_cast<Eigen::Index>(i), col) <= split->threshold
           ? left
           : right)
          .push_back(i);
    }
    const int l = Build(left, depth + 1);
    const int r = Build(right, depth + 1);
    TreeNode& node = nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

DecisionTree BuildTree(const SampleSet& data, std::vector<std::size_t> idx,
                       const TreeParams& params, Rng* rng) {
  if (idx.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "decision tree on empty data");
  }
  if (params.features_per_split && !rng) {
    throw Error(ErrorKind::kInvalidArgument,
                "feature subsampling needs a random generator");
  }
  TreeBuilder builder{data, params, rng, {}};
  builder.Build(idx, 0);
  return DecisionTree{std::move(builder.nodes)};
}

}  // namespace

DecisionTree TrainDecisionTree(const SampleSet& data, const TreeParams& params,
                               Rng* rng) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return BuildTree(data, std::move(idx), params, rng);
}

int MajorityVote(const std::vector<int>& votes) {
  long balance = 0;
  for (int v : votes) balance += v;
  return balance >= 0 ? 1 : -1;
}

RandomForest TrainRandomForest(const SampleSet& data,
                               const ForestParams& params) {
  if (data.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "random forest on empty data");
  }
  if (params.n_trees == 0) {
    throw Error(ErrorKind::kInvalidArgument, "random forest needs >= 1 tree");
  }
  TreeParams tree = params.tree;
  if (!tree.features_per_split) {
    tree.features_per_split = std::max<std::size_t>(
        1,
        static_cast<std::size_t>(std::sqrt(static_cast<double>(data.dim()))));
  }
  RandomForest forest;
  forest.seed = params.seed;
  forest.trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(DeriveSeed(params.seed, t));
    std::vector<std::size_t> bootstrap(data.size());
    for (auto& i : bootstrap) i = rng.Index(data.size());
    forest.trees.push_back(BuildTree(data, std::move(bootstrap), tree, &rng));
  }
  return forest;
}

// ---------------------------------------------------------------------------
// RBF SVM

double RbfKernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                 const Eigen::Ref<const Eigen::RowVectorXd>& b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

double RbfSvm::DecisionValue(
    const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double f = bias;
  for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
    f += coefficients(i) * RbfKernel(support_vectors.row(i), x, gamma);
  }
  return f;
}

double RbfDualObjective(const SampleSet& data, const Vector& alpha,
                        double gamma) {
  const auto n = static_cast<Eigen::Index>(data.size());
  double quad = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (alpha(i) == 0.0) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      quad += alpha(i) * alpha(j) * data.labels()[static_cast<std::size_t>(i)] *
              data.labels()[static_cast<std::size_t>(j)] *
              RbfKernel(data.features().row(i), data.features().row(j), gamma);
    }
  }
  return alpha.sum() - 0.5 * quad;
}

RbfSvmTraining TrainRbfSvmDetailed(const SampleSet& data,
                                   const RbfSvmParams& params) {
  RequireBothClasses(data, "RBF SVM");
  const double c = params.reg_c;
  if (!(c > 0.0) || !(params.tolerance > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "RBF SVM needs positive C and tolerance");
  }
  const double gamma =
      params.gamma.value_or(1.0 / static_cast<double>(data.dim()));
  if (!(gamma > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "RBF gamma must be positive");
  }
  const auto n = static_cast<Eigen::Index>(data.size());
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = data.labels()[static_cast<std::size_t>(i)];
  }
  Matrix q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      q(i, j) = q(j, i) =
          y(i) * y(j) *
          RbfKernel(data.features().row(i), data.features().row(j), gamma);
    }
  }

  constexpr double kTau = 1e-12;
  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);  // Q alpha - e
  auto in_up = [&](Eigen::Index t) {
    return (y(t) > 0 && alpha(t) < c) || (y(t) < 0 && alpha(t) > 0);
  };
  auto in_low = [&](Eigen::Index t) {
    return (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < c);
  };

  std::size_t iter = 0;
  for (;; ++iter) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y(t) * grad(t);
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || g_max - g_min <= params.tolerance) break;
    if (iter >= params.max_iterations) {
      throw Error(ErrorKind::kConvergence,
                  "RBF SVM did not converge in " +
                      std::to_string(params.max_iterations) +
                      " iterations; KKT gap " + FormatDouble(g_max - g_min));
    }

    const double old_i = alpha(i);
    const double old_j = alpha(j);
    if (y(i) != y(j)) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = old_i - old_j;
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = -diff;
      }
      if (diff > 0.0) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = c - diff;
        }
      } else if (alpha(j) > c) {
        alpha(j) = c;
        alpha(i) = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = old_i + old_j;
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = sum - c;
        }
      } else if (alpha(j) < 0.0) {
        alpha(j) = 0.0;
        alpha(i) = sum;
      }
      if (sum > c) {
        if (alpha(j) > c) {
          alpha(j) = c;
          alpha(i) = sum - c;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = sum;
      }
    }
    const double delta_i = alpha(i) - old_i;
    const double delta_j = alpha(j) - old_j;
    grad += q.col(i) * delta_i + q.col(j) * delta_j;
  }

  // Offset from the free variables, or the midpoint of the feasible interval.
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (alpha(t) >= c) {
      if (y(t) < 0)
        upper = std::min(upper, yg);
      else
        lower = std::max(lower, yg);
    } else if (alpha(t) <= 0.0) {
      if (y(t) > 0)
        upper = std::min(upper, yg);
      else
        lower = std::max(lower, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count)
                                    : (upper + lower) / 2.0;

  RbfSvmTraining out;
  out.alpha = alpha;
  out.iterations = iter;
  out.dual_objective = alpha.sum() - 0.5 * alpha.dot(grad + Vector::Ones(n));
  std::vector<Eigen::Index> support;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha(t) > 0.0) support.push_back(t);
  }
  out.model.support_vectors.resize(static_cast<Eigen::Index>(support.size()),
                                   data.features().cols());
  out.model.coefficients.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    out.model.support_vectors.row(row) = data.features().row(support[k]);
    out.model.coefficients(row) = alpha(support[k]) * y(support[k]);
  }
  out.model.bias = -rho;
  out.model.gamma = gamma;
  out.model.reg_c = c;
  return out;
}

RbfSvm TrainRbfSvm(const SampleSet& data, const RbfSvmParams& params) {
  return TrainRbfSvmDetailed(data, params).model;
}

// ---------------------------------------------------------------------------

std::vector<int> PredictTarget(const TargetModel& model,
                               const Matrix& features) {
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const auto x = features.row(i);
    out[static_cast<std::size_t>(i)] = std::visit(
        [&](const auto& m) -> int {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, GaussianNb>) {
            return PredictNb(m, x);
          } else if constexpr (std::is_same_v<M, DecisionTree>) {
            return m.PredictRow(x);
          } else if constexpr (std::is_same_v<M, RandomForest>) {
            std::vector<int> votes;
            votes.reserve(m.trees.size());
            for (const auto& tree : m.trees)
              votes.push_back(tree.PredictRow(x));
            return MajorityVote(votes);
          } else {
            return m.DecisionValue(x) >= 0.0 ? 1 : -1;
          }
        },
        model);
  }
  return out;
}

const char* TargetModelName(const TargetModel& model) noexcept {
  switch (model.index()) {
    case 0:
      return "gaussian_nb";
    case 1:
      return "decision_tree";
    case 2:
      return "random_forest";
    default:
      return "rbf_svm";
  }
}

}  // namespace fairpoison
