#include "fairpoison/linear_model.hpp"

#include <cmath>

#include "doctest.h"
#include "fairpoison/error.hpp"
#include "test_support.hpp"

using namespace fairpoison;
using fairpoison::testing::MakeSet;
using fairpoison::testing::RandomSet;

namespace {

constexpr LossKind kBothLosses[] = {LossKind::kLogistic,
                                    LossKind::kSquaredHinge};

LinearModel RandomModel(std::size_t d, LossKind loss, Rng& rng) {
  LinearModel m;
  m.weights = Vector(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) m.weights(j) = rng.Normal();
  m.bias = rng.Normal();
  m.loss = loss;
  m.reg_c = 0.5 + 4.0 * rng.Uniform();
  return m;
}

double SampleLoss(const LinearModel& m, const Vector& x, int y) {
  return EvalMarginLoss(m.loss, y * (m.weights.dot(x) + m.bias)).value;
}

// Accuracy of a model trained on all folds but one, averaged over folds,
// computed without the library's CV routine.
double OracleCvAccuracy(const SampleSet& data, LossKind loss, double c,
                        const std::vector<std::size_t>& fold_of,
                        std::size_t folds) {
  double total = 0.0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> fit, held;
    for (std::size_t i = 0; i < data.size(); ++i)
      (fold_of[i] == f ? held : fit).push_back(i);
    const LinearModel m = TrainLinear(data.Subset(fit), loss, c);
    std::size_t correct = 0;
    for (std::size_t i : held) {
      const double v = m.weights.dot(data.row(i)) + m.bias;
      correct += ((v >= 0.0 ? 1 : -1) == data.labels()[i]);
    }
    total += double(correct) / double(held.size());
  }
  return total / double(folds);
}

}  // namespace

TEST_SUITE("linear_model") {
  TEST_CASE("decision value and sign tie rule") {
    LinearModel m;
    m.weights = Vector(2);
    m.weights << 1.0, 0.0;
    Matrix x(2, 2);
    x << 3.0, 7.0, 0.0, 5.0;
    const Vector f = DecisionValues(m, x);
    CHECK(f(0) == 3.0);
    CHECK(f(1) == 0.0);
    CHECK(Predict(m, x) == std::vector<int>{1, 1});
  }

  TEST_CASE("margin loss analytic values") {
    CHECK(EvalMarginLoss(LossKind::kLogistic, 0.0).value ==
          doctest::Approx(std::log(2.0)));
    CHECK(EvalMarginLoss(LossKind::kLogistic, 0.0).d1 == doctest::Approx(-0.5));
    const MarginLoss h = EvalMarginLoss(LossKind::kSquaredHinge, 2.0);
    CHECK(h.value == 0.0);
    CHECK(h.d1 == 0.0);
    CHECK(EvalMarginLoss(LossKind::kSquaredHinge, 0.0).value == 1.0);
    // Large margins stay finite.
    CHECK(std::isfinite(EvalMarginLoss(LossKind::kLogistic, -800.0).value));
    CHECK(EvalMarginLoss(LossKind::kLogistic, 800.0).value >= 0.0);
  }

  TEST_CASE("margin derivatives match finite differences") {
    for (LossKind kind : kBothLosses) {
      for (double m : {-3.0, -0.4, 0.3, 0.9, 1.7}) {
        const double h = 1e-6;
        const double fd = (EvalMarginLoss(kind, m + h).value -
                           EvalMarginLoss(kind, m - h).value) /
                          (2 * h);
        const double fd2 =
            (EvalMarginLoss(kind, m + h).d1 - EvalMarginLoss(kind, m - h).d1) /
            (2 * h);
        CHECK(EvalMarginLoss(kind, m).d1 == doctest::Approx(fd).epsilon(1e-6));
        CHECK(EvalMarginLoss(kind, m).d2 == doctest::Approx(fd2).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("per-sample gradients and Hessian match finite differences") {
    Rng rng(21);
    for (LossKind kind : kBothLosses) {
      const SampleSet data = RandomSet(5, 2, 100 + int(kind));
      const LinearModel m = RandomModel(2, kind, rng);
      const LossTerms terms = ComputeLossTerms(m, data);
      const Vector theta = m.Theta();
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Vector tp = theta, tm = theta;
        tp(k) += h;
        tm(k) -= h;
        const LinearModel mp = LinearModel::FromTheta(tp, kind, m.reg_c);
        const LinearModel mm = LinearModel::FromTheta(tm, kind, m.reg_c);
        for (std::size_t i = 0; i < data.size(); ++i) {
          const double fd = (SampleLoss(mp, data.row(i), data.labels()[i]) -
                             SampleLoss(mm, data.row(i), data.labels()[i])) /
                            (2 * h);
          CHECK(std::abs(terms.gradients(i, k) - fd) < 1e-6);
        }
        const Vector col =
            (TrainingGradient(mp, data) - TrainingGradient(mm, data)) / (2 * h);
        CHECK((terms.hessian.col(k) - col).cwiseAbs().maxCoeff() < 1e-4);
      }
      CHECK(terms.losses(0) ==
            doctest::Approx(SampleLoss(m, data.row(0), data.labels()[0])));
    }
  }

  TEST_CASE("training objective gradient matches finite differences") {
    Rng rng(8);
    const SampleSet data = RandomSet(12, 3, 5);
    for (LossKind kind : kBothLosses) {
      const LinearModel m = RandomModel(3, kind, rng);
      const Vector g = TrainingGradient(m, data);
      const Vector theta = m.Theta();
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Vector tp = theta, tm = theta;
        tp(k) += 1e-6;
        tm(k) -= 1e-6;
        const double fd =
            (TrainingObjective(LinearModel::FromTheta(tp, kind, m.reg_c),
                               data) -
             TrainingObjective(LinearModel::FromTheta(tm, kind, m.reg_c),
                               data)) /
            2e-6;
        CHECK(g(k) == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("bias is not regularized") {
    LinearModel m;
    m.weights = Vector::Zero(1);
    m.bias = 3.0;
    m.reg_c = 0.01;
    const SampleSet empty_like = MakeSet({{0.0}}, {1}, {GroupTag::kPrivileged});
    // Only the loss term contributes to the bias derivative.
    const double margin_d1 = EvalMarginLoss(LossKind::kLogistic, 3.0).d1;
    CHECK(TrainingGradient(m, empty_like)(1) == doctest::Approx(margin_d1));
  }

  TEST_CASE("separable two-point set is classified correctly") {
    for (LossKind kind : kBothLosses) {
      const SampleSet s =
          MakeSet({{-1, -1}, {1, 1}}, {-1, 1},
                  {GroupTag::kPrivileged, GroupTag::kUnprivileged});
      const LinearModel m = TrainLinear(s, kind, 1.0);
      CHECK(Predict(m, s.features()) == s.labels());
    }
  }

  TEST_CASE("mirrored data gives zero bias") {
    const SampleSet half = RandomSet(20, 2, 77);
    const Matrix mirrored = -half.features();
    std::vector<int> labels = half.labels();
    for (int& y : labels) y = -y;
    const SampleSet s = half.Concat(
        SampleSet(mirrored, labels, half.groups(), half.feature_names()));
    const LinearModel m = TrainLinear(s, LossKind::kLogistic, 1.0);
    CHECK(std::abs(m.bias) < 1e-6);
  }

  TEST_CASE("trained optimum has vanishing gradient") {
    const SampleSet data = RandomSet(60, 2, 3, 0.5);
    for (LossKind kind : kBothLosses) {
      const TrainResult r = TrainLinearDetailed(data, kind, 5.0);
      const Vector g = TrainingGradient(r.model, data);
      CHECK(g.norm() < 1e-6);
      for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
        CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] + 1e-12);
      // Central differences of the objective agree with the zero gradient.
      const Vector theta = r.model.Theta();
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Vector tp = theta, tm = theta;
        tp(k) += 1e-5;
        tm(k) -= 1e-5;
        const double fd =
            (TrainingObjective(LinearModel::FromTheta(tp, kind, 5.0), data) -
             TrainingObjective(LinearModel::FromTheta(tm, kind, 5.0), data)) /
            2e-5;
        CHECK(std::abs(fd) < 1e-4);
      }
    }
  }

  TEST_CASE("warm start reaches the same optimum") {
    const SampleSet data = RandomSet(40, 2, 9);
    const LinearModel cold = TrainLinear(data, LossKind::kLogistic, 1.0);
    LinearModel start = cold;
    start.weights(0) += 0.5;
    const LinearModel warm =
        TrainLinear(data, LossKind::kLogistic, 1.0, {}, &start);
    CHECK((warm.Theta() - cold.Theta()).norm() < 1e-6);
  }

  TEST_CASE("invalid training arguments") {
    const SampleSet data = RandomSet(10, 2, 1);
    CHECK_THROWS_AS(TrainLinear(data, LossKind::kLogistic, 0.0), Error);
    CHECK_THROWS_AS(TrainLinear(data, LossKind::kLogistic, -1.0), Error);
    CHECK_THROWS_AS(ParseLossKind("hinge"), Error);
    CHECK(ParseLossKind("squared_hinge") == LossKind::kSquaredHinge);
  }

  TEST_CASE("stratified folds balance classes") {
    std::vector<int> labels;
    for (int i = 0; i < 23; ++i) labels.push_back(i % 3 == 0 ? 1 : -1);
    const auto folds = StratifiedFolds(labels, 5, 4);
    CHECK(folds == StratifiedFolds(labels, 5, 4));
    for (int y : {1, -1}) {
      std::vector<int> per_fold(5, 0);
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == y) ++per_fold[folds[i]];
      const auto [lo, hi] =
          std::minmax_element(per_fold.begin(), per_fold.end());
      CHECK(*hi - *lo <= 1);
    }
  }

  TEST_CASE("singleton grid returns its value") {
    const SampleSet data = RandomSet(30, 2, 2);
    const double grid[] = {1.0};
    CHECK(SelectC(data, LossKind::kLogistic, grid, 5, 0) == 1.0);
  }

  TEST_CASE("C selection matches an exhaustive oracle") {
    const SampleSet full =
        GenerateSynthetic({600, 5.0, std::numbers::pi / 4.0, 12});
    for (LossKind kind : kBothLosses) {
      const std::vector<double> grid(std::begin(kDefaultCGrid),
                                     std::end(kDefaultCGrid));
      const auto folds = StratifiedFolds(full.labels(), 5, 3);
      std::size_t best = 0;
      std::vector<double> oracle;
      for (double c : grid)
        oracle.push_back(OracleCvAccuracy(full, kind, c, folds, 5));
      for (std::size_t g = 1; g < grid.size(); ++g)
        if (oracle[g] > oracle[best]) best = g;
      const auto scores = CrossValidationScores(full, kind, grid, 5, 3);
      for (std::size_t g = 0; g < grid.size(); ++g)
        CHECK(scores[g] == doctest::Approx(oracle[g]).epsilon(1e-12));
      CHECK(SelectC(full, kind, grid, 5, 3) == grid[best]);
    }
  }

  TEST_CASE("tied grid values resolve to the smaller C") {
    // Widely separated clusters: every C classifies every fold perfectly.
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<GroupTag> groups;
    for (int i = 0; i < 20; ++i) {
      const int y = i % 2 ? 1 : -1;
      rows.push_back({10.0 * y + 0.1 * i, 10.0 * y});
      labels.push_back(y);
      groups.push_back(GroupTag::kPrivileged);
    }
    const SampleSet s = MakeSet(rows, labels, groups);
    const double grid[] = {10.0, 5.0, 1.0};
    CHECK(SelectC(s, LossKind::kLogistic, grid, 5, 0) == 1.0);
  }
}
