#include "fairpoison/attack.hpp"

#include <cmath>

#include "attack_oracle.hpp"
#include "doctest.h"
#include "fairpoison/error.hpp"
#include "test_support.hpp"

using namespace fairpoison;
using namespace fairpoison::testing;

namespace {

SampleSet GroupedSet(std::size_t unpriv, std::size_t priv) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<GroupTag> groups;
  for (std::size_t i = 0; i < unpriv + priv; ++i) {
    rows.push_back({double(i), double(i % 3)});
    labels.push_back(i % 2 ? 1 : -1);
    groups.push_back(i < unpriv ? GroupTag::kUnprivileged
                                : GroupTag::kPrivileged);
  }
  return MakeSet(rows, labels, groups);
}

double LoopAttackerLoss(const SampleSet& v, double lambda,
                        const LinearModel& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool unpriv = v.groups()[i] == GroupTag::kUnprivileged;
    const int target = unpriv ? 1 : -1;
    const double f = m.weights.dot(v.row(i)) + m.bias;
    const double l = EvalMarginLoss(m.loss, target * f).value;
    total += unpriv ? l : lambda * l;
  }
  return total;
}

LinearModel SomeModel(LossKind loss = LossKind::kLogistic) {
  LinearModel m;
  m.weights = Vector(2);
  m.weights << 0.7, -0.4;
  m.bias = 0.3;
  m.loss = loss;
  return m;
}

}  // namespace

TEST_SUITE("attack") {
  TEST_CASE("lambda follows the group ratio") {
    const AttackObjective obj =
        BuildFairnessObjective(GroupedSet(3, 6), PriorsRatioLambda{});
    CHECK(obj.lambda == 0.5);
    CHECK(obj.unprivileged_count == 3);
    CHECK(obj.privileged_count == 6);
    const AttackObjective fixed =
        BuildFairnessObjective(GroupedSet(3, 6), FixedLambda{1.0});
    CHECK(fixed.lambda == 1.0);
  }

  TEST_CASE("validation targets follow group, not label") {
    const SampleSet v = GroupedSet(4, 5);
    const AttackObjective obj = BuildFairnessObjective(v, PriorsRatioLambda{});
    for (std::size_t i = 0; i < v.size(); ++i) {
      const bool unpriv = v.groups()[i] == GroupTag::kUnprivileged;
      CHECK(obj.targets[i] == (unpriv ? 1 : -1));
      CHECK(obj.weights[i] == (unpriv ? 1.0 : obj.lambda));
    }
  }

  TEST_CASE("objective needs both groups") {
    CHECK_THROWS_AS(
        BuildFairnessObjective(GroupedSet(0, 4), PriorsRatioLambda{}), Error);
    CHECK_THROWS_AS(
        BuildFairnessObjective(GroupedSet(4, 0), PriorsRatioLambda{}), Error);
  }

  TEST_CASE("zero model scores log 2 per sample") {
    const SampleSet v = GroupedSet(3, 6);
    const AttackObjective obj = BuildFairnessObjective(v, PriorsRatioLambda{});
    LinearModel zero;
    zero.weights = Vector::Zero(2);
    CHECK(AttackerLoss(obj, zero) ==
          doctest::Approx((3 + 0.5 * 6) * std::log(2.0)));
  }

  TEST_CASE("attacker loss matches a loop oracle") {
    const SampleSet v = GroupedSet(4, 6);
    for (LossKind loss : {LossKind::kLogistic, LossKind::kSquaredHinge}) {
      const LinearModel m = SomeModel(loss);
      const AttackObjective obj =
          BuildFairnessObjective(v, PriorsRatioLambda{});
      CHECK(AttackerLoss(obj, m) ==
            doctest::Approx(LoopAttackerLoss(v, 4.0 / 6.0, m)).epsilon(1e-12));
    }
  }

  TEST_CASE("generic objective matches a loop oracle") {
    const SampleSet v = GroupedSet(4, 6);
    const LinearModel m = SomeModel();
    double expected = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      expected += EvalMarginLoss(m.loss, v.labels()[i] *
                                             (m.weights.dot(v.row(i)) + m.bias))
                      .value;
    CHECK(AttackerLoss(BuildGenericObjective(v), m) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("loss is larger for a model inverting the fair labelling") {
    const SampleSet v = GroupedSet(4, 6);
    const AttackObjective obj = BuildFairnessObjective(v, PriorsRatioLambda{});
    // Feature 0 < 4 marks unprivileged rows in GroupedSet.
    LinearModel adversarial;
    adversarial.weights = Vector(2);
    adversarial.weights << 10.0, 0.0;
    adversarial.bias = -35.0;
    const double best = AttackerLoss(obj, adversarial);
    const Vector theta = adversarial.Theta();
    const double norm = theta.norm();
    std::vector<Vector> probes{Vector::Zero(3), -theta, 0.5 * theta,
                               Vector::Unit(3, 2) * norm,
                               -Vector::Unit(3, 2) * norm};
    for (const Vector& t : probes) {
      CHECK(AttackerLoss(obj, LinearModel::FromTheta(t, LossKind::kLogistic,
                                                     1.0)) < best);
    }
  }

  TEST_CASE("loss gradient in theta is linear in lambda") {
    const SampleSet v = GroupedSet(4, 6);
    const LinearModel m = SomeModel();
    const Vector g0 =
        AttackerLossGradient(BuildFairnessObjective(v, FixedLambda{0.0}), m);
    const Vector g1 =
        AttackerLossGradient(BuildFairnessObjective(v, FixedLambda{1.0}), m);
    const Vector g2 =
        AttackerLossGradient(BuildFairnessObjective(v, FixedLambda{2.0}), m);
    CHECK(((g2 - g0) - 2.0 * (g1 - g0)).norm() < 1e-12);
  }

  TEST_CASE("implicit gradient matches retraining differences") {
    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SmallProblem p = MakeSmallProblem(seed);
      const PoisonPoint point{RandomInBox(p.bounds, rng), seed % 2 ? 1 : -1};
      LinearModel at_optimum;
      EvaluatePoison(p.train, p.objective, point, p.spec, nullptr, &at_optimum);
      const Vector g = PoisonGradient(p.objective, p.train, point, at_optimum);
      const Vector fd = RetrainingGradient(p.train, p.objective, point, p.spec);
      CHECK(MaxRelativeError(g, fd) < 1e-2);
    }
  }

  TEST_CASE("reduced objectives match retraining differences") {
    SmallProblem p = MakeSmallProblem(3);
    Rng rng(9);
    const PoisonPoint point{RandomInBox(p.bounds, rng), -1};

    // lambda = 0: only the unprivileged term remains.
    p.objective = BuildFairnessObjective(p.validation, FixedLambda{0.0});
    LinearModel opt;
    EvaluatePoison(p.train, p.objective, point, p.spec, nullptr, &opt);
    CHECK(MaxRelativeError(
              PoisonGradient(p.objective, p.train, point, opt),
              RetrainingGradient(p.train, p.objective, point, p.spec)) < 1e-2);

    // No unprivileged samples: a pure privileged-group loss.
    AttackObjective priv_only;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < p.validation.size(); ++i)
      if (p.validation.groups()[i] == GroupTag::kPrivileged) rows.push_back(i);
    priv_only.features = p.validation.Subset(rows).features();
    priv_only.targets.assign(rows.size(), -1);
    priv_only.weights.assign(rows.size(), 1.0);
    priv_only.privileged_count = rows.size();
    EvaluatePoison(p.train, priv_only, point, p.spec, nullptr, &opt);
    CHECK(MaxRelativeError(
              PoisonGradient(priv_only, p.train, point, opt),
              RetrainingGradient(p.train, priv_only, point, p.spec)) < 1e-2);
  }

  TEST_CASE("projection clamps and is idempotent") {
    Vector lo(2), hi(2), x(2);
    lo << 0, -1;
    hi << 1, 1;
    x << 3, -5;
    const BoxBounds box(lo, hi);
    const Vector p = box.Project(x);
    CHECK(p(0) == 1.0);
    CHECK(p(1) == -1.0);
    CHECK(box.Project(p) == p);
    CHECK(box.Contains(p));
    CHECK_FALSE(box.Contains(x));
    CHECK_THROWS_AS(BoxBounds(hi, lo), Error);
  }

  TEST_CASE("flat objective leaves the point in place") {
    const SmallProblem p = MakeSmallProblem(1);
    // No validation rows: A is identically zero.
    AttackObjective empty;
    empty.features = Matrix(0, 2);
    PoisonPoint init{p.train.row(0), -p.train.labels()[0]};
    const PointOptimization r =
        OptimizePoint(p.train, empty, init, p.bounds, p.spec, AttackConfig{});
    CHECK(r.point.features == init.features);
  }

  TEST_CASE("accepted values never decrease") {
    const SmallProblem p = MakeSmallProblem(4);
    const auto inits = InitPoints(p.train, 3, 4);
    for (const auto& init : inits) {
      const PointOptimization r = OptimizePoint(
          p.train, p.objective, init, p.bounds, p.spec, AttackConfig{});
      for (std::size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i].value >= r.trace[i - 1].value);
      CHECK(r.value >= r.trace.front().value - 1e-12);
      CHECK(p.bounds.Contains(r.point.features));
    }
  }

  TEST_CASE("init points flip labels deterministically") {
    const SampleSet one = MakeSet({{2, 3}}, {1}, {GroupTag::kPrivileged});
    const auto forced = InitPoints(one, 1, 0);
    REQUIRE(forced.size() == 1);
    CHECK(forced[0].label == -1);
    CHECK(forced[0].features == one.row(0));

    const SampleSet s = RandomSet(30, 2, 6);
    const auto a = InitPoints(s, 10, 3);
    const auto b = InitPoints(s, 10, 3);
    REQUIRE(a.size() == 10);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].features == b[k].features);
      bool found = false;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.row(i) == a[k].features) {
          found = true;
          CHECK(a[k].label == -s.labels()[i]);
        }
      }
      CHECK(found);
    }
    CHECK(InitPoints(s, 45, 1).size() == 45);
  }

  TEST_CASE("budget accounting") {
    CHECK(ResolveBudget(PoisonFraction{0.05}, 1000) == 50);
    CHECK(ResolveBudget(PoisonCount{7}, 1000) == 7);
    const SmallProblem p = MakeSmallProblem(2);
    AttackConfig cfg;
    cfg.budget = PoisonCount{0};
    const AttackResult none = RunAttack(p.train, p.validation, p.spec, cfg);
    CHECK(none.poisoned_train.features() == p.train.features());
    CHECK(none.points.empty());
    const AttackResult generic_none =
        RunGenericAttack(p.train, p.validation, p.spec, cfg);
    CHECK(generic_none.poisoned_train.size() == p.train.size());

    cfg.budget = PoisonCount{3};
    cfg.max_iterations = 20;
    const AttackResult r = RunAttack(p.train, p.validation, p.spec, cfg);
    CHECK(r.poisoned_train.size() == p.train.size() + 3);
    CHECK(r.poisoned_train.CountGroup(GroupTag::kNone) == 3);
    for (const auto& pt : r.points) CHECK(r.bounds.Contains(pt.features));
  }

  TEST_CASE("five percent of a thousand rows") {
    const SampleSet train =
        GenerateSynthetic({1000, 5.0, std::numbers::pi / 4.0, 1});
    const SampleSet val =
        GenerateSynthetic({300, 5.0, std::numbers::pi / 4.0, 2});
    AttackConfig cfg;
    cfg.max_iterations = 2;
    const AttackResult r = RunAttack(train, val, {}, cfg);
    CHECK(r.points.size() == 50);
    CHECK(r.poisoned_train.size() == 1050);
  }

  TEST_CASE("attack is deterministic and traces are monotone per point") {
    const SmallProblem p = MakeSmallProblem(6);
    AttackConfig cfg;
    cfg.budget = PoisonCount{4};
    cfg.seed = 11;
    const AttackResult a = RunAttack(p.train, p.validation, p.spec, cfg);
    const AttackResult b = RunAttack(p.train, p.validation, p.spec, cfg);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t k = 0; k < a.points.size(); ++k)
      CHECK(a.points[k].features == b.points[k].features);
    for (std::size_t i = 1; i < a.trace.size(); ++i) {
      if (a.trace[i].point_index == a.trace[i - 1].point_index)
        CHECK(a.trace[i].value >= a.trace[i - 1].value);
    }
    const std::string csv = TraceToCsv(a.trace);
    CHECK(csv.rfind("iteration,point_index,value,step_size\n", 0) == 0);
  }

  TEST_CASE("invalid configurations list every problem") {
    AttackConfig cfg;
    cfg.step_size = 0.0;
    cfg.stop_threshold = -1.0;
    cfg.max_iterations = 0;
    cfg.lambda = FixedLambda{-2.0};
    CHECK(cfg.Validate().size() == 4);
  }

  TEST_CASE("generic attack lowers validation accuracy") {
    double clean_total = 0.0, poisoned_total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const SampleSet data =
          GenerateSynthetic({600, 5.0, std::numbers::pi / 4.0, seed});
      const DataSplit sp = Split(data, {}, seed);
      ModelSpec spec;
      AttackConfig cfg;
      cfg.budget = PoisonFraction{0.10};
      cfg.seed = seed;
      const LinearModel clean = TrainLinear(sp.train, spec.loss, spec.reg_c);
      const AttackResult r =
          RunGenericAttack(sp.train, sp.validation, spec, cfg);
      auto accuracy = [&](const LinearModel& m) {
        return *EvaluatePredictions(Predict(m, sp.validation.features()),
                                    sp.validation)
                    .accuracy;
      };
      clean_total += accuracy(clean);
      poisoned_total += accuracy(r.model);
    }
    CHECK(poisoned_total <= clean_total);
  }

  TEST_CASE("attacker loss tracks disparate impact inversely") {
    for (std::uint64_t seed : {1, 2}) {
      const SmallProblem p =
          MakeSmallProblem(seed, 2.0, LossKind::kLogistic, 600);
      const LossSurface s = SurfaceOverGrid(p, 1, 12);
      CHECK(Spearman(s.attacker_loss, s.disparate_impact) < 0.0);
    }
  }

  TEST_CASE("spearman of a monotone map is one") {
    const std::vector<double> a{3, 1, 2, 2, 5};
    const std::vector<double> b{30, 10, 20, 20, 50};
    CHECK(Spearman(a, b) == doctest::Approx(1.0));
    CHECK(Ranks(a) == std::vector<double>{4, 1, 2.5, 2.5, 5});
  }

  TEST_CASE("poison rows carry no group") {
    std::vector<PoisonPoint> pts{{Vector::Ones(2), 1}, {Vector::Zero(2), -1}};
    const SampleSet s = PoisonSampleSet(pts, {"a", "b"});
    CHECK(s.CountGroup(GroupTag::kNone) == 2);
    CHECK(s.labels() == std::vector<int>{1, -1});
  }
}
