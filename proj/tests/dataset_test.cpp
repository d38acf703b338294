#include "fairpoison/dataset.hpp"

#include <cmath>

#include "doctest.h"
#include "fairpoison/error.hpp"
#include "test_support.hpp"

using namespace fairpoison;
using fairpoison::testing::MakeSet;

namespace {

Vector ClassMean(const SampleSet& s, int label) {
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(s.dim()));
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels()[i] != label) continue;
    sum += s.row(i);
    ++n;
  }
  return sum / static_cast<double>(n);
}

Matrix ClassCovariance(const SampleSet& s, int label) {
  const Vector mu = ClassMean(s, label);
  Matrix cov = Matrix::Zero(2, 2);
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels()[i] != label) continue;
    const Vector c = s.row(i) - mu;
    cov += c * c.transpose();
    ++n;
  }
  return cov / static_cast<double>(n - 1);
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("synthetic shape and determinism") {
    SyntheticConfig cfg{2000, 4.0, std::numbers::pi / 4.0, 7};
    const SampleSet a = GenerateSynthetic(cfg);
    const SampleSet b = GenerateSynthetic(cfg);
    CHECK(a.size() == 2000);
    CHECK(a.dim() == 2);
    CHECK(a.features() == b.features());
    CHECK(a.labels() == b.labels());
    CHECK(a.groups() == b.groups());
    CHECK(a.CountGroup(GroupTag::kNone) == 0);
  }

  TEST_CASE("synthetic class moments at large n") {
    const SampleSet s =
        GenerateSynthetic({100000, 5.0, std::numbers::pi / 4.0, 1});
    const Vector pos = ClassMean(s, 1);
    CHECK(std::abs(pos(0) - 2.0) < 0.05);
    CHECK(std::abs(pos(1) - 2.0) < 0.05);
    const auto neg_expected = NegativeClassMean(5.0);
    const Vector neg = ClassMean(s, -1);
    CHECK(std::abs(neg(0) - neg_expected[0]) < 0.05);
    CHECK(std::abs(neg(1) - neg_expected[1]) < 0.05);
    CHECK((neg - pos).norm() == doctest::Approx(5.0).epsilon(0.02));

    Matrix cov_pos(2, 2), cov_neg(2, 2);
    cov_pos << 5, 1, 1, 5;
    cov_neg << 10, 1, 1, 3;
    CHECK((ClassCovariance(s, 1) - cov_pos).norm() < 0.5);
    CHECK((ClassCovariance(s, -1) - cov_neg).norm() < 0.5);
  }

  TEST_CASE("zero separation makes centroids coincide") {
    const SampleSet s =
        GenerateSynthetic({100000, 0.0, std::numbers::pi / 4.0, 2});
    CHECK((ClassMean(s, 1) - ClassMean(s, -1)).norm() < 0.1);
  }

  TEST_CASE("negative class mean lies on the diagonal at distance S") {
    for (double sep : {0.0, 1.0, 7.5}) {
      const auto m = NegativeClassMean(sep);
      CHECK(m[0] == doctest::Approx(m[1]));
      CHECK(std::hypot(m[0] - 2.0, m[1] - 2.0) == doctest::Approx(sep));
    }
  }

  TEST_CASE("both groups present at every separation") {
    for (int sep = 0; sep <= 9; ++sep) {
      const SampleSet s =
          GenerateSynthetic({2000, double(sep), std::numbers::pi / 4.0, 13});
      const double priv = double(s.CountGroup(GroupTag::kPrivileged)) / 2000.0;
      CHECK(priv > 0.0);
      CHECK(priv < 1.0);
    }
  }

  TEST_CASE("invalid synthetic configs are rejected") {
    CHECK_THROWS_AS(GenerateSynthetic({0, 1.0, 0.0, 0}), Error);
    CHECK_THROWS_AS(GenerateSynthetic({10, -1.0, 0.0, 0}), Error);
  }

  TEST_CASE("csv label mapping with a favorable value") {
    const std::string text =
        "a,b,outcome,race\n"
        "1,2,yes,w\n3,4,yes,b\n5,6,no,w\n7,8,no,b\n";
    CsvSchema schema;
    schema.label_column = "outcome";
    schema.sensitive_column = "race";
    schema.favorable_value = "yes";
    schema.privileged_value = "w";
    const SampleSet s = ParseCsv(text, schema);
    CHECK(s.labels() == std::vector<int>{1, 1, -1, -1});
    CHECK(s.groups() == std::vector<GroupTag>{
                            GroupTag::kPrivileged, GroupTag::kUnprivileged,
                            GroupTag::kPrivileged, GroupTag::kUnprivileged});
    CHECK(s.dim() == 2);
    CHECK(s.features()(3, 1) == 8.0);
  }

  TEST_CASE("csv missing sensitive column names it") {
    CsvSchema schema;
    schema.sensitive_column = "ethnicity";
    try {
      ParseCsv("x,label\n1,1\n", schema);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kParse);
      CHECK(std::string(e.what()).find("ethnicity") != std::string::npos);
    }
  }

  TEST_CASE("csv malformed numbers are parse errors") {
    CHECK_THROWS_AS(ParseCsv("x,label,group\nabc,1,privileged\n", CsvSchema{}),
                    Error);
    CHECK_THROWS_AS(ParseCsv("", CsvSchema{}), Error);
  }

  TEST_CASE("csv round trip is exact") {
    const SampleSet s = GenerateSynthetic({50, 3.0, std::numbers::pi / 4.0, 4});
    const SampleSet with_none =
        s.WithAppended(s.row(0) * 0.3, -1, GroupTag::kNone);
    const std::string text = FormatCsv(with_none);
    const SampleSet back = ParseCsv(text, CsvSchema{});
    CHECK(back.features() == with_none.features());
    CHECK(back.labels() == with_none.labels());
    CHECK(back.groups() == with_none.groups());
    CHECK(FormatCsv(back) == text);
  }

  TEST_CASE("split sizes") {
    CHECK(SplitSizes(2000, {}) == std::array<std::size_t, 3>{1000, 600, 400});
    CHECK(SplitSizes(10, {}) == std::array<std::size_t, 3>{5, 3, 2});
  }

  TEST_CASE("split is a deterministic partition") {
    const SampleSet s =
        GenerateSynthetic({200, 3.0, std::numbers::pi / 4.0, 4});
    const DataSplit a = Split(s, {}, 99);
    const DataSplit b = Split(s, {}, 99);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.test_indices == b.test_indices);
    std::vector<int> seen(200, 0);
    for (auto i : a.train_indices) ++seen[i];
    for (auto i : a.validation_indices) ++seen[i];
    for (auto i : a.test_indices) ++seen[i];
    for (int c : seen) CHECK(c == 1);
    CHECK(a.train.size() == 100);
    CHECK(a.train.row(3) == s.row(a.train_indices[3]));
    const DataSplit c = Split(s, {}, 100);
    CHECK(c.train_indices != a.train_indices);
  }

  TEST_CASE("partition by group") {
    using G = GroupTag;
    const SampleSet s =
        MakeSet({{1}, {2}, {3}, {4}, {5}}, {1, 1, -1, -1, 1},
                {G::kUnprivileged, G::kPrivileged, G::kUnprivileged,
                 G::kPrivileged, G::kUnprivileged});
    const GroupPartition p = PartitionByGroup(s);
    CHECK(p.unprivileged.size() == 3);
    CHECK(p.privileged.size() == 2);

    const SampleSet all_priv =
        MakeSet({{1}, {2}}, {1, -1}, {G::kPrivileged, G::kPrivileged});
    const GroupPartition q = PartitionByGroup(all_priv);
    CHECK(q.unprivileged.empty());
    CHECK(q.privileged.size() == 2);

    const SampleSet with_none =
        MakeSet({{1}, {2}}, {1, -1}, {G::kPrivileged, G::kNone});
    CHECK_THROWS_AS(PartitionByGroup(with_none), Error);
  }

  TEST_CASE("sample set validation") {
    CHECK_THROWS_AS(MakeSet({{1}, {2}}, {1, 0},
                            {GroupTag::kPrivileged, GroupTag::kPrivileged}),
                    Error);
    CHECK_THROWS_AS(MakeSet({{1}, {std::nan("")}}, {1, -1},
                            {GroupTag::kPrivileged, GroupTag::kPrivileged}),
                    Error);
  }

  TEST_CASE("feature range and double formatting") {
    const SampleSet s = MakeSet({{1, -3}, {4, 2}, {-2, 0}}, {1, -1, 1},
                                {GroupTag::kPrivileged, GroupTag::kPrivileged,
                                 GroupTag::kUnprivileged});
    const auto [lo, hi] = FeatureRange(s);
    CHECK(lo(0) == -2.0);
    CHECK(lo(1) == -3.0);
    CHECK(hi(0) == 4.0);
    CHECK(hi(1) == 2.0);
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125}) {
      CHECK(std::stod(FormatDouble(v)) == v);
    }
  }
}
