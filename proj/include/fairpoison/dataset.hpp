#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fairpoison {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class GroupTag : std::uint8_t { kPrivileged, kUnprivileged, kNone };

const char* GroupTagName(GroupTag tag) noexcept;

/// Feature matrix with +/-1 labels and per-sample group tags.
///
/// The sensitive attribute is carried only by `groups`, never as a feature
/// column. An empty set is representable (it is what partitioning a
/// single-group set yields) but generators and loaders never produce one.
class SampleSet {
 public:
  SampleSet(Matrix features, std::vector<int> labels,
            std::vector<GroupTag> groups,
            std::vector<std::string> feature_names);

  /// Empty set with `dim` features.
  static SampleSet Empty(std::vector<std::string> feature_names);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept {
    return static_cast<std::size_t>(features_.cols());
  }
  bool empty() const noexcept { return labels_.empty(); }

  const Matrix& features() const noexcept { return features_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<GroupTag>& groups() const noexcept { return groups_; }
  const std::vector<std::string>& feature_names() const noexcept {
    return feature_names_;
  }

  Vector row(std::size_t i) const { return features_.row(i).transpose(); }

  SampleSet Subset(std::span<const std::size_t> indices) const;

  /// Rows of `this` followed by rows of `other`; dimensions must agree.
  SampleSet Concat(const SampleSet& other) const;

  SampleSet WithAppended(const Vector& features, int label,
                         GroupTag group) const;

  std::size_t CountLabel(int label) const;
  std::size_t CountGroup(GroupTag group) const;

 private:
  Matrix features_;
  std::vector<int> labels_;
  std::vector<GroupTag> groups_;
  std::vector<std::string> feature_names_;
};

struct DataSplit {
  SampleSet train;
  SampleSet validation;
  SampleSet test;
  // Row indices into the input set, per part.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
};

struct SplitFractions {
  double train = 0.5;
  double validation = 0.3;
  double test = 0.2;
};

struct SyntheticConfig {
  std::size_t n_samples = 2000;
  double separation = 0.0;
  double rotation = std::numbers::pi / 4.0;
  std::uint64_t seed = 0;
};

/// Two-class Gaussian mixture with a sensitive attribute drawn from the class
/// posterior of the rotated feature vector. Class +1 ~ N([2,2], [5 1; 1 5]);
/// class -1 ~ N([2,2] - S/sqrt(2) [1,1], [10 1; 1 3]), so the centroids are
/// exactly S apart.
SampleSet GenerateSynthetic(const SyntheticConfig& config);

/// Mean of the class -1 component for a given separation.
std::array<double, 2> NegativeClassMean(double separation);

struct CsvSchema {
  std::string label_column = "label";
  std::string sensitive_column = "group";
  std::string favorable_value = "1";
  std::string privileged_value = "privileged";
  // Sensitive value mapped to GroupTag::kNone (used for poison rows).
  std::optional<std::string> none_value = "none";
};

SampleSet LoadCsv(const std::string& path, const CsvSchema& schema);
SampleSet ParseCsv(const std::string& text, const CsvSchema& schema,
                   const std::string& source_name = "<memory>");

/// Writes features, then `label` (+1/-1) and `group`
/// (privileged/unprivileged/none) columns. Readable with the default schema.
std::string FormatCsv(const SampleSet& data);
void SaveCsv(const SampleSet& data, const std::string& path);

DataSplit Split(const SampleSet& data, const SplitFractions& fractions,
                std::uint64_t seed);

/// Part sizes used by Split for n samples.
std::array<std::size_t, 3> SplitSizes(std::size_t n,
                                      const SplitFractions& fractions);

struct GroupPartition {
  SampleSet unprivileged;
  SampleSet privileged;
};

GroupPartition PartitionByGroup(const SampleSet& data);

/// Per-feature minimum and maximum.
std::pair<Vector, Vector> FeatureRange(const SampleSet& data);

/// Shortest decimal representation that round-trips.
std::string FormatDouble(double value);

}  // namespace fairpoison
