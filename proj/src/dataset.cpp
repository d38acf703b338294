#include "fairpoison/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "fairpoison/error.hpp"
#include "fairpoison/random.hpp"

namespace fairpoison {

const char* GroupTagName(GroupTag tag) noexcept {
  switch (tag) {
    case GroupTag::kPrivileged:
      return "privileged";
    case GroupTag::kUnprivileged:
      return "unprivileged";
    case GroupTag::kNone:
      return "none";
  }
  return "none";
}

SampleSet::SampleSet(Matrix features, std::vector<int> labels,
                     std::vector<GroupTag> groups,
                     std::vector<std::string> feature_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      groups_(std::move(groups)),
      feature_names_(std::move(feature_names)) {
  const auto n = static_cast<std::size_t>(features_.rows());
  if (features_.cols() < 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "sample set needs at least one feature");
  }
  if (labels_.size() != n || groups_.size() != n) {
    throw Error(ErrorKind::kInvalidArgument,
                "sample set: features, labels and groups differ in length");
  }
  if (feature_names_.empty()) {
    for (Eigen::Index j = 0; j < features_.cols(); ++j) {
      feature_names_.push_back("x" + std::to_string(j + 1));
    }
  }
  if (feature_names_.size() != dim()) {
    throw Error(ErrorKind::kInvalidArgument,
                "sample set: feature name count does not match dimension");
  }
  if (!features_.allFinite()) {
    throw Error(ErrorKind::kNumeric, "sample set contains non-finite values");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels_[i] != 1 && labels_[i] != -1) {
      throw Error(ErrorKind::kInvalidArgument,
                  "label at row " + std::to_string(i) + " is not +1/-1");
    }
  }
}

SampleSet SampleSet::Empty(std::vector<std::string> feature_names) {
  const auto d = static_cast<Eigen::Index>(feature_names.size());
  return SampleSet(Matrix(0, d), {}, {}, std::move(feature_names));
}

SampleSet SampleSet::Subset(std::span<const std::size_t> indices) const {
  Matrix features(static_cast<Eigen::Index>(indices.size()), features_.cols());
  std::vector<int> labels;
  std::vector<GroupTag> groups;
  labels.reserve(indices.size());
  groups.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) {
      throw Error(ErrorKind::kInvalidArgument, "subset index out of range");
    }
    features.row(static_cast<Eigen::Index>(k)) = features_.row(i);
    labels.push_back(labels_[i]);
    groups.push_back(groups_[i]);
  }
  return SampleSet(std::move(features), std::move(labels), std::move(groups),
                   feature_names_);
}

SampleSet SampleSet::Concat(const SampleSet& other) const {
  if (other.dim() != dim()) {
    throw Error(ErrorKind::kInvalidArgument,
                "cannot concatenate sample sets of different dimension");
  }
  Matrix features(features_.rows() + other.features_.rows(), features_.cols());
  features << features_, other.features_;
  std::vector<int> labels = labels_;
  labels.insert(labels.end(), other.labels_.begin(), other.labels_.end());
  std::vector<GroupTag> groups = groups_;
  groups.insert(groups.end(), other.groups_.begin(), other.groups_.end());
  return SampleSet(std::move(features), std::move(labels), std::move(groups),
                   feature_names_);
}

SampleSet SampleSet::WithAppended(const Vector& features, int label,
                                  GroupTag group) const {
  if (static_cast<std::size_t>(features.size()) != dim()) {
    throw Error(ErrorKind::kInvalidArgument,
                "appended row has wrong dimension");
  }
  Matrix rows(features_.rows() + 1, features_.cols());
  rows.topRows(features_.rows()) = features_;
  rows.row(features_.rows()) = features.transpose();
  std::vector<int> labels = labels_;
  labels.push_back(label);
  std::vector<GroupTag> groups = groups_;
  groups.push_back(group);
  return SampleSet(std::move(rows), std::move(labels), std::move(groups),
                   feature_names_);
}

std::size_t SampleSet::CountLabel(int label) const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), label));
}

std::size_t SampleSet::CountGroup(GroupTag group) const {
  return static_cast<std::size_t>(
      std::count(groups_.begin(), groups_.end(), group));
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

struct Gaussian2 {
  std::array<double, 2> mean;
  std::array<double, 3> cov;  // s11, s12, s22

  double LogDensity(double x, double y) const {
    const double det = cov[0] * cov[2] - cov[1] * cov[1];
    const double dx = x - mean[0];
    const double dy = y - mean[1];
    const double quad =
        (cov[2] * dx * dx - 2.0 * cov[1] * dx * dy + cov[0] * dy * dy) / det;
    return -0.5 * quad - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi);
  }

  // x = mean + L z with L the lower Cholesky factor.
  std::array<double, 2> Sample(Rng& rng) const {
    const double l11 = std::sqrt(cov[0]);
    const double l21 = cov[1] / l11;
    const double l22 = std::sqrt(cov[2] - l21 * l21);
    const double z1 = rng.Normal();
    const double z2 = rng.Normal();
    return {mean[0] + l11 * z1, mean[1] + l21 * z1 + l22 * z2};
  }
};

}  // namespace

std::array<double, 2> NegativeClassMean(double separation) {
  const double offset = separation / std::numbers::sqrt2;
  return {2.0 - offset, 2.0 - offset};
}

SampleSet GenerateSynthetic(const SyntheticConfig& config) {
  if (config.n_samples < 4) {
    throw Error(ErrorKind::kInvalidArgument,
                "synthetic data needs n_samples >= 4");
  }
  if (!(config.separation >= 0.0) || !std::isfinite(config.separation)) {
    throw Error(ErrorKind::kInvalidArgument,
                "separation must be a finite value >= 0");
  }
  if (!std::isfinite(config.rotation)) {
    throw Error(ErrorKind::kInvalidArgument, "rotation must be finite");
  }
  const Gaussian2 positive{{2.0, 2.0}, {5.0, 1.0, 5.0}};
  const Gaussian2 negative{NegativeClassMean(config.separation),
                           {10.0, 1.0, 3.0}};
  const double c = std::cos(config.rotation);
  const double s = std::sin(config.rotation);

  Rng rng(config.seed);
  const auto n = static_cast<Eigen::Index>(config.n_samples);
  Matrix features(n, 2);
  std::vector<int> labels(config.n_samples);
  std::vector<GroupTag> groups(config.n_samples);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = rng.Bernoulli(0.5) ? 1 : -1;
    const auto x = (label == 1 ? positive : negative).Sample(rng);
    const double rx = c * x[0] - s * x[1];
    const double ry = s * x[0] + c * x[1];
    const double log_ratio =
        negative.LogDensity(rx, ry) - positive.LogDensity(rx, ry);
    const double p_privileged = 1.0 / (1.0 + std::exp(log_ratio));
    features(i, 0) = x[0];
    features(i, 1) = x[1];
    labels[static_cast<std::size_t>(i)] = label;
    groups[static_cast<std::size_t>(i)] = rng.Bernoulli(p_privileged)
                                              ? GroupTag::kPrivileged
                                              : GroupTag::kUnprivileged;
  }
  return SampleSet(std::move(features), std::move(labels), std::move(groups),
                   {"x1", "x2"});
}

// ---------------------------------------------------------------------------
// CSV

namespace {

using Record = std::vector<std::string>;

// RFC 4180: comma separated, optional double-quoted fields with "" escapes,
// CRLF or LF line breaks.
std::vector<Record> ParseRecords(const std::string& text,
                                 const std::string& source) {
  std::vector<Record> records;
  Record record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t pos = 0;
  if (text.starts_with("\xEF\xBB\xBF")) pos = 3;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) {
      records.push_back(std::move(record));
    }
    record.clear();
  };

  for (; pos < text.size(); ++pos) {
    const char ch = text[pos];
    if (in_quotes) {
      if (ch == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          ++pos;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw Error(ErrorKind::kParse, source + ":" + std::to_string(line) +
                                             ": stray quote inside field");
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
        end_record();
        ++line;
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(ch);
    }
  }
  if (in_quotes) {
    throw Error(ErrorKind::kParse,
                source + ": unterminated quoted field at end of file");
  }
  if (!field.empty() || !record.empty() || field_was_quoted) end_record();
  return records;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  return s;
}

std::optional<double> ParseNumber(std::string_view text) {
  text = Trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    return std::nullopt;
  return value;
}

}  // namespace

SampleSet ParseCsv(const std::string& text, const CsvSchema& schema,
                   const std::string& source_name) {
  const auto records = ParseRecords(text, source_name);
  if (records.empty()) {
    throw Error(ErrorKind::kParse,
                source_name + ": empty file (no header row)");
  }
  const Record& header = records.front();
  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < header.size(); ++c) {
    column_of.emplace(std::string(Trim(header[c])), c);
  }
  auto require = [&](const std::string& name, const char* role) {
    const auto it = column_of.find(name);
    if (it == column_of.end()) {
      throw Error(ErrorKind::kParse,
                  source_name + ": missing " + role + " column '" + name + "'");
    }
    return it->second;
  };
  const std::size_t label_col = require(schema.label_column, "label");
  const std::size_t group_col = require(schema.sensitive_column, "sensitive");
  if (label_col == group_col) {
    throw Error(ErrorKind::kInvalidArgument,
                "label and sensitive column must differ");
  }
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_col || c == group_col) continue;
    feature_cols.push_back(c);
    names.emplace_back(Trim(header[c]));
  }
  if (feature_cols.empty()) {
    throw Error(ErrorKind::kParse, source_name + ": no feature columns");
  }
  const std::size_t n = records.size() - 1;
  if (n == 0) {
    throw Error(ErrorKind::kParse, source_name + ": header but no data rows");
  }

  Matrix features(static_cast<Eigen::Index>(n),
                  static_cast<Eigen::Index>(feature_cols.size()));
  std::vector<int> labels(n);
  std::vector<GroupTag> groups(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Record& row = records[r + 1];
    const std::string where =
        source_name + ": data row " + std::to_string(r + 1);
    if (row.size() != header.size()) {
      throw Error(ErrorKind::kParse,
                  where + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(row.size()));
    }
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const auto value = ParseNumber(row[feature_cols[k]]);
      if (!value || !std::isfinite(*value)) {
        throw Error(ErrorKind::kParse, where + ", column '" + names[k] +
                                           "': non-numeric value '" +
                                           row[feature_cols[k]] + "'");
      }
      features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          *value;
    }
    const std::string_view label = Trim(row[label_col]);
    labels[r] = label == schema.favorable_value ? 1 : -1;
    const std::string_view group = Trim(row[group_col]);
    if (schema.none_value && group == *schema.none_value) {
      groups[r] = GroupTag::kNone;
    } else {
      groups[r] = group == schema.privileged_value ? GroupTag::kPrivileged
                                                   : GroupTag::kUnprivileged;
    }
  }
  return SampleSet(std::move(features), std::move(labels), std::move(groups),
                   std::move(names));
}

SampleSet LoadCsv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseCsv(buffer.str(), schema, path);
}

std::string FormatDouble(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

std::string QuoteIfNeeded(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char ch : field) {
    if (ch == '"') quoted.push_back('"');
    quoted.push_back(ch);
  }
  quoted.push_back('"');
  return quoted;
}

}  // namespace

std::string FormatCsv(const SampleSet& data) {
  std::string out;
  for (const auto& name : data.feature_names()) {
    out += QuoteIfNeeded(name);
    out += ',';
  }
  out += "label,group\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      out += FormatDouble(data.features()(static_cast<Eigen::Index>(i),
                                          static_cast<Eigen::Index>(j)));
      out += ',';
    }
    out += data.labels()[i] == 1 ? "1," : "-1,";
    out += GroupTagName(data.groups()[i]);
    out += '\n';
  }
  return out;
}

void SaveCsv(const SampleSet& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  out << FormatCsv(data);
  if (!out) throw Error(ErrorKind::kIo, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Splitting

std::array<std::size_t, 3> SplitSizes(std::size_t n,
                                      const SplitFractions& fractions) {
  const double parts[3] = {fractions.train, fractions.validation,
                           fractions.test};
  for (double f : parts) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "split fractions must be positive");
    }
  }
  if (std::abs(parts[0] + parts[1] + parts[2] - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "split fractions must sum to 1");
  }
  const double nd = static_cast<double>(n);
  const auto n_train = static_cast<std::size_t>(std::llround(nd * parts[0]));
  const auto n_val = static_cast<std::size_t>(std::llround(nd * parts[1]));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw Error(
        ErrorKind::kInvalidArgument,
        "split of " + std::to_string(n) + " samples would leave a part empty");
  }
  return {n_train, n_val, n - n_train - n_val};
}

DataSplit Split(const SampleSet& data, const SplitFractions& fractions,
                std::uint64_t seed) {
  const auto sizes = SplitSizes(data.size(), fractions);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.Shuffle(order);

  const auto first = order.begin();
  std::vector<std::size_t> train(first, first + sizes[0]);
  std::vector<std::size_t> val(first + sizes[0], first + sizes[0] + sizes[1]);
  std::vector<std::size_t> test(first + sizes[0] + sizes[1], order.end());
  DataSplit split{
      data.Subset(train), data.Subset(val), data.Subset(test), {}, {}, {}};
  split.train_indices = std::move(train);
  split.validation_indices = std::move(val);
  split.test_indices = std::move(test);
  return split;
}

GroupPartition PartitionByGroup(const SampleSet& data) {
  std::vector<std::size_t> unprivileged;
  std::vector<std::size_t> privileged;
  for (std::size_t i = 0; i < data.size(); ++i) {
    switch (data.groups()[i]) {
      case GroupTag::kUnprivileged:
        unprivileged.push_back(i);
        break;
      case GroupTag::kPrivileged:
        privileged.push_back(i);
        break;
      case GroupTag::kNone:
        throw Error(ErrorKind::kInvalidArgument,
                    "sample " + std::to_string(i) + " has no group tag");
    }
  }
  return {data.Subset(unprivileged), data.Subset(privileged)};
}

std::pair<Vector, Vector> FeatureRange(const SampleSet& data) {
  if (data.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "feature range of empty set");
  }
  return {data.features().colwise().minCoeff().transpose(),
          data.features().colwise().maxCoeff().transpose()};
}

}  // namespace fairpoison
