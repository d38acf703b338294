#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fairpoison/dataset.hpp"
#include "fairpoison/random.hpp"

namespace fairpoison::testing {

inline SampleSet MakeSet(const std::vector<std::vector<double>>& rows,
                         const std::vector<int>& labels,
                         const std::vector<GroupTag>& groups) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  Matrix x(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rows[i][j];
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
  return SampleSet(std::move(x), labels, groups, std::move(names));
}

/// Gaussian blobs in d dimensions, groups alternating.
inline SampleSet RandomSet(std::size_t n, std::size_t d, std::uint64_t seed,
                           double shift = 1.0) {
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<int> y(n);
  std::vector<GroupTag> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.Bernoulli(0.5) ? 1 : -1;
    g[i] = rng.Bernoulli(0.5) ? GroupTag::kPrivileged : GroupTag::kUnprivileged;
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.Normal() + shift * y[i];
  }
  // Guarantee both classes and both groups.
  y[0] = 1;
  y[1] = -1;
  g[0] = GroupTag::kPrivileged;
  g[1] = GroupTag::kUnprivileged;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
  return SampleSet(std::move(x), std::move(y), std::move(g), std::move(names));
}

inline double RelativeError(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace fairpoison::testing
