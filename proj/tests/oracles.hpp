#pragma once

// Brute-force oracles used by the loss and acceptance suites. These are
// deliberately independent of the tensor implementation: plain double loops
// over plain vectors, computing the published formulas term by term.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// SupCon by direct pairwise summation:
/// mean over anchors with positives of
///   -(1/|P(n)|) sum_{m in P(n)} log( exp(z_n.z_m/tau) / sum_{l != n} exp(z_n.z_l/tau) ).
inline double supcon(const Matrix& z, const std::vector<std::vector<uint8_t>>& mask, double tau) {
  const std::size_t m = z.size();
  double total = 0.0;
  std::size_t contributing = 0;
  for (std::size_t n = 0; n < m; ++n) {
    std::size_t pos = 0;
    for (std::size_t j = 0; j < m; ++j) pos += mask[n][j];
    if (pos == 0) continue;
    ++contributing;
    double denom = 0.0;
    for (std::size_t l = 0; l < m; ++l)
      if (l != n) denom += std::exp(dot(z[n], z[l]) / tau);
    double anchor = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (mask[n][j]) anchor += std::log(std::exp(dot(z[n], z[j]) / tau) / denom);
    total += -anchor / static_cast<double>(pos);
  }
  if (contributing == 0) throw std::invalid_argument("oracle::supcon: no positives");
  return total / static_cast<double>(contributing);
}

inline std::vector<std::vector<uint8_t>> mask_from_labels(const std::vector<int>& labels) {
  const std::size_t m = labels.size();
  std::vector<std::vector<uint8_t>> mask(m, std::vector<uint8_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) mask[i][j] = (i != j && labels[i] == labels[j]);
  return mask;
}

/// Level-weighted SupCon with weights 1/2^depth, depth 0 the coarsest.
inline double hmlc(const Matrix& z, const std::vector<int>& fine_labels,
                   const std::vector<std::vector<int>>& levels, double tau) {
  double total = 0.0, weight = 1.0;
  for (const auto& level : levels) {
    std::vector<int> labels;
    for (int f : fine_labels) labels.push_back(level[f]);
    total += weight * supcon(z, mask_from_labels(labels), tau);
    weight *= 0.5;
  }
  return total;
}

/// TSC: -log( exp(z.t_y/tau) / sum_c exp(z.t_c/tau) ), averaged over rows.
inline double tsc(const Matrix& z, const std::vector<int>& labels, const Matrix& targets,
                  double tau) {
  double total = 0.0;
  for (std::size_t n = 0; n < z.size(); ++n) {
    double denom = 0.0;
    for (const auto& t : targets) denom += std::exp(dot(z[n], t) / tau);
    total += -std::log(std::exp(dot(z[n], targets[labels[n]]) / tau) / denom);
  }
  return total / static_cast<double>(z.size());
}

inline double smooth_l1(double a, double b, double beta = 1.0) {
  const double d = std::abs(a - b);
  return d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
}

}  // namespace oracle
