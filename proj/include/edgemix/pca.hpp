#pragma once

// Two-component PCA by power iteration with deflation.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/matrix.hpp"

namespace edgemix {

struct PcaResult {
  Matrix coordinates;             // n x 2
  std::array<double, 2> variance{};  // eigenvalues of the sample covariance, non-increasing
  Matrix components;              // 2 x d, orthonormal rows
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline bool normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  if (!(n > 1e-300)) return false;
  for (double& x : v) x /= n;
  return true;
}

inline std::vector<double> times(const Matrix& a, const std::vector<double>& v) {
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out[r] += a(r, c) * v[c];
  return out;
}

inline void remove_component(std::vector<double>& v, const std::vector<double>& along) {
  const double p = dot(v, along);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * along[i];
}

/// Sign convention: the entry of largest magnitude is positive.
inline void fix_sign(std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0.0)
    for (double& x : v) x = -x;
}

/// Dominant eigenvector of symmetric PSD `a`, kept orthogonal to `exclude`.
inline std::vector<double> power_iteration(const Matrix& a, const std::vector<std::vector<double>>& exclude,
                                           double tolerance, std::size_t max_iterations) {
  const std::size_t d = a.rows();
  // Start from the column of largest norm, which lies in the range of `a`;
  // fall back to basis vectors when everything left is null.
  std::vector<double> v(d, 0.0);
  double best = -1.0;
  for (std::size_t c = 0; c < d; ++c) {
    std::vector<double> col(d);
    for (std::size_t r = 0; r < d; ++r) col[r] = a(r, c);
    for (const auto& e : exclude) remove_component(col, e);
    const double n = dot(col, col);
    if (n > best) {
      best = n;
      v = col;
    }
  }
  for (std::size_t basis = 0; !normalize(v) && basis < d; ++basis) {
    v.assign(d, 0.0);
    v[basis] = 1.0;
    for (const auto& e : exclude) remove_component(v, e);
  }
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::vector<double> next = times(a, v);
    for (const auto& e : exclude) remove_component(next, e);
    if (!normalize(next)) break;  // remaining spectrum is zero
    if (dot(next, v) < 0.0)
      for (double& x : next) x = -x;
    double change = 0.0;
    for (std::size_t i = 0; i < d; ++i) change = std::max(change, std::abs(next[i] - v[i]));
    v = std::move(next);
    if (change < tolerance) break;
  }
  fix_sign(v);
  return v;
}

}  // namespace detail

/// Projects mean-centered rows of `x` onto the top two eigenvectors of the
/// sample covariance (divisor n - 1).
inline PcaResult pca_project(const Matrix& x, double tolerance = 1e-10,
                             std::size_t max_iterations = 100000) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 3) throw Error("pca_project: need at least 3 points");
  if (d < 2) throw Error("pca_project: need at least 2 dimensions");

  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) = x(r, c) - mean[c];

  Matrix cov(d, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov(i, j) += centered(r, i) * centered(r, j);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }
    trace += cov(i, i);
  }
  if (!(trace > 0.0)) throw Error("pca_project: data has rank 0");

  PcaResult out;
  out.components = Matrix(2, d);
  Matrix deflated = cov;
  std::vector<std::vector<double>> found;
  for (std::size_t k = 0; k < 2; ++k) {
    auto v = detail::power_iteration(deflated, found, tolerance, max_iterations);
    const auto cv = detail::times(cov, v);
    out.variance[k] = std::max(0.0, detail::dot(v, cv));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) deflated(i, j) -= out.variance[k] * v[i] * v[j];
    std::copy(v.begin(), v.end(), out.components.row_span(k).begin());
    found.push_back(std::move(v));
  }
  if (out.variance[1] > out.variance[0]) {
    std::swap(out.variance[0], out.variance[1]);
    Matrix swapped(2, d);
    std::copy(found[1].begin(), found[1].end(), swapped.row_span(0).begin());
    std::copy(found[0].begin(), found[0].end(), swapped.row_span(1).begin());
    out.components = std::move(swapped);
  }

  out.coordinates = Matrix(n, 2);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t c = 0; c < d; ++c)
        out.coordinates(r, k) += centered(r, c) * out.components(k, c);
  return out;
}

}  // namespace edgemix
