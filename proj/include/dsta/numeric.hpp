#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "dsta/error.hpp"
#include "dsta/mat.hpp"

namespace dsta {

// l2_normalize refuses vectors with norm at or below this threshold.
inline constexpr double kNormEpsilon = 1e-12;

// Max-subtracted softmax over a contiguous row; preserves argmax and is
// overflow-safe for any finite input.
inline void softmax_row_inplace(double* v, std::size_t n) {
  if (n == 0) throw Error(Errc::invalid_input, "softmax of empty vector");
  double mx = v[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(v[i])) throw Error(Errc::invalid_input, "softmax of non-finite value");
    mx = std::max(mx, v[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - mx);
    sum += v[i];
  }
  for (std::size_t i = 0; i < n; ++i) v[i] /= sum;
}

inline VecD softmax_row(VecD v) {
  softmax_row_inplace(v.data(), v.size());
  return v;
}

// Backward of y = softmax(e) given dL/dy: dL/de = y * (dy - <y, dy>).
inline void softmax_backward_row(const double* y, const double* dy, double* de, std::size_t n) {
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += y[i] * dy[i];
  for (std::size_t i = 0; i < n; ++i) de[i] = y[i] * (dy[i] - dot);
}

inline VecD relu(VecD v) {
  for (double& x : v) x = std::max(x, 0.0);
  return v;
}

inline double dot(const VecD& a, const VecD& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(const VecD& v) { return std::sqrt(dot(v, v)); }

inline VecD l2_normalize(const VecD& v) {
  const double n = norm2(v);
  if (!(n > kNormEpsilon)) throw Error(Errc::degenerate_vector, "l2_normalize of near-zero vector");
  VecD out(v);
  for (double& x : out) x /= n;
  return out;
}

// Backward of y = z / |z| given dL/dy: dL/dz = (dy - y <y, dy>) / |z|.
inline VecD l2_normalize_backward(const VecD& y, const VecD& dy, double z_norm) {
  const double d = dot(y, dy);
  VecD dz(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dz[i] = (dy[i] - y[i] * d) / z_norm;
  return dz;
}

}  // namespace dsta
