#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "dsta/error.hpp"

namespace dsta {

using VecD = std::vector<double>;

// Dense row-major matrix of 64-bit floats. All pipeline math runs in
// double precision; gradient checking demands it.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  VecD data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Mat(std::size_t r, std::size_t c, std::initializer_list<double> values)
      : rows(r), cols(c), data(values) {
    if (data.size() != r * c) throw Error(Errc::shape_mismatch, "initializer size != rows*cols");
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline void require_shape(const Mat& m, std::size_t r, std::size_t c, const char* what) {
  if (m.rows != r || m.cols != c) throw Error(Errc::shape_mismatch, what);
}

// C = A * B, naive triple loop.
inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw Error(Errc::shape_mismatch, "matmul inner dims");
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      double* crow = c.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A^T * B.
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) throw Error(Errc::shape_mismatch, "matmul_tn inner dims");
  Mat c(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

// C = A * B^T.
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols != b.cols) throw Error(Errc::shape_mismatch, "matmul_nt inner dims");
  Mat c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

// y = A * x.
inline VecD matvec(const Mat& a, const VecD& x) {
  if (a.cols != x.size()) throw Error(Errc::shape_mismatch, "matvec dims");
  VecD y(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) acc += arow[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// y = A^T * x.
inline VecD matvec_t(const Mat& a, const VecD& x) {
  if (a.rows != x.size()) throw Error(Errc::shape_mismatch, "matvec_t dims");
  VecD y(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* arow = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) y[j] += xi * arow[j];
  }
  return y;
}

inline double frobenius_sq(const Mat& a) {
  double acc = 0.0;
  for (double v : a.data) acc += v * v;
  return acc;
}

}  // namespace dsta
