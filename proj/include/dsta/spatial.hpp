#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dsta/error.hpp"
#include "dsta/mat.hpp"
#include "dsta/numeric.hpp"

namespace dsta {

// Per-frame grid of backbone features: L = grid_h * grid_w cells, one
// D-dimensional feature vector per cell (row l of `cells`).
struct FrameFeatureGrid {
  Mat cells;  // L x D
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  FrameFeatureGrid() = default;
  FrameFeatureGrid(std::size_t h, std::size_t w, std::size_t dim)
      : cells(h * w, dim), grid_h(h), grid_w(w) {}

  std::size_t cell_count() const { return cells.rows; }
  std::size_t feature_dim() const { return cells.cols; }
};

// One spatial attention head: response e = w_out' * relu(W_s f + b_s) + b_out.
struct SpatialHeadParams {
  Mat W_s;       // d x D
  VecD b_s;      // d
  VecD w_out;    // d
  double b_out = 0.0;

  std::size_t hidden_dim() const { return W_s.rows; }
  std::size_t input_dim() const { return W_s.cols; }
};

// K receptive fields for one frame; each row is a pmf over the L cells.
struct ReceptiveFieldSet {
  Mat S;  // K x L

  std::size_t head_count() const { return S.rows; }
  std::size_t cell_count() const { return S.cols; }
};

// Responses e_l = w_out' relu(W_s f_l + b_s) + b_out for every cell. When
// `hidden_out` is given it receives the L x d relu activations (the
// backward pass reuses them).
inline VecD spatial_response(const FrameFeatureGrid& grid, const SpatialHeadParams& head,
                             Mat* hidden_out = nullptr) {
  const std::size_t L = grid.cell_count();
  if (head.input_dim() != grid.feature_dim() || head.b_s.size() != head.hidden_dim() ||
      head.w_out.size() != head.hidden_dim())
    throw Error(Errc::shape_mismatch, "spatial head dims do not match grid");
  if (hidden_out) *hidden_out = Mat(L, head.hidden_dim());
  VecD e(L);
  VecD h(head.hidden_dim());
  for (std::size_t l = 0; l < L; ++l) {
    const double* f = grid.cells.row(l);
    for (std::size_t i = 0; i < head.hidden_dim(); ++i) {
      const double* w = head.W_s.row(i);
      double acc = head.b_s[i];
      for (std::size_t j = 0; j < grid.feature_dim(); ++j) acc += w[j] * f[j];
      h[i] = std::max(acc, 0.0);
    }
    if (hidden_out) std::copy(h.begin(), h.end(), hidden_out->row(l));
    e[l] = dot(head.w_out, h) + head.b_out;
  }
  return e;
}

struct SpatialAttendResult {
  ReceptiveFieldSet fields;       // K x L
  std::vector<VecD> gated;        // K vectors of dimension D (x_{n,k})
};

// Row k of S = softmax of head k's responses; x_k = sum_l s_{k,l} f_l.
inline SpatialAttendResult spatial_attend(const FrameFeatureGrid& grid,
                                          const std::vector<SpatialHeadParams>& heads,
                                          std::vector<Mat>* hidden_out = nullptr) {
  if (heads.empty()) throw Error(Errc::invalid_input, "spatial_attend needs K >= 1 heads");
  const std::size_t L = grid.cell_count();
  const std::size_t D = grid.feature_dim();
  SpatialAttendResult out;
  out.fields.S = Mat(heads.size(), L);
  out.gated.resize(heads.size());
  if (hidden_out) hidden_out->resize(heads.size());
  for (std::size_t k = 0; k < heads.size(); ++k) {
    VecD e = spatial_response(grid, heads[k], hidden_out ? &(*hidden_out)[k] : nullptr);
    softmax_row_inplace(e.data(), e.size());
    VecD x(D, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      out.fields.S(k, l) = e[l];
      const double s = e[l];
      const double* f = grid.cells.row(l);
      for (std::size_t j = 0; j < D; ++j) x[j] += s * f[j];
    }
    out.gated[k] = std::move(x);
  }
  return out;
}

inline void require_pmf_entries(const double* s, std::size_t n, const char* what) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(s[i] >= 0.0)) throw Error(Errc::invalid_pmf, what);
    sum += s[i];
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(Errc::invalid_pmf, what);
}

// Bhattacharyya coefficient: sum_l sqrt(p_l q_l), the overlap of two pmfs.
inline double bhattacharyya(const VecD& p, const VecD& q) {
  if (p.size() != q.size()) throw Error(Errc::shape_mismatch, "bhattacharyya size");
  require_pmf_entries(p.data(), p.size(), "bhattacharyya pmf");
  require_pmf_entries(q.data(), q.size(), "bhattacharyya pmf");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::sqrt(p[i] * q[i]);
  return acc;
}

// Hellinger distance (1/sqrt(2)) |sqrt(p) - sqrt(q)|_2, in [0, 1].
inline double hellinger(const VecD& p, const VecD& q) {
  if (p.size() != q.size()) throw Error(Errc::shape_mismatch, "hellinger size");
  require_pmf_entries(p.data(), p.size(), "hellinger pmf");
  require_pmf_entries(q.data(), q.size(), "hellinger pmf");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    acc += d * d;
  }
  return std::sqrt(acc * 0.5);
}

namespace detail {
inline Mat sqrt_rows_checked(const Mat& s, const char* what) {
  Mat r(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    require_pmf_entries(s.row(i), s.cols, what);
    for (std::size_t j = 0; j < s.cols; ++j) r(i, j) = std::sqrt(s(i, j));
  }
  return r;
}
}  // namespace detail

// Q = |R R^T - I|_F^2 with R = elementwise sqrt(S). Rows of S sum to 1, so
// the diagonal of R R^T is 1 and Q measures pairwise receptive-field overlap.
inline double diversity_q(const ReceptiveFieldSet& fields) {
  const Mat r = detail::sqrt_rows_checked(fields.S, "diversity_q pmf row");
  Mat g = matmul_nt(r, r);
  for (std::size_t i = 0; i < g.rows; ++i) g(i, i) -= 1.0;
  return frobenius_sq(g);
}

// Q' = |S S^T - I|_F^2, the text-embedding variant; also pushes each row
// toward single-cell concentration.
inline double diversity_qprime(const ReceptiveFieldSet& fields) {
  for (std::size_t i = 0; i < fields.S.rows; ++i)
    require_pmf_entries(fields.S.row(i), fields.S.cols, "diversity_qprime pmf row");
  Mat g = matmul_nt(fields.S, fields.S);
  for (std::size_t i = 0; i < g.rows; ++i) g(i, i) -= 1.0;
  return frobenius_sq(g);
}

// dQ/dS for Q = |R R^T - I|_F^2: 2 (G R)_{kl} / R_{kl} with G = R R^T - I.
// Subgradient 0 where S underflowed to exactly 0.
inline Mat diversity_q_backward(const Mat& s) {
  Mat r(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) r(i, j) = std::sqrt(s(i, j));
  Mat g = matmul_nt(r, r);
  for (std::size_t i = 0; i < g.rows; ++i) g(i, i) -= 1.0;
  const Mat gr = matmul(g, r);
  Mat ds(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j)
      ds(i, j) = r(i, j) > 0.0 ? 2.0 * gr(i, j) / r(i, j) : 0.0;
  return ds;
}

// dQ'/dS = 4 (S S^T - I) S.
inline Mat diversity_qprime_backward(const Mat& s) {
  Mat g = matmul_nt(s, s);
  for (std::size_t i = 0; i < g.rows; ++i) g(i, i) -= 1.0;
  Mat ds = matmul(g, s);
  for (double& v : ds.data) v *= 4.0;
  return ds;
}

// Mean Bhattacharyya coefficient over head pairs i < j; 0 when K < 2.
inline double mean_pairwise_bhattacharyya(const ReceptiveFieldSet& fields) {
  const std::size_t k = fields.head_count();
  if (k < 2) return 0.0;
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double bc = 0.0;
      for (std::size_t l = 0; l < fields.cell_count(); ++l)
        bc += std::sqrt(fields.S(i, l) * fields.S(j, l));
      acc += bc;
      ++pairs;
    }
  }
  return acc / static_cast<double>(pairs);
}

}  // namespace dsta
