#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>

#include "dsta/error.hpp"
#include "dsta/mat.hpp"
#include "dsta/numeric.hpp"

namespace dsta {

// Temporal feature-enhancement block. Pools each head's gated features
// across frames by appearance similarity (Gram matrix) plus a learned
// positional term, then applies a residual affine map.
struct EnhancementParams {
  Mat W_pos;    // N x N, elementwise factor on the exp(-|i-j|/sigma) decay
  VecD b_pos;   // N, bias on the contributor (column) axis
  double sigma = 2.0;  // fixed decay scale, not learned
  Mat fcn_W;    // D x D
  VecD fcn_b;   // D

  std::size_t frame_count() const { return W_pos.rows; }
  std::size_t feature_dim() const { return fcn_W.rows; }
};

// Phi_k = X_k^T X_k: pairwise inner products of one head's gated features.
inline Mat feature_similarity(const Mat& x_k) { return matmul_tn(x_k, x_k); }

// Decay matrix exp(-|i-j|/sigma); cached by callers that also need it in
// the backward pass.
inline Mat temporal_decay(std::size_t n, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::invalid_parameter, "sigma must be positive");
  Mat e(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      e(i, j) = std::exp(-static_cast<double>(i > j ? i - j : j - i) / sigma);
  return e;
}

// Psi[i][j] = W_pos[i][j] * exp(-|i-j|/sigma) + b_pos[j].
inline Mat temporal_similarity(const EnhancementParams& params, std::size_t n) {
  require_shape(params.W_pos, n, n, "temporal_similarity W_pos");
  if (params.b_pos.size() != n) throw Error(Errc::shape_mismatch, "temporal_similarity b_pos");
  Mat psi = temporal_decay(n, params.sigma);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) psi(i, j) = params.W_pos(i, j) * psi(i, j) + params.b_pos[j];
  return psi;
}

// C_k = row-wise softmax of (Phi_k + Psi); row i holds the contribution
// probabilities of every frame to frame i.
inline Mat contribution(const Mat& phi, const Mat& psi) {
  if (!phi.same_shape(psi)) throw Error(Errc::shape_mismatch, "contribution inputs");
  if (phi.rows != phi.cols) throw Error(Errc::shape_mismatch, "contribution needs square input");
  Mat c(phi.rows, phi.cols);
  for (std::size_t i = 0; i < phi.rows; ++i) {
    for (std::size_t j = 0; j < phi.cols; ++j) c(i, j) = phi(i, j) + psi(i, j);
    softmax_row_inplace(c.row(i), c.cols);
  }
  return c;
}

// Xhat_k = fcn_W (X_k C_k) + fcn_b 1^T + X_k.
inline Mat enhance(const Mat& x_k, const Mat& c_k, const EnhancementParams& params) {
  if (c_k.rows != x_k.cols || c_k.cols != x_k.cols)
    throw Error(Errc::shape_mismatch, "enhance contribution dims");
  require_shape(params.fcn_W, x_k.rows, x_k.rows, "enhance fcn_W");
  if (params.fcn_b.size() != x_k.rows) throw Error(Errc::shape_mismatch, "enhance fcn_b");
  const Mat pooled = matmul(x_k, c_k);
  Mat out = matmul(params.fcn_W, pooled);
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += params.fcn_b[i] + x_k(i, j);
  return out;
}

}  // namespace dsta
