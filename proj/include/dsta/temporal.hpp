#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "dsta/error.hpp"
#include "dsta/mat.hpp"
#include "dsta/numeric.hpp"

namespace dsta {

// One temporal attention head (per spatial component).
struct TemporalHeadParams {
  VecD w_t;       // D
  double b_t = 0.0;
};

enum class TemporalMode { attention, average, max };

// Eq.-literal normalization (t = e / sum e) kept selectable for study; it
// rejects nonpositive response sums. Softmax is the default.
enum class TemporalNorm { softmax, linear };

struct EmbeddingParams {
  Mat W_e;   // E x (K*D)
  VecD b_e;  // E

  std::size_t embed_dim() const { return W_e.rows; }
};

struct TemporalAttendResult {
  VecD weights;   // N, sums to 1
  VecD pooled;    // D (x_k)
};

// Weights over the N frames of one head's enhanced features (columns of
// xhat_k), then weighted averaging. `average` gives uniform weights;
// `max` selects the argmax-response frame.
inline TemporalAttendResult temporal_attend(const Mat& xhat_k, const TemporalHeadParams& head,
                                            TemporalMode mode = TemporalMode::attention,
                                            TemporalNorm norm = TemporalNorm::softmax,
                                            VecD* responses_out = nullptr) {
  const std::size_t d = xhat_k.rows;
  const std::size_t n = xhat_k.cols;
  if (n == 0) throw Error(Errc::invalid_input, "temporal_attend needs N >= 1");
  if (mode != TemporalMode::average && head.w_t.size() != d)
    throw Error(Errc::shape_mismatch, "temporal head dim");

  TemporalAttendResult out;
  out.weights.assign(n, 0.0);
  if (mode == TemporalMode::average) {
    out.weights.assign(n, 1.0 / static_cast<double>(n));
  } else {
    VecD e(n);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = head.b_t;
      for (std::size_t i = 0; i < d; ++i) acc += head.w_t[i] * xhat_k(i, j);
      e[j] = acc;
    }
    if (responses_out) *responses_out = e;
    if (mode == TemporalMode::max) {
      const std::size_t best = std::max_element(e.begin(), e.end()) - e.begin();
      out.weights[best] = 1.0;
    } else if (norm == TemporalNorm::softmax) {
      softmax_row_inplace(e.data(), n);
      out.weights = std::move(e);
    } else {
      double sum = 0.0;
      for (double v : e) sum += v;
      if (!(sum > 0.0))
        throw Error(Errc::numeric_failure, "linear temporal normalization needs positive sum");
      for (std::size_t j = 0; j < n; ++j) out.weights[j] = e[j] / sum;
    }
  }

  out.pooled.assign(d, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = out.weights[j];
    if (t == 0.0) continue;
    for (std::size_t i = 0; i < d; ++i) out.pooled[i] += t * xhat_k(i, j);
  }
  return out;
}

// Final video representation: per-head pooled features in head order,
// their concatenation, and the L2-normalized embedding.
struct VideoDescriptor {
  std::vector<VecD> per_head;  // K vectors of dimension D
  VecD concat;                 // K*D
  VecD embedding;              // E, unit norm
  Mat temporal_weights;        // N x K
};

inline VideoDescriptor assemble_descriptor(std::vector<VecD> per_head,
                                           const EmbeddingParams& emb) {
  if (per_head.empty()) throw Error(Errc::invalid_input, "assemble_descriptor needs K >= 1");
  VideoDescriptor d;
  d.concat.reserve(per_head.size() * per_head.front().size());
  for (const VecD& x : per_head) d.concat.insert(d.concat.end(), x.begin(), x.end());
  if (emb.W_e.cols != d.concat.size() || emb.b_e.size() != emb.W_e.rows)
    throw Error(Errc::shape_mismatch, "embedding dims");
  VecD z = matvec(emb.W_e, d.concat);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += emb.b_e[i];
  d.embedding = l2_normalize(z);
  d.per_head = std::move(per_head);
  return d;
}

}  // namespace dsta
