#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dsta/enhancement.hpp"
#include "dsta/error.hpp"
#include "dsta/model.hpp"
#include "dsta/oim.hpp"
#include "dsta/rng.hpp"
#include "dsta/sampling.hpp"
#include "dsta/spatial.hpp"
#include "dsta/temporal.hpp"

namespace dsta {

namespace detail {
inline std::uint64_t fnv1a_doubles(std::uint64_t h, const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    __builtin_memcpy(&bits, &v[i], sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}
}  // namespace detail

inline std::uint64_t param_fingerprint(const ModelParams& params, const OimState& state) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const ParamRef& r : param_refs(params)) h = detail::fnv1a_doubles(h, r.data, r.size);
  h = detail::fnv1a_doubles(h, state.table.data.data(), state.table.size());
  return h;
}

// Everything the backward pass needs, captured during forward. The cache
// snapshots the parameter fingerprint; mutating params or table between
// forward and backward is detected as a contract violation.
struct ForwardCache {
  bool filled = false;
  const ModelParams* params = nullptr;
  const OimState* state = nullptr;
  Hyperparams cfg;
  std::uint64_t fingerprint = 0;
  std::size_t label = 0;

  std::vector<FrameFeatureGrid> grids;     // N frames
  std::vector<Mat> fields;                 // N entries, K x L (S_n)
  std::vector<std::vector<Mat>> hidden;    // [n][k]: L x d relu activations
  std::vector<Mat> gated;                  // K entries, D x N (X_k)
  Mat decay;                               // N x N, exp(-|i-j|/sigma)
  std::vector<Mat> contrib;                // K entries, N x N (C_k)
  std::vector<Mat> pooled;                 // K entries, D x N (X_k C_k)
  std::vector<Mat> enhanced;               // K entries, D x N (Xhat_k)
  Mat temporal_responses;                  // N x K (raw, attention/max only)
  Mat temporal_weights;                    // N x K
  std::vector<VecD> head_features;         // K entries of D (x_k)
  VecD concat;                             // K*D
  VecD embedding;                          // E, unit norm
  double pre_norm_len = 0.0;               // |W_e concat + b_e|
  VecD probabilities;                      // C
};

struct ForwardResult {
  LossReport report;
  ForwardCache cache;
};

inline double frame_penalty(const Mat& s, PenaltyKind kind) {
  if (kind == PenaltyKind::none) return 0.0;
  ReceptiveFieldSet fields{s};
  return kind == PenaltyKind::q ? diversity_q(fields) : diversity_qprime(fields);
}

// Spatial attention, enhancement, temporal attention and embedding for one
// video; fills every descriptor-stage field of the cache.
inline void run_descriptor_stages(const VideoSample& sample, const ModelParams& params,
                                  const Hyperparams& cfg, ForwardCache& c) {
  const std::size_t n = cfg.chunks;
  const std::size_t k_heads = cfg.heads;
  const std::size_t d_feat = cfg.feature_dim;
  if (sample.grids.size() != n) throw Error(Errc::shape_mismatch, "sample frame count != N");
  if (params.spatial.size() != k_heads || params.temporal.size() != k_heads)
    throw Error(Errc::shape_mismatch, "head count mismatch");

  c.cfg = cfg;
  c.params = &params;
  c.grids = sample.grids;

  // Spatial attention per frame.
  c.fields.resize(n);
  c.hidden.resize(n);
  c.gated.assign(k_heads, Mat(d_feat, n));
  for (std::size_t fi = 0; fi < n; ++fi) {
    const FrameFeatureGrid& grid = sample.grids[fi];
    if (grid.feature_dim() != d_feat || grid.cell_count() != cfg.cell_count())
      throw Error(Errc::shape_mismatch, "grid dims do not match config");
    if (cfg.spatial_mode == SpatialMode::uniform) {
      const std::size_t l_cells = grid.cell_count();
      Mat s(k_heads, l_cells, 1.0 / static_cast<double>(l_cells));
      for (std::size_t k = 0; k < k_heads; ++k) {
        for (std::size_t j = 0; j < d_feat; ++j) {
          double acc = 0.0;
          for (std::size_t l = 0; l < l_cells; ++l) acc += grid.cells(l, j);
          c.gated[k](j, fi) = acc / static_cast<double>(l_cells);
        }
      }
      c.fields[fi] = std::move(s);
    } else {
      SpatialAttendResult sa = spatial_attend(grid, params.spatial, &c.hidden[fi]);
      c.fields[fi] = std::move(sa.fields.S);
      for (std::size_t k = 0; k < k_heads; ++k)
        for (std::size_t j = 0; j < d_feat; ++j) c.gated[k](j, fi) = sa.gated[k][j];
    }
  }

  // Feature enhancement per head.
  if (cfg.enhancement) {
    c.decay = temporal_decay(n, params.enhancement.sigma);
    const Mat psi = temporal_similarity(params.enhancement, n);
    c.contrib.resize(k_heads);
    c.pooled.resize(k_heads);
    c.enhanced.resize(k_heads);
    for (std::size_t k = 0; k < k_heads; ++k) {
      const Mat phi = feature_similarity(c.gated[k]);
      c.contrib[k] = contribution(phi, psi);
      c.pooled[k] = matmul(c.gated[k], c.contrib[k]);
      c.enhanced[k] = enhance(c.gated[k], c.contrib[k], params.enhancement);
    }
  } else {
    c.enhanced = c.gated;
  }

  // Temporal attention per head, then concatenation and embedding.
  c.temporal_responses = Mat(n, k_heads);
  c.temporal_weights = Mat(n, k_heads);
  c.head_features.resize(k_heads);
  for (std::size_t k = 0; k < k_heads; ++k) {
    VecD responses;
    TemporalAttendResult ta = temporal_attend(c.enhanced[k], params.temporal[k],
                                              cfg.temporal_mode, cfg.temporal_norm, &responses);
    for (std::size_t fi = 0; fi < n; ++fi) {
      c.temporal_weights(fi, k) = ta.weights[fi];
      c.temporal_responses(fi, k) = responses.empty() ? 0.0 : responses[fi];
    }
    c.head_features[k] = std::move(ta.pooled);
  }
  VideoDescriptor desc = assemble_descriptor(c.head_features, params.embedding);
  c.concat = std::move(desc.concat);
  c.embedding = std::move(desc.embedding);
  {
    VecD z = matvec(params.embedding.W_e, c.concat);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += params.embedding.b_e[i];
    c.pre_norm_len = norm2(z);
  }
}

// Descriptor output for evaluation and visualization (no loss stage).
struct DescribeResult {
  VecD embedding;              // E, unit norm
  Mat temporal_weights;        // N x K
  std::vector<Mat> fields;     // N entries, K x L receptive fields
};

inline DescribeResult describe(const VideoSample& sample, const ModelParams& params,
                               const Hyperparams& cfg) {
  ForwardCache c;
  run_descriptor_stages(sample, params, cfg, c);
  return {std::move(c.embedding), std::move(c.temporal_weights), std::move(c.fields)};
}

// Full pipeline for one video: descriptor stages, then OIM (or plain
// softmax) loss plus the diversity penalty summed over frames.
inline ForwardResult forward(const VideoSample& sample, const ModelParams& params,
                             const OimState& state, std::size_t label, const Hyperparams& cfg) {
  ForwardResult out;
  ForwardCache& c = out.cache;
  run_descriptor_stages(sample, params, cfg, c);
  c.state = &state;
  c.label = label;

  OimForwardResult of = oim_forward(c.embedding, label, state);
  c.probabilities = of.probabilities;
  double penalty = 0.0;
  for (std::size_t fi = 0; fi < cfg.chunks; ++fi)
    penalty += frame_penalty(c.fields[fi], cfg.penalty);

  out.report.oim_loss = of.loss;
  out.report.diversity_penalty = penalty;
  out.report.total = of.loss + cfg.lambda_div * penalty;
  out.report.probabilities = of.probabilities;
  c.fingerprint = param_fingerprint(params, state);
  c.filled = true;
  return out;
}

// Analytic gradients of the total loss for one video. Exact for every
// parameter array; ReLU and sqrt(S) use subgradient 0 at 0.
inline GradientBundle backward(const ForwardCache& c) {
  if (!c.filled || c.params == nullptr || c.state == nullptr)
    throw Error(Errc::contract_violation, "backward needs a cache produced by forward");
  if (param_fingerprint(*c.params, *c.state) != c.fingerprint)
    throw Error(Errc::contract_violation, "parameters changed since forward");

  const ModelParams& params = *c.params;
  const OimState& state = *c.state;
  const Hyperparams& cfg = c.cfg;
  const std::size_t n = cfg.chunks;
  const std::size_t k_heads = cfg.heads;
  const std::size_t d_feat = cfg.feature_dim;

  GradientBundle g;
  g.params = zeros_like(params);
  if (cfg.loss == LossKind::softmax) g.table = Mat(state.identity_count(), state.embed_dim());

  // Loss -> embedding.
  VecD dlogits(c.probabilities);
  dlogits[c.label] -= 1.0;
  VecD demb = matvec_t(state.table, dlogits);
  for (double& v : demb) v /= state.temperature;
  if (cfg.loss == LossKind::softmax) {
    for (std::size_t i = 0; i < state.identity_count(); ++i)
      for (std::size_t j = 0; j < state.embed_dim(); ++j)
        g.table(i, j) = dlogits[i] * c.embedding[j] / state.temperature;
  }

  // Embedding -> concatenated feature.
  const VecD dz = l2_normalize_backward(c.embedding, demb, c.pre_norm_len);
  for (std::size_t i = 0; i < dz.size(); ++i) {
    double* wrow = g.params.embedding.W_e.row(i);
    for (std::size_t j = 0; j < c.concat.size(); ++j) wrow[j] += dz[i] * c.concat[j];
    g.params.embedding.b_e[i] += dz[i];
  }
  const VecD dconcat = matvec_t(params.embedding.W_e, dz);

  // Temporal attention per head.
  std::vector<Mat> denhanced(k_heads, Mat(d_feat, n));
  for (std::size_t k = 0; k < k_heads; ++k) {
    const Mat& xhat = c.enhanced[k];
    const double* dxk = dconcat.data() + k * d_feat;
    Mat& dxhat = denhanced[k];
    if (cfg.temporal_mode == TemporalMode::average) {
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < d_feat; ++i) dxhat(i, j) += dxk[i] * inv_n;
      continue;
    }
    if (cfg.temporal_mode == TemporalMode::max) {
      // One-hot weights are constant w.r.t. the responses.
      for (std::size_t j = 0; j < n; ++j) {
        const double t = c.temporal_weights(j, k);
        if (t == 0.0) continue;
        for (std::size_t i = 0; i < d_feat; ++i) dxhat(i, j) += t * dxk[i];
      }
      continue;
    }
    VecD t(n), dt(n);
    for (std::size_t j = 0; j < n; ++j) {
      t[j] = c.temporal_weights(j, k);
      double acc = 0.0;
      for (std::size_t i = 0; i < d_feat; ++i) acc += dxk[i] * xhat(i, j);
      dt[j] = acc;
      for (std::size_t i = 0; i < d_feat; ++i) dxhat(i, j) += t[j] * dxk[i];
    }
    VecD de(n);
    if (cfg.temporal_norm == TemporalNorm::softmax) {
      softmax_backward_row(t.data(), dt.data(), de.data(), n);
    } else {
      double resp_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) resp_sum += c.temporal_responses(j, k);
      double mix = 0.0;
      for (std::size_t j = 0; j < n; ++j) mix += dt[j] * t[j];
      for (std::size_t j = 0; j < n; ++j) de[j] = (dt[j] - mix) / resp_sum;
    }
    auto& ghead = g.params.temporal[k];
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < d_feat; ++i) {
        ghead.w_t[i] += de[j] * xhat(i, j);
        dxhat(i, j) += de[j] * params.temporal[k].w_t[i];
      }
      ghead.b_t += de[j];
    }
  }

  // Enhancement per head (residual chain), or pass-through.
  std::vector<Mat> dgated(k_heads);
  if (cfg.enhancement) {
    Mat da_sum(n, n);  // accumulates dPsi over heads
    for (std::size_t k = 0; k < k_heads; ++k) {
      const Mat& dxhat = denhanced[k];
      const Mat& x = c.gated[k];
      // Xhat = fcn_W * M + fcn_b 1^T + X
      for (std::size_t i = 0; i < d_feat; ++i) {
        const double* dxrow = dxhat.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += dxrow[j];
        g.params.enhancement.fcn_b[i] += acc;
      }
      const Mat dfcn_w = matmul_nt(dxhat, c.pooled[k]);
      for (std::size_t i = 0; i < dfcn_w.size(); ++i)
        g.params.enhancement.fcn_W.data[i] += dfcn_w.data[i];
      const Mat dm = matmul_tn(params.enhancement.fcn_W, dxhat);
      Mat dx = dxhat;  // residual path
      // M = X C
      const Mat dx_from_m = matmul_nt(dm, c.contrib[k]);
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dx_from_m.data[i];
      const Mat dc = matmul_tn(x, dm);
      // C = rowsoftmax(Phi + Psi)
      Mat da(n, n);
      for (std::size_t i = 0; i < n; ++i)
        softmax_backward_row(c.contrib[k].row(i), dc.row(i), da.row(i), n);
      for (std::size_t i = 0; i < da.size(); ++i) da_sum.data[i] += da.data[i];
      // Phi = X^T X
      Mat sym = da;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sym(i, j) = da(i, j) + da(j, i);
      const Mat dx_from_phi = matmul(x, sym);
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dx_from_phi.data[i];
      dgated[k] = std::move(dx);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        g.params.enhancement.W_pos(i, j) += da_sum(i, j) * c.decay(i, j);
        g.params.enhancement.b_pos[j] += da_sum(i, j);
      }
    }
  } else {
    dgated = denhanced;
  }

  // Spatial attention per frame.
  if (cfg.spatial_mode == SpatialMode::attention) {
    const std::size_t l_cells = cfg.cell_count();
    for (std::size_t fi = 0; fi < n; ++fi) {
      const Mat& s = c.fields[fi];
      const FrameFeatureGrid& grid = c.grids[fi];
      Mat ds(k_heads, l_cells);
      for (std::size_t k = 0; k < k_heads; ++k) {
        const Mat& dxk = dgated[k];
        for (std::size_t l = 0; l < l_cells; ++l) {
          const double* f = grid.cells.row(l);
          double acc = 0.0;
          for (std::size_t j = 0; j < d_feat; ++j) acc += dxk(j, fi) * f[j];
          ds(k, l) = acc;
        }
      }
      if (cfg.penalty != PenaltyKind::none && cfg.lambda_div != 0.0) {
        const Mat dq = cfg.penalty == PenaltyKind::q ? diversity_q_backward(s)
                                                     : diversity_qprime_backward(s);
        for (std::size_t i = 0; i < ds.size(); ++i) ds.data[i] += cfg.lambda_div * dq.data[i];
      }
      for (std::size_t k = 0; k < k_heads; ++k) {
        VecD de(l_cells);
        softmax_backward_row(s.row(k), ds.row(k), de.data(), l_cells);
        auto& ghead = g.params.spatial[k];
        const Mat& h = c.hidden[fi][k];
        for (std::size_t l = 0; l < l_cells; ++l) {
          if (de[l] == 0.0) continue;
          const double* hrow = h.row(l);
          const double* f = grid.cells.row(l);
          for (std::size_t i = 0; i < cfg.hidden_dim; ++i) {
            ghead.w_out[i] += de[l] * hrow[i];
            if (hrow[i] > 0.0) {
              const double dpre = de[l] * params.spatial[k].w_out[i];
              double* wrow = ghead.W_s.row(i);
              for (std::size_t j = 0; j < d_feat; ++j) wrow[j] += dpre * f[j];
              ghead.b_s[i] += dpre;
            }
          }
          ghead.b_out += de[l];
        }
      }
    }
  }
  return g;
}

// Batch objective: mean over items of (oim_loss + lambda * sum_frames Q).
inline LossReport total_loss(const std::vector<VideoSample>& batch,
                             const std::vector<std::size_t>& labels, const ModelParams& params,
                             const OimState& state, const Hyperparams& cfg) {
  if (batch.empty() || batch.size() != labels.size())
    throw Error(Errc::invalid_input, "total_loss needs a nonempty batch with labels");
  LossReport r;
  r.probabilities.assign(state.identity_count(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ForwardResult fr = forward(batch[i], params, state, labels[i], cfg);
    r.oim_loss += fr.report.oim_loss;
    r.diversity_penalty += fr.report.diversity_penalty;
    r.total += fr.report.total;
    for (std::size_t j = 0; j < r.probabilities.size(); ++j)
      r.probabilities[j] += fr.report.probabilities[j];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  r.oim_loss *= inv;
  r.diversity_penalty *= inv;
  r.total *= inv;
  for (double& p : r.probabilities) p *= inv;
  return r;
}

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double worst = 0.0;
};

// Central finite differences against the analytic backward pass on a
// subsample of coordinates per parameter group. Relative error uses
// max(|analytic|, |numeric|, 1e-8) as denominator.
inline GradCheckReport grad_check(ModelParams& params, const OimState& state,
                                  const VideoSample& sample, std::size_t label,
                                  const Hyperparams& cfg, double eps, Rng& rng,
                                  std::size_t coords_per_group = 200) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw Error(Errc::invalid_parameter, "grad_check eps must lie in [1e-7, 1e-3]");

  ForwardResult fr = forward(sample, params, state, label, cfg);
  GradientBundle analytic = backward(fr.cache);

  std::vector<ParamRef> prefs = param_refs(params);
  std::vector<ParamRef> grefs = param_refs(analytic.params);
  OimState mutable_state = state;  // perturbed only in softmax-classifier mode
  if (cfg.loss == LossKind::softmax) {
    prefs.push_back({"oim.table", mutable_state.table.data.data(), mutable_state.table.size()});
    grefs.push_back({"oim.table", analytic.table.data.data(), analytic.table.size()});
  }

  const OimState& eval_state = cfg.loss == LossKind::softmax ? mutable_state : state;
  auto objective = [&]() {
    const double v = forward(sample, params, eval_state, label, cfg).report.total;
    return v;
  };

  GradCheckReport report;
  for (std::size_t gi = 0; gi < prefs.size(); ++gi) {
    ParamRef& pr = prefs[gi];
    const ParamRef& gr = grefs[gi];
    std::vector<std::size_t> coords(pr.size);
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > coords_per_group) {
      // partial Fisher-Yates: first coords_per_group entries are a uniform sample
      for (std::size_t i = 0; i < coords_per_group; ++i) {
        const std::size_t j = i + rng.uniform_index(coords.size() - i);
        std::swap(coords[i], coords[j]);
      }
      coords.resize(coords_per_group);
    }
    GradCheckGroup group{pr.name, 0.0};
    for (std::size_t idx : coords) {
      const double saved = pr.data[idx];
      pr.data[idx] = saved + eps;
      const double f_plus = objective();
      pr.data[idx] = saved - eps;
      const double f_minus = objective();
      pr.data[idx] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
        throw Error(Errc::numeric_failure, "non-finite objective while checking " + pr.name);
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double exact = gr.data[idx];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      group.max_rel_err = std::max(group.max_rel_err, std::abs(exact - numeric) / denom);
    }
    report.worst = std::max(report.worst, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace dsta
