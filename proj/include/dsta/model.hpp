#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dsta/enhancement.hpp"
#include "dsta/error.hpp"
#include "dsta/mat.hpp"
#include "dsta/rng.hpp"
#include "dsta/spatial.hpp"
#include "dsta/temporal.hpp"

namespace dsta {

enum class PenaltyKind { q, qprime, none };
enum class SpatialMode { attention, uniform };
enum class LossKind { oim, softmax };

// Model and run configuration. Desk-scale defaults; paper-scale dims are
// accepted but not default.
struct Hyperparams {
  // shapes
  std::size_t chunks = 6;        // N
  std::size_t heads = 6;         // K
  std::size_t grid_h = 8;
  std::size_t grid_w = 4;        // L = grid_h * grid_w
  std::size_t feature_dim = 64;  // D
  std::size_t hidden_dim = 16;   // d
  std::size_t embed_dim = 32;    // E

  // objective
  double lambda_div = 0.1;
  PenaltyKind penalty = PenaltyKind::q;
  LossKind loss = LossKind::oim;
  double tau = 0.1;
  double gamma = 0.5;

  // pipeline variants
  SpatialMode spatial_mode = SpatialMode::attention;
  TemporalMode temporal_mode = TemporalMode::attention;
  TemporalNorm temporal_norm = TemporalNorm::softmax;
  bool enhancement = true;
  double sigma = 2.0;

  // optimization
  double lr_initial = 0.1;
  double lr_dropped = 0.01;
  std::size_t lr_drop_epoch = 0;  // 0 = halfway through training
  double sgd_momentum = 0.0;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::size_t warmup_epochs = 0;  // spatial-only warmup with average pooling
  std::uint64_t seed = 42;

  std::size_t cell_count() const { return grid_h * grid_w; }
  std::size_t concat_dim() const { return heads * feature_dim; }
  std::size_t effective_drop_epoch() const {
    return lr_drop_epoch > 0 ? lr_drop_epoch : epochs / 2;
  }
};

// Every learnable array of the pipeline.
struct ModelParams {
  std::vector<SpatialHeadParams> spatial;    // K heads
  EnhancementParams enhancement;
  std::vector<TemporalHeadParams> temporal;  // K heads
  EmbeddingParams embedding;
};

// Gradients, shape-congruent with ModelParams. `table` is used only when
// the plain-softmax classifier trains the lookup table by gradient.
struct GradientBundle {
  ModelParams params;
  Mat table;
};

namespace detail {
inline double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline void fill_uniform(Rng& rng, VecD& v, double bound) {
  for (double& x : v) x = rng.uniform(-bound, bound);
}
}  // namespace detail

// Weights ~ uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases
// zero. The enhancement block starts at zero so training begins from pure
// appearance similarity and an identity residual.
inline ModelParams init_params(const Hyperparams& hp, Rng& rng) {
  ModelParams p;
  p.spatial.resize(hp.heads);
  for (auto& head : p.spatial) {
    head.W_s = Mat(hp.hidden_dim, hp.feature_dim);
    detail::fill_uniform(rng, head.W_s.data, detail::xavier_bound(hp.feature_dim, hp.hidden_dim));
    head.b_s.assign(hp.hidden_dim, 0.0);
    head.w_out.assign(hp.hidden_dim, 0.0);
    detail::fill_uniform(rng, head.w_out, detail::xavier_bound(hp.hidden_dim, 1));
    head.b_out = 0.0;
  }
  p.enhancement.W_pos = Mat(hp.chunks, hp.chunks);
  p.enhancement.b_pos.assign(hp.chunks, 0.0);
  p.enhancement.sigma = hp.sigma;
  p.enhancement.fcn_W = Mat(hp.feature_dim, hp.feature_dim);
  p.enhancement.fcn_b.assign(hp.feature_dim, 0.0);
  p.temporal.resize(hp.heads);
  for (auto& head : p.temporal) {
    head.w_t.assign(hp.feature_dim, 0.0);
    detail::fill_uniform(rng, head.w_t, detail::xavier_bound(hp.feature_dim, 1));
    head.b_t = 0.0;
  }
  p.embedding.W_e = Mat(hp.embed_dim, hp.concat_dim());
  detail::fill_uniform(rng, p.embedding.W_e.data,
                       detail::xavier_bound(hp.concat_dim(), hp.embed_dim));
  p.embedding.b_e.assign(hp.embed_dim, 0.0);
  return p;
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& head : z.spatial) {
    std::fill(head.W_s.data.begin(), head.W_s.data.end(), 0.0);
    std::fill(head.b_s.begin(), head.b_s.end(), 0.0);
    std::fill(head.w_out.begin(), head.w_out.end(), 0.0);
    head.b_out = 0.0;
  }
  std::fill(z.enhancement.W_pos.data.begin(), z.enhancement.W_pos.data.end(), 0.0);
  std::fill(z.enhancement.b_pos.begin(), z.enhancement.b_pos.end(), 0.0);
  std::fill(z.enhancement.fcn_W.data.begin(), z.enhancement.fcn_W.data.end(), 0.0);
  std::fill(z.enhancement.fcn_b.begin(), z.enhancement.fcn_b.end(), 0.0);
  for (auto& head : z.temporal) {
    std::fill(head.w_t.begin(), head.w_t.end(), 0.0);
    head.b_t = 0.0;
  }
  std::fill(z.embedding.W_e.data.begin(), z.embedding.W_e.data.end(), 0.0);
  std::fill(z.embedding.b_e.begin(), z.embedding.b_e.end(), 0.0);
  return z;
}

// Named view of one parameter array; the fixed order below defines the
// checkpoint layout and the gradient-check grouping.
struct ParamRef {
  std::string name;
  double* data;
  std::size_t size;
};

inline std::vector<ParamRef> param_refs(ModelParams& p) {
  std::vector<ParamRef> refs;
  for (std::size_t k = 0; k < p.spatial.size(); ++k) {
    auto& h = p.spatial[k];
    const std::string base = "spatial" + std::to_string(k);
    refs.push_back({base + ".W_s", h.W_s.data.data(), h.W_s.size()});
    refs.push_back({base + ".b_s", h.b_s.data(), h.b_s.size()});
    refs.push_back({base + ".w_out", h.w_out.data(), h.w_out.size()});
    refs.push_back({base + ".b_out", &h.b_out, 1});
  }
  refs.push_back({"enhancement.W_pos", p.enhancement.W_pos.data.data(), p.enhancement.W_pos.size()});
  refs.push_back({"enhancement.b_pos", p.enhancement.b_pos.data(), p.enhancement.b_pos.size()});
  refs.push_back({"enhancement.fcn_W", p.enhancement.fcn_W.data.data(), p.enhancement.fcn_W.size()});
  refs.push_back({"enhancement.fcn_b", p.enhancement.fcn_b.data(), p.enhancement.fcn_b.size()});
  for (std::size_t k = 0; k < p.temporal.size(); ++k) {
    auto& h = p.temporal[k];
    const std::string base = "temporal" + std::to_string(k);
    refs.push_back({base + ".w_t", h.w_t.data(), h.w_t.size()});
    refs.push_back({base + ".b_t", &h.b_t, 1});
  }
  refs.push_back({"embedding.W_e", p.embedding.W_e.data.data(), p.embedding.W_e.size()});
  refs.push_back({"embedding.b_e", p.embedding.b_e.data(), p.embedding.b_e.size()});
  return refs;
}

inline std::vector<ParamRef> param_refs(const ModelParams& p) {
  return param_refs(const_cast<ModelParams&>(p));
}

}  // namespace dsta
