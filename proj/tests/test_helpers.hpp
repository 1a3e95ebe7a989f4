#pragma once

#include "dsta/model.hpp"
#include "dsta/oim.hpp"
#include "dsta/pipeline.hpp"
#include "dsta/rng.hpp"
#include "dsta/sampling.hpp"

namespace dsta::test {

// Random parameters with every array populated (unlike init_params, which
// zeroes the enhancement block).
inline ModelParams random_params(const Hyperparams& hp, Rng& rng, double scale = 0.3) {
  ModelParams p = init_params(hp, rng);
  for (const ParamRef& ref : param_refs(p))
    for (std::size_t i = 0; i < ref.size; ++i) ref.data[i] = scale * rng.normal();
  p.enhancement.sigma = hp.sigma;
  return p;
}

inline OimState random_state(std::size_t identities, const Hyperparams& hp, Rng& rng) {
  OimState s = make_oim_state(identities, hp.embed_dim, hp.tau, hp.gamma);
  for (std::size_t i = 0; i < identities; ++i) {
    VecD row(hp.embed_dim);
    for (double& v : row) v = rng.normal();
    row = l2_normalize(row);
    std::copy(row.begin(), row.end(), s.table.row(i));
  }
  return s;
}

inline VideoSample random_sample(const Hyperparams& hp, Rng& rng, double scale = 1.0) {
  std::vector<FrameFeatureGrid> frames;
  for (std::size_t f = 0; f < hp.chunks; ++f) {
    FrameFeatureGrid g(hp.grid_h, hp.grid_w, hp.feature_dim);
    for (double& v : g.cells.data) v = scale * rng.normal();
    frames.push_back(std::move(g));
  }
  return make_video_sample(frames, first_frame_sample(frames.size(), hp.chunks));
}

}  // namespace dsta::test
