#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dsta/error.hpp"
#include "dsta/numeric.hpp"
#include "dsta/rng.hpp"
#include "dsta/spatial.hpp"

namespace dsta {

// Generator spec for desk-scale experiments. Each identity owns `parts`
// latent signature vectors planted at identity-consistent grid cells;
// frames add signature jitter, occlusion (the part is replaced by clutter
// drawn from a shared pool, so occlusion carries no identity information)
// and background noise.
struct SynthSpec {
  std::size_t identities = 8;
  std::size_t videos_per_identity = 4;
  std::size_t frames_per_video = 24;
  std::size_t parts = 6;
  std::size_t grid_h = 8;
  std::size_t grid_w = 4;
  std::size_t feature_dim = 64;
  double p_occ = 0.1;
  double noise = 0.05;
  double jitter = 0.05;
  double pos_jitter = 0.0;  // probability that a part shifts to a neighbor cell
  std::size_t distractors = 16;
  bool orthogonal_signatures = true;
  std::uint64_t seed = 7;

  std::size_t cell_count() const { return grid_h * grid_w; }
};

struct SyntheticVideo {
  std::size_t identity = 0;
  std::size_t camera = 0;  // two pseudo-cameras, alternating per video
  std::vector<FrameFeatureGrid> frames;
};

struct SyntheticDataset {
  SynthSpec spec;
  std::vector<SyntheticVideo> videos;  // identity-major, then video index
};

inline void validate(const SynthSpec& s) {
  if (s.identities < 2) throw Error(Errc::invalid_parameter, "identities must be >= 2");
  if (s.parts < 1) throw Error(Errc::invalid_parameter, "parts must be >= 1");
  if (s.videos_per_identity < 1)
    throw Error(Errc::invalid_parameter, "videos_per_identity must be >= 1");
  if (s.frames_per_video < 1) throw Error(Errc::invalid_parameter, "frames_per_video must be >= 1");
  if (s.grid_h < 1 || s.grid_w < 1) throw Error(Errc::invalid_parameter, "grid dims must be >= 1");
  if (s.feature_dim < 1) throw Error(Errc::invalid_parameter, "feature_dim must be >= 1");
  if (s.parts > s.cell_count()) throw Error(Errc::invalid_parameter, "parts exceed grid cells");
  if (!(s.p_occ >= 0.0 && s.p_occ <= 1.0)) throw Error(Errc::invalid_parameter, "p_occ in [0,1]");
  if (!(s.noise >= 0.0) || !(s.jitter >= 0.0))
    throw Error(Errc::invalid_parameter, "noise and jitter must be >= 0");
  if (!(s.pos_jitter >= 0.0 && s.pos_jitter <= 1.0))
    throw Error(Errc::invalid_parameter, "pos_jitter in [0,1]");
  if (s.distractors < 1) throw Error(Errc::invalid_parameter, "distractors must be >= 1");
  if (s.orthogonal_signatures && s.identities * s.parts > s.feature_dim)
    throw Error(Errc::invalid_parameter,
                "orthogonal signatures need identities*parts <= feature_dim");
}

namespace detail {
inline VecD random_unit(Rng& rng, std::size_t dim) {
  VecD v(dim);
  for (double& x : v) x = rng.normal();
  return l2_normalize(v);
}
}  // namespace detail

inline SyntheticDataset make_synthetic(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const std::size_t l_cells = spec.cell_count();

  // Signatures: unit vectors, optionally Gram-Schmidt orthonormalized
  // across the whole identity x part set.
  std::vector<VecD> signatures(spec.identities * spec.parts);
  for (auto& sig : signatures) sig = detail::random_unit(rng, spec.feature_dim);
  if (spec.orthogonal_signatures) {
    for (std::size_t i = 0; i < signatures.size(); ++i) {
      VecD& v = signatures[i];
      for (std::size_t j = 0; j < i; ++j) {
        const double proj = dot(v, signatures[j]);
        for (std::size_t t = 0; t < v.size(); ++t) v[t] -= proj * signatures[j][t];
      }
      v = l2_normalize(v);
    }
  }

  // Identity-consistent home cells for each part.
  std::vector<std::vector<std::size_t>> home(spec.identities,
                                             std::vector<std::size_t>(spec.parts));
  for (std::size_t id = 0; id < spec.identities; ++id) {
    std::vector<std::size_t> cells(l_cells);
    for (std::size_t i = 0; i < l_cells; ++i) cells[i] = i;
    for (std::size_t p = 0; p < spec.parts; ++p) {
      const std::size_t j = p + rng.uniform_index(l_cells - p);
      std::swap(cells[p], cells[j]);
      home[id][p] = cells[p];
    }
  }

  std::vector<VecD> clutter(spec.distractors);
  for (auto& v : clutter) v = detail::random_unit(rng, spec.feature_dim);

  SyntheticDataset ds;
  ds.spec = spec;
  ds.videos.reserve(spec.identities * spec.videos_per_identity);
  for (std::size_t id = 0; id < spec.identities; ++id) {
    for (std::size_t v = 0; v < spec.videos_per_identity; ++v) {
      SyntheticVideo video;
      video.identity = id;
      video.camera = v % 2;
      video.frames.reserve(spec.frames_per_video);
      for (std::size_t f = 0; f < spec.frames_per_video; ++f) {
        FrameFeatureGrid grid(spec.grid_h, spec.grid_w, spec.feature_dim);
        if (spec.noise > 0.0)
          for (double& x : grid.cells.data) x = spec.noise * rng.normal();
        for (std::size_t p = 0; p < spec.parts; ++p) {
          std::size_t cell = home[id][p];
          if (spec.pos_jitter > 0.0 && rng.uniform() < spec.pos_jitter) {
            const std::size_t r = cell / spec.grid_w;
            const std::size_t col = cell % spec.grid_w;
            const std::size_t nr =
                rng.uniform() < 0.5 ? (r > 0 ? r - 1 : r) : (r + 1 < spec.grid_h ? r + 1 : r);
            const std::size_t nc =
                rng.uniform() < 0.5 ? (col > 0 ? col - 1 : col)
                                    : (col + 1 < spec.grid_w ? col + 1 : col);
            cell = nr * spec.grid_w + nc;
          }
          double* target = grid.cells.row(cell);
          if (spec.p_occ > 0.0 && rng.uniform() < spec.p_occ) {
            const VecD& c = clutter[rng.uniform_index(spec.distractors)];
            for (std::size_t t = 0; t < spec.feature_dim; ++t) target[t] += c[t];
          } else {
            const VecD& sig = signatures[id * spec.parts + p];
            for (std::size_t t = 0; t < spec.feature_dim; ++t) {
              target[t] += sig[t];
              if (spec.jitter > 0.0) target[t] += spec.jitter * rng.normal();
            }
          }
        }
        video.frames.push_back(std::move(grid));
      }
      ds.videos.push_back(std::move(video));
    }
  }
  return ds;
}

}  // namespace dsta
