#pragma once

#include <cstddef>
#include <vector>

#include "dsta/error.hpp"
#include "dsta/rng.hpp"
#include "dsta/spatial.hpp"

namespace dsta {

// Chunk n of a T-frame video covers the half-open range
// [floor(n*T/N), floor((n+1)*T/N)); sizes differ by at most one.
inline std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t t, std::size_t n_chunks,
                                                        std::size_t chunk) {
  return {chunk * t / n_chunks, (chunk + 1) * t / n_chunks};
}

// One uniformly random frame index per chunk. Videos shorter than N are
// extended by cyclic repetition (index i mod T), giving N size-1 chunks.
inline std::vector<std::size_t> restricted_random_sample(std::size_t t, std::size_t n_chunks,
                                                         Rng& rng) {
  if (t == 0 || n_chunks == 0) throw Error(Errc::invalid_input, "sample needs T >= 1 and N >= 1");
  std::vector<std::size_t> out(n_chunks);
  if (t < n_chunks) {
    for (std::size_t i = 0; i < n_chunks; ++i) out[i] = i % t;
    return out;
  }
  for (std::size_t i = 0; i < n_chunks; ++i) {
    const auto [lo, hi] = chunk_bounds(t, n_chunks, i);
    out[i] = lo + rng.uniform_index(hi - lo);
  }
  return out;
}

// Deterministic test-time rule: the first frame of each chunk.
inline std::vector<std::size_t> first_frame_sample(std::size_t t, std::size_t n_chunks) {
  if (t == 0 || n_chunks == 0) throw Error(Errc::invalid_input, "sample needs T >= 1 and N >= 1");
  std::vector<std::size_t> out(n_chunks);
  if (t < n_chunks) {
    for (std::size_t i = 0; i < n_chunks; ++i) out[i] = i % t;
    return out;
  }
  for (std::size_t i = 0; i < n_chunks; ++i) out[i] = chunk_bounds(t, n_chunks, i).first;
  return out;
}

// A video reduced to N representative frames.
struct VideoSample {
  std::size_t total_frames = 0;
  std::size_t chunk_count = 0;
  std::vector<std::size_t> chosen_indices;
  std::vector<FrameFeatureGrid> grids;
};

inline VideoSample make_video_sample(const std::vector<FrameFeatureGrid>& frames,
                                     std::vector<std::size_t> indices) {
  VideoSample s;
  s.total_frames = frames.size();
  s.chunk_count = indices.size();
  s.grids.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= frames.size()) throw Error(Errc::invalid_input, "frame index out of range");
    s.grids.push_back(frames[idx]);
  }
  s.chosen_indices = std::move(indices);
  return s;
}

}  // namespace dsta
