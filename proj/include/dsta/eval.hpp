#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "dsta/error.hpp"
#include "dsta/mat.hpp"
#include "dsta/numeric.hpp"

namespace dsta {

// Ranked retrieval target set: unit embeddings with identity labels and
// optional camera ids (enables cross-camera filtering).
struct Gallery {
  Mat embeddings;                   // M x E
  std::vector<std::size_t> labels;  // M
  std::vector<std::size_t> cameras; // M or empty

  std::size_t size() const { return embeddings.rows; }
  bool has_cameras() const { return !cameras.empty(); }
};

struct Probe {
  VecD embedding;
  std::size_t label = 0;
  std::size_t camera = 0;
};

inline void validate_gallery(const Gallery& g) {
  if (g.size() == 0) throw Error(Errc::invalid_input, "empty gallery");
  if (g.labels.size() != g.size() || (g.has_cameras() && g.cameras.size() != g.size()))
    throw Error(Errc::shape_mismatch, "gallery parallel arrays");
}

// Gallery indices by descending cosine similarity; ties broken by
// ascending index so rankings are deterministic.
inline std::vector<std::size_t> rank_list(const VecD& probe, const Gallery& gallery) {
  validate_gallery(gallery);
  if (probe.size() != gallery.embeddings.cols)
    throw Error(Errc::shape_mismatch, "probe dimension");
  std::vector<double> score(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const double* row = gallery.embeddings.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < probe.size(); ++j) acc += row[j] * probe[j];
    score[i] = acc;
  }
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  return order;
}

namespace detail {
// Ranked gallery indices for one probe, with same-camera same-identity
// entries removed when camera ids are available.
inline std::vector<std::size_t> filtered_ranking(const Probe& probe, const Gallery& gallery) {
  std::vector<std::size_t> order = rank_list(probe.embedding, gallery);
  if (!gallery.has_cameras()) return order;
  std::vector<std::size_t> kept;
  kept.reserve(order.size());
  for (std::size_t idx : order)
    if (!(gallery.labels[idx] == probe.label && gallery.cameras[idx] == probe.camera))
      kept.push_back(idx);
  return kept;
}
}  // namespace detail

// curve[k-1] = fraction of probes whose first correct match lands at rank <= k.
inline VecD cmc(const std::vector<Probe>& probes, const Gallery& gallery, std::size_t k_max) {
  validate_gallery(gallery);
  if (probes.empty()) throw Error(Errc::invalid_input, "empty probe set");
  if (k_max == 0) throw Error(Errc::invalid_input, "k_max must be >= 1");
  VecD curve(k_max, 0.0);
  for (const Probe& p : probes) {
    const std::vector<std::size_t> ranking = detail::filtered_ranking(p, gallery);
    std::size_t first = 0;
    bool found = false;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      if (gallery.labels[ranking[r]] == p.label) {
        first = r + 1;
        found = true;
        break;
      }
    }
    if (!found) throw Error(Errc::protocol_error, "probe identity absent from gallery");
    for (std::size_t k = first; k <= k_max; ++k) curve[k - 1] += 1.0;
  }
  for (double& v : curve) v /= static_cast<double>(probes.size());
  return curve;
}

// AP per probe: mean over relevant ranks r of (relevant among top-r) / r.
inline double mean_ap(const std::vector<Probe>& probes, const Gallery& gallery) {
  validate_gallery(gallery);
  if (probes.empty()) throw Error(Errc::invalid_input, "empty probe set");
  double map = 0.0;
  for (const Probe& p : probes) {
    const std::vector<std::size_t> ranking = detail::filtered_ranking(p, gallery);
    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      if (gallery.labels[ranking[r]] == p.label) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    if (hits == 0) throw Error(Errc::protocol_error, "probe identity absent from gallery");
    map += ap / static_cast<double>(hits);
  }
  return map / static_cast<double>(probes.size());
}

}  // namespace dsta
