#pragma once

#include <cmath>
#include <cstddef>

#include "dsta/error.hpp"
#include "dsta/mat.hpp"
#include "dsta/numeric.hpp"

namespace dsta {

// Lookup table of one running feature per training identity. Rows start at
// zero (cold start: similarity 0 everywhere) and hold unit norm from their
// first update onward.
struct OimState {
  Mat table;            // C x E
  double temperature = 0.1;
  double momentum = 0.5;  // gamma in [0, 1)

  std::size_t identity_count() const { return table.rows; }
  std::size_t embed_dim() const { return table.cols; }
};

inline OimState make_oim_state(std::size_t identities, std::size_t embed_dim,
                               double temperature = 0.1, double momentum = 0.5) {
  if (identities < 2) throw Error(Errc::invalid_parameter, "oim needs C >= 2 identities");
  if (!(temperature > 0.0)) throw Error(Errc::invalid_parameter, "oim temperature must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw Error(Errc::invalid_parameter, "oim momentum must be in [0, 1)");
  OimState s;
  s.table = Mat(identities, embed_dim);
  s.temperature = temperature;
  s.momentum = momentum;
  return s;
}

struct OimForwardResult {
  double loss = 0.0;
  VecD probabilities;  // C
};

// Objective breakdown: total = oim_loss + lambda_div * diversity_penalty.
struct LossReport {
  double oim_loss = 0.0;
  double diversity_penalty = 0.0;
  double total = 0.0;
  VecD probabilities;  // C, a pmf (batch mean of per-item pmfs)
};

// p = softmax_i(table_i . embedding / temperature); loss = -log p_label.
inline OimForwardResult oim_forward(const VecD& embedding, std::size_t label,
                                    const OimState& state) {
  if (label >= state.identity_count()) throw Error(Errc::invalid_label, "oim label out of range");
  if (embedding.size() != state.embed_dim())
    throw Error(Errc::shape_mismatch, "oim embedding dim");
  OimForwardResult r;
  r.probabilities = matvec(state.table, embedding);
  for (double& v : r.probabilities) v /= state.temperature;
  softmax_row_inplace(r.probabilities.data(), r.probabilities.size());
  r.loss = -std::log(r.probabilities[label]);
  return r;
}

// d loss / d embedding with the table held constant.
inline VecD oim_backward_embedding(const VecD& probabilities, std::size_t label,
                                   const OimState& state) {
  VecD dl(probabilities);
  dl[label] -= 1.0;
  VecD de = matvec_t(state.table, dl);
  for (double& v : de) v /= state.temperature;
  return de;
}

// table_label <- normalize(gamma * table_label + (1 - gamma) * embedding).
inline void oim_update(OimState& state, const VecD& embedding, std::size_t label) {
  if (label >= state.identity_count()) throw Error(Errc::invalid_label, "oim label out of range");
  if (embedding.size() != state.embed_dim())
    throw Error(Errc::shape_mismatch, "oim embedding dim");
  double* row = state.table.row(label);
  VecD mixed(state.embed_dim());
  for (std::size_t j = 0; j < state.embed_dim(); ++j)
    mixed[j] = state.momentum * row[j] + (1.0 - state.momentum) * embedding[j];
  const VecD unit = l2_normalize(mixed);
  for (std::size_t j = 0; j < state.embed_dim(); ++j) row[j] = unit[j];
}

}  // namespace dsta
