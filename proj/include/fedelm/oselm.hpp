#pragma once

#include <span>

#include "fedelm/elm.hpp"

namespace fedelm {

// Sequential training state bootstrap: p = (H0^T H0 + ridge I)^-1,
// beta = p H0^T t0. With ridge 0 this needs at least n_hidden rows.
SlfnModel init_sequential(const SlfnModel& model, const Chunk& chunk0, double ridge = 0.0);

// One recursive least-squares step:
//   P <- P - P H^T (I + H P H^T)^-1 H P
//   beta <- beta + P H^T (t - H beta)
// Single-row chunks take a scalar-reciprocal path instead of the k x k
// solve. P is re-symmetrized after every step.
SlfnModel update(const SlfnModel& model, const Chunk& chunk);

// Left fold of update over the chunks.
SlfnModel train_stream(const SlfnModel& model, std::span<const Chunk> chunks);

}  // namespace fedelm
