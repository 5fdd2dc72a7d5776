#pragma once

#include "fedelm/elm.hpp"

namespace fedelm {

// Thrown when two intermediate-result sets cannot be merged (different
// topology or init seed).
class IncompatibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shareable sufficient statistics of a least-squares fit:
// u = H^T H (+ accumulated ridge on the diagonal), v = H^T t.
// Adding two of these is exactly training on the pooled data.
struct Intermediates {
    Matrix u;  // n_hidden x n_hidden
    Matrix v;  // n_hidden x n_output
    Topology topology;
    std::uint64_t sample_count = 0;
    double accumulated_ridge = 0.0;
};

Intermediates zero_intermediates(const Topology& topology);

// U = P^-1, V = U beta. Requires sequential state (P present and SPD).
Intermediates extract(const SlfnModel& model);

// Elementwise sums; rejects mismatched topology or seed.
Intermediates combine(const Intermediates& a, const Intermediates& b);

// Elementwise differences; the result may be singular, in which case a
// later rebuild legitimately fails.
Intermediates subtract(const Intermediates& a, const Intermediates& b);

// P = U^-1, beta = U^-1 V; alpha/bias regenerated from the topology seed.
// The result can continue sequential training immediately.
SlfnModel rebuild(const Intermediates& ir, double ridge = 0.0);

}  // namespace fedelm
