#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fedelm/matrix.hpp"

namespace fedelm {

enum class Activation : std::uint8_t { Identity = 0, Sigmoid = 1, Relu = 2 };

std::string activation_name(Activation a);

// Single-hidden-layer network topology. init_seed fixes the random input
// weights and bias: two models built from equal topologies are bit-identical,
// which is what makes their intermediate results mergeable.
struct Topology {
    std::size_t n_input = 0;
    std::size_t n_hidden = 0;
    std::size_t n_output = 0;
    Activation activation = Activation::Identity;
    std::uint64_t init_seed = 0;

    bool operator==(const Topology&) const = default;
};

void validate_topology(const Topology& t);

// One (x, t) training batch; autoencoder training sets t = x.
struct Chunk {
    Matrix x;
    Matrix t;
};

// alpha and bias are frozen at init; only beta is trained. p is the inverse
// Gram matrix carried by sequential training, absent on a fresh model.
struct SlfnModel {
    Topology topology;
    Matrix alpha;  // n_input x n_hidden
    Matrix bias;   // 1 x n_hidden
    Matrix beta;   // n_hidden x n_output
    std::optional<Matrix> p;  // n_hidden x n_hidden

    // Bookkeeping for merge/export: rows consumed and total ridge folded
    // into the Gram matrix so far.
    std::uint64_t trained_rows = 0;
    double accumulated_ridge = 0.0;
};

SlfnModel init_model(const Topology& topology);

// H = G(x * alpha + b), bias broadcast across rows.
Matrix hidden(const SlfnModel& model, const Matrix& x);

// y = H * beta.
Matrix predict(const SlfnModel& model, const Matrix& x);

// Batch least squares through the normal equations:
// beta = (H^T H + ridge I)^-1 H^T t. Also stores p = (H^T H + ridge I)^-1
// so sequential training can continue from the batch solution.
SlfnModel train_batch(const SlfnModel& model, const Chunk& data, double ridge = 0.0);

}  // namespace fedelm
