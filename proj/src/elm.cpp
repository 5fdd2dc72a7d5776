#include "fedelm/elm.hpp"

#include <cmath>
#include <random>

namespace fedelm {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Relu: return "relu";
    }
    return "unknown";
}

void validate_topology(const Topology& t) {
    if (t.n_input == 0 || t.n_hidden == 0 || t.n_output == 0) {
        throw DimensionError("topology dimensions must all be >= 1");
    }
}

// mt19937_64 output mapped to [-1, 1] by hand. uniform_real_distribution is
// not bit-stable across standard libraries; this mapping is, and seed
// equality must imply byte equality of alpha/bias.
static double next_uniform_pm1(std::mt19937_64& gen) {
    const double u01 = static_cast<double>(gen() >> 11) * 0x1p-53;
    return 2.0 * u01 - 1.0;
}

SlfnModel init_model(const Topology& topology) {
    validate_topology(topology);
    SlfnModel m;
    m.topology = topology;
    m.alpha = Matrix(topology.n_input, topology.n_hidden);
    m.bias = Matrix(1, topology.n_hidden);
    m.beta = Matrix(topology.n_hidden, topology.n_output);
    std::mt19937_64 gen(topology.init_seed);
    for (std::size_t i = 0; i < m.alpha.size(); ++i) m.alpha.data()[i] = next_uniform_pm1(gen);
    for (std::size_t i = 0; i < m.bias.size(); ++i) m.bias.data()[i] = next_uniform_pm1(gen);
    return m;
}

static double apply_activation(Activation a, double v) {
    switch (a) {
        case Activation::Identity: return v;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
        case Activation::Relu: return v > 0.0 ? v : 0.0;
    }
    return v;
}

Matrix hidden(const SlfnModel& model, const Matrix& x) {
    if (x.cols() != model.topology.n_input) {
        throw DimensionError("input width " + std::to_string(x.cols()) +
                             " does not match topology n_input " +
                             std::to_string(model.topology.n_input));
    }
    Matrix h = matmul(x, model.alpha);
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j)
            h(i, j) = apply_activation(model.topology.activation, h(i, j) + model.bias(0, j));
    return h;
}

Matrix predict(const SlfnModel& model, const Matrix& x) {
    return matmul(hidden(model, x), model.beta);
}

SlfnModel train_batch(const SlfnModel& model, const Chunk& data, double ridge) {
    if (data.x.rows() != data.t.rows()) {
        throw DimensionError("chunk x/t row mismatch");
    }
    if (data.t.cols() != model.topology.n_output) {
        throw DimensionError("target width does not match topology n_output");
    }
    if (data.x.rows() < 1) throw DimensionError("train_batch needs at least one row");
    const Matrix h = hidden(model, data.x);
    const Matrix ht = transpose(h);
    const Matrix gram = symmetrize(matmul(ht, h));
    SlfnModel out = model;
    try {
        out.beta = spd_solve(gram, matmul(ht, data.t), ridge);
        out.p = inverse_spd(gram, ridge);
    } catch (const SingularityError& e) {
        throw SingularityError(e.pivot_index, e.pivot_value,
            "H^T H is singular (pivot " + std::to_string(e.pivot_value) + " at index " +
            std::to_string(e.pivot_index) + "); use a ridge > 0 or more samples");
    }
    out.trained_rows = data.x.rows();
    out.accumulated_ridge = ridge;
    return out;
}

}  // namespace fedelm
