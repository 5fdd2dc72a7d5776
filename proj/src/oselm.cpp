#include "fedelm/oselm.hpp"

namespace fedelm {

SlfnModel init_sequential(const SlfnModel& model, const Chunk& chunk0, double ridge) {
    return train_batch(model, chunk0, ridge);
}

// Rank-k step for a k-row chunk; k == 1 dispatches to the reciprocal path.
static SlfnModel update_general(const SlfnModel& model, const Chunk& chunk) {
    const Matrix h = hidden(model, chunk.x);
    const Matrix ht = transpose(h);
    const Matrix& p = *model.p;

    const Matrix ph_t = matmul(p, ht);                   // N x k
    const Matrix inner = symmetrize(
        add(Matrix::identity(h.rows()), matmul(h, ph_t)));  // k x k, SPD
    const Matrix gain = spd_solve(inner, transpose(ph_t));  // k x N
    Matrix p_new = symmetrize(sub(p, matmul(ph_t, gain)));

    const Matrix innovation = sub(chunk.t, matmul(h, model.beta));
    SlfnModel out = model;
    out.beta = add(model.beta, matmul(matmul(p_new, ht), innovation));
    out.p = std::move(p_new);
    out.trained_rows = model.trained_rows + chunk.x.rows();
    return out;
}

static SlfnModel update_single_row(const SlfnModel& model, const Chunk& chunk) {
    const Matrix h = hidden(model, chunk.x);  // 1 x N
    const Matrix& p = *model.p;
    const std::size_t n = p.rows();

    // ph = P h^T (N x 1); denom = 1 + h P h^T is a scalar.
    std::vector<double> ph(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += p(i, j) * h(0, j);
        ph[i] = s;
    }
    double denom = 1.0;
    for (std::size_t j = 0; j < n; ++j) denom += h(0, j) * ph[j];
    if (denom <= 1e-300) {
        throw SingularityError(0, denom,
            "1 + h P h^T = " + std::to_string(denom) +
            " is not positive; sequential state is corrupted");
    }
    const double inv = 1.0 / denom;

    Matrix p_new(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            p_new(i, j) = p(i, j) - ph[i] * ph[j] * inv;
    p_new = symmetrize(p_new);

    SlfnModel out = model;
    const Matrix innovation = sub(chunk.t, matmul(h, model.beta));  // 1 x m
    for (std::size_t i = 0; i < n; ++i) {
        double g = 0.0;
        for (std::size_t j = 0; j < n; ++j) g += p_new(i, j) * h(0, j);
        for (std::size_t c = 0; c < out.beta.cols(); ++c)
            out.beta(i, c) += g * innovation(0, c);
    }
    out.p = std::move(p_new);
    out.trained_rows = model.trained_rows + 1;
    return out;
}

SlfnModel update(const SlfnModel& model, const Chunk& chunk) {
    if (!model.p) {
        throw std::logic_error("update requires a sequentially initialized model (no P state)");
    }
    if (chunk.x.rows() != chunk.t.rows()) throw DimensionError("chunk x/t row mismatch");
    if (chunk.t.cols() != model.topology.n_output) {
        throw DimensionError("target width does not match topology n_output");
    }
    if (chunk.x.rows() == 1) return update_single_row(model, chunk);
    return update_general(model, chunk);
}

SlfnModel train_stream(const SlfnModel& model, std::span<const Chunk> chunks) {
    SlfnModel cur = model;
    std::size_t idx = 0;
    for (const Chunk& c : chunks) {
        try {
            cur = update(cur, c);
        } catch (const std::exception& e) {
            throw std::runtime_error("train_stream failed at chunk " + std::to_string(idx) +
                                     ": " + e.what());
        }
        ++idx;
    }
    return cur;
}

}  // namespace fedelm
