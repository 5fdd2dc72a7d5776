#include <algorithm>
#include <vector>

#include "doctest.h"

#include "fedelm/oselm.hpp"
#include "test_util.hpp"

using namespace fedelm;
using test::Rng;
using test::random_matrix;

namespace {

Matrix stack(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() + b.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) out(a.rows() + i, j) = b(i, j);
    return out;
}

}  // namespace

TEST_CASE("init_sequential equals train_batch on the same chunk") {
    Rng rng(30);
    const SlfnModel m = init_model({5, 3, 2, Activation::Sigmoid, 31});
    const Chunk c{random_matrix(rng, 8, 5), random_matrix(rng, 8, 2)};
    const SlfnModel seq = init_sequential(m, c, 1e-8);
    const SlfnModel batch = train_batch(m, c, 1e-8);
    CHECK(relative_frobenius_diff(batch.beta, seq.beta) < 1e-10);
}

TEST_CASE("init_sequential interpolates when k equals hidden size") {
    Rng rng(31);
    const SlfnModel m = init_model({4, 3, 2, Activation::Sigmoid, 32});
    const Chunk c{random_matrix(rng, 3, 4), random_matrix(rng, 3, 2)};
    const SlfnModel seq = init_sequential(m, c);
    CHECK(max_abs_diff(matmul(hidden(m, c.x), seq.beta), c.t) < 1e-8);
}

TEST_CASE("init_sequential with too few rows and no ridge fails") {
    Rng rng(32);
    const SlfnModel m = init_model({4, 3, 2, Activation::Identity, 33});
    const Chunk c{random_matrix(rng, 2, 4), random_matrix(rng, 2, 2)};
    CHECK_THROWS_AS(init_sequential(m, c), SingularityError);
}

TEST_CASE("init then update equals batch training on the union") {
    Rng rng(33);
    const SlfnModel m = init_model({6, 4, 3, Activation::Sigmoid, 34});
    const Chunk a{random_matrix(rng, 10, 6), random_matrix(rng, 10, 3)};
    const Chunk b{random_matrix(rng, 7, 6), random_matrix(rng, 7, 3)};
    const SlfnModel seq = update(init_sequential(m, a), b);
    const SlfnModel batch =
        train_batch(m, Chunk{stack(a.x, b.x), stack(a.t, b.t)});
    CHECK(relative_frobenius_diff(batch.beta, seq.beta) < 1e-8);
}

TEST_CASE("scalar path agrees with the general k-path") {
    Rng rng(34);
    SlfnModel m = init_model({5, 3, 2, Activation::Sigmoid, 35});
    m = init_sequential(m, Chunk{random_matrix(rng, 6, 5), random_matrix(rng, 6, 2)});
    const Matrix x = random_matrix(rng, 1, 5);
    const Matrix t = random_matrix(rng, 1, 2);

    const SlfnModel via_scalar = update(m, Chunk{x, t});
    // Same row through the general branch: duplicate it with half weight is
    // not equivalent, so instead push it through a 2-row chunk made of the
    // row plus an already-perfectly-predicted row (zero innovation).
    const SlfnModel mid = via_scalar;
    // Direct check: recompute the general-path formulas by hand.
    const Matrix h = hidden(m, x);
    const Matrix ht = transpose(h);
    const Matrix ph = matmul(*m.p, ht);
    const Matrix inner = add(Matrix::identity(1), matmul(h, ph));
    const Matrix gain = spd_solve(inner, transpose(ph));
    const Matrix p_new = symmetrize(sub(*m.p, matmul(ph, gain)));
    const Matrix beta_new =
        add(m.beta, matmul(matmul(p_new, ht), sub(t, matmul(h, m.beta))));
    CHECK(relative_frobenius_diff(beta_new, mid.beta) < 1e-10);
    CHECK(relative_frobenius_diff(p_new, *mid.p) < 1e-10);
}

TEST_CASE("perfectly predicted chunk leaves beta unchanged") {
    Rng rng(35);
    SlfnModel m = init_model({5, 3, 3, Activation::Sigmoid, 36});
    m = init_sequential(m, Chunk{random_matrix(rng, 6, 5), random_matrix(rng, 6, 3)});
    const Matrix x = random_matrix(rng, 1, 5);
    const Matrix t = matmul(hidden(m, x), m.beta);  // zero innovation
    const SlfnModel after = update(m, Chunk{x, t});
    CHECK(max_abs_diff(after.beta, m.beta) < 1e-12);
}

TEST_CASE("update without sequential state is rejected") {
    const SlfnModel m = init_model({4, 3, 4, Activation::Identity, 37});
    Rng rng(36);
    const Matrix x = random_matrix(rng, 1, 4);
    CHECK_THROWS_AS(update(m, Chunk{x, x}), std::logic_error);
}

TEST_CASE("train_stream with no chunks is the identity") {
    Rng rng(37);
    SlfnModel m = init_model({4, 3, 2, Activation::Identity, 38});
    m = init_sequential(m, Chunk{random_matrix(rng, 5, 4), random_matrix(rng, 5, 2)});
    const SlfnModel after = train_stream(m, {});
    CHECK(after.beta.storage() == m.beta.storage());
}

TEST_CASE("chunk order does not change the final beta") {
    Rng rng(38);
    const SlfnModel m0 = init_model({5, 3, 2, Activation::Sigmoid, 39});
    const Chunk c0{random_matrix(rng, 6, 5), random_matrix(rng, 6, 2)};
    std::vector<Chunk> chunks;
    for (int i = 0; i < 6; ++i) {
        chunks.push_back(Chunk{random_matrix(rng, 2, 5), random_matrix(rng, 2, 2)});
    }
    const SlfnModel fwd = train_stream(init_sequential(m0, c0), chunks);
    std::reverse(chunks.begin(), chunks.end());
    const SlfnModel rev = train_stream(init_sequential(m0, c0), chunks);
    CHECK(relative_frobenius_diff(fwd.beta, rev.beta) < 1e-7);
}

TEST_CASE("100 single-row updates match one batch solve") {
    Rng rng(39);
    const SlfnModel m0 = init_model({6, 4, 3, Activation::Sigmoid, 40});
    const Matrix x = random_matrix(rng, 104, 6);
    const Matrix t = random_matrix(rng, 104, 3);
    Matrix x0(4, 6), t0(4, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 6; ++j) x0(i, j) = x(i, j);
        for (std::size_t j = 0; j < 3; ++j) t0(i, j) = t(i, j);
    }
    SlfnModel seq = init_sequential(m0, Chunk{x0, t0});
    for (std::size_t i = 4; i < 104; ++i) {
        seq = update(seq, Chunk{x.row(i), t.row(i)});
    }
    const SlfnModel batch = train_batch(m0, Chunk{x, t});
    CHECK(relative_frobenius_diff(batch.beta, seq.beta) < 1e-7);
    CHECK(seq.trained_rows == 104);
}

TEST_CASE("P stays symmetric through long update sequences") {
    Rng rng(40);
    SlfnModel m = init_model({5, 4, 5, Activation::Sigmoid, 41});
    const Matrix x0 = random_matrix(rng, 5, 5);
    m = init_sequential(m, Chunk{x0, x0});
    for (int i = 0; i < 200; ++i) {
        const Matrix x = random_matrix(rng, 1, 5);
        m = update(m, Chunk{x, x});
        CHECK(is_symmetric(*m.p, 1e-7));
    }
}

TEST_CASE("stream errors carry the chunk index") {
    Rng rng(41);
    SlfnModel m = init_model({4, 3, 2, Activation::Identity, 42});
    m = init_sequential(m, Chunk{random_matrix(rng, 5, 4), random_matrix(rng, 5, 2)});
    std::vector<Chunk> chunks;
    chunks.push_back(Chunk{random_matrix(rng, 1, 4), random_matrix(rng, 1, 2)});
    chunks.push_back(Chunk{random_matrix(rng, 1, 3), random_matrix(rng, 1, 2)});  // bad width
    CHECK_THROWS_WITH_AS(train_stream(m, chunks), doctest::Contains("chunk 1"),
                         std::runtime_error);
}
