#include "doctest.h"

#include "fedelm/merge.hpp"
#include "fedelm/oselm.hpp"
#include "test_util.hpp"

using namespace fedelm;
using test::Rng;
using test::random_matrix;

namespace {

const Topology kTopo{5, 3, 2, Activation::Sigmoid, 50};

SlfnModel trained_on(const Chunk& c, double ridge = 0.0) {
    return init_sequential(init_model(kTopo), c, ridge);
}

Matrix stack(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() + b.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) out(a.rows() + i, j) = b(i, j);
    return out;
}

}  // namespace

TEST_CASE("extract reproduces the Gram matrix and target projection") {
    Rng rng(51);
    const Chunk c{random_matrix(rng, 9, 5), random_matrix(rng, 9, 2)};
    const double ridge = 1e-8;
    const SlfnModel m = trained_on(c, ridge);
    const Intermediates ir = extract(m);

    const Matrix h = hidden(m, c.x);
    const Matrix expected_u =
        add(matmul(transpose(h), h), scale(Matrix::identity(3), ridge));
    const Matrix expected_v = matmul(transpose(h), c.t);
    CHECK(relative_frobenius_diff(expected_u, ir.u) < 1e-8);
    CHECK(relative_frobenius_diff(expected_v, ir.v) < 1e-8);
    CHECK(ir.sample_count == 9);
    CHECK(ir.accumulated_ridge == ridge);
}

TEST_CASE("rebuild of extract is the identity on beta and P") {
    Rng rng(52);
    const Chunk c{random_matrix(rng, 8, 5), random_matrix(rng, 8, 2)};
    const SlfnModel m = trained_on(c);
    const SlfnModel back = rebuild(extract(m));
    CHECK(relative_frobenius_diff(m.beta, back.beta) < 1e-8);
    CHECK(relative_frobenius_diff(*m.p, *back.p) < 1e-8);
}

TEST_CASE("combine with zero intermediates is the identity") {
    Rng rng(53);
    const Chunk c{random_matrix(rng, 7, 5), random_matrix(rng, 7, 2)};
    const Intermediates a = extract(trained_on(c));
    const Intermediates z = zero_intermediates(kTopo);
    const Intermediates sum = combine(a, z);
    CHECK(sum.u.storage() == a.u.storage());
    CHECK(sum.v.storage() == a.v.storage());
    CHECK(sum.sample_count == a.sample_count);
}

TEST_CASE("combine is commutative bit-exact") {
    Rng rng(54);
    const Intermediates a =
        extract(trained_on(Chunk{random_matrix(rng, 6, 5), random_matrix(rng, 6, 2)}));
    const Intermediates b =
        extract(trained_on(Chunk{random_matrix(rng, 9, 5), random_matrix(rng, 9, 2)}));
    const Intermediates ab = combine(a, b);
    const Intermediates ba = combine(b, a);
    CHECK(ab.u.storage() == ba.u.storage());
    CHECK(ab.v.storage() == ba.v.storage());
}

TEST_CASE("combine is associative within tolerance") {
    Rng rng(55);
    Intermediates irs[3] = {
        extract(trained_on(Chunk{random_matrix(rng, 6, 5), random_matrix(rng, 6, 2)})),
        extract(trained_on(Chunk{random_matrix(rng, 7, 5), random_matrix(rng, 7, 2)})),
        extract(trained_on(Chunk{random_matrix(rng, 8, 5), random_matrix(rng, 8, 2)}))};
    const Intermediates left = combine(combine(irs[0], irs[1]), irs[2]);
    const Intermediates right = combine(irs[0], combine(irs[1], irs[2]));
    CHECK(max_abs_diff(left.u, right.u) < 1e-12);
    CHECK(max_abs_diff(left.v, right.v) < 1e-12);
}

TEST_CASE("merge equivalence: combine matches batch training on the union") {
    Rng rng(56);
    const Chunk d1{random_matrix(rng, 10, 5), random_matrix(rng, 10, 2)};
    const Chunk d2{random_matrix(rng, 12, 5), random_matrix(rng, 12, 2)};
    const SlfnModel merged = rebuild(combine(extract(trained_on(d1)), extract(trained_on(d2))));
    const SlfnModel batch =
        train_batch(init_model(kTopo), Chunk{stack(d1.x, d2.x), stack(d1.t, d2.t)});
    CHECK(relative_frobenius_diff(batch.beta, merged.beta) < 1e-7);
}

TEST_CASE("combine rejects mismatched seeds") {
    Rng rng(57);
    const Chunk c{random_matrix(rng, 6, 5), random_matrix(rng, 6, 2)};
    Topology other = kTopo;
    other.init_seed = 51;
    const Intermediates a = extract(trained_on(c));
    const Intermediates b = extract(init_sequential(init_model(other), c));
    CHECK_THROWS_WITH_AS(combine(a, b), doctest::Contains("50"), IncompatibilityError);
    CHECK_THROWS_WITH_AS(combine(a, b), doctest::Contains("51"), IncompatibilityError);
}

TEST_CASE("subtract undoes combine") {
    Rng rng(58);
    const Intermediates a =
        extract(trained_on(Chunk{random_matrix(rng, 6, 5), random_matrix(rng, 6, 2)}));
    const Intermediates b =
        extract(trained_on(Chunk{random_matrix(rng, 9, 5), random_matrix(rng, 9, 2)}));
    const Intermediates diff = subtract(combine(a, b), b);
    CHECK(max_abs_diff(diff.u, a.u) < 1e-9);
    CHECK(max_abs_diff(diff.v, a.v) < 1e-9);

    const Intermediates zero = subtract(a, a);
    for (double v : zero.u.storage()) CHECK(v == 0.0);
    for (double v : zero.v.storage()) CHECK(v == 0.0);
}

TEST_CASE("subtract then rebuild recovers the single-device model") {
    Rng rng(59);
    const Chunk d1{random_matrix(rng, 10, 5), random_matrix(rng, 10, 2)};
    const Chunk d2{random_matrix(rng, 11, 5), random_matrix(rng, 11, 2)};
    const Intermediates a = extract(trained_on(d1));
    const Intermediates b = extract(trained_on(d2));
    const SlfnModel recovered = rebuild(subtract(combine(a, b), b));
    const SlfnModel direct = train_batch(init_model(kTopo), d1);
    CHECK(relative_frobenius_diff(direct.beta, recovered.beta) < 1e-7);
}

TEST_CASE("rebuild with identity U returns V as beta") {
    Rng rng(60);
    Intermediates ir = zero_intermediates(kTopo);
    ir.u = Matrix::identity(3);
    ir.v = random_matrix(rng, 3, 2);
    const SlfnModel m = rebuild(ir);
    CHECK(max_abs_diff(m.beta, ir.v) < 1e-12);
}

TEST_CASE("rebuilt model continues sequential training correctly") {
    Rng rng(61);
    const Chunk d1{random_matrix(rng, 9, 5), random_matrix(rng, 9, 2)};
    const Chunk d2{random_matrix(rng, 8, 5), random_matrix(rng, 8, 2)};
    const Chunk d3{random_matrix(rng, 1, 5), random_matrix(rng, 1, 2)};
    SlfnModel merged = rebuild(combine(extract(trained_on(d1)), extract(trained_on(d2))));
    merged = update(merged, d3);
    const SlfnModel batch = train_batch(
        init_model(kTopo), Chunk{stack(stack(d1.x, d2.x), d3.x), stack(stack(d1.t, d2.t), d3.t)});
    CHECK(relative_frobenius_diff(batch.beta, merged.beta) < 1e-7);
}

TEST_CASE("rebuild of a singular U names the remedy") {
    Intermediates ir = zero_intermediates(kTopo);
    CHECK_THROWS_WITH_AS(rebuild(ir), doctest::Contains("ridge"), SingularityError);
}

TEST_CASE("intermediate U is symmetric positive semi-definite") {
    Rng rng(62);
    const Intermediates ir =
        extract(trained_on(Chunk{random_matrix(rng, 10, 5), random_matrix(rng, 10, 2)}));
    CHECK(is_symmetric(ir.u, 1e-8));
    CHECK_NOTHROW(cholesky(ir.u));
}
