#include <cmath>
#include <vector>

#include "doctest.h"

#include "prism/core_math.hpp"
#include "prism/rng.hpp"

using namespace prism;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) {
        out(i++) = x;
    }
    return out;
}

// One block of scalars, enough to drive adam_step in isolation.
struct Flat {
    std::vector<Vector> blocks;
    std::size_t block_count() const { return blocks.size(); }
    Eigen::Map<Vector> block(std::size_t i) { return {blocks[i].data(), blocks[i].size()}; }
    Eigen::Map<const Vector> block(std::size_t i) const
    {
        return {blocks[i].data(), blocks[i].size()};
    }
    std::string_view block_name(std::size_t i) const { return i == 0 ? "first" : "second"; }
};
static_assert(ParameterSet<Flat>);

} // namespace

TEST_CASE("affine")
{
    CHECK(affine(Matrix::Identity(2, 2), Vector::Zero(2), vec({1, 2})) == vec({1, 2}));
    CHECK(affine(Matrix::Zero(1, 4), vec({3}), vec({9, -1, 2, 5})) == vec({3}));
    CHECK(affine(matrix_from_rows({{1, 1}, {1, -1}}), Vector::Zero(2), vec({2, 3})) == vec({5, -1}));
    CHECK_THROWS_AS(affine(Matrix::Zero(2, 3), Vector::Zero(2), vec({1, 2})), ShapeError);
    CHECK_THROWS_AS(affine(Matrix::Zero(2, 2), Vector::Zero(3), vec({1, 2})), ShapeError);
}

TEST_CASE("affine is linear")
{
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const Index out = 1 + static_cast<Index>(rng.below(6));
        const Index in = 1 + static_cast<Index>(rng.below(6));
        Matrix w(out, in);
        Vector b(out), x(in), y(in);
        for (Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
        for (Index i = 0; i < out; ++i) b(i) = rng.normal();
        for (Index i = 0; i < in; ++i) {
            x(i) = rng.normal();
            y(i) = rng.normal();
        }
        const double alpha = rng.normal();
        const double beta = rng.normal();
        const Vector lhs = affine(w, b, (alpha * x + beta * y).eval());
        const Vector zero = Vector::Zero(out);
        const Vector rhs = alpha * affine(w, zero, x) + beta * affine(w, zero, y) + b;
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("softmax examples")
{
    const Vector half = softmax(vec({0, 0}));
    CHECK(half(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(half(1) == doctest::Approx(0.5).epsilon(1e-15));

    const Vector p = softmax(vec({std::log(1.0), std::log(3.0)}));
    CHECK(std::abs(p(0) - 0.25) < 1e-15);
    CHECK(std::abs(p(1) - 0.75) < 1e-15);

    CHECK_THROWS_AS(softmax(Vector(0)), ShapeError);

    // No overflow for huge logits.
    const Vector big = softmax(vec({1000, 1000}));
    CHECK(std::abs(big(0) - 0.5) < 1e-15);
}

TEST_CASE("softmax sums to one and is shift invariant")
{
    Rng rng(5);
    for (const Index n : {Index{1}, Index{2}, Index{7}, Index{100}, Index{10000}}) {
        for (int trial = 0; trial < 5; ++trial) {
            Vector logits(n);
            for (Index i = 0; i < n; ++i) logits(i) = 10.0 * rng.normal();
            const Vector p = softmax(logits);
            CHECK(std::abs(p.sum() - 1.0) < 1e-12);
            CHECK((p.array() >= 0).all());

            const double shift = rng.uniform(-50, 50);
            const Vector shifted = softmax((logits.array() + shift).matrix().eval());
            CHECK((p - shifted).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("log_softmax agrees with log of softmax")
{
    const Vector logits = vec({0.3, -1.2, 2.5});
    const Vector a = log_softmax(logits);
    const Vector b = softmax(logits).array().log().matrix();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("weighted_quantile examples")
{
    CHECK(weighted_quantile(vec({7}), vec({1}), 0.5) == 7);
    CHECK(weighted_quantile(vec({1, 3}), vec({0.5, 0.5}), 0.5) == 1);
    CHECK(weighted_quantile(vec({1, 2, 3}), vec({0.2, 0.3, 0.5}), 0.5) == 2);
    // Order of the inputs does not matter.
    CHECK(weighted_quantile(vec({3, 1, 2}), vec({0.5, 0.2, 0.3}), 0.5) == 2);
    CHECK_THROWS_AS(weighted_quantile(vec({1, 2}), vec({0.5, 0.4}), 0.5), ValidationError);
    CHECK_THROWS_AS(weighted_quantile(vec({1, 2}), vec({1.5, -0.5}), 0.5), ValidationError);
}

TEST_CASE("weighted_quantile with uniform weights is the lower empirical quantile")
{
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 1 + static_cast<Index>(rng.below(40));
        Vector values(n);
        for (Index i = 0; i < n; ++i) values(i) = std::round(rng.normal() * 4.0);
        const Vector weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
        const double q = rng.uniform();
        std::vector<double> sorted(values.data(), values.data() + n);
        std::sort(sorted.begin(), sorted.end());
        // Lower empirical quantile: the ceil(q n)-th order statistic (first for q = 0).
        const auto rank = std::max<Index>(1, static_cast<Index>(std::ceil(q * static_cast<double>(n) - 1e-9)));
        CHECK(weighted_quantile(values, weights, q) == sorted[static_cast<std::size_t>(rank - 1)]);
    }
}

TEST_CASE("adam first step")
{
    Flat theta{{vec({0.0})}};
    const Flat grad{{vec({1.0})}};
    AdamState state = AdamState::for_params(theta, 1e-3);
    CHECK(state.beta1 == 0.9);
    CHECK(state.beta2 == 0.999);
    CHECK(state.epsilon == 1e-8);
    adam_step(theta, grad, state);
    CHECK(state.step_count == 1);
    // m_hat = 1, v_hat = 1 => theta = -lr / (1 + eps).
    CHECK(std::abs(theta.blocks[0](0) + 1e-3 / (1.0 + 1e-8)) < 1e-18);
}

TEST_CASE("adam moves monotonically against the gradient sign")
{
    Flat theta{{vec({0.0, 0.0})}};
    const Flat grad{{vec({2.0, -0.5})}};
    AdamState state = AdamState::for_params(theta, 1e-2);
    adam_step(theta, grad, state);
    const Vector after_one = theta.blocks[0];
    adam_step(theta, grad, state);
    const Vector after_two = theta.blocks[0];
    CHECK(after_one(0) < 0.0);
    CHECK(after_two(0) < after_one(0));
    CHECK(after_one(1) > 0.0);
    CHECK(after_two(1) > after_one(1));
    // Both steps have magnitude ~lr under constant gradients.
    CHECK(std::abs(after_two(0) + 2e-2) < 1e-8);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged")
{
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Flat theta{{Vector::Random(5), Vector::Random(3)}};
        const Flat zero{{Vector::Zero(5), Vector::Zero(3)}};
        const Flat before = theta;
        AdamState state = AdamState::for_params(theta, rng.uniform(1e-5, 1.0));
        state.beta1 = rng.uniform(0.01, 0.99);
        state.beta2 = rng.uniform(0.01, 0.999);
        state.epsilon = rng.uniform(1e-12, 1e-3);
        state.step_count = static_cast<std::uint64_t>(rng.below(1000));
        const auto steps = state.step_count;
        adam_step(theta, zero, state);
        CHECK(state.step_count == steps + 1);
        CHECK(theta.blocks[0] == before.blocks[0]);
        CHECK(theta.blocks[1] == before.blocks[1]);
    }
}

TEST_CASE("adam errors")
{
    Flat theta{{vec({0.0, 1.0}), vec({2.0})}};
    AdamState state = AdamState::for_params(theta, 1e-3);
    const Flat short_grad{{vec({1.0}), vec({1.0})}};
    CHECK_THROWS_AS(adam_step(theta, short_grad, state), ShapeError);

    const Flat bad{{vec({0.0, 0.0}), vec({std::nan("")})}};
    try {
        adam_step(theta, bad, state);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("second") != std::string::npos);
    }
    CHECK(state.step_count == 0);
}

TEST_CASE("rng is reproducible and in range")
{
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(c.below(7) < 7);
    }
    CHECK(derive_seed(0, seed_stream::init) != derive_seed(0, seed_stream::shuffle));
}
