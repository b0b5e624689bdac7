#include <cmath>

#include "doctest.h"

#include "prism/checkpoint.hpp"
#include "prism/model.hpp"
#include "prism/rng.hpp"
#include "oracles.hpp"

using namespace prism;

namespace {

PrismConfig small_config(Index l, Index t, Index m, Index k)
{
    PrismConfig c;
    c.input_length = l;
    c.horizon = t;
    c.trend_count = m;
    c.season_count = k;
    c.scenarios = m * k;
    c.kernel = 3;
    return c;
}

PrismParams random_params(const PrismConfig& c, Rng& rng)
{
    PrismParams p = PrismParams::zeros(c);
    for (std::size_t b = 0; b < p.block_count(); ++b) {
        for (Index i = 0; i < p.block(b).size(); ++i) p.block(b)(i) = rng.normal(0, 0.5);
    }
    return p;
}

} // namespace

TEST_CASE("factorize_n")
{
    CHECK(factorize_n(625) == std::pair<Index, Index>{25, 25});
    CHECK(factorize_n(1) == std::pair<Index, Index>{1, 1});
    CHECK(factorize_n(12) == std::pair<Index, Index>{3, 4});
    CHECK(factorize_n(7) == std::pair<Index, Index>{1, 7});
    CHECK(factorize_n(4) == std::pair<Index, Index>{2, 2});
    CHECK_THROWS_AS(factorize_n(0), ConfigError);
}

TEST_CASE("config defaults and validation")
{
    const PrismConfig c;
    CHECK(c.scenarios == 625);
    CHECK(c.trend_count == 25);
    CHECK(c.season_count == 25);
    CHECK(c.kernel == 7);
    CHECK(c.epsilon == 0.01);
    CHECK(c.lambda == 1.0);
    CHECK(c.input_length == c.horizon);
    CHECK_NOTHROW(c.validate());

    PrismConfig bad = c;
    bad.scenarios = 600;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.kernel = 4;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.epsilon = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(PrismConfig::with_scenarios(8, 6, 12).trend_count == 3);
}

TEST_CASE("init_params")
{
    const PrismConfig c = small_config(9, 4, 2, 3);
    const PrismParams a = init_params(c, 7);
    const PrismParams b = init_params(c, 7);
    const PrismParams other = init_params(c, 8);
    bool differs = false;
    const double bound = 1.0 / 3.0;
    for (std::size_t i = 0; i < a.block_count(); ++i) {
        CHECK(a.block(i) == b.block(i));
        differs = differs || a.block(i) != other.block(i);
        if (a.block_name(i).ends_with("weight")) {
            CHECK(a.block(i).cwiseAbs().maxCoeff() <= bound);
        } else {
            CHECK((a.block(i).array() == 0.0).all());
        }
    }
    CHECK(differs);
    CHECK(a.trend_weight.rows() == 8);
    CHECK(a.season_weight.rows() == 12);
    CHECK(a.prob_weight.rows() == 6);
    CHECK(a.parameter_count() == 8 * 9 + 8 + 12 * 9 + 12 + 6 * 9 + 6);
}

TEST_CASE("combine_scenarios")
{
    Matrix t1(1, 1), s1(1, 1);
    t1 << 0;
    s1 << 5;
    CHECK(combine_scenarios(t1, s1)(0, 0) == 5);

    Matrix trend(2, 1), season(3, 1), expected(6, 1);
    trend << 1, 2;
    season << 10, 20, 30;
    expected << 11, 21, 31, 12, 22, 32;
    CHECK(combine_scenarios(trend, season) == expected);

    Rng rng(4);
    for (Index m = 1; m <= 4; ++m) {
        for (Index k = 1; k <= 4; ++k) {
            const Matrix tr = oracle::random_matrix(rng, m, 3);
            const Matrix se = oracle::random_matrix(rng, k, 3);
            const Matrix out = combine_scenarios(tr, se);
            for (Index i = 0; i < m; ++i) {
                for (Index j = 0; j < k; ++j) {
                    CHECK(out.row(i * k + j) == tr.row(i) + se.row(j));
                }
            }
            const Matrix repeated = combine_scenarios(tr, Matrix::Zero(k, 3));
            for (Index i = 0; i < m * k; ++i) CHECK(repeated.row(i) == tr.row(i / k));
        }
    }
}

TEST_CASE("forward hand trace")
{
    PrismConfig c = small_config(1, 1, 1, 1);
    c.kernel = 1;
    PrismParams p = PrismParams::zeros(c);
    p.trend_weight(0, 0) = 2;
    p.season_weight(0, 0) = 3;
    Matrix history(1, 1);
    history << 1;
    const ScenarioForecast fc = forward(p, c, history, Scaler::identity(1));
    CHECK(fc.scenarios(0, 0, 0) == 2);
    CHECK(fc.probabilities(0, 0) == 1);
}

TEST_CASE("forward scenario indexing and zero model")
{
    const PrismConfig c = small_config(4, 3, 2, 3);
    Rng rng(1);
    const PrismParams p = random_params(c, rng);
    const Matrix history = oracle::random_matrix(rng, 4, 2);
    const ForwardTrace tr = forward_trace(p, c, history, Scaler::identity(2));
    const auto& fc = tr.forecast;
    CHECK(fc.scenarios.count() == 6);
    for (Index d = 0; d < 2; ++d) {
        for (Index t = 0; t < 3; ++t) {
            // n = 5 = m 1, k 2
            CHECK(std::abs(fc.scenarios(5, t, d) - (tr.trend_out(1 * 3 + t, d) + tr.season_out(2 * 3 + t, d))) < 1e-15);
        }
    }

    const ScenarioForecast zero = forward(PrismParams::zeros(c), c, history, Scaler::identity(2));
    for (Index d = 0; d < 2; ++d) {
        CHECK((zero.scenarios.channel(d).array() == 0.0).all());
        CHECK(((zero.probabilities.col(d).array() - 1.0 / 6.0).abs() < 1e-15).all());
    }
}

TEST_CASE("forward properties")
{
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const Index l = 1 + static_cast<Index>(rng.below(6));
        const Index t = 1 + static_cast<Index>(rng.below(4));
        const Index m = 1 + static_cast<Index>(rng.below(3));
        const Index k = 1 + static_cast<Index>(rng.below(3));
        const Index d = 1 + static_cast<Index>(rng.below(4));
        const PrismConfig c = small_config(l, t, m, k);
        const PrismParams p = random_params(c, rng);
        const Matrix history = oracle::random_matrix(rng, l, d, 3.0);
        const Scaler scaler = fit_scaler(history, ScalerKind::mean_std);
        const ScenarioForecast fc = forward(p, c, history, scaler);
        for (Index ch = 0; ch < d; ++ch) {
            CHECK(std::abs(fc.probabilities.col(ch).sum() - 1.0) < 1e-9);
        }

        // Purity: identical inputs, identical bits.
        const ScenarioForecast again = forward(p, c, history, scaler);
        CHECK(again.logits == fc.logits);
        for (Index ch = 0; ch < d; ++ch) CHECK(again.scenarios.channel(ch) == fc.scenarios.channel(ch));

        // Channel equivariance: reverse the channels.
        const Matrix flipped = history.rowwise().reverse();
        const ScenarioForecast ff = forward(p, c, flipped, fit_scaler(flipped, ScalerKind::mean_std));
        for (Index ch = 0; ch < d; ++ch) {
            CHECK((ff.scenarios.channel(d - 1 - ch) - fc.scenarios.channel(ch)).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((ff.probabilities.col(d - 1 - ch) - fc.probabilities.col(ch)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    // M = K = 1 is a single deterministic forecast.
    const PrismConfig one = small_config(3, 2, 1, 1);
    const PrismParams p = random_params(one, rng);
    const ScenarioForecast fc = forward(p, one, oracle::random_matrix(rng, 3, 2), Scaler::identity(2));
    CHECK(fc.scenarios.count() == 1);
    CHECK((fc.probabilities.array() == 1.0).all());
}

TEST_CASE("forward errors")
{
    const PrismConfig c = small_config(4, 2, 1, 2);
    const PrismParams p = PrismParams::zeros(c);
    CHECK_THROWS_AS(forward(p, c, Matrix::Zero(3, 1), Scaler::identity(1)), ShapeError);
    CHECK_THROWS_AS(forward(PrismParams::zeros(small_config(5, 2, 1, 2)), c, Matrix::Zero(4, 1),
                            Scaler::identity(1)),
                    ShapeError);
    PrismParams huge = p;
    huge.prob_bias(0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(forward(huge, c, Matrix::Zero(4, 1), Scaler::identity(1)), NumericError);
}

TEST_CASE("original-space output inverts the scaler")
{
    const PrismConfig c = small_config(4, 2, 2, 2);
    Rng rng(12);
    const PrismParams p = random_params(c, rng);
    Matrix history = oracle::random_matrix(rng, 4, 2);
    history.array() += 10.0;
    const Scaler s = fit_scaler(history, ScalerKind::mean_std);
    const ScenarioForecast scaled = forward(p, c, history, s);
    const ScenarioForecast original = forward(p, c, history, s, OutputSpace::original);
    CHECK(original.probabilities == scaled.probabilities);
    for (Index n = 0; n < 4; ++n) {
        const Matrix expect = invert_scaler(s, scaled.scenarios.scenario(n));
        CHECK((original.scenarios.scenario(n) - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("checkpoint round trip")
{
    PrismConfig c = small_config(3, 2, 2, 3);
    c.scaler_kind = ScalerKind::mean_std;
    c.epsilon = 0.05;
    const Checkpoint ck{c, {"a", "b"}, init_params(c, 3)};
    const std::string text = checkpoint_json(ck);
    const Checkpoint back = parse_checkpoint(text);
    CHECK(back.config.scenarios == 6);
    CHECK(back.config.scaler_kind == ScalerKind::mean_std);
    CHECK(back.config.epsilon == 0.05);
    CHECK(back.channel_names == ck.channel_names);
    for (std::size_t b = 0; b < 6; ++b) CHECK(back.params.block(b) == ck.params.block(b));
    CHECK(checkpoint_json(back) == text);

    CHECK_THROWS(parse_checkpoint(R"({"format":"other"})"));
    nlohmann::json doc = nlohmann::json::parse(text);
    doc["blocks"]["trend_weight"]["shape"] = {1, 1};
    CHECK_THROWS(parse_checkpoint(doc.dump()));
}

TEST_CASE("config json")
{
    const PrismConfig c = config_from_json(nlohmann::json::parse(R"({"scenarios":12,"horizon":5})"));
    CHECK(c.trend_count == 3);
    CHECK(c.season_count == 4);
    CHECK(c.input_length == 5);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"bogus":1})")), ConfigError);
}
