#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "prism/core_math.hpp"
#include "prism/data.hpp"
#include "prism/decompose.hpp"

namespace prism {

/// Splits N into the factor pair (M, K), M <= K, M * K = N, with |M - K| minimal.
std::pair<Index, Index> factorize_n(Index scenarios);

struct PrismConfig {
    Index input_length = 24;  ///< L
    Index horizon = 24;       ///< T
    Index scenarios = 625;    ///< N = trend_count * season_count
    Index trend_count = 25;   ///< M
    Index season_count = 25;  ///< K
    Index kernel = 7;
    double epsilon = 0.01;    ///< relaxed winner-takes-all weight
    double lambda = 1.0;      ///< probability-loss weight
    ScalerKind scaler_kind = ScalerKind::mean;

    /// Config with N factorized into (M, K).
    static PrismConfig with_scenarios(Index input_length, Index horizon, Index scenarios);

    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

/**
 * The three affine maps. One set serves every channel.
 *
 * trend:  [M*T x L] + [M*T]   block m of the output is trend forecast m
 * season: [K*T x L] + [K*T]   block k of the output is seasonal forecast k
 * prob:   [N x L]   + [N]     logits, one per scenario
 */
struct PrismParams {
    Matrix trend_weight;
    Vector trend_bias;
    Matrix season_weight;
    Vector season_bias;
    Matrix prob_weight;
    Vector prob_bias;

    static constexpr std::array<std::string_view, 6> kBlockNames{
        "trend_weight", "trend_bias", "season_weight", "season_bias", "prob_weight", "prob_bias"};

    static PrismParams zeros(const PrismConfig& config);

    std::size_t block_count() const { return kBlockNames.size(); }
    std::string_view block_name(std::size_t i) const { return kBlockNames.at(i); }
    Eigen::Map<Vector> block(std::size_t i);
    Eigen::Map<const Vector> block(std::size_t i) const;

    /// Throws ShapeError if any block disagrees with `config`, NumericError if
    /// any entry is non-finite.
    void check(const PrismConfig& config) const;

    Index parameter_count() const;
};

static_assert(ParameterSet<PrismParams>);

/// Weights uniform in [-1/sqrt(L), 1/sqrt(L)] drawn block by block in
/// row-major order (trend, season, prob); biases zero.
PrismParams init_params(const PrismConfig& config, std::uint64_t seed);

/// N scenarios stored per channel: channel(d) is an [N x T] matrix whose row n
/// is scenario n for that channel.
class ScenarioTensor {
public:
    ScenarioTensor() = default;
    ScenarioTensor(Index count, Index horizon, Index channels);
    explicit ScenarioTensor(std::vector<Matrix> per_channel);

    Index count() const { return count_; }
    Index horizon() const { return horizon_; }
    Index channels() const { return static_cast<Index>(channels_.size()); }

    const Matrix& channel(Index d) const { return channels_.at(static_cast<std::size_t>(d)); }
    Matrix& channel(Index d) { return channels_.at(static_cast<std::size_t>(d)); }

    double operator()(Index n, Index t, Index d) const { return channel(d)(n, t); }
    double& operator()(Index n, Index t, Index d) { return channel(d)(n, t); }

    /// Scenario n stacked over channels, [T x D].
    Matrix scenario(Index n) const;

private:
    std::vector<Matrix> channels_;
    Index count_ = 0;
    Index horizon_ = 0;
};

struct ScenarioForecast {
    ScenarioTensor scenarios;
    Matrix logits;        ///< [N x D]
    Matrix probabilities; ///< [N x D], softmax of each logits column
};

/// Intermediate values of one forward pass, kept for differentiation.
struct ForwardTrace {
    Matrix scaled_history;            ///< [L x D]
    Decomposition<double> components; ///< trend/season of scaled_history
    Matrix trend_out;                 ///< [M*T x D]
    Matrix season_out;                ///< [K*T x D]
    ScenarioForecast forecast;        ///< scaled space
};

enum class OutputSpace { scaled, original };

/// output row m*K + k = trend_set row m + season_set row k.
Matrix combine_scenarios(const Matrix& trend_set, const Matrix& season_set);

ForwardTrace forward_trace(const PrismParams& params, const PrismConfig& config,
                           const Matrix& history, const Scaler& scaler);

ScenarioForecast forward(const PrismParams& params, const PrismConfig& config,
                         const Matrix& history, const Scaler& scaler,
                         OutputSpace space = OutputSpace::scaled);

/// Maps every scenario back to original units with the inverse of `scaler`.
ScenarioTensor invert_scenarios(const Scaler& scaler, const ScenarioTensor& scenarios);

} // namespace prism
