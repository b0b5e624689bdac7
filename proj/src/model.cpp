#include "prism/model.hpp"

#include <cmath>
#include <string>

#include "prism/rng.hpp"

namespace prism {

namespace {

void check_block(const Eigen::Ref<const Matrix>& m, Index rows, Index cols, std::string_view name)
{
    if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError("PrismParams: " + std::string(name) + " is " +
                         detail::shape_str(m.rows(), m.cols()) + ", expected " +
                         detail::shape_str(rows, cols));
    }
}

/// Rows [block*T, (block+1)*T) of `column`, laid out as row `block` of an [B x T] set.
Matrix reshape_blocks(const Eigen::Ref<const Vector>& column, Index blocks, Index horizon)
{
    Matrix set(blocks, horizon);
    for (Index b = 0; b < blocks; ++b) {
        set.row(b) = column.segment(b * horizon, horizon).transpose();
    }
    return set;
}

} // namespace

std::pair<Index, Index> factorize_n(Index scenarios)
{
    if (scenarios < 1) {
        throw ConfigError("scenario count must be at least 1");
    }
    Index best = 1;
    for (Index m = 1; m * m <= scenarios; ++m) {
        if (scenarios % m == 0) {
            best = m;
        }
    }
    return {best, scenarios / best};
}

PrismConfig PrismConfig::with_scenarios(Index input_length, Index horizon, Index scenarios)
{
    PrismConfig c;
    c.input_length = input_length;
    c.horizon = horizon;
    c.scenarios = scenarios;
    std::tie(c.trend_count, c.season_count) = factorize_n(scenarios);
    return c;
}

void PrismConfig::validate() const
{
    if (input_length < 1 || horizon < 1) {
        throw ConfigError("input_length and horizon must be at least 1");
    }
    if (trend_count < 1 || season_count < 1 || scenarios != trend_count * season_count) {
        throw ConfigError("scenarios must equal trend_count * season_count (" +
                          std::to_string(scenarios) + " != " + std::to_string(trend_count) + " * " +
                          std::to_string(season_count) + ")");
    }
    validate_kernel(kernel);
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw ConfigError("epsilon must lie in [0, 1)");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("lambda must be finite and nonnegative");
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

PrismParams PrismParams::zeros(const PrismConfig& config)
{
    config.validate();
    const Index L = config.input_length;
    const Index T = config.horizon;
    PrismParams p;
    p.trend_weight = Matrix::Zero(config.trend_count * T, L);
    p.trend_bias = Vector::Zero(config.trend_count * T);
    p.season_weight = Matrix::Zero(config.season_count * T, L);
    p.season_bias = Vector::Zero(config.season_count * T);
    p.prob_weight = Matrix::Zero(config.scenarios, L);
    p.prob_bias = Vector::Zero(config.scenarios);
    return p;
}

Eigen::Map<Vector> PrismParams::block(std::size_t i)
{
    switch (i) {
    case 0: return {trend_weight.data(), trend_weight.size()};
    case 1: return {trend_bias.data(), trend_bias.size()};
    case 2: return {season_weight.data(), season_weight.size()};
    case 3: return {season_bias.data(), season_bias.size()};
    case 4: return {prob_weight.data(), prob_weight.size()};
    case 5: return {prob_bias.data(), prob_bias.size()};
    default: throw std::out_of_range("PrismParams::block");
    }
}

Eigen::Map<const Vector> PrismParams::block(std::size_t i) const
{
    switch (i) {
    case 0: return {trend_weight.data(), trend_weight.size()};
    case 1: return {trend_bias.data(), trend_bias.size()};
    case 2: return {season_weight.data(), season_weight.size()};
    case 3: return {season_bias.data(), season_bias.size()};
    case 4: return {prob_weight.data(), prob_weight.size()};
    case 5: return {prob_bias.data(), prob_bias.size()};
    default: throw std::out_of_range("PrismParams::block");
    }
}

void PrismParams::check(const PrismConfig& config) const
{
    const Index L = config.input_length;
    const Index T = config.horizon;
    check_block(trend_weight, config.trend_count * T, L, "trend_weight");
    check_block(trend_bias, config.trend_count * T, 1, "trend_bias");
    check_block(season_weight, config.season_count * T, L, "season_weight");
    check_block(season_bias, config.season_count * T, 1, "season_bias");
    check_block(prob_weight, config.scenarios, L, "prob_weight");
    check_block(prob_bias, config.scenarios, 1, "prob_bias");
    for (std::size_t b = 0; b < block_count(); ++b) {
        require_finite(block(b), "PrismParams " + std::string(block_name(b)));
    }
}

Index PrismParams::parameter_count() const
{
    Index total = 0;
    for (std::size_t b = 0; b < block_count(); ++b) {
        total += block(b).size();
    }
    return total;
}

PrismParams init_params(const PrismConfig& config, std::uint64_t seed)
{
    PrismParams p = PrismParams::zeros(config);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.input_length));
    for (Matrix* w : {&p.trend_weight, &p.season_weight, &p.prob_weight}) {
        for (Index r = 0; r < w->rows(); ++r) {
            for (Index c = 0; c < w->cols(); ++c) {
                (*w)(r, c) = rng.uniform(-bound, bound);
            }
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Scenario tensor
// ---------------------------------------------------------------------------

ScenarioTensor::ScenarioTensor(Index count, Index horizon, Index channels)
    : channels_(static_cast<std::size_t>(channels), Matrix::Zero(count, horizon)),
      count_(count),
      horizon_(horizon)
{
}

ScenarioTensor::ScenarioTensor(std::vector<Matrix> per_channel) : channels_(std::move(per_channel))
{
    if (channels_.empty()) {
        throw ShapeError("ScenarioTensor: at least one channel required");
    }
    count_ = channels_.front().rows();
    horizon_ = channels_.front().cols();
    for (const auto& m : channels_) {
        if (m.rows() != count_ || m.cols() != horizon_) {
            throw ShapeError("ScenarioTensor: channel matrices must share [N x T]");
        }
    }
}

Matrix ScenarioTensor::scenario(Index n) const
{
    Matrix out(horizon_, channels());
    for (Index d = 0; d < channels(); ++d) {
        out.col(d) = channel(d).row(n).transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

Matrix combine_scenarios(const Matrix& trend_set, const Matrix& season_set)
{
    if (trend_set.cols() != season_set.cols()) {
        throw ShapeError("combine_scenarios: trend and season horizons differ");
    }
    const Index M = trend_set.rows();
    const Index K = season_set.rows();
    Matrix out(M * K, trend_set.cols());
    for (Index m = 0; m < M; ++m) {
        for (Index k = 0; k < K; ++k) {
            out.row(m * K + k) = trend_set.row(m) + season_set.row(k);
        }
    }
    return out;
}

ForwardTrace forward_trace(const PrismParams& params, const PrismConfig& config,
                           const Matrix& history, const Scaler& scaler)
{
    config.validate();
    params.check(config);
    if (history.rows() != config.input_length || history.cols() < 1) {
        throw ShapeError("forward: history is " + detail::shape_str(history.rows(), history.cols()) +
                         ", expected " + std::to_string(config.input_length) + " rows");
    }
    require_finite(history, "forward: history");

    const Index T = config.horizon;
    const Index D = history.cols();

    ForwardTrace trace;
    trace.scaled_history = apply_scaler(scaler, history);
    trace.components = decompose(trace.scaled_history, config.kernel);
    trace.trend_out = affine_columns(params.trend_weight, params.trend_bias, trace.components.trend);
    trace.season_out =
        affine_columns(params.season_weight, params.season_bias, trace.components.season);

    std::vector<Matrix> per_channel;
    per_channel.reserve(static_cast<std::size_t>(D));
    for (Index d = 0; d < D; ++d) {
        per_channel.push_back(
            combine_scenarios(reshape_blocks(trace.trend_out.col(d), config.trend_count, T),
                              reshape_blocks(trace.season_out.col(d), config.season_count, T)));
    }
    auto& fc = trace.forecast;
    fc.scenarios = ScenarioTensor(std::move(per_channel));
    fc.logits = affine_columns(params.prob_weight, params.prob_bias, trace.scaled_history);
    fc.probabilities = softmax_columns(fc.logits);

    for (Index d = 0; d < D; ++d) {
        require_finite(fc.scenarios.channel(d), "forward: scenarios");
    }
    require_finite(fc.probabilities, "forward: probabilities");
    return trace;
}

ScenarioForecast forward(const PrismParams& params, const PrismConfig& config,
                         const Matrix& history, const Scaler& scaler, OutputSpace space)
{
    ScenarioForecast fc = forward_trace(params, config, history, scaler).forecast;
    if (space == OutputSpace::original) {
        fc.scenarios = invert_scenarios(scaler, fc.scenarios);
    }
    return fc;
}

ScenarioTensor invert_scenarios(const Scaler& scaler, const ScenarioTensor& scenarios)
{
    if (scaler.channels() != scenarios.channels()) {
        throw ShapeError("invert_scenarios: scaler/scenario channel counts differ");
    }
    ScenarioTensor out = scenarios;
    for (Index d = 0; d < scenarios.channels(); ++d) {
        out.channel(d) = (scenarios.channel(d).array() * scaler.scale(d) + scaler.location(d)).matrix();
    }
    return out;
}

} // namespace prism
