#include "prism/loss.hpp"

#include <cmath>
#include <string>

namespace prism {

namespace {

void check_gt(const ScenarioTensor& scenarios, const Matrix& gt)
{
    if (gt.rows() != scenarios.horizon() || gt.cols() != scenarios.channels()) {
        throw ShapeError("loss: ground truth is " + detail::shape_str(gt.rows(), gt.cols()) +
                         ", scenarios are [N x " + std::to_string(scenarios.horizon()) + " x " +
                         std::to_string(scenarios.channels()) + "]");
    }
}

Matrix scaled_future(const Window& window, const Scaler& scaler)
{
    return apply_scaler(scaler, window.future);
}

} // namespace

Index winner_index(const Matrix& scenarios, const Eigen::Ref<const Vector>& gt)
{
    if (scenarios.rows() < 1 || scenarios.cols() != gt.size()) {
        throw ShapeError("winner_index: scenarios " +
                         detail::shape_str(scenarios.rows(), scenarios.cols()) +
                         " do not match ground truth of length " + std::to_string(gt.size()));
    }
    Index best = 0;
    double best_sse = (scenarios.row(0).transpose() - gt).squaredNorm();
    for (Index n = 1; n < scenarios.rows(); ++n) {
        const double sse = (scenarios.row(n).transpose() - gt).squaredNorm();
        if (sse < best_sse) {
            best_sse = sse;
            best = n;
        }
    }
    return best;
}

Matrix scenario_sse(const ScenarioTensor& scenarios, const Matrix& gt)
{
    check_gt(scenarios, gt);
    Matrix sse(scenarios.count(), scenarios.channels());
    for (Index d = 0; d < scenarios.channels(); ++d) {
        sse.col(d) = (scenarios.channel(d).rowwise() - gt.col(d).transpose()).rowwise().squaredNorm();
    }
    return sse;
}

Vector relaxed_weights(Index count, Index winner, double epsilon)
{
    if (count == 1) {
        return Vector::Ones(1);
    }
    Vector w = Vector::Constant(count, epsilon / static_cast<double>(count - 1));
    w(winner) = 1.0 - epsilon;
    return w;
}

ReconLoss recon_loss(const ScenarioForecast& forecast, const Matrix& gt, double epsilon)
{
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw ConfigError("recon_loss: epsilon must lie in [0, 1)");
    }
    const auto& scenarios = forecast.scenarios;
    check_gt(scenarios, gt);
    const Index N = scenarios.count();
    const Index D = scenarios.channels();

    ReconLoss out;
    out.winners.resize(static_cast<std::size_t>(D));
    for (Index d = 0; d < D; ++d) {
        const Vector sse =
            (scenarios.channel(d).rowwise() - gt.col(d).transpose()).rowwise().squaredNorm();
        const Index winner = winner_index(scenarios.channel(d), gt.col(d));
        out.winners[static_cast<std::size_t>(d)] = winner;
        out.value += relaxed_weights(N, winner, epsilon).dot(sse);
    }
    out.value /= static_cast<double>(D);
    return out;
}

double prob_loss(const Matrix& logits, std::span<const Index> winners)
{
    if (static_cast<Index>(winners.size()) != logits.cols() || logits.rows() < 1) {
        throw ShapeError("prob_loss: one winner per logits column required");
    }
    double total = 0.0;
    for (Index d = 0; d < logits.cols(); ++d) {
        const Index w = winners[static_cast<std::size_t>(d)];
        if (w < 0 || w >= logits.rows()) {
            throw ShapeError("prob_loss: winner index " + std::to_string(w) + " out of range");
        }
        total += neg_log_softmax_at(logits.col(d), w);
    }
    return total / static_cast<double>(logits.cols());
}

LossBreakdown window_loss(const PrismParams& params, const PrismConfig& config,
                          const Window& window, const Scaler& scaler)
{
    const ScenarioForecast fc = forward(params, config, window.history, scaler);
    auto recon = recon_loss(fc, scaled_future(window, scaler), config.epsilon);
    LossBreakdown out;
    out.recon = recon.value;
    out.prob = prob_loss(fc.logits, recon.winners);
    out.total = out.recon + config.lambda * out.prob;
    out.winners = std::move(recon.winners);
    return out;
}

LossGradient backward(const PrismParams& params, const PrismConfig& config, const Window& window,
                      const Scaler& scaler)
{
    const ForwardTrace trace = forward_trace(params, config, window.history, scaler);
    const ScenarioForecast& fc = trace.forecast;
    const Matrix gt = scaled_future(window, scaler);
    check_gt(fc.scenarios, gt);

    const Index T = config.horizon;
    const Index M = config.trend_count;
    const Index K = config.season_count;
    const Index N = config.scenarios;
    const Index D = window.history.cols();
    const double inv_d = 1.0 / static_cast<double>(D);

    LossGradient out;
    auto& loss = out.loss;
    loss.winners.resize(static_cast<std::size_t>(D));

    // Upstream gradients at the trend/season outputs and the logits.
    Matrix g_trend = Matrix::Zero(M * T, D);
    Matrix g_season = Matrix::Zero(K * T, D);
    Matrix g_logits(N, D);

    for (Index d = 0; d < D; ++d) {
        const Matrix& y = fc.scenarios.channel(d);
        const Matrix residual = y.rowwise() - gt.col(d).transpose(); // [N x T]
        const Vector sse = residual.rowwise().squaredNorm();
        const Index winner = winner_index(y, gt.col(d));
        loss.winners[static_cast<std::size_t>(d)] = winner;

        const Vector w = relaxed_weights(N, winner, config.epsilon);
        loss.recon += w.dot(sse);

        // dL/dy(n, t) = (2 / D) * w_n * residual(n, t)
        const Matrix g_y = (2.0 * inv_d) * (w.asDiagonal() * residual);
        for (Index m = 0; m < M; ++m) {
            for (Index k = 0; k < K; ++k) {
                const auto row = g_y.row(m * K + k).transpose();
                g_trend.col(d).segment(m * T, T) += row;
                g_season.col(d).segment(k * T, T) += row;
            }
        }

        const auto logits = fc.logits.col(d);
        loss.prob += neg_log_softmax_at(logits, winner);
        g_logits.col(d) = fc.probabilities.col(d);
        g_logits(winner, d) -= 1.0;
    }
    loss.recon *= inv_d;
    loss.prob *= inv_d;
    loss.total = loss.recon + config.lambda * loss.prob;
    g_logits *= config.lambda * inv_d;

    auto& g = out.grad;
    g.trend_weight = g_trend * trace.components.trend.transpose();
    g.trend_bias = g_trend.rowwise().sum();
    g.season_weight = g_season * trace.components.season.transpose();
    g.season_bias = g_season.rowwise().sum();
    g.prob_weight = g_logits * trace.scaled_history.transpose();
    g.prob_bias = g_logits.rowwise().sum();

    for (std::size_t b = 0; b < g.block_count(); ++b) {
        require_finite(g.block(b), "backward: gradient " + std::string(g.block_name(b)));
    }
    if (!std::isfinite(loss.total)) {
        throw NumericError("backward: non-finite loss");
    }
    return out;
}

} // namespace prism
