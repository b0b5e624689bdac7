#pragma once

#include <span>
#include <vector>

#include "prism/data.hpp"
#include "prism/model.hpp"

namespace prism {

struct LossBreakdown {
    double recon = 0.0;
    double prob = 0.0;
    double total = 0.0; ///< recon + lambda * prob
    std::vector<Index> winners; ///< per-channel winning scenario
};

/// argmin_n sum_t (gt[t] - scenarios(n, t))^2; ties go to the lowest index.
Index winner_index(const Matrix& scenarios, const Eigen::Ref<const Vector>& gt);

/// Sum-over-horizon squared errors, [N x D]: entry (n, d) is ||gt_d - y_{n,d}||^2.
Matrix scenario_sse(const ScenarioTensor& scenarios, const Matrix& gt);

/// Weight each scenario receives in the relaxed reconstruction loss of one
/// channel: 1 - epsilon for the winner, epsilon / (N - 1) for the others, and 1
/// when N = 1.
Vector relaxed_weights(Index count, Index winner, double epsilon);

struct ReconLoss {
    double value = 0.0;
    std::vector<Index> winners;
};

/// Mean over channels of the relaxed winner-takes-all loss. gt is [T x D] in
/// the same space as the scenarios.
ReconLoss recon_loss(const ScenarioForecast& forecast, const Matrix& gt, double epsilon);

/// Mean over channels of -log softmax(logits_d)[winner_d].
double prob_loss(const Matrix& logits, std::span<const Index> winners);

/// Loss of one window; the future is scaled with the same scaler as the history.
LossBreakdown window_loss(const PrismParams& params, const PrismConfig& config,
                          const Window& window, const Scaler& scaler);

struct LossGradient {
    LossBreakdown loss;
    PrismParams grad;
};

/**
 * Loss and exact gradient with respect to all six parameter blocks. Winners are
 * constants of the current forward pass, so the gradient is that of the smooth
 * piece of the objective the parameters currently sit on.
 */
LossGradient backward(const PrismParams& params, const PrismConfig& config, const Window& window,
                      const Scaler& scaler);

} // namespace prism
