#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "prism/loss.hpp"
#include "prism/model.hpp"

namespace prism {

struct TrainConfig {
    Index epochs = 200;
    double lr = 1e-3;
    Index batch_size = 100;
    std::uint64_t seed = 0;
    bool shuffle = true;
    Index checkpoint_every = 0; ///< 0 disables periodic validation/checkpoints
    unsigned threads = 1;       ///< per-window gradients inside a batch

    void validate() const;
};

struct EpochRecord {
    Index epoch = 0; ///< 1-based
    double total = 0.0;
    double recon = 0.0;
    double prob = 0.0;
    std::optional<double> validation_crps;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

struct TrainResult {
    PrismParams params;
    TrainHistory history;
};

/// Non-finite loss or gradient during training.
class TrainingError : public NumericError {
public:
    TrainingError(Index epoch, Index batch, const std::string& what);

    Index epoch() const { return epoch_; }
    Index batch() const { return batch_; }

private:
    Index epoch_;
    Index batch_;
};

struct TrainHooks {
    /// Scored every checkpoint_every epochs when set.
    const std::vector<Window>* validation = nullptr;
    /// Called after every epoch with the current parameters.
    std::function<void(const EpochRecord&, const PrismParams&)> on_epoch;
};

/// Mean loss and mean gradient over windows[indices]. Per-window scalers are
/// fitted on each history. The reduction runs in index order regardless of
/// `threads`, so the result does not depend on the thread count.
LossGradient batch_gradient(const PrismParams& params, const PrismConfig& config,
                            const std::vector<Window>& windows, std::span<const std::size_t> indices,
                            unsigned threads = 1);

/// Initializes parameters from tc.seed and trains them.
TrainResult train(const std::vector<Window>& windows, const PrismConfig& config,
                  const TrainConfig& tc, const TrainHooks& hooks = {});

/// Trains starting from `initial`.
TrainResult train_from(PrismParams initial, const std::vector<Window>& windows,
                       const PrismConfig& config, const TrainConfig& tc,
                       const TrainHooks& hooks = {});

} // namespace prism
