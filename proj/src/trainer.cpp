#include "prism/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "prism/metrics.hpp"
#include "prism/rng.hpp"

namespace prism {

namespace {

void accumulate(PrismParams& acc, const PrismParams& g)
{
    for (std::size_t b = 0; b < acc.block_count(); ++b) {
        acc.block(b) += g.block(b);
    }
}

} // namespace

void TrainConfig::validate() const
{
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be at least 1");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw ConfigError("lr must be finite and nonnegative");
    }
    if (checkpoint_every < 0) {
        throw ConfigError("checkpoint_every must be nonnegative");
    }
    if (threads < 1) {
        throw ConfigError("threads must be at least 1");
    }
}

TrainingError::TrainingError(Index epoch, Index batch, const std::string& what)
    : NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " +
                   what),
      epoch_(epoch),
      batch_(batch)
{
}

LossGradient batch_gradient(const PrismParams& params, const PrismConfig& config,
                            const std::vector<Window>& windows, std::span<const std::size_t> indices,
                            unsigned threads)
{
    if (indices.empty()) {
        throw ConfigError("batch_gradient: empty batch");
    }
    std::vector<LossGradient> parts(indices.size());
    const auto work = [&](std::size_t i) {
        const Window& w = windows.at(indices[i]);
        parts[i] = backward(params, config, w, fit_scaler(w.history, config.scaler_kind));
    };

    if (threads <= 1 || indices.size() < 2) {
        for (std::size_t i = 0; i < indices.size(); ++i) {
            work(i);
        }
    } else {
        const std::size_t workers = std::min<std::size_t>(threads, indices.size());
        std::vector<std::exception_ptr> errors(workers);
        {
            std::vector<std::jthread> pool;
            for (std::size_t k = 0; k < workers; ++k) {
                pool.emplace_back([&, k] {
                    try {
                        for (std::size_t i = k; i < indices.size(); i += workers) {
                            work(i);
                        }
                    } catch (...) {
                        errors[k] = std::current_exception();
                    }
                });
            }
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    LossGradient out{LossBreakdown{}, PrismParams::zeros(config)};
    for (const auto& part : parts) {
        out.loss.recon += part.loss.recon;
        out.loss.prob += part.loss.prob;
        out.loss.total += part.loss.total;
        accumulate(out.grad, part.grad);
    }
    const double inv = 1.0 / static_cast<double>(parts.size());
    out.loss.recon *= inv;
    out.loss.prob *= inv;
    out.loss.total *= inv;
    for (std::size_t b = 0; b < out.grad.block_count(); ++b) {
        out.grad.block(b) *= inv;
    }
    return out;
}

TrainResult train(const std::vector<Window>& windows, const PrismConfig& config,
                  const TrainConfig& tc, const TrainHooks& hooks)
{
    config.validate();
    return train_from(init_params(config, derive_seed(tc.seed, seed_stream::init)), windows,
                      config, tc, hooks);
}

TrainResult train_from(PrismParams initial, const std::vector<Window>& windows,
                       const PrismConfig& config, const TrainConfig& tc, const TrainHooks& hooks)
{
    config.validate();
    tc.validate();
    if (windows.empty()) {
        throw ConfigError("train: no training windows");
    }
    for (const auto& w : windows) {
        if (w.history.rows() != config.input_length || w.future.rows() != config.horizon ||
            w.future.cols() != w.history.cols()) {
            throw ShapeError("train: window shape does not match input_length/horizon");
        }
    }
    initial.check(config);

    TrainResult result{std::move(initial), {}};
    PrismParams& params = result.params;
    AdamState adam = AdamState::for_params(params, tc.lr);
    Rng shuffler(derive_seed(tc.seed, seed_stream::shuffle));

    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(tc.batch_size);

    for (Index epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        if (tc.shuffle) {
            shuffler.shuffle(std::span<std::size_t>(order));
        }

        EpochRecord record;
        record.epoch = epoch;
        Index batch_index = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += batch, ++batch_index) {
            const std::size_t count = std::min(batch, order.size() - begin);
            const std::span<const std::size_t> indices(order.data() + begin, count);
            LossGradient lg;
            try {
                lg = batch_gradient(params, config, windows, indices, tc.threads);
                if (!std::isfinite(lg.loss.total)) {
                    throw NumericError("non-finite loss");
                }
                adam_step(params, lg.grad, adam);
            } catch (const NumericError& e) {
                throw TrainingError(epoch, batch_index, e.what());
            }
            const auto weight = static_cast<double>(count);
            record.total += lg.loss.total * weight;
            record.recon += lg.loss.recon * weight;
            record.prob += lg.loss.prob * weight;
        }
        const auto n = static_cast<double>(windows.size());
        record.total /= n;
        record.recon /= n;
        record.prob /= n;

        if (hooks.validation != nullptr && !hooks.validation->empty() && tc.checkpoint_every > 0 &&
            epoch % tc.checkpoint_every == 0) {
            record.validation_crps = evaluate(params, config, *hooks.validation).crps;
        }
        record.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.history.epochs.push_back(record);
        if (hooks.on_epoch) {
            hooks.on_epoch(record, params);
        }
    }
    return result;
}

} // namespace prism
