#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "prism/data.hpp"
#include "prism/model.hpp"

namespace prism {

enum class ForecastSource { prism, uniform_samples };

/// A scenario set with per-channel probability columns. Model output and
/// external sample sets share this type so one metric implementation scores both.
struct ForecastSet {
    ScenarioTensor scenarios; ///< [N x T x D]
    Matrix probabilities;     ///< [N x D]
    ForecastSource source = ForecastSource::prism;

    static ForecastSet from_forecast(const ScenarioForecast& forecast);

    /// Throws ValidationError unless every column is a probability vector of
    /// length N and the shapes agree.
    void validate() const;
};

struct MetricsReport {
    double crps = 0.0;
    double distortion = 0.0;
    double mae = 0.0;
    double mse = 0.0;
    Index window_count = 0;
    std::uint64_t flops_per_forward = 0;
};

/// Per-channel weighted energy-form CRPS, averaged over channels:
/// sum_n p_n |y_n - gt|_1 - 1/2 sum_n sum_j p_n p_j |y_n - y_j|_1.
double weighted_crps(const ForecastSet& fs, const Matrix& gt);

/// Wraps S samples as a scenario set with probability 1/S everywhere.
ForecastSet uniform_adapter(const ScenarioTensor& samples);

/// Minimum over scenarios of the RMSE computed jointly over horizon and channels.
double distortion(const ForecastSet& fs, const Matrix& gt);

/// MAE of the pointwise weighted-median forecast (lower 0.5-quantile).
double point_mae(const ForecastSet& fs, const Matrix& gt);

/// MSE of the probability-weighted mean forecast.
double point_mse(const ForecastSet& fs, const Matrix& gt);

struct FlopsBreakdown {
    std::uint64_t trend = 0;
    std::uint64_t season = 0;
    std::uint64_t prob = 0;
    std::uint64_t total = 0;
};

/// Multiply-accumulates of the three affine maps for `batch` inputs with
/// `channels` channels each. Bias adds and pooling are not counted.
FlopsBreakdown flops_breakdown(const PrismConfig& config, Index channels, Index batch = 1);
std::uint64_t flops_estimate(const PrismConfig& config, Index channels, Index batch = 1);

struct WindowMetrics {
    double crps = 0.0;
    double distortion = 0.0;
    double mae = 0.0;
    double mse = 0.0;
};

WindowMetrics score_window(const ForecastSet& fs, const Matrix& gt);

/// Forward pass per window with a scaler fitted on that window's history;
/// every metric is computed in the scaled space and averaged over windows.
MetricsReport evaluate(const PrismParams& params, const PrismConfig& config,
                       const std::vector<Window>& windows);

/// Averages per-window metrics in order.
MetricsReport aggregate(const std::vector<WindowMetrics>& per_window);

std::string metrics_report_json(const MetricsReport& report);
MetricsReport parse_metrics_report(std::string_view json_text);

/// Forecast export: header scenario_index,channel,probability,t0..t{T-1}; one
/// row per (scenario, channel); scenarios ordered by descending probability of
/// channel 0 (ties by index).
void write_forecast_csv(std::ostream& out, const ForecastSet& fs,
                        const std::vector<std::string>& channel_names);

/// Reads an external sample file (columns sample,step,<channels...>) into an
/// [S x T x D] tensor.
ScenarioTensor load_samples_csv(const std::filesystem::path& path);

} // namespace prism
