#include "prism/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>

#include "json.hpp"

#include "prism/text_io.hpp"

namespace prism {

namespace {

void check_gt(const ForecastSet& fs, const Matrix& gt)
{
    if (gt.rows() != fs.scenarios.horizon() || gt.cols() != fs.scenarios.channels()) {
        throw ShapeError("metrics: ground truth is " + detail::shape_str(gt.rows(), gt.cols()) +
                         ", forecast horizon x channels is " +
                         detail::shape_str(fs.scenarios.horizon(), fs.scenarios.channels()));
    }
}

} // namespace

ForecastSet ForecastSet::from_forecast(const ScenarioForecast& forecast)
{
    return ForecastSet{forecast.scenarios, forecast.probabilities, ForecastSource::prism};
}

void ForecastSet::validate() const
{
    if (scenarios.count() < 1 || probabilities.rows() != scenarios.count() ||
        probabilities.cols() != scenarios.channels()) {
        throw ValidationError("ForecastSet: probabilities must be [N x D] matching the scenarios");
    }
    for (Index d = 0; d < probabilities.cols(); ++d) {
        validate_probabilities(probabilities.col(d),
                               "ForecastSet probability column " + std::to_string(d));
    }
}

double weighted_crps(const ForecastSet& fs, const Matrix& gt)
{
    fs.validate();
    check_gt(fs, gt);
    const Index N = fs.scenarios.count();
    const Index D = fs.scenarios.channels();
    double total = 0.0;
    for (Index d = 0; d < D; ++d) {
        const Matrix& y = fs.scenarios.channel(d);
        const auto p = fs.probabilities.col(d);
        const Vector to_truth = (y.rowwise() - gt.col(d).transpose()).cwiseAbs().rowwise().sum();
        double spread = 0.0;
        for (Index n = 0; n < N; ++n) {
            double row = 0.0;
            for (Index j = n + 1; j < N; ++j) {
                row += p(j) * (y.row(n) - y.row(j)).cwiseAbs().sum();
            }
            spread += p(n) * row;
        }
        // The double sum over all ordered pairs is twice the sum over n < j.
        total += p.dot(to_truth) - spread;
    }
    return total / static_cast<double>(D);
}

ForecastSet uniform_adapter(const ScenarioTensor& samples)
{
    if (samples.count() < 1) {
        throw ValidationError("uniform_adapter: at least one sample required");
    }
    const double p = 1.0 / static_cast<double>(samples.count());
    return ForecastSet{samples, Matrix::Constant(samples.count(), samples.channels(), p),
                       ForecastSource::uniform_samples};
}

double distortion(const ForecastSet& fs, const Matrix& gt)
{
    check_gt(fs, gt);
    if (fs.scenarios.count() < 1) {
        throw ValidationError("distortion: empty scenario set");
    }
    Vector sse = Vector::Zero(fs.scenarios.count());
    for (Index d = 0; d < fs.scenarios.channels(); ++d) {
        sse += (fs.scenarios.channel(d).rowwise() - gt.col(d).transpose()).rowwise().squaredNorm();
    }
    const double cells = static_cast<double>(gt.size());
    return std::sqrt(sse.minCoeff() / cells);
}

double point_mae(const ForecastSet& fs, const Matrix& gt)
{
    fs.validate();
    check_gt(fs, gt);
    const Index T = gt.rows();
    const Index D = gt.cols();
    double total = 0.0;
    for (Index d = 0; d < D; ++d) {
        const Matrix& y = fs.scenarios.channel(d);
        double abs_err = 0.0;
        for (Index t = 0; t < T; ++t) {
            const double median = weighted_quantile(y.col(t), fs.probabilities.col(d), 0.5);
            abs_err += std::abs(gt(t, d) - median);
        }
        total += abs_err / static_cast<double>(T);
    }
    return total / static_cast<double>(D);
}

double point_mse(const ForecastSet& fs, const Matrix& gt)
{
    fs.validate();
    check_gt(fs, gt);
    const Index D = gt.cols();
    double total = 0.0;
    for (Index d = 0; d < D; ++d) {
        const Vector mean = fs.scenarios.channel(d).transpose() * fs.probabilities.col(d);
        total += (gt.col(d) - mean).squaredNorm() / static_cast<double>(gt.rows());
    }
    return total / static_cast<double>(D);
}

FlopsBreakdown flops_breakdown(const PrismConfig& config, Index channels, Index batch)
{
    config.validate();
    if (channels < 1 || batch < 1) {
        throw ConfigError("flops: channels and batch must be at least 1");
    }
    const auto per_input = static_cast<std::uint64_t>(batch) * static_cast<std::uint64_t>(channels) *
                           static_cast<std::uint64_t>(config.input_length);
    FlopsBreakdown f;
    f.trend = per_input * static_cast<std::uint64_t>(config.trend_count * config.horizon);
    f.season = per_input * static_cast<std::uint64_t>(config.season_count * config.horizon);
    f.prob = per_input * static_cast<std::uint64_t>(config.scenarios);
    f.total = f.trend + f.season + f.prob;
    return f;
}

std::uint64_t flops_estimate(const PrismConfig& config, Index channels, Index batch)
{
    return flops_breakdown(config, channels, batch).total;
}

WindowMetrics score_window(const ForecastSet& fs, const Matrix& gt)
{
    return WindowMetrics{weighted_crps(fs, gt), distortion(fs, gt), point_mae(fs, gt),
                         point_mse(fs, gt)};
}

MetricsReport aggregate(const std::vector<WindowMetrics>& per_window)
{
    if (per_window.empty()) {
        throw ConfigError("evaluate: no windows");
    }
    MetricsReport r;
    for (const auto& m : per_window) {
        r.crps += m.crps;
        r.distortion += m.distortion;
        r.mae += m.mae;
        r.mse += m.mse;
    }
    const auto n = static_cast<double>(per_window.size());
    r.crps /= n;
    r.distortion /= n;
    r.mae /= n;
    r.mse /= n;
    r.window_count = static_cast<Index>(per_window.size());
    return r;
}

MetricsReport evaluate(const PrismParams& params, const PrismConfig& config,
                       const std::vector<Window>& windows)
{
    if (windows.empty()) {
        throw ConfigError("evaluate: no windows");
    }
    std::vector<WindowMetrics> per_window;
    per_window.reserve(windows.size());
    for (const auto& w : windows) {
        const Scaler scaler = fit_scaler(w.history, config.scaler_kind);
        const ScenarioForecast fc = forward(params, config, w.history, scaler);
        per_window.push_back(score_window(ForecastSet::from_forecast(fc), apply_scaler(scaler, w.future)));
    }
    MetricsReport report = aggregate(per_window);
    report.flops_per_forward = flops_estimate(config, windows.front().channels());
    return report;
}

std::string metrics_report_json(const MetricsReport& r)
{
    nlohmann::ordered_json doc;
    doc["crps"] = r.crps;
    doc["distortion"] = r.distortion;
    doc["mae"] = r.mae;
    doc["mse"] = r.mse;
    doc["window_count"] = r.window_count;
    doc["flops_per_forward"] = r.flops_per_forward;
    return doc.dump(2) + "\n";
}

MetricsReport parse_metrics_report(std::string_view json_text)
{
    const auto doc = nlohmann::json::parse(json_text);
    MetricsReport r;
    r.crps = doc.at("crps").get<double>();
    r.distortion = doc.at("distortion").get<double>();
    r.mae = doc.at("mae").get<double>();
    r.mse = doc.at("mse").get<double>();
    r.window_count = doc.at("window_count").get<Index>();
    r.flops_per_forward = doc.at("flops_per_forward").get<std::uint64_t>();
    return r;
}

void write_forecast_csv(std::ostream& out, const ForecastSet& fs,
                        const std::vector<std::string>& channel_names)
{
    fs.validate();
    const Index N = fs.scenarios.count();
    const Index T = fs.scenarios.horizon();
    const Index D = fs.scenarios.channels();
    if (static_cast<Index>(channel_names.size()) != D) {
        throw ShapeError("write_forecast_csv: channel name count mismatch");
    }
    std::vector<Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return fs.probabilities(a, 0) > fs.probabilities(b, 0);
    });

    std::vector<std::string> header{"scenario_index", "channel", "probability"};
    for (Index t = 0; t < T; ++t) {
        header.push_back("t" + std::to_string(t));
    }
    write_row(out, header);
    for (const Index n : order) {
        for (Index d = 0; d < D; ++d) {
            out << n << ',' << channel_names[static_cast<std::size_t>(d)] << ','
                << format_real(fs.probabilities(n, d));
            for (Index t = 0; t < T; ++t) {
                out << ',' << format_real(fs.scenarios(n, t, d));
            }
            out << '\n';
        }
    }
}

ScenarioTensor load_samples_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    CsvReader reader(in, path.string());
    std::vector<std::string> header;
    if (!reader.next(header) || header.size() < 3 || header[0] != "sample" || header[1] != "step") {
        throw ParseError(path.string() + ": expected header sample,step,<channels...>");
    }
    const auto D = static_cast<Index>(header.size() - 2);
    std::map<long long, std::vector<std::vector<double>>> rows;
    std::vector<std::string> cells;
    while (reader.next(cells)) {
        if (cells.size() != header.size()) {
            throw ParseError(reader.location() + ": expected " + std::to_string(header.size()) +
                             " columns, found " + std::to_string(cells.size()));
        }
        const auto s = static_cast<long long>(reader.number(cells[0], header[0]));
        const auto step = static_cast<long long>(reader.number(cells[1], header[1]));
        auto& sample = rows[s];
        if (step != static_cast<long long>(sample.size())) {
            throw ParseError(reader.location() + ", column step: steps must be consecutive from 0");
        }
        std::vector<double> values;
        for (std::size_t c = 2; c < cells.size(); ++c) {
            values.push_back(reader.number(cells[c], header[c]));
        }
        sample.push_back(std::move(values));
    }
    if (rows.empty()) {
        throw ParseError(path.string() + ": no data rows");
    }
    const auto S = static_cast<Index>(rows.size());
    const auto T = static_cast<Index>(rows.begin()->second.size());
    ScenarioTensor tensor(S, T, D);
    Index s = 0;
    for (const auto& [id, sample] : rows) {
        if (static_cast<Index>(sample.size()) != T) {
            throw ParseError(path.string() + ": sample " + std::to_string(id) +
                             " has a different number of steps");
        }
        for (Index t = 0; t < T; ++t) {
            for (Index d = 0; d < D; ++d) {
                tensor(s, t, d) = sample[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)];
            }
        }
        ++s;
    }
    return tensor;
}

} // namespace prism
