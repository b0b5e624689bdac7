#include "prism/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "prism/rng.hpp"
#include "prism/text_io.hpp"

namespace prism {

namespace {

using nlohmann::json;

bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

void check_same_channels(const Scaler& scaler, const Matrix& data, std::string_view op)
{
    if (scaler.channels() != data.cols() || scaler.location.size() != scaler.scale.size()) {
        throw ShapeError(std::string(op) + ": scaler has " + std::to_string(scaler.channels()) +
                         " channels, data has " + std::to_string(data.cols()));
    }
}

Matrix json_matrix(const json& rows, std::string_view field)
{
    if (!rows.is_array()) {
        throw ValidationError(std::string(field) + ": expected an array of rows");
    }
    std::vector<std::vector<double>> nested;
    for (const auto& row : rows) {
        if (!row.is_array()) {
            throw ValidationError(std::string(field) + ": expected an array of rows");
        }
        std::vector<double> values;
        for (const auto& v : row) {
            if (!v.is_number()) {
                throw ValidationError(std::string(field) + ": non-numeric entry");
            }
            values.push_back(v.get<double>());
        }
        nested.push_back(std::move(values));
    }
    try {
        return matrix_from_rows(nested);
    } catch (const Error& e) {
        throw ValidationError(std::string(field) + ": " + e.what());
    }
}

json matrix_json(const Matrix& m)
{
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

SeriesFrame::SeriesFrame(Matrix v, std::vector<std::string> names)
    : values(std::move(v)), channel_names(std::move(names))
{
    if (values.cols() < 1) {
        throw ShapeError("SeriesFrame: at least one channel required");
    }
    if (static_cast<Index>(channel_names.size()) != values.cols()) {
        throw ShapeError("SeriesFrame: channel name count does not match column count");
    }
    require_finite(values, "SeriesFrame");
}

std::string_view to_string(ScalerKind kind)
{
    return kind == ScalerKind::mean ? "mean" : "mean_std";
}

ScalerKind scaler_kind_from_string(std::string_view name)
{
    if (name == "mean") {
        return ScalerKind::mean;
    }
    if (name == "mean_std") {
        return ScalerKind::mean_std;
    }
    throw ConfigError("unknown scaler kind '" + std::string(name) + "' (expected mean or mean_std)");
}

Scaler Scaler::identity(Index channels)
{
    return Scaler{ScalerKind::mean, Vector::Zero(channels), Vector::Ones(channels)};
}

std::vector<std::string> default_channel_names(Index channels)
{
    std::vector<std::string> names;
    for (Index d = 0; d < channels; ++d) {
        names.push_back("ch" + std::to_string(d));
    }
    return names;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

SeriesFrame parse_csv(std::istream& in, std::string_view source_name)
{
    CsvReader reader(in, source_name);
    std::vector<std::string> header;
    if (!reader.next(header)) {
        throw ParseError(std::string(source_name) + ": empty file");
    }
    const bool has_timestamp = !header.empty() && iequals(header.front(), "timestamp");
    const std::size_t first = has_timestamp ? 1 : 0;
    if (header.size() <= first) {
        throw ParseError(std::string(source_name) + ": no numeric columns in header");
    }
    std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());

    std::vector<double> flat;
    std::vector<std::string> cells;
    Index rows = 0;
    while (reader.next(cells)) {
        if (cells.size() != header.size()) {
            throw ParseError(reader.location() + ": expected " + std::to_string(header.size()) +
                             " columns, found " + std::to_string(cells.size()));
        }
        for (std::size_t c = first; c < cells.size(); ++c) {
            flat.push_back(reader.number(cells[c], header[c]));
        }
        ++rows;
    }
    if (rows == 0) {
        throw ParseError(std::string(source_name) + ": no data rows");
    }
    const auto channels = static_cast<Index>(names.size());
    Matrix values(rows, channels);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < channels; ++c) {
            values(r, c) = flat[static_cast<std::size_t>(r * channels + c)];
        }
    }
    return SeriesFrame(std::move(values), std::move(names));
}

SeriesFrame load_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    return parse_csv(in, path.string());
}

void write_csv(const std::filesystem::path& path, const SeriesFrame& frame)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    write_row(out, frame.channel_names);
    for (Index r = 0; r < frame.length(); ++r) {
        for (Index c = 0; c < frame.channels(); ++c) {
            if (c > 0) {
                out << ',';
            }
            out << format_real(frame.values(r, c));
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Windows and splits
// ---------------------------------------------------------------------------

Index window_count(Index region_length, Index input_length, Index horizon, Index stride)
{
    if (input_length < 1 || horizon < 1 || stride < 1) {
        throw ConfigError("window lengths and stride must be at least 1");
    }
    if (region_length < input_length + horizon) {
        return 0;
    }
    return (region_length - input_length - horizon) / stride + 1;
}

std::vector<Window> make_windows(const SeriesFrame& frame, Index input_length, Index horizon,
                                 Index stride, IndexRange region)
{
    if (region.begin < 0 || region.end > frame.length() || region.begin > region.end) {
        throw ConfigError("make_windows: region [" + std::to_string(region.begin) + ", " +
                          std::to_string(region.end) + ") outside series of length " +
                          std::to_string(frame.length()));
    }
    const Index count = window_count(region.size(), input_length, horizon, stride);
    if (count == 0) {
        throw ConfigError("make_windows: region of length " + std::to_string(region.size()) +
                          " is shorter than input_length + horizon = " +
                          std::to_string(input_length + horizon));
    }
    std::vector<Window> windows;
    windows.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
        const Index origin = region.begin + i * stride;
        windows.push_back(Window{frame.values.middleRows(origin, input_length),
                                 frame.values.middleRows(origin + input_length, horizon), origin});
    }
    return windows;
}

SplitRegions split_regions(Index length, Index input_length, SplitFractions f)
{
    if (f.train <= 0 || f.validation < 0 || f.test < 0 ||
        std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be nonnegative, train > 0, and sum to 1");
    }
    const auto train_end = static_cast<Index>(std::floor(f.train * static_cast<double>(length)));
    const auto val_end =
        static_cast<Index>(std::floor((f.train + f.validation) * static_cast<double>(length)));
    SplitRegions regions;
    regions.train = {0, train_end};
    regions.validation = {std::max<Index>(0, train_end - input_length), val_end};
    regions.test = {std::max<Index>(0, val_end - input_length), length};
    return regions;
}

// ---------------------------------------------------------------------------
// Scalers
// ---------------------------------------------------------------------------

Scaler fit_scaler(const Matrix& history, ScalerKind kind)
{
    if (history.rows() < 1) {
        throw ShapeError("fit_scaler: history must have at least one row");
    }
    const auto n = static_cast<double>(history.rows());
    Scaler s;
    s.kind = kind;
    if (kind == ScalerKind::mean) {
        s.location = Vector::Zero(history.cols());
        s.scale = (history.cwiseAbs().colwise().sum().transpose() / n).cwiseMax(kScaleFloor);
    } else {
        s.location = history.colwise().sum().transpose() / n;
        s.scale.resize(history.cols());
        for (Index d = 0; d < history.cols(); ++d) {
            const double var = (history.col(d).array() - s.location(d)).square().sum() / n;
            s.scale(d) = std::max(std::sqrt(var), kScaleFloor);
        }
    }
    return s;
}

Matrix apply_scaler(const Scaler& scaler, const Matrix& data)
{
    check_same_channels(scaler, data, "apply_scaler");
    Matrix out = data;
    for (Index d = 0; d < data.cols(); ++d) {
        out.col(d) = (data.col(d).array() - scaler.location(d)) / scaler.scale(d);
    }
    return out;
}

Matrix invert_scaler(const Scaler& scaler, const Matrix& data)
{
    check_same_channels(scaler, data, "invert_scaler");
    Matrix out = data;
    for (Index d = 0; d < data.cols(); ++d) {
        out.col(d) = data.col(d).array() * scaler.scale(d) + scaler.location(d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mixture generator
// ---------------------------------------------------------------------------

void MixtureSpec::validate() const
{
    if (modes < 1) {
        throw ValidationError("modes: must be at least 1");
    }
    if (static_cast<Index>(mode_weights.size()) != modes) {
        throw ValidationError("mode_weights: expected " + std::to_string(modes) + " entries");
    }
    double total = 0.0;
    for (const double w : mode_weights) {
        if (!std::isfinite(w) || w < 0) {
            throw ValidationError("mode_weights: entries must be finite and nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > kProbabilitySumTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "mode_weights: sum to " << total << ", expected 1";
        throw ValidationError(os.str());
    }
    if (history_prototype.rows() < 1 || history_prototype.cols() < 1) {
        throw ValidationError("history_prototype: must be a nonempty [L x D] matrix");
    }
    if (!all_finite(history_prototype)) {
        throw ValidationError("history_prototype: non-finite entry");
    }
    if (static_cast<Index>(mode_futures.size()) != modes) {
        throw ValidationError("mode_futures: expected " + std::to_string(modes) + " matrices");
    }
    for (const auto& f : mode_futures) {
        if (f.rows() < 1 || f.rows() != horizon() || f.cols() != channels()) {
            throw ValidationError("mode_futures: every matrix must be [T x D] with D matching "
                                  "history_prototype");
        }
        if (!all_finite(f)) {
            throw ValidationError("mode_futures: non-finite entry");
        }
    }
    if (!std::isfinite(noise_std) || noise_std < 0) {
        throw ValidationError("noise_std: must be finite and nonnegative");
    }
    if (instances < 1) {
        throw ValidationError("instances: must be at least 1");
    }
}

MixtureData generate_mixture(const MixtureSpec& spec)
{
    spec.validate();
    Rng rng(spec.seed);

    MixtureData data;
    data.windows.reserve(static_cast<std::size_t>(spec.instances));
    data.modes.reserve(static_cast<std::size_t>(spec.instances));

    const auto add_noise = [&](Matrix m) {
        if (spec.noise_std > 0) {
            for (Index r = 0; r < m.rows(); ++r) {
                for (Index c = 0; c < m.cols(); ++c) {
                    m(r, c) += spec.noise_std * rng.normal();
                }
            }
        }
        return m;
    };

    for (Index i = 0; i < spec.instances; ++i) {
        Window w;
        w.origin = i;
        w.history = add_noise(spec.history_prototype);

        const double u = rng.uniform();
        Index mode = spec.modes - 1;
        double cumulative = 0.0;
        for (Index j = 0; j < spec.modes; ++j) {
            cumulative += spec.mode_weights[static_cast<std::size_t>(j)];
            if (u < cumulative) {
                mode = j;
                break;
            }
        }
        w.future = add_noise(spec.mode_futures[static_cast<std::size_t>(mode)]);
        data.windows.push_back(std::move(w));
        data.modes.push_back(mode);
    }
    return data;
}

MixtureSpec parse_mixture_spec(std::string_view json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("mixture spec: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ValidationError("mixture spec: expected a JSON object");
    }
    static const char* const known[] = {"modes",     "mode_weights", "history_prototype",
                                        "mode_futures", "noise_std", "instances", "seed"};
    for (const auto& [key, value] : doc.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ValidationError("mixture spec: unknown field '" + key + "'");
        }
    }
    for (const char* field : known) {
        if (!doc.contains(field)) {
            throw ValidationError(std::string(field) + ": missing");
        }
    }

    MixtureSpec spec;
    try {
        spec.modes = doc.at("modes").get<Index>();
        spec.mode_weights = doc.at("mode_weights").get<std::vector<double>>();
        spec.noise_std = doc.at("noise_std").get<double>();
        spec.instances = doc.at("instances").get<Index>();
        spec.seed = doc.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("mixture spec: ") + e.what());
    }
    spec.history_prototype = json_matrix(doc.at("history_prototype"), "history_prototype");
    const auto& futures = doc.at("mode_futures");
    if (!futures.is_array()) {
        throw ValidationError("mode_futures: expected an array of matrices");
    }
    for (const auto& f : futures) {
        spec.mode_futures.push_back(json_matrix(f, "mode_futures"));
    }
    spec.validate();
    return spec;
}

MixtureSpec load_mixture_spec(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open mixture spec '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_mixture_spec(buffer.str());
}

std::string dump_mixture_spec(const MixtureSpec& spec)
{
    json doc;
    doc["modes"] = spec.modes;
    doc["mode_weights"] = spec.mode_weights;
    doc["history_prototype"] = matrix_json(spec.history_prototype);
    json futures = json::array();
    for (const auto& f : spec.mode_futures) {
        futures.push_back(matrix_json(f));
    }
    doc["mode_futures"] = std::move(futures);
    doc["noise_std"] = spec.noise_std;
    doc["instances"] = spec.instances;
    doc["seed"] = spec.seed;
    return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Window files
// ---------------------------------------------------------------------------

void write_windows_csv(const std::filesystem::path& path, const std::vector<Window>& windows,
                       const std::vector<std::string>& channel_names)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    std::vector<std::string> header{"window", "segment", "step"};
    header.insert(header.end(), channel_names.begin(), channel_names.end());
    write_row(out, header);

    const auto emit = [&](std::size_t w, std::string_view segment, const Matrix& m) {
        if (m.cols() != static_cast<Index>(channel_names.size())) {
            throw ShapeError("write_windows_csv: channel count mismatch");
        }
        for (Index t = 0; t < m.rows(); ++t) {
            out << w << ',' << segment << ',' << t;
            for (Index d = 0; d < m.cols(); ++d) {
                out << ',' << format_real(m(t, d));
            }
            out << '\n';
        }
    };
    for (std::size_t w = 0; w < windows.size(); ++w) {
        emit(w, "history", windows[w].history);
        emit(w, "future", windows[w].future);
    }
}

WindowSet load_windows_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    CsvReader reader(in, path.string());
    std::vector<std::string> header;
    if (!reader.next(header) || header.size() < 4 || header[0] != "window" ||
        header[1] != "segment" || header[2] != "step") {
        throw ParseError(path.string() + ": expected header window,segment,step,<channels...>");
    }
    const auto channels = static_cast<Index>(header.size() - 3);

    struct Pending {
        std::vector<std::vector<double>> history;
        std::vector<std::vector<double>> future;
    };
    std::map<long long, Pending> pending;
    std::vector<std::string> cells;
    while (reader.next(cells)) {
        if (cells.size() != header.size()) {
            throw ParseError(reader.location() + ": expected " + std::to_string(header.size()) +
                             " columns, found " + std::to_string(cells.size()));
        }
        const auto w = static_cast<long long>(reader.number(cells[0], header[0]));
        const auto step = static_cast<long long>(reader.number(cells[2], header[2]));
        std::vector<std::vector<double>>* target_ptr = nullptr;
        if (cells[1] == "history") {
            target_ptr = &pending[w].history;
        } else if (cells[1] == "future") {
            target_ptr = &pending[w].future;
        } else {
            throw ParseError(reader.location() + ", column segment: expected history or future");
        }
        auto& target = *target_ptr;
        if (step != static_cast<long long>(target.size())) {
            throw ParseError(reader.location() + ", column step: steps must be consecutive from 0");
        }
        std::vector<double> row;
        for (std::size_t c = 3; c < cells.size(); ++c) {
            row.push_back(reader.number(cells[c], header[c]));
        }
        target.push_back(std::move(row));
    }
    if (pending.empty()) {
        throw ParseError(path.string() + ": no data rows");
    }
    std::vector<Window> windows;
    for (auto& [index, p] : pending) {
        if (p.history.empty() || p.future.empty()) {
            throw ParseError(path.string() + ": window " + std::to_string(index) +
                             " lacks history or future rows");
        }
        Window w{matrix_from_rows(p.history), matrix_from_rows(p.future), static_cast<Index>(index)};
        if (w.history.cols() != channels ||
            (!windows.empty() && (w.history.rows() != windows.front().history.rows() ||
                                  w.future.rows() != windows.front().future.rows()))) {
            throw ParseError(path.string() + ": window " + std::to_string(index) +
                             " has inconsistent shape");
        }
        windows.push_back(std::move(w));
    }
    return WindowSet{std::move(windows), std::vector<std::string>(header.begin() + 3, header.end())};
}

void write_modes_csv(const std::filesystem::path& path, const std::vector<Index>& modes)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    out << "window,mode\n";
    for (std::size_t i = 0; i < modes.size(); ++i) {
        out << i << ',' << modes[i] << '\n';
    }
}

} // namespace prism
