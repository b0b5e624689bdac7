#include "prism/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace prism {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json block_json(const Eigen::Ref<const Matrix>& m)
{
    ordered_json doc;
    doc["shape"] = {m.rows(), m.cols()};
    json::array_t data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            data.push_back(m(r, c));
        }
    }
    doc["data"] = std::move(data);
    return doc;
}

Matrix block_from_json(const json& doc, std::string_view name)
{
    const std::string field = "checkpoint block '" + std::string(name) + "'";
    if (!doc.is_object() || !doc.contains("shape") || !doc.contains("data")) {
        throw ValidationError(field + ": expected {shape, data}");
    }
    const auto shape = doc.at("shape").get<std::vector<Index>>();
    const auto data = doc.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
        static_cast<Index>(data.size()) != shape[0] * shape[1]) {
        throw ValidationError(field + ": data length does not match shape");
    }
    Matrix m(shape[0], shape[1]);
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            m(r, c) = data[static_cast<std::size_t>(r * m.cols() + c)];
        }
    }
    return m;
}

Vector column_from_block(const Matrix& m, std::string_view name)
{
    if (m.cols() != 1) {
        throw ValidationError("checkpoint block '" + std::string(name) + "': bias must be [n x 1]");
    }
    return m.col(0);
}

} // namespace

ordered_json config_to_json(const PrismConfig& c)
{
    ordered_json doc;
    doc["input_length"] = c.input_length;
    doc["horizon"] = c.horizon;
    doc["scenarios"] = c.scenarios;
    doc["trend_count"] = c.trend_count;
    doc["season_count"] = c.season_count;
    doc["kernel"] = c.kernel;
    doc["epsilon"] = c.epsilon;
    doc["lambda"] = c.lambda;
    doc["scaler"] = std::string(to_string(c.scaler_kind));
    return doc;
}

PrismConfig config_from_json(const json& doc)
{
    if (!doc.is_object()) {
        throw ConfigError("model config: expected an object");
    }
    static const char* const known[] = {"input_length", "horizon",  "scenarios",
                                        "trend_count",  "season_count", "kernel",
                                        "epsilon",      "lambda",   "scaler"};
    for (const auto& [key, value] : doc.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ConfigError("model config: unknown key '" + key + "'");
        }
    }
    PrismConfig c;
    try {
        c.horizon = doc.value("horizon", c.horizon);
        c.input_length = doc.value("input_length", c.horizon);
        c.scenarios = doc.value("scenarios", c.scenarios);
        if (doc.contains("trend_count") || doc.contains("season_count")) {
            c.trend_count = doc.value("trend_count", Index{0});
            c.season_count = doc.value("season_count", Index{0});
        } else {
            std::tie(c.trend_count, c.season_count) = factorize_n(c.scenarios);
        }
        c.kernel = doc.value("kernel", c.kernel);
        c.epsilon = doc.value("epsilon", c.epsilon);
        c.lambda = doc.value("lambda", c.lambda);
        c.scaler_kind = scaler_kind_from_string(doc.value("scaler", std::string("mean")));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string checkpoint_json(const Checkpoint& ck)
{
    ck.params.check(ck.config);
    ordered_json doc;
    doc["format"] = kCheckpointFormat;
    doc["format_version"] = kCheckpointVersion;
    doc["config"] = config_to_json(ck.config);
    doc["channel_names"] = ck.channel_names;
    ordered_json blocks;
    blocks["trend_weight"] = block_json(ck.params.trend_weight);
    blocks["trend_bias"] = block_json(ck.params.trend_bias);
    blocks["season_weight"] = block_json(ck.params.season_weight);
    blocks["season_bias"] = block_json(ck.params.season_bias);
    blocks["prob_weight"] = block_json(ck.params.prob_weight);
    blocks["prob_bias"] = block_json(ck.params.prob_bias);
    doc["blocks"] = std::move(blocks);
    return doc.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", std::string()) != kCheckpointFormat) {
        throw ValidationError("checkpoint: missing or wrong format tag");
    }
    if (doc.value("format_version", 0) != kCheckpointVersion) {
        throw ValidationError("checkpoint: unsupported format_version");
    }
    Checkpoint ck;
    try {
        ck.config = config_from_json(doc.at("config"));
        ck.channel_names = doc.at("channel_names").get<std::vector<std::string>>();
        const auto& blocks = doc.at("blocks");
        ck.params.trend_weight = block_from_json(blocks.at("trend_weight"), "trend_weight");
        ck.params.trend_bias =
            column_from_block(block_from_json(blocks.at("trend_bias"), "trend_bias"), "trend_bias");
        ck.params.season_weight = block_from_json(blocks.at("season_weight"), "season_weight");
        ck.params.season_bias = column_from_block(
            block_from_json(blocks.at("season_bias"), "season_bias"), "season_bias");
        ck.params.prob_weight = block_from_json(blocks.at("prob_weight"), "prob_weight");
        ck.params.prob_bias =
            column_from_block(block_from_json(blocks.at("prob_bias"), "prob_bias"), "prob_bias");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
    if (ck.channel_names.empty()) {
        throw ValidationError("checkpoint: channel_names must be nonempty");
    }
    ck.params.check(ck.config);
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write checkpoint '" + path.string() + "'");
    }
    out << checkpoint_json(checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open checkpoint '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_checkpoint(buffer.str());
}

} // namespace prism
