#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "prism/data.hpp"
#include "prism/model.hpp"
#include "prism/trainer.hpp"

namespace prism::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/**
 * Everything a run needs. Exactly one data source must be set:
 *   dataset       wide series CSV, split chronologically
 *   windows       window CSV as written by `synth`, split in file order
 *   mixture_spec  mixture JSON, generated in memory and split in order
 */
struct RunConfig {
    std::string dataset;
    std::string windows;
    std::string mixture_spec;
    Index stride = 1;
    SplitFractions split;
    PrismConfig model = PrismConfig::with_scenarios(24, 24, 625);
    TrainConfig train;
    std::string out_dir = "run";
    std::uint64_t seed = 0;
    bool deterministic = false;
};

/// Parses a run config document. Unknown keys are rejected at every level;
/// absent keys take the defaults above.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

/// Every field, defaults included.
nlohmann::ordered_json run_config_to_json(const RunConfig& config);

/// Windows for the train, validation and test splits plus channel names.
struct SplitWindows {
    std::vector<Window> train;
    std::vector<Window> validation;
    std::vector<Window> test;
    std::vector<std::string> channel_names;
};

SplitWindows load_split_windows(const RunConfig& config);

/// Named configurations from the benchmark datasets (flops and defaults).
struct Preset {
    std::string_view name;
    Index horizon;
    Index channels;
    ScalerKind scaler;
};

const std::vector<Preset>& presets();

/// Entry point shared by the executable and the tests. args[0] is the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace prism::cli
