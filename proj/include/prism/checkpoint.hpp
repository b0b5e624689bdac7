#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "prism/model.hpp"

namespace prism {

inline constexpr std::string_view kCheckpointFormat = "timeprism-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Trained parameters plus everything needed to run them again.
struct Checkpoint {
    PrismConfig config;
    std::vector<std::string> channel_names; ///< D channels the model was trained on
    PrismParams params;

    Index channels() const { return static_cast<Index>(channel_names.size()); }
};

nlohmann::ordered_json config_to_json(const PrismConfig& config);

/// Reads the model config object. Unknown keys are rejected; missing keys keep
/// their defaults, and a missing trend/season split is factorized from N.
PrismConfig config_from_json(const nlohmann::json& doc);

std::string checkpoint_json(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view json_text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace prism
