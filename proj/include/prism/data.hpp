#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "prism/core_math.hpp"

namespace prism {

/// D-channel, equal-length multivariate series. values is [length x D].
struct SeriesFrame {
    Matrix values;
    std::vector<std::string> channel_names;

    SeriesFrame() = default;
    SeriesFrame(Matrix values, std::vector<std::string> channel_names);

    Index length() const { return values.rows(); }
    Index channels() const { return values.cols(); }
};

/// One training/evaluation instance cut from a series.
struct Window {
    Matrix history; ///< [L x D]
    Matrix future;  ///< [T x D]
    Index origin = 0;

    Index channels() const { return history.cols(); }
};

/// Half-open index range [begin, end).
struct IndexRange {
    Index begin = 0;
    Index end = 0;

    Index size() const { return end - begin; }
};

enum class ScalerKind { mean, mean_std };

std::string_view to_string(ScalerKind kind);
ScalerKind scaler_kind_from_string(std::string_view name);

struct Scaler {
    ScalerKind kind = ScalerKind::mean;
    Vector location; ///< per channel; all zero for ScalerKind::mean
    Vector scale;    ///< per channel; strictly positive

    static Scaler identity(Index channels);
    Index channels() const { return scale.size(); }
};

inline constexpr double kScaleFloor = 1e-8;

/// Reads the wide CSV layout: a header of channel names, one row per time step,
/// and an optional leading column named "timestamp" that is skipped.
SeriesFrame load_csv(const std::filesystem::path& path);
SeriesFrame parse_csv(std::istream& in, std::string_view source_name = "<stream>");

void write_csv(const std::filesystem::path& path, const SeriesFrame& frame);

/// Windows with origins region.begin, region.begin + stride, ...; history covers
/// [o, o + L) and future [o + L, o + L + T).
std::vector<Window> make_windows(const SeriesFrame& frame, Index input_length, Index horizon,
                                 Index stride, IndexRange region);

/// Number of windows make_windows yields for a region of `region_length` steps.
Index window_count(Index region_length, Index input_length, Index horizon, Index stride);

struct SplitFractions {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

struct SplitRegions {
    IndexRange train;
    IndexRange validation;
    IndexRange test;
};

/**
 * Contiguous chronological split of `length` steps. The validation and test
 * ranges are widened backwards by `input_length` so their first window can
 * draw its history from the preceding region; futures never overlap.
 */
SplitRegions split_regions(Index length, Index input_length, SplitFractions fractions);

Scaler fit_scaler(const Matrix& history, ScalerKind kind);
Matrix apply_scaler(const Scaler& scaler, const Matrix& data);
Matrix invert_scaler(const Scaler& scaler, const Matrix& data);

// ---------------------------------------------------------------------------
// Synthetic multimodal data
// ---------------------------------------------------------------------------

struct MixtureSpec {
    Index modes = 1;
    std::vector<double> mode_weights;
    Matrix history_prototype;        ///< [L x D]
    std::vector<Matrix> mode_futures; ///< J matrices of [T x D]
    double noise_std = 0.0;
    Index instances = 0;
    std::uint64_t seed = 0;

    Index input_length() const { return history_prototype.rows(); }
    Index horizon() const { return mode_futures.empty() ? 0 : mode_futures.front().rows(); }
    Index channels() const { return history_prototype.cols(); }

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

struct MixtureData {
    std::vector<Window> windows;
    std::vector<Index> modes; ///< ground-truth mode per window
};

/// Per instance: history = prototype + N(0, noise_std^2); mode j drawn from
/// mode_weights; future = mode_futures[j] + N(0, noise_std^2). Draw order per
/// instance is history noise (row-major), mode, future noise (row-major).
MixtureData generate_mixture(const MixtureSpec& spec);

/// JSON with fields named as in MixtureSpec; matrices are arrays of rows.
MixtureSpec load_mixture_spec(const std::filesystem::path& path);
MixtureSpec parse_mixture_spec(std::string_view json_text);
std::string dump_mixture_spec(const MixtureSpec& spec);

/// Long-format window file: columns window,segment,step,<channels...> where
/// segment is "history" or "future".
void write_windows_csv(const std::filesystem::path& path, const std::vector<Window>& windows,
                       const std::vector<std::string>& channel_names);
struct WindowSet {
    std::vector<Window> windows;
    std::vector<std::string> channel_names;
};

WindowSet load_windows_csv(const std::filesystem::path& path);

void write_modes_csv(const std::filesystem::path& path, const std::vector<Index>& modes);

std::vector<std::string> default_channel_names(Index channels);

} // namespace prism
