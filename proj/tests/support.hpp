#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "prism/data.hpp"
#include "prism/rng.hpp"

namespace support {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static std::uint64_t counter = 0;
        const auto base = std::filesystem::temp_directory_path();
        prism::Rng rng(static_cast<std::uint64_t>(
            std::hash<std::string>{}(tag + std::to_string(++counter) +
                                     std::to_string(reinterpret_cast<std::uintptr_t>(this)))));
        path_ = base / ("prism-" + tag + "-" + std::to_string(rng.next_u64() % 1000000007ULL));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// J modes over a shared history prototype, D=1.
inline prism::MixtureSpec simple_spec(prism::Index length, std::vector<double> weights,
                                      double noise, prism::Index instances, std::uint64_t seed)
{
    prism::MixtureSpec spec;
    spec.modes = static_cast<prism::Index>(weights.size());
    spec.mode_weights = std::move(weights);
    spec.history_prototype = prism::Matrix(length, 1);
    for (prism::Index t = 0; t < length; ++t) {
        spec.history_prototype(t, 0) = 1.0 + 0.25 * std::sin(static_cast<double>(t));
    }
    for (prism::Index j = 0; j < spec.modes; ++j) {
        prism::Matrix f(length, 1);
        for (prism::Index t = 0; t < length; ++t) {
            f(t, 0) = 2.0 * static_cast<double>(j) - static_cast<double>(spec.modes - 1) +
                      0.1 * static_cast<double>(t);
        }
        spec.mode_futures.push_back(f);
    }
    spec.noise_std = noise;
    spec.instances = instances;
    spec.seed = seed;
    return spec;
}

} // namespace support
