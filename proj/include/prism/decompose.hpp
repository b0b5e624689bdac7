#pragma once

#include <algorithm>
#include <string>

#include "prism/core_math.hpp"

namespace prism {

template <typename Scalar>
struct Decomposition {
    MatrixX<Scalar> trend;
    MatrixX<Scalar> season;
};

inline void validate_kernel(Index kernel)
{
    if (kernel < 1 || kernel % 2 == 0) {
        throw ConfigError("decomposition kernel must be a positive odd count, got " +
                          std::to_string(kernel));
    }
}

/**
 * Moving-average trend/season split, applied to each column independently.
 *
 * Each end is padded by (kernel - 1) / 2 copies of the edge value, the trend at
 * t is the mean of the kernel-wide window centered at t, and season = x - trend.
 */
template <typename Derived>
Decomposition<typename Derived::Scalar> decompose(const Eigen::MatrixBase<Derived>& x, Index kernel)
{
    using Scalar = typename Derived::Scalar;
    validate_kernel(kernel);
    const Index length = x.rows();
    if (length < 1) {
        throw ShapeError("decompose: history must have at least one row");
    }
    const Index half = (kernel - 1) / 2;
    const auto width = static_cast<Scalar>(kernel);

    Decomposition<Scalar> out;
    out.trend.resize(length, x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
        for (Index t = 0; t < length; ++t) {
            Scalar sum(0);
            for (Index j = t - half; j <= t + half; ++j) {
                sum += x(std::clamp<Index>(j, 0, length - 1), c);
            }
            out.trend(t, c) = sum / width;
        }
    }
    out.season = x - out.trend;
    return out;
}

} // namespace prism
