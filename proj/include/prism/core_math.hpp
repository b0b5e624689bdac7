#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prism/errors.hpp"

namespace prism {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

namespace detail {

inline std::string shape_str(Index rows, Index cols)
{
    std::ostringstream os;
    os << '[' << rows << 'x' << cols << ']';
    return os.str();
}

} // namespace detail

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m)
{
    return m.derived().array().isFinite().all();
}

/// Throws NumericError naming `what` if any entry is NaN or infinite.
template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, std::string_view what)
{
    if (!all_finite(m)) {
        throw NumericError(std::string(what) + ": non-finite entry");
    }
}

/// Builds a matrix from nested rows; every row must have the same length and
/// every entry must be finite.
inline Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty()) {
        return Matrix(0, 0);
    }
    const auto cols = static_cast<Index>(rows.front().size());
    Matrix m(static_cast<Index>(rows.size()), cols);
    for (Index r = 0; r < m.rows(); ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (static_cast<Index>(row.size()) != cols) {
            throw ShapeError("matrix_from_rows: ragged row " + std::to_string(r));
        }
        for (Index c = 0; c < cols; ++c) {
            m(r, c) = row[static_cast<std::size_t>(c)];
        }
    }
    require_finite(m, "matrix_from_rows");
    return m;
}

// ---------------------------------------------------------------------------
// Affine maps
// ---------------------------------------------------------------------------

/// weights * input + bias for a single input vector.
template <typename W, typename B, typename X>
VectorX<typename W::Scalar> affine(const Eigen::MatrixBase<W>& weights,
                                   const Eigen::MatrixBase<B>& bias,
                                   const Eigen::MatrixBase<X>& input)
{
    if (input.cols() != 1 || bias.cols() != 1 || weights.cols() != input.rows() ||
        weights.rows() != bias.rows()) {
        throw ShapeError("affine: weights " + detail::shape_str(weights.rows(), weights.cols()) +
                         ", bias " + detail::shape_str(bias.rows(), bias.cols()) + ", input " +
                         detail::shape_str(input.rows(), input.cols()));
    }
    return weights * input + bias;
}

/// Column-batched affine map: every column of `inputs` is an independent input.
template <typename W, typename B, typename X>
MatrixX<typename W::Scalar> affine_columns(const Eigen::MatrixBase<W>& weights,
                                           const Eigen::MatrixBase<B>& bias,
                                           const Eigen::MatrixBase<X>& inputs)
{
    if (bias.cols() != 1 || weights.cols() != inputs.rows() || weights.rows() != bias.rows()) {
        throw ShapeError("affine_columns: weights " +
                         detail::shape_str(weights.rows(), weights.cols()) + ", bias " +
                         detail::shape_str(bias.rows(), bias.cols()) + ", inputs " +
                         detail::shape_str(inputs.rows(), inputs.cols()));
    }
    MatrixX<typename W::Scalar> out = weights * inputs;
    out.colwise() += bias;
    return out;
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& logits)
{
    if (logits.size() == 0) {
        throw ShapeError("log_sum_exp: empty vector");
    }
    const auto peak = logits.maxCoeff();
    return peak + std::log((logits.array() - peak).exp().sum());
}

/// -log softmax(logits)[index] as (peak - logits[index]) + log1p(sum of the
/// other exponentials), which stays positive when the winner dominates.
template <typename Derived>
typename Derived::Scalar neg_log_softmax_at(const Eigen::MatrixBase<Derived>& logits, Index index)
{
    if (index < 0 || index >= logits.size()) {
        throw ShapeError("neg_log_softmax_at: index out of range");
    }
    Index top = 0;
    const auto peak = logits.maxCoeff(&top);
    typename Derived::Scalar rest(0);
    for (Index i = 0; i < logits.size(); ++i) {
        if (i != top) {
            rest += std::exp(logits(i) - peak);
        }
    }
    return (peak - logits(index)) + std::log1p(rest);
}

template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits)
{
    if (logits.size() == 0) {
        throw ShapeError("softmax: empty vector");
    }
    const auto peak = logits.maxCoeff();
    VectorX<typename Derived::Scalar> e = (logits.array() - peak).exp().matrix();
    return e / e.sum();
}

template <typename Derived>
VectorX<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits)
{
    return (logits.array() - log_sum_exp(logits)).matrix();
}

/// Softmax applied independently to every column.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_columns(const Eigen::MatrixBase<Derived>& logits)
{
    MatrixX<typename Derived::Scalar> out(logits.rows(), logits.cols());
    for (Index c = 0; c < logits.cols(); ++c) {
        out.col(c) = softmax(logits.col(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Weighted quantile
// ---------------------------------------------------------------------------

inline constexpr double kProbabilitySumTolerance = 1e-9;

/// Throws ValidationError unless `weights` is a nonnegative vector summing to
/// one within kProbabilitySumTolerance.
template <typename Derived>
void validate_probabilities(const Eigen::MatrixBase<Derived>& weights, std::string_view what)
{
    if (!all_finite(weights) || (weights.array() < 0).any()) {
        throw ValidationError(std::string(what) + ": weights must be finite and nonnegative");
    }
    const double total = static_cast<double>(weights.sum());
    if (std::abs(total - 1.0) > kProbabilitySumTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": weights sum to " << total << ", expected 1";
        throw ValidationError(os.str());
    }
}

/**
 * Lower weighted quantile: sort values ascending (stable) and return the first
 * one whose cumulative weight reaches q. No interpolation.
 *
 * A slack of a few ulps on the comparison keeps q = k/N exact for uniform
 * weights, where the running sum of 1/N may land just below k/N.
 */
template <typename V, typename W>
typename V::Scalar weighted_quantile(const Eigen::MatrixBase<V>& values,
                                     const Eigen::MatrixBase<W>& weights, double q)
{
    if (values.size() == 0 || values.size() != weights.size()) {
        throw ShapeError("weighted_quantile: values and weights must be nonempty and equal length");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw ValidationError("weighted_quantile: q must lie in [0, 1]");
    }
    validate_probabilities(weights, "weighted_quantile");

    std::vector<Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return values(a) < values(b); });

    constexpr double slack = 1e-12;
    double cumulative = 0.0;
    for (const Index i : order) {
        cumulative += static_cast<double>(weights(i));
        if (cumulative >= q - slack) {
            return values(i);
        }
    }
    return values(order.back());
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// A parameter set exposes its dense blocks as flat mutable/const views.
template <typename P>
concept ParameterSet = requires(P& p, const P& cp, std::size_t i) {
    { cp.block_count() } -> std::convertible_to<std::size_t>;
    { p.block(i) } -> std::convertible_to<Eigen::Map<Vector>>;
    { cp.block(i) } -> std::convertible_to<Eigen::Map<const Vector>>;
    { cp.block_name(i) } -> std::convertible_to<std::string_view>;
};

struct AdamState {
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;
    std::uint64_t step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// Zero moment buffers shaped like `params`.
    template <ParameterSet P>
    static AdamState for_params(const P& params, double lr)
    {
        AdamState state;
        state.lr = lr;
        for (std::size_t b = 0; b < params.block_count(); ++b) {
            const auto n = params.block(b).size();
            state.first_moment.push_back(Vector::Zero(n));
            state.second_moment.push_back(Vector::Zero(n));
        }
        return state;
    }
};

/// One bias-corrected Adam update of `params` in place.
template <ParameterSet P>
void adam_step(P& params, const P& grads, AdamState& state)
{
    const std::size_t blocks = params.block_count();
    if (grads.block_count() != blocks || state.first_moment.size() != blocks ||
        state.second_moment.size() != blocks) {
        throw ShapeError("adam_step: block count mismatch");
    }
    for (std::size_t b = 0; b < blocks; ++b) {
        const auto n = params.block(b).size();
        if (grads.block(b).size() != n || state.first_moment[b].size() != n ||
            state.second_moment[b].size() != n) {
            throw ShapeError("adam_step: shape mismatch in block '" +
                             std::string(params.block_name(b)) + "'");
        }
        if (!all_finite(grads.block(b))) {
            throw NumericError("adam_step: non-finite gradient in block '" +
                               std::string(params.block_name(b)) + "'");
        }
    }

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t b = 0; b < blocks; ++b) {
        auto theta = params.block(b);
        const auto g = grads.block(b);
        auto& m = state.first_moment[b];
        auto& v = state.second_moment[b];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        const auto m_hat = m.array() / correction1;
        const auto v_hat = v.array() / correction2;
        theta.array() -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

} // namespace prism
