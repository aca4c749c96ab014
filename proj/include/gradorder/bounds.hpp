#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gradorder/core.hpp"
#include "gradorder/losses.hpp"

namespace gradorder {

/// Inputs to the epoch-k distance bounds, all sequences in visit order:
///   M        gradient norms at the epoch-start point for the visited components
///   M_prime  gradient norms observed at the iteration each component was visited
///   C        per-component caps on the gradient norm (Assumption-1 constants)
///   m        strong-convexity constants (ignored by the convex bounds)
///   alphas   per-iteration step sizes alpha_{i,k}
///   alpha_k / alpha_k1   epoch-level step sizes (first step of epochs k, k+1)
///   eps_k    max_i |(f_i(x_k) - f_i(x*)) - ||M_i|| ||x_k - x*|||
struct BoundInputs {
    double dist_sq_k = 0.0;  // ||x_k - x*||^2
    std::vector<double> M;
    std::vector<double> M_prime;
    std::vector<double> C;
    std::vector<double> m;
    std::vector<double> alphas;
    double alpha_k = 0.0;
    double alpha_k1 = 0.0;
    double eps_k = 0.0;
};

namespace detail {

inline void validate_bound_inputs(const BoundInputs& in, bool need_m) {
    const std::size_t n = in.M.size();
    if (n == 0) throw std::invalid_argument("bounds: sequences must have length >= 1");
    if (in.M_prime.size() != n || in.C.size() != n || in.alphas.size() != n ||
        (need_m && in.m.size() != n))
        throw std::invalid_argument("bounds: input sequence length mismatch");
    if (in.dist_sq_k < 0.0) throw std::invalid_argument("bounds: dist_sq_k must be nonnegative");
}

/// 2 * sum_{i=1}^{n-1} (n-i) C_i^2 + sum_{i=1}^{n} C_i^2, empty sums = 0.
inline double cap_term(std::span<const double> C) {
    const std::size_t n = C.size();
    double weighted = 0.0, plain = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double c2 = C[j] * C[j];
        plain += c2;
        if (j + 1 <= n - 1) weighted += static_cast<double>(n - 1 - j) * c2;
    }
    return 2.0 * weighted + plain;
}

/// sum_{i=1}^{n-1} (n-i) m_i max(||M_i||, ||M_i'||)^2
inline double curvature_term(std::span<const double> m, std::span<const double> M,
                             std::span<const double> Mp) {
    const std::size_t n = M.size();
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double mx = std::max(M[j], Mp[j]);
        s += static_cast<double>(n - 1 - j) * m[j] * mx * mx;
    }
    return s;
}

}  // namespace detail

/// Strongly convex, decreasing step size per iteration:
///   D_k^2 - 2 D_k sum_i alpha_{i,k} ||M_i||
///         + alpha_k^2 (2 sum_{i<n} (n-i) C_i^2 + sum_i C_i^2)
///         - alpha_k^2 alpha_{k+1} sum_{i<n} (n-i) m_i max(||M_i||,||M_i'||)^2
///         + n alpha_k eps_k
inline double bound_thm1(const BoundInputs& in) {
    detail::validate_bound_inputs(in, true);
    const std::size_t n = in.M.size();
    const double dist = std::sqrt(in.dist_sq_k);
    double gain = 0.0;
    for (std::size_t j = 0; j < n; ++j) gain += in.alphas[j] * in.M[j];
    return in.dist_sq_k - 2.0 * dist * gain + in.alpha_k * in.alpha_k * detail::cap_term(in.C) -
           in.alpha_k * in.alpha_k * in.alpha_k1 * detail::curvature_term(in.m, in.M, in.M_prime) +
           static_cast<double>(n) * in.alpha_k * in.eps_k;
}

/// Strongly convex, constant step size (read from alpha_k):
/// same shape with the curvature term scaled by alpha^3.
inline double bound_thm2(const BoundInputs& in) {
    detail::validate_bound_inputs(in, true);
    const std::size_t n = in.M.size();
    const double a = in.alpha_k;
    const double dist = std::sqrt(in.dist_sq_k);
    double norm_sum = 0.0;
    for (double v : in.M) norm_sum += v;
    return in.dist_sq_k - 2.0 * a * dist * norm_sum + a * a * detail::cap_term(in.C) -
           a * a * a * detail::curvature_term(in.m, in.M, in.M_prime) +
           static_cast<double>(n) * a * in.eps_k;
}

/// Convex, decreasing step size: Theorem-1 form without the curvature term.
inline double bound_thm3(const BoundInputs& in) {
    detail::validate_bound_inputs(in, false);
    const std::size_t n = in.M.size();
    const double dist = std::sqrt(in.dist_sq_k);
    double gain = 0.0;
    for (std::size_t j = 0; j < n; ++j) gain += in.alphas[j] * in.M[j];
    return in.dist_sq_k - 2.0 * dist * gain + in.alpha_k * in.alpha_k * detail::cap_term(in.C) +
           static_cast<double>(n) * in.alpha_k * in.eps_k;
}

/// Convex, constant step size: Theorem-2 form without the curvature term.
inline double bound_thm4(const BoundInputs& in) {
    detail::validate_bound_inputs(in, false);
    const std::size_t n = in.M.size();
    const double a = in.alpha_k;
    const double dist = std::sqrt(in.dist_sq_k);
    double norm_sum = 0.0;
    for (double v : in.M) norm_sum += v;
    return in.dist_sq_k - 2.0 * a * dist * norm_sum + a * a * detail::cap_term(in.C) +
           static_cast<double>(n) * a * in.eps_k;
}

/// eps_k oracle: max over components of
/// |(f_i(x_k) - f_i(x*)) - ||grad f_i(x_k)|| * ||x_k - x*|||.
inline double epsilon_k(const LossModel& model, std::span<const double> x_k,
                        std::span<const double> x_star) {
    const double dist = std::sqrt(squared_distance(x_k, x_star));
    double worst = 0.0;
    for (std::size_t i = 0; i < model.components(); ++i) {
        const double gap = model.value(i, x_k) - model.value(i, x_star);
        const double linear = model.grad_norm(i, x_k) * dist;
        worst = std::max(worst, std::abs(gap - linear));
    }
    return worst;
}

}  // namespace gradorder
