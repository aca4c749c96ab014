#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace gradorder {

/// Flat parameter vector. Loss models define their own interpretation of the
/// layout (e.g. (w, b) with the bias last for linear models).
using ParamVector = std::vector<double>;

inline double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("squared_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// x <- x - alpha * g
inline void axpy_neg(std::span<double> x, double alpha, std::span<const double> g) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= alpha * g[i];
}

enum class ScheduleKind {
    Constant,
    DecreasingPerIteration,  // alpha0 / (t + 1), t the global update counter
    DecreasingPerEpoch,      // alpha0 / (k + 1), constant within epoch k
};

/// Step-size rule alpha_{i,k}. `n` is the number of updates per epoch and is
/// only used to convert (epoch, iter) into the global update counter.
struct StepSchedule {
    ScheduleKind kind = ScheduleKind::Constant;
    double alpha0 = 1e-4;
    std::size_t n = 1;
};

/// Step size by epoch index and cumulative update counter. Trainers whose
/// epochs do not all contain the same number of updates (warm start followed
/// by a batch phase) feed the true cumulative counter here.
inline double alpha_at(const StepSchedule& s, std::size_t epoch, std::uint64_t global_update) {
    if (!(s.alpha0 >= 0.0) || !std::isfinite(s.alpha0))
        throw std::invalid_argument("StepSchedule: alpha0 must be finite and nonnegative");
    switch (s.kind) {
        case ScheduleKind::Constant: return s.alpha0;
        case ScheduleKind::DecreasingPerIteration:
            return s.alpha0 / static_cast<double>(global_update + 1);
        case ScheduleKind::DecreasingPerEpoch:
            return s.alpha0 / static_cast<double>(epoch + 1);
    }
    throw std::logic_error("StepSchedule: unknown kind");
}

/// alpha_{i,k} for iteration `iter` of epoch `epoch`; requires iter < s.n.
inline double step_size(const StepSchedule& s, std::size_t epoch, std::size_t iter) {
    if (s.n == 0) throw std::invalid_argument("step_size: schedule.n must be positive");
    if (iter >= s.n) throw std::invalid_argument("step_size: iter must be < schedule.n");
    return alpha_at(s, epoch, static_cast<std::uint64_t>(epoch) * s.n + iter);
}

}  // namespace gradorder
