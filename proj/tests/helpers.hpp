#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gradorder/core.hpp"
#include "gradorder/losses.hpp"
#include "gradorder/rng.hpp"

namespace testutil {

/// Central finite differences, independent of any analytic gradient path.
inline std::vector<double> fd_gradient(const gradorder::LossModel& m, std::size_t component,
                                       std::span<const double> x, double h) {
    std::vector<double> g(x.size());
    std::vector<double> p(x.begin(), x.end());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double orig = p[j];
        p[j] = orig + h;
        const double fp = m.value(component, p);
        p[j] = orig - h;
        const double fm = m.value(component, p);
        p[j] = orig;
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double rel_grad_error(std::span<const double> analytic, std::span<const double> fd) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t j = 0; j < analytic.size(); ++j) {
        diff += (analytic[j] - fd[j]) * (analytic[j] - fd[j]);
        ref += analytic[j] * analytic[j];
    }
    return std::sqrt(diff) / std::max(1.0, std::sqrt(ref));
}

/// Plain quadratic components f_i(x) = ||x - d_i||^2; used where tests need a
/// hand-unrollable recursion.
class QuadraticAnchorLoss final : public gradorder::LossModel {
public:
    QuadraticAnchorLoss(std::vector<double> anchors_flat, std::size_t n, std::size_t dim)
        : anchors_(std::move(anchors_flat)), n_(n), d_(dim) {}

    std::size_t components() const override { return n_; }
    std::size_t dim() const override { return d_; }

    double value(std::size_t i, std::span<const double> x) const override {
        check_args(i, x);
        const double* a = anchors_.data() + i * d_;
        double s = 0.0;
        for (std::size_t j = 0; j < d_; ++j) {
            const double z = x[j] - a[j];
            s += z * z;
        }
        return s;
    }

    void gradient(std::size_t i, std::span<const double> x,
                  std::span<double> out) const override {
        check_args(i, x);
        const double* a = anchors_.data() + i * d_;
        for (std::size_t j = 0; j < d_; ++j) out[j] = 2.0 * (x[j] - a[j]);
    }

    double strong_convexity() const override { return 2.0; }

private:
    std::vector<double> anchors_;
    std::size_t n_, d_;
};

inline std::vector<double> random_point(gradorder::SplitMix64& rng, std::size_t dim, double lo,
                                        double hi) {
    std::vector<double> x(dim);
    for (double& v : x) v = lo + (hi - lo) * rng.next_unit();
    return x;
}

}  // namespace testutil
