#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradorder/core.hpp"
#include "gradorder/data.hpp"

namespace gradorder {

/// Per-component differentiable loss f_i with exact analytic gradients.
/// Implementations are immutable after construction; value/gradient are pure
/// and safe to call concurrently.
class LossModel {
public:
    virtual ~LossModel() = default;

    virtual std::size_t components() const = 0;  // n
    virtual std::size_t dim() const = 0;         // parameter dimension

    virtual double value(std::size_t component, std::span<const double> x) const = 0;
    virtual void gradient(std::size_t component, std::span<const double> x,
                          std::span<double> out) const = 0;

    /// ||grad f_i(x)||_2. Default computes the gradient into a scratch vector.
    virtual double grad_norm(std::size_t component, std::span<const double> x) const {
        std::vector<double> g(dim());
        gradient(component, x, g);
        return norm(g);
    }

    /// Strong-convexity constant m_i shared by all components (appendix
    /// convention: f(y) >= f(x) + grad'(y-x) + (m/2)||y-x||^2). Zero means
    /// convex only.
    virtual double strong_convexity() const { return 0.0; }

    /// Classifiers expose pre-softmax scores for logit-norm ordering.
    virtual bool supports_logits() const { return false; }
    virtual std::vector<double> logits(std::size_t, std::span<const double>) const {
        throw std::invalid_argument("this loss model does not expose logits");
    }

protected:
    void check_args(std::size_t component, std::span<const double> x) const {
        if (component >= components())
            throw std::invalid_argument("loss: component index out of range");
        if (x.size() != dim()) throw std::invalid_argument("loss: parameter dimension mismatch");
    }
};

inline ParamVector loss_grad(const LossModel& m, std::size_t component, std::span<const double> x) {
    ParamVector g(m.dim());
    m.gradient(component, x, g);
    return g;
}

/// F(x) = (1/n) sum_i f_i(x)
inline double full_loss(const LossModel& m, std::span<const double> x) {
    double s = 0.0;
    const std::size_t n = m.components();
    for (std::size_t i = 0; i < n; ++i) s += m.value(i, x);
    return s / static_cast<double>(n);
}

/// grad F(x) = (1/n) sum_i grad f_i(x)
inline ParamVector full_gradient(const LossModel& m, std::span<const double> x) {
    ParamVector acc(m.dim(), 0.0);
    ParamVector g(m.dim());
    const std::size_t n = m.components();
    for (std::size_t i = 0; i < n; ++i) {
        m.gradient(i, x, g);
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
    }
    for (double& v : acc) v /= static_cast<double>(n);
    return acc;
}

/// Epoch-start snapshot: every component's gradient norm evaluated at the one
/// point x.
inline std::vector<double> grad_norms_at(const LossModel& m, std::span<const double> x) {
    std::vector<double> out(m.components());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.grad_norm(i, x);
    return out;
}

/// Synthetic component losses anchored at the generated data vectors d_i, so
/// the finite sum has a nontrivial minimizer.
///
///   QuarticPlusQuadratic:  f_i(x) = ||x - d_i||_4^4 + ||x - d_i||_2^2
///   IndicatorSwitched:     per coordinate z = (x - d_i)_j,
///                          z < 0 contributes z^4, otherwise z^2
///
/// QuarticPlusQuadratic is strongly convex with m = 2 (from the quadratic
/// term); IndicatorSwitched is convex and C^1 (both branches meet flat at the
/// switch point, where the quadratic branch defines the gradient).
class SyntheticAnchorLoss final : public LossModel {
public:
    enum class Mode { QuarticPlusQuadratic, IndicatorSwitched };

    SyntheticAnchorLoss(const Dataset& anchors, Mode mode)
        : anchors_(anchors.features), n_(anchors.rows), d_(anchors.cols), mode_(mode) {}

    SyntheticAnchorLoss(std::vector<double> anchors_flat, std::size_t n, std::size_t dim,
                        Mode mode)
        : anchors_(std::move(anchors_flat)), n_(n), d_(dim), mode_(mode) {
        if (anchors_.size() != n_ * d_)
            throw std::invalid_argument("SyntheticAnchorLoss: anchor matrix shape mismatch");
    }

    std::size_t components() const override { return n_; }
    std::size_t dim() const override { return d_; }

    double value(std::size_t i, std::span<const double> x) const override {
        check_args(i, x);
        const double* a = anchors_.data() + i * d_;
        double s = 0.0;
        for (std::size_t j = 0; j < d_; ++j) {
            const double z = x[j] - a[j];
            const double z2 = z * z;
            if (mode_ == Mode::QuarticPlusQuadratic)
                s += z2 * z2 + z2;
            else
                s += z < 0.0 ? z2 * z2 : z2;
        }
        return s;
    }

    void gradient(std::size_t i, std::span<const double> x, std::span<double> out) const override {
        check_args(i, x);
        if (out.size() != d_) throw std::invalid_argument("gradient: output dimension mismatch");
        const double* a = anchors_.data() + i * d_;
        for (std::size_t j = 0; j < d_; ++j) {
            const double z = x[j] - a[j];
            if (mode_ == Mode::QuarticPlusQuadratic)
                out[j] = 4.0 * z * z * z + 2.0 * z;
            else
                out[j] = z < 0.0 ? 4.0 * z * z * z : 2.0 * z;
        }
    }

    double strong_convexity() const override {
        return mode_ == Mode::QuarticPlusQuadratic ? 2.0 : 0.0;
    }

    Mode mode() const { return mode_; }

private:
    std::vector<double> anchors_;
    std::size_t n_, d_;
    Mode mode_;
};

/// Quartic linear-regression loss on (w, b), parameters laid out as
/// (w_0..w_{d-1}, b):
///
///   f_i(w, b) = r^4 + r^2,  r = w'x_i + b - y_i
///
/// The returned gradient is multiplied by grad_scale (default 1e-10, the
/// overflow guard used with the raw-unit regression datasets); the loss value
/// is never scaled.
class LinRegQuarticLoss final : public LossModel {
public:
    explicit LinRegQuarticLoss(const Dataset& data, double grad_scale = 1e-10)
        : features_(data.features), targets_(data.targets), n_(data.rows), d_(data.cols),
          grad_scale_(grad_scale) {
        if (!data.has_targets() || targets_.size() != n_)
            throw std::invalid_argument("LinRegQuarticLoss: dataset must carry targets");
        if (!(grad_scale_ > 0.0))
            throw std::invalid_argument("LinRegQuarticLoss: grad_scale must be positive");
    }

    std::size_t components() const override { return n_; }
    std::size_t dim() const override { return d_ + 1; }
    double grad_scale() const { return grad_scale_; }

    double residual(std::size_t i, std::span<const double> x) const {
        const double* f = features_.data() + i * d_;
        double r = x[d_] - targets_[i];
        for (std::size_t j = 0; j < d_; ++j) r += x[j] * f[j];
        return r;
    }

    double value(std::size_t i, std::span<const double> x) const override {
        check_args(i, x);
        const double r = residual(i, x);
        const double r2 = r * r;
        return r2 * r2 + r2;
    }

    void gradient(std::size_t i, std::span<const double> x, std::span<double> out) const override {
        check_args(i, x);
        if (out.size() != dim()) throw std::invalid_argument("gradient: output dimension mismatch");
        const double r = residual(i, x);
        const double c = grad_scale_ * (4.0 * r * r * r + 2.0 * r);
        const double* f = features_.data() + i * d_;
        for (std::size_t j = 0; j < d_; ++j) out[j] = c * f[j];
        out[d_] = c;
    }

private:
    std::vector<double> features_;
    std::vector<double> targets_;
    std::size_t n_, d_;
    double grad_scale_;
};

/// Concrete estimator for the Assumption-1 caps C_i: running max of the
/// gradient norms observed for each component, plus a 10% margin, unless
/// explicit caps are supplied.
class GradBoundEstimate {
public:
    explicit GradBoundEstimate(std::size_t n, double margin = 0.1)
        : peak_(n, 0.0), margin_(margin) {}

    static GradBoundEstimate explicit_caps(std::vector<double> caps) {
        GradBoundEstimate e(caps.size(), 0.0);
        e.peak_ = std::move(caps);
        e.explicit_ = true;
        return e;
    }

    void observe(std::size_t i, double grad_norm) {
        if (i >= peak_.size()) throw std::invalid_argument("GradBoundEstimate: index out of range");
        if (grad_norm > peak_[i]) peak_[i] = grad_norm;
    }

    void observe_all(std::span<const double> norms) {
        if (norms.size() != peak_.size())
            throw std::invalid_argument("GradBoundEstimate: length mismatch");
        for (std::size_t i = 0; i < norms.size(); ++i) observe(i, norms[i]);
    }

    double cap(std::size_t i) const {
        if (i >= peak_.size()) throw std::invalid_argument("GradBoundEstimate: index out of range");
        return explicit_ ? peak_[i] : (1.0 + margin_) * peak_[i];
    }

    std::size_t size() const { return peak_.size(); }

private:
    std::vector<double> peak_;
    double margin_;
    bool explicit_ = false;
};

}  // namespace gradorder
