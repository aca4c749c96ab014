#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "gradorder/core.hpp"
#include "gradorder/data.hpp"
#include "gradorder/losses.hpp"
#include "gradorder/rng.hpp"

namespace gradorder {

/// Dense feed-forward classifier: rectifier hidden layers, softmax
/// cross-entropy output, exact hand-derived backpropagation.
///
/// The network itself is stateless; parameters travel as a flat vector laid
/// out layer by layer, for layer l with fan-in `in` and fan-out `out`:
/// weights row-major (out x in, row r holds the weights of output unit r),
/// followed by the out biases. "2 layer" / "7 layer" count weight layers.
class DenseNet {
public:
    explicit DenseNet(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
        if (dims_.size() < 2) throw std::invalid_argument("DenseNet: need at least [in, classes]");
        for (std::size_t d : dims_)
            if (d == 0) throw std::invalid_argument("DenseNet: zero-width layer");
        param_count_ = 0;
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l)
            param_count_ += dims_[l] * dims_[l + 1] + dims_[l + 1];
    }

    std::size_t param_count() const { return param_count_; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t num_classes() const { return dims_.back(); }
    std::size_t weight_layers() const { return dims_.size() - 1; }
    const std::vector<std::size_t>& layer_dims() const { return dims_; }

    /// Seeded uniform init on [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
    ParamVector init_params(std::uint64_t seed) const {
        ParamVector p(param_count_);
        SplitMix64 rng(derive_stream(seed, 0));
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
            const std::size_t count = dims_[l] * dims_[l + 1] + dims_[l + 1];
            for (std::size_t k = 0; k < count; ++k)
                p[off + k] = bound * (2.0 * rng.next_unit() - 1.0);
            off += count;
        }
        return p;
    }

    /// Pre-softmax scores for one sample.
    std::vector<double> forward_logits(std::span<const double> params,
                                       std::span<const double> x) const {
        check_shapes(params, x);
        std::vector<double> act(x.begin(), x.end());
        std::vector<double> next;
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            const std::size_t in = dims_[l], out = dims_[l + 1];
            next.assign(out, 0.0);
            for (std::size_t r = 0; r < out; ++r) {
                const double* w = params.data() + off + r * in;
                double s = params[off + out * in + r];
                for (std::size_t c = 0; c < in; ++c) s += w[c] * act[c];
                next[r] = s;
            }
            off += out * in + out;
            if (l + 2 < dims_.size())
                for (double& v : next) v = v > 0.0 ? v : 0.0;
            act.swap(next);
        }
        return act;
    }

    double sample_loss(std::span<const double> params, std::span<const double> x,
                       int label) const {
        const std::vector<double> z = forward_logits(params, x);
        return cross_entropy(z, label);
    }

    /// Cross-entropy loss and its exact gradient w.r.t. all parameters,
    /// written into grad_out (must have param_count() entries).
    double sample_loss_and_grad(std::span<const double> params, std::span<const double> x,
                                int label, std::span<double> grad_out) const {
        check_shapes(params, x);
        if (grad_out.size() != param_count_)
            throw std::invalid_argument("DenseNet: gradient buffer size mismatch");
        const std::size_t layers = dims_.size() - 1;

        // forward pass keeping every activation
        std::vector<std::vector<double>> acts(layers + 1);
        std::vector<std::vector<double>> pre(layers);  // pre-activation values
        acts[0].assign(x.begin(), x.end());
        std::size_t off = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            const std::size_t in = dims_[l], out = dims_[l + 1];
            pre[l].assign(out, 0.0);
            for (std::size_t r = 0; r < out; ++r) {
                const double* w = params.data() + off + r * in;
                double s = params[off + out * in + r];
                for (std::size_t c = 0; c < in; ++c) s += w[c] * acts[l][c];
                pre[l][r] = s;
            }
            off += out * in + out;
            acts[l + 1] = pre[l];
            if (l + 1 < layers)
                for (double& v : acts[l + 1]) v = v > 0.0 ? v : 0.0;
        }

        const std::vector<double>& z = acts[layers];
        const double loss = cross_entropy(z, label);

        // delta at the output: softmax(z) - onehot(label)
        std::vector<double> delta = softmax(z);
        delta[static_cast<std::size_t>(label)] -= 1.0;

        std::vector<double> prev_delta;
        for (std::size_t l = layers; l-- > 0;) {
            const std::size_t in = dims_[l], out = dims_[l + 1];
            off -= out * in + out;
            double* gw = grad_out.data() + off;
            double* gb = grad_out.data() + off + out * in;
            for (std::size_t r = 0; r < out; ++r) {
                const double dr = delta[r];
                gb[r] = dr;
                double* gwr = gw + r * in;
                for (std::size_t c = 0; c < in; ++c) gwr[c] = dr * acts[l][c];
            }
            if (l > 0) {
                prev_delta.assign(in, 0.0);
                for (std::size_t r = 0; r < out; ++r) {
                    const double dr = delta[r];
                    const double* w = params.data() + off + r * in;
                    for (std::size_t c = 0; c < in; ++c) prev_delta[c] += dr * w[c];
                }
                for (std::size_t c = 0; c < in; ++c)
                    if (pre[l - 1][c] <= 0.0) prev_delta[c] = 0.0;
                delta.swap(prev_delta);
            }
        }
        return loss;
    }

    int predict(std::span<const double> params, std::span<const double> x) const {
        const std::vector<double> z = forward_logits(params, x);
        return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }

    static std::vector<double> softmax(std::span<const double> z) {
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        std::vector<double> p(z.size());
        double denom = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            p[k] = std::exp(z[k] - zmax);
            denom += p[k];
        }
        for (double& v : p) v /= denom;
        return p;
    }

    /// log-sum-exp(z) - z[label], stable under max subtraction.
    static double cross_entropy(std::span<const double> z, int label) {
        if (label < 0 || static_cast<std::size_t>(label) >= z.size())
            throw std::invalid_argument("DenseNet: label out of range");
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double s = 0.0;
        for (double v : z) s += std::exp(v - zmax);
        return zmax + std::log(s) - z[static_cast<std::size_t>(label)];
    }

private:
    void check_shapes(std::span<const double> params, std::span<const double> x) const {
        if (params.size() != param_count_)
            throw std::invalid_argument("DenseNet: parameter vector size mismatch");
        if (x.size() != dims_.front())
            throw std::invalid_argument("DenseNet: sample dimension mismatch");
    }

    std::vector<std::size_t> dims_;
    std::size_t param_count_ = 0;
};

/// LossModel adapter: component i is the cross-entropy of sample i, the
/// parameter vector is the flattened network.
class MlpLoss final : public LossModel {
public:
    MlpLoss(DenseNet net, Dataset data) : net_(std::move(net)), data_(std::move(data)) {
        if (data_.target_kind != TargetKind::Classification)
            throw std::invalid_argument("MlpLoss: dataset must carry class targets");
        if (data_.cols != net_.input_dim())
            throw std::invalid_argument("MlpLoss: dataset width does not match network input");
        if (data_.num_classes > net_.num_classes())
            throw std::invalid_argument("MlpLoss: more classes in data than network outputs");
    }

    std::size_t components() const override { return data_.rows; }
    std::size_t dim() const override { return net_.param_count(); }

    double value(std::size_t i, std::span<const double> x) const override {
        check_args(i, x);
        return net_.sample_loss(x, data_.row(i), data_.label(i));
    }

    void gradient(std::size_t i, std::span<const double> x, std::span<double> out) const override {
        check_args(i, x);
        net_.sample_loss_and_grad(x, data_.row(i), data_.label(i), out);
    }

    bool supports_logits() const override { return true; }

    std::vector<double> logits(std::size_t i, std::span<const double> x) const override {
        check_args(i, x);
        return net_.forward_logits(x, data_.row(i));
    }

    double accuracy(std::span<const double> x) const {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < data_.rows; ++i)
            if (net_.predict(x, data_.row(i)) == data_.label(i)) ++correct;
        return static_cast<double>(correct) / static_cast<double>(data_.rows);
    }

    const DenseNet& net() const { return net_; }
    const Dataset& dataset() const { return data_; }

private:
    DenseNet net_;
    Dataset data_;
};

}  // namespace gradorder
