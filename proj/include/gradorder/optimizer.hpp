#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradorder/core.hpp"
#include "gradorder/data.hpp"
#include "gradorder/losses.hpp"
#include "gradorder/ordering.hpp"

namespace gradorder {

enum class Algorithm {
    FullOrdering,         // one ordered pass over all samples per epoch
    DataSelection,        // fixed batches, only the top-q norms of each batch visited
    SortBeforeMiniBatch,  // global epoch-start sort, balanced batches, batch-mean steps
    SortWithinMiniBatch,  // per-batch sort, mean over the selected q samples
};

struct TrainConfig {
    Algorithm algorithm = Algorithm::FullOrdering;
    OrderingStrategy strategy{};
    StepSchedule schedule{};
    std::size_t epochs = 0;
    std::size_t batch_size = 0;    // S, batch algorithms only
    std::size_t select_count = 0;  // q; 0 means q = S
    std::size_t warm_start_epochs = 0;
    OrderingStrategy warm_start_strategy{StrategyKind::RandomShuffle};
};

struct TraceRecord {
    std::size_t epoch = 0;
    std::size_t iteration = 0;  // global update counter, strictly increasing
    double loss = 0.0;          // F(x) = (1/n) sum_i f_i(x), after the update
    std::optional<double> dist_sq;  // ||x - x*||^2 when the minimizer is supplied
    double step_size = 0.0;
    std::vector<double> epoch_start_norms;  // set on the first record of a full-pass epoch
};

/// Everything the bound harness needs to reconstruct one epoch of a run.
struct EpochLog {
    std::size_t epoch = 0;
    ParamVector x_start;
    /// Per-sample keys at epoch start, index order (gradient norms, or the
    /// prediction keys under LogitNorm). Empty for per-batch algorithms.
    std::vector<double> start_keys;
    /// Component ids in the order they contributed updates. For batch-mean
    /// algorithms this flattens each batch in canonical ascending-id order.
    std::vector<std::size_t> visit_order;
    /// One entry per update: ||grad f_visited|| for per-sample algorithms,
    /// the mean-gradient norm for batch-mean algorithms.
    std::vector<double> visit_grad_norms;
    std::vector<double> step_sizes;  // one alpha per update
};

struct TrainResult {
    std::vector<TraceRecord> records;
    std::vector<EpochLog> epochs;
    ParamVector final_x;
};

/// Thrown when an update produces a non-finite iterate (a divergent step
/// size); silently clipping would invalidate the bound checks.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t epoch, std::size_t iteration)
        : std::runtime_error("non-finite iterate at epoch " + std::to_string(epoch) +
                             ", iteration " + std::to_string(iteration)),
          epoch_(epoch), iteration_(iteration) {}
    std::size_t epoch() const { return epoch_; }
    std::size_t iteration() const { return iteration_; }

private:
    std::size_t epoch_, iteration_;
};

namespace detail {

class TrainRun {
public:
    TrainRun(const LossModel& model, const Dataset* data, const TrainConfig& cfg, ParamVector x0,
             const ParamVector* x_star)
        : model_(model), data_(data), cfg_(cfg), x_(std::move(x0)), x_star_(x_star),
          grad_(model.dim()), mean_(model.dim()) {
        n_ = model_.components();
        if (n_ == 0) throw std::invalid_argument("train: model has no components");
        if (x_.size() != model_.dim())
            throw std::invalid_argument("train: initial point dimension mismatch");
        if (x_star_ && x_star_->size() != model_.dim())
            throw std::invalid_argument("train: x_star dimension mismatch");
        if (cfg_.algorithm != Algorithm::FullOrdering) {
            if (cfg_.batch_size == 0 || cfg_.batch_size > n_)
                throw std::invalid_argument("train: batch_size must be in [1, n]");
            if (q() > cfg_.batch_size)
                throw std::invalid_argument("train: select_count q must be <= batch_size");
        }
    }

    TrainResult run() {
        for (std::size_t k = 0; k < cfg_.epochs; ++k) {
            const bool warm = k < cfg_.warm_start_epochs;
            const OrderingStrategy& strat = warm ? cfg_.warm_start_strategy : cfg_.strategy;
            if (warm || cfg_.algorithm == Algorithm::FullOrdering) {
                full_ordering_epoch(k, strat);
            } else if (cfg_.algorithm == Algorithm::DataSelection) {
                data_selection_epoch(k, strat);
            } else if (cfg_.algorithm == Algorithm::SortBeforeMiniBatch) {
                sort_before_epoch(k, strat);
            } else {
                sort_within_epoch(k, strat);
            }
        }
        out_.final_x = x_;
        return std::move(out_);
    }

private:
    std::size_t q() const {
        return cfg_.select_count == 0 ? cfg_.batch_size : cfg_.select_count;
    }

    /// Consecutive batches of size S; the last one may be short.
    std::vector<std::vector<std::size_t>> fixed_batches() const {
        std::vector<std::vector<std::size_t>> batches;
        for (std::size_t start = 0; start < n_; start += cfg_.batch_size) {
            const std::size_t stop = std::min(n_, start + cfg_.batch_size);
            std::vector<std::size_t> b(stop - start);
            std::iota(b.begin(), b.end(), start);
            batches.push_back(std::move(b));
        }
        return batches;
    }

    /// Ordering keys for a whole-epoch sort: gradient norms, except under
    /// LogitNorm where the classifier's prediction keys are used instead.
    std::vector<double> epoch_keys(const OrderingStrategy& strat) const {
        if (strat.kind != StrategyKind::LogitNorm) return grad_norms_at(model_, x_);
        return logit_keys_for(strat, nullptr);
    }

    std::vector<double> logit_keys_for(const OrderingStrategy& strat,
                                       const std::vector<std::size_t>* subset) const {
        if (strat.logit_order == LogitOrder::AscendingLogitNorm && !model_.supports_logits())
            throw std::invalid_argument("LogitNorm ordering requires a model with logits");
        const std::size_t count = subset ? subset->size() : n_;
        std::vector<double> keys(count);
        for (std::size_t j = 0; j < count; ++j) {
            const std::size_t i = subset ? (*subset)[j] : j;
            keys[j] = strat.logit_order == LogitOrder::WorstFirstByLoss
                          ? model_.value(i, x_)
                          : norm(model_.logits(i, x_));
        }
        return keys;
    }

    void apply_step(std::span<const double> direction, double alpha, std::size_t epoch) {
        axpy_neg(x_, alpha, direction);
        if (!all_finite(x_)) throw DivergenceError(epoch, iteration_);
    }

    void push_record(std::size_t epoch, double alpha, std::vector<double> norms_once = {}) {
        TraceRecord rec;
        rec.epoch = epoch;
        rec.iteration = iteration_++;
        rec.loss = full_loss(model_, x_);
        if (x_star_) rec.dist_sq = squared_distance(x_, *x_star_);
        rec.step_size = alpha;
        rec.epoch_start_norms = std::move(norms_once);
        out_.records.push_back(std::move(rec));
    }

    double next_alpha(std::size_t epoch) const { return alpha_at(cfg_.schedule, epoch, t_); }

    // ---- Algorithm 1: full data ordering ------------------------------------

    void full_ordering_epoch(std::size_t k, const OrderingStrategy& strat) {
        std::vector<double> keys = epoch_keys(strat);
        const Permutation perm = make_permutation(strat, keys, k, n_);
        EpochLog log{k, x_, keys, perm, {}, {}};
        for (std::size_t i = 0; i < n_; ++i) {
            const double alpha = next_alpha(k);
            model_.gradient(perm[i], x_, grad_);
            log.visit_grad_norms.push_back(norm(grad_));
            log.step_sizes.push_back(alpha);
            apply_step(grad_, alpha, k);
            ++t_;
            push_record(k, alpha, i == 0 ? std::move(keys) : std::vector<double>{});
        }
        out_.epochs.push_back(std::move(log));
    }

    // ---- Algorithm 2: ordering with data selection ---------------------------

    void data_selection_epoch(std::size_t k, const OrderingStrategy& strat) {
        if (strat.kind == StrategyKind::LogitNorm)
            throw std::invalid_argument("data selection orders by gradient norm, not logits");
        EpochLog log{k, x_, {}, {}, {}, {}};
        const auto batches = fixed_batches();
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& batch = batches[b];
            std::vector<double> bn(batch.size());
            for (std::size_t j = 0; j < batch.size(); ++j)
                bn[j] = model_.grad_norm(batch[j], x_);

            // selection is always the top-q by descending norm at the batch
            // start; the strategy only controls the visit order over them
            std::vector<std::size_t> order(batch.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t c) { return bn[a] > bn[c]; });
            const std::size_t take = std::min(q(), batch.size());
            std::vector<std::size_t> visit(order.begin(), order.begin() + take);
            switch (strat.kind) {
                case StrategyKind::DecreasingGradNorm: break;
                case StrategyKind::IncreasingGradNorm:
                    std::reverse(visit.begin(), visit.end());
                    break;
                case StrategyKind::Incremental:
                    std::sort(visit.begin(), visit.end());
                    break;
                case StrategyKind::RandomShuffle: {
                    SplitMix64 rng(
                        derive_stream(strat.seed, k * batches.size() + b));
                    fisher_yates(visit, rng);
                    break;
                }
                default: break;
            }
            for (std::size_t j : visit) {
                const std::size_t id = batch[j];
                const double alpha = next_alpha(k);
                model_.gradient(id, x_, grad_);
                log.visit_order.push_back(id);
                log.visit_grad_norms.push_back(norm(grad_));
                log.step_sizes.push_back(alpha);
                apply_step(grad_, alpha, k);
                ++t_;
                push_record(k, alpha);
            }
        }
        out_.epochs.push_back(std::move(log));
    }

    // ---- shared batch-mean update --------------------------------------------

    /// x <- x - (alpha / |members|) * sum_j grad f_j(x). Members are accumulated
    /// in ascending id order so the update is bit-identical under any
    /// permutation of the batch.
    void batch_mean_update(std::vector<std::size_t> members, std::size_t k, EpochLog& log) {
        std::sort(members.begin(), members.end());
        std::fill(mean_.begin(), mean_.end(), 0.0);
        for (std::size_t id : members) {
            model_.gradient(id, x_, grad_);
            for (std::size_t j = 0; j < mean_.size(); ++j) mean_[j] += grad_[j];
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        for (double& v : mean_) v *= inv;
        const double alpha = next_alpha(k);
        log.visit_order.insert(log.visit_order.end(), members.begin(), members.end());
        log.visit_grad_norms.push_back(norm(mean_));
        log.step_sizes.push_back(alpha);
        apply_step(mean_, alpha, k);
        ++t_;
        push_record(k, alpha);
    }

    // ---- Algorithm 3: sort, then balanced mini-batches ------------------------

    /// Deals the globally sorted samples into per-class queues, then fills each
    /// batch with up-to-ceil(S/K) samples per class, cycling classes in id
    /// order. Without class targets, batches are consecutive slices of the
    /// sorted order. When q < S the batch size shrinks to q while the batch
    /// count stays ceil(n/S), so the small-key tail is skipped.
    std::vector<std::vector<std::size_t>> balanced_batches(const Permutation& sorted) const {
        const std::size_t S = cfg_.batch_size;
        const std::size_t size_eff = q() < S ? q() : S;
        const std::size_t max_batches = (n_ + S - 1) / S;
        std::vector<std::vector<std::size_t>> batches;

        const bool categorical = data_ && data_->target_kind == TargetKind::Classification &&
                                 data_->num_classes > 1;
        if (!categorical) {
            for (std::size_t start = 0;
                 start < n_ && batches.size() < max_batches; start += size_eff) {
                const std::size_t stop = std::min(n_, start + size_eff);
                batches.emplace_back(sorted.begin() + start, sorted.begin() + stop);
            }
            return batches;
        }

        const std::size_t num_classes = data_->num_classes;
        std::vector<std::deque<std::size_t>> queues(num_classes);
        for (std::size_t id : sorted)
            queues[static_cast<std::size_t>(data_->label(id))].push_back(id);

        const std::size_t cap = (size_eff + num_classes - 1) / num_classes;
        while (batches.size() < max_batches) {
            std::vector<std::size_t> batch;
            std::vector<std::size_t> taken(num_classes, 0);
            bool progressed = true;
            while (batch.size() < size_eff && progressed) {
                progressed = false;
                for (std::size_t c = 0; c < num_classes && batch.size() < size_eff; ++c) {
                    if (!queues[c].empty() && taken[c] < cap) {
                        batch.push_back(queues[c].front());
                        queues[c].pop_front();
                        ++taken[c];
                        progressed = true;
                    }
                }
            }
            if (batch.empty()) break;
            batches.push_back(std::move(batch));
        }
        return batches;
    }

    void sort_before_epoch(std::size_t k, const OrderingStrategy& strat) {
        std::vector<double> keys = epoch_keys(strat);
        const Permutation perm = make_permutation(strat, keys, k, n_);
        EpochLog log{k, x_, keys, {}, {}, {}};
        bool first = true;
        for (auto& batch : balanced_batches(perm)) {
            batch_mean_update(std::move(batch), k, log);
            if (first) {
                out_.records.back().epoch_start_norms = keys;
                first = false;
            }
        }
        out_.epochs.push_back(std::move(log));
    }

    // ---- Algorithm 4: sorting within mini-batch -------------------------------

    /// Per batch: order members by the strategy at the current iterate, take
    /// the first q, and apply the mean gradient over those q only.
    void sort_within_epoch(std::size_t k, const OrderingStrategy& strat) {
        EpochLog log{k, x_, {}, {}, {}, {}};
        const auto batches = fixed_batches();
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& batch = batches[b];
            const std::size_t take = std::min(q(), batch.size());
            std::vector<std::size_t> chosen;
            if (strat.kind == StrategyKind::RandomShuffle) {
                std::vector<std::size_t> order(batch);
                SplitMix64 rng(derive_stream(strat.seed, k * batches.size() + b));
                fisher_yates(order, rng);
                chosen.assign(order.begin(), order.begin() + take);
            } else if (strat.kind == StrategyKind::Incremental) {
                chosen.assign(batch.begin(), batch.begin() + take);
            } else {
                std::vector<double> keys;
                if (strat.kind == StrategyKind::LogitNorm) {
                    keys = logit_keys_for(strat, &batch);
                } else {
                    keys.resize(batch.size());
                    for (std::size_t j = 0; j < batch.size(); ++j)
                        keys[j] = model_.grad_norm(batch[j], x_);
                }
                OrderingStrategy local = strat;
                const Permutation ord = make_permutation(local, keys, k, batch.size());
                chosen.reserve(take);
                for (std::size_t j = 0; j < take; ++j) chosen.push_back(batch[ord[j]]);
            }
            batch_mean_update(std::move(chosen), k, log);
        }
        out_.epochs.push_back(std::move(log));
    }

    const LossModel& model_;
    const Dataset* data_;
    const TrainConfig& cfg_;
    ParamVector x_;
    const ParamVector* x_star_;
    ParamVector grad_, mean_;
    std::size_t n_ = 0;
    std::size_t iteration_ = 0;
    std::uint64_t t_ = 0;  // cumulative update counter driving per-iteration decay
    TrainResult out_;
};

}  // namespace detail

/// Runs the configured algorithm from x0. Epochs [0, warm_start_epochs) are
/// full random-reshuffling (or whatever warm_start_strategy says) passes over
/// the full data regardless of algorithm; the main algorithm starts after.
/// The whole trace is a pure function of (model, data, config, x0).
inline TrainResult train(const LossModel& model, const Dataset* data, const TrainConfig& config,
                         ParamVector x0, const ParamVector* x_star = nullptr) {
    detail::TrainRun run(model, data, config, std::move(x0), x_star);
    return run.run();
}

inline TrainResult train_full_ordering(const LossModel& model, const Dataset* data,
                                       const TrainConfig& config, ParamVector x0,
                                       const ParamVector* x_star = nullptr) {
    if (config.algorithm != Algorithm::FullOrdering)
        throw std::invalid_argument("train_full_ordering: config.algorithm mismatch");
    return train(model, data, config, std::move(x0), x_star);
}

inline TrainResult train_data_selection(const LossModel& model, const Dataset* data,
                                        const TrainConfig& config, ParamVector x0,
                                        const ParamVector* x_star = nullptr) {
    if (config.algorithm != Algorithm::DataSelection)
        throw std::invalid_argument("train_data_selection: config.algorithm mismatch");
    return train(model, data, config, std::move(x0), x_star);
}

inline TrainResult train_sort_before_minibatch(const LossModel& model, const Dataset* data,
                                               const TrainConfig& config, ParamVector x0,
                                               const ParamVector* x_star = nullptr) {
    if (config.algorithm != Algorithm::SortBeforeMiniBatch)
        throw std::invalid_argument("train_sort_before_minibatch: config.algorithm mismatch");
    return train(model, data, config, std::move(x0), x_star);
}

inline TrainResult train_sort_within_minibatch(const LossModel& model, const Dataset* data,
                                               const TrainConfig& config, ParamVector x0,
                                               const ParamVector* x_star = nullptr) {
    if (config.algorithm != Algorithm::SortWithinMiniBatch)
        throw std::invalid_argument("train_sort_within_minibatch: config.algorithm mismatch");
    return train(model, data, config, std::move(x0), x_star);
}

}  // namespace gradorder
