#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "gradorder/rng.hpp"

namespace gradorder {

/// Visit order over component indices for one epoch; always a bijection on
/// [0, n).
using Permutation = std::vector<std::size_t>;

enum class StrategyKind {
    RandomShuffle,       // fresh Fisher-Yates permutation per epoch
    DecreasingGradNorm,  // largest epoch-start gradient norm first
    IncreasingGradNorm,  // smallest first
    Incremental,         // fixed identity order every epoch
    LogitNorm,           // classifier prediction keys, see LogitOrder
};

/// What "sort by norm of logits" means for classifiers. The default treats
/// the per-sample loss as the key and visits the worst-predicted samples
/// first; the raw ascending logit-vector norm is the documented alternate.
enum class LogitOrder { WorstFirstByLoss, AscendingLogitNorm };

struct OrderingStrategy {
    StrategyKind kind = StrategyKind::RandomShuffle;
    std::uint64_t seed = 0;  // RandomShuffle only
    LogitOrder logit_order = LogitOrder::WorstFirstByLoss;
};

/// True when make_permutation needs per-sample keys for this strategy.
constexpr bool strategy_needs_keys(StrategyKind k) {
    return k == StrategyKind::DecreasingGradNorm || k == StrategyKind::IncreasingGradNorm ||
           k == StrategyKind::LogitNorm;
}

inline void fisher_yates(Permutation& order, SplitMix64& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
    }
}

/// Builds the epoch permutation. `keys` carries per-sample gradient norms
/// (or, for LogitNorm, the prediction keys supplied by the caller) and must
/// have length n for the sort-based strategies. Ties break by ascending
/// original index. RandomShuffle draws from a stream derived from
/// (strategy.seed, epoch), so the result is a pure function of its arguments.
inline Permutation make_permutation(const OrderingStrategy& strategy,
                                    std::span<const double> keys, std::size_t epoch,
                                    std::size_t n) {
    if (n == 0) throw std::invalid_argument("make_permutation: n must be positive");
    Permutation order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    const bool descending = strategy.kind == StrategyKind::DecreasingGradNorm ||
                            (strategy.kind == StrategyKind::LogitNorm &&
                             strategy.logit_order == LogitOrder::WorstFirstByLoss);

    switch (strategy.kind) {
        case StrategyKind::Incremental: return order;
        case StrategyKind::RandomShuffle: {
            SplitMix64 rng(derive_stream(strategy.seed, epoch));
            fisher_yates(order, rng);
            return order;
        }
        case StrategyKind::DecreasingGradNorm:
        case StrategyKind::IncreasingGradNorm:
        case StrategyKind::LogitNorm: {
            if (keys.size() != n)
                throw std::invalid_argument("make_permutation: keys length must equal n");
            if (descending) {
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
            } else {
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
            }
            return order;
        }
    }
    throw std::logic_error("make_permutation: unknown strategy");
}

inline bool is_bijection(const Permutation& p) {
    std::vector<bool> seen(p.size(), false);
    for (std::size_t v : p) {
        if (v >= p.size() || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

}  // namespace gradorder
