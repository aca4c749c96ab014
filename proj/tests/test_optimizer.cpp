#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gradorder/losses.hpp"
#include "gradorder/optimizer.hpp"
#include "helpers.hpp"

using namespace gradorder;
using testutil::QuadraticAnchorLoss;
using SynthMode = SyntheticAnchorLoss::Mode;

namespace {

TrainConfig full_cfg(StrategyKind kind, ScheduleKind sched, double alpha0, std::size_t epochs,
                     std::uint64_t seed = 0) {
    TrainConfig cfg;
    cfg.algorithm = Algorithm::FullOrdering;
    cfg.strategy = {kind, seed};
    cfg.schedule = {sched, alpha0, 1};
    cfg.epochs = epochs;
    return cfg;
}

Dataset binary_targets_dataset(std::vector<double> anchors_flat, std::vector<double> labels) {
    Dataset d;
    d.rows = labels.size();
    d.cols = anchors_flat.size() / labels.size();
    d.features = std::move(anchors_flat);
    d.target_kind = TargetKind::Classification;
    d.targets = std::move(labels);
    d.num_classes = 2;
    return d;
}

}  // namespace

TEST_CASE("n=1 runs are strategy-independent", "[optimizer]") {
    const QuadraticAnchorLoss model({2.5}, 1, 1);
    std::vector<TrainResult> results;
    for (auto kind : {StrategyKind::RandomShuffle, StrategyKind::DecreasingGradNorm,
                      StrategyKind::IncreasingGradNorm, StrategyKind::Incremental}) {
        results.push_back(
            train(model, nullptr, full_cfg(kind, ScheduleKind::Constant, 0.05, 1, 9), {0.0}));
    }
    for (std::size_t i = 1; i < results.size(); ++i) {
        REQUIRE(results[i].records.size() == results[0].records.size());
        for (std::size_t r = 0; r < results[0].records.size(); ++r)
            CHECK(results[i].records[r].loss == results[0].records[r].loss);
        CHECK(results[i].final_x == results[0].final_x);
    }
}

TEST_CASE("zero step size freezes the iterate", "[optimizer]") {
    const SyntheticAnchorLoss model(gen_synthetic(2, 6, 2, -10.0, 10.0),
                                    SynthMode::QuarticPlusQuadratic);
    const ParamVector x0{1.0, -2.0};
    const double f0 = full_loss(model, x0);
    const auto result = train(
        model, nullptr, full_cfg(StrategyKind::DecreasingGradNorm, ScheduleKind::Constant, 0.0, 3),
        x0);
    for (const auto& rec : result.records) CHECK(rec.loss == f0);
    CHECK(result.final_x == x0);
}

TEST_CASE("two quadratic components match the hand-unrolled recursion", "[optimizer]") {
    // f_i(x) = ||x - d_i||^2, incremental order, constant alpha:
    //   x1 = x0 - 2a(x0 - d1), x2 = x1 - 2a(x1 - d2)
    const double a = 0.05;
    const ParamVector d1{1.0, -1.0}, d2{-3.0, 2.0};
    const QuadraticAnchorLoss model({d1[0], d1[1], d2[0], d2[1]}, 2, 2);
    const ParamVector x0{0.5, 0.25};

    ParamVector x1(2), x2(2);
    for (int j = 0; j < 2; ++j) x1[j] = x0[j] - 2.0 * a * (x0[j] - d1[j]);
    for (int j = 0; j < 2; ++j) x2[j] = x1[j] - 2.0 * a * (x1[j] - d2[j]);

    const auto result = train(model, nullptr,
                              full_cfg(StrategyKind::Incremental, ScheduleKind::Constant, a, 1),
                              x0);
    REQUIRE(result.records.size() == 2);
    for (int j = 0; j < 2; ++j) CHECK(result.final_x[j] == Catch::Approx(x2[j]).margin(1e-12));
    const double expected_loss = 0.5 * (model.value(0, x2) + model.value(1, x2));
    CHECK(result.records.back().loss == Catch::Approx(expected_loss).margin(1e-12));
}

TEST_CASE("trace losses and distances match independent replay", "[optimizer]") {
    const Dataset data = gen_synthetic(8, 8, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    const ParamVector x_star(2, 0.0);  // reference point, not the true minimizer
    auto cfg = full_cfg(StrategyKind::DecreasingGradNorm, ScheduleKind::DecreasingPerIteration,
                        1e-5, 4);
    const auto result = train(model, &data, cfg, ParamVector{0.0, 0.0}, &x_star);

    std::size_t rec = 0;
    for (const EpochLog& log : result.epochs) {
        ParamVector x = log.x_start;
        for (std::size_t i = 0; i < log.visit_order.size(); ++i) {
            const ParamVector g = loss_grad(model, log.visit_order[i], x);
            for (std::size_t j = 0; j < x.size(); ++j) x[j] -= log.step_sizes[i] * g[j];
            const double replayed_loss = full_loss(model, x);
            const auto& r = result.records[rec++];
            CHECK(r.loss == Catch::Approx(replayed_loss).epsilon(1e-12));
            CHECK(*r.dist_sq == Catch::Approx(squared_distance(x, x_star)).epsilon(1e-12));
            CHECK(r.step_size == log.step_sizes[i]);
        }
    }
    CHECK(rec == result.records.size());
}

TEST_CASE("the whole trace is deterministic", "[optimizer]") {
    const Dataset data = gen_synthetic(4, 10, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    auto cfg = full_cfg(StrategyKind::RandomShuffle, ScheduleKind::DecreasingPerEpoch, 1e-4, 5, 77);
    const auto a = train(model, &data, cfg, ParamVector{1.0, 1.0});
    const auto b = train(model, &data, cfg, ParamVector{1.0, 1.0});
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].loss == b.records[i].loss);
        CHECK(a.records[i].step_size == b.records[i].step_size);
    }
    CHECK(a.final_x == b.final_x);
}

TEST_CASE("warm-start epochs splice bit-identically onto a pure run", "[optimizer]") {
    const Dataset data = gen_synthetic(6, 8, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);

    auto mixed = full_cfg(StrategyKind::DecreasingGradNorm, ScheduleKind::Constant, 1e-4, 6, 5);
    mixed.warm_start_epochs = 3;
    mixed.warm_start_strategy = {StrategyKind::RandomShuffle, 5};
    auto pure = full_cfg(StrategyKind::RandomShuffle, ScheduleKind::Constant, 1e-4, 6, 5);

    const auto a = train(model, &data, mixed, ParamVector{0.0, 0.0});
    const auto b = train(model, &data, pure, ParamVector{0.0, 0.0});
    const std::size_t warm_records = 3 * model.components();
    for (std::size_t i = 0; i < warm_records; ++i) {
        CHECK(a.records[i].loss == b.records[i].loss);
        CHECK(a.records[i].step_size == b.records[i].step_size);
    }
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.epochs[k].x_start == b.epochs[k].x_start);
    CHECK(a.epochs[3].x_start == b.epochs[3].x_start);  // same state enters epoch 3
    // after the splice the strategies genuinely diverge
    CHECK(a.final_x != b.final_x);
}

TEST_CASE("divergence aborts with the failing epoch and iteration", "[optimizer]") {
    const SyntheticAnchorLoss model(gen_synthetic(12, 4, 2, -10.0, 10.0),
                                    SynthMode::QuarticPlusQuadratic);
    auto cfg = full_cfg(StrategyKind::Incremental, ScheduleKind::Constant, 1e10, 3);
    try {
        train(model, nullptr, cfg, ParamVector{0.0, 0.0});
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
        CHECK(e.iteration() < 3 * 4);
    }
}

// ---- Algorithm 2: data selection ------------------------------------------

TEST_CASE("data selection visits exactly the per-batch top-q", "[optimizer]") {
    // 1-D quadratics anchored at 1, 3, 2, 5: norms at x are 2|x - d|
    const QuadraticAnchorLoss model({1.0, 3.0, 2.0, 5.0}, 4, 1);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::DataSelection;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, 1e-3, 1};
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.select_count = 1;
    const auto result = train(model, nullptr, cfg, ParamVector{0.0});

    // brute-force oracle: replay the argmax scan per batch
    ParamVector x{0.0};
    std::vector<std::size_t> expected;
    for (std::size_t start = 0; start < 4; start += 2) {
        std::size_t best = start;
        double best_norm = -1.0;
        for (std::size_t j = start; j < start + 2; ++j) {
            const double gn = norm(loss_grad(model, j, x));
            if (gn > best_norm) {
                best_norm = gn;
                best = j;
            }
        }
        expected.push_back(best);
        const ParamVector g = loss_grad(model, best, x);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] -= 1e-3 * g[j];
    }
    CHECK(result.epochs[0].visit_order == expected);
    CHECK(result.records.size() == 2);  // one update per batch at q=1
    CHECK(result.final_x[0] == Catch::Approx(x[0]).margin(1e-15));
}

TEST_CASE("data selection with q=S visits everything, re-sorted per batch", "[optimizer]") {
    const Dataset data = gen_synthetic(14, 6, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::DataSelection;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, 1e-5, 1};
    cfg.epochs = 1;
    cfg.batch_size = 3;
    cfg.select_count = 3;
    const auto result = train(model, &data, cfg, ParamVector{0.0, 0.0});
    auto visited = result.epochs[0].visit_order;
    std::sort(visited.begin(), visited.end());
    CHECK(visited == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
    CHECK(result.records.size() == 6);
}

TEST_CASE("data selection with S=n and q=n equals one epoch of full ordering", "[optimizer]") {
    const Dataset data = gen_synthetic(15, 5, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    TrainConfig sel;
    sel.algorithm = Algorithm::DataSelection;
    sel.strategy = {StrategyKind::DecreasingGradNorm};
    sel.schedule = {ScheduleKind::Constant, 1e-5, 1};
    sel.epochs = 1;
    sel.batch_size = 5;
    sel.select_count = 5;
    const auto a = train(model, &data, sel, ParamVector{0.0, 0.0});
    const auto b = train(model, &data,
                         full_cfg(StrategyKind::DecreasingGradNorm, ScheduleKind::Constant, 1e-5, 1),
                         ParamVector{0.0, 0.0});
    CHECK(a.final_x == b.final_x);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i)
        CHECK(a.records[i].loss == b.records[i].loss);
}

TEST_CASE("random visit order covers the same top-q set", "[optimizer]") {
    const Dataset data = gen_synthetic(16, 8, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::DataSelection;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, 0.0, 1};  // frozen iterate isolates the selection
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.select_count = 2;
    const auto dec = train(model, &data, cfg, ParamVector{0.0, 0.0});
    cfg.strategy = {StrategyKind::RandomShuffle, 3};
    const auto rnd = train(model, &data, cfg, ParamVector{0.0, 0.0});
    auto a = dec.epochs[0].visit_order;
    auto b = rnd.epochs[0].visit_order;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

// ---- Algorithm 3: sort before mini-batch -----------------------------------

TEST_CASE("S=n gives one full-gradient step per epoch", "[optimizer]") {
    const Dataset data = gen_synthetic(17, 6, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortBeforeMiniBatch;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, 1e-4, 1};
    cfg.epochs = 1;
    cfg.batch_size = 6;
    const ParamVector x0{1.0, -1.0};
    const auto result = train(model, &data, cfg, x0);
    REQUIRE(result.records.size() == 1);

    const ParamVector g = full_gradient(model, x0);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(result.final_x[j] == Catch::Approx(x0[j] - 1e-4 * g[j]).margin(1e-15));
}

TEST_CASE("balanced batches hold one sample of each binary class", "[optimizer]") {
    const Dataset data = binary_targets_dataset({1.0, 5.0, 2.0, 6.0}, {0.0, 0.0, 1.0, 1.0});
    const QuadraticAnchorLoss model({1.0, 5.0, 2.0, 6.0}, 4, 1);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortBeforeMiniBatch;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, 1e-4, 1};
    cfg.epochs = 1;
    cfg.batch_size = 2;
    const auto result = train(model, &data, cfg, ParamVector{0.0});
    REQUIRE(result.records.size() == 2);
    const auto& order = result.epochs[0].visit_order;  // two batches of two, flattened
    REQUIRE(order.size() == 4);
    for (std::size_t b = 0; b < 2; ++b) {
        const int l0 = data.label(order[2 * b]);
        const int l1 = data.label(order[2 * b + 1]);
        CHECK(l0 + l1 == 1);  // one of each class
    }
}

TEST_CASE("batch composition matches the sort-then-assign hand rule", "[optimizer]") {
    // regression targets: no balancing, batches are consecutive slices of the
    // descending-norm order. 1-D quadratics at x=0 sort by |d|.
    const QuadraticAnchorLoss model({1.0, 4.0, -2.0, 3.0}, 4, 1);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortBeforeMiniBatch;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, 0.0, 1};
    cfg.epochs = 1;
    cfg.batch_size = 2;
    const auto result = train(model, nullptr, cfg, ParamVector{0.0});
    // norms 2|d| = (2, 8, 4, 6) -> sorted ids (1, 3, 2, 0); members are logged
    // per batch in ascending id order
    CHECK(result.epochs[0].visit_order == std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("permuting within a batch leaves the mean update bit-identical", "[optimizer]") {
    const Dataset data = gen_synthetic(18, 7, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortBeforeMiniBatch;
    cfg.schedule = {ScheduleKind::Constant, 1e-4, 1};
    cfg.epochs = 2;
    cfg.batch_size = 7;  // single batch: same membership under any ordering
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    const auto a = train(model, &data, cfg, ParamVector{0.0, 0.0});
    cfg.strategy = {StrategyKind::IncreasingGradNorm};
    const auto b = train(model, &data, cfg, ParamVector{0.0, 0.0});
    CHECK(a.final_x == b.final_x);
    for (std::size_t i = 0; i < a.records.size(); ++i)
        CHECK(a.records[i].loss == b.records[i].loss);
}

TEST_CASE("q < S drops the small-norm tail of the sorted order", "[optimizer]") {
    const QuadraticAnchorLoss model({1.0, 4.0, -2.0, 3.0, 0.5, -6.0}, 6, 1);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortBeforeMiniBatch;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, 0.0, 1};
    cfg.epochs = 1;
    cfg.batch_size = 3;   // 2 batches of size q
    cfg.select_count = 2; // visits only the 4 largest norms
    const auto result = train(model, nullptr, cfg, ParamVector{0.0});
    // norms 2|d| = (2, 8, 4, 6, 1, 12) -> sorted ids (5, 1, 3, 2, 0, 4)
    CHECK(result.epochs[0].visit_order == std::vector<std::size_t>{1, 5, 2, 3});
    CHECK(result.records.size() == 2);
}

// ---- Algorithm 4: sorting within mini-batch --------------------------------

TEST_CASE("q=S makes sorting within equal sort-before on the same membership", "[optimizer]") {
    const Dataset data = gen_synthetic(19, 6, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    TrainConfig within;
    within.algorithm = Algorithm::SortWithinMiniBatch;
    within.strategy = {StrategyKind::DecreasingGradNorm};
    within.schedule = {ScheduleKind::Constant, 1e-4, 1};
    within.epochs = 2;
    within.batch_size = 6;  // one batch per epoch: membership matches sort-before
    within.select_count = 6;
    TrainConfig before = within;
    before.algorithm = Algorithm::SortBeforeMiniBatch;
    const auto a = train(model, &data, within, ParamVector{0.5, 0.5});
    const auto b = train(model, &data, before, ParamVector{0.5, 0.5});
    CHECK(a.final_x == b.final_x);
    for (std::size_t i = 0; i < a.records.size(); ++i)
        CHECK(a.records[i].loss == b.records[i].loss);
}

TEST_CASE("q=1 steps along the max-norm sample gradient", "[optimizer]") {
    // batch (0, 1) with norms (2, 10): the update must be sample 1's gradient
    const QuadraticAnchorLoss model({1.0, 5.0}, 2, 1);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortWithinMiniBatch;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, 0.01, 1};
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.select_count = 1;
    const auto result = train(model, nullptr, cfg, ParamVector{0.0});
    const ParamVector g = loss_grad(model, 1, ParamVector{0.0});
    CHECK(result.final_x[0] == Catch::Approx(0.0 - 0.01 * g[0]).margin(1e-15));
    CHECK(result.epochs[0].visit_order == std::vector<std::size_t>{1});
}

TEST_CASE("top-q mean matches the brute-force selection oracle", "[optimizer]") {
    const Dataset data = gen_synthetic(20, 4, 2, -10.0, 10.0);
    const QuadraticAnchorLoss model(
        {data.features[0], data.features[1], data.features[2], data.features[3],
         data.features[4], data.features[5], data.features[6], data.features[7]},
        4, 2);
    const double a = 0.02;
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortWithinMiniBatch;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::Constant, a, 1};
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.select_count = 2;
    const ParamVector x0{0.3, -0.8};
    const auto result = train(model, nullptr, cfg, x0);

    // oracle: scan all pairs for the two largest norms at x0, average their
    // gradients by hand
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < 4; ++i)
        ranked.emplace_back(norm(loss_grad(model, i, x0)), i);
    std::sort(ranked.begin(), ranked.end(), [](auto& p, auto& q) { return p.first > q.first; });
    ParamVector mean(2, 0.0);
    for (int k = 0; k < 2; ++k) {
        const ParamVector g = loss_grad(model, ranked[k].second, x0);
        for (int j = 0; j < 2; ++j) mean[j] += 0.5 * g[j];
    }
    for (int j = 0; j < 2; ++j)
        CHECK(result.final_x[j] == Catch::Approx(x0[j] - a * mean[j]).margin(1e-14));
}

TEST_CASE("random selection draws q samples per batch deterministically", "[optimizer]") {
    const Dataset data = gen_synthetic(21, 9, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortWithinMiniBatch;
    cfg.strategy = {StrategyKind::RandomShuffle, 8};
    cfg.schedule = {ScheduleKind::Constant, 1e-5, 1};
    cfg.epochs = 2;
    cfg.batch_size = 3;
    cfg.select_count = 2;
    const auto a = train(model, &data, cfg, ParamVector{0.0, 0.0});
    const auto b = train(model, &data, cfg, ParamVector{0.0, 0.0});
    CHECK(a.final_x == b.final_x);
    REQUIRE(a.records.size() == 6);  // 3 batches x 2 epochs
    for (const auto& log : a.epochs) CHECK(log.visit_order.size() == 6);  // 2 of each batch
}

TEST_CASE("batch algorithms advance the step counter once per update", "[optimizer]") {
    const Dataset data = gen_synthetic(22, 8, 2, -10.0, 10.0);
    const SyntheticAnchorLoss model(data, SynthMode::QuarticPlusQuadratic);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::SortWithinMiniBatch;
    cfg.strategy = {StrategyKind::DecreasingGradNorm};
    cfg.schedule = {ScheduleKind::DecreasingPerIteration, 1e-3, 1};
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.select_count = 2;
    const auto result = train(model, &data, cfg, ParamVector{0.0, 0.0});
    REQUIRE(result.records.size() == 4);  // 2 batches per epoch
    for (std::size_t u = 0; u < result.records.size(); ++u)
        CHECK(result.records[u].step_size ==
              Catch::Approx(1e-3 / static_cast<double>(u + 1)).epsilon(1e-15));
}

TEST_CASE("q above the batch size is rejected", "[optimizer]") {
    const QuadraticAnchorLoss model({1.0, 2.0}, 2, 1);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::DataSelection;
    cfg.schedule = {ScheduleKind::Constant, 1e-3, 1};
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.select_count = 3;
    CHECK_THROWS_AS(train(model, nullptr, cfg, ParamVector{0.0}), std::invalid_argument);
}
