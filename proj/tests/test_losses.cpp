#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "gradorder/data.hpp"
#include "gradorder/losses.hpp"
#include "helpers.hpp"

using namespace gradorder;
using SynthMode = SyntheticAnchorLoss::Mode;

namespace {

SyntheticAnchorLoss make_synth(SynthMode mode, std::uint64_t seed, std::size_t n = 4,
                               std::size_t dim = 3) {
    return SyntheticAnchorLoss(gen_synthetic(seed, n, dim, -10.0, 10.0), mode);
}

Dataset tiny_regression() {
    Dataset d;
    d.rows = 3;
    d.cols = 2;
    d.features = {1.0, 2.0, -0.5, 0.25, 3.0, -1.0};
    d.target_kind = TargetKind::Regression;
    d.targets = {0.5, -1.0, 2.0};
    return d;
}

}  // namespace

TEST_CASE("loss vanishes at the anchor", "[losses]") {
    const Dataset anchors = gen_synthetic(3, 4, 3, -10.0, 10.0);
    const SyntheticAnchorLoss loss(anchors, SynthMode::QuarticPlusQuadratic);
    for (std::size_t i = 0; i < loss.components(); ++i) {
        const auto anchor = anchors.row(i);
        const ParamVector x(anchor.begin(), anchor.end());
        CHECK(loss.value(i, x) == 0.0);
        const ParamVector g = loss_grad(loss, i, x);
        CHECK(norm(g) == 0.0);
    }
}

TEST_CASE("hand-evaluated quartic+quadratic value and gradient", "[losses]") {
    // single anchor at the origin, x = (1, 2)
    const SyntheticAnchorLoss loss({0.0, 0.0}, 1, 2, SynthMode::QuarticPlusQuadratic);
    const ParamVector x{1.0, 2.0};
    CHECK(loss.value(0, x) == Catch::Approx(22.0).epsilon(1e-15));  // 1+16 + 1+4
    const ParamVector g = loss_grad(loss, 0, x);
    CHECK(g[0] == Catch::Approx(6.0).epsilon(1e-15));   // 4*1^3 + 2*1
    CHECK(g[1] == Catch::Approx(36.0).epsilon(1e-15));  // 4*2^3 + 2*2
}

TEST_CASE("indicator-switched branches", "[losses]") {
    const SyntheticAnchorLoss loss({0.0, 0.0}, 1, 2, SynthMode::IndicatorSwitched);
    // z = (-2, 3): quartic branch 16, quadratic branch 9
    const ParamVector x{-2.0, 3.0};
    CHECK(loss.value(0, x) == Catch::Approx(16.0 + 9.0).epsilon(1e-15));
    const ParamVector g = loss_grad(loss, 0, x);
    CHECK(g[0] == Catch::Approx(4.0 * -8.0).epsilon(1e-15));
    CHECK(g[1] == Catch::Approx(6.0).epsilon(1e-15));
    // at the switch surface both branches agree and the gradient is zero
    const ParamVector origin{0.0, 0.0};
    CHECK(loss.value(0, origin) == 0.0);
    CHECK(norm(loss_grad(loss, 0, origin)) == 0.0);
}

TEST_CASE("quartic regression loss vanishes at zero residual", "[losses]") {
    const Dataset d = tiny_regression();
    const LinRegQuarticLoss loss(d, 1e-10);
    for (std::size_t i = 0; i < 3; ++i) {
        ParamVector x(3, 0.0);
        x[2] = d.targets[i];  // w = 0, b = y_i
        CHECK(loss.value(i, x) == 0.0);
    }
}

TEST_CASE("dimension and index mismatches are rejected", "[losses]") {
    const auto loss = make_synth(SynthMode::QuarticPlusQuadratic, 5);
    CHECK_THROWS_AS(loss.value(0, ParamVector{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(loss.value(99, ParamVector(3, 0.0)), std::invalid_argument);
    ParamVector small(1);
    CHECK_THROWS_AS(loss.gradient(0, ParamVector(3, 0.0), small), std::invalid_argument);
}

TEST_CASE("gradients match central finite differences", "[losses]") {
    SplitMix64 rng(17);
    const double h = 1e-6;
    const auto check_model = [&](const LossModel& m, double lo, double hi) {
        for (int trial = 0; trial < 25; ++trial) {
            const auto x = testutil::random_point(rng, m.dim(), lo, hi);
            for (std::size_t i = 0; i < m.components(); ++i) {
                const ParamVector g = loss_grad(m, i, x);
                const auto fd = testutil::fd_gradient(m, i, x, h);
                CHECK(testutil::rel_grad_error(g, fd) < 1e-5);
            }
        }
    };
    check_model(make_synth(SynthMode::QuarticPlusQuadratic, 21), -8.0, 8.0);
    check_model(make_synth(SynthMode::IndicatorSwitched, 22), -8.0, 8.0);
    check_model(LinRegQuarticLoss(tiny_regression(), 1.0), -2.0, 2.0);
}

TEST_CASE("grad_norms_at snapshots every component at one point", "[losses]") {
    // anchors (0,0) and (3,0); at x = (0,0) the first component is stationary
    const SyntheticAnchorLoss loss({0.0, 0.0, 3.0, 0.0}, 2, 2,
                                   SynthMode::QuarticPlusQuadratic);
    const ParamVector x{0.0, 0.0};
    const auto norms = grad_norms_at(loss, x);
    REQUIRE(norms.size() == 2);
    CHECK(norms[0] == 0.0);
    // z = -3: gradient (4*(-27) + 2*(-3), 0) = (-114, 0)
    CHECK(norms[1] == Catch::Approx(114.0).epsilon(1e-15));

    SplitMix64 rng(4);
    const auto model = make_synth(SynthMode::QuarticPlusQuadratic, 31);
    const auto y = testutil::random_point(rng, model.dim(), -5.0, 5.0);
    const auto snapshot = grad_norms_at(model, y);
    for (std::size_t i = 0; i < model.components(); ++i)
        CHECK(snapshot[i] == norm(loss_grad(model, i, y)));
}

TEST_CASE("convexity along random chords", "[losses]") {
    SplitMix64 rng(23);
    const auto check_convex = [&](const LossModel& m, double lo, double hi) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto x = testutil::random_point(rng, m.dim(), lo, hi);
            const auto y = testutil::random_point(rng, m.dim(), lo, hi);
            const double lambda = rng.next_unit();
            ParamVector mid(m.dim());
            for (std::size_t j = 0; j < mid.size(); ++j)
                mid[j] = lambda * x[j] + (1.0 - lambda) * y[j];
            for (std::size_t i = 0; i < m.components(); ++i) {
                CHECK(m.value(i, mid) <=
                      lambda * m.value(i, x) + (1.0 - lambda) * m.value(i, y) + 1e-9);
            }
        }
    };
    check_convex(make_synth(SynthMode::QuarticPlusQuadratic, 41), -6.0, 6.0);
    check_convex(make_synth(SynthMode::IndicatorSwitched, 42), -6.0, 6.0);
    check_convex(LinRegQuarticLoss(tiny_regression(), 1e-10), -3.0, 3.0);
}

TEST_CASE("quartic+quadratic is strongly convex with m = 2", "[losses]") {
    SplitMix64 rng(29);
    const auto m = make_synth(SynthMode::QuarticPlusQuadratic, 43);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = testutil::random_point(rng, m.dim(), -6.0, 6.0);
        const auto y = testutil::random_point(rng, m.dim(), -6.0, 6.0);
        for (std::size_t i = 0; i < m.components(); ++i) {
            const ParamVector g = loss_grad(m, i, x);
            double inner = 0.0;
            for (std::size_t j = 0; j < g.size(); ++j) inner += g[j] * (y[j] - x[j]);
            // (m_i/2)||y-x||^2 with m_i = 2
            CHECK(m.value(i, y) >=
                  m.value(i, x) + inner + squared_distance(x, y) - 1e-9);
        }
    }
    CHECK(m.strong_convexity() == 2.0);
}

TEST_CASE("grad_scale scales the gradient linearly and leaves the value alone", "[losses]") {
    const Dataset d = tiny_regression();
    const LinRegQuarticLoss base(d, 1.0);
    const LinRegQuarticLoss scaled(d, 2.5e-3);
    const ParamVector x{0.4, -0.2, 0.9};
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(scaled.value(i, x) == base.value(i, x));
        const ParamVector g0 = loss_grad(base, i, x);
        const ParamVector g1 = loss_grad(scaled, i, x);
        for (std::size_t j = 0; j < g0.size(); ++j)
            CHECK(g1[j] == Catch::Approx(2.5e-3 * g0[j]).epsilon(1e-14));
    }
}

TEST_CASE("grad bound estimator tracks running maxima with a margin", "[losses]") {
    GradBoundEstimate est(3);
    est.observe(0, 2.0);
    est.observe(0, 1.5);
    est.observe(2, 4.0);
    CHECK(est.cap(0) == Catch::Approx(2.2));
    CHECK(est.cap(1) == 0.0);
    CHECK(est.cap(2) == Catch::Approx(4.4));
    est.observe_all(std::vector<double>{3.0, 1.0, 1.0});
    CHECK(est.cap(0) == Catch::Approx(3.3));
    CHECK(est.cap(2) == Catch::Approx(4.4));

    auto fixed = GradBoundEstimate::explicit_caps({5.0, 6.0});
    CHECK(fixed.cap(0) == 5.0);
    CHECK(fixed.cap(1) == 6.0);
    CHECK_THROWS_AS(est.observe(9, 1.0), std::invalid_argument);
}
