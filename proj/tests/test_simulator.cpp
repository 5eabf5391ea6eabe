#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mvsde/simulator.hpp"

namespace {

using mvsde::SchemeKind;

mvsde::SchemeConfig scheme(SchemeKind kind) {
    mvsde::SchemeConfig cfg;
    cfg.variant = kind;
    return cfg;
}

mvsde::SimConfig sim(std::size_t n, double h, double t) {
    mvsde::SimConfig cfg;
    cfg.N = n;
    cfg.h = h;
    cfg.T = t;
    return cfg;
}

constexpr SchemeKind kAll[] = {SchemeKind::PEM, SchemeKind::BEM, SchemeKind::EM};

TEST(Run, ZeroHorizonReturnsInitialStates) {
    const auto model = mvsde::make_example_4_1();
    const mvsde::BrownianDriver driver(1, 8);
    for (auto kind : kAll) {
        const auto out = mvsde::run(model, scheme(kind), sim(10, std::ldexp(1.0, -8), 0.0), driver, 0);
        EXPECT_EQ(out.steps, 0u);
        EXPECT_EQ(out.final_states, mvsde::ParticleStates(10, 1, 1.0));
        ASSERT_EQ(out.moment_sup.size(), 1u);
        EXPECT_EQ(out.moment_sup[0], 1.0);
    }
}

TEST(Run, DeterministicModelSingleStep) {
    auto model = mvsde::make_example_4_1();
    model.diffusion = [](std::span<const double>, const mvsde::EmpiricalMeasure&, std::span<double> out) {
        out[0] = 0.0;
    };
    const double h = std::ldexp(1.0, -8);
    const mvsde::BrownianDriver driver(3, 8);
    const auto out = mvsde::run(model, scheme(SchemeKind::PEM), sim(1, h, h), driver, 0);
    EXPECT_EQ(out.final_states.row(0)[0], 0.9423828125);
    EXPECT_EQ(out.steps, 1u);
}

TEST(Run, ThreadCountDoesNotChangeResults) {
    const auto model = mvsde::make_example_4_2();
    const mvsde::BrownianDriver driver(2024, 8);
    for (auto kind : {SchemeKind::PEM, SchemeKind::BEM}) {
        auto one = sim(333, std::ldexp(1.0, -6), 0.5);
        one.record_moments = {2.0, 4.0};
        one.record_stride = 4;
        auto eight = one;
        eight.threads = 8;
        const auto a = mvsde::run(model, scheme(kind), one, driver, 5);
        const auto b = mvsde::run(model, scheme(kind), eight, driver, 5);
        EXPECT_EQ(a.final_states, b.final_states);
        EXPECT_EQ(a.moments, b.moments);
        EXPECT_EQ(a.moment_sup, b.moment_sup);
        EXPECT_EQ(a.newton, b.newton);
    }
}

TEST(Run, PathsAreIndependentStreams) {
    const auto model = mvsde::make_example_4_1();
    const mvsde::BrownianDriver driver(7, 6);
    const auto cfg = sim(20, std::ldexp(1.0, -6), 0.25);
    const auto a = mvsde::run(model, scheme(SchemeKind::PEM), cfg, driver, 0);
    const auto b = mvsde::run(model, scheme(SchemeKind::PEM), cfg, driver, 1);
    const auto c = mvsde::run(model, scheme(SchemeKind::PEM), cfg, driver, 0);
    EXPECT_NE(a.final_states, b.final_states);
    EXPECT_EQ(a.final_states, c.final_states);
}

TEST(Run, MomentSeriesIsStrided) {
    const auto model = mvsde::make_example_4_1();
    const mvsde::BrownianDriver driver(7, 6);
    auto cfg = sim(8, std::ldexp(1.0, -6), 1.0);
    cfg.record_moments = {2.0, 4.0};
    cfg.record_stride = 16;
    const auto out = mvsde::run(model, scheme(SchemeKind::BEM), cfg, driver, 0);
    ASSERT_EQ(out.moments.size(), 2u * 5u);  // k = 0, 16, 32, 48, 64
    EXPECT_EQ(out.moments[0].t, 0.0);
    EXPECT_EQ(out.moments[0].value, 1.0);
    EXPECT_EQ(out.moments.back().t, 1.0);
    EXPECT_EQ(out.moments.back().order, 4.0);
    EXPECT_EQ(out.moment_sup[0], 1.0);  // the moments decay from X0 = 1
}

TEST(CoupledRun, ReferenceStepGivesIdenticalRuns) {
    const auto model = mvsde::make_example_4_1();
    const mvsde::BrownianDriver driver(11, 8);
    const auto pair = mvsde::coupled_pair_run(model, scheme(SchemeKind::PEM),
                                              sim(50, std::ldexp(1.0, -8), 1.0), driver, 0);
    EXPECT_EQ(pair.coarse.final_states, pair.reference.final_states);
}

TEST(CoupledRun, ErrorShrinksWithStep) {
    const auto model = mvsde::make_example_4_1();
    const mvsde::BrownianDriver driver(11, 13);
    for (auto kind : {SchemeKind::PEM, SchemeKind::BEM}) {
        const auto coarse = mvsde::coupled_pair_run(model, scheme(kind), sim(100, std::ldexp(1.0, -6), 1.0),
                                                    driver, 0);
        const auto fine = mvsde::coupled_pair_run(model, scheme(kind), sim(100, std::ldexp(1.0, -10), 1.0),
                                                  driver, 0);
        EXPECT_EQ(coarse.reference.final_states, fine.reference.final_states);
        EXPECT_GT(mvsde::rmse(coarse.coarse.final_states, coarse.reference.final_states),
                  mvsde::rmse(fine.coarse.final_states, fine.reference.final_states));
    }
}

TEST(Rmse, Examples) {
    const mvsde::ParticleStates a(2, 1, std::vector<double>{0.0, 0.0});
    const mvsde::ParticleStates b(2, 1, std::vector<double>{1.0, 3.0});
    EXPECT_DOUBLE_EQ(mvsde::rmse(a, b), std::sqrt(5.0));
    EXPECT_DOUBLE_EQ(mvsde::mean_square_distance(a, b), 5.0);
    EXPECT_EQ(mvsde::rmse(b, b), 0.0);
    EXPECT_THROW(mvsde::rmse(a, mvsde::ParticleStates(3, 1)), mvsde::ConfigError);
    EXPECT_THROW(mvsde::rmse(mvsde::ParticleStates(), mvsde::ParticleStates()), mvsde::ConfigError);
}

TEST(Rmse, BoundsW2OfEmpiricalMeasures) {
    const mvsde::ParticleStates a(4, 1, std::vector<double>{0.3, -1.0, 2.0, 0.1});
    const mvsde::ParticleStates b(4, 1, std::vector<double>{1.0, 0.0, -0.5, 0.7});
    const double w2 = mvsde::wasserstein2_1d(mvsde::EmpiricalMeasure(a), mvsde::EmpiricalMeasure(b));
    EXPECT_LE(w2, mvsde::rmse(a, b) + 1e-15);
}

TEST(Stepper, SynchronousCouplingContracts) {
    // Same noise from two initial values: the distance must shrink.
    const auto model = mvsde::make_example_4_1();
    const double h = std::ldexp(1.0, -8);
    const mvsde::BrownianDriver driver(9, 8);
    for (auto kind : {SchemeKind::PEM, SchemeKind::BEM}) {
        auto a_cfg = sim(64, h, 1.0), b_cfg = a_cfg;
        a_cfg.x0 = std::vector<double>{1.0};
        b_cfg.x0 = std::vector<double>{5.0};
        mvsde::Stepper a(model, scheme(kind), a_cfg, driver, 0), b(model, scheme(kind), b_cfg, driver, 0);
        const double initial = mvsde::mean_square_distance(a.states(), b.states());
        while (!a.done()) {
            a.step();
            b.step();
            EXPECT_EQ(std::vector<double>(a.last_noise().begin(), a.last_noise().end()),
                      std::vector<double>(b.last_noise().begin(), b.last_noise().end()));
        }
        EXPECT_LT(mvsde::mean_square_distance(a.states(), b.states()), 1e-3 * initial);
    }
}

TEST(Stepper, ValidatesConfiguration) {
    const auto model = mvsde::make_example_4_1();
    const mvsde::BrownianDriver driver(1, 8);
    const auto ok = sim(4, std::ldexp(1.0, -6), 1.0);
    EXPECT_NO_THROW(mvsde::Stepper(model, scheme(SchemeKind::PEM), ok, driver, 0));

    auto bad = ok;
    bad.N = 0;
    EXPECT_THROW(mvsde::Stepper(model, scheme(SchemeKind::PEM), bad, driver, 0), mvsde::ConfigError);
    bad = ok;
    bad.h = 0.03;
    EXPECT_THROW(mvsde::Stepper(model, scheme(SchemeKind::PEM), bad, driver, 0), mvsde::ConfigError);
    bad = ok;
    bad.T = 1.0 + std::ldexp(1.0, -8);
    EXPECT_THROW(mvsde::Stepper(model, scheme(SchemeKind::PEM), bad, driver, 0), mvsde::ConfigError);
    bad = ok;
    bad.x0 = std::vector<double>{1.0, 2.0};
    EXPECT_THROW(mvsde::Stepper(model, scheme(SchemeKind::PEM), bad, driver, 0), mvsde::ConfigError);
}

TEST(Stepper, StepGuard) {
    const auto model = mvsde::make_example_4_1();  // max step 8/287 ~ 0.0279
    const mvsde::BrownianDriver driver(1, 2);
    const auto big = sim(4, 0.25, 1.0);
    EXPECT_THROW(mvsde::Stepper(model, scheme(SchemeKind::PEM), big, driver, 0), mvsde::ConfigError);
    EXPECT_THROW(mvsde::Stepper(model, scheme(SchemeKind::BEM), big, driver, 0), mvsde::ConfigError);
    EXPECT_NO_THROW(mvsde::Stepper(model, scheme(SchemeKind::EM), big, driver, 0));
    auto unsafe = scheme(SchemeKind::PEM);
    unsafe.enforce_step_guard = false;
    EXPECT_NO_THROW(mvsde::Stepper(model, unsafe, big, driver, 0));
}

TEST(Run, EulerMaruyamaBlowsUpFromLargeInitialValue) {
    const auto model = mvsde::make_example_4_1();
    const mvsde::BrownianDriver driver(4, 2);
    auto cfg = sim(20, 0.25, 10.0);
    cfg.x0 = std::vector<double>{10.0};
    EXPECT_THROW(mvsde::run(model, scheme(SchemeKind::EM), cfg, driver, 0), mvsde::SchemeBlowup);

    cfg.continue_on_blowup = true;
    const auto out = mvsde::run(model, scheme(SchemeKind::EM), cfg, driver, 0);
    ASSERT_TRUE(out.blowup_step.has_value());
    EXPECT_LE(*out.blowup_step, 5u);
    ASSERT_TRUE(out.saturation_step.has_value());
    EXPECT_GE(*out.saturation_step, *out.blowup_step);
    EXPECT_LT(out.steps, 40u);
    EXPECT_TRUE(mvsde::detail::all_finite(out.final_states));
}

TEST(Run, TamedSchemesStayBoundedFromLargeInitialValue) {
    const auto model = mvsde::make_example_4_1();
    const mvsde::BrownianDriver driver(4, 2);
    auto cfg = sim(20, 0.25, 10.0);
    cfg.x0 = std::vector<double>{10.0};
    cfg.continue_on_blowup = true;
    cfg.record_stride = 1;
    for (auto kind : {SchemeKind::PEM, SchemeKind::BEM}) {
        auto sc = scheme(kind);
        sc.enforce_step_guard = false;
        const auto out = mvsde::run(model, sc, cfg, driver, 0);
        EXPECT_FALSE(out.blowup_step.has_value()) << mvsde::scheme_name(kind);
        EXPECT_EQ(out.steps, 40u);
        EXPECT_EQ(out.moment_sup[0], 100.0);  // attained at t = 0
        double evolved = 0.0;
        for (const auto& sample : out.moments)
            if (sample.t > 0.0) evolved = std::max(evolved, sample.value);
        EXPECT_LT(evolved, 1e2);
    }
}

TEST(Run, Example42BackwardEulerResiduals) {
    const auto model = mvsde::make_example_4_2();
    const mvsde::BrownianDriver driver(2024, 6);
    const auto out = mvsde::run(model, scheme(SchemeKind::BEM), sim(200, std::ldexp(1.0, -6), 1.0), driver, 0);
    EXPECT_EQ(out.newton.solves, 200u * 64u);
    EXPECT_LE(out.newton.max_residual, 1e-12);
    EXPECT_LE(out.newton.median_iterations(), 4.0);
}

}  // namespace
