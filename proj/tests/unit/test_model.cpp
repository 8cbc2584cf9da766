#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mmhp/model.hpp"
#include "support/oracles.hpp"

using namespace mmhp;

TEST(EventSequence, AcceptsIncreasingPositiveTimes) {
    const EventSequence ev({0.5, 1.0, 2.5}, 3.0);
    EXPECT_EQ(ev.size(), 3u);
    EXPECT_DOUBLE_EQ(ev.time(0), 0.0);
    EXPECT_DOUBLE_EQ(ev.duration(3), 1.5);
    EXPECT_DOUBLE_EQ(ev.horizon(), 3.0);
}

TEST(EventSequence, RejectsBadTimes) {
    EXPECT_THROW(EventSequence({0.0, 1.0}), InvalidInput);
    EXPECT_THROW(EventSequence({1.0, 1.0}), InvalidInput);
    EXPECT_THROW(EventSequence({2.0, 1.0}), InvalidInput);
    EXPECT_THROW(EventSequence({1.0, NAN}), InvalidInput);
    EXPECT_THROW(EventSequence({1.0, 2.0}, 1.5), InvalidInput);
}

TEST(EventSequence, HorizonDefaultsToLastEvent) {
    const EventSequence ev({0.5, 1.0});
    EXPECT_DOUBLE_EQ(ev.horizon(), 1.0);
}

TEST(GridSplit, InteriorAndTieConvention) {
    const auto a = split_duration(0.25, 0.1);
    EXPECT_EQ(a.steps, 2);
    EXPECT_NEAR(a.residual, 0.05, 1e-15);
    // An exact multiple keeps a full final residual step.
    const auto b = split_duration(2.0, 0.5);
    EXPECT_EQ(b.steps, 3);
    EXPECT_DOUBLE_EQ(b.residual, 0.5);
    const auto c = split_duration(0.03, 0.1);
    EXPECT_EQ(c.steps, 0);
    EXPECT_DOUBLE_EQ(c.residual, 0.03);
    EXPECT_THROW(split_duration(0.0, 0.1), InvalidInput);
}

TEST(GridSplit, ReconstructsDurationOnRandomInputs) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double delta = ref::uniform(rng, 0.01, 2.0);
        const double x = ref::uniform(rng, 1e-6, 50.0);
        const auto s = split_duration(x, delta);
        EXPECT_GT(s.residual, 0.0);
        EXPECT_LE(s.residual, delta * (1 + 1e-12));
        EXPECT_NEAR(static_cast<double>(s.steps) * delta + s.residual, x, 1e-12 * x);
    }
}

TEST(IntensityGrid, SingleEarlierEvent) {
    ModelParams p;
    p.mu = Vector::Constant(1, 1.0);
    p.alpha = Vector::Constant(1, 1.0);
    p.beta = Vector::Constant(1, 2.0);
    p.q = Matrix::Zero(1, 1);
    p.xi0 = Vector::Ones(1);
    p.delta = 0.1;
    // Events at 1 and 2: during interval 2 the excitation of t_1 decays on the grid.
    const EventSequence ev({1.0, 2.0, 3.0});
    const IntensityGrid g(p, ev);
    EXPECT_DOUBLE_EQ(g.at(1, 5)[0], 1.0);
    EXPECT_NEAR(g.at(2, 1)[0], 1.0 + std::exp(-0.2), 1e-15);
    EXPECT_NEAR(g.at(2, 1)[0], 1.8187307530779819, 1e-15);
    EXPECT_NEAR(g.at(3, 1)[0], 1.0 + (1.0 + std::exp(-2.0)) * std::exp(-0.2), 1e-15);
    EXPECT_EQ(g.intervals(), 4u);
}

TEST(IntensityGrid, MatchesDirectKernelSum) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 1 + trial % 3;
        const ModelParams p = ref::random_params(rng, m, ref::uniform(rng, 0.05, 1.0));
        const EventSequence ev = ref::random_events(rng, 30, 0.01, 2.0);
        const IntensityGrid g(p, ev);
        const IntervalGrid split = grid_decompose(ev, p.delta);
        for (std::size_t n = 1; n <= ev.size(); ++n) {
            for (long k = 0; k <= split.steps[n - 1]; ++k) {
                const Vector lam = intensity_at_grid(g, split, n, k);
                for (int i = 0; i < m; ++i) {
                    const double direct = grid_intensity_direct(p.mu[i], ExponentialKernel{p.alpha[i], p.beta[i]},
                                                                ev.times(), ev.time(n - 1), k, p.delta);
                    EXPECT_NEAR(lam[i], direct, 1e-12 * direct);
                }
            }
        }
        EXPECT_THROW(intensity_at_grid(g, split, 1, split.steps[0] + 1), InvalidInput);
    }
}

TEST(ModelParams, Validation) {
    ModelParams p = ref::reference_params();
    EXPECT_NO_THROW(p.validate());
    ModelParams bad = p;
    bad.mu[0] = 0.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = p;
    bad.alpha[1] = -1.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = p;
    bad.q(0, 0) = -2.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = p;
    bad.xi0[0] = 0.9;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = p;
    bad.delta = 0.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = p;
    bad.beta.resize(3);
    EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(Stationary, TwoStateClosedForm) {
    Matrix q(2, 2);
    q << -2.0, 2.0, 1.0, -1.0;
    const Vector pi = stationary_distribution(q);
    EXPECT_NEAR(pi[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(pi[1], 2.0 / 3.0, 1e-15);
}

TEST(Stationary, SolvesBalanceOnRandomGenerators) {
    std::mt19937_64 rng(9);
    for (int m = 1; m <= 6; ++m) {
        const ModelParams p = ref::random_params(rng, m, 1.0);
        const Vector pi = stationary_distribution(p.q);
        EXPECT_NEAR(pi.sum(), 1.0, 1e-13);
        EXPECT_LT((pi.transpose() * p.q).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Stationary, ReducibleGeneratorThrows) {
    EXPECT_THROW(stationary_distribution(Matrix::Zero(2, 2)), NumericalError);
}
