#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmhp/ode_oracle.hpp"
#include "mmhp/transition.hpp"
#include "support/oracles.hpp"

using namespace mmhp;

namespace {

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Transition, SingleStatePoissonSurvival) {
    ModelParams p;
    p.mu = Vector::Constant(1, 1.5);
    p.alpha = Vector::Zero(1);
    p.beta = Vector::Ones(1);
    p.q = Matrix::Zero(1, 1);
    p.xi0 = Vector::Ones(1);
    p.delta = 0.3;
    const EventSequence ev({0.7, 2.0});
    const TransitionBundles b(p, ev);
    EXPECT_NEAR(b.interval(1).forward(0, 0), std::exp(-1.5 * 0.7), 1e-15);
    EXPECT_NEAR(b.forward_H(2, 0.5)(0, 0), std::exp(-1.5 * 0.5), 1e-15);
    EXPECT_NEAR(b.density_f(2)(0, 0), 1.5 * std::exp(-1.5 * 1.3), 1e-15);
}

TEST(Transition, IdentityAtZeroAndEndpoints) {
    std::mt19937_64 rng(1);
    const ModelParams p = ref::random_params(rng, 3, 0.2);
    const EventSequence ev = ref::random_events(rng, 5, 0.05, 1.5);
    const TransitionBundles b(p, ev);
    for (std::size_t n = 1; n <= ev.size(); ++n) {
        EXPECT_LT(max_abs(b.forward_H(n, 0.0) - Matrix::Identity(3, 3)), 1e-15);
        EXPECT_LT(max_abs(b.backward_G(n, ev.duration(n)) - b.interval(n).forward), 1e-15);
        EXPECT_THROW(b.forward_H(n, ev.duration(n) * 1.01), InvalidInput);
    }
    EXPECT_THROW(b.interval(0), InvalidInput);
    EXPECT_THROW(b.interval(6), InvalidInput);
}

TEST(Transition, SubstochasticRows) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const ModelParams p = ref::random_params(rng, 1 + trial % 3, ref::uniform(rng, 0.05, 1.0));
        const EventSequence ev = ref::random_events(rng, 10, 0.01, 3.0);
        const TransitionBundles b(p, ev);
        for (std::size_t n = 1; n <= ev.size(); ++n) {
            const Matrix& h = b.interval(n).forward;
            EXPECT_GE(h.minCoeff(), -1e-15);
            EXPECT_LE(h.rowwise().sum().maxCoeff(), 1.0 + 1e-14);
        }
    }
}

TEST(Transition, ClosedFormMatchesRungeKutta) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 1 + trial % 3;
        const ModelParams p = ref::random_params(rng, m, ref::uniform(rng, 0.05, 0.5));
        const EventSequence ev = ref::random_events(rng, 4, 0.01, 10.0 * p.delta);
        const TransitionBundles b(p, ev);
        for (std::size_t n = 1; n <= ev.size(); ++n) {
            const double x = ev.duration(n);
            EXPECT_LT(max_abs(b.forward_H(n, x) - oracle::ode_forward_H(p, ev, n, x, 200)), 1e-9);
            EXPECT_LT(max_abs(b.backward_G(n, x) - oracle::ode_backward_G(p, ev, n, x, 200)), 1e-9);
            const double u = ref::uniform(rng, 0.0, x);
            EXPECT_LT(max_abs(b.forward_H(n, u) - oracle::ode_forward_H(p, ev, n, u, 200)), 1e-9);
            EXPECT_LT(max_abs(b.backward_G(n, u) - oracle::ode_backward_G(p, ev, n, u, 200)), 1e-9);
        }
    }
}

TEST(Transition, ForwardBackwardFactorisation) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const ModelParams p = ref::random_params(rng, 2 + trial % 2, 0.1);
        const EventSequence ev = ref::random_events(rng, 5, 0.01, 2.0);
        const TransitionBundles b(p, ev);
        for (std::size_t n = 1; n <= ev.size(); ++n) {
            const double x = ev.duration(n);
            for (int r = 0; r < 5; ++r) {
                const double t = ref::uniform(rng, 0.0, x);
                EXPECT_LT(max_abs(b.forward_H(n, t) * b.backward_G(n, x - t) - b.interval(n).forward), 1e-12);
                const double t2 = ref::uniform(rng, t, x);
                EXPECT_LT(max_abs(b.forward_H(n, t) * b.intra_R(n, t, t2) - b.forward_H(n, t2)), 1e-12);
            }
        }
    }
}

TEST(Transition, IntraRChapmanKolmogorov) {
    std::mt19937_64 rng(5);
    const ModelParams p = ref::random_params(rng, 3, 0.25);
    const EventSequence ev({3.0});
    const TransitionBundles b(p, ev);
    EXPECT_EQ(max_abs(b.intra_R(1, 0.3, 0.3) - Matrix::Identity(3, 3)), 0.0);
    EXPECT_LT(max_abs(b.intra_R(1, 0.1, 0.9) * b.intra_R(1, 0.9, 2.2) - b.intra_R(1, 0.1, 2.2)), 1e-13);
    EXPECT_THROW(b.intra_R(1, 1.0, 0.5), InvalidInput);
}

TEST(Transition, PiecewiseProductSplitsAtGrid) {
    int calls = 0;
    const Matrix r = piecewise_product(1, 0.05, 0.35, 0.1, -1, [&](long k, double lo, double hi) {
        ++calls;
        EXPECT_LE(static_cast<double>(k) * 0.1, lo + 1e-15);
        EXPECT_GE(static_cast<double>(k + 1) * 0.1, hi - 1e-15);
        return Matrix::Constant(1, 1, std::exp(-(hi - lo)));
    });
    EXPECT_EQ(calls, 4);
    EXPECT_NEAR(r(0, 0), std::exp(-0.3), 1e-15);
}
