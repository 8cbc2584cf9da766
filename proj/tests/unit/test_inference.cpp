#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmhp/inference.hpp"
#include "support/oracles.hpp"

using namespace mmhp;

TEST(Inference, PoissonLikelihood) {
    ModelParams p;
    p.mu = Vector::Constant(1, 2.5);
    p.alpha = Vector::Zero(1);
    p.beta = Vector::Ones(1);
    p.q = Matrix::Zero(1, 1);
    p.xi0 = Vector::Ones(1);
    p.delta = 0.5;
    const EventSequence ev({0.3, 1.1, 1.2, 4.0});
    EXPECT_NEAR(log_likelihood(p, ev), 4.0 * std::log(2.5) - 2.5 * 4.0, 1e-12);
}

TEST(Inference, SingleStateMatchesDirectHawkesLikelihood) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        ModelParams p = ref::random_params(rng, 1, ref::uniform(rng, 0.02, 1.0));
        const EventSequence ev = ref::random_events(rng, 40, 0.01, 2.0);
        const double direct = ref::hawkes_delta_loglik(p.mu[0], p.alpha[0], p.beta[0], p.delta, ev);
        EXPECT_NEAR(log_likelihood(p, ev), direct, 1e-9 * std::abs(direct));
    }
}

TEST(Inference, FrozenChainReducesToSingleState) {
    std::mt19937_64 rng(8);
    ModelParams p = ref::random_params(rng, 2, 0.1);
    p.q.setZero();
    p.xi0 << 0.0, 1.0;
    const EventSequence ev = ref::random_events(rng, 30, 0.01, 2.0);
    const double direct = ref::hawkes_delta_loglik(p.mu[1], p.alpha[1], p.beta[1], p.delta, ev);
    EXPECT_NEAR(log_likelihood(p, ev), direct, 1e-9 * std::abs(direct));
}

TEST(Inference, ScaledRecursionsAreNormalised) {
    std::mt19937_64 rng(9);
    const ModelParams p = ref::random_params(rng, 3, 0.2);
    const EventSequence ev = ref::random_events(rng, 50, 0.01, 2.0);
    const TransitionBundles b(p, ev);
    const InferenceState st = forward_backward(b);
    for (Eigen::Index n = 0; n <= 50; ++n) EXPECT_NEAR(st.forward.row(n).sum(), 1.0, 1e-12);
    for (Eigen::Index n = 0; n < 50; ++n) EXPECT_NEAR(st.smoothed.row(n).sum(), 1.0, 1e-10);
    EXPECT_NEAR(st.smoothed_initial.sum(), 1.0, 1e-10);
    EXPECT_LT((st.smoothed.row(49) - st.forward.row(50)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(st.loglik, st.c.array().log().sum(), 1e-12);
    const Vector f = filtered_probabilities(st, 10);
    EXPECT_NEAR(f.sum(), 1.0, 1e-12);
    EXPECT_THROW(filtered_probabilities(st, 51), InvalidInput);
}

TEST(Inference, LikelihoodMatchesUnscaledProduct) {
    std::mt19937_64 rng(10);
    const ModelParams p = ref::random_params(rng, 2, 0.3);
    const EventSequence ev = ref::random_events(rng, 8, 0.05, 1.0);
    const TransitionBundles b(p, ev);
    RowVector v = p.xi0.transpose();
    for (std::size_t n = 1; n <= 8; ++n) v = v * b.density_f(n);
    EXPECT_NEAR(log_likelihood(p, ev), std::log(v.sum()), 1e-12);
}

TEST(EStep, OccupancyClosure) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const ModelParams p = ref::random_params(rng, 1 + trial % 3, ref::uniform(rng, 0.05, 0.5));
        const EventSequence ev = ref::random_events(rng, 40, 0.01, 3.0);
        const InferenceState st = run_estep(TransitionBundles(p, ev));
        EXPECT_NEAR(st.occupancy.sum(), ev.last(), 1e-9 * ev.last());
        EXPECT_GE(st.occupancy.minCoeff(), 0.0);
        EXPECT_GE(st.transitions.minCoeff(), 0.0);
        EXPECT_NEAR(st.tau.sum(), st.integrated_intensity.sum(), 1e-9 * st.tau.sum());
    }
}

// Fisher's identity: the gradient of the log-likelihood equals the gradient of
// the expected complete-data log-likelihood at the current parameters.
TEST(EStep, FisherIdentityForGenerator) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const ModelParams p = ref::random_params(rng, 2 + trial % 2, 0.2);
        const EventSequence ev = ref::random_events(rng, 30, 0.01, 2.0);
        const InferenceState st = run_estep(TransitionBundles(p, ev));
        const int m = p.num_states();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (i == j) continue;
                const double h = 1e-5;
                ModelParams up = p, dn = p;
                up.q(i, j) += h;
                up.q(i, i) -= h;
                dn.q(i, j) -= h;
                dn.q(i, i) += h;
                const double fd = (log_likelihood(up, ev) - log_likelihood(dn, ev)) / (2 * h);
                const double analytic = st.transitions(i, j) / p.q(i, j) - st.occupancy[i];
                EXPECT_NEAR(analytic, fd, 1e-6 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST(EStep, CompensatorMatchesQuadrature) {
    std::mt19937_64 rng(13);
    const ModelParams p = ref::random_params(rng, 2, 0.25);
    const EventSequence ev = ref::random_events(rng, 12, 0.05, 1.5);
    const TransitionBundles b(p, ev);
    const InferenceState st = run_estep(b);
    for (std::size_t n = 1; n <= ev.size(); ++n) {
        const double quad = ref::quadrature_tau(b, st, n, 20);
        EXPECT_NEAR(st.tau[static_cast<Eigen::Index>(n) - 1], quad, 1e-8 * quad);
    }
}

TEST(EStep, SmoothedInteriorIsADistribution) {
    std::mt19937_64 rng(14);
    const ModelParams p = ref::random_params(rng, 3, 0.2);
    const EventSequence ev = ref::random_events(rng, 6, 0.2, 1.5);
    const TransitionBundles b(p, ev);
    const InferenceState st = forward_backward(b);
    for (std::size_t n = 1; n <= ev.size(); ++n) {
        EXPECT_NEAR(ref::smoothed_at(b, st, n, 0.37 * ev.duration(n)).sum(), 1.0, 1e-12);
    }
}

TEST(EStep, RequiresMatchingState) {
    std::mt19937_64 rng(15);
    const ModelParams p = ref::random_params(rng, 2, 0.2);
    const TransitionBundles b1(p, ref::random_events(rng, 5, 0.1, 1.0));
    const TransitionBundles b2(p, ref::random_events(rng, 6, 0.1, 1.0));
    InferenceState st = forward_backward(b1);
    EXPECT_THROW(estep_statistics(b2, st), InvalidInput);
}
