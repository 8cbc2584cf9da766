#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "mmhp/mmhp.hpp"

namespace mmhp::ref {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random valid parameters with moderate rates.
inline ModelParams random_params(std::mt19937_64& rng, int m, double delta) {
    ModelParams p;
    p.delta = delta;
    p.mu.resize(m);
    p.alpha.resize(m);
    p.beta.resize(m);
    p.xi0.resize(m);
    p.q = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        p.mu[i] = uniform(rng, 0.2, 2.0);
        p.alpha[i] = uniform(rng, 0.0, 3.0);
        p.beta[i] = p.alpha[i] + uniform(rng, 0.5, 5.0);
        p.xi0[i] = uniform(rng, 0.1, 1.0);
        for (int j = 0; j < m; ++j) {
            if (i != j) p.q(i, j) = uniform(rng, 0.05, 1.5);
        }
        p.q(i, i) = -p.q.row(i).sum();
    }
    p.xi0 /= p.xi0.sum();
    return p;
}

/// Increasing event times with gaps drawn uniformly from (lo, hi].
inline EventSequence random_events(std::mt19937_64& rng, std::size_t k, double lo, double hi) {
    std::vector<double> t;
    double now = 0.0;
    for (std::size_t n = 0; n < k; ++n) {
        now += uniform(rng, lo, hi);
        t.push_back(now);
    }
    return EventSequence(t);
}

inline ModelParams reference_params(double delta = 0.1) {
    ModelParams p;
    p.mu = Vector::Constant(2, 1.0);
    p.alpha.resize(2);
    p.alpha << 1.0, 4.0;
    p.beta.resize(2);
    p.beta << 2.0, 10.0;
    p.q.resize(2, 2);
    p.q << -1.0, 1.0, 1.0, -1.0;
    p.xi0 = Vector::Constant(2, 0.5);
    p.delta = delta;
    return p;
}

/// Score of a state path s_1..s_K (0-based), maximized over s_0, in logs:
/// log xi0(s_0) + sum_n log H_{s_{n-1} s_n}(x_n) + log lambda_{s_n}(t_n^-).
inline double path_log_score(const TransitionBundles& b, const std::vector<int>& path) {
    const ModelParams& p = b.params();
    double best = -std::numeric_limits<double>::infinity();
    for (int s0 = 0; s0 < p.num_states(); ++s0) {
        double score = std::log(p.xi0[s0]);
        int prev = s0;
        for (std::size_t n = 1; n <= path.size(); ++n) {
            const int s = path[n - 1];
            score += std::log(b.interval(n).forward(prev, s)) + std::log(b.event_intensity(n)[s]);
            prev = s;
        }
        best = std::max(best, score);
    }
    return best;
}

struct BruteForceDecode {
    std::vector<int> states;
    double log_score{-std::numeric_limits<double>::infinity()};
};

/// Exhaustive search over all M^K state paths.
inline BruteForceDecode brute_force_viterbi(const TransitionBundles& b) {
    const int m = static_cast<int>(b.states());
    const std::size_t k = b.size();
    std::vector<int> path(k, 0);
    BruteForceDecode best;
    while (true) {
        const double score = path_log_score(b, path);
        if (score > best.log_score) {
            best.log_score = score;
            best.states = path;
        }
        std::size_t pos = 0;
        while (pos < k && ++path[pos] == m) path[pos++] = 0;
        if (pos == k) break;
    }
    return best;
}

/// Smoothed distribution at t_{n-1} + u from the closed-form H and G.
inline Vector smoothed_at(const TransitionBundles& b, const InferenceState& st, std::size_t n, double u) {
    const auto& iv = b.interval(n);
    const RowVector left = st.forward.row(static_cast<Eigen::Index>(n) - 1) * b.forward_H(n, u);
    const Vector right = b.backward_G(n, iv.duration - u) *
                         b.event_intensity(n).cwiseProduct(st.backward.row(static_cast<Eigen::Index>(n) + 1).transpose());
    return left.transpose().cwiseProduct(right) / st.c[static_cast<Eigen::Index>(n) - 1];
}

/// Composite Simpson quadrature of sum_i xi^i_{t|T} lambda^i_t over interval
/// n, with `sub` panels per delta-step.
inline double quadrature_tau(const TransitionBundles& b, const InferenceState& st, std::size_t n, int sub = 100) {
    const auto& iv = b.interval(n);
    const double delta = b.params().delta;
    double total = 0.0;
    for (long k = 0; k <= iv.steps; ++k) {
        const double lo = static_cast<double>(k) * delta;
        const double hi = (k == iv.steps) ? iv.duration : lo + delta;
        if (!(hi > lo)) continue;
        const Vector lam = b.lambda(n, k);
        const double h = (hi - lo) / sub;
        double acc = 0.0;
        for (int s = 0; s <= sub; ++s) {
            const double u = (s == sub) ? hi : lo + h * s;
            const double w = (s == 0 || s == sub) ? 1.0 : (s % 2 == 1 ? 4.0 : 2.0);
            acc += w * smoothed_at(b, st, n, u).dot(lam);
        }
        total += acc * h / 3.0;
    }
    return total;
}

/// Log-likelihood of a single delta-Hawkes process computed directly from
/// the intensity: sum log lambda(t_n^-) - integral of lambda.
inline double hawkes_delta_loglik(double mu, double alpha, double beta, double delta, const EventSequence& ev) {
    double ll = 0.0;
    std::vector<double> past;
    for (std::size_t n = 1; n <= ev.size(); ++n) {
        const double x = ev.duration(n);
        const double start = ev.time(n - 1);
        const GridSplit split = split_duration(x, delta);
        for (long k = 0; k <= split.steps; ++k) {
            double excite = 0.0;
            for (double tl : past) excite += alpha * std::exp(-beta * (start + static_cast<double>(k) * delta - tl));
            const double len = (k < split.steps) ? delta : split.residual;
            ll -= (mu + excite) * len;
            if (k == split.steps) ll += std::log(mu + excite);
        }
        past.push_back(ev.time(n));
    }
    return ll;
}

}  // namespace mmhp::ref
