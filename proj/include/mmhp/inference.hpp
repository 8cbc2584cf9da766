#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mmhp/error.hpp"
#include "mmhp/matexp.hpp"
#include "mmhp/model.hpp"
#include "mmhp/transition.hpp"

namespace mmhp {

/// Scaled forward/backward quantities and E-step sufficient statistics.
struct InferenceState {
    Eigen::VectorXd c;               // scaling factors c_1..c_K (0-based storage)
    Eigen::MatrixXd forward;         // (K+1) x M, row n is L(n); L(0) = xi0
    Eigen::MatrixXd backward;        // (K+2) x M, row n is R(n)'; row 0 unused, R(K+1) = 1
    double loglik{0.0};
    Eigen::MatrixXd smoothed;        // K x M, row n-1 is xi_{t_n|T}
    Eigen::VectorXd smoothed_initial;  // xi_{0|T}

    bool has_statistics{false};
    Eigen::VectorXd occupancy;             // E[D_i | F_T], seconds
    Eigen::MatrixXd transitions;           // E[w_ij | F_T], zero diagonal
    Eigen::VectorXd integrated_intensity;  // int_0^T xi^i_{t|T} lambda^i_t dt
    Eigen::VectorXd tau;                   // compensator increments tau_n

    // diag of the Van Loan blocks divided by c_n, one row per step of every
    // interval (l_n + 1 rows for interval n, residual last), starting at
    // block_offset[n - 1]. Consumed by the Hawkes M-step.
    Eigen::MatrixXd block_diag;
    std::vector<std::size_t> block_offset;

    std::size_t size() const { return static_cast<std::size_t>(c.size()); }
};

/// Scaled forward-backward recursions:
/// c_n = L(n-1) f_n 1, L(n) = L(n-1) f_n / c_n, R(n) = f_n R(n+1) / c_n.
inline InferenceState forward_backward(const TransitionBundles& bundles) {
    const ModelParams& p = bundles.params();
    const Eigen::Index m = p.mu.size();
    const auto k_events = static_cast<Eigen::Index>(bundles.size());

    InferenceState st;
    st.c.resize(k_events);
    st.forward.resize(k_events + 1, m);
    st.backward.resize(k_events + 2, m);
    st.forward.row(0) = p.xi0.transpose();

    std::vector<Matrix> density(static_cast<std::size_t>(k_events));
    RowVector l = p.xi0.transpose();
    double loglik = 0.0;
    for (Eigen::Index n = 1; n <= k_events; ++n) {
        density[static_cast<std::size_t>(n - 1)] = bundles.density_f(static_cast<std::size_t>(n));
        RowVector next = l * density[static_cast<std::size_t>(n - 1)];
        const double cn = next.sum();
        if (!(cn > 0.0) || !std::isfinite(cn)) {
            throw NumericalError("forward recursion: non-positive or non-finite scaling factor", n);
        }
        l = next / cn;
        st.c[n - 1] = cn;
        st.forward.row(n) = l;
        loglik += std::log(cn);
    }
    st.loglik = loglik;

    Vector r = Vector::Ones(m);
    st.backward.row(0).setZero();
    st.backward.row(k_events + 1) = r.transpose();
    for (Eigen::Index n = k_events; n >= 1; --n) {
        r = density[static_cast<std::size_t>(n - 1)] * r / st.c[n - 1];
        st.backward.row(n) = r.transpose();
    }

    st.smoothed.resize(k_events, m);
    for (Eigen::Index n = 1; n <= k_events; ++n) {
        st.smoothed.row(n - 1) = st.forward.row(n).cwiseProduct(st.backward.row(n + 1));
    }
    st.smoothed_initial = st.forward.row(0).cwiseProduct(st.backward.row(1)).transpose();
    return st;
}

/// Filtered distribution xi_{t_n|t_n}: the scaled forward row L(n).
inline Vector filtered_probabilities(const InferenceState& st, std::size_t n) {
    if (n > st.size()) throw InvalidInput("filtered_probabilities: index out of range");
    return st.forward.row(static_cast<Eigen::Index>(n)).transpose();
}

/// Expected occupancy times, transition counts, integrated smoothed intensity
/// and compensator increments from Van Loan block integrals.
///
/// The coupling block P = Lambda_{t_n^-} R(n+1) L(n-1) has rank one, so
/// Omega_k = (Psi E_res Lambda R(n+1)) (L(n-1) Xi_k) is assembled from one
/// suffix column and one prefix row per step.
inline void estep_statistics(const TransitionBundles& bundles, InferenceState& st) {
    const ModelParams& p = bundles.params();
    const Eigen::Index m = p.mu.size();
    const std::size_t k_events = bundles.size();
    if (st.size() != k_events) {
        throw InvalidInput("estep_statistics: forward-backward state does not match the bundles");
    }

    std::size_t total_rows = 0;
    st.block_offset.resize(k_events);
    for (std::size_t n = 1; n <= k_events; ++n) {
        st.block_offset[n - 1] = total_rows;
        total_rows += static_cast<std::size_t>(bundles.interval(n).steps + 1);
    }
    st.block_diag.resize(static_cast<Eigen::Index>(total_rows), m);
    st.tau.resize(static_cast<Eigen::Index>(k_events));

    Matrix sum_blocks = Matrix::Zero(m, m);
    Vector int_lambda = Vector::Zero(m);
    std::vector<RowVector> prefix;
    std::vector<Vector> suffix;

    for (std::size_t n = 1; n <= k_events; ++n) {
        const auto& iv = bundles.interval(n);
        const long steps = iv.steps;
        const double cn = st.c[static_cast<Eigen::Index>(n) - 1];
        const Vector u = bundles.event_intensity(n).cwiseProduct(
            st.backward.row(static_cast<Eigen::Index>(n) + 1).transpose());

        prefix.assign(static_cast<std::size_t>(steps + 1), RowVector());
        prefix[0] = st.forward.row(static_cast<Eigen::Index>(n) - 1);
        for (long k = 0; k < steps; ++k) {
            prefix[static_cast<std::size_t>(k + 1)] = prefix[static_cast<std::size_t>(k)] * bundles.step_exp(n, k);
        }
        suffix.assign(static_cast<std::size_t>(steps + 1), Vector());
        suffix[static_cast<std::size_t>(steps)] = u;
        if (steps > 0) {
            suffix[static_cast<std::size_t>(steps - 1)] = iv.residual_exp * u;
            for (long k = steps - 2; k >= 0; --k) {
                suffix[static_cast<std::size_t>(k)] = bundles.step_exp(n, k + 1) * suffix[static_cast<std::size_t>(k + 1)];
            }
        }

        double tau_n = 0.0;
        const std::size_t base = st.block_offset[n - 1];
        for (long k = 0; k <= steps; ++k) {
            const Vector lam = bundles.lambda(n, k);
            VanLoanBlock block;
            block.a = generator_minus_intensity(p.q, lam);
            block.w = suffix[static_cast<std::size_t>(k)] * prefix[static_cast<std::size_t>(k)];
            block.dt = (k < steps) ? p.delta : iv.residual;
            const Matrix integral = vanloan_upper_right(block) / cn;
            sum_blocks += integral;
            const auto row = static_cast<Eigen::Index>(base + static_cast<std::size_t>(k));
            for (Eigen::Index i = 0; i < m; ++i) {
                const double d = integral(i, i);
                st.block_diag(row, i) = d;
                int_lambda[i] += lam[i] * d;
                tau_n += lam[i] * d;
            }
        }
        if (!std::isfinite(tau_n)) {
            throw NumericalError("E-step: non-finite block integral", static_cast<long>(n));
        }
        st.tau[static_cast<Eigen::Index>(n) - 1] = tau_n;
    }

    st.occupancy = sum_blocks.diagonal();
    st.transitions = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i != j) st.transitions(i, j) = p.q(i, j) * sum_blocks(j, i);
        }
    }
    st.integrated_intensity = int_lambda;
    st.has_statistics = true;
}

/// Forward-backward followed by the E-step statistics.
inline InferenceState run_estep(const TransitionBundles& bundles) {
    InferenceState st = forward_backward(bundles);
    estep_statistics(bundles, st);
    return st;
}

/// Log-likelihood only (forward pass).
inline double log_likelihood(const ModelParams& params, const EventSequence& events) {
    return forward_backward(TransitionBundles(params, events)).loglik;
}

}  // namespace mmhp
