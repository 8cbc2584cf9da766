#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mmhp/error.hpp"
#include "mmhp/matexp.hpp"
#include "mmhp/model.hpp"

namespace mmhp {

/// Q - Lambda for a given intensity vector.
inline Matrix generator_minus_intensity(const Matrix& q, const Vector& lambda) {
    Matrix a = q;
    a.diagonal() -= lambda;
    return a;
}

/// Ordered product of constant-hazard factors over [a, b] inside one
/// inter-event interval, split at the multiples of delta.
///
/// `piece(k, lo, hi)` returns the factor for the part [lo, hi] of step k.
/// When `last_step >= 0` the step index is capped there: the final step of a
/// closed interval absorbs its residual.
template <class Piece>
Matrix piecewise_product(Eigen::Index m, double a, double b, double delta, long last_step, Piece&& piece) {
    Matrix result = Matrix::Identity(m, m);
    if (!(b > a)) {
        return result;
    }
    long k0 = static_cast<long>(std::floor(a / delta));
    long k1 = static_cast<long>(std::ceil(b / delta)) - 1;
    if (last_step >= 0) {
        k0 = std::min(k0, last_step);
        k1 = std::min(k1, last_step);
    }
    k0 = std::max(k0, 0L);
    k1 = std::max(k1, k0);
    for (long k = k0; k <= k1; ++k) {
        const double start = static_cast<double>(k) * delta;
        const double lo = std::max(a, start);
        const double hi = (k == last_step) ? b : std::min(b, static_cast<double>(k + 1) * delta);
        if (hi > lo) {
            result = result * piece(k, lo, hi);
        }
    }
    return result;
}

/// Per-interval transition matrices of the delta-piecewise constant model.
///
/// For interval n the hazards are constant on the steps [k delta, (k+1) delta)
/// (k < l_n) and on the residual [l_n delta, x_n]. The step exponentials
/// E_k = e^{(Q - Lambda_k) delta} and E_res = e^{(Q - Lambda_l) Delta} are computed
/// once; H, G and R are ordered products of them, with partial steps
/// exponentiated on demand.
class TransitionBundles {
public:
    struct Interval {
        long steps{0};
        double residual{0.0};
        double duration{0.0};
        std::vector<double> lambda;        // (steps + 1) x M grid intensities
        std::vector<double> step_exp;      // steps x M x M, row-major E_k
        Matrix residual_exp;               // E_res
        Matrix forward;                    // H(x_n)
    };

    TransitionBundles(const ModelParams& params, const EventSequence& events)
        : params_(validated(params)), events_(events), grid_(grid_decompose(events, params.delta)),
          intensity_(params, events) {
        const Eigen::Index m = params_.mu.size();
        intervals_.resize(events.size());
        for (std::size_t n = 1; n <= events.size(); ++n) {
            Interval& iv = intervals_[n - 1];
            iv.steps = grid_.steps[n - 1];
            iv.residual = grid_.residual[n - 1];
            iv.duration = events.duration(n);
            iv.lambda.resize(static_cast<std::size_t>((iv.steps + 1) * m));
            iv.step_exp.resize(static_cast<std::size_t>(iv.steps * m * m));
            Matrix h = Matrix::Identity(m, m);
            for (long k = 0; k <= iv.steps; ++k) {
                const Vector lam = intensity_.at(n, k);
                for (Eigen::Index i = 0; i < m; ++i) {
                    iv.lambda[static_cast<std::size_t>(k * m + i)] = lam[i];
                }
                const Matrix a = generator_minus_intensity(params_.q, lam);
                if (k < iv.steps) {
                    const Matrix e = expm(a, params_.delta);
                    std::copy(e.data(), e.data() + m * m, iv.step_exp.begin() + k * m * m);
                    h = h * e;
                } else {
                    iv.residual_exp = expm(a, iv.residual);
                    h = h * iv.residual_exp;
                }
            }
            iv.forward = h;
        }
    }

    const ModelParams& params() const { return params_; }
    const EventSequence& events() const { return events_; }
    const IntervalGrid& grid() const { return grid_; }
    const IntensityGrid& intensity() const { return intensity_; }
    std::size_t size() const { return intervals_.size(); }
    Eigen::Index states() const { return params_.mu.size(); }

    const Interval& interval(std::size_t n) const {
        check_interval(n);
        return intervals_[n - 1];
    }

    /// Lambda at step k of interval n (k = l_n gives Lambda at t_n^-).
    Vector lambda(std::size_t n, long k) const {
        const Interval& iv = interval(n);
        if (k < 0 || k > iv.steps) throw InvalidInput("step index out of range");
        const Eigen::Index m = states();
        Vector lam(m);
        for (Eigen::Index i = 0; i < m; ++i) lam[i] = iv.lambda[static_cast<std::size_t>(k * m + i)];
        return lam;
    }

    Vector event_intensity(std::size_t n) const { return lambda(n, interval(n).steps); }

    Matrix step_exp(std::size_t n, long k) const {
        const Interval& iv = interval(n);
        if (k < 0 || k >= iv.steps) throw InvalidInput("step index out of range");
        const Eigen::Index m = states();
        Matrix e(m, m);
        std::copy(iv.step_exp.begin() + k * m * m, iv.step_exp.begin() + (k + 1) * m * m, e.data());
        return e;
    }

    /// Exponential of step k over [lo, hi], reusing the cached full steps.
    Matrix piece_exp(std::size_t n, long k, double lo, double hi) const {
        const Interval& iv = interval(n);
        const double start = static_cast<double>(k) * params_.delta;
        if (k < iv.steps && lo == start && hi == static_cast<double>(k + 1) * params_.delta) {
            return step_exp(n, k);
        }
        if (k == iv.steps && lo == start && hi == iv.duration) {
            return iv.residual_exp;
        }
        return expm(generator_minus_intensity(params_.q, lambda(n, k)), hi - lo);
    }

    /// Product of transition factors over [a, b], 0 <= a <= b <= x_n.
    Matrix product(std::size_t n, double a, double b) const {
        const Interval& iv = interval(n);
        if (a < 0.0 || b > iv.duration || a > b) {
            throw InvalidInput("sub-interval outside [0, x_n]");
        }
        return piecewise_product(states(), a, b, params_.delta, iv.steps,
                                 [&](long k, double lo, double hi) { return piece_exp(n, k, lo, hi); });
    }

    /// Forward transition matrix H(u): no event on (t_{n-1}, t_{n-1} + u].
    Matrix forward_H(std::size_t n, double u) const {
        const Interval& iv = interval(n);
        if (u < 0.0 || u > iv.duration) throw InvalidInput("forward_H: u outside [0, x_n]");
        if (u == iv.duration) return iv.forward;
        return product(n, 0.0, u);
    }

    /// Backward transition matrix G(u): no event on (t_n - u, t_n].
    Matrix backward_G(std::size_t n, double u) const {
        const Interval& iv = interval(n);
        if (u < 0.0 || u > iv.duration) throw InvalidInput("backward_G: u outside [0, x_n]");
        if (u == iv.duration) return iv.forward;
        return product(n, iv.duration - u, iv.duration);
    }

    /// Duration density f(x_n) = H(x_n) Lambda_{t_n^-}.
    Matrix density_f(std::size_t n) const {
        return interval(n).forward * event_intensity(n).asDiagonal();
    }

    /// Intra-interval transition R(u, u') = H(u)^{-1} H(u'), built as a direct
    /// product so that it stays defined when H(u) underflows.
    Matrix intra_R(std::size_t n, double u, double u_prime) const {
        if (u > u_prime) throw InvalidInput("intra_R: u must not exceed u'");
        return product(n, u, u_prime);
    }

private:
    static const ModelParams& validated(const ModelParams& params) {
        params.validate();
        return params;
    }

    void check_interval(std::size_t n) const {
        if (n < 1 || n > intervals_.size()) throw InvalidInput("interval index out of range");
    }

    ModelParams params_;
    EventSequence events_;
    IntervalGrid grid_;
    IntensityGrid intensity_;
    std::vector<Interval> intervals_;
};

}  // namespace mmhp
