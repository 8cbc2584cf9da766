#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmhp/error.hpp"
#include "mmhp/matexp.hpp"

namespace mmhp {

// Lower clamp applied to intensities before any logarithm.
inline constexpr double kIntensityFloor = 1e-300;

inline double safe_log(double x) { return std::log(std::max(x, kIntensityFloor)); }

/// Parameter set of an M-state Markov-modulated Hawkes process with
/// exponential kernels phi_i(t) = alpha_i exp(-beta_i t) frozen on
/// delta-steps anchored at the last event.
struct ModelParams {
    Vector mu;     // baseline intensities, 1/s
    Vector alpha;  // kernel jump sizes, 1/s (zero for an MMPP)
    Vector beta;   // kernel decay rates, 1/s
    Matrix q;      // generator of the hidden chain, 1/s
    Vector xi0;    // initial distribution
    double delta{1.0};

    int num_states() const { return static_cast<int>(mu.size()); }

    void validate() const {
        const Eigen::Index m = mu.size();
        if (m < 1 || m > kMaxStates) {
            throw InvalidInput("number of states must lie in [1, " + std::to_string(kMaxStates) + "]");
        }
        if (alpha.size() != m || beta.size() != m || xi0.size() != m || q.rows() != m || q.cols() != m) {
            throw InvalidInput("parameter dimensions disagree with M = " + std::to_string(m));
        }
        if (!(delta > 0.0) || !std::isfinite(delta)) {
            throw InvalidInput("delta must be positive and finite");
        }
        double xi_sum = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!(mu[i] > 0.0) || !std::isfinite(mu[i])) throw InvalidInput("mu must be positive");
            if (!(alpha[i] >= 0.0) || !std::isfinite(alpha[i])) throw InvalidInput("alpha must be nonnegative");
            if (!(beta[i] > 0.0) || !std::isfinite(beta[i])) throw InvalidInput("beta must be positive");
            if (!(xi0[i] >= 0.0)) throw InvalidInput("xi0 entries must be nonnegative");
            xi_sum += xi0[i];
            double row = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (!std::isfinite(q(i, j))) throw InvalidInput("generator entries must be finite");
                if (i != j && q(i, j) < 0.0) throw InvalidInput("generator off-diagonals must be nonnegative");
                row += q(i, j);
            }
            if (std::abs(row) > 1e-12 * std::max(1.0, q.row(i).cwiseAbs().sum())) {
                throw InvalidInput("generator rows must sum to zero");
            }
        }
        if (std::abs(xi_sum - 1.0) > 1e-12) {
            throw InvalidInput("xi0 must sum to one");
        }
    }

    bool is_mmpp() const { return (alpha.array() == 0.0).all(); }
};

/// Ordered event times t_1 < ... < t_K observed on [0, T], with t_0 = 0.
class EventSequence {
public:
    EventSequence() = default;

    explicit EventSequence(std::vector<double> times, double horizon = std::numeric_limits<double>::quiet_NaN())
        : times_(std::move(times)) {
        double prev = 0.0;
        for (std::size_t n = 0; n < times_.size(); ++n) {
            if (!std::isfinite(times_[n]) || !(times_[n] > prev)) {
                throw InvalidInput("event times must be finite and strictly increasing from 0 (index " +
                                   std::to_string(n + 1) + ")");
            }
            prev = times_[n];
        }
        horizon_ = std::isnan(horizon) ? prev : horizon;
        if (horizon_ < prev) {
            throw InvalidInput("horizon precedes the last event");
        }
    }

    std::size_t size() const { return times_.size(); }
    bool empty() const { return times_.empty(); }
    double horizon() const { return horizon_; }
    double last() const { return times_.empty() ? 0.0 : times_.back(); }
    std::span<const double> times() const { return times_; }

    // 1-based: t_n, with t_0 = 0.
    double time(std::size_t n) const { return n == 0 ? 0.0 : times_[n - 1]; }

    // 1-based duration x_n = t_n - t_{n-1}.
    double duration(std::size_t n) const { return time(n) - time(n - 1); }

private:
    std::vector<double> times_;
    double horizon_{0.0};
};

/// Full delta-steps and residual of one inter-event duration.
struct GridSplit {
    long steps{0};       // l_n
    double residual{0};  // Delta_n, in (0, delta]
};

/// Splits x = l delta + Delta with 0 < Delta <= delta. An exact multiple
/// x = l delta folds its last step into the residual (l - 1, delta), which
/// is the left limit l(t_n^-) of the step counter.
inline GridSplit split_duration(double x, double delta) {
    if (!(x > 0.0) || !(delta > 0.0)) {
        throw InvalidInput("split_duration: duration and delta must be positive");
    }
    long steps = static_cast<long>(std::ceil(x / delta)) - 1;
    steps = std::max(steps, 0L);
    return {steps, x - static_cast<double>(steps) * delta};
}

struct IntervalGrid {
    std::vector<long> steps;       // l_n for n = 1..K (stored 0-based)
    std::vector<double> residual;  // Delta_n

    std::size_t size() const { return steps.size(); }
};

inline IntervalGrid grid_decompose(const EventSequence& events, double delta) {
    IntervalGrid grid;
    grid.steps.reserve(events.size());
    grid.residual.reserve(events.size());
    for (std::size_t n = 1; n <= events.size(); ++n) {
        const GridSplit s = split_duration(events.duration(n), delta);
        grid.steps.push_back(s.steps);
        grid.residual.push_back(s.residual);
    }
    return grid;
}

/// A nonnegative decreasing excitation kernel.
template <class K>
concept DecayKernel = requires(const K& k, double t) {
    { k(t) } -> std::convertible_to<double>;
};

struct ExponentialKernel {
    double alpha{0.0};
    double beta{1.0};
    double operator()(double t) const { return alpha * std::exp(-beta * t); }
};

/// Kernel-generic grid intensity of one state by direct summation over the
/// history: mu + sum_{t_l <= anchor} phi(anchor + k delta - t_l).
/// O(K) per call; the exponential kernel uses IntensityGrid instead.
template <DecayKernel K>
double grid_intensity_direct(double mu, const K& kernel, std::span<const double> history, double anchor,
                             long k, double delta) {
    const double at = anchor + static_cast<double>(k) * delta;
    double sum = mu;
    for (double tl : history) {
        if (tl > anchor) break;
        sum += kernel(at - tl);
    }
    return sum;
}

/// Grid-frozen intensities of every state for the exponential kernel.
///
/// Keeps the per-state accumulator A_n = sum_{t_l <= t_{n-1}} e^{-beta (t_{n-1} - t_l)}
/// so that lambda^i at step k of interval n is mu + alpha A_n e^{-beta k delta}.
/// Interval K + 1 (after the last event) is included for online use.
class IntensityGrid {
public:
    IntensityGrid(const ModelParams& params, const EventSequence& events)
        : mu_(params.mu), alpha_(params.alpha), beta_(params.beta), delta_(params.delta),
          intervals_(events.size() + 1) {
        const Eigen::Index m = mu_.size();
        acc_.resize(static_cast<Eigen::Index>(intervals_), m);
        acc_.row(0).setZero();
        for (std::size_t n = 1; n < intervals_; ++n) {
            const double x = events.duration(n);
            for (Eigen::Index i = 0; i < m; ++i) {
                acc_(static_cast<Eigen::Index>(n), i) =
                    1.0 + std::exp(-beta_[i] * x) * acc_(static_cast<Eigen::Index>(n) - 1, i);
            }
        }
    }

    // Number of intervals covered, K + 1.
    std::size_t intervals() const { return intervals_; }
    double delta() const { return delta_; }

    /// lambda at t_{n-1} + k delta, 1-based n in [1, K + 1].
    Vector at(std::size_t n, long k) const {
        if (n < 1 || n > intervals_ || k < 0) {
            throw InvalidInput("intensity index out of range");
        }
        Vector lam(mu_.size());
        const auto row = static_cast<Eigen::Index>(n) - 1;
        for (Eigen::Index i = 0; i < mu_.size(); ++i) {
            lam[i] = mu_[i] + alpha_[i] * acc_(row, i) * std::exp(-beta_[i] * static_cast<double>(k) * delta_);
        }
        return lam;
    }

    double accumulator(std::size_t n, int state) const {
        return acc_(static_cast<Eigen::Index>(n) - 1, state);
    }

private:
    Vector mu_;
    Vector alpha_;
    Vector beta_;
    double delta_;
    std::size_t intervals_;
    Eigen::MatrixXd acc_;
};

/// Grid intensity with a bounds check on the step index against l_n.
inline Vector intensity_at_grid(const IntensityGrid& grid, const IntervalGrid& split, std::size_t n, long k) {
    if (n < 1 || n > split.size()) {
        throw InvalidInput("interval index out of range");
    }
    if (k < 0 || k > split.steps[n - 1]) {
        throw InvalidInput("step index out of range");
    }
    return grid.at(n, k);
}

/// Stationary distribution of an irreducible generator: pi Q = 0, sum pi = 1.
inline Vector stationary_distribution(const Matrix& q) {
    const Eigen::Index m = q.rows();
    if (m < 1 || q.cols() != m) {
        throw InvalidInput("stationary_distribution: generator must be square");
    }
    Eigen::MatrixXd system = q.transpose();
    system.row(m - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs[m - 1] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        throw NumericalError("stationary_distribution: generator is reducible or singular (rank " +
                             std::to_string(lu.rank()) + " of " + std::to_string(m) + ")");
    }
    Eigen::VectorXd pi = lu.solve(rhs);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!(pi[i] > 0.0)) {
            throw NumericalError("stationary_distribution: non-positive mass on state " + std::to_string(i + 1) +
                                 ", generator is not irreducible");
        }
    }
    return pi;
}

}  // namespace mmhp
