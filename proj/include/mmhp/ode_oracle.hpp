#pragma once

#include <cmath>
#include <cstddef>

#include "mmhp/model.hpp"
#include "mmhp/transition.hpp"

// Runge-Kutta integration of the transition-matrix ODEs. Used as an
// independent check on the closed-form products; not on any production path.

namespace mmhp::oracle {

namespace detail {

// Integrates dY/du = Y A (right = true) or dY/du = A Y (right = false) over
// one constant-coefficient piece of length `len` with at most `h_max` per step.
inline Matrix rk4_piece(Matrix y, const Matrix& a, double len, double h_max, bool right) {
    const long steps = std::max(1L, static_cast<long>(std::ceil(len / h_max - 1e-9)));
    const double h = len / static_cast<double>(steps);
    auto deriv = [&](const Matrix& v) -> Matrix { return right ? Matrix(v * a) : Matrix(a * v); };
    for (long s = 0; s < steps; ++s) {
        const Matrix k1 = deriv(y);
        const Matrix k2 = deriv(y + 0.5 * h * k1);
        const Matrix k3 = deriv(y + 0.5 * h * k2);
        const Matrix k4 = deriv(y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

}  // namespace detail

/// RK4 solution of dH/du = H (Q - Lambda_{t_{n-1}+u}), H(0) = I, on interval n
/// up to u, with step delta / substeps aligned to the delta-grid.
inline Matrix ode_forward_H(const ModelParams& params, const EventSequence& events, std::size_t n, double u,
                            int substeps = 1000) {
    const IntervalGrid grid = grid_decompose(events, params.delta);
    const IntensityGrid intensity(params, events);
    const long last = grid.steps.at(n - 1);
    const Eigen::Index m = params.mu.size();
    const double h_max = params.delta / substeps;
    Matrix h = Matrix::Identity(m, m);
    for (long k = 0; k <= last; ++k) {
        const double lo = static_cast<double>(k) * params.delta;
        if (lo >= u) break;
        const double hi = (k == last) ? u : std::min(u, lo + params.delta);
        const Matrix a = generator_minus_intensity(params.q, intensity.at(n, k));
        h = detail::rk4_piece(h, a, hi - lo, h_max, true);
    }
    return h;
}

/// RK4 solution of dG/du = (Q - Lambda_{t_n-u}) G, G(0) = I, integrating
/// backwards from t_n.
inline Matrix ode_backward_G(const ModelParams& params, const EventSequence& events, std::size_t n, double u,
                             int substeps = 1000) {
    const IntervalGrid grid = grid_decompose(events, params.delta);
    const IntensityGrid intensity(params, events);
    const long last = grid.steps.at(n - 1);
    const double x = events.duration(n);
    const Eigen::Index m = params.mu.size();
    const double h_max = params.delta / substeps;
    Matrix g = Matrix::Identity(m, m);
    const double stop = x - u;
    for (long k = last; k >= 0; --k) {
        const double lo = static_cast<double>(k) * params.delta;
        const double hi = (k == last) ? x : lo + params.delta;
        if (hi <= stop) break;
        const double len = hi - std::max(lo, stop);
        const Matrix a = generator_minus_intensity(params.q, intensity.at(n, k));
        g = detail::rk4_piece(g, a, len, h_max, false);
    }
    return g;
}

}  // namespace mmhp::oracle
