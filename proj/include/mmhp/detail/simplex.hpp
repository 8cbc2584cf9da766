#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace mmhp::detail {

struct SimplexResult {
    std::vector<double> x;
    double value{std::numeric_limits<double>::infinity()};
    int iterations{0};
    bool converged{false};
};

// Nelder-Mead minimization (GSL nmsimplex2). Non-finite objective values are
// treated as +inf so the simplex retreats from them.
inline SimplexResult minimize_simplex(const std::function<double(std::span<const double>)>& objective,
                                      std::vector<double> start, double initial_step, int max_iterations,
                                      double size_tolerance) {
    const std::size_t dim = start.size();
    SimplexResult best;
    best.x = start;
    best.value = objective(start);
    if (!std::isfinite(best.value)) best.value = std::numeric_limits<double>::infinity();
    if (dim == 0 || max_iterations <= 0) return best;

    gsl_set_error_handler_off();
    struct Closure {
        const std::function<double(std::span<const double>)>* f;
        std::vector<double> buffer;
    } closure{&objective, std::vector<double>(dim)};

    gsl_multimin_function fn;
    fn.n = dim;
    fn.params = &closure;
    fn.f = [](const gsl_vector* v, void* raw) -> double {
        auto* c = static_cast<Closure*>(raw);
        for (std::size_t i = 0; i < c->buffer.size(); ++i) c->buffer[i] = gsl_vector_get(v, i);
        const double value = (*c->f)(c->buffer);
        return std::isfinite(value) ? value : std::numeric_limits<double>::max();
    };

    auto free_vector = [](gsl_vector* v) { gsl_vector_free(v); };
    std::unique_ptr<gsl_vector, decltype(free_vector)> x(gsl_vector_alloc(dim), free_vector);
    std::unique_ptr<gsl_vector, decltype(free_vector)> step(gsl_vector_alloc(dim), free_vector);
    for (std::size_t i = 0; i < dim; ++i) {
        gsl_vector_set(x.get(), i, start[i]);
        gsl_vector_set(step.get(), i, initial_step);
    }
    auto free_solver = [](gsl_multimin_fminimizer* s) { gsl_multimin_fminimizer_free(s); };
    std::unique_ptr<gsl_multimin_fminimizer, decltype(free_solver)> solver(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim), free_solver);
    if (gsl_multimin_fminimizer_set(solver.get(), &fn, x.get(), step.get()) != GSL_SUCCESS) {
        return best;
    }

    int it = 0;
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && it < max_iterations) {
        ++it;
        if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver.get()), size_tolerance);
    }
    best.iterations = it;
    best.converged = (status == GSL_SUCCESS);
    const double found = solver->fval;
    if (found < best.value) {
        best.value = found;
        for (std::size_t i = 0; i < dim; ++i) best.x[i] = gsl_vector_get(solver->x, i);
    }
    return best;
}

}  // namespace mmhp::detail
