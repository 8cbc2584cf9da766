#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mmhp/detail/simplex.hpp"
#include "mmhp/error.hpp"
#include "mmhp/inference.hpp"
#include "mmhp/model.hpp"
#include "mmhp/transition.hpp"

namespace mmhp {

struct FitConfig {
    int max_steps{2000};
    double tolerance{1e-6};             // stop when the loglik gain falls below this
    int max_inner_iterations{200};      // simplex iterations per state and M-step
    double parameter_tolerance{1e-8};   // simplex size in log-parameter space
    int restarts{3};
    std::uint64_t seed{0};
    double delta{1.0};
    bool mmpp{false};                   // alpha = 0 with the closed-form baseline update
    bool fix_alpha_zero{false};         // alpha = 0, baseline still updated numerically
    std::optional<std::vector<double>> fixed_beta;
    std::optional<ModelParams> initial;  // replaces the default starting point of restart 0
    bool keep_history{false};
};

struct FitResult {
    ModelParams params;
    std::vector<double> loglik_trace;  // one entry per E-step, plus the final evaluation
    std::vector<std::vector<double>> restart_traces;  // traces of every successful restart
    double loglik{-std::numeric_limits<double>::infinity()};
    int steps{0};
    bool converged{false};
    int free_parameters{0};
    double aic{0.0};
    double bic{0.0};
    std::vector<int> label_order;  // label_order[i]: pre-canonicalization index of state i
    int restart{0};
    std::vector<ModelParams> history;
};

inline bool alpha_is_zero(const FitConfig& config) { return config.mmpp || config.fix_alpha_zero; }

/// Free parameters: Hawkes (mu, alpha, beta) per state, off-diagonal
/// generator entries and the initial distribution.
inline int free_parameter_count(int m, bool mmpp, bool fixed_beta = false) {
    const int hawkes = mmpp ? m : (fixed_beta ? 2 * m : 3 * m);
    return hawkes + m * (m - 1) + (m - 1);
}

struct InformationCriteria {
    double aic{0.0};
    double bic{0.0};
};

inline InformationCriteria information_criteria(double loglik, int free_parameters, std::size_t events) {
    const double k = free_parameters;
    return {2.0 * k - 2.0 * loglik, k * std::log(static_cast<double>(events)) - 2.0 * loglik};
}

inline InformationCriteria information_criteria(const FitResult& result, std::size_t events) {
    return information_criteria(result.loglik, result.free_parameters, events);
}

struct MarkovUpdate {
    Matrix q;
    Vector xi0;
};

/// Closed-form generator and initial-distribution update.
inline MarkovUpdate m_step_markov(const ModelParams& current, const InferenceState& st) {
    if (!st.has_statistics) throw InvalidInput("m_step_markov: E-step statistics missing");
    const Eigen::Index m = current.mu.size();
    MarkovUpdate out;
    out.q = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!(st.occupancy[i] > 0.0)) throw StateStarvation(static_cast<int>(i));
        double exit = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j) continue;
            out.q(i, j) = st.transitions(i, j) / st.occupancy[i];
            exit += out.q(i, j);
        }
        out.q(i, i) = -exit;
    }
    out.xi0 = current.xi0.cwiseProduct(st.backward.row(1).transpose());
    const double total = out.xi0.sum();
    if (!(total > 0.0)) throw NumericalError("m_step_markov: degenerate initial distribution");
    out.xi0 /= total;
    return out;
}

/// Expected complete-data Hawkes log-likelihood of one state, as a function
/// of its (mu, alpha, beta), with the smoothed weights and block integrals of
/// the current E-step held fixed.
class StateHawkesObjective {
public:
    StateHawkesObjective(const TransitionBundles& bundles, const InferenceState& st, int state)
        : delta_(bundles.params().delta) {
        const std::size_t k_events = bundles.size();
        weight_.resize(k_events);
        steps_.resize(k_events);
        duration_.resize(k_events);
        offset_.resize(k_events + 1);
        blocks_.resize(static_cast<std::size_t>(st.block_diag.rows()));
        for (std::size_t n = 1; n <= k_events; ++n) {
            weight_[n - 1] = st.smoothed(static_cast<Eigen::Index>(n) - 1, state);
            steps_[n - 1] = bundles.interval(n).steps;
            duration_[n - 1] = bundles.interval(n).duration;
            offset_[n - 1] = st.block_offset[n - 1];
        }
        offset_[k_events] = blocks_.size();
        for (std::size_t r = 0; r < blocks_.size(); ++r) {
            blocks_[r] = st.block_diag(static_cast<Eigen::Index>(r), state);
            total_block_ += blocks_[r];
        }
        for (double w : weight_) total_weight_ += w;
    }

    double operator()(double mu, double alpha, double beta) const {
        double value = -mu * total_block_;
        if (alpha == 0.0) {
            return value + total_weight_ * safe_log(mu);
        }
        const double ratio = std::exp(-beta * delta_);
        double acc = 0.0;
        for (std::size_t n = 0; n < weight_.size(); ++n) {
            if (n > 0) acc = 1.0 + std::exp(-beta * duration_[n - 1]) * acc;
            const long steps = steps_[n];
            const double lam_event = mu + alpha * acc * std::exp(-beta * static_cast<double>(steps) * delta_);
            value += weight_[n] * safe_log(lam_event);
            if (acc != 0.0) {
                double poly = 0.0;
                for (std::size_t r = offset_[n + 1]; r-- > offset_[n];) poly = poly * ratio + blocks_[r];
                value -= alpha * acc * poly;
            }
        }
        return value;
    }

    // Maximizer in mu when alpha = 0.
    double poisson_baseline() const { return total_weight_ / total_block_; }

    double total_weight() const { return total_weight_; }
    double total_block() const { return total_block_; }

private:
    double delta_;
    std::vector<double> weight_;
    std::vector<long> steps_;
    std::vector<double> duration_;
    std::vector<std::size_t> offset_;
    std::vector<double> blocks_;
    double total_block_{0.0};
    double total_weight_{0.0};
};

struct HawkesUpdate {
    Vector mu;
    Vector alpha;
    Vector beta;
};

/// Hawkes-parameter M-step. The objective separates across states; each
/// state is maximized by a simplex search over log-parameters started at the
/// current estimate, which is kept when the search does not improve on it.
inline HawkesUpdate m_step_hawkes(const TransitionBundles& bundles, const InferenceState& st,
                                  const FitConfig& config) {
    if (!st.has_statistics) throw InvalidInput("m_step_hawkes: E-step statistics missing");
    const ModelParams& p = bundles.params();
    const int m = p.num_states();
    HawkesUpdate out{p.mu, p.alpha, p.beta};
    constexpr double kLogMin = -30.0;
    constexpr double kLogMax = 30.0;
    auto bounded_exp = [&](double v) { return std::exp(std::clamp(v, kLogMin, kLogMax)); };

    for (int i = 0; i < m; ++i) {
        const StateHawkesObjective objective(bundles, st, i);
        const double current = objective(p.mu[i], alpha_is_zero(config) ? 0.0 : p.alpha[i], p.beta[i]);
        if (!std::isfinite(current)) {
            throw NumericalError("m_step_hawkes: objective is not finite at the current estimate");
        }
        if (config.mmpp) {
            out.mu[i] = objective.poisson_baseline();
            out.alpha[i] = 0.0;
            continue;
        }
        const bool free_beta = !config.fixed_beta.has_value();
        std::vector<double> start{std::log(p.mu[i])};
        if (!config.fix_alpha_zero) {
            start.push_back(std::log(std::max(p.alpha[i], std::exp(kLogMin))));
            if (free_beta) start.push_back(std::log(p.beta[i]));
        }
        auto unpack = [&](std::span<const double> x, double& mu, double& alpha, double& beta) {
            mu = bounded_exp(x[0]);
            alpha = config.fix_alpha_zero ? 0.0 : bounded_exp(x[1]);
            beta = (config.fix_alpha_zero || !free_beta) ? p.beta[i] : bounded_exp(x[2]);
        };
        const auto result = detail::minimize_simplex(
            [&](std::span<const double> x) {
                double mu, alpha, beta;
                unpack(x, mu, alpha, beta);
                return -objective(mu, alpha, beta);
            },
            start, 0.1, config.max_inner_iterations, config.parameter_tolerance);
        double mu, alpha, beta;
        unpack(result.x, mu, alpha, beta);
        if (objective(mu, alpha, beta) >= current) {
            out.mu[i] = mu;
            out.alpha[i] = alpha;
            out.beta[i] = beta;
        } else if (config.fix_alpha_zero) {
            out.alpha[i] = 0.0;
        }
    }
    return out;
}

/// Default starting point: baselines spread geometrically around the
/// empirical rate, mild excitation, and slow uniform switching.
inline ModelParams initial_params(const EventSequence& events, int m, const FitConfig& config) {
    if (m < 1 || m > kMaxStates) throw InvalidInput("number of states out of range");
    if (events.size() < 2) throw InvalidInput("at least two events are required");
    const double horizon = events.last();
    const double k_events = static_cast<double>(events.size());
    const double rate = k_events / horizon;

    ModelParams p;
    p.delta = config.delta;
    p.mu.resize(m);
    p.alpha.resize(m);
    p.beta.resize(m);
    p.xi0 = Vector::Constant(m, 1.0 / m);
    for (int i = 0; i < m; ++i) {
        p.mu[i] = rate * 0.5 * std::pow(2.0, i);
        if (alpha_is_zero(config)) {
            p.alpha[i] = 0.0;
            p.beta[i] = 1.0;
        } else {
            p.alpha[i] = 0.5 * p.mu[i] * (i + 1.0) / m;
            p.beta[i] = 2.0 * p.alpha[i] * m;
        }
        if (config.fixed_beta) p.beta[i] = config.fixed_beta->at(static_cast<std::size_t>(i));
    }
    const double sojourns = std::max(10.0, k_events / 100.0);
    const double off = std::clamp(m * sojourns / horizon, 1e-4, 10.0);
    p.q = Matrix::Constant(m, m, m > 1 ? off : 0.0);
    for (int i = 0; i < m; ++i) p.q(i, i) = -off * (m - 1);
    return p;
}

inline ModelParams jitter_params(const ModelParams& base, std::uint64_t seed, const FitConfig& config) {
    std::mt19937_64 rng(seed);
    auto factor = [&]() { return std::exp(-0.3 + 0.6 * static_cast<double>(rng() >> 11) * 0x1.0p-53); };
    ModelParams p = base;
    const int m = p.num_states();
    for (int i = 0; i < m; ++i) {
        p.mu[i] *= factor();
        if (!alpha_is_zero(config)) p.alpha[i] *= factor();
        if (!config.fixed_beta) p.beta[i] *= factor();
        double exit = 0.0;
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            p.q(i, j) *= factor();
            exit += p.q(i, j);
        }
        p.q(i, i) = -exit;
    }
    return p;
}

/// Copy of `base` with every off-diagonal generator entry set so that each
/// state is left at total rate `exit_rate`.
inline ModelParams with_switching_rate(const ModelParams& base, double exit_rate) {
    ModelParams p = base;
    const int m = p.num_states();
    if (m < 2) return p;
    const double off = exit_rate / (m - 1);
    p.q = Matrix::Constant(m, m, off);
    for (int i = 0; i < m; ++i) p.q(i, i) = -exit_rate;
    return p;
}

/// Relabels states by ascending alpha (ascending mu for Poisson states).
/// Returns the permutation: order[i] is the old index of new state i.
inline std::vector<int> canonicalize_labels(ModelParams& p, bool by_baseline) {
    const int m = p.num_states();
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (!by_baseline && p.alpha[a] != p.alpha[b]) return p.alpha[a] < p.alpha[b];
        return p.mu[a] < p.mu[b];
    });
    const ModelParams old = p;
    for (int i = 0; i < m; ++i) {
        const int src = order[static_cast<std::size_t>(i)];
        p.mu[i] = old.mu[src];
        p.alpha[i] = old.alpha[src];
        p.beta[i] = old.beta[src];
        p.xi0[i] = old.xi0[src];
        for (int j = 0; j < m; ++j) p.q(i, j) = old.q(src, order[static_cast<std::size_t>(j)]);
    }
    return order;
}

namespace detail {

inline FitResult run_em(const EventSequence& events, ModelParams params, const FitConfig& config) {
    FitResult res;
    const double horizon = events.last();
    double previous = -std::numeric_limits<double>::infinity();
    bool evaluated = false;
    for (int step = 1; step <= config.max_steps; ++step) {
        const TransitionBundles bundles(params, events);
        InferenceState st = forward_backward(bundles);
        estep_statistics(bundles, st);
        res.loglik_trace.push_back(st.loglik);
        res.steps = step;
        if (config.keep_history) res.history.push_back(params);
        for (Eigen::Index i = 0; i < st.occupancy.size(); ++i) {
            if (st.occupancy[i] < 1e-8 * horizon) throw StateStarvation(static_cast<int>(i));
        }
        if (st.loglik - previous < config.tolerance) {
            res.converged = true;
            res.loglik = st.loglik;
            evaluated = true;
            break;
        }
        previous = st.loglik;

        const MarkovUpdate markov = m_step_markov(params, st);
        const HawkesUpdate hawkes = m_step_hawkes(bundles, st, config);
        params.q = markov.q;
        params.xi0 = markov.xi0;
        params.mu = hawkes.mu;
        params.alpha = hawkes.alpha;
        params.beta = hawkes.beta;
    }
    if (!evaluated) {
        res.loglik = log_likelihood(params, events);
        res.loglik_trace.push_back(res.loglik);
    }
    if (!std::isfinite(res.loglik)) throw NumericalError("EM produced a non-finite log-likelihood");
    res.params = params;
    return res;
}

}  // namespace detail

/// EM estimation with restarts; returns the best run with canonical labels.
inline FitResult fit(const EventSequence& events, int m, const FitConfig& config) {
    if (events.size() < 2) throw InvalidInput("fit: at least two events are required");
    if (m < 1 || m > kMaxStates) throw InvalidInput("fit: number of states out of range");
    if (config.max_steps < 1 || !(config.tolerance > 0.0)) throw InvalidInput("fit: invalid stopping settings");
    if (config.fixed_beta && config.fixed_beta->size() != static_cast<std::size_t>(m)) {
        throw InvalidInput("fit: fixed_beta must have one entry per state");
    }

    const ModelParams base = config.initial ? *config.initial : initial_params(events, m, config);
    if (base.num_states() != m) throw InvalidInput("fit: initial parameters have the wrong number of states");

    std::optional<FitResult> best;
    std::string last_failure;
    std::vector<std::vector<double>> traces;
    const int runs = std::max(1, config.restarts);
    for (int r = 0; r < runs; ++r) {
        ModelParams start;
        if (r == 0) {
            start = base;
        } else if (r <= 2 && m > 1) {
            // Slow and fast switching starts; EM rarely crosses between the two regimes.
            const double rate = static_cast<double>(events.size()) / events.last();
            start = with_switching_rate(base, r == 1 ? rate : 0.1 * rate);
        } else {
            start = jitter_params(base, config.seed + static_cast<std::uint64_t>(r), config);
        }
        start.delta = config.delta;
        if (alpha_is_zero(config)) start.alpha.setZero();
        try {
            FitResult res = detail::run_em(events, start, config);
            res.restart = r;
            traces.push_back(res.loglik_trace);
            if (!best || res.loglik > best->loglik) best = std::move(res);
        } catch (const NumericalError& e) {
            last_failure = e.what();
        }
    }
    if (!best) throw NumericalError("fit: every restart failed; last error: " + last_failure);

    best->restart_traces = std::move(traces);
    best->label_order = canonicalize_labels(best->params, alpha_is_zero(config));
    best->free_parameters = free_parameter_count(m, alpha_is_zero(config), config.fixed_beta.has_value());
    const InformationCriteria ic = information_criteria(*best, events.size());
    best->aic = ic.aic;
    best->bic = ic.bic;
    return std::move(*best);
}

struct SelectionRow {
    std::string model;  // "MMHP" or "MMPP"
    int states{0};
    double delta{0.0};  // unused for MMPP rows
    double loglik{0.0};
    int free_parameters{0};
    double aic{0.0};
    double bic{0.0};
    int rank{0};  // 1 = lowest AIC
    FitResult fit;
};

/// Fits every (M, delta) MMHP configuration, plus one MMPP per M when
/// requested, and ranks them by AIC. Fits run concurrently.
inline std::vector<SelectionRow> select_models(const EventSequence& events, const std::vector<int>& state_grid,
                                               const std::vector<double>& delta_grid, bool include_mmpp,
                                               const FitConfig& base) {
    struct Job {
        std::string model;
        int m;
        double delta;
        FitConfig config;
    };
    std::vector<Job> jobs;
    for (int m : state_grid) {
        for (double d : delta_grid) {
            FitConfig c = base;
            c.delta = d;
            c.mmpp = false;
            jobs.push_back({"MMHP", m, d, c});
        }
        if (include_mmpp) {
            FitConfig c = base;
            c.mmpp = true;
            c.delta = delta_grid.empty() ? base.delta : *std::max_element(delta_grid.begin(), delta_grid.end());
            jobs.push_back({"MMPP", m, 0.0, c});
        }
    }

    std::vector<SelectionRow> rows(jobs.size());
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t start = 0; start < jobs.size(); start += workers) {
        std::vector<std::future<FitResult>> pending;
        const std::size_t stop = std::min(jobs.size(), start + workers);
        for (std::size_t j = start; j < stop; ++j) {
            pending.push_back(std::async(std::launch::async, [&events, &jobs, j]() {
                return fit(events, jobs[j].m, jobs[j].config);
            }));
        }
        for (std::size_t j = start; j < stop; ++j) {
            FitResult res = pending[j - start].get();
            SelectionRow& row = rows[j];
            row.model = jobs[j].model;
            row.states = jobs[j].m;
            row.delta = jobs[j].delta;
            row.loglik = res.loglik;
            row.free_parameters = res.free_parameters;
            row.aic = res.aic;
            row.bic = res.bic;
            row.fit = std::move(res);
        }
    }
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a].aic < rows[b].aic; });
    for (std::size_t r = 0; r < order.size(); ++r) rows[order[r]].rank = static_cast<int>(r) + 1;
    return rows;
}

}  // namespace mmhp
