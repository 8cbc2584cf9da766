#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "mmhp/error.hpp"
#include "mmhp/model.hpp"

namespace mmhp {

/// 64-bit Mersenne Twister with hand-rolled conversions, so streams are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double exponential(double rate) {
        if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
        return -std::log1p(-uniform()) / rate;
    }

    // Index drawn with probability proportional to weights[i].
    template <class V>
    int categorical(const V& weights) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < weights.size(); ++i) total += weights[i];
        const double u = uniform() * total;
        double acc = 0.0;
        int last_positive = 0;
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last_positive = static_cast<int>(i);
            if (u < acc) return static_cast<int>(i);
        }
        return last_positive;
    }

private:
    std::mt19937_64 engine_;
};

struct StopRule {
    std::optional<std::size_t> events;  // stop at the K-th event, T := t_K
    std::optional<double> horizon;      // stop at time T

    static StopRule after_events(std::size_t k) { return {k, std::nullopt}; }
    static StopRule at_horizon(double t) { return {std::nullopt, t}; }
};

struct HiddenJump {
    double time;
    int state;  // 0-based
};

struct SimulationResult {
    EventSequence events;
    std::vector<HiddenJump> hidden_path;  // first entry at time 0
    std::uint64_t seed{0};
    ModelParams params;
};

namespace detail {

inline void check_stop(const StopRule& stop) {
    if (stop.events.has_value() == stop.horizon.has_value()) {
        throw InvalidInput("simulation: give exactly one of an event count or a horizon");
    }
    if (stop.events && *stop.events < 1) throw InvalidInput("simulation: event count must be positive");
    if (stop.horizon && !(*stop.horizon > 0.0 && std::isfinite(*stop.horizon))) {
        throw InvalidInput("simulation: horizon must be positive and finite");
    }
}

inline int jump_target(Rng& rng, const ModelParams& p, int from) {
    Vector w = p.q.row(from).transpose();
    w[from] = 0.0;
    return rng.categorical(w);
}

inline SimulationResult finish(std::vector<double> times, std::vector<HiddenJump> path, const StopRule& stop,
                               std::uint64_t seed, const ModelParams& p) {
    double horizon = stop.horizon ? *stop.horizon : (times.empty() ? 0.0 : times.back());
    while (!path.empty() && path.size() > 1 && path.back().time > horizon) path.pop_back();
    return {EventSequence(std::move(times), horizon), std::move(path), seed, p};
}

}  // namespace detail

/// Exact simulation of the delta-model by competing exponential clocks:
/// on each segment the state, the frozen grid intensity and the distance to
/// the next grid boundary are fixed, so all hazards are constant.
inline SimulationResult simulate_mmhp_delta(const ModelParams& params, const StopRule& stop, std::uint64_t seed) {
    params.validate();
    detail::check_stop(stop);
    const int m = params.num_states();
    Rng rng(seed);

    int s = rng.categorical(params.xi0);
    std::vector<HiddenJump> path{{0.0, s}};
    std::vector<double> times;
    Vector acc = Vector::Zero(m);
    double anchor = 0.0;
    long k = 0;
    double t = 0.0;
    const double limit = stop.horizon.value_or(std::numeric_limits<double>::infinity());

    while (true) {
        const double lam = params.mu[s] + params.alpha[s] * acc[s] * std::exp(-params.beta[s] * static_cast<double>(k) * params.delta);
        const double boundary = anchor + static_cast<double>(k + 1) * params.delta;
        const double t_jump = t + rng.exponential(-params.q(s, s));
        const double t_event = t + rng.exponential(lam);
        const double next = std::min({t_jump, t_event, boundary});
        if (next >= limit) break;
        if (t_event == next) {
            for (int i = 0; i < m; ++i) acc[i] = 1.0 + std::exp(-params.beta[i] * (t_event - anchor)) * acc[i];
            anchor = t_event;
            k = 0;
            t = t_event;
            times.push_back(t_event);
            if (stop.events && times.size() == *stop.events) break;
        } else if (t_jump == next) {
            s = detail::jump_target(rng, params, s);
            t = t_jump;
            path.push_back({t_jump, s});
        } else {
            t = boundary;
            ++k;
        }
    }
    return detail::finish(std::move(times), std::move(path), stop, seed, params);
}

/// Continuous-decay MMHP by thinning, with the hidden chain simulated
/// exactly. Between structure points the intensity decreases, so its value
/// at the left endpoint bounds it.
inline SimulationResult simulate_mmhp_continuous(const ModelParams& params, const StopRule& stop, std::uint64_t seed) {
    params.validate();
    detail::check_stop(stop);
    const int m = params.num_states();
    Rng rng(seed);

    int s = rng.categorical(params.xi0);
    std::vector<HiddenJump> path{{0.0, s}};
    std::vector<double> times;
    Vector acc = Vector::Zero(m);
    double anchor = 0.0;
    double t = 0.0;
    const double limit = stop.horizon.value_or(std::numeric_limits<double>::infinity());
    auto intensity = [&](int i, double at) {
        return params.mu[i] + params.alpha[i] * acc[i] * std::exp(-params.beta[i] * (at - anchor));
    };

    while (true) {
        const double bound = intensity(s, t);
        const double t_jump = t + rng.exponential(-params.q(s, s));
        const double t_cand = t + rng.exponential(bound);
        if (std::min(t_jump, t_cand) >= limit) break;
        if (t_jump < t_cand) {
            s = detail::jump_target(rng, params, s);
            t = t_jump;
            path.push_back({t_jump, s});
            continue;
        }
        t = t_cand;
        const double lam = intensity(s, t_cand);
        if (lam > bound * (1.0 + 1e-12)) throw NumericalError("thinning bound violated");
        if (rng.uniform() * bound < lam) {
            for (int i = 0; i < m; ++i) acc[i] = 1.0 + std::exp(-params.beta[i] * (t_cand - anchor)) * acc[i];
            anchor = t_cand;
            times.push_back(t_cand);
            if (stop.events && times.size() == *stop.events) break;
        }
    }
    return detail::finish(std::move(times), std::move(path), stop, seed, params);
}

/// Fraction of [0, horizon] spent in each state along a hidden path.
inline Vector occupancy_fractions(const std::vector<HiddenJump>& path, double horizon, int m) {
    Vector occ = Vector::Zero(m);
    for (std::size_t r = 0; r < path.size(); ++r) {
        const double end = (r + 1 < path.size()) ? path[r + 1].time : horizon;
        occ[path[r].state] += std::max(0.0, std::min(end, horizon) - path[r].time);
    }
    if (horizon > 0.0) occ /= horizon;
    return occ;
}

/// Hidden state at time t (right-continuous path).
inline int state_at(const std::vector<HiddenJump>& path, double t) {
    int s = path.front().state;
    for (const auto& j : path) {
        if (j.time > t) break;
        s = j.state;
    }
    return s;
}

}  // namespace mmhp
