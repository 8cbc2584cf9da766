#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mmhp/error.hpp"
#include "mmhp/matexp.hpp"
#include "mmhp/model.hpp"
#include "mmhp/transition.hpp"

namespace mmhp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_or_neg_inf(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// Index of the largest entry; the lowest index wins ties.
template <class V>
int argmax_lowest(const V& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

struct ViterbiTrace {
    Eigen::MatrixXd log_eta;  // K x M, row n-1 holds log eta_n
    Eigen::MatrixXi psi;      // K x M, psi(n-1, j): best state at t_{n-1} (row 0 refers to S_0)
    std::vector<int> states;  // 0-based s*_1..s*_K
    int initial_state{0};     // s*_0
    double log_score{kNegInf};
};

/// Log-domain Viterbi decoding of the hidden state at each event time:
/// argmax over (s_0..s_K) of xi0(s_0) prod_n H_{s_{n-1} s_n}(x_n) lambda_{s_n}(t_n^-).
inline ViterbiTrace viterbi(const TransitionBundles& bundles) {
    const ModelParams& p = bundles.params();
    const int m = p.num_states();
    const auto k_events = static_cast<Eigen::Index>(bundles.size());
    if (k_events < 1) throw InvalidInput("viterbi: at least one event is required");

    ViterbiTrace tr;
    tr.log_eta.resize(k_events, m);
    tr.psi.resize(k_events, m);
    std::vector<double> eta(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) eta[static_cast<std::size_t>(i)] = log_or_neg_inf(p.xi0[i]);

    for (Eigen::Index n = 1; n <= k_events; ++n) {
        const auto& iv = bundles.interval(static_cast<std::size_t>(n));
        const Vector lam = bundles.event_intensity(static_cast<std::size_t>(n));
        bool any_finite = false;
        std::vector<double> next(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            double best = kNegInf;
            int arg = 0;
            for (int i = 0; i < m; ++i) {
                const double cand = eta[static_cast<std::size_t>(i)] + log_or_neg_inf(iv.forward(i, j));
                if (cand > best) {
                    best = cand;
                    arg = i;
                }
            }
            next[static_cast<std::size_t>(j)] = best + safe_log(lam[j]);
            tr.psi(n - 1, j) = arg;
            tr.log_eta(n - 1, j) = next[static_cast<std::size_t>(j)];
            any_finite = any_finite || std::isfinite(best);
        }
        if (!any_finite) throw DecodeError("viterbi: every path has zero probability", static_cast<long>(n));
        eta.swap(next);
    }

    tr.states.resize(static_cast<std::size_t>(k_events));
    int s = argmax_lowest(eta);
    tr.log_score = eta[static_cast<std::size_t>(s)];
    for (Eigen::Index n = k_events; n >= 1; --n) {
        tr.states[static_cast<std::size_t>(n - 1)] = s;
        s = tr.psi(n - 1, s);
    }
    tr.initial_state = s;
    return tr;
}

/// Streaming Viterbi decoder.
///
/// Keeps log eta at the last event (the anchor) and the transition matrix
/// accumulated since then, so that repeated inter-event updates compose as
/// matrix products and an event update uses exactly H(t_event - t_K).
class OnlineDecoder {
public:
    struct Update {
        double time{0.0};
        int state{0};
        Eigen::VectorXd log_eta;  // max-normalized
    };

    OnlineDecoder(const ModelParams& params, const EventSequence& history) : p_(params) {
        p_.validate();
        const int m = p_.num_states();
        acc_ = Vector::Zero(m);
        transition_ = Matrix::Identity(m, m);
        anchor_eta_.resize(m);
        if (history.empty()) {
            for (int i = 0; i < m; ++i) anchor_eta_[i] = log_or_neg_inf(p_.xi0[i]);
            anchor_time_ = 0.0;
        } else {
            const TransitionBundles bundles(p_, history);
            const ViterbiTrace tr = viterbi(bundles);
            anchor_eta_ = tr.log_eta.row(tr.log_eta.rows() - 1).transpose();
            anchor_time_ = history.last();
            const IntensityGrid& grid = bundles.intensity();
            for (int i = 0; i < m; ++i) acc_[i] = grid.accumulator(history.size() + 1, i);
        }
        normalize(anchor_eta_);
        time_ = anchor_time_;
        count_ = history.size();
        current_ = anchor_eta_;
        state_ = argmax_lowest(current_);
    }

    /// Moves the clock to `now` without an event.
    Update advance(double now) {
        accumulate(now);
        current_ = combine(false);
        state_ = argmax_lowest(current_);
        return snapshot();
    }

    /// Registers an event at `t_event`.
    Update event(double t_event) {
        accumulate(t_event);
        Eigen::VectorXd eta = combine(true);
        const double x = t_event - anchor_time_;
        for (int i = 0; i < p_.num_states(); ++i) acc_[i] = 1.0 + std::exp(-p_.beta[i] * x) * acc_[i];
        if (!eta.array().isFinite().any()) {
            throw DecodeError("online decoder: every path has zero probability", static_cast<long>(count_ + 1));
        }
        normalize(eta);
        anchor_eta_ = eta;
        anchor_time_ = t_event;
        time_ = t_event;
        transition_ = Matrix::Identity(p_.num_states(), p_.num_states());
        log_scale_ = 0.0;
        ++count_;
        current_ = anchor_eta_;
        state_ = argmax_lowest(current_);
        return snapshot();
    }

    int state() const { return state_; }
    double time() const { return time_; }
    double anchor_time() const { return anchor_time_; }
    std::size_t event_count() const { return count_; }
    const Eigen::VectorXd& log_eta() const { return current_; }
    const ModelParams& params() const { return p_; }

    /// Grid intensity of the open interval at step k.
    Vector intensity(long k) const {
        Vector lam(p_.num_states());
        for (int i = 0; i < p_.num_states(); ++i) {
            lam[i] = p_.mu[i] + p_.alpha[i] * acc_[i] * std::exp(-p_.beta[i] * static_cast<double>(k) * p_.delta);
        }
        return lam;
    }

private:
    static void normalize(Eigen::VectorXd& v) {
        const double mx = v.maxCoeff();
        if (std::isfinite(mx)) v.array() -= mx;
    }

    void accumulate(double now) {
        if (!(now >= time_)) throw InvalidInput("online decoder: time regression");
        const double a = time_ - anchor_time_;
        const double b = now - anchor_time_;
        const Matrix r = piecewise_product(p_.num_states(), a, b, p_.delta, -1, [&](long k, double lo, double hi) {
            const double start = static_cast<double>(k) * p_.delta;
            const double end = static_cast<double>(k + 1) * p_.delta;
            const double len = (lo == start && hi == end) ? p_.delta : hi - lo;
            return expm(generator_minus_intensity(p_.q, intensity(k)), len);
        });
        transition_ = transition_ * r;
        const double scale = transition_.maxCoeff();
        if (scale > 0.0 && scale < 1e-100) {
            transition_ /= scale;
            log_scale_ += std::log(scale);
        }
        time_ = now;
    }

    // max_i anchor_i + log T_ij (+ log lambda_j at the current time for events).
    Eigen::VectorXd combine(bool with_event) const {
        const int m = p_.num_states();
        Eigen::VectorXd out(m);
        Vector lam;
        if (with_event) {
            const GridSplit split = split_duration(time_ - anchor_time_, p_.delta);
            lam = intensity(split.steps);
        }
        for (int j = 0; j < m; ++j) {
            double best = kNegInf;
            for (int i = 0; i < m; ++i) {
                best = std::max(best, anchor_eta_[i] + log_or_neg_inf(transition_(i, j)));
            }
            out[j] = best + log_scale_ + (with_event ? safe_log(lam[j]) : 0.0);
        }
        if (!with_event) normalize(out);
        return out;
    }

    Update snapshot() const { return {time_, state_, current_}; }

    ModelParams p_;
    Eigen::VectorXd anchor_eta_;
    Eigen::VectorXd current_;
    double anchor_time_{0.0};
    double time_{0.0};
    Matrix transition_;
    double log_scale_{0.0};
    Vector acc_;
    std::size_t count_{0};
    int state_{0};
};

}  // namespace mmhp
