#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmhp/error.hpp"
#include "mmhp/inference.hpp"
#include "mmhp/model.hpp"
#include "mmhp/transition.hpp"

namespace mmhp {

struct QQPoint {
    double theoretical;
    double empirical;
};

struct ResidualReport {
    std::vector<double> tau;
    double ks_statistic{0.0};
    double ks_pvalue{1.0};
    std::vector<QQPoint> qq_points;
};

/// Kolmogorov-Smirnov distance between the empirical CDF of `sample` and an
/// absolutely continuous CDF.
template <class Cdf>
double ks_statistic(std::span<const double> sample, Cdf&& cdf) {
    if (sample.empty()) throw InvalidInput("ks_statistic: empty sample");
    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t r = 0; r < x.size(); ++r) {
        const double f = cdf(x[r]);
        d = std::max({d, static_cast<double>(r + 1) / n - f, f - static_cast<double>(r) / n});
    }
    return d;
}

inline double ks_statistic_exp1(std::span<const double> sample) {
    return ks_statistic(sample, [](double x) { return x > 0.0 ? -std::expm1(-x) : 0.0; });
}

/// Survival function of the Kolmogorov distribution, P(K > lambda),
/// truncated at 100 terms.
inline double kolmogorov_survival(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    constexpr int kTerms = 100;
    const double pi = std::numbers::pi;
    if (lambda < 1.18) {
        // Theta-function form, accurate where the alternating series converges slowly.
        double cdf = 0.0;
        for (int j = 1; j <= kTerms; ++j) {
            const double odd = 2.0 * j - 1.0;
            cdf += std::exp(-odd * odd * pi * pi / (8.0 * lambda * lambda));
        }
        cdf *= std::sqrt(2.0 * pi) / lambda;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double q = 0.0;
    for (int j = 1; j <= kTerms; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        q += (j % 2 == 1) ? term : -term;
    }
    return std::clamp(2.0 * q, 0.0, 1.0);
}

/// Asymptotic one-sample p-value with the sqrt(n) scaling.
inline double ks_pvalue(double statistic, std::size_t n) {
    return kolmogorov_survival(std::sqrt(static_cast<double>(n)) * statistic);
}

/// Two-sample statistic and asymptotic p-value.
inline std::pair<double, double> ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InvalidInput("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    const double ne = nx * ny / (nx + ny);
    return {d, kolmogorov_survival(std::sqrt(ne) * d)};
}

/// QQ pairs against Exp(1) with plotting positions (r - 0.5) / K.
inline std::vector<QQPoint> qq_points(std::span<const double> tau) {
    if (tau.empty()) throw InvalidInput("qq_points: empty residuals");
    std::vector<double> x(tau.begin(), tau.end());
    std::sort(x.begin(), x.end());
    const double k = static_cast<double>(x.size());
    std::vector<QQPoint> out(x.size());
    for (std::size_t r = 0; r < x.size(); ++r) {
        const double pos = (static_cast<double>(r) + 0.5) / k;
        out[r] = {-std::log1p(-pos), x[r]};
    }
    return out;
}

inline ResidualReport residual_report(std::vector<double> tau) {
    ResidualReport rep;
    rep.ks_statistic = ks_statistic_exp1(tau);
    rep.ks_pvalue = ks_pvalue(rep.ks_statistic, tau.size());
    rep.qq_points = qq_points(tau);
    rep.tau = std::move(tau);
    return rep;
}

/// Compensator increments of the smoothed intensity over each inter-event
/// interval, with the KS test against Exp(1).
inline ResidualReport residuals(const ModelParams& params, const EventSequence& events) {
    if (events.size() < 2) throw InvalidInput("residuals: at least two events are required");
    const TransitionBundles bundles(params, events);
    const InferenceState st = run_estep(bundles);
    std::vector<double> tau(st.tau.data(), st.tau.data() + st.tau.size());
    return residual_report(std::move(tau));
}

inline void qq_export(const ResidualReport& report, const std::string& path) {
    if (report.qq_points.empty()) throw InvalidInput("qq_export: empty report");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.precision(17);
    out << "# Q-Q plot of compensator residuals against Exp(1)\n";
    out << "# n=" << report.qq_points.size() << " ks_statistic=" << report.ks_statistic
        << " ks_pvalue=" << report.ks_pvalue << "\n";
    out << "theoretical,empirical\n";
    for (const auto& pt : report.qq_points) out << pt.theoretical << ',' << pt.empirical << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace mmhp
