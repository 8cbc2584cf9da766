// Command-line front end: simulate, fit, decode, stream, gof, select, analyze.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmhp/mmhp.hpp"

namespace {

using mmhp::io::json;

mmhp::FitConfig load_fit_config(const std::string& path) {
    mmhp::FitConfig c;
    if (path.empty()) return c;
    const json j = mmhp::io::read_json(path);
    try {
        if (j.contains("max_steps")) c.max_steps = j.at("max_steps").get<int>();
        if (j.contains("tolerance")) c.tolerance = j.at("tolerance").get<double>();
        if (j.contains("max_inner_iterations")) c.max_inner_iterations = j.at("max_inner_iterations").get<int>();
        if (j.contains("parameter_tolerance")) c.parameter_tolerance = j.at("parameter_tolerance").get<double>();
        if (j.contains("restarts")) c.restarts = j.at("restarts").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("fix_alpha_zero")) c.fix_alpha_zero = j.at("fix_alpha_zero").get<bool>();
        if (j.contains("fixed_beta")) c.fixed_beta = j.at("fixed_beta").get<std::vector<double>>();
        if (j.contains("initial")) c.initial = mmhp::io::model_from_json(j.at("initial")).params;
    } catch (const json::exception& e) {
        throw mmhp::IoError(path + ": " + e.what());
    }
    return c;
}

json fit_meta(const mmhp::FitResult& r, bool mmpp) {
    std::vector<int> order;
    for (int i : r.label_order) order.push_back(i + 1);
    return json{{"model", mmpp ? "MMPP" : "MMHP"},
                {"fitted_loglik", r.loglik},
                {"aic", r.aic},
                {"bic", r.bic},
                {"label_order", order},
                {"free_parameters", r.free_parameters},
                {"em_steps", r.steps},
                {"converged", r.converged},
                {"restart", r.restart}};
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v;
        if (!mmhp::io::parse_double(item, v)) throw mmhp::InvalidInput("bad list entry '" + item + "'");
        out.push_back(static_cast<T>(v));
    }
    if (out.empty()) throw mmhp::InvalidInput("empty list");
    return out;
}

json mean_ci_json(const mmhp::market::MeanCI& c) {
    return json{{"mean", c.mean}, {"ci95", {c.lower, c.upper}}, {"samples", c.samples}, {"degenerate", c.degenerate}};
}

std::string format_eta_line(double t, int state, const Eigen::VectorXd& eta) {
    std::string line = mmhp::io::format_double(t) + "," + std::to_string(state + 1);
    for (Eigen::Index i = 0; i < eta.size(); ++i) line += "," + mmhp::io::format_double(eta[i]);
    return line;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markov-modulated Hawkes process toolkit"};
    app.require_subcommand(1);

    // simulate
    std::string model_path, out_path, events_path, hidden_path, config_path, qq_path;
    std::optional<std::size_t> n_events;
    std::optional<double> horizon;
    std::uint64_t seed = 0;
    bool continuous = false;
    auto* sim = app.add_subcommand("simulate", "Simulate events from a model");
    sim->add_option("--model", model_path, "model JSON")->required();
    auto* opt_events = sim->add_option("--events", n_events, "number of events");
    auto* opt_horizon = sim->add_option("--horizon", horizon, "time horizon in seconds");
    opt_events->excludes(opt_horizon);
    sim->add_option("--seed", seed, "random seed");
    sim->add_option("--out", out_path, "event CSV")->required();
    sim->add_option("--hidden", hidden_path, "hidden-path CSV");
    sim->add_flag("--continuous", continuous, "continuous exponential decay instead of the delta-grid");

    // fit
    int states = 2;
    double delta = 1.0;
    bool mmpp = false;
    auto* fitc = app.add_subcommand("fit", "Fit a model by EM");
    fitc->add_option("--events", events_path)->required();
    fitc->add_option("--M", states)->required();
    fitc->add_option("--delta", delta);
    fitc->add_option("--config", config_path, "EM settings JSON");
    fitc->add_option("--out", out_path)->required();
    fitc->add_flag("--mmpp", mmpp, "Markov-modulated Poisson (alpha = 0)");

    // decode
    auto* dec = app.add_subcommand("decode", "Viterbi state sequence at event times");
    dec->add_option("--model", model_path)->required();
    dec->add_option("--events", events_path)->required();
    dec->add_option("--out", out_path)->required();

    // stream
    std::optional<double> tick;
    auto* stream = app.add_subcommand("stream", "Online decoding of an event feed on stdin");
    stream->add_option("--model", model_path)->required();
    stream->add_option("--tick", tick, "emit a state line every tick seconds between events");

    // gof
    auto* gof = app.add_subcommand("gof", "Residual goodness-of-fit");
    gof->add_option("--model", model_path)->required();
    gof->add_option("--events", events_path)->required();
    gof->add_option("--out", out_path)->required();
    gof->add_option("--qq", qq_path);

    // select
    std::string m_grid = "2,3,4", d_grid = "1,10,100";
    auto* sel = app.add_subcommand("select", "Fit a grid of models and rank them by AIC");
    sel->add_option("--events", events_path)->required();
    sel->add_option("--M-grid", m_grid);
    sel->add_option("--delta-grid", d_grid);
    sel->add_flag("--mmpp", mmpp, "add one MMPP per M");
    sel->add_option("--config", config_path);
    sel->add_option("--out", out_path)->required();

    // analyze
    std::string trades_path, side_name = "bid", window_spec = "05:00-12:00", lob_path;
    double bin_s = 300.0;
    int response_horizon = 10;
    double staleness = 5.0;
    auto* ana = app.add_subcommand("analyze", "Detection series, decoding and state analytics from trades");
    ana->add_option("--trades", trades_path)->required();
    ana->add_option("--side", side_name)->check(CLI::IsMember({"bid", "ask"}));
    ana->add_option("--window", window_spec);
    ana->add_option("--lob", lob_path);
    ana->add_option("--model", model_path)->required();
    ana->add_option("--out", out_path)->required();
    ana->add_option("--bin", bin_s, "seasonality bin in seconds");
    ana->add_option("--response-horizon", response_horizon);
    ana->add_option("--staleness", staleness, "maximum snapshot age in seconds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            if (!n_events && !horizon) throw mmhp::InvalidInput("simulate: give --events or --horizon");
            const auto mf = mmhp::io::load_model(model_path);
            const mmhp::StopRule stop = n_events ? mmhp::StopRule::after_events(*n_events)
                                                 : mmhp::StopRule::at_horizon(*horizon);
            const auto res = continuous ? mmhp::simulate_mmhp_continuous(mf.params, stop, seed)
                                        : mmhp::simulate_mmhp_delta(mf.params, stop, seed);
            mmhp::io::write_events(out_path, res.events);
            if (!hidden_path.empty()) mmhp::io::write_hidden_path(hidden_path, res.hidden_path);
            std::cout << "events " << res.events.size() << " horizon " << res.events.horizon() << " seed " << seed
                      << '\n';
        } else if (fitc->parsed()) {
            const auto events = mmhp::io::read_events(events_path);
            mmhp::FitConfig cfg = load_fit_config(config_path);
            cfg.delta = delta;
            cfg.mmpp = mmpp;
            const auto res = mmhp::fit(events, states, cfg);
            mmhp::io::save_model(out_path, res.params, fit_meta(res, mmpp));
            std::cout.precision(10);
            std::cout << "loglik " << res.loglik << " aic " << res.aic << " bic " << res.bic << " steps "
                      << res.steps << '\n';
            for (int i = 0; i < states; ++i) {
                std::cout << "state " << i + 1 << " mu " << res.params.mu[i] << " alpha " << res.params.alpha[i]
                          << " beta " << res.params.beta[i] << " exit_rate " << -res.params.q(i, i) << '\n';
            }
        } else if (dec->parsed()) {
            const auto mf = mmhp::io::load_model(model_path);
            const auto events = mmhp::io::read_events(events_path);
            const auto trace = mmhp::viterbi(mmhp::TransitionBundles(mf.params, events));
            mmhp::io::write_states(out_path, events, trace.states);
            std::cout << "decoded " << trace.states.size() << " events, log score " << trace.log_score << '\n';
        } else if (stream->parsed()) {
            if (tick && !(*tick > 0.0)) throw mmhp::InvalidInput("--tick must be positive");
            const auto mf = mmhp::io::load_model(model_path);
            mmhp::OnlineDecoder decoder(mf.params, mmhp::EventSequence(std::vector<double>{}));
            std::cout << "time_s,state";
            for (int i = 1; i <= mf.params.num_states(); ++i) std::cout << ",log_eta_" << i;
            std::cout << '\n';
            std::string line;
            std::size_t lineno = 0;
            double next_tick = tick.value_or(0.0);
            while (std::getline(std::cin, line)) {
                ++lineno;
                const auto field = mmhp::io::trim(line);
                if (field.empty() || (lineno == 1 && field == "time_s")) continue;
                double t;
                if (!mmhp::io::parse_double(field, t)) {
                    throw mmhp::InvalidInput("stream: malformed time at line " + std::to_string(lineno));
                }
                if (!(t > decoder.time())) {
                    throw mmhp::InvalidInput("stream: event times must increase (line " + std::to_string(lineno) + ")");
                }
                if (tick) {
                    while (next_tick < t) {
                        const auto u = decoder.advance(next_tick);
                        std::cout << format_eta_line(u.time, u.state, u.log_eta) << '\n';
                        next_tick += *tick;
                    }
                }
                const auto u = decoder.event(t);
                std::cout << format_eta_line(u.time, u.state, u.log_eta) << '\n';
                std::cout.flush();
            }
        } else if (gof->parsed()) {
            const auto mf = mmhp::io::load_model(model_path);
            const auto events = mmhp::io::read_events(events_path);
            const auto rep = mmhp::residuals(mf.params, events);
            mmhp::io::write_json(out_path, json{{"events", events.size()},
                                                {"ks_statistic", rep.ks_statistic},
                                                {"ks_pvalue", rep.ks_pvalue},
                                                {"tau", rep.tau}});
            if (!qq_path.empty()) mmhp::qq_export(rep, qq_path);
            std::cout << "ks_statistic " << rep.ks_statistic << " ks_pvalue " << rep.ks_pvalue << '\n';
        } else if (sel->parsed()) {
            const auto events = mmhp::io::read_events(events_path);
            const mmhp::FitConfig cfg = load_fit_config(config_path);
            const auto rows = mmhp::select_models(events, parse_list<int>(m_grid), parse_list<double>(d_grid), mmpp, cfg);
            auto out = mmhp::io::open_out(out_path);
            out << "rank,model,M,delta,loglik,free_parameters,aic,bic\n";
            for (const auto& r : rows) {
                out << r.rank << ',' << r.model << ',' << r.states << ','
                    << (r.model == "MMPP" ? std::string() : mmhp::io::format_double(r.delta)) << ','
                    << mmhp::io::format_double(r.loglik) << ',' << r.free_parameters << ','
                    << mmhp::io::format_double(r.aic) << ',' << mmhp::io::format_double(r.bic) << '\n';
            }
            if (!out) throw mmhp::IoError("write failed: " + out_path);
            std::cout << "ranked " << rows.size() << " models\n";
        } else if (ana->parsed()) {
            namespace mk = mmhp::market;
            const auto mf = mmhp::io::load_model(model_path);
            const auto trades = mk::ingest_trades(trades_path);
            const mk::Side side = mk::parse_side(side_name);
            const mk::Window window = mk::parse_window(window_spec, trades.front().timestamp_us);
            const auto series = mk::build_detection_series(trades, side, window);
            const int m = mf.params.num_states();

            json report;
            report["side"] = side_name;
            report["window"] = {{"start_us", window.start_us}, {"end_us", window.end_us}};
            report["events"] = series.times.size();
            report["perturbed_timestamps"] = series.perturbed;
            const auto season = mk::seasonality_profile(trades, bin_s);
            json bins = json::array();
            for (const auto& b : season.bins) {
                json e = mean_ci_json(b.intensity);
                e["start_s"] = b.start_s;
                bins.push_back(e);
            }
            json weekdays = json::object();
            for (const auto& [wd, c] : season.weekday) weekdays[std::to_string(wd)] = mean_ci_json(c);
            report["seasonality"] = {{"bin_s", bin_s}, {"days", season.days}, {"bins", bins}, {"weekday", weekdays}};

            if (series.times.empty()) {
                std::cerr << "warning: empty detection series\n";
            } else {
                const mmhp::EventSequence events(series.times);
                const auto trace = mmhp::viterbi(mmhp::TransitionBundles(mf.params, events));
                std::vector<double> count(static_cast<std::size_t>(m), 0.0), volume(static_cast<std::size_t>(m), 0.0);
                double total_volume = 0.0;
                for (std::size_t n = 0; n < trace.states.size(); ++n) {
                    const auto s = static_cast<std::size_t>(trace.states[n]);
                    count[s] += 1.0;
                    volume[s] += trades[series.trade_index[n]].size;
                    total_volume += trades[series.trade_index[n]].size;
                }
                json per_state = json::array();
                for (int s = 0; s < m; ++s) {
                    per_state.push_back({{"state", s + 1},
                                         {"event_share", count[static_cast<std::size_t>(s)] / static_cast<double>(trace.states.size())},
                                         {"volume_share", volume[static_cast<std::size_t>(s)] / total_volume}});
                }
                report["states"] = per_state;

                if (!lob_path.empty()) {
                    const auto lob = mk::read_lob(lob_path);
                    const auto imb = mk::imbalance_at_transitions(lob, series.source_us, trace.states, staleness);
                    json groups = json::object();
                    for (const auto& [s, xs] : imb.by_state) {
                        json g = mean_ci_json(mk::mean_ci95(xs));
                        g["values"] = xs;
                        groups[std::to_string(s + 1)] = g;
                    }
                    report["imbalance"] = {{"by_state", groups}, {"dropped", imb.dropped}};

                    const std::vector<int> signs(series.times.size(), mk::trade_sign(side));
                    const auto table = mk::price_response(mk::mid_changes(lob), series.source_us, signs, trace.states, m,
                                                          response_horizon);
                    json resp = json::array();
                    for (std::size_t h = 0; h < table.size(); ++h) {
                        for (std::size_t s = 0; s < table[h].size(); ++s) {
                            json c = mean_ci_json(table[h][s].bp);
                            c["h"] = h + 1;
                            c["state"] = s + 1;
                            c["low_support"] = table[h][s].low_support;
                            resp.push_back(c);
                        }
                    }
                    report["price_response_bp"] = resp;
                }
            }
            mmhp::io::write_json(out_path, report);
            std::cout << "detection events " << series.times.size() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
