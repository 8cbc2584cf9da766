#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmhp/error.hpp"
#include "mmhp/io.hpp"

namespace mmhp::market {

inline constexpr std::int64_t kMicrosPerSecond = 1'000'000;
inline constexpr std::int64_t kMicrosPerDay = 86'400 * kMicrosPerSecond;

// bid: a sell order hitting the bid; ask: a buy order lifting the ask.
enum class Side { bid, ask };

inline Side parse_side(std::string_view s) {
    if (s == "bid") return Side::bid;
    if (s == "ask") return Side::ask;
    throw InvalidInput("side must be 'bid' or 'ask', got '" + std::string(s) + "'");
}

inline const char* side_name(Side s) { return s == Side::bid ? "bid" : "ask"; }

// Aggressor sign: +1 for buys, -1 for sells.
inline int trade_sign(Side s) { return s == Side::ask ? 1 : -1; }

struct TradeRecord {
    std::int64_t timestamp_us{0};
    double price{0.0};
    double size{0.0};
    Side side{Side::bid};
    std::string order_id;
};

inline std::vector<TradeRecord> parse_trade_rows(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "timestamp_us,price,size,side,order_id") {
        throw IoError(source + ": expected header 'timestamp_us,price,size,side,order_id'");
    }
    std::vector<TradeRecord> rows;
    std::vector<std::size_t> bad;
    std::size_t lineno = 1;
    std::int64_t prev = INT64_MIN;
    std::optional<std::size_t> regression;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        const auto f = io::split_fields(line);
        TradeRecord r;
        long long ts;
        bool ok = f.size() == 5 && io::parse_int(f[0], ts) && io::parse_double(f[1], r.price) &&
                  io::parse_double(f[2], r.size) && r.price > 0.0 && r.size > 0.0 && !f[4].empty() &&
                  (f[3] == "bid" || f[3] == "ask");
        if (!ok) {
            bad.push_back(lineno);
            continue;
        }
        r.timestamp_us = ts;
        r.side = parse_side(f[3]);
        r.order_id = std::string(f[4]);
        if (r.timestamp_us < prev && !regression) regression = lineno;
        prev = std::max(prev, r.timestamp_us);
        rows.push_back(std::move(r));
    }
    if (!bad.empty()) {
        std::string list;
        for (std::size_t b : bad) list += (list.empty() ? "" : ",") + std::to_string(b);
        throw IoError(source + ": malformed rows at lines " + list);
    }
    if (regression) throw InvalidInput(source + ": timestamps decrease at line " + std::to_string(*regression));
    if (rows.empty()) throw IoError(source + ": no trades");
    return rows;
}

/// Merges fills sharing an order id: first-fill timestamp, price and side,
/// summed size. Output is ordered by first fill.
inline std::vector<TradeRecord> aggregate_fills(const std::vector<TradeRecord>& fills) {
    std::vector<TradeRecord> out;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& f : fills) {
        auto [it, inserted] = index.try_emplace(f.order_id, out.size());
        if (inserted) {
            out.push_back(f);
        } else {
            out[it->second].size += f.size;
        }
    }
    return out;
}

inline std::vector<TradeRecord> ingest_trades(std::istream& in, const std::string& source = "trades") {
    return aggregate_fills(parse_trade_rows(in, source));
}

inline std::vector<TradeRecord> ingest_trades(const std::string& path) {
    auto in = io::open_in(path);
    return ingest_trades(in, path);
}

inline void write_trades(std::ostream& out, const std::vector<TradeRecord>& trades) {
    out << "timestamp_us,price,size,side,order_id\n";
    for (const auto& t : trades) {
        out << t.timestamp_us << ',' << io::format_double(t.price) << ',' << io::format_double(t.size) << ','
            << side_name(t.side) << ',' << t.order_id << '\n';
    }
}

inline void write_trades(const std::string& path, const std::vector<TradeRecord>& trades) {
    auto out = io::open_out(path);
    write_trades(out, trades);
    if (!out) throw IoError("write failed: " + path);
}

struct Window {
    std::int64_t start_us{0};
    std::int64_t end_us{0};  // exclusive
};

/// Parses "HH:MM-HH:MM" as a UTC clock window on the day containing `day_us`.
inline Window parse_window(std::string_view spec, std::int64_t day_us) {
    auto clock = [&](std::string_view s) -> std::int64_t {
        long long h, m;
        const auto colon = s.find(':');
        if (colon == std::string_view::npos || !io::parse_int(s.substr(0, colon), h) ||
            !io::parse_int(s.substr(colon + 1), m) || h < 0 || h > 24 || m < 0 || m > 59 || (h == 24 && m != 0)) {
            throw InvalidInput("bad window clock time '" + std::string(s) + "'");
        }
        return (h * 3600 + m * 60) * kMicrosPerSecond;
    };
    const auto dash = spec.find('-');
    if (dash == std::string_view::npos) throw InvalidInput("window must look like 05:00-12:00");
    const std::int64_t day = (day_us >= 0 ? day_us : day_us - kMicrosPerDay + 1) / kMicrosPerDay * kMicrosPerDay;
    Window w{day + clock(spec.substr(0, dash)), day + clock(spec.substr(dash + 1))};
    if (!(w.end_us > w.start_us)) throw InvalidInput("window end must follow its start");
    return w;
}

struct DetectionSeries {
    std::vector<double> times;           // seconds from the window start
    std::vector<std::int64_t> source_us;  // original timestamps of the kept trades
    std::vector<std::size_t> trade_index; // index into the aggregated trade list
    Window window;
    Side side{Side::bid};
    std::size_t perturbed{0};  // timestamps shifted by 1 us to break ties
};

/// Same-side trades inside the window whose price equals the previous
/// same-side trade price, rebased to seconds from the window start.
inline DetectionSeries build_detection_series(const std::vector<TradeRecord>& trades, Side side, Window window) {
    DetectionSeries out;
    out.window = window;
    out.side = side;
    std::optional<double> prev_price;
    std::int64_t prev_us = 0;  // relative to window start
    for (std::size_t i = 0; i < trades.size(); ++i) {
        const auto& t = trades[i];
        if (t.side != side || t.timestamp_us < window.start_us || t.timestamp_us >= window.end_us) continue;
        const bool zero_return = prev_price && *prev_price == t.price;
        prev_price = t.price;
        if (!zero_return) continue;
        std::int64_t rel = t.timestamp_us - window.start_us;
        if (rel <= prev_us) {
            rel = prev_us + 1;
            ++out.perturbed;
        }
        prev_us = rel;
        out.times.push_back(static_cast<double>(rel) / static_cast<double>(kMicrosPerSecond));
        out.source_us.push_back(t.timestamp_us);
        out.trade_index.push_back(i);
    }
    return out;
}

inline std::int64_t utc_day(std::int64_t ts_us) {
    return ts_us >= 0 ? ts_us / kMicrosPerDay : (ts_us - kMicrosPerDay + 1) / kMicrosPerDay;
}

// 0 = Monday.
inline int weekday(std::int64_t day) { return static_cast<int>(((day + 3) % 7 + 7) % 7); }

struct MeanCI {
    double mean{0.0};
    double lower{0.0};
    double upper{0.0};
    std::size_t samples{0};
    bool degenerate{false};  // fewer than two samples
};

inline MeanCI mean_ci95(const std::vector<double>& xs) {
    MeanCI r;
    r.samples = xs.size();
    if (xs.empty()) {
        r.degenerate = true;
        return r;
    }
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) {
        r.lower = r.upper = r.mean;
        r.degenerate = true;
        return r;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    const double half = 1.959963984540054 * std::sqrt(ss / static_cast<double>(xs.size() - 1)) /
                        std::sqrt(static_cast<double>(xs.size()));
    r.lower = r.mean - half;
    r.upper = r.mean + half;
    return r;
}

struct SeasonalityBin {
    double start_s;  // seconds after midnight UTC
    MeanCI intensity;
};

struct Seasonality {
    std::vector<SeasonalityBin> bins;
    std::map<int, MeanCI> weekday;  // mean daily intensity (events/s) by weekday
    std::size_t days{0};
};

/// Trading intensity (events per second) in fixed bins of each UTC day,
/// averaged across the days present in the data.
inline Seasonality seasonality_profile(const std::vector<TradeRecord>& trades, double bin_s = 300.0) {
    if (!(bin_s > 0.0) || bin_s > 86400.0) throw InvalidInput("seasonality: bin width out of range");
    const auto bin_us = static_cast<std::int64_t>(std::llround(bin_s * kMicrosPerSecond));
    const std::size_t nbins = static_cast<std::size_t>((kMicrosPerDay + bin_us - 1) / bin_us);
    std::map<std::int64_t, std::vector<double>> counts;
    for (const auto& t : trades) {
        auto& c = counts.try_emplace(utc_day(t.timestamp_us), nbins, 0.0).first->second;
        const std::int64_t offset = t.timestamp_us - utc_day(t.timestamp_us) * kMicrosPerDay;
        c[static_cast<std::size_t>(offset / bin_us)] += 1.0;
    }
    Seasonality s;
    s.days = counts.size();
    for (std::size_t b = 0; b < nbins; ++b) {
        const double width = std::min<double>(static_cast<double>(bin_us), static_cast<double>(kMicrosPerDay - static_cast<std::int64_t>(b) * bin_us)) /
                             kMicrosPerSecond;
        std::vector<double> xs;
        for (const auto& [day, c] : counts) xs.push_back(c[b] / width);
        s.bins.push_back({static_cast<double>(b) * bin_s, mean_ci95(xs)});
    }
    std::map<int, std::vector<double>> by_weekday;
    for (const auto& [day, c] : counts) {
        double total = 0.0;
        for (double v : c) total += v;
        by_weekday[weekday(day)].push_back(total / 86400.0);
    }
    for (const auto& [wd, xs] : by_weekday) s.weekday[wd] = mean_ci95(xs);
    return s;
}

struct LobSnapshot {
    std::int64_t timestamp_us{0};
    double bid_price{0.0};
    double ask_price{0.0};
    double bid_size{0.0};
    double ask_size{0.0};

    double mid() const { return 0.5 * (bid_price + ask_price); }
};

inline std::vector<LobSnapshot> read_lob(std::istream& in, const std::string& source = "lob") {
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "timestamp_us,bid_price,ask_price,bid_size,ask_size") {
        throw IoError(source + ": expected header 'timestamp_us,bid_price,ask_price,bid_size,ask_size'");
    }
    std::vector<LobSnapshot> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        const auto f = io::split_fields(line);
        LobSnapshot s;
        long long ts;
        if (f.size() != 5 || !io::parse_int(f[0], ts) || !io::parse_double(f[1], s.bid_price) ||
            !io::parse_double(f[2], s.ask_price) || !io::parse_double(f[3], s.bid_size) ||
            !io::parse_double(f[4], s.ask_size) || !(s.bid_price < s.ask_price) || s.bid_size < 0.0 ||
            s.ask_size < 0.0) {
            throw IoError(source + ": malformed row at line " + std::to_string(lineno));
        }
        s.timestamp_us = ts;
        if (!out.empty() && ts < out.back().timestamp_us) {
            throw InvalidInput(source + ": timestamps decrease at line " + std::to_string(lineno));
        }
        out.push_back(s);
    }
    return out;
}

inline std::vector<LobSnapshot> read_lob(const std::string& path) {
    auto in = io::open_in(path);
    return read_lob(in, path);
}

inline double liquidity_imbalance(double bid_size, double ask_size) {
    const double total = bid_size + ask_size;
    if (!(total > 0.0)) throw InvalidInput("imbalance undefined for empty queues");
    return (bid_size - ask_size) / total;
}

struct ImbalanceSamples {
    std::map<int, std::vector<double>> by_state;  // destination state (0-based)
    std::size_t dropped{0};
};

/// Imbalance from the last snapshot strictly before each event at which the
/// decoded state changes, grouped by the state entered.
inline ImbalanceSamples imbalance_at_transitions(const std::vector<LobSnapshot>& lob,
                                                 const std::vector<std::int64_t>& event_us,
                                                 const std::vector<int>& states, double staleness_s = 5.0) {
    if (event_us.size() != states.size()) throw InvalidInput("imbalance: events and states differ in length");
    ImbalanceSamples out;
    const auto stale_us = static_cast<std::int64_t>(std::llround(staleness_s * kMicrosPerSecond));
    for (std::size_t n = 1; n < states.size(); ++n) {
        if (states[n] == states[n - 1]) continue;
        auto it = std::lower_bound(lob.begin(), lob.end(), event_us[n],
                                   [](const LobSnapshot& s, std::int64_t t) { return s.timestamp_us < t; });
        if (it == lob.begin()) {
            ++out.dropped;
            continue;
        }
        --it;
        const double total = it->bid_size + it->ask_size;
        if (event_us[n] - it->timestamp_us > stale_us || !(total > 0.0)) {
            ++out.dropped;
            continue;
        }
        out.by_state[states[n]].push_back(liquidity_imbalance(it->bid_size, it->ask_size));
    }
    return out;
}

struct MidSeries {
    std::vector<std::int64_t> time_us;
    std::vector<double> mid;
};

// Mid prices at each change.
inline MidSeries mid_changes(const std::vector<LobSnapshot>& lob) {
    MidSeries m;
    for (const auto& s : lob) {
        const double v = s.mid();
        if (!m.mid.empty() && m.mid.back() == v) continue;
        m.time_us.push_back(s.timestamp_us);
        m.mid.push_back(v);
    }
    return m;
}

struct ResponseCell {
    MeanCI bp;
    bool low_support{false};  // fewer than 5 samples
};

/// R(h, s): mean of sign * (p_{n+h} / p_n - 1) in basis points over events
/// entering state s, with h counted in mid-price moves after the event.
/// Result is indexed [h - 1][s].
inline std::vector<std::vector<ResponseCell>> price_response(const MidSeries& mids,
                                                             const std::vector<std::int64_t>& event_us,
                                                             const std::vector<int>& signs,
                                                             const std::vector<int>& states, int m, int horizon) {
    if (event_us.size() != states.size() || signs.size() != states.size()) {
        throw InvalidInput("price_response: inputs differ in length");
    }
    if (horizon < 1 || m < 1) throw InvalidInput("price_response: horizon and M must be positive");
    std::vector<std::vector<std::vector<double>>> samples(static_cast<std::size_t>(horizon),
                                                          std::vector<std::vector<double>>(static_cast<std::size_t>(m)));
    for (std::size_t n = 1; n < states.size(); ++n) {
        if (states[n] == states[n - 1]) continue;
        auto it = std::lower_bound(mids.time_us.begin(), mids.time_us.end(), event_us[n]);
        if (it == mids.time_us.begin()) continue;
        const auto j = static_cast<std::size_t>(it - mids.time_us.begin()) - 1;
        const double p0 = mids.mid[j];
        for (int h = 1; h <= horizon; ++h) {
            if (j + static_cast<std::size_t>(h) >= mids.mid.size()) break;
            const double ph = mids.mid[j + static_cast<std::size_t>(h)];
            samples[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(states[n])].push_back(
                signs[n] * (ph / p0 - 1.0) * 1e4);
        }
    }
    std::vector<std::vector<ResponseCell>> table(static_cast<std::size_t>(horizon),
                                                 std::vector<ResponseCell>(static_cast<std::size_t>(m)));
    for (std::size_t h = 0; h < table.size(); ++h) {
        for (std::size_t s = 0; s < table[h].size(); ++s) {
            table[h][s].bp = mean_ci95(samples[h][s]);
            table[h][s].low_support = samples[h][s].size() < 5;
        }
    }
    return table;
}

}  // namespace mmhp::market
