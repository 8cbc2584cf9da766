#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "mmhp/error.hpp"
#include "mmhp/model.hpp"
#include "mmhp/simulate.hpp"

namespace mmhp::io {

using json = nlohmann::json;

// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, long long& out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

// ---- events: header `time_s`, one time per line ----

inline std::vector<double> read_event_times(std::istream& in, const std::string& source = "events") {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "time_s") {
        throw IoError(source + ": expected header 'time_s'");
    }
    std::vector<double> times;
    std::size_t lineno = 1;
    std::string bad;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        double t;
        if (!parse_double(line, t)) {
            bad += (bad.empty() ? "" : ",") + std::to_string(lineno);
            continue;
        }
        times.push_back(t);
    }
    if (!bad.empty()) throw IoError(source + ": malformed rows at lines " + bad);
    return times;
}

inline EventSequence read_events(const std::string& path) {
    auto in = open_in(path);
    return EventSequence(read_event_times(in, path));
}

inline void write_events(std::ostream& out, const EventSequence& events) {
    out << "time_s\n";
    for (double t : events.times()) out << format_double(t) << '\n';
}

inline void write_events(const std::string& path, const EventSequence& events) {
    auto out = open_out(path);
    write_events(out, events);
    if (!out) throw IoError("write failed: " + path);
}

// ---- hidden path: `time_s,state`, 1-based states ----

inline void write_hidden_path(const std::string& path, const std::vector<HiddenJump>& hidden) {
    auto out = open_out(path);
    out << "time_s,state\n";
    for (const auto& j : hidden) out << format_double(j.time) << ',' << (j.state + 1) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<HiddenJump> read_hidden_path(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "time_s,state") {
        throw IoError(path + ": expected header 'time_s,state'");
    }
    std::vector<HiddenJump> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split_fields(line);
        double t;
        long long s;
        if (f.size() != 2 || !parse_double(f[0], t) || !parse_int(f[1], s) || s < 1) {
            throw IoError(path + ": malformed row at line " + std::to_string(lineno));
        }
        out.push_back({t, static_cast<int>(s - 1)});
    }
    return out;
}

// ---- decoded states: `time_s,state`, 1-based ----

inline void write_states(const std::string& path, const EventSequence& events, const std::vector<int>& states) {
    if (states.size() != events.size()) throw InvalidInput("write_states: size mismatch");
    auto out = open_out(path);
    out << "time_s,state\n";
    for (std::size_t n = 0; n < states.size(); ++n) {
        out << format_double(events.times()[n]) << ',' << (states[n] + 1) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<int> read_states(const std::string& path) {
    std::vector<int> states;
    for (const auto& j : read_hidden_path(path)) states.push_back(j.state);
    return states;
}

// ---- model JSON ----

struct ModelFile {
    ModelParams params;
    json meta = json::object();
};

inline json model_to_json(const ModelParams& p, const json& meta = json::object()) {
    const Eigen::Index m = p.mu.size();
    json j;
    j["M"] = m;
    auto vec = [](const Vector& v) {
        std::vector<double> out(v.data(), v.data() + v.size());
        return out;
    };
    j["mu"] = vec(p.mu);
    j["alpha"] = vec(p.alpha);
    j["beta"] = vec(p.beta);
    json q = json::array();
    for (Eigen::Index i = 0; i < m; ++i) {
        std::vector<double> row(static_cast<std::size_t>(m));
        for (Eigen::Index k = 0; k < m; ++k) row[static_cast<std::size_t>(k)] = p.q(i, k);
        q.push_back(row);
    }
    j["Q"] = q;
    j["xi0"] = vec(p.xi0);
    j["delta"] = p.delta;
    j["meta"] = meta.is_null() ? json::object() : meta;
    return j;
}

inline ModelFile model_from_json(const json& j) {
    ModelFile mf;
    try {
        const int m = j.at("M").get<int>();
        if (m < 1 || m > kMaxStates) throw InvalidInput("model: M out of range");
        auto vec = [&](const char* key) {
            const auto v = j.at(key).get<std::vector<double>>();
            if (v.size() != static_cast<std::size_t>(m)) throw InvalidInput(std::string("model: wrong length of ") + key);
            return Vector(Eigen::Map<const Eigen::VectorXd>(v.data(), m));
        };
        mf.params.mu = vec("mu");
        mf.params.alpha = vec("alpha");
        mf.params.beta = vec("beta");
        mf.params.xi0 = vec("xi0");
        const auto q = j.at("Q").get<std::vector<std::vector<double>>>();
        if (q.size() != static_cast<std::size_t>(m)) throw InvalidInput("model: Q has the wrong shape");
        mf.params.q.resize(m, m);
        for (int r = 0; r < m; ++r) {
            if (q[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(m)) {
                throw InvalidInput("model: Q has the wrong shape");
            }
            for (int c = 0; c < m; ++c) mf.params.q(r, c) = q[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        mf.params.delta = j.at("delta").get<double>();
        if (j.contains("meta")) mf.meta = j.at("meta");
    } catch (const json::exception& e) {
        throw IoError(std::string("model: ") + e.what());
    }
    mf.params.validate();
    return mf;
}

inline ModelFile load_model(const std::string& path) {
    auto in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return model_from_json(j);
}

inline void save_model(const std::string& path, const ModelParams& p, const json& meta = json::object()) {
    auto out = open_out(path);
    out << model_to_json(p, meta).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline json read_json(const std::string& path) {
    auto in = open_in(path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

inline void write_json(const std::string& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace mmhp::io
