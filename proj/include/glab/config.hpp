#pragma once

#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "experiments.hpp"
#include "json.hpp"

namespace glab {

// Command-line values that replace entries of the configuration file.
struct Overrides {
    std::optional<double> p;
    std::optional<std::vector<double>> eps;
    std::optional<std::array<double, 3>> grid;  // lx, ly, delta
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    bool cross_check = false;
};

namespace detail {

inline void only_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* a : keys) known = known || k == a;
        if (!known) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& dst, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
    }
}

inline WellSpec parse_well(const nlohmann::json& j, const std::string& where) {
    only_keys(j, {"low", "high", "amplitude", "form"}, where);
    WellSpec w;
    read(j, "low", w.low, where);
    read(j, "high", w.high, where);
    read(j, "amplitude", w.amplitude, where);
    read(j, "form", w.form, where);
    return w;
}

inline Point parse_point(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(where + " must be a pair of numbers");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline bool parse_label(const nlohmann::json& j, const std::string& where) {
    if (j == "alpha") return false;
    if (j == "beta") return true;
    throw ConfigError(where + " must be \"alpha\" or \"beta\"");
}

}  // namespace detail

inline SweepConfig parse_config(const nlohmann::json& j, const Overrides& o = {}) {
    using detail::read;
    SweepConfig c;
    detail::only_keys(j, {"p", "cross_check", "W", "V", "m", "grid", "eps", "minimizer", "out", "seed", "pair",
                          "partition", "gamma", "gamma_p", "sigma_p_list", "suite", "timestamps", "workers"},
                      "config");
    read(j, "p", c.p, "config");
    read(j, "cross_check", c.cross_check, "config");
    if (j.contains("W")) c.W = detail::parse_well(j["W"], "W");
    if (j.contains("V")) c.V = detail::parse_well(j["V"], "V");
    read(j, "m", c.m, "config");
    if (j.contains("grid")) {
        detail::only_keys(j["grid"], {"lx", "ly", "delta"}, "grid");
        read(j["grid"], "lx", c.lx, "grid");
        read(j["grid"], "ly", c.ly, "grid");
        read(j["grid"], "delta", c.delta, "grid");
    }
    if (j.contains("eps")) {
        const auto& e = j["eps"];
        if (e.is_object()) {
            detail::only_keys(e, {"max", "min", "count"}, "eps");
            double hi = 0.5, lo = 0.02;
            int n = 8;
            read(e, "max", hi, "eps");
            read(e, "min", lo, "eps");
            read(e, "count", n, "eps");
            c.eps = geometric_eps(hi, lo, n);
        } else {
            read(j, "eps", c.eps, "config");
        }
    }
    if (j.contains("minimizer")) {
        const auto& m = j["minimizer"];
        detail::only_keys(m, {"max_iter", "gtol", "ftol", "stall", "memory", "restarts"}, "minimizer");
        read(m, "max_iter", c.minimizer.max_iter, "minimizer");
        read(m, "gtol", c.minimizer.gtol, "minimizer");
        read(m, "ftol", c.minimizer.ftol, "minimizer");
        read(m, "stall", c.minimizer.stall, "minimizer");
        read(m, "memory", c.minimizer.memory, "minimizer");
        read(m, "restarts", c.minimizer.restarts, "minimizer");
    }
    read(j, "out", c.out, "config");
    read(j, "seed", c.seed, "config");
    if (j.contains("pair")) {
        const auto& p = j["pair"];
        detail::only_keys(p, {"interface", "ref", "ref_label", "boundary", "boundary_segments"}, "pair");
        if (p.contains("interface")) {
            if (!p["interface"].is_array()) throw ConfigError("pair.interface must be a list of points");
            c.pair.default_interface = false;
            for (const auto& q : p["interface"]) c.pair.interface.push_back(detail::parse_point(q, "interface vertex"));
        }
        if (p.contains("ref")) c.pair.ref = detail::parse_point(p["ref"], "pair.ref");
        if (p.contains("ref_label")) c.pair.ref_is_beta = detail::parse_label(p["ref_label"], "pair.ref_label");
        if (p.contains("boundary")) {
            const auto& b = p["boundary"];
            if (b == "optimal") {
                c.pair.optimal_v = true;
            } else {
                detail::only_keys(b, {"start_label", "jumps"}, "pair.boundary");
                c.pair.optimal_v = false;
                if (b.contains("start_label"))
                    c.pair.v_beta_at_start = detail::parse_label(b["start_label"], "pair.boundary.start_label");
                read(b, "jumps", c.pair.v_jumps, "pair.boundary");
            }
        }
        read(p, "boundary_segments", c.pair.boundary_segments, "pair");
    }
    if (j.contains("partition")) {
        const auto& p = j["partition"];
        detail::only_keys(p, {"r", "cutoff_b", "lambda_factor"}, "partition");
        read(p, "r", c.partition.r, "partition");
        read(p, "cutoff_b", c.partition.cutoff_b, "partition");
        read(p, "lambda_factor", c.partition.lambda_factor, "partition");
    }
    if (j.contains("gamma")) {
        const auto& g = j["gamma"];
        detail::only_keys(g, {"R", "H", "deltas", "polar_start", "step_start", "random_starts", "per_start_ladders",
                              "tail_R", "tail_delta", "tail_fit", "tail_max_iter", "reference"},
                          "gamma");
        read(g, "R", c.gamma.R, "gamma");
        read(g, "H", c.gamma.H, "gamma");
        read(g, "deltas", c.gamma.deltas, "gamma");
        read(g, "polar_start", c.gamma.polar_start, "gamma");
        read(g, "step_start", c.gamma.step_start, "gamma");
        read(g, "random_starts", c.gamma.random_starts, "gamma");
        read(g, "per_start_ladders", c.gamma.per_start_ladders, "gamma");
        read(g, "tail_R", c.gamma.tail_R, "gamma");
        read(g, "tail_delta", c.gamma.tail_delta, "gamma");
        read(g, "tail_fit", c.gamma.tail_fit, "gamma");
        read(g, "tail_max_iter", c.gamma.tail_max_iter, "gamma");
        read(g, "reference", c.gamma.reference, "gamma");
    }
    read(j, "gamma_p", c.gamma_p, "config");
    read(j, "sigma_p_list", c.sigma_p_list, "config");
    if (j.contains("suite")) {
        const auto& s = j["suite"];
        detail::only_keys(s, {"sizes", "trials", "slice_cells", "slice_trials", "scaling_trials"}, "suite");
        read(s, "sizes", c.suite.sizes, "suite");
        read(s, "trials", c.suite.trials, "suite");
        read(s, "slice_cells", c.suite.slice_cells, "suite");
        read(s, "slice_trials", c.suite.slice_trials, "suite");
        read(s, "scaling_trials", c.suite.scaling_trials, "suite");
    }
    read(j, "timestamps", c.timestamps, "config");
    read(j, "workers", c.workers, "config");

    if (o.p) c.p = *o.p;
    if (o.eps) c.eps = *o.eps;
    if (o.grid) c.lx = (*o.grid)[0], c.ly = (*o.grid)[1], c.delta = (*o.grid)[2];
    if (o.out) c.out = *o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.cross_check) c.cross_check = true;
    c.validate();
    return c;
}

inline nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
}

// "0.5,0.2,0.1" or "max:min:count".
inline std::vector<double> parse_eps_list(const std::string& s) {
    std::vector<double> out;
    auto num = [&](const std::string& t) {
        try {
            std::size_t used = 0;
            const double v = std::stod(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("cannot read '" + t + "' as a number in --eps");
        }
    };
    if (s.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        for (std::string t; std::getline(ss, t, ':');) parts.push_back(t);
        if (parts.size() != 3) throw ConfigError("--eps range must be max:min:count");
        const double n = num(parts[2]);
        if (n != std::floor(n) || n < 1) throw ConfigError("--eps count must be a positive integer");
        return geometric_eps(num(parts[0]), num(parts[1]), static_cast<int>(n));
    }
    std::stringstream ss(s);
    for (std::string t; std::getline(ss, t, ',');) out.push_back(num(t));
    if (out.empty()) throw ConfigError("--eps is empty");
    return out;
}

// "lx,ly,delta".
inline std::array<double, 3> parse_grid_spec(const std::string& s) {
    std::array<double, 3> g{};
    std::stringstream ss(s);
    std::string t;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, t, ',')) throw ConfigError("--grid must be lx,ly,delta");
        try {
            std::size_t used = 0;
            g[i] = std::stod(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw ConfigError("cannot read '" + t + "' as a number in --grid");
        }
    }
    if (std::getline(ss, t, ',')) throw ConfigError("--grid must be lx,ly,delta");
    return g;
}

}  // namespace glab
