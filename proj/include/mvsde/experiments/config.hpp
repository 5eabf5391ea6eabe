#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "results.hpp"

namespace mvsde::experiments {

/// Settings of one study. `defaults_for(command)` gives the desk-scale
/// defaults; config files and CLI flags override individual keys.
struct StudyConfig {
    std::string command;
    std::string model = "example-4.1";
    std::vector<std::string> schemes;
    std::vector<double> h;
    /// Finest step; defaults to the smallest h.
    std::optional<double> h_ref;
    double T = 0.0;
    /// Particle counts. Chaos uses the whole list, other commands the first entry.
    std::vector<std::size_t> n;
    /// Large-N proxy for the chaos study.
    std::size_t n_max = 0;
    std::uint64_t seed = 2024;
    std::size_t replicas = 1;
    std::size_t threads = 1;
    std::string out;
    bool allow_unsafe_h = false;
    std::optional<double> x0;
    double newton_tol = 1e-12;
    std::size_t newton_max_iter = 25;
    std::vector<double> moments{2.0, 4.0};
    std::size_t stride = 64;
    std::size_t samples = 10000;

    double resolved_h_ref() const {
        if (h_ref) return *h_ref;
        if (h.empty()) throw ConfigError("no step sizes configured");
        return *std::min_element(h.begin(), h.end());
    }

    std::size_t particles() const {
        if (n.empty()) throw ConfigError("no particle count configured");
        return n.front();
    }
};

inline const std::vector<std::string>& study_commands() {
    static const std::vector<std::string> names{"converge", "moments", "chaos", "corrupt", "validate"};
    return names;
}

inline StudyConfig defaults_for(const std::string& command) {
    StudyConfig cfg;
    cfg.command = command;
    if (command == "converge") {
        cfg.schemes = {"pem", "bem"};
        cfg.h = {std::ldexp(1.0, -10), std::ldexp(1.0, -9), std::ldexp(1.0, -8), std::ldexp(1.0, -7),
                 std::ldexp(1.0, -6)};
        cfg.h_ref = std::ldexp(1.0, -13);
        cfg.T = 4.0;
        cfg.n = {500};
        cfg.moments = {2.0};
        cfg.stride = 1u << 20;
    } else if (command == "moments") {
        cfg.schemes = {"pem", "bem"};
        cfg.h = {std::ldexp(1.0, -6)};
        cfg.T = 200.0;
        cfg.n = {500};
    } else if (command == "chaos") {
        cfg.schemes = {"pem"};
        cfg.h = {std::ldexp(1.0, -8)};
        cfg.T = 4.0;
        cfg.n = {32, 64, 128, 256, 512};
        cfg.n_max = 2048;
        // One path gives a chi-square(1)-like msd per N; the trend in N needs pooling.
        cfg.replicas = 32;
        cfg.moments = {2.0};
        cfg.stride = 1u << 20;
    } else if (command == "corrupt") {
        cfg.schemes = {"em", "pem", "bem"};
        cfg.h = {0.25};
        cfg.T = 10.0;
        cfg.n = {100};
        cfg.x0 = 10.0;
        cfg.allow_unsafe_h = true;
        cfg.moments = {2.0};
        cfg.stride = 1;
    } else if (command == "validate") {
        cfg.seed = 1;
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
    return cfg;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    for (const auto& item : split(value, ',')) {
        const auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

inline bool parse_bool(const std::string& s, const std::string& where) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(where + "'" + s + "' is not a boolean");
}

}  // namespace detail

/// Parses a step size: decimal ("0.015625") or dyadic ("2^-6").
inline double parse_step(const std::string& text) {
    const auto s = detail::trim(text);
    if (s.rfind("2^", 0) == 0) {
        const auto exponent = s.substr(2);
        char* end = nullptr;
        const long e = std::strtol(exponent.c_str(), &end, 10);
        if (exponent.empty() || *end != '\0') throw ConfigError("bad step '" + text + "'");
        return std::ldexp(1.0, static_cast<int>(e));
    }
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw ConfigError("bad step '" + text + "'");
    return v;
}

/// Applies one `key = value` setting. List keys (scheme, h, n, moment) append
/// when `append` is set and replace otherwise. `where` prefixes error messages.
inline void apply_setting(StudyConfig& cfg, const std::string& key, const std::string& value,
                          bool append, const std::string& where = "") {
    auto real = [&](const std::string& s) {
        try {
            return detail::parse_real(s, 0);
        } catch (const ConfigError&) {
            throw ConfigError(where + key + ": '" + s + "' is not a number");
        }
    };
    auto count = [&](const std::string& s) {
        try {
            return static_cast<std::size_t>(detail::parse_unsigned(s, 0));
        } catch (const ConfigError&) {
            throw ConfigError(where + key + ": '" + s + "' is not a non-negative integer");
        }
    };
    auto step = [&](const std::string& s) {
        try {
            return parse_step(s);
        } catch (const ConfigError&) {
            throw ConfigError(where + key + ": bad step '" + s + "'");
        }
    };
    const auto items = detail::split_list(value);

    if (key == "model") {
        cfg.model = detail::trim(value);
    } else if (key == "scheme") {
        if (!append) cfg.schemes.clear();
        cfg.schemes.insert(cfg.schemes.end(), items.begin(), items.end());
    } else if (key == "h") {
        if (!append) cfg.h.clear();
        for (const auto& it : items) cfg.h.push_back(step(it));
    } else if (key == "n") {
        if (!append) cfg.n.clear();
        for (const auto& it : items) cfg.n.push_back(count(it));
    } else if (key == "moment") {
        if (!append) cfg.moments.clear();
        for (const auto& it : items) cfg.moments.push_back(real(it));
    } else if (key == "href") {
        cfg.h_ref = step(value);
    } else if (key == "t") {
        cfg.T = real(detail::trim(value));
    } else if (key == "nmax") {
        cfg.n_max = count(detail::trim(value));
    } else if (key == "seed") {
        cfg.seed = count(detail::trim(value));
    } else if (key == "replicas") {
        cfg.replicas = count(detail::trim(value));
    } else if (key == "threads") {
        cfg.threads = count(detail::trim(value));
    } else if (key == "out") {
        cfg.out = detail::trim(value);
    } else if (key == "allow-unsafe-h") {
        cfg.allow_unsafe_h = detail::parse_bool(detail::trim(value), where + key + ": ");
    } else if (key == "x0") {
        cfg.x0 = real(detail::trim(value));
    } else if (key == "newton-tol" || key == "newton_tol") {
        cfg.newton_tol = real(detail::trim(value));
    } else if (key == "newton-max-iter" || key == "newton_max_iter") {
        cfg.newton_max_iter = count(detail::trim(value));
    } else if (key == "stride") {
        cfg.stride = count(detail::trim(value));
    } else if (key == "samples") {
        cfg.samples = count(detail::trim(value));
    } else {
        throw ConfigError(where + "unknown key '" + key + "'");
    }
}

/// Reads `key = value` lines with `#` comments into `cfg`. Repeated list keys append.
inline void load_config(std::istream& is, StudyConfig& cfg) {
    std::set<std::string> seen;
    std::string line;
    for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = "config line " + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + "missing key");
        apply_setting(cfg, key, value, seen.count(key) > 0, where);
        seen.insert(key);
    }
}

inline StudyConfig load_config(const std::string& path, const std::string& command) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    StudyConfig cfg = defaults_for(command);
    load_config(in, cfg);
    return cfg;
}

}  // namespace mvsde::experiments
