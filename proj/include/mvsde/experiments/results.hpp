#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "../errors.hpp"

namespace mvsde::experiments {

/// One long-format result record.
///
/// `T` is the time at which the metric was measured: the horizon for
/// terminal metrics and the sample time for moment series rows. Summary rows
/// that have no step size (fitted rates) carry h = 0.
struct ResultRow {
    std::string experiment;
    std::string model;
    std::string scheme;
    double h = 0.0;
    std::size_t N = 0;
    double T = 0.0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline constexpr const char* kCsvHeader = "experiment,model,scheme,h,N,T,seed,metric,value";

/// %.17g: enough digits to round-trip any double.
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << kCsvHeader << '\n';
    for (const auto& r : rows) {
        for (const auto* field : {&r.experiment, &r.model, &r.scheme, &r.metric})
            if (field->find_first_of(",\n\r\"") != std::string::npos)
                throw ConfigError("csv: field '" + *field + "' contains a delimiter");
        os << r.experiment << ',' << r.model << ',' << r.scheme << ',' << format_real(r.h) << ','
           << r.N << ',' << format_real(r.T) << ',' << r.seed << ',' << r.metric << ','
           << format_real(r.value) << '\n';
    }
}

inline void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    write_csv(out, rows);
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline double parse_real(const std::string& s, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0')
        throw ConfigError("line " + std::to_string(line) + ": '" + s + "' is not a number");
    return v;
}

inline std::uint64_t parse_unsigned(const std::string& s, std::size_t line) {
    char* end = nullptr;
    const auto v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || s.front() == '-')
        throw ConfigError("line " + std::to_string(line) + ": '" + s + "' is not a non-negative integer");
    return v;
}

}  // namespace detail

inline std::vector<ResultRow> read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader)
        throw ConfigError("line 1: expected header '" + std::string(kCsvHeader) + "'");
    std::vector<ResultRow> rows;
    for (std::size_t lineno = 2; std::getline(is, line); ++lineno) {
        if (line.empty()) continue;
        const auto f = detail::split(line, ',');
        if (f.size() != 9)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 9 fields, got " +
                              std::to_string(f.size()));
        rows.push_back({f[0], f[1], f[2], detail::parse_real(f[3], lineno),
                        static_cast<std::size_t>(detail::parse_unsigned(f[4], lineno)),
                        detail::parse_real(f[5], lineno), detail::parse_unsigned(f[6], lineno), f[7],
                        detail::parse_real(f[8], lineno)});
    }
    return rows;
}

inline std::vector<ResultRow> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return read_csv(in);
}

}  // namespace mvsde::experiments
