#pragma once

#include <cmath>
#include <span>
#include <utility>

#include "../errors.hpp"

namespace mvsde::experiments {

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares through (log2 h, log2 error) points.
inline RateFit fit_rate(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw ConfigError("fit_rate: at least two points are required");
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    const double n = static_cast<double>(points.size());
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (!(sxx > 0.0)) throw ConfigError("fit_rate: abscissae are degenerate");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

}  // namespace mvsde::experiments
