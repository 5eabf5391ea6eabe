#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "particles.hpp"

namespace mvsde {

namespace detail {

inline double squared_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline double norm(std::span<const double> x) {
    return x.size() == 1 ? std::abs(x[0]) : std::sqrt(squared_norm(x));
}

/// |x|^q, computed through integer powers of |x|^2 when q is even.
inline double abs_power(std::span<const double> x, double q) {
    const double half = q / 2.0;
    if (half == std::floor(half) && half <= 64.0) {
        const double sq = squared_norm(x);
        double out = 1.0;
        for (int k = 0; k < static_cast<int>(half); ++k) out *= sq;
        return out;
    }
    return std::pow(norm(x), q);
}

}  // namespace detail

/// Uniform-weight empirical measure (1/N) sum delta_{x_i}.
///
/// A non-owning snapshot over particle states: the referenced storage must
/// outlive the measure and must not change while the measure is in use.
/// Build a fresh measure after every state update. The mean of |x_i| and
/// any requested moments are computed once at construction, so concurrent
/// readers never synchronize.
class EmpiricalMeasure {
public:
    EmpiricalMeasure(std::span<const double> atoms, std::size_t dim,
                     std::initializer_list<double> cached_orders = {})
        : atoms_(atoms), dim_(dim) {
        if (dim_ == 0) throw ConfigError("empirical measure: dimension must be positive");
        if (atoms_.empty()) throw ConfigError("empirical measure: at least one atom required");
        if (atoms_.size() % dim_ != 0)
            throw ConfigError("empirical measure: atom storage is not a multiple of the dimension");
        count_ = atoms_.size() / dim_;

        double sum_abs = 0.0;
        for (std::size_t i = 0; i < count_; ++i) {
            auto x = atom(i);
            for (std::size_t c = 0; c < dim_; ++c) {
                if (!std::isfinite(x[c]))
                    throw EvaluationError("empirical measure: atom " + std::to_string(i) +
                                              " component " + std::to_string(c) + " is not finite",
                                          c);
            }
            sum_abs += detail::norm(x);
        }
        mean_abs_ = sum_abs / static_cast<double>(count_);
        for (double q : cached_orders) cached_.emplace_back(q, compute_moment(q));
    }

    explicit EmpiricalMeasure(const ParticleStates& states,
                              std::initializer_list<double> cached_orders = {})
        : EmpiricalMeasure(states.flat(), states.dim(), cached_orders) {}

    std::size_t size() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> atom(std::size_t i) const noexcept {
        return atoms_.subspan(i * dim_, dim_);
    }
    std::span<const double> atoms() const noexcept { return atoms_; }

    /// (1/N) sum |x_i|
    double mean_abs() const noexcept { return mean_abs_; }

    /// (1/N) sum |x_i|^q, q >= 1. Equals W_q(mu)^q.
    double moment(double q) const {
        if (!(q >= 1.0)) throw ConfigError("moment order must be >= 1");
        for (const auto& [order, value] : cached_)
            if (order == q) return value;
        return compute_moment(q);
    }

private:
    double compute_moment(double q) const {
        double s = 0.0;
        for (std::size_t i = 0; i < count_; ++i) s += detail::abs_power(atom(i), q);
        return s / static_cast<double>(count_);
    }

    std::span<const double> atoms_;
    std::size_t dim_ = 1;
    std::size_t count_ = 0;
    double mean_abs_ = 0.0;
    std::vector<std::pair<double, double>> cached_;
};

inline EmpiricalMeasure from_particles(const ParticleStates& states) {
    if (states.empty()) throw ConfigError("from_particles: empty particle array");
    return EmpiricalMeasure(states);
}

inline double moment(const EmpiricalMeasure& mu, double q) { return mu.moment(q); }

namespace detail {

inline void require_comparable(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                               const char* who) {
    if (mu.dim() != nu.dim())
        throw UnsupportedInstance(std::string(who) + ": measures live in different dimensions");
    if (mu.size() != nu.size())
        throw UnsupportedInstance(std::string(who) + ": unequal atom counts (" +
                                  std::to_string(mu.size()) + " vs " + std::to_string(nu.size()) +
                                  ")");
}

/// min over permutations s of (1/N) sum |x_i - y_s(i)|^q. Any dimension.
/// For uniform equal-count measures the optimal plan is a permutation.
inline double min_permutation_cost(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                   double q) {
    std::vector<std::size_t> perm(nu.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<double> diff(mu.dim());
    double best = INFINITY;
    do {
        double cost = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            auto x = mu.atom(i);
            auto y = nu.atom(perm[i]);
            for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = x[c] - y[c];
            cost += abs_power(diff, q);
        }
        best = std::min(best, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(mu.size());
}

inline constexpr std::size_t kBruteForceMaxAtoms = 8;

}  // namespace detail

/// Exact W2 between two equal-count 1-D empirical measures by sorted pairing.
inline double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1)
        throw UnsupportedInstance("wasserstein2_1d: only one-dimensional measures are supported");
    detail::require_comparable(mu, nu, "wasserstein2_1d");

    std::vector<double> xs(mu.atoms().begin(), mu.atoms().end());
    std::vector<double> ys(nu.atoms().begin(), nu.atoms().end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - ys[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(xs.size()));
}

/// Test oracle: W2 by exhaustive search over all N! pairings (N <= 8).
inline double wasserstein2_bruteforce(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1)
        throw UnsupportedInstance("wasserstein2_bruteforce: only one-dimensional measures");
    detail::require_comparable(mu, nu, "wasserstein2_bruteforce");
    if (mu.size() > detail::kBruteForceMaxAtoms)
        throw UnsupportedInstance("wasserstein2_bruteforce: refusing N = " +
                                  std::to_string(mu.size()) + " > 8");
    return std::sqrt(detail::min_permutation_cost(mu, nu, 2.0));
}

}  // namespace mvsde
