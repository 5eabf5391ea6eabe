#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"

namespace mvsde {

struct NewtonOptions {
    /// Converged requires ||F(z)|| <= tol ...
    double tol = 1e-12;
    /// ... and a pending correction no larger than step_rel_tol * ||z||.
    /// Without the second test tiny iterates (|z| << tol) stop at the initial guess.
    double step_rel_tol = 1e-12;
    std::size_t max_iter = 25;
    int max_halvings = 8;
};

/// Reusable buffers so hot loops do not allocate per solve.
struct NewtonScratch {
    std::vector<double> f, trial, f_trial, jac, delta;

    void resize(std::size_t n) {
        f.resize(n);
        trial.resize(n);
        f_trial.resize(n);
        jac.resize(n * n);
        delta.resize(n);
    }
};

struct NewtonResult {
    double residual = 0.0;
    /// Number of accepted updates.
    std::size_t iterations = 0;
};

namespace detail {

inline constexpr std::size_t kNoParticle = static_cast<std::size_t>(-1);

/// Solves a x = b in place (b becomes x). Returns false if a is singular.
inline bool solve_dense(std::span<double> a, std::span<double> b) {
    const std::size_t n = b.size();
    if (n == 1) {
        if (!(std::abs(a[0]) > std::numeric_limits<double>::min())) return false;
        b[0] /= a[0];
        return std::isfinite(b[0]);
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (!(std::abs(a[pivot * n + col]) > std::numeric_limits<double>::min())) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * b[c];
        b[i] = s / a[i * n + i];
    }
    return std::all_of(b.begin(), b.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace detail

/// Damped Newton iteration for F(z) = 0, updating `z` in place.
///
/// `residual(z, out)` writes F(z); `jacobian(z, out)` writes dF/dz row-major.
/// A full step is taken when it lowers ||F||; otherwise the step is halved up
/// to max_halvings times. Throws NewtonFailure on a singular Jacobian, on
/// stagnation above tol, or after max_iter updates.
template <class Residual, class Jacobian>
NewtonResult newton_solve(Residual&& residual, Jacobian&& jacobian, std::span<double> z,
                          const NewtonOptions& opts, NewtonScratch& scratch) {
    const std::size_t n = z.size();
    scratch.resize(n);
    auto& [f, trial, f_trial, jac, delta] = scratch;

    auto fail = [&](const std::string& why, double res, std::size_t iters) {
        throw NewtonFailure("newton: " + why, detail::kNoParticle, res, iters);
    };

    residual(std::span<const double>(z), std::span<double>(f));
    double fnorm = detail::norm(f);
    for (std::size_t iter = 0;; ++iter) {
        if (!std::isfinite(fnorm)) fail("non-finite residual", fnorm, iter);
        jacobian(std::span<const double>(z), std::span<double>(jac));
        std::copy(f.begin(), f.end(), delta.begin());
        if (!detail::solve_dense(jac, delta)) fail("singular Jacobian", fnorm, iter);

        const double step = detail::norm(delta);
        const double znorm = detail::norm(std::span<const double>(z));
        if (fnorm <= opts.tol &&
            step <= opts.step_rel_tol * std::max(znorm, std::numeric_limits<double>::min()))
            return {fnorm, iter};
        if (iter == opts.max_iter)
            fail("no convergence after " + std::to_string(iter) + " iterations", fnorm, iter);

        double scale = 1.0;
        bool accepted = false;
        for (int halving = 0; halving <= opts.max_halvings; ++halving, scale *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = z[i] - scale * delta[i];
            residual(std::span<const double>(trial), std::span<double>(f_trial));
            const double tnorm = detail::norm(f_trial);
            if (tnorm < fnorm || (halving == 0 && tnorm == 0.0)) {
                accepted = true;
                fnorm = tnorm;
                break;
            }
        }
        if (!accepted) {
            // Residual is at its rounding floor.
            if (fnorm <= opts.tol) return {fnorm, iter};
            fail("stagnation", fnorm, iter);
        }
        std::copy(trial.begin(), trial.end(), z.begin());
        std::copy(f_trial.begin(), f_trial.end(), f.begin());
    }
}

template <class Residual, class Jacobian>
NewtonResult newton_solve(Residual&& residual, Jacobian&& jacobian, std::span<double> z,
                          const NewtonOptions& opts = {}) {
    NewtonScratch scratch;
    return newton_solve(std::forward<Residual>(residual), std::forward<Jacobian>(jacobian), z, opts,
                        scratch);
}

/// Convenience overload returning the root.
template <class Residual, class Jacobian>
std::pair<std::vector<double>, NewtonResult> newton_solve(Residual&& residual, Jacobian&& jacobian,
                                                          std::vector<double> z0,
                                                          const NewtonOptions& opts = {}) {
    auto result = newton_solve(std::forward<Residual>(residual), std::forward<Jacobian>(jacobian),
                               std::span<double>(z0), opts);
    return {std::move(z0), result};
}

}  // namespace mvsde
