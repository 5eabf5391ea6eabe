#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"
#include "model.hpp"
#include "newton.hpp"
#include "parallel.hpp"
#include "particles.hpp"

namespace mvsde {

enum class SchemeKind { PEM, BEM, EM };

inline std::string scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::PEM: return "pem";
        case SchemeKind::BEM: return "bem";
        case SchemeKind::EM: return "em";
    }
    return "?";
}

inline SchemeKind parse_scheme(const std::string& name) {
    if (name == "pem") return SchemeKind::PEM;
    if (name == "bem") return SchemeKind::BEM;
    if (name == "em") return SchemeKind::EM;
    throw ConfigError("unknown scheme '" + name + "' (expected pem, bem or em)");
}

struct SchemeConfig {
    SchemeKind variant = SchemeKind::PEM;
    double newton_tol = 1e-12;
    std::size_t newton_max_iter = 25;
    bool enforce_step_guard = true;

    void validate() const {
        if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be positive");
        if (newton_max_iter < 1) throw ConfigError("newton_max_iter must be >= 1");
    }

    NewtonOptions newton_options() const {
        NewtonOptions opts;
        opts.tol = newton_tol;
        opts.max_iter = newton_max_iter;
        return opts;
    }
};

/// Aggregate statistics over implicit solves.
struct NewtonStats {
    std::size_t solves = 0;
    std::size_t total_iterations = 0;
    std::size_t max_iterations = 0;
    double max_residual = 0.0;
    /// histogram[k] = number of solves that took k iterations
    std::vector<std::size_t> histogram;

    void add(const NewtonResult& r) {
        ++solves;
        total_iterations += r.iterations;
        max_iterations = std::max(max_iterations, r.iterations);
        max_residual = std::max(max_residual, r.residual);
        if (histogram.size() <= r.iterations) histogram.resize(r.iterations + 1, 0);
        ++histogram[r.iterations];
    }

    void merge(const NewtonStats& other) {
        solves += other.solves;
        total_iterations += other.total_iterations;
        max_iterations = std::max(max_iterations, other.max_iterations);
        max_residual = std::max(max_residual, other.max_residual);
        if (histogram.size() < other.histogram.size()) histogram.resize(other.histogram.size(), 0);
        for (std::size_t k = 0; k < other.histogram.size(); ++k) histogram[k] += other.histogram[k];
    }

    /// Lower median of the iteration counts.
    double median_iterations() const {
        if (solves == 0) return 0.0;
        const std::size_t target = (solves + 1) / 2;
        std::size_t seen = 0;
        for (std::size_t k = 0; k < histogram.size(); ++k) {
            seen += histogram[k];
            if (seen >= target) return static_cast<double>(k);
        }
        return static_cast<double>(histogram.size());
    }

    double mean_iterations() const {
        return solves == 0 ? 0.0 : static_cast<double>(total_iterations) / static_cast<double>(solves);
    }

    friend bool operator==(const NewtonStats&, const NewtonStats&) = default;
};

/// Radial projection psi(x) = min{1, h^{-1/(2(kappa+2))} / |x|} x; psi(0) = 0.
inline void project(std::span<const double> x, double h, double kappa, std::span<double> out) {
    const double radius = std::pow(h, -1.0 / (2.0 * (kappa + 2.0)));
    const double r = detail::norm(x);
    const double factor = r > radius ? radius / r : 1.0;
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = factor * x[c];
}

inline std::vector<double> project(std::span<const double> x, double h, double kappa) {
    std::vector<double> out(x.size());
    project(x, h, kappa, out);
    return out;
}

/// Buffers for one time step of the particle system.
///
/// `current` holds X_k and `noise` the N x m Brownian increments of the step;
/// a step writes X_{k+1} to `next`. `projected` is only used by PEM.
struct StepWorkspace {
    ParticleStates current;
    ParticleStates projected;
    ParticleStates next;
    std::vector<double> noise;

    StepWorkspace() = default;
    StepWorkspace(ParticleStates initial, std::size_t wiener_dim)
        : current(std::move(initial)),
          projected(current.count(), current.dim()),
          next(current.count(), current.dim()),
          noise(current.count() * wiener_dim, 0.0) {}

    std::size_t count() const noexcept { return current.count(); }

    std::span<const double> noise_row(std::size_t i, std::size_t m) const noexcept {
        return std::span<const double>(noise).subspan(i * m, m);
    }

    /// Makes `next` the current state.
    void commit() { std::swap(current, next); }
};

namespace detail {

inline void run_chunks(WorkerTeam* team, std::size_t n,
                       const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (team)
        team->for_chunks(n, fn);
    else
        fn(0, 0, n);
}

/// out = base + h * drift + sigma * dW, evaluated at `at` under `mu`.
inline void explicit_update(const ModelSpec& model, const ParticleStates& at,
                            const EmpiricalMeasure& mu, const StepWorkspace& ws, double h,
                            ParticleStates& out, WorkerTeam* team) {
    const std::size_t d = model.d, m = model.m;
    run_chunks(team, at.count(), [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> b(d), s(d * m);
        for (std::size_t i = begin; i < end; ++i) {
            auto x = at.row(i);
            auto dw = ws.noise_row(i, m);
            eval_drift(model, x, mu, b);
            eval_diffusion(model, x, mu, s);
            auto y = out.row(i);
            for (std::size_t r = 0; r < d; ++r) {
                double noise = 0.0;
                for (std::size_t c = 0; c < m; ++c) noise += s[r * m + c] * dw[c];
                y[r] = x[r] + h * b[r] + noise;
            }
        }
    });
}

}  // namespace detail

/// Projected Euler: Ybar = psi(Y), Y+ = Ybar + h b(Ybar, mu_Ybar) + sigma(Ybar, mu_Ybar) dW.
/// The empirical measure is taken over the projected states.
inline void pem_step(StepWorkspace& ws, const ModelSpec& model, double h,
                     WorkerTeam* team = nullptr) {
    const double kappa = model.constants.kappa;
    detail::run_chunks(team, ws.count(), [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) project(ws.current.row(i), h, kappa, ws.projected.row(i));
    });
    const EmpiricalMeasure mu(ws.projected);
    detail::explicit_update(model, ws.projected, mu, ws, h, ws.next, team);
}

/// Explicit Euler-Maruyama, measure over the pre-step states. No step guard.
inline void em_step(StepWorkspace& ws, const ModelSpec& model, double h, WorkerTeam* team = nullptr) {
    const EmpiricalMeasure mu(ws.current);
    detail::explicit_update(model, ws.current, mu, ws, h, ws.next, team);
}

/// Drift-implicit Euler: z = X + h b(z, mu_k) + sigma(X, mu_k) dW with mu_k the
/// pre-step empirical measure, solved particle by particle with Newton from the
/// explicit predictor. Throws NewtonFailure carrying the particle index.
inline NewtonStats bem_step(StepWorkspace& ws, const ModelSpec& model, double h,
                            const SchemeConfig& cfg, WorkerTeam* team = nullptr) {
    const std::size_t d = model.d, m = model.m;
    const EmpiricalMeasure mu(ws.current);
    const NewtonOptions opts = cfg.newton_options();
    const std::size_t chunks = team ? team->size() : 1;
    std::vector<NewtonStats> chunk_stats(chunks);

    detail::run_chunks(team, ws.count(), [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        std::vector<double> b(d), s(d * m), rhs(d), jac_b(d * d);
        NewtonScratch scratch;
        auto& stats = chunk_stats[chunk];
        for (std::size_t i = begin; i < end; ++i) {
            auto x = ws.current.row(i);
            auto dw = ws.noise_row(i, m);
            auto z = ws.next.row(i);
            eval_drift(model, x, mu, b);
            eval_diffusion(model, x, mu, s);
            for (std::size_t r = 0; r < d; ++r) {
                double noise = 0.0;
                for (std::size_t c = 0; c < m; ++c) noise += s[r * m + c] * dw[c];
                rhs[r] = x[r] + noise;
                z[r] = rhs[r] + h * b[r];
            }
            auto residual = [&](std::span<const double> zz, std::span<double> out) {
                eval_drift(model, zz, mu, out);
                for (std::size_t r = 0; r < d; ++r) out[r] = zz[r] - h * out[r] - rhs[r];
            };
            auto jacobian = [&](std::span<const double> zz, std::span<double> out) {
                eval_drift_jacobian(model, zz, mu, out);
                for (std::size_t k = 0; k < d * d; ++k) out[k] = -h * out[k];
                for (std::size_t r = 0; r < d; ++r) out[r * d + r] += 1.0;
            };
            try {
                stats.add(newton_solve(residual, jacobian, z, opts, scratch));
            } catch (const NewtonFailure& e) {
                throw NewtonFailure(std::string(e.what()) + " (particle " + std::to_string(i) + ")", i,
                                    e.residual(), e.iterations());
            } catch (const EvaluationError& e) {
                throw NewtonFailure(std::string("newton: iterate left the finite range: ") + e.what() +
                                        " (particle " + std::to_string(i) + ")",
                                    i, INFINITY, 0);
            }
        }
    });

    NewtonStats total;
    for (const auto& s : chunk_stats) total.merge(s);
    return total;
}

/// Dispatches one step of the configured scheme. Returns Newton statistics
/// for BEM, empty statistics otherwise.
inline NewtonStats scheme_step(StepWorkspace& ws, const ModelSpec& model, double h,
                               const SchemeConfig& cfg, WorkerTeam* team = nullptr) {
    switch (cfg.variant) {
        case SchemeKind::PEM: pem_step(ws, model, h, team); return {};
        case SchemeKind::EM: em_step(ws, model, h, team); return {};
        case SchemeKind::BEM: return bem_step(ws, model, h, cfg, team);
    }
    return {};
}

}  // namespace mvsde
