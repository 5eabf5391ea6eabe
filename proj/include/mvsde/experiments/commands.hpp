#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "../brownian.hpp"
#include "../errors.hpp"
#include "../model.hpp"
#include "../parallel.hpp"
#include "../schemes.hpp"
#include "../simulator.hpp"
#include "config.hpp"
#include "fit.hpp"
#include "results.hpp"

namespace mvsde::experiments {

struct SchemeRate {
    std::string scheme;
    /// Absent when fewer than two usable grid points remain.
    std::optional<RateFit> fit;
};

struct StudyOutcome {
    std::vector<ResultRow> rows;
    /// A run failed outside corruption mode (CLI exit code 2).
    bool simulation_failed = false;
    std::vector<SchemeRate> rates;
};

namespace detail {

/// Everything a study needs after validation.
struct Plan {
    ModelSpec model;
    std::vector<SchemeKind> schemes;
    BrownianDriver driver;
    SchemeConfig scheme_base;
};

inline int ref_level_of(double h_ref) {
    int exponent = 0;
    const double mantissa = std::frexp(h_ref, &exponent);
    if (!(h_ref > 0.0) || mantissa != 0.5) throw ConfigError("href must be a power of two");
    return 1 - exponent;
}

/// Validates the grid against the model. Steps above max_step(model, p_guard)
/// are rejected unless the study allows unsafe steps.
inline Plan make_plan(const StudyConfig& cfg, double p_guard) {
    Plan plan{make_model(cfg.model), {}, BrownianDriver(cfg.seed, ref_level_of(cfg.resolved_h_ref())), {}};
    if (cfg.schemes.empty()) throw ConfigError("no schemes configured");
    for (const auto& s : cfg.schemes) plan.schemes.push_back(parse_scheme(s));
    if (cfg.h.empty()) throw ConfigError("no step sizes configured");
    if (cfg.n.empty()) throw ConfigError("no particle count configured");
    for (auto n : cfg.n)
        if (n < 1) throw ConfigError("particle counts must be >= 1");
    if (cfg.replicas < 1) throw ConfigError("replicas must be >= 1");
    if (!(cfg.T >= 0.0)) throw ConfigError("T must be >= 0");
    const double limit = max_step(plan.model, p_guard);
    for (double h : cfg.h) {
        if (!cfg.allow_unsafe_h && h > limit)
            throw ConfigError("h = " + format_real(h) + " exceeds the admissible step " + format_real(limit) +
                              " for " + plan.model.name);
        plan.driver.level_for_step(h);
        const double ratio = cfg.T / h;
        if (ratio != std::floor(ratio))
            throw ConfigError("h = " + format_real(h) + " does not divide T = " + format_real(cfg.T));
    }
    plan.scheme_base.newton_tol = cfg.newton_tol;
    plan.scheme_base.newton_max_iter = cfg.newton_max_iter;
    plan.scheme_base.enforce_step_guard = !cfg.allow_unsafe_h;
    plan.scheme_base.validate();
    return plan;
}

inline SchemeConfig scheme_config(const Plan& plan, SchemeKind kind) {
    SchemeConfig sc = plan.scheme_base;
    sc.variant = kind;
    return sc;
}

inline SimConfig sim_config(const StudyConfig& cfg, const ModelSpec& model, std::size_t n, double h) {
    SimConfig sim;
    sim.N = n;
    sim.h = h;
    sim.T = cfg.T;
    if (cfg.x0) sim.x0 = std::vector<double>(model.d, *cfg.x0);
    sim.record_moments = cfg.moments;
    sim.record_stride = cfg.stride;
    return sim;
}

/// Result of one run as kept by a study.
struct Cell {
    std::optional<RunOutput> output;
    std::size_t failed_step = 0;
    std::string error;
};

inline Cell run_cell(const ModelSpec& model, const SchemeConfig& sc, const SimConfig& sim,
                     const BrownianDriver& driver, std::uint64_t path) {
    Cell cell;
    try {
        cell.output = run(model, sc, sim, driver, path);
    } catch (const SchemeBlowup& e) {
        cell.failed_step = e.step();
        cell.error = e.what();
    } catch (const NewtonFailure& e) {
        cell.error = e.what();
    }
    return cell;
}

inline std::string order_label(double order) {
    if (order == std::floor(order)) return std::to_string(static_cast<long long>(order));
    return format_real(order);
}

}  // namespace detail

/// Strong-error study: RMSE between coarse runs and a reference run at h_ref
/// sharing the Brownian path, then a least-squares rate per scheme.
inline StudyOutcome converge_cmd(const StudyConfig& cfg) {
    const auto plan = detail::make_plan(cfg, 1.0);
    const std::size_t N = cfg.particles();
    const double h_ref = plan.driver.h_ref();
    const std::size_t S = plan.schemes.size(), H = cfg.h.size(), R = cfg.replicas;

    // Jobs: references (s, r) first, then coarse (s, h, r).
    std::vector<detail::Cell> cells(S * R + S * H * R);
    parallel_jobs(cells.size(), cfg.threads, [&](std::size_t job) {
        std::size_t s, r;
        double h;
        if (job < S * R) {
            s = job / R;
            r = job % R;
            h = h_ref;
        } else {
            const std::size_t j = job - S * R;
            s = j / (H * R);
            h = cfg.h[(j / R) % H];
            r = j % R;
        }
        auto sim = detail::sim_config(cfg, plan.model, N, h);
        cells[job] = detail::run_cell(plan.model, detail::scheme_config(plan, plan.schemes[s]), sim,
                                      plan.driver, r);
    });

    StudyOutcome outcome;
    for (std::size_t s = 0; s < S; ++s) {
        const auto name = scheme_name(plan.schemes[s]);
        auto row = [&](double h, const std::string& metric, double value) {
            outcome.rows.push_back({"converge", plan.model.name, name, h, N, cfg.T, cfg.seed, metric, value});
        };
        std::vector<std::pair<double, double>> points;
        for (std::size_t hi = 0; hi < H; ++hi) {
            const double h = cfg.h[hi];
            double pooled = 0.0;
            std::vector<double> per_path;
            std::optional<std::size_t> failed;
            NewtonStats newton;
            for (std::size_t r = 0; r < R; ++r) {
                const auto& ref = cells[s * R + r];
                const auto& coarse = cells[S * R + (s * H + hi) * R + r];
                if (!ref.output || !coarse.output) {
                    failed = !coarse.output ? coarse.failed_step : ref.failed_step;
                    break;
                }
                const double msd = mean_square_distance(coarse.output->final_states, ref.output->final_states);
                pooled += msd;
                per_path.push_back(std::sqrt(msd));
                newton.merge(coarse.output->newton);
            }
            if (failed) {
                outcome.simulation_failed = true;
                row(h, "blowup_step", static_cast<double>(*failed));
                continue;
            }
            const double value = std::sqrt(pooled / static_cast<double>(R));
            row(h, "rmse", value);
            if (R > 1)
                for (std::size_t r = 0; r < R; ++r) row(h, "rmse_path" + std::to_string(r), per_path[r]);
            if (plan.schemes[s] == SchemeKind::BEM) {
                row(h, "newton_median_iterations", newton.median_iterations());
                row(h, "newton_max_residual", newton.max_residual);
            }
            if (value > 0.0) points.emplace_back(std::log2(h), std::log2(value));
        }
        SchemeRate rate{name, std::nullopt};
        if (points.size() >= 2) {
            rate.fit = fit_rate(points);
            row(0.0, "rate", rate.fit->slope);
            row(0.0, "rate_intercept", rate.fit->intercept);
        }
        outcome.rates.push_back(rate);
    }
    return outcome;
}

/// Long-horizon empirical moment study: strided series and running sup of
/// moment(mu_k, 2p) for every scheme and step.
inline StudyOutcome moments_cmd(const StudyConfig& cfg) {
    if (cfg.moments.empty()) throw ConfigError("no moment orders configured");
    for (double o : cfg.moments)
        if (!(o >= 2.0)) throw ConfigError("moment orders must be >= 2");
    const double p_max = *std::max_element(cfg.moments.begin(), cfg.moments.end()) / 2.0;
    const auto plan = detail::make_plan(cfg, p_max);
    const std::size_t N = cfg.particles();
    const std::size_t S = plan.schemes.size(), H = cfg.h.size();

    std::vector<detail::Cell> cells(S * H);
    parallel_jobs(cells.size(), cfg.threads, [&](std::size_t job) {
        auto sim = detail::sim_config(cfg, plan.model, N, cfg.h[job % H]);
        cells[job] = detail::run_cell(plan.model, detail::scheme_config(plan, plan.schemes[job / H]), sim,
                                      plan.driver, 0);
    });

    StudyOutcome outcome;
    for (std::size_t job = 0; job < cells.size(); ++job) {
        const auto name = scheme_name(plan.schemes[job / H]);
        const double h = cfg.h[job % H];
        const auto& cell = cells[job];
        auto row = [&](double t, const std::string& metric, double value) {
            outcome.rows.push_back({"moments", plan.model.name, name, h, N, t, cfg.seed, metric, value});
        };
        if (!cell.output) {
            outcome.simulation_failed = true;
            row(cfg.T, "blowup_step", static_cast<double>(cell.failed_step));
            continue;
        }
        for (const auto& sample : cell.output->moments)
            row(sample.t, "moment" + detail::order_label(sample.order), sample.value);
        for (std::size_t j = 0; j < cfg.moments.size(); ++j)
            row(cfg.T, "sup_moment" + detail::order_label(cfg.moments[j]), cell.output->moment_sup[j]);
    }
    return outcome;
}

/// Propagation-of-chaos proxy: the true law is replaced by an N_max-particle
/// system. For each N, the mean-square distance at T between the N-particle
/// system and the first N particles of the proxy (same noise per particle index),
/// pooled over `replicas` independent Brownian paths.
inline StudyOutcome chaos_cmd(const StudyConfig& cfg) {
    const auto plan = detail::make_plan(cfg, 1.0);
    if (!std::is_sorted(cfg.n.begin(), cfg.n.end())) throw ConfigError("chaos: N list must be ascending");
    if (cfg.n_max < cfg.n.back()) throw ConfigError("chaos: nmax must be >= every N");
    if (cfg.replicas < 1) throw ConfigError("replicas must be >= 1");
    const std::size_t S = plan.schemes.size(), H = cfg.h.size(), K = cfg.n.size() + 1, R = cfg.replicas;

    // Per (scheme, h, replica): the proxy, then each N.
    std::vector<detail::Cell> cells(S * H * R * K);
    parallel_jobs(cells.size(), cfg.threads, [&](std::size_t job) {
        const std::size_t k = job % K;
        const std::size_t r = (job / K) % R;
        const double h = cfg.h[(job / (K * R)) % H];
        const std::size_t n = k == 0 ? cfg.n_max : cfg.n[k - 1];
        auto sim = detail::sim_config(cfg, plan.model, n, h);
        cells[job] = detail::run_cell(plan.model, detail::scheme_config(plan, plan.schemes[job / (H * R * K)]),
                                      sim, plan.driver, r);
    });

    StudyOutcome outcome;
    for (std::size_t s = 0; s < S; ++s) {
        const auto name = scheme_name(plan.schemes[s]);
        for (std::size_t hi = 0; hi < H; ++hi) {
            const double h = cfg.h[hi];
            const auto* base = &cells[(s * H + hi) * R * K];
            auto row = [&](std::size_t n, const std::string& metric, double value) {
                outcome.rows.push_back({"chaos", plan.model.name, name, h, n, cfg.T, cfg.seed, metric, value});
            };
            row(cfg.n_max, "proxy_n_max", static_cast<double>(cfg.n_max));
            for (std::size_t k = 1; k < K; ++k) {
                const std::size_t n = cfg.n[k - 1];
                double pooled = 0.0;
                std::vector<double> per_path;
                std::optional<std::size_t> failed;
                for (std::size_t r = 0; r < R && !failed; ++r) {
                    const auto& proxy = base[r * K];
                    const auto& small = base[r * K + k];
                    if (!proxy.output || !small.output) {
                        failed = !proxy.output ? proxy.failed_step : small.failed_step;
                        break;
                    }
                    const double msd =
                        mean_square_distance(small.output->final_states, proxy.output->final_states.head(n));
                    pooled += msd;
                    per_path.push_back(msd);
                }
                if (failed) {
                    outcome.simulation_failed = true;
                    row(n, "blowup_step", static_cast<double>(*failed));
                    continue;
                }
                row(n, "msd", pooled / static_cast<double>(R));
                if (R > 1)
                    for (std::size_t r = 0; r < R; ++r) row(n, "msd_path" + std::to_string(r), per_path[r]);
            }
        }
    }
    return outcome;
}

/// Particle-corruption demo: every scheme runs at the same (possibly
/// inadmissible) step in flag-and-continue mode; blow-ups are results.
inline StudyOutcome corrupt_cmd(const StudyConfig& cfg) {
    StudyConfig local = cfg;
    local.moments = {2.0};
    // Every step is observed so the evolved supremum below is exact.
    local.stride = 1;
    const auto plan = detail::make_plan(local, 1.0);
    const std::size_t N = local.particles();
    const std::size_t S = plan.schemes.size(), H = local.h.size();

    std::vector<RunOutput> outputs(S * H);
    parallel_jobs(outputs.size(), local.threads, [&](std::size_t job) {
        auto sim = detail::sim_config(local, plan.model, N, local.h[job % H]);
        sim.continue_on_blowup = true;
        outputs[job] = run(plan.model, detail::scheme_config(plan, plan.schemes[job / H]), sim, plan.driver, 0);
    });

    StudyOutcome outcome;
    for (std::size_t job = 0; job < outputs.size(); ++job) {
        const auto kind = plan.schemes[job / H];
        const double h = local.h[job % H];
        const auto& out = outputs[job];
        auto row = [&](const std::string& metric, double value) {
            outcome.rows.push_back(
                {"corrupt", plan.model.name, scheme_name(kind), h, N, local.T, local.seed, metric, value});
        };
        // sup over k >= 1: the initial moment is an input, not scheme output
        double evolved = 0.0;
        for (const auto& sample : out.moments)
            if (sample.t > 0.0) evolved = std::max(evolved, sample.value);
        row("sup_moment2", out.moment_sup[0]);
        row("sup_moment2_evolved", evolved);
        row("steps_completed", static_cast<double>(out.steps));
        if (out.blowup_step) row("blowup_step", static_cast<double>(*out.blowup_step));
        if (out.saturation_step) row("saturation_step", static_cast<double>(*out.saturation_step));
        if (kind == SchemeKind::BEM) {
            row("newton_median_iterations", out.newton.median_iterations());
            row("newton_max_residual", out.newton.max_residual);
        }
    }
    return outcome;
}

struct ValidationOutcome {
    AssumptionReport report;
    std::vector<ResultRow> rows;
};

inline ValidationOutcome validate_cmd(const StudyConfig& cfg) {
    const auto model = make_model(cfg.model);
    model.constants.validate(true);
    ValidationOutcome out{check_assumptions(model, std::max<std::size_t>(cfg.samples, 1), cfg.seed), {}};
    for (const auto& c : out.report.checks) {
        std::string metric = c.name;
        std::replace(metric.begin(), metric.end(), ' ', '_');
        out.rows.push_back({"validate", model.name, "-", 0.0, 0, 0.0, cfg.seed, "slack_" + metric, c.worst_slack});
        out.rows.push_back(
            {"validate", model.name, "-", 0.0, 0, 0.0, cfg.seed, "passed_" + metric, c.passed ? 1.0 : 0.0});
    }
    return out;
}

}  // namespace mvsde::experiments
