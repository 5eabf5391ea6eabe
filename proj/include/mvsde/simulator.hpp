#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "errors.hpp"
#include "measure.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "particles.hpp"
#include "schemes.hpp"

namespace mvsde {

struct SimConfig {
    std::size_t N = 1;
    double h = 0.0;
    double T = 0.0;
    /// Replaces the model's initial value when set.
    std::optional<std::vector<double>> x0;
    /// Moment orders (2p) to record.
    std::vector<double> record_moments{2.0};
    std::size_t record_stride = 64;
    /// Particle-level threads inside one run.
    std::size_t threads = 1;
    /// Corruption-demo mode: flag blow-ups and keep stepping until a state
    /// becomes non-finite, instead of failing.
    bool continue_on_blowup = false;
    double blowup_threshold = 1e10;
};

struct MomentSample {
    double t = 0.0;
    double order = 0.0;
    double value = 0.0;

    friend bool operator==(const MomentSample&, const MomentSample&) = default;
};

struct RunOutput {
    ParticleStates final_states;
    /// Strided series of (t, 2p, moment) over the recorded steps.
    std::vector<MomentSample> moments;
    /// sup over every step k of moment(mu_k, order), aligned with record_moments.
    std::vector<double> moment_sup;
    NewtonStats newton;
    std::size_t steps = 0;
    /// First step at which a state exceeded the threshold in modulus, the
    /// second moment exceeded it, or a state became non-finite.
    std::optional<std::size_t> blowup_step;
    /// First step that produced a non-finite state (continue mode only).
    std::optional<std::size_t> saturation_step;
    double wall_seconds = 0.0;
};

/// Steps an N-particle system forward one step at a time with Brownian
/// increments served by a BrownianDriver.
class Stepper {
public:
    Stepper(const ModelSpec& model, const SchemeConfig& scheme, const SimConfig& sim,
            const BrownianDriver& driver, std::uint64_t path, WorkerTeam* team = nullptr)
        : model_(model), scheme_(scheme), sim_(sim), driver_(driver), path_(path), team_(team) {
        scheme_.validate();
        if (sim_.N < 1) throw ConfigError("particle count must be >= 1");
        if (driver_.wiener_dim() != model_.m)
            throw ConfigError("driver Wiener dimension does not match the model");
        if (!(sim_.T >= 0.0) || !std::isfinite(sim_.T)) throw ConfigError("horizon T must be >= 0");
        level_ = driver_.level_for_step(sim_.h);
        const double ratio = sim_.T / sim_.h;
        if (ratio != std::floor(ratio))
            throw ConfigError("step " + std::to_string(sim_.h) + " does not divide T = " +
                              std::to_string(sim_.T));
        total_steps_ = static_cast<std::size_t>(ratio);
        if (scheme_.enforce_step_guard && scheme_.variant != SchemeKind::EM) {
            const double limit = max_step(model_, 1.0);
            if (sim_.h > limit)
                throw ConfigError("step " + std::to_string(sim_.h) + " exceeds the admissible maximum " +
                                  std::to_string(limit) + " for " + model_.name);
        }
        const auto& start = sim_.x0 ? *sim_.x0 : model_.initial_value;
        if (start.size() != model_.d) throw ConfigError("initial value has the wrong dimension");
        ws_ = StepWorkspace(ParticleStates::replicate(sim_.N, start), model_.m);
    }

    std::size_t total_steps() const noexcept { return total_steps_; }
    std::size_t step_index() const noexcept { return k_; }
    double time() const noexcept { return static_cast<double>(k_) * sim_.h; }
    bool done() const noexcept { return k_ >= total_steps_; }
    const ParticleStates& states() const noexcept { return ws_.current; }
    /// Increments used by the most recent step (N x m).
    std::span<const double> last_noise() const noexcept { return ws_.noise; }
    const NewtonStats& newton() const noexcept { return newton_; }

    /// Advances one step. Scheme errors are rethrown with the step index.
    void step() {
        const std::size_t m = model_.m;
        detail::run_chunks(team_, ws_.count(), [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i)
                for (std::size_t c = 0; c < m; ++c)
                    ws_.noise[i * m + c] =
                        driver_.increment(path_, static_cast<std::uint32_t>(i),
                                          static_cast<std::uint32_t>(c), k_, level_);
        });
        try {
            newton_.merge(scheme_step(ws_, model_, sim_.h, scheme_, team_));
        } catch (const NewtonFailure& e) {
            throw NewtonFailure(std::string(e.what()) + " at step " + std::to_string(k_ + 1),
                                e.particle(), e.residual(), e.iterations());
        } catch (const EvaluationError& e) {
            throw SchemeBlowup(std::string("non-finite state at step ") + std::to_string(k_ + 1) +
                                   ": " + e.what(),
                               k_ + 1);
        }
        ws_.commit();
        ++k_;
    }

private:
    const ModelSpec& model_;
    SchemeConfig scheme_;
    SimConfig sim_;
    const BrownianDriver& driver_;
    std::uint64_t path_;
    WorkerTeam* team_;
    int level_ = 0;
    std::size_t total_steps_ = 0;
    std::size_t k_ = 0;
    StepWorkspace ws_;
    NewtonStats newton_;
};

namespace detail {

inline bool all_finite(const ParticleStates& s) {
    for (double v : s.flat())
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool exceeds(const ParticleStates& s, double threshold) {
    for (std::size_t i = 0; i < s.count(); ++i)
        if (norm(s.row(i)) > threshold) return true;
    return false;
}

}  // namespace detail

/// Integrates the particle system over [0, T] for Monte Carlo replica `path`.
/// Deterministic in (model, scheme, sim, driver seed, path); independent of sim.threads.
inline RunOutput run(const ModelSpec& model, const SchemeConfig& scheme, const SimConfig& sim,
                     const BrownianDriver& driver, std::uint64_t path) {
    const auto started = std::chrono::steady_clock::now();
    std::unique_ptr<WorkerTeam> team;
    if (sim.threads > 1) team = std::make_unique<WorkerTeam>(sim.threads);
    Stepper stepper(model, scheme, sim, driver, path, team.get());

    RunOutput out;
    out.moment_sup.assign(sim.record_moments.size(), 0.0);
    const std::size_t stride = std::max<std::size_t>(sim.record_stride, 1);

    auto observe = [&](const ParticleStates& states, std::size_t k) {
        const EmpiricalMeasure mu(states);
        const bool record = k % stride == 0 || k == stepper.total_steps();
        for (std::size_t j = 0; j < sim.record_moments.size(); ++j) {
            const double value = mu.moment(sim.record_moments[j]);
            out.moment_sup[j] = std::max(out.moment_sup[j], value);
            if (record) out.moments.push_back({static_cast<double>(k) * sim.h, sim.record_moments[j], value});
        }
        if (!out.blowup_step &&
            (detail::exceeds(states, sim.blowup_threshold) || mu.moment(2.0) > sim.blowup_threshold)) {
            out.blowup_step = k;
            if (!sim.continue_on_blowup)
                throw SchemeBlowup("blow-up at step " + std::to_string(k) + " (threshold " +
                                       std::to_string(sim.blowup_threshold) + ")",
                                   k);
        }
    };

    observe(stepper.states(), 0);
    ParticleStates last_finite;
    while (!stepper.done()) {
        if (sim.continue_on_blowup) {
            last_finite = stepper.states();
            try {
                stepper.step();
            } catch (const SchemeBlowup& e) {
                out.saturation_step = e.step();
            } catch (const NewtonFailure&) {
                out.saturation_step = stepper.step_index() + 1;
            }
            if (!out.saturation_step && !detail::all_finite(stepper.states()))
                out.saturation_step = stepper.step_index();
            if (out.saturation_step) {
                if (!out.blowup_step) out.blowup_step = out.saturation_step;
                out.final_states = std::move(last_finite);
                out.steps = *out.saturation_step - 1;
                out.newton = stepper.newton();
                out.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
                return out;
            }
        } else {
            stepper.step();
            if (!detail::all_finite(stepper.states()))
                throw SchemeBlowup("non-finite state at step " + std::to_string(stepper.step_index()),
                                   stepper.step_index());
        }
        observe(stepper.states(), stepper.step_index());
    }

    out.final_states = stepper.states();
    out.steps = stepper.step_index();
    out.newton = stepper.newton();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

struct CoupledRun {
    RunOutput coarse;
    RunOutput reference;
};

/// Coarse run at sim.h and reference run at the driver's h_ref, both driven
/// by the same fine Brownian increments.
inline CoupledRun coupled_pair_run(const ModelSpec& model, const SchemeConfig& scheme,
                                   const SimConfig& coarse, const BrownianDriver& driver,
                                   std::uint64_t path) {
    driver.level_for_step(coarse.h);
    SimConfig fine = coarse;
    fine.h = driver.h_ref();
    fine.record_stride = coarse.record_stride << driver.level_for_step(coarse.h);
    return {run(model, scheme, coarse, driver, path), run(model, scheme, fine, driver, path)};
}

/// (1/N) sum |a_j - b_j|^2
inline double mean_square_distance(const ParticleStates& a, const ParticleStates& b) {
    if (a.count() != b.count() || a.dim() != b.dim())
        throw ConfigError("particle arrays have different shapes");
    if (a.empty()) throw ConfigError("particle arrays are empty");
    double s = 0.0;
    const auto fa = a.flat();
    const auto fb = b.flat();
    for (std::size_t k = 0; k < fa.size(); ++k) {
        const double d = fa[k] - fb[k];
        s += d * d;
    }
    return s / static_cast<double>(a.count());
}

/// sqrt((1/N) sum |a_j - b_j|^2)
inline double rmse(const ParticleStates& a, const ParticleStates& b) {
    return std::sqrt(mean_square_distance(a, b));
}

}  // namespace mvsde
