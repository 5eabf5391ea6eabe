#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"

namespace mvsde {

/// Constants of the structural hypotheses on (b, sigma).
///
///   2<x-y, b(x,mu)-b(y,nu)> + |sigma(x,mu)-sigma(y,nu)|^2 <= -K1|x-y|^2 + K2 W2(mu,nu)^2
///   |b(x,mu)-b(y,nu)|^2 <= L1 [(1+|x|^{2kappa-2}+|y|^{2kappa-2})|x-y|^2 + W2(mu,nu)^2]
///   |b(0,delta_0)| <= L2, initial moments of order 2 q0 finite
///   2<x,b(x,mu)> + (q*-1)|sigma(x,mu)|^2 <= -a1|x|^2 + a2 W2(mu)^2 + C
///   |sigma(x,mu)-sigma(y,nu)|^2 <= L_sigma [|x-y|^2 + W2(mu,nu)^2]   (optional)
struct AssumptionConstants {
    double K1 = 0.0;
    double K2 = 0.0;
    double L1 = 0.0;
    double kappa = 1.0;
    double L2 = 0.0;
    double q0 = 20.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double q_star = 0.0;
    double C = 0.0;
    std::optional<double> L_sigma;

    /// Upper limit for L_sigma: (a1 - a2) / (5 (2 q0 - 1)).
    double L_sigma_bound() const { return (a1 - a2) / (5.0 * (2.0 * q0 - 1.0)); }

    /// Throws ConfigError naming the first violated constraint. `poc_mode`
    /// additionally requires K1 > 2 K2.
    void validate(bool poc_mode = false) const {
        auto fail = [](const std::string& what) { throw ConfigError("assumption constants: " + what); };
        if (!(K2 >= 0.0)) fail("K2 must be >= 0");
        if (!(K1 > K2)) fail("K1 must exceed K2");
        if (poc_mode && !(K1 > 2.0 * K2)) fail("K1 must exceed 2 K2 for propagation of chaos");
        if (!(L1 > 0.0)) fail("L1 must be positive");
        if (!(kappa >= 1.0)) fail("kappa must be >= 1");
        if (!(L2 >= 0.0)) fail("L2 must be >= 0");
        if (!(q0 >= 20.0)) fail("q0 must be >= 20");
        if (!(a2 >= 0.0)) fail("a2 must be >= 0");
        if (!(a1 > a2)) fail("a1 must exceed a2");
        if (!(q_star >= 4.0 * q0 - 2.0)) fail("q_star must be >= 4 q0 - 2");
        if (!(C >= 0.0)) fail("C must be >= 0");
        if (L_sigma && !(*L_sigma > 0.0 && *L_sigma < L_sigma_bound()))
            fail("L_sigma must lie in (0, (a1 - a2) / (5 (2 q0 - 1)))");
    }
};

/// Evaluator contract shared by drift, diffusion and drift Jacobian:
/// reads the state `x` (length d) and the measure, writes `out`
/// (d for drift, d*m row-major for diffusion, d*d row-major for the Jacobian).
using CoefficientFn =
    std::function<void(std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out)>;

/// A McKean-Vlasov model dX = b(X, law X) dt + sigma(X, law X) dW with
/// deterministic initial value. Immutable after construction.
struct ModelSpec {
    std::string name;
    std::size_t d = 1;
    std::size_t m = 1;
    AssumptionConstants constants;
    CoefficientFn drift;
    CoefficientFn diffusion;
    /// Optional. When empty, central finite differences of `drift` are used.
    CoefficientFn drift_jacobian;
    std::vector<double> initial_value;
};

namespace detail {

inline void require_finite(std::span<const double> v, const std::string& what) {
    for (std::size_t c = 0; c < v.size(); ++c)
        if (!std::isfinite(v[c]))
            throw EvaluationError(what + ": component " + std::to_string(c) + " is not finite", c);
}

}  // namespace detail

inline void eval_drift(const ModelSpec& model, std::span<const double> x,
                       const EmpiricalMeasure& mu, std::span<double> out) {
    detail::require_finite(x, model.name + " drift input");
    model.drift(x, mu, out);
    detail::require_finite(out, model.name + " drift output");
}

inline void eval_diffusion(const ModelSpec& model, std::span<const double> x,
                           const EmpiricalMeasure& mu, std::span<double> out) {
    detail::require_finite(x, model.name + " diffusion input");
    model.diffusion(x, mu, out);
    detail::require_finite(out, model.name + " diffusion output");
}

/// d x d Jacobian of the drift in x with the measure frozen.
inline void eval_drift_jacobian(const ModelSpec& model, std::span<const double> x,
                                const EmpiricalMeasure& mu, std::span<double> out) {
    detail::require_finite(x, model.name + " jacobian input");
    if (model.drift_jacobian) {
        model.drift_jacobian(x, mu, out);
    } else {
        const std::size_t d = model.d;
        std::vector<double> probe(x.begin(), x.end());
        std::vector<double> fp(d), fm(d);
        for (std::size_t c = 0; c < d; ++c) {
            const double step =
                std::sqrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(x[c]));
            probe[c] = x[c] + step;
            model.drift(probe, mu, fp);
            probe[c] = x[c] - step;
            model.drift(probe, mu, fm);
            probe[c] = x[c];
            for (std::size_t r = 0; r < d; ++r) out[r * d + c] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    detail::require_finite(out, model.name + " jacobian output");
}

inline std::vector<double> drift(const ModelSpec& model, std::span<const double> x,
                                 const EmpiricalMeasure& mu) {
    std::vector<double> out(model.d);
    eval_drift(model, x, mu, out);
    return out;
}

inline std::vector<double> diffusion(const ModelSpec& model, std::span<const double> x,
                                     const EmpiricalMeasure& mu) {
    std::vector<double> out(model.d * model.m);
    eval_diffusion(model, x, mu, out);
    return out;
}

inline std::vector<double> drift_jacobian(const ModelSpec& model, std::span<const double> x,
                                          const EmpiricalMeasure& mu) {
    std::vector<double> out(model.d * model.d);
    eval_drift_jacobian(model, x, mu, out);
    return out;
}

/// b(x, mu) = 5x(-2 - |x|) + E|X|/4,  sigma(x, mu) = x/8,  X0 = 1.
inline ModelSpec make_example_4_1() {
    ModelSpec model;
    model.name = "example-4.1";
    model.d = 1;
    model.m = 1;
    model.constants = AssumptionConstants{
        .K1 = 303.0 / 16.0,
        .K2 = 1.0,
        .L1 = 600.0,
        .kappa = 2.0,
        .L2 = 1.0,
        .q0 = 40.0,
        .a1 = 12.0,
        .a2 = 4.0,
        .q_star = 512.0,
        .C = 0.0,
        .L_sigma = 1.0 / 50.0,
    };
    model.drift = [](std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out) {
        out[0] = 5.0 * x[0] * (-2.0 - std::abs(x[0])) + 0.25 * mu.mean_abs();
    };
    model.diffusion = [](std::span<const double> x, const EmpiricalMeasure&, std::span<double> out) {
        out[0] = x[0] / 8.0;
    };
    model.drift_jacobian = [](std::span<const double> x, const EmpiricalMeasure&,
                              std::span<double> out) { out[0] = -10.0 - 10.0 * std::abs(x[0]); };
    model.initial_value = {1.0};
    return model;
}

/// b(x, mu) = -20x^3 - 20x|x| - 5x + sin(x)/4 + E|X|/10,
/// sigma(x, mu) = x/10 + E|X|/20,  X0 = 1.
inline ModelSpec make_example_4_2() {
    ModelSpec model;
    model.name = "example-4.2";
    model.d = 1;
    model.m = 1;
    model.constants = AssumptionConstants{
        .K1 = 9.0,
        .K2 = 3.0 / 20.0,
        .L1 = 30000.0,
        .kappa = 3.0,
        .L2 = 1.0,
        .q0 = 40.0,
        .a1 = 651.0 / 100.0,
        .a2 = 177.0 / 200.0,
        .q_star = 158.0,
        // Dissipativity with C = 0 fails by ~5e-7 for |x|, E|X| ~ 1e-3.
        .C = 1e-6,
        .L_sigma = 1.0 / 80.0,
    };
    model.drift = [](std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out) {
        const double v = x[0];
        out[0] = -20.0 * v * v * v - 20.0 * v * std::abs(v) - 5.0 * v + 0.25 * std::sin(v) +
                 0.1 * mu.mean_abs();
    };
    model.diffusion = [](std::span<const double> x, const EmpiricalMeasure& mu,
                         std::span<double> out) { out[0] = 0.1 * x[0] + 0.05 * mu.mean_abs(); };
    model.drift_jacobian = [](std::span<const double> x, const EmpiricalMeasure&,
                              std::span<double> out) {
        const double v = x[0];
        out[0] = -60.0 * v * v - 40.0 * std::abs(v) - 5.0 + 0.25 * std::cos(v);
    };
    model.initial_value = {1.0};
    return model;
}

inline const std::vector<std::string>& builtin_model_names() {
    static const std::vector<std::string> names{"example-4.1", "example-4.2"};
    return names;
}

inline ModelSpec make_model(const std::string& name) {
    if (name == "example-4.1") return make_example_4_1();
    if (name == "example-4.2") return make_example_4_2();
    throw ConfigError("unknown model '" + name + "' (expected example-4.1 or example-4.2)");
}

/// Largest admissible step for moment order 2p:
/// min{ 1/(2(K1-K2)), 1, 1/(p(a1-a2)) }.
inline double max_step(const ModelSpec& model, double p) {
    if (!(p >= 1.0)) throw ConfigError("max_step: p must be >= 1");
    const auto& k = model.constants;
    const double h1 = std::min(1.0 / (2.0 * (k.K1 - k.K2)), 1.0);
    return std::min(h1, 1.0 / (p * (k.a1 - k.a2)));
}

/// Outcome of one sampled inequality.
struct InequalityCheck {
    std::string name;
    /// min over samples of (rhs - lhs); negative means violated.
    double worst_slack = INFINITY;
    bool passed = true;
    std::vector<double> witness_x;
    std::vector<double> witness_y;
    std::vector<double> witness_mu;
    std::vector<double> witness_nu;
};

struct AssumptionReport {
    std::string model;
    std::size_t samples = 0;
    std::vector<InequalityCheck> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
};

struct SamplingOptions {
    double box = 10.0;
    std::size_t max_atoms = 8;
    /// Half of the samples are shrunk by 10^-u, u ~ U[0, decades], to probe
    /// the neighbourhood of the origin.
    double near_origin_decades = 4.0;
    /// Relative tolerance for floating point rounding when an inequality is tight.
    double rel_tol = 1e-12;
};

/// Randomized spot-check of the structural inequalities. A pass is evidence,
/// not proof; a failure carries the worst witness found.
inline AssumptionReport check_assumptions(const ModelSpec& model, std::size_t sample_count,
                                          std::uint64_t seed, const SamplingOptions& opts = {}) {
    if (sample_count == 0) throw ConfigError("check_assumptions: sample_count must be >= 1");
    const auto& k = model.constants;
    const std::size_t d = model.d;
    const std::size_t m = model.m;

    AssumptionReport report;
    report.model = model.name;
    report.samples = sample_count;
    InequalityCheck monotone;
    monotone.name = "contractive monotonicity";
    InequalityCheck lipschitz;
    lipschitz.name = "polynomial Lipschitz drift";
    InequalityCheck dissipative;
    dissipative.name = "dissipativity";
    InequalityCheck sigma_lip;
    sigma_lip.name = "Lipschitz diffusion";

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> decades(0.0, opts.near_origin_decades);
    std::uniform_int_distribution<std::size_t> atom_count(1, opts.max_atoms);

    std::vector<double> x(d), y(d), bx(d), by(d), sx(d * m), sy(d * m), diff(d);
    auto record = [&](InequalityCheck& chk, double lhs, double rhs, double scale,
                      const std::vector<double>& mu_atoms, const std::vector<double>& nu_atoms) {
        const double slack = rhs - lhs;
        const bool ok = slack >= -opts.rel_tol * scale;
        if (slack < chk.worst_slack) {
            chk.worst_slack = slack;
            chk.witness_x = x;
            chk.witness_y = y;
            chk.witness_mu = mu_atoms;
            chk.witness_nu = nu_atoms;
        }
        if (!ok) chk.passed = false;
    };

    for (std::size_t s = 0; s < sample_count; ++s) {
        const double scale = opts.box * ((s % 2 == 1) ? std::pow(10.0, -decades(rng)) : 1.0);
        for (auto& v : x) v = scale * unit(rng);
        for (auto& v : y) v = scale * unit(rng);
        const std::size_t atoms = atom_count(rng);
        std::vector<double> mu_atoms(atoms * d), nu_atoms(atoms * d);
        for (auto& v : mu_atoms) v = scale * unit(rng);
        for (auto& v : nu_atoms) v = scale * unit(rng);
        const EmpiricalMeasure mu(mu_atoms, d), nu(nu_atoms, d);

        const double w2sq = d == 1 ? std::pow(wasserstein2_1d(mu, nu), 2)
                                   : detail::min_permutation_cost(mu, nu, 2.0);
        eval_drift(model, x, mu, bx);
        eval_drift(model, y, nu, by);
        eval_diffusion(model, x, mu, sx);
        eval_diffusion(model, y, nu, sy);

        double inner = 0.0, dx2 = 0.0, db2 = 0.0, ds2 = 0.0, xb = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            diff[c] = x[c] - y[c];
            inner += diff[c] * (bx[c] - by[c]);
            dx2 += diff[c] * diff[c];
            db2 += (bx[c] - by[c]) * (bx[c] - by[c]);
            xb += x[c] * bx[c];
        }
        double sx2 = 0.0;
        for (std::size_t c = 0; c < d * m; ++c) {
            ds2 += (sx[c] - sy[c]) * (sx[c] - sy[c]);
            sx2 += sx[c] * sx[c];
        }
        const double xn2 = detail::squared_norm(x);
        const double yn2 = detail::squared_norm(y);

        {
            const double lhs = 2.0 * inner + ds2;
            const double rhs = -k.K1 * dx2 + k.K2 * w2sq;
            record(monotone, lhs, rhs, 2.0 * std::abs(inner) + ds2 + k.K1 * dx2 + k.K2 * w2sq,
                   mu_atoms, nu_atoms);
        }
        {
            const double growth =
                1.0 + std::pow(xn2, k.kappa - 1.0) + std::pow(yn2, k.kappa - 1.0);
            const double rhs = k.L1 * (growth * dx2 + w2sq);
            record(lipschitz, db2, rhs, db2 + rhs, mu_atoms, nu_atoms);
        }
        {
            const double lhs = 2.0 * xb + (k.q_star - 1.0) * sx2;
            const double w2mu = mu.moment(2.0);
            const double rhs = -k.a1 * xn2 + k.a2 * w2mu + k.C;
            record(dissipative, lhs, rhs,
                   2.0 * std::abs(xb) + (k.q_star - 1.0) * sx2 + k.a1 * xn2 + k.a2 * w2mu + k.C,
                   mu_atoms, nu_atoms);
        }
        if (k.L_sigma) {
            const double rhs = *k.L_sigma * (dx2 + w2sq);
            record(sigma_lip, ds2, rhs, ds2 + rhs, mu_atoms, nu_atoms);
        }
    }

    report.checks = {monotone, lipschitz, dissipative};
    if (k.L_sigma) report.checks.push_back(sigma_lip);

    // |b(0, delta_0)| <= L2
    {
        std::vector<double> origin(d, 0.0), b0(d);
        const EmpiricalMeasure dirac(origin, d);
        eval_drift(model, origin, dirac, b0);
        InequalityCheck origin_bound;
        origin_bound.name = "drift at origin";
        origin_bound.worst_slack = k.L2 - std::sqrt(detail::squared_norm(b0));
        origin_bound.passed = origin_bound.worst_slack >= 0.0;
        report.checks.push_back(origin_bound);
    }
    return report;
}

inline void print_constants(std::ostream& os, const ModelSpec& model) {
    const auto& k = model.constants;
    auto row = [&os](const char* name, double v) { os << "  " << name << " = " << v << '\n'; };
    os << "model " << model.name << " (d = " << model.d << ", m = " << model.m << ")\n";
    row("K1", k.K1);
    row("K2", k.K2);
    row("L1", k.L1);
    row("kappa", k.kappa);
    row("L2", k.L2);
    row("q0", k.q0);
    row("a1", k.a1);
    row("a2", k.a2);
    row("q*", k.q_star);
    row("C", k.C);
    if (k.L_sigma) {
        row("L_sigma", *k.L_sigma);
        row("L_sigma bound", k.L_sigma_bound());
    }
    row("h_max (p = 1)", max_step(model, 1.0));
}

inline void print_report(std::ostream& os, const AssumptionReport& report) {
    os << "assumption check for " << report.model << " over " << report.samples << " samples\n";
    for (const auto& c : report.checks) {
        os << "  " << (c.passed ? "PASS " : "FAIL ") << c.name << "  worst slack " << c.worst_slack;
        if (!c.passed && !c.witness_x.empty()) {
            os << "  witness x =";
            for (double v : c.witness_x) os << ' ' << v;
            os << ", y =";
            for (double v : c.witness_y) os << ' ' << v;
        }
        os << '\n';
    }
    os << (report.passed() ? "all checks passed\n" : "some checks FAILED\n");
}

}  // namespace mvsde
