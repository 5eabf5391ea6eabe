// Acceptance checks, one line per criterion:
//
//   acceptance [--criterion N]...
//
// Prints "criterion N: PASS|FAIL <details>" and exits 1 if any selected
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mvsde/mvsde.hpp"

namespace {

namespace ex = mvsde::experiments;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::size_t hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const ex::ResultRow* find_row(const std::vector<ex::ResultRow>& rows, const std::string& scheme,
                              const std::string& metric) {
    for (const auto& r : rows)
        if (r.scheme == scheme && r.metric == metric) return &r;
    return nullptr;
}

// 1, 2: fitted strong rate of each scheme against the reference solution.
Verdict convergence(const std::string& model, double limit_seconds) {
    auto cfg = ex::defaults_for("converge");
    cfg.model = model;
    cfg.threads = hardware_threads();
    const auto start = std::chrono::steady_clock::now();
    const auto out = ex::converge_cmd(cfg);
    const double elapsed = seconds_since(start);

    Verdict v{!out.simulation_failed && elapsed <= limit_seconds, ""};
    for (const auto& rate : out.rates) {
        if (!rate.fit) {
            v.pass = false;
            v.detail += rate.scheme + " rate absent; ";
            continue;
        }
        const double slope = rate.fit->slope;
        if (!(slope >= 0.35 && slope <= 0.65)) v.pass = false;
        v.detail += fmt("%s rate %.4f; ", rate.scheme.c_str(), slope);
    }
    v.detail += "rmse";
    for (const auto& r : out.rows)
        if (r.metric == "rmse") v.detail += fmt(" %s(2^%d)=%.3g", r.scheme.c_str(), static_cast<int>(std::log2(r.h)), r.value);
    v.detail += fmt("; runtime %.1f s (limit %.0f s); target [0.35, 0.65]", elapsed, limit_seconds);
    return v;
}

// 3: running sup of the 2nd and 4th empirical moments.
Verdict moment_bounds() {
    auto cfg = ex::defaults_for("moments");
    cfg.model = "example-4.1";
    cfg.threads = hardware_threads();
    const auto out = ex::moments_cmd(cfg);
    Verdict v{!out.simulation_failed, ""};
    for (const std::string scheme : {"pem", "bem"})
        for (const std::string metric : {"sup_moment2", "sup_moment4"}) {
            const auto* row = find_row(out.rows, scheme, metric);
            const bool ok = row && std::isfinite(row->value) && row->value < 1e3;
            v.pass = v.pass && ok;
            v.detail += fmt("%s %s=%.6g; ", scheme.c_str(), metric.c_str(), row ? row->value : NAN);
        }
    if (out.simulation_failed) v.detail += "a run hit a non-finite or blown-up state";
    return v;
}

// 4: particle corruption contrast at h = 1/4 from X0 = 10.
Verdict corruption() {
    auto cfg = ex::defaults_for("corrupt");
    cfg.threads = hardware_threads();
    const auto out = ex::corrupt_cmd(cfg);
    Verdict v{true, ""};
    const auto* em = find_row(out.rows, "em", "blowup_step");
    if (!em || em->value > 50) v.pass = false;
    v.detail += fmt("em blowup step %g; ", em ? em->value : NAN);
    for (const std::string scheme : {"pem", "bem"}) {
        const auto* sup = find_row(out.rows, scheme, "sup_moment2_evolved");
        const auto* blow = find_row(out.rows, scheme, "blowup_step");
        const auto* steps = find_row(out.rows, scheme, "steps_completed");
        const bool ok = sup && sup->value < 1e2 && !blow && steps && steps->value == 40.0;
        v.pass = v.pass && ok;
        v.detail += fmt("%s sup moment2 (k>=1) %.6g%s; ", scheme.c_str(), sup ? sup->value : NAN,
                        blow ? " BLOWUP" : "");
    }
    const auto* res = find_row(out.rows, "bem", "newton_max_residual");
    if (!res || !(res->value <= cfg.newton_tol)) v.pass = false;
    v.detail += fmt("bem newton max residual %.3g", res ? res->value : NAN);
    return v;
}

// 5: synchronous coupling from X0 = 1 and X0 = 5.
Verdict contractivity() {
    const auto model = mvsde::make_example_4_1();
    const double h = std::ldexp(1.0, -8);
    const mvsde::BrownianDriver driver(2024, 8);
    Verdict v{true, ""};
    for (auto kind : {mvsde::SchemeKind::PEM, mvsde::SchemeKind::BEM}) {
        mvsde::SchemeConfig sc;
        sc.variant = kind;
        mvsde::SimConfig a_cfg;
        a_cfg.N = 500;
        a_cfg.h = h;
        a_cfg.T = 1.0;
        auto b_cfg = a_cfg;
        a_cfg.x0 = std::vector<double>{1.0};
        b_cfg.x0 = std::vector<double>{5.0};
        mvsde::Stepper a(model, sc, a_cfg, driver, 0), b(model, sc, b_cfg, driver, 0);
        const double initial = mvsde::mean_square_distance(a.states(), b.states());
        double prev = initial, worst_ratio = 0.0;
        while (!a.done()) {
            a.step();
            b.step();
            const double d = mvsde::mean_square_distance(a.states(), b.states());
            if (a.step_index() > 10) worst_ratio = std::max(worst_ratio, prev > 0.0 ? d / prev : 0.0);
            prev = d;
        }
        const double rel = prev / initial;
        const bool ok = rel < 1e-3 && worst_ratio <= 1.0;
        v.pass = v.pass && ok;
        v.detail += fmt("%s msd(T)/msd(0)=%.3g max step ratio after 10 steps=%.6f; ",
                        mvsde::scheme_name(kind).c_str(), rel, worst_ratio);
    }
    return v;
}

// 6: sorted-coupling W2 against the permutation oracle and the coupling bound.
Verdict wasserstein() {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> size(1, 6);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const int n = size(rng);
        std::vector<double> a(n), b(n);
        for (auto& x : a) x = u(rng);
        for (auto& x : b) x = u(rng);
        const mvsde::EmpiricalMeasure mu(a, 1), nu(b, 1);
        worst = std::max(worst, std::abs(mvsde::wasserstein2_1d(mu, nu) - mvsde::wasserstein2_bruteforce(mu, nu)));
    }
    // W2(mu_a, mu_b) <= rmse(a, b): the sorted pairing is never costlier
    // than the index pairing. Compared up to the rounding of two sums.
    std::uniform_int_distribution<int> big(1, 1000);
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = static_cast<std::size_t>(big(rng));
        mvsde::ParticleStates a(n, 1), b(n, 1);
        for (auto& x : a.flat()) x = u(rng);
        for (auto& x : b.flat()) x = u(rng);
        const double w2 = mvsde::wasserstein2_1d(mvsde::EmpiricalMeasure(a), mvsde::EmpiricalMeasure(b));
        if (w2 > mvsde::rmse(a, b) * (1.0 + 1e-14)) ++violations;
    }
    return {worst <= 1e-12 && violations == 0,
            fmt("max |sorted - brute force| = %.3g over 1000 instances; coupling-bound violations %d/1000", worst,
                violations)};
}

// 7: projection invariants on random (x, y, h, kappa).
Verdict projection() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coord(-100.0, 100.0), expo(-16.0, 0.0), kap(1.0, 5.0);
    std::uniform_int_distribution<int> dim(1, 4);
    // Relative slack of a few units in the last place for the computed norms.
    constexpr double eps = 8 * std::numeric_limits<double>::epsilon();
    int bounded = 0, lipschitz = 0, shrinking = 0;
    for (int t = 0; t < 10000; ++t) {
        const std::size_t d = static_cast<std::size_t>(dim(rng));
        const double h = std::exp2(expo(rng)), kappa = kap(rng);
        std::vector<double> x(d), y(d), diff(d), pdiff(d);
        const double scale = std::pow(10.0, -3.0 * std::uniform_real_distribution<double>(0, 1)(rng));
        for (auto& c : x) c = scale * coord(rng);
        for (auto& c : y) c = scale * coord(rng);
        const auto px = mvsde::project(x, h, kappa), py = mvsde::project(y, h, kappa);
        for (std::size_t c = 0; c < d; ++c) diff[c] = x[c] - y[c], pdiff[c] = px[c] - py[c];
        const double radius = std::pow(h, -1.0 / (2.0 * (kappa + 2.0)));
        using mvsde::detail::norm;
        bounded += norm(px) > radius * (1 + eps);
        lipschitz += norm(pdiff) > norm(diff) * (1 + eps);
        shrinking += norm(px) > norm(x) * (1 + eps);
    }
    return {bounded + lipschitz + shrinking == 0,
            fmt("violations over 10^4 triples: radius %d, Lipschitz %d, |psi(x)| <= |x| %d", bounded, lipschitz,
                shrinking)};
}

// 8: Newton quality in a full Ex4.2 BEM run, plus the closed-form root.
Verdict newton_quality() {
    const auto model = mvsde::make_example_4_2();
    mvsde::SchemeConfig sc;
    sc.variant = mvsde::SchemeKind::BEM;
    mvsde::SimConfig sim;
    sim.N = 500;
    sim.h = std::ldexp(1.0, -6);
    sim.T = 4.0;
    sim.threads = hardware_threads();
    const mvsde::BrownianDriver driver(2024, 6);
    Verdict v{true, ""};
    try {
        const auto out = mvsde::run(model, sc, sim, driver, 0);
        const auto& nw = out.newton;
        v.pass = nw.solves == 500u * 256u && nw.max_residual <= 1e-12 && nw.median_iterations() <= 4.0;
        v.detail = fmt("%zu solves, max residual %.3g, median iterations %g, max %zu; ", nw.solves, nw.max_residual,
                       nw.median_iterations(), nw.max_iterations);
    } catch (const mvsde::Error& e) {
        v.pass = false;
        v.detail = std::string("run failed: ") + e.what() + "; ";
    }

    // One implicit Ex4.1 step, y = 1, h = 0.01, dW = 0, E|X| = 1:
    // 0.05 z^2 + 1.1 z - 1.0025 = 0.
    const auto m1 = mvsde::make_example_4_1();
    mvsde::StepWorkspace ws(mvsde::ParticleStates(1, 1, 1.0), 1);
    mvsde::bem_step(ws, m1, 0.01, sc);
    const double z = ws.next.row(0)[0];
    const double closed_form = (-1.1 + std::sqrt(1.4105)) / 0.1;
    const bool root_ok = std::abs(z - closed_form) <= 1e-6;
    v.pass = v.pass && root_ok;
    v.detail += fmt("quadratic root %.10f vs closed form %.10f (|diff| %.2g; quoted decimal 0.876424 differs from "
                    "the closed form by %.2g)",
                    z, closed_form, std::abs(z - closed_form), std::abs(closed_form - 0.876424));
    return v;
}

// 9: byte-identical CSV across thread counts for every command.
Verdict determinism() {
    std::vector<ex::StudyConfig> studies;
    {
        auto c = ex::defaults_for("converge");
        c.model = "example-4.2";
        c.n = {200};
        c.T = 1.0;
        c.replicas = 2;
        studies.push_back(c);
    }
    {
        auto c = ex::defaults_for("moments");
        c.T = 20.0;
        studies.push_back(c);
    }
    studies.push_back(ex::defaults_for("chaos"));
    studies.push_back(ex::defaults_for("corrupt"));
    {
        auto c = ex::defaults_for("validate");
        c.model = "example-4.2";
        c.samples = 2000;
        studies.push_back(c);
    }

    Verdict v{true, ""};
    for (const auto& base : studies) {
        std::vector<std::string> csv;
        for (std::size_t threads : {1, 4, 8}) {
            auto cfg = base;
            cfg.threads = threads;
            std::vector<ex::ResultRow> rows;
            if (cfg.command == "converge") rows = ex::converge_cmd(cfg).rows;
            if (cfg.command == "moments") rows = ex::moments_cmd(cfg).rows;
            if (cfg.command == "chaos") rows = ex::chaos_cmd(cfg).rows;
            if (cfg.command == "corrupt") rows = ex::corrupt_cmd(cfg).rows;
            if (cfg.command == "validate") rows = ex::validate_cmd(cfg).rows;
            csv.push_back(ex::to_csv(rows));
        }
        const bool same = csv[0] == csv[1] && csv[0] == csv[2];
        v.pass = v.pass && same;
        v.detail += fmt("%s %s (%zu bytes); ", base.command.c_str(), same ? "identical" : "DIFFERS", csv[0].size());
    }
    return v;
}

// 10: propagation-of-chaos trend against an N_max = 2048 proxy.
Verdict chaos_trend() {
    auto cfg = ex::defaults_for("chaos");
    cfg.model = "example-4.1";
    cfg.threads = hardware_threads();
    const auto out = ex::chaos_cmd(cfg);
    std::vector<double> msd;
    std::string detail = "msd";
    for (const auto& r : out.rows)
        if (r.metric == "msd") {
            msd.push_back(r.value);
            detail += fmt(" N=%zu:%.4g", r.N, r.value);
        }
    bool decreasing = !out.simulation_failed && msd.size() == cfg.n.size();
    for (std::size_t k = 1; k < msd.size(); ++k) decreasing = decreasing && msd[k] < msd[k - 1];
    return {decreasing, detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
        {1, [] { return convergence("example-4.1", 300.0); }},
        {2, [] { return convergence("example-4.2", 600.0); }},
        {3, moment_bounds},
        {4, corruption},
        {5, contractivity},
        {6, wasserstein},
        {7, projection},
        {8, newton_quality},
        {9, determinism},
        {10, chaos_trend},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            selected.insert(std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: acceptance [--criterion N]...\n");
            return 2;
        }
    }

    bool all = true;
    for (const auto& [id, check] : criteria) {
        if (!selected.empty() && !selected.count(id)) continue;
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        std::printf("criterion %d: %s %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
        all = all && v.pass;
    }
    return all ? 0 : 1;
}
