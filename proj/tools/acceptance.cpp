// Acceptance run: one PASS/FAIL line per criterion with every tolerance fixed here.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "caplab/capacity.hpp"
#include "caplab/chain.hpp"
#include "caplab/density.hpp"
#include "caplab/parallel.hpp"
#include "caplab/potentials.hpp"
#include "caplab/recipes.hpp"
#include "caplab/stats.hpp"
#include "fixtures.hpp"

using namespace caplab;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
};

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double rel(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

unsigned g_jobs = 1;

Outcome recipe(CaseResult r) {
    std::string detail;
    for (const auto& c : r.checks)
        if (!c.passed) detail += (detail.empty() ? "failed: " : "; ") + c.name + (c.detail.empty() ? "" : " (" + c.detail + ")");
    if (detail.empty()) detail = std::to_string(r.checks.size()) + " checks";
    return {r.passed(), detail};
}

CapacityProblem make(CapacityKind kind, std::shared_ptr<const Space> X, PointSet F, std::optional<PointSet> omega,
                     double beta, double p) {
    CapacityProblem P;
    P.kind = kind;
    P.space = std::move(X);
    P.F = std::move(F);
    P.omega = std::move(omega);
    P.beta = beta;
    P.p = p;
    return P;
}

// 1: 25 instances per kind, relative tolerance 1e-6, total under 120 s.
Outcome oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int matched = 0, total = 0;
    double worst = 0;
    std::string first_miss;
    const CapacityKind kinds[] = {CapacityKind::riesz, CapacityKind::hajlasz, CapacityKind::variational,
                                  CapacityKind::content};
    for (int trial = 0; trial < 100; ++trial) {
        const auto kind = kinds[trial % 4];
        const Index n = kind == CapacityKind::content ? 2 + (trial / 4) % 7 : 2 + (trial / 4) % 4;
        auto X = fixtures::random_small_space(rng, n, trial % 3 == 0);
        // F is a random nonempty subset, Omega adds random points but never all of X
        std::vector<Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const Index fsize = 1 + Index(U(rng) * double(n - 1));
        const Index osize = fsize + Index(U(rng) * double(n - fsize));
        PointSet F(std::vector<Index>(perm.begin(), perm.begin() + fsize));
        PointSet omega(std::vector<Index>(perm.begin(), perm.begin() + std::min(osize, n - 1)));
        const double p = trial % 3 == 0 ? 1.5 : (trial % 3 == 1 ? 2.0 : 3.0);
        const double beta = trial % 2 ? 0.5 : 1.0;
        auto P = make(kind, X, F, std::nullopt, kind == CapacityKind::variational ? 1.0 : beta, p);
        if (kind == CapacityKind::hajlasz || kind == CapacityKind::variational) P.omega = omega;
        if (kind == CapacityKind::content) {
            P.q = 0.5 + 1.5 * U(rng);
            P.rho = (0.2 + U(rng)) * X->diameter();
        }
        const auto s = solve_capacity(P);
        const auto o = brute_force_capacity(P);
        const double gap = s.value.infinite || o.value.infinite
                               ? (s.value.infinite == o.value.infinite ? 0.0 : 1.0)
                               : rel(s.value.value, o.value.value);
        worst = std::max(worst, gap);
        ++total;
        if (gap <= 1e-6) ++matched;
        else if (first_miss.empty()) first_miss = "trial " + std::to_string(trial) + " " + to_string(kind);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {matched == total && secs < 120,
            std::to_string(matched) + "/" + std::to_string(total) + " within 1e-6, worst " + num(worst) +
                (first_miss.empty() ? "" : ", first miss " + first_miss)};
}

// 2: tolerance 1e-6 on solver and oracle alike.
Outcome pinned_values() {
    auto two = fixtures::two_point();
    auto p3 = fixtures::path3();
    using fixtures::set;
    struct Pin {
        const char* name;
        CapacityProblem P;
        double value;
    };
    std::vector<Pin> pins{
        {"two-point hajlasz", make(CapacityKind::hajlasz, two, set({0}), set({0}), 1, 2), 0.5},
        {"two-point riesz", make(CapacityKind::riesz, two, set({0}), std::nullopt, 1, 2), 1.0},
        {"two-point variational", make(CapacityKind::variational, two, set({0}), set({0}), 1, 2), 4.0},
        {"path3 hajlasz", make(CapacityKind::hajlasz, p3, set({0}), set({0, 1}), 1, 2), 0.1875},
        {"path3 riesz", make(CapacityKind::riesz, p3, set({0}), std::nullopt, 1, 2), 0.5},
        {"path3 variational", make(CapacityKind::variational, p3, set({0}), set({0, 1}), 1, 2), 0.8},
    };
    std::string detail;
    bool ok = true;
    for (const auto& pin : pins) {
        const double o = brute_force_capacity(pin.P).value.value;
        const double s = solve_capacity(pin.P).value.value;
        const bool good = std::abs(o - pin.value) <= 1e-6 * pin.value && std::abs(s - pin.value) <= 1e-6 * pin.value;
        ok = ok && good;
        if (!good) detail += std::string(detail.empty() ? "" : "; ") + pin.name + " oracle " + num(o) + " solver " + num(s);
    }
    return {ok, ok ? "6 pinned values" : detail};
}

PointSet left_half(const Space& X) {
    return PointSet::where(X.size(), [&](Index i) { return (*X.coords())(i, 0) <= 0.5; });
}

ComparabilityReport riesz_hajlasz_scan(double beta) {
    auto X = std::make_shared<const Space>(gen_grid<double>(17, 2));
    ScanOptions so;
    so.max_centers = 4;
    so.jobs = g_jobs;
    return comparability_scan(X, left_half(*X), ScanParams{beta, 2.0, 1.0}, {0.0625, 0.125, 0.25}, so,
                              ComparisonPair::riesz_hajlasz);
}

// 5: ratio floor 0.01 over at least 6 samples per beta, under 600 s.
Outcome one_sided() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (double beta : {0.5, 1.0}) {
        const auto rep = riesz_hajlasz_scan(beta);
        ok = ok && rep.samples.size() >= 6 && rep.band_min > 0.01;
        detail += (detail.empty() ? "" : ", ") + std::string("beta ") + num(beta) + ": min " + num(rep.band_min) +
                  " over " + std::to_string(rep.samples.size());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {ok && secs < 600, detail};
}

// 6: band spread at most 20.
Outcome two_sided() {
    const auto rep = riesz_hajlasz_scan(0.5);
    return {rep.band_spread <= 20 && rep.two_sided,
            "spread " + num(rep.band_spread) + ", sigma fit " + (rep.sigma_fit ? num(*rep.sigma_fit) : "none")};
}

// 7: finite and within a factor 2.
Outcome kernel_estimate() {
    const auto a = kernel_estimate_measure(gen_grid<double>(9, 2), 0.5, 1.0);
    const auto b = kernel_estimate_measure(gen_grid<double>(17, 2), 0.5, 1.0);
    const double f = std::max(a.c_K_observed, b.c_K_observed) / std::min(a.c_K_observed, b.c_K_observed);
    return {std::isfinite(a.c_K_observed) && std::isfinite(b.c_K_observed) && !a.vacuous && !b.vacuous && f <= 2,
            "c_K " + num(a.c_K_observed) + " vs " + num(b.c_K_observed) + ", factor " + num(f)};
}

// 8: max/min of C1 at most 10 over 20 fields.
Outcome gradient_of_potential() {
    const Space X = gen_grid<double>(17, 1);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    bool grad_ok = true;
    for (int t = 0; t < 20; ++t) {
        Vec<double> f(X.size());
        for (Index i = 0; i < X.size(); ++i) f(i) = U(rng) < 0.3 ? 0.0 : U(rng);
        const auto rep = check_gradient_of_potential(X, f, 0.5, 1.0);
        lo = std::min(lo, rep.C1_observed);
        hi = std::max(hi, rep.C1_observed);
        const Vec<double> g = rep.C1_observed * maximal_function(X, f);
        grad_ok = grad_ok && verify_hajlasz_gradient<double>(X, riesz_potential(X, f, 0.5), g, 0.5).ok;
    }
    return {grad_ok && hi / lo <= 10, "C1 in [" + num(lo) + ", " + num(hi) + "]"};
}

// 9: zero violations.
Outcome poincare_suite() {
    const Space X = gen_grid<double>(17, 2);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double betas[] = {0.5, 1.0}, ps[] = {1.5, 2.0, 3.0};
    std::vector<Vec<double>> us;
    for (int t = 0; t < 100; ++t) {
        Vec<double> u(X.size());
        const int shape = t % 3;
        for (Index i = 0; i < X.size(); ++i) {
            const double x = (*X.coords())(i, 0), y = (*X.coords())(i, 1);
            u(i) = shape == 0 ? U(rng) : shape == 1 ? std::sin(6 * x + 10 * U(rng) * y) : (x + y < U(rng) * 2 ? 1.0 : 0.0);
        }
        us.push_back(u);
    }
    std::vector<char> ok(us.size(), 0);
    std::vector<Index> balls(us.size(), 0);
    parallel_for(us.size(), g_jobs, [&](std::size_t t) {
        const double beta = betas[t % 2], p = ps[t % 3];
        const auto rep = poincare_check(X, us[t], canonical_gradient(X, us[t], beta), beta, p);
        ok[t] = rep.ok;
        balls[t] = rep.balls_checked;
    });
    Index bad = 0, checked = 0;
    for (std::size_t t = 0; t < us.size(); ++t) {
        bad += !ok[t];
        checked += balls[t];
    }
    return {bad == 0, std::to_string(bad) + " violating pairs over " + std::to_string(checked) + " balls"};
}

// 10: identity to 1e-9 relative; unrestricted never above restricted.
Outcome content_identities() {
    auto X = std::make_shared<const Space>(gen_grid<double>(17, 2));
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<Index> pick(0, X->size() - 1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0;
    bool order_ok = true;
    for (int t = 0; t < 20; ++t) {
        const Index x = pick(rng);
        const double r = X->mesh() * (1.5 + 4 * U(rng));
        const double q = 0.5 + 1.5 * U(rng);
        CapacityProblem P;
        P.kind = CapacityKind::content;
        P.space = X;
        P.F = ball_members(*X, Ball<double>{x, r, false});
        P.q = q;
        P.rho = r;
        const double content = solve_hausdorff_content(P).value.value;
        const double expected = std::pow(r, -q) * X->ball_mass(x, r);
        worst = std::max(worst, rel(content, expected));
        const auto c = content_restriction_check(X, P.F, q, r);
        order_ok = order_ok && c.unrestricted <= c.restricted;
    }
    return {worst <= 1e-9 && order_ok, "worst relative gap " + num(worst)};
}

// 11: slack -1e-6 and reverse ratio at most 100.
Outcome four_p_comparison() {
    struct Case {
        std::string name;
        CapacityProblem P;
    };
    std::vector<Case> corpus;
    auto add = [&](std::string name, std::shared_ptr<const Space> X, PointSet F, PointSet omega, double p) {
        corpus.push_back({std::move(name), make(CapacityKind::hajlasz, X, std::move(F), std::move(omega), 1.0, p)});
    };
    for (double p : {1.5, 2.0, 3.0}) {
        auto g1 = std::make_shared<const Space>(gen_grid<double>(17, 1));
        add("grid17x1", g1, ball_members(*g1, Ball<double>{8, 0.125, true}), ball_members(*g1, Ball<double>{8, 0.25, false}), p);
        auto g2 = std::make_shared<const Space>(gen_grid<double>(9, 2));
        add("grid9x2", g2, ball_members(*g2, Ball<double>{40, 0.125, true}), ball_members(*g2, Ball<double>{40, 0.375, false}), p);
        auto p3 = fixtures::path3();
        add("path3", p3, fixtures::set({0}), fixtures::set({0, 1}), p);
        std::vector<double> xs, ws;
        for (int i = 0; i < 12; ++i) {
            xs.push_back(i);
            ws.push_back(1.0 + (i % 3));
        }
        auto path = std::make_shared<const Space>(line_space<double>(xs, ws));
        add("path12", path, fixtures::set({5, 6}), PointSet::where(12, [](Index i) { return i >= 3 && i <= 8; }), p);
    }
    auto wl = std::make_shared<const Space>(gen_weighted_line<double>(2001, 3.0, 3.0));
    add("weighted-line(2001,3,3)", wl, ball_members(*wl, Ball<double>{1000, 1.0, true}),
        ball_members(*wl, Ball<double>{1000, 2.0, false}), 2.0);

    double worst_slack = std::numeric_limits<double>::infinity(), worst_reverse = 0;
    std::string worst_name;
    for (const auto& c : corpus) {
        auto V = c.P;
        V.kind = CapacityKind::variational;
        const double haj = solve_capacity(c.P).value.value;
        const double var = solve_capacity(V).value.value;
        worst_slack = std::min(worst_slack, std::pow(4.0, c.P.p) * haj - var);
        const double reverse = haj / var;
        if (reverse > worst_reverse) {
            worst_reverse = reverse;
            worst_name = c.name;
        }
    }
    return {worst_slack >= -1e-6 && worst_reverse <= 100,
            "min slack " + num(worst_slack) + ", max reverse ratio " + num(worst_reverse) + " on " + worst_name};
}

// 12: 1e-6 relative.
Outcome snowflake_identities() {
    auto X = std::make_shared<const Space>(gen_grid<double>(9, 2));
    auto S = std::make_shared<const Space>(snowflake(*X, 0.5));
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<Index> pick(0, X->size() - 1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0;
    for (int t = 0; t < 5; ++t) {
        const Index c = pick(rng);
        const double r = X->mesh() * (1 + 2 * U(rng));
        const PointSet F = ball_members(*X, Ball<double>{c, r, true});
        const PointSet omega = ball_members(*X, Ball<double>{c, r * (1.5 + U(rng)), false});
        const double h1 = solve_capacity(make(CapacityKind::hajlasz, X, F, omega, 0.5, 2)).value.value;
        const double h2 = solve_capacity(make(CapacityKind::hajlasz, S, F, omega, 1.0, 2)).value.value;
        const double r1 = solve_capacity(make(CapacityKind::riesz, X, F, std::nullopt, 0.5, 2)).value.value;
        const double r2 = solve_capacity(make(CapacityKind::riesz, S, F, std::nullopt, 1.0, 2)).value.value;
        worst = std::max({worst, rel(h1, h2), rel(r1, r2)});
    }
    return {worst <= 1e-6, "worst relative gap " + num(worst)};
}

// 14: M_observed at most 64.
Outcome chain_validity() {
    std::mt19937_64 rng(14);
    double worst = 0;
    bool ok = true;
    for (int dim : {1, 2}) {
        const Space X = gen_grid<double>(33, dim);
        std::uniform_int_distribution<Index> pick(0, X.size() - 1);
        const double mults[] = {2, 3, 4, 6, 8};
        for (double m : mults) {
            const auto chain = build_ball_chain(X, pick(rng), m * X.mesh(), 0.3 * X.diameter());
            ok = ok && chain.valid(64.0);
            worst = std::max(worst, chain.M_observed);
        }
    }
    return {ok, "largest M_observed " + num(worst)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    std::vector<int> expect_fail;
    g_jobs = default_jobs();
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    app.add_option("--expect-fail", expect_fail,
                   "Criteria documented as unattainable; exit status is 0 when exactly these fail")
        ->delimiter(',');
    app.add_option("--jobs", g_jobs, "Worker threads");
    CLI11_PARSE(app, argc, argv);

    const RecipeOptions ro{g_jobs, 0};
    const std::vector<Criterion> criteria{
        {1, "oracle equivalence", oracle_equivalence},
        {2, "pinned small values", pinned_values},
        {3, "weighted-line degeneracy", [&] { return recipe(weighted_line_degenerate(ro)); }},
        {4, "ball comparability", [&] { return recipe(ball_comparability(ro)); }},
        {5, "one-sided riesz/hajlasz comparability", one_sided},
        {6, "two-sided comparability band", two_sided},
        {7, "kernel estimate on uniform grids", kernel_estimate},
        {8, "gradient of potential", gradient_of_potential},
        {9, "poincare suite", poincare_suite},
        {10, "content identities", content_identities},
        {11, "4^p comparison across corpus", four_p_comparison},
        {12, "snowflake capacity identities", snowflake_identities},
        {13, "four-way density scan", [&] { return recipe(four_way_equivalence(ro)); }},
        {14, "chain validity", chain_validity},
    };
    std::set<int> failed;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.passed) failed.insert(c.id);
        std::cout << (o.passed ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << "  [" << num(secs) << " s]  "
                  << o.detail << std::endl;
    }
    std::set<int> expected;
    for (int id : expect_fail)
        if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) expected.insert(id);
    if (!expected.empty())
        std::cout << "expected failures:";
    for (int id : expected) std::cout << ' ' << id;
    if (!expected.empty()) std::cout << (failed == expected ? " (as documented)" : " (MISMATCH)") << "\n";
    return failed == expected ? 0 : 1;
}
