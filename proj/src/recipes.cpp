#include "caplab/recipes.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "caplab/chain.hpp"
#include "caplab/potentials.hpp"
#include "caplab/stats.hpp"

namespace caplab {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

Index nearest_point(const Space& space, const std::vector<double>& at) {
    const auto& c = *space.coords();
    Index best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < space.size(); ++i) {
        double d = 0;
        for (Index k = 0; k < c.cols(); ++k) d += (c(i, k) - at[k]) * (c(i, k) - at[k]);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

}  // namespace

const std::vector<std::string>& case_names() {
    static const std::vector<std::string> names{"weighted-line-degenerate", "annuli-trend", "ball-comparability",
                                                "four-way-equivalence"};
    return names;
}

CaseResult reproduce(const std::string& name, const RecipeOptions& options) {
    if (name == "weighted-line-degenerate") return weighted_line_degenerate(options);
    if (name == "annuli-trend") return annuli_trend(options);
    if (name == "ball-comparability") return ball_comparability(options);
    if (name == "four-way-equivalence") return four_way_equivalence(options);
    throw Error(ErrorKind::invalid_parameter, "unknown case '" + name + "'");
}

CaseResult weighted_line_degenerate(const RecipeOptions&) {
    const auto t0 = Clock::now();
    CaseResult out;
    out.name = "weighted-line-degenerate";
    auto X = std::make_shared<const Space>(gen_weighted_line<double>(2001, 3.0, 3.0));
    const double p = 2, q = 3;
    const Index c = nearest_point(*X, {0.0});
    const auto& xs = *X->coords();

    CapacityProblem P;
    P.kind = CapacityKind::variational;
    P.space = X;
    P.F = ball_members(*X, Ball<double>{c, 1.0, true});
    P.omega = ball_members(*X, Ball<double>{c, 2.0, false});
    P.p = p;
    const auto in_omega = P.omega->mask(X->size());

    io::Json tests = io::Json::array();
    io::PlotSeries energy_series{"test-function-energy", {}, {}}, bound_series{"bound", {}, {}};
    std::vector<double> energies;
    bool all_feasible = true, all_below = true;
    for (double rho : {0.5, 0.25, 0.125}) {
        Vec<double> u(X->size());
        for (Index i = 0; i < X->size(); ++i) {
            const double outside = std::max(0.0, std::abs(xs(i, 0)) - 1.0);
            u(i) = in_omega[i] ? std::max(0.0, 1.0 - outside / rho) : 0.0;
        }
        for (Index i : P.F) u(i) = 1;
        Vec<double> g = Vec<double>::Zero(X->size());
        for (const auto& e : X->edges()) {
            const double slope = std::abs(u(e.i) - u(e.j)) / e.length;
            for (Index v : {e.i, e.j})
                if (in_omega[v]) g(v) = std::max(g(v), slope);
        }
        double energy = 0;
        for (Index i : *P.omega) energy += X->weight(i) * std::pow(g(i), p);
        const double bound = 2.0 / q * std::pow(rho, q - p) + 10 * X->mesh();
        const double residual = variational_residual(P, u, g);
        all_feasible = all_feasible && residual <= 1e-12;
        all_below = all_below && energy <= bound;
        energies.push_back(energy);
        tests.push_back({{"rho", rho}, {"energy", energy}, {"bound", bound}, {"residual", residual}});
        energy_series.x.push_back(rho);
        energy_series.y.push_back(energy);
        bound_series.x.push_back(rho);
        bound_series.y.push_back(bound);
    }
    const bool monotone = energies[1] <= energies[0] && energies[2] <= energies[1];
    const auto solved = solve_variational_capacity(P);

    out.checks.push_back({"test functions are admissible", all_feasible, "edge constraints hold at every rho"});
    out.checks.push_back({"energy <= (2/q) rho^(q-p) + 10 mesh", all_below,
                          "energies " + num(energies[0]) + ", " + num(energies[1]) + ", " + num(energies[2])});
    out.checks.push_back({"energy nonincreasing as rho decreases", monotone, ""});
    out.checks.push_back({"solved capacity below 0.5", solved.value.value < 0.5, "cp_p = " + num(solved.value.value)});
    out.checks.push_back({"solved capacity below every test energy",
                          solved.value.value <= energies[2] * (1 + 1e-9), ""});
    out.seconds = since(t0);
    out.checks.push_back({"runtime under 3 min", out.seconds < 180, num(out.seconds) + " s"});

    out.bundle.record = {{"case", out.name},
                         {"space_digest", io::space_digest(*X)},
                         {"parameters", {{"n", 2001}, {"halfwidth", 3}, {"q", q}, {"p", p}}},
                         {"test_functions", tests},
                         {"capacity", io::result_to_json(solved)}};
    std::ostringstream csv;
    csv << "rho,energy,bound\n";
    for (const auto& t : tests) csv << t["rho"] << ',' << t["energy"] << ',' << t["bound"] << '\n';
    out.bundle.table = csv.str();
    out.bundle.plot = {energy_series, bound_series};
    return out;
}

CaseResult ball_comparability(const RecipeOptions&) {
    const auto t0 = Clock::now();
    CaseResult out;
    out.name = "ball-comparability";
    auto X = std::make_shared<const Space>(gen_grid<double>(33, 2));
    const double beta = 1, p = 2;
    const Index c = nearest_point(*X, {0.5, 0.5});
    const double c_mu = estimate_doubling(*X);

    io::Json rows = io::Json::array();
    io::PlotSeries ratio_series{"cap-over-normalized-mass", {}, {}};
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    bool bound_ok = true, test_ok = true;
    std::ostringstream csv;
    csv << "r,capacity,normalized_mass,ratio,test_energy,c_mu_bound\n";
    for (double r : {0.25, 0.125, 0.0625}) {
        CapacityProblem P;
        P.kind = CapacityKind::hajlasz;
        P.space = X;
        P.F = ball_members(*X, Ball<double>{c, r, true});
        P.omega = ball_members(*X, Ball<double>{c, 2 * r, false});
        P.beta = beta;
        P.p = p;
        const auto res = solve_hajlasz_capacity(P);
        const double norm_mass = std::pow(r, -beta * p) * X->ball_mass(c, r);
        const double c_bound = c_mu * norm_mass;

        // explicit test pair u = max{0, 1 - r^-b dist(., closed B)^b}, g = r^-b on B(x, 2r)
        Vec<double> u(X->size()), g = Vec<double>::Zero(X->size());
        for (Index i = 0; i < X->size(); ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (Index z : P.F) d = std::min(d, X->dist(i, z));
            u(i) = std::max(0.0, 1.0 - std::pow(d / r, beta));
        }
        for (Index i : *P.omega) g(i) = std::pow(r, -beta);
        double test_energy = 0;
        for (Index i = 0; i < X->size(); ++i) test_energy += X->weight(i) * std::pow(g(i), p);
        const double test_residual = hajlasz_residual(P, u, g);

        const double ratio = res.value.value / norm_mass;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        bound_ok = bound_ok && res.value.value <= c_bound && test_energy <= c_bound;
        test_ok = test_ok && test_residual <= 1e-12 && res.value.value <= test_energy * (1 + 1e-9);
        rows.push_back({{"r", r}, {"capacity", io::result_to_json(res)}, {"normalized_mass", norm_mass},
                        {"ratio", ratio}, {"test_energy", test_energy}, {"test_residual", test_residual},
                        {"c_mu_bound", c_bound}});
        csv << r << ',' << res.value.value << ',' << norm_mass << ',' << ratio << ',' << test_energy << ','
            << c_bound << '\n';
        ratio_series.x.push_back(r);
        ratio_series.y.push_back(ratio);
    }
    out.checks.push_back({"cp <= c_mu r^(-beta p) mu(B)", bound_ok, "c_mu = " + num(c_mu)});
    out.checks.push_back({"explicit test pair feasible and above the optimum", test_ok, ""});
    out.checks.push_back({"ratio spread <= 20", hi / lo <= 20, "spread " + num(hi / lo)});
    out.seconds = since(t0);
    out.checks.push_back({"runtime under 5 min", out.seconds < 300, num(out.seconds) + " s"});
    out.bundle.record = {{"case", out.name},
                         {"space_digest", io::space_digest(*X)},
                         {"parameters", {{"grid", 33}, {"dim", 2}, {"beta", beta}, {"p", p}, {"center", c}}},
                         {"c_mu", c_mu},
                         {"scales", rows},
                         {"spread", hi / lo}};
    out.bundle.table = csv.str();
    out.bundle.plot = {ratio_series};
    return out;
}

CaseResult four_way_equivalence(const RecipeOptions& options) {
    const auto t0 = Clock::now();
    CaseResult out;
    out.name = "four-way-equivalence";
    auto X = std::make_shared<const Space>(gen_grid<double>(33, 2));
    const PointSet quadrant = PointSet::where(X->size(), [&](Index i) {
        return (*X->coords())(i, 0) <= 0.5 && (*X->coords())(i, 1) <= 0.5;
    });
    const std::vector<double> radii{0.0625, 0.125, 0.25};
    ScanOptions so;
    so.jobs = options.jobs;
    so.seed = options.seed;
    so.max_centers = 6;
    ScanParams params{1.0, 2.0, 1.0};

    io::Json scans = io::Json::object();
    std::ostringstream csv;
    csv << "set,kind,x,r,numerator,denominator,ratio\n";
    std::vector<io::PlotSeries> plot;
    for (auto kind : {CapacityKind::riesz, CapacityKind::hajlasz, CapacityKind::variational, CapacityKind::content}) {
        const auto rep = density_scan(X, quadrant, kind, params, radii, so);
        out.checks.push_back({std::string("quadrant ") + to_string(kind) + " c0 > 0.01", rep.c0_estimate > 0.01,
                              "c0 = " + num(rep.c0_estimate)});
        scans[std::string("quadrant-") + to_string(kind)] = io::density_to_json(rep);
        io::PlotSeries s{std::string("quadrant-") + to_string(kind) + "-min-ratio", {}, {}};
        for (double r : rep.scales) {
            double m = std::numeric_limits<double>::infinity();
            for (const auto& smp : rep.samples)
                if (smp.r == r) m = std::min(m, smp.ratio);
            s.x.push_back(r);
            s.y.push_back(m);
        }
        plot.push_back(s);
        for (const auto& smp : rep.samples)
            csv << "quadrant," << to_string(kind) << ',' << smp.x << ',' << smp.r << ',' << smp.numerator << ','
                << smp.denominator << ',' << smp.ratio << '\n';
    }
    const PointSet single({nearest_point(*X, {0.5, 0.5})});
    const auto rep = density_scan(X, single, CapacityKind::content, params, radii, so);
    const double first = rep.samples.front().ratio, last = rep.samples.back().ratio;
    bool decreasing = true;
    for (std::size_t k = 1; k < rep.samples.size(); ++k)
        decreasing = decreasing && rep.samples[k].ratio < rep.samples[k - 1].ratio;
    out.checks.push_back({"single point content ratios decrease by >= 4", decreasing && first >= 4 * last,
                          "factor " + num(first / last)});
    scans["single-point-content"] = io::density_to_json(rep);
    io::PlotSeries s{"single-point-content-ratio", {}, {}};
    for (const auto& smp : rep.samples) {
        s.x.push_back(smp.r);
        s.y.push_back(smp.ratio);
        csv << "single,content," << smp.x << ',' << smp.r << ',' << smp.numerator << ',' << smp.denominator << ','
            << smp.ratio << '\n';
    }
    plot.push_back(s);
    out.seconds = since(t0);
    out.bundle.record = {{"case", out.name}, {"space_digest", io::space_digest(*X)}, {"scans", scans}};
    out.bundle.table = csv.str();
    out.bundle.plot = plot;
    return out;
}

CaseResult annuli_trend(const RecipeOptions&) {
    const auto t0 = Clock::now();
    CaseResult out;
    out.name = "annuli-trend";
    const double h = 0.05, beta = 1, p = 2;
    const Index half = 500;  // points at (i - half) h, i = 0..2 half
    std::vector<double> xs, ws;
    for (Index i = 0; i <= 2 * half; ++i) {
        xs.push_back(double(i - half) * h);
        ws.push_back(h);
    }
    auto X = std::make_shared<const Space>(line_space<double>(xs, ws));
    const Index origin = half;
    const PointSet unit = ball_members(*X, Ball<double>{origin, 1.0, true});

    std::vector<double> bounds;
    io::Json rows = io::Json::array();
    io::PlotSeries series{"riesz-capacity-upper-bound", {}, {}};
    std::ostringstream csv;
    csv << "j,c_j,bound,bound_times_j\n";
    for (int j = 1; 3 * j * 20 <= half; ++j) {
        // A_j = {2j <= |x| < 3j}, in grid steps of h = 1/20
        Vec<double> f = Vec<double>::Zero(X->size());
        for (Index i = 0; i < X->size(); ++i) {
            const Index k = std::abs(i - half);
            if (k >= 40 * j && k < 60 * j) f(i) = std::pow(double(j), -beta);
        }
        double cj = std::numeric_limits<double>::infinity();
        for (Index z : unit) cj = std::min(cj, riesz_potential_at(*X, f, beta, z));
        f /= cj;
        double bound = 0;
        for (Index i = 0; i < X->size(); ++i) bound += X->weight(i) * std::pow(f(i), p);
        bounds.push_back(bound);
        rows.push_back({{"j", j}, {"c_j", cj}, {"bound", bound}});
        csv << j << ',' << cj << ',' << bound << ',' << bound * j << '\n';
        series.x.push_back(j);
        series.y.push_back(bound);
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < bounds.size(); ++k) decreasing = decreasing && bounds[k] < bounds[k - 1];
    CapacityProblem P;
    P.kind = CapacityKind::riesz;
    P.space = X;
    P.F = unit;
    P.beta = beta;
    P.p = p;
    const auto solved = solve_riesz_capacity(P);
    out.checks.push_back({"upper bounds decrease with j", decreasing,
                          "first " + num(bounds.front()) + ", last " + num(bounds.back())});
    out.checks.push_back({"solved capacity below every bound", solved.value.value <= bounds.back(),
                          "R = " + num(solved.value.value)});
    out.seconds = since(t0);
    out.bundle.record = {{"case", out.name},
                         {"space_digest", io::space_digest(*X)},
                         {"parameters", {{"h", h}, {"halfwidth", 25}, {"beta", beta}, {"p", p}}},
                         {"annuli", rows},
                         {"capacity", io::result_to_json(solved)}};
    out.bundle.table = csv.str();
    out.bundle.plot = {series};
    return out;
}

namespace {

double rel_gap(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

double max_rel_gap(const Vec<double>& a, const Vec<double>& b) {
    double worst = 0;
    for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, rel_gap(a(i), b(i)));
    return worst;
}

Vec<double> random_field(std::mt19937_64& rng, Index n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec<double> f(n);
    for (Index i = 0; i < n; ++i) f(i) = unit(rng);
    return f;
}

}  // namespace

CaseResult verify_suite(const Space& space, const RecipeOptions& options) {
    const auto t0 = Clock::now();
    CaseResult out;
    out.name = "verify";
    auto& checks = out.checks;
    const Index n = space.size();
    std::mt19937_64 rng(options.seed);

    // space-core
    const double tri = triangle_violation(space);
    checks.push_back({"triangle-inequality", tri <= 1e-12 * std::max(1.0, space.diameter()),
                      "largest defect " + num(tri)});
    if (space.has_edges()) {
        const double defect = edge_length_defect(space);
        checks.push_back({"edge-lengths-match-metric", defect <= 1e-12, "largest relative defect " + num(defect)});
        const auto geo = check_geodesic_graph(space);
        checks.push_back({"geodesic-graph-report", true,
                          std::string(geo.geodesic ? "geodesic" : "not geodesic") + ", max relative discrepancy " +
                              num(geo.max_relative_discrepancy)});
    }
    const double c_mu = estimate_doubling(space);
    const double c_scaled = estimate_doubling(space.scaled_weights(3.7));
    checks.push_back({"doubling-constant-at-least-one", c_mu >= 1, "c_mu = " + num(c_mu)});
    checks.push_back({"doubling-weight-scale-invariance", rel_gap(c_mu, c_scaled) <= 1e-12,
                      num(c_mu) + " vs " + num(c_scaled)});
    {
        bool ok = true;
        for (Index x = 0; x < n && ok; ++x) {
            double prev_r = -1, prev = 0;
            for (double r : space.sorted_distances(x)) {
                if (r == prev_r) continue;
                const double open = space.ball_mass(x, r), closed = space.ball_mass(x, r, true);
                ok = ok && open >= prev && closed > open && closed <= space.total_mass() * (1 + 1e-12);
                prev_r = r;
                prev = closed;
            }
        }
        checks.push_back({"ball-mass-monotonicity", ok, ""});
    }
    {
        const auto twice = snowflake(snowflake(space, 0.5), 0.8);
        const auto once = snowflake(space, 0.4);
        const double gap = (twice.distances() - once.distances()).cwiseAbs().maxCoeff();
        checks.push_back({"snowflake-composition", gap <= 1e-12, "max distance gap " + num(gap)});
    }

    // potentials
    {
        const double beta = 0.5;
        const Vec<double> f = random_field(rng, n), g = random_field(rng, n);
        const Vec<double> If = riesz_potential(space, f, beta), Ig = riesz_potential(space, g, beta);
        const Vec<double> combo = riesz_potential<double>(space, 2 * f + 3 * g, beta);
        checks.push_back({"potential-linearity", max_rel_gap(combo, 2 * If + 3 * Ig) <= 1e-12, ""});
        const Vec<double> bigger = riesz_potential<double>(space, f + g, beta);
        checks.push_back({"potential-monotonicity", ((bigger - If).array() >= -1e-12 * If.array().abs()).all(), ""});
        const Vec<double> transported = riesz_potential(snowflake(space, beta), f, 1.0);
        checks.push_back({"potential-snowflake-transport", max_rel_gap(If, transported) <= 1e-12,
                          "max relative gap " + num(max_rel_gap(If, transported))});
        const Vec<double> scaled = riesz_potential(space.scaled_weights(2.5), f, beta);
        checks.push_back({"potential-weight-scale-invariance", max_rel_gap(If, scaled) <= 1e-12, ""});

        const Vec<double> mf = maximal_function(space, f), mg = maximal_function(space, g);
        const Vec<double> msum = maximal_function<double>(space, f + g);
        checks.push_back({"maximal-function-dominates", (mf.array() >= f.array() * (1 - 1e-12)).all(), ""});
        checks.push_back({"maximal-function-sublinear", (msum.array() <= (mf + mg).array() * (1 + 1e-12)).all(), ""});

        const Vec<double> u = random_field(rng, n);
        const Vec<double> grad = canonical_gradient(space, u, 1.0);
        const auto hc = verify_hajlasz_gradient(space, u, grad, 1.0);
        checks.push_back({"canonical-gradient-admissible", hc.ok, "worst slack " + num(hc.worst_slack)});
        if (hc.ok) {
            const auto pc = poincare_check(space, u, grad, 1.0, 2.0);
            checks.push_back({"poincare-inequality", pc.ok,
                              std::to_string(pc.balls_checked) + " balls, worst ratio " + num(pc.worst_ratio)});
        }
    }

    // chains
    if (space.has_edges() && n >= 9) {
        const Index y = space.neighbor_order(0)[n / 2];
        const double R = 0.3 * space.diameter();
        const double rho = std::min(2 * space.mesh(), R / 2);
        try {
            const auto chain = build_ball_chain(space, y, rho, R);
            checks.push_back({"ball-chain-validity", chain.valid(64.0), "M_observed " + num(chain.M_observed)});
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::not_applicable && e.kind() != ErrorKind::invalid_parameter) throw;
            checks.push_back({"ball-chain-validity", true, std::string("skipped: ") + e.what()});
        }
    }

    // capacities on a small local problem around one point
    if (n >= 2) {
        auto shared = std::make_shared<const Space>(space);
        const Index x = space.neighbor_order(0)[n / 2];
        const double nn = space.sorted_distances(x)[1];
        CapacityProblem P;
        P.space = shared;
        P.beta = 1;
        P.p = 2;
        const PointSet small({x});
        const PointSet large = ball_members(space, Ball<double>{x, nn, true});
        P.omega = ball_members(space, Ball<double>{x, 2.5 * nn, false});

        auto value = [&](CapacityKind kind, const PointSet& F, const Space* other = nullptr, double beta = 1) {
            CapacityProblem Q = P;
            Q.kind = kind;
            Q.F = F;
            Q.beta = beta;
            if (other) Q.space = std::make_shared<const Space>(*other);
            if (kind == CapacityKind::riesz || kind == CapacityKind::content) Q.omega.reset();
            if (kind == CapacityKind::content) Q.rho = 2 * nn;
            return solve_capacity(Q).value.as_double();
        };
        for (auto kind : {CapacityKind::riesz, CapacityKind::hajlasz, CapacityKind::content}) {
            const double a = value(kind, small), b = value(kind, large);
            checks.push_back({std::string("capacity-monotonicity-") + to_string(kind),
                              a <= b * (1 + 1e-6) + 1e-12, num(a) + " <= " + num(b)});
        }
        const Space heavier = space.scaled_weights(3.0);
        for (auto kind : {CapacityKind::riesz, CapacityKind::hajlasz}) {
            const double a = value(kind, large), b = value(kind, large, &heavier);
            checks.push_back({std::string("capacity-measure-scaling-") + to_string(kind),
                              std::isinf(a) ? std::isinf(b) : rel_gap(3 * a, b) <= 1e-6, num(3 * a) + " vs " + num(b)});
        }
        const Space flake = snowflake(space, 0.5);
        for (auto kind : {CapacityKind::riesz, CapacityKind::hajlasz}) {
            const double a = value(kind, large, nullptr, 0.5), b = value(kind, large, &flake, 1.0);
            checks.push_back({std::string("capacity-snowflake-identity-") + to_string(kind),
                              std::isinf(a) ? std::isinf(b) : rel_gap(a, b) <= 1e-6, num(a) + " vs " + num(b)});
        }
        if (space.has_edges()) {
            const double haj = value(CapacityKind::hajlasz, large), var = value(CapacityKind::variational, large);
            checks.push_back({"variational-below-4p-hajlasz", var <= std::pow(4.0, P.p) * haj + 1e-6 * std::max(1.0, haj),
                              num(var) + " <= " + num(std::pow(4.0, P.p)) + " * " + num(haj)});
        }
    }

    out.seconds = since(t0);
    io::Json rows = io::Json::array();
    std::ostringstream csv;
    csv << "invariant,passed,detail\n";
    for (const auto& c : checks) {
        rows.push_back({{"invariant", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        csv << c.name << ',' << (c.passed ? "true" : "false") << ",\"" << c.detail << "\"\n";
    }
    out.bundle.record = {{"command", "verify"},
                         {"space_digest", io::space_digest(space)},
                         {"parameters", {{"seed", options.seed}}},
                         {"invariants", rows},
                         {"passed", out.passed()}};
    out.bundle.table = csv.str();
    return out;
}

}  // namespace caplab
