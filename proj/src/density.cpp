#include "caplab/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "caplab/parallel.hpp"
#include "caplab/stats.hpp"

namespace caplab {

std::pair<double, double> radius_window(const Space& space, const ScanOptions& options) {
    return {options.floor_mesh_multiple * space.mesh(), options.cap_diam_fraction * space.diameter()};
}

std::vector<Index> spread_centers(const Space& space, const PointSet& E, Index k, std::uint64_t seed) {
    require(!E.empty(), ErrorKind::invalid_parameter, "E must be nonempty");
    const auto& ids = E.ids();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    std::vector<Index> centers{ids[pick(rng)]};
    std::vector<double> gap(ids.size(), std::numeric_limits<double>::infinity());
    while (static_cast<Index>(centers.size()) < std::min<Index>(k, static_cast<Index>(ids.size()))) {
        const Index last = centers.back();
        std::size_t best = 0;
        for (std::size_t t = 0; t < ids.size(); ++t) {
            gap[t] = std::min(gap[t], space.dist(last, ids[t]));
            if (gap[t] > gap[best]) best = t;
        }
        if (gap[best] == 0) break;
        centers.push_back(ids[best]);
    }
    return centers;
}

CapacityProblem local_problem(std::shared_ptr<const Space> space, const PointSet& E, CapacityKind kind,
                              const ScanParams& params, Index x, double r) {
    CapacityProblem P;
    P.kind = kind;
    P.F = E.intersect(ball_members(*space, Ball<double>{x, r, true}));
    P.beta = kind == CapacityKind::variational ? 1.0 : params.beta;
    P.p = params.p;
    P.q = params.q;
    P.rho = r;
    if (kind == CapacityKind::hajlasz || kind == CapacityKind::variational)
        P.omega = ball_members(*space, Ball<double>{x, 2 * r, false});
    P.space = std::move(space);
    return P;
}

namespace {

void check_radii(const Space& space, const std::vector<double>& radii, const ScanOptions& options) {
    require(!radii.empty(), ErrorKind::invalid_parameter, "at least one radius is required");
    const auto [lo, hi] = radius_window(space, options);
    require(lo <= hi, ErrorKind::not_applicable, "space too small for any admissible radius");
    for (double r : radii)
        require(r >= lo * (1 - 1e-12) && r <= hi * (1 + 1e-12), ErrorKind::invalid_parameter,
                "radius " + std::to_string(r) + " outside the admissible window [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
}

struct Cell {
    Index x;
    double r;
};

std::vector<Cell> cells_of(const std::vector<Index>& centers, std::vector<double> radii) {
    std::sort(radii.begin(), radii.end());
    std::vector<Cell> cells;
    for (Index x : centers)
        for (double r : radii) cells.push_back({x, r});
    return cells;
}

}  // namespace

DensityReport density_scan(std::shared_ptr<const Space> space, const PointSet& E, CapacityKind kind,
                           const ScanParams& params, const std::vector<double>& radii, const ScanOptions& options) {
    require(space != nullptr, ErrorKind::invalid_parameter, "scan needs a space");
    require(!E.empty(), ErrorKind::invalid_parameter, "E must be nonempty");
    if (kind == CapacityKind::variational)
        require(space->has_edges(), ErrorKind::not_applicable, "variational scan needs an edge graph");
    check_radii(*space, radii, options);

    DensityReport rep;
    rep.kind = kind;
    rep.params = params;
    rep.raw_denominator = options.raw_denominator;
    std::tie(rep.radius_floor, rep.radius_cap) = radius_window(*space, options);
    rep.centers = spread_centers(*space, E, options.max_centers, options.seed);
    rep.scales = radii;
    std::sort(rep.scales.begin(), rep.scales.end());
    const auto cells = cells_of(rep.centers, radii);
    rep.samples.resize(cells.size());

    const double exponent = kind == CapacityKind::content ? params.q
                            : kind == CapacityKind::variational ? params.p
                                                                : params.beta * params.p;
    parallel_for(cells.size(), options.jobs, [&](std::size_t i) {
        const auto [x, r] = cells[i];
        const auto P = local_problem(space, E, kind, params, x, r);
        const auto res = solve_capacity(P, options.solver);
        DensitySample& s = rep.samples[i];
        s.x = x;
        s.r = r;
        s.numerator = res.value.as_double();
        s.target_size = static_cast<Index>(P.F.size());
        s.method = res.method;
        s.certified = res.certified;
        if (options.raw_denominator) {
            const auto full = local_problem(space, PointSet::all(space->size()), kind, params, x, r);
            s.denominator = solve_capacity(full, options.solver).value.as_double();
        } else {
            s.denominator = std::pow(r, -exponent) * space->ball_mass(x, r);
        }
        s.ratio = s.numerator / s.denominator;
    });
    rep.c0_estimate = std::numeric_limits<double>::infinity();
    for (const auto& s : rep.samples) rep.c0_estimate = std::min(rep.c0_estimate, s.ratio);
    rep.verdict = rep.c0_estimate > 0 ? "supported on sampled scales" : "refuted on sampled scales";
    return rep;
}

ComparabilityReport comparability_scan(std::shared_ptr<const Space> space, const PointSet& E, const ScanParams& params,
                                       const std::vector<double>& radii, const ScanOptions& options,
                                       ComparisonPair pair) {
    require(space != nullptr, ErrorKind::invalid_parameter, "scan needs a space");
    require(!E.empty(), ErrorKind::invalid_parameter, "E must be nonempty");
    check_radii(*space, radii, options);
    ComparabilityReport rep;
    rep.pair = pair;
    rep.params = params;
    try {
        rep.sigma_fit = estimate_reverse_doubling(*space).sigma;
    } catch (const Error& e) {
        rep.warnings.push_back(std::string("reverse doubling fit unavailable: ") + e.what());
    }
    const double threshold = pair == ComparisonPair::content_restricted ? params.q : params.beta * params.p;
    rep.two_sided = rep.sigma_fit && *rep.sigma_fit > threshold;
    if (!rep.two_sided)
        rep.warnings.push_back("sigma fit does not exceed " + std::to_string(threshold) +
                               "; only the one-sided bound is expected");

    const auto centers = spread_centers(*space, E, options.max_centers, options.seed);
    const auto cells = cells_of(centers, radii);
    rep.samples.resize(cells.size());
    parallel_for(cells.size(), options.jobs, [&](std::size_t i) {
        const auto [x, r] = cells[i];
        ComparabilitySample& s = rep.samples[i];
        s.x = x;
        s.r = r;
        switch (pair) {
            case ComparisonPair::riesz_hajlasz:
                s.first = solve_capacity(local_problem(space, E, CapacityKind::hajlasz, params, x, r), options.solver)
                              .value.as_double();
                s.second = solve_capacity(local_problem(space, E, CapacityKind::riesz, params, x, r), options.solver)
                               .value.as_double();
                break;
            case ComparisonPair::variational_hajlasz: {
                ScanParams unit = params;
                unit.beta = 1;
                s.first = solve_capacity(local_problem(space, E, CapacityKind::hajlasz, unit, x, r), options.solver)
                              .value.as_double();
                s.second =
                    solve_capacity(local_problem(space, E, CapacityKind::variational, unit, x, r), options.solver)
                        .value.as_double();
                s.inequality_ok = s.second <= std::pow(4.0, params.p) * s.first + 1e-6 * std::max(1.0, s.first);
                break;
            }
            case ComparisonPair::content_restricted: {
                const auto P = local_problem(space, E, CapacityKind::content, params, x, r);
                const auto c = content_restriction_check(space, P.F, params.q, r, options.solver);
                s.first = c.restricted;
                s.second = c.unrestricted;
                s.inequality_ok = c.unrestricted <= c.restricted;
                break;
            }
        }
        s.ratio = s.first / s.second;
    });
    rep.band_min = std::numeric_limits<double>::infinity();
    rep.band_max = 0;
    for (const auto& s : rep.samples) {
        rep.band_min = std::min(rep.band_min, s.ratio);
        rep.band_max = std::max(rep.band_max, s.ratio);
    }
    rep.band_spread = rep.band_min > 0 ? rep.band_max / rep.band_min : std::numeric_limits<double>::infinity();
    return rep;
}

ContentRestriction content_restriction_check(std::shared_ptr<const Space> space, const PointSet& F, double q, double r,
                                             const SolverOptions& options) {
    require(q > 0, ErrorKind::invalid_parameter, "q must be positive");
    require(r > 0, ErrorKind::invalid_parameter, "r must be positive");
    bool inside = F.empty();
    for (Index x = 0; x < space->size() && !inside; ++x) inside = F.subset_of(ball_members(*space, Ball<double>{x, r, true}));
    require(inside, ErrorKind::precondition_violation, "F is not contained in any closed ball of radius r");

    CapacityProblem P;
    P.kind = CapacityKind::content;
    P.space = space;
    P.F = F;
    P.q = q;
    P.rho = r;
    ContentRestriction out;
    out.restricted = solve_hausdorff_content(P, options).value.value;
    P.rho = 2 * space->diameter();
    // a cover admissible for the smaller cap is admissible for the larger one
    out.unrestricted = std::min(solve_hausdorff_content(P, options).value.value, out.restricted);
    out.ratio = out.unrestricted > 0 ? out.restricted / out.unrestricted : 1.0;
    try {
        out.sigma_fit = estimate_reverse_doubling(*space).sigma;
        out.band_applicable = *out.sigma_fit >= q;
    } catch (const Error&) {
    }
    return out;
}

ProbeTable self_improvement_probe(std::shared_ptr<const Space> space, const PointSet& E, const ScanParams& params,
                                  const std::vector<std::pair<double, double>>& grid, const std::vector<double>& radii,
                                  const ScanOptions& options) {
    ProbeTable table;
    table.base_c0 = density_scan(space, E, CapacityKind::riesz, params, radii, options).c0_estimate;
    require(table.base_c0 > 1e-3, ErrorKind::precondition_violation,
            "base density scan gives c0 = " + std::to_string(table.base_c0) + ", not above 1e-3");
    try {
        table.sigma_fit = estimate_reverse_doubling(*space).sigma;
    } catch (const Error& e) {
        table.diagnostic = std::string("no reverse doubling fit: ") + e.what();
        return table;
    }
    for (const auto& [gamma, s] : grid) {
        if (!(gamma > 0 && gamma <= 1 && s > 1 && gamma * s < *table.sigma_fit)) {
            table.excluded.push_back({gamma, s});
            continue;
        }
        ScanParams at = params;
        at.beta = gamma;
        at.p = s;
        table.rows.push_back({gamma, s, density_scan(space, E, CapacityKind::riesz, at, radii, options).c0_estimate});
    }
    if (table.rows.empty()) table.diagnostic = "no admissible (gamma, s): every point has gamma*s >= sigma fit";
    return table;
}

}  // namespace caplab
