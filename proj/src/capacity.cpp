#include "caplab/capacity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>

#include "caplab/potentials.hpp"

namespace caplab {

CapacityKind capacity_kind_from_string(const std::string& s) {
    if (s == "riesz") return CapacityKind::riesz;
    if (s == "hajlasz") return CapacityKind::hajlasz;
    if (s == "variational") return CapacityKind::variational;
    if (s == "content") return CapacityKind::content;
    throw Error(ErrorKind::invalid_parameter, "unknown capacity kind '" + s + "'");
}

void CapacityProblem::validate() const {
    require(space != nullptr, ErrorKind::invalid_problem, "problem has no space");
    const Index n = space->size();
    for (Index i : F) require(i >= 0 && i < n, ErrorKind::invalid_problem, "F references a point outside the space");
    switch (kind) {
        case CapacityKind::riesz:
            require(p > 1, ErrorKind::invalid_parameter, "p must exceed 1");
            require(beta > 0, ErrorKind::invalid_parameter, "riesz capacity needs beta > 0");
            break;
        case CapacityKind::hajlasz:
        case CapacityKind::variational:
            require(p > 1, ErrorKind::invalid_parameter, "p must exceed 1");
            if (kind == CapacityKind::hajlasz)
                require(beta > 0 && beta <= 1, ErrorKind::invalid_parameter, "hajlasz capacity needs 0 < beta <= 1");
            else
                require(space->has_edges(), ErrorKind::not_applicable, "variational capacity needs an edge graph");
            require(omega.has_value(), ErrorKind::invalid_problem, "Omega is required for this kind");
            for (Index i : *omega)
                require(i >= 0 && i < n, ErrorKind::invalid_problem, "Omega references a point outside the space");
            require(F.subset_of(*omega), ErrorKind::invalid_problem, "F must be contained in Omega");
            break;
        case CapacityKind::content:
            require(rho > 0, ErrorKind::invalid_parameter, "rho must be positive");
            require(q >= 0, ErrorKind::invalid_parameter, "q must be nonnegative");
            break;
    }
}

namespace {

double energy(const Space& space, const Vec<double>& v, double p, const PointSet* support = nullptr) {
    double e = 0;
    if (support) {
        for (Index i : *support) e += space.weight(i) * std::pow(v(i), p);
    } else {
        for (Index i = 0; i < v.size(); ++i) e += space.weight(i) * std::pow(v(i), p);
    }
    return e;
}

std::string ipm_tag(const IpmResult& r) { return r.dense ? "ipm-dense" : "ipm-sparse"; }

IpmResult solve_checked(const PowerProgram& prog, const IpmOptions& options) {
    auto r = solve_power_program(prog, options);
    require(r.converged, ErrorKind::internal, "interior point solve failed: " + r.status);
    return r;
}

// u is fixed to 1 on F and 0 off Omega; the remaining points carry a variable.
struct ULayout {
    std::vector<Index> var;  // -1 when fixed
    Vec<double> fixed;
    Index num_free = 0;

    ULayout(Index n, const PointSet& F, const PointSet& omega) : var(static_cast<std::size_t>(n), -1), fixed(Vec<double>::Zero(n)) {
        const auto in_omega = omega.mask(n);
        const auto in_f = F.mask(n);
        for (Index x = 0; x < n; ++x) {
            if (in_f[x]) fixed(x) = 1;
            else if (in_omega[x]) var[x] = num_free++;
        }
    }

    Vec<double> extract(const Eigen::VectorXd& z) const {
        Vec<double> u = fixed;
        for (std::size_t x = 0; x < var.size(); ++x)
            if (var[x] >= 0) u(static_cast<Index>(x)) = std::clamp(z(var[x]), 0.0, 1.0);
        return u;
    }
};

using Row = std::vector<std::pair<Index, double>>;

// Rows for |u_x - u_y| <= cx g_x + cy g_y; gx/gy < 0 means no g variable.
void add_difference_rows(PowerProgram& prog, const ULayout& L, Index x, Index y, Index gx, double cx, Index gy,
                         double cy) {
    Row base;
    if (gx >= 0) base.push_back({gx, cx});
    if (gy >= 0) base.push_back({gy, cy});
    const Index vx = L.var[x], vy = L.var[y];
    if (vx < 0 && vy < 0) {
        const double diff = std::abs(L.fixed(x) - L.fixed(y));
        if (diff > 0) prog.add_row(base, diff);
        return;
    }
    // base + (u_y - u_x) >= 0 and base - (u_y - u_x) >= 0, moving fixed parts to the right side
    for (double sgn : {1.0, -1.0}) {
        Row row = base;
        double rhs = 0;
        if (vy >= 0) row.push_back({vy, sgn}); else rhs -= sgn * L.fixed(y);
        if (vx >= 0) row.push_back({vx, -sgn}); else rhs += sgn * L.fixed(x);
        prog.add_row(row, rhs);
    }
}

void set_u_bounds(PowerProgram& prog, const ULayout& L) {
    for (Index k = 0; k < L.num_free; ++k) prog.set_bounds(k, 0, 1);
}

CapacityResult zero_field_result(Index n, const char* method) {
    CapacityResult r;
    r.value = CapacityValue::finite(0);
    r.method = method;
    r.certified = true;
    (void)n;
    return r;
}

// ---------------------------------------------------------------------------
// Hajlasz

struct PairViolation {
    double excess;
    Index x, y;
};

std::vector<PairViolation> hajlasz_violations(const Space& space, double beta, const Vec<double>& u,
                                              const Vec<double>& g, double threshold) {
    std::vector<PairViolation> out;
    const Index n = space.size();
    for (Index x = 0; x < n; ++x)
        for (Index y = x + 1; y < n; ++y) {
            const double du = std::abs(u(x) - u(y));
            if (du == 0) continue;
            const double excess = du - std::pow(space.dist(x, y), beta) * (g(x) + g(y));
            if (excess > threshold) out.push_back({excess, x, y});
        }
    return out;
}

std::vector<std::pair<Index, Index>> initial_pairs(const Space& space) {
    const Index n = space.size();
    std::vector<std::vector<char>> near(static_cast<std::size_t>(n));
    std::vector<std::pair<Index, Index>> pairs;
    if (space.has_edges()) {
        const auto adj = adjacency(space);
        for (Index x = 0; x < n; ++x) {
            std::vector<Index> reach;
            for (auto [y, l] : adj[x]) {
                reach.push_back(y);
                for (auto [z, l2] : adj[y]) reach.push_back(z);
            }
            std::sort(reach.begin(), reach.end());
            reach.erase(std::unique(reach.begin(), reach.end()), reach.end());
            for (Index y : reach)
                if (y > x) pairs.push_back({x, y});
        }
    } else {
        const Index k = std::min<Index>(n - 1, 12);
        for (Index x = 0; x < n; ++x) {
            auto order = space.neighbor_order(x);
            for (Index j = 1; j <= k; ++j) pairs.push_back({std::min(x, order[j]), std::max(x, order[j])});
        }
        std::sort(pairs.begin(), pairs.end());
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    }
    return pairs;
}

// Raises g along every violated pair, half to each endpoint.
void repair_hajlasz(const Space& space, double beta, const Vec<double>& u, Vec<double>& g) {
    const Index n = space.size();
    for (Index x = 0; x < n; ++x)
        for (Index y = x + 1; y < n; ++y) {
            const double c = std::pow(space.dist(x, y), beta);
            const double excess = std::abs(u(x) - u(y)) - c * (g(x) + g(y));
            if (excess > 0) {
                const double bump = excess / (2 * c);
                g(x) += bump;
                g(y) += bump;
                // rounding can leave a last-ulp deficit
                while (std::abs(u(x) - u(y)) > c * (g(x) + g(y))) g(x) = std::nextafter(g(x), 2 * g(x) + 1);
            }
        }
}

}  // namespace

double hajlasz_residual(const CapacityProblem& problem, const Vec<double>& u, const Vec<double>& g) {
    const Space& space = *problem.space;
    const Index n = space.size();
    double worst = 0;
    const auto in_omega = problem.omega->mask(n);
    for (Index i : problem.F) worst = std::max(worst, 1 - u(i));
    for (Index x = 0; x < n; ++x) {
        worst = std::max({worst, -g(x), -u(x), u(x) - 1});
        if (!in_omega[x]) worst = std::max(worst, std::abs(u(x)));
    }
    for (const auto& v : hajlasz_violations(space, problem.beta, u, g, 0)) worst = std::max(worst, v.excess);
    return worst;
}

CapacityResult solve_hajlasz_capacity(const CapacityProblem& problem, const SolverOptions& options) {
    require(problem.kind == CapacityKind::hajlasz, ErrorKind::invalid_problem, "expected a hajlasz problem");
    problem.validate();
    const Space& space = *problem.space;
    const Index n = space.size();
    const PointSet& omega = *problem.omega;

    if (problem.F.empty() || omega.size() == static_cast<std::size_t>(n)) {
        auto r = zero_field_result(n, "trivial");
        r.u = problem.F.empty() ? Vec<double>::Zero(n) : Vec<double>::Ones(n);
        r.g = Vec<double>::Zero(n);
        return r;
    }

    const ULayout L(n, problem.F, omega);
    const Index nv = L.num_free + n;
    const auto gvar = [&](Index x) { return L.num_free + x; };

    auto build = [&](const std::vector<std::pair<Index, Index>>& pairs) {
        PowerProgram prog(nv, problem.p);
        set_u_bounds(prog, L);
        for (Index x = 0; x < n; ++x) {
            prog.set_bounds(gvar(x), 0, std::numeric_limits<double>::infinity());
            prog.set_energy(gvar(x), space.weight(x));
        }
        for (auto [x, y] : pairs) {
            const double c = std::pow(space.dist(x, y), problem.beta);
            add_difference_rows(prog, L, x, y, gvar(x), c, gvar(y), c);
        }
        return prog;
    };

    CapacityResult res;
    Vec<double> u, g(n);
    const bool lazy = n > options.lazy_threshold;
    std::vector<std::pair<Index, Index>> pairs;
    if (lazy) {
        pairs = initial_pairs(space);
    } else {
        for (Index x = 0; x < n; ++x)
            for (Index y = x + 1; y < n; ++y) pairs.push_back({x, y});
    }

    for (int round = 0;; ++round) {
        const auto ipm = solve_checked(build(pairs), options.ipm);
        res.iterations += ipm.iterations;
        res.method = ipm_tag(ipm) + (lazy ? "-lazy" : "");
        u = L.extract(ipm.z);
        for (Index x = 0; x < n; ++x) g(x) = std::max(ipm.z(gvar(x)), 0.0);
        if (!lazy || round + 1 >= options.lazy_max_rounds) break;
        auto viol = hajlasz_violations(space, problem.beta, u, g, 1e-7);
        if (viol.empty()) break;
        std::sort(viol.begin(), viol.end(), [](const auto& a, const auto& b) {
            return a.excess > b.excess || (a.excess == b.excess && std::tie(a.x, a.y) < std::tie(b.x, b.y));
        });
        const std::size_t take = std::min(viol.size(), std::max<std::size_t>(20000, 2 * pairs.size()));
        for (std::size_t k = 0; k < take; ++k) pairs.push_back({viol[k].x, viol[k].y});
    }

    repair_hajlasz(space, problem.beta, u, g);
    res.u = u;
    res.g = g;
    res.value = CapacityValue::finite(energy(space, g, problem.p));
    res.feasibility_residual = hajlasz_residual(problem, u, g);
    return res;
}

// ---------------------------------------------------------------------------
// Variational

namespace {

double edge_excess(const Edge<double>& e, const Vec<double>& u, const Vec<double>& g, const std::vector<char>& in_omega) {
    const double gx = in_omega[e.i] ? g(e.i) : 0.0;
    const double gy = in_omega[e.j] ? g(e.j) : 0.0;
    return std::abs(u(e.i) - u(e.j)) - e.length * (gx + gy) / 2;
}

// Points of F with no edge path to X \ Omega.
bool f_disconnected(const Space& space, const PointSet& F, const std::vector<char>& in_omega) {
    const Index n = space.size();
    const auto adj = adjacency(space);
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Index> stack;
    for (Index x = 0; x < n; ++x)
        if (!in_omega[x]) {
            seen[x] = 1;
            stack.push_back(x);
        }
    while (!stack.empty()) {
        const Index v = stack.back();
        stack.pop_back();
        for (auto [w, l] : adj[v])
            if (!seen[w]) {
                seen[w] = 1;
                stack.push_back(w);
            }
    }
    return std::any_of(F.begin(), F.end(), [&](Index i) { return !seen[i]; });
}

}  // namespace

double variational_residual(const CapacityProblem& problem, const Vec<double>& u, const Vec<double>& g) {
    const Space& space = *problem.space;
    const Index n = space.size();
    const auto in_omega = problem.omega->mask(n);
    double worst = 0;
    for (Index i : problem.F) worst = std::max(worst, 1 - u(i));
    for (Index x = 0; x < n; ++x) {
        worst = std::max({worst, -g(x), -u(x), u(x) - 1});
        if (!in_omega[x]) worst = std::max({worst, std::abs(u(x)), std::abs(g(x))});
    }
    for (const auto& e : space.edges()) worst = std::max(worst, edge_excess(e, u, g, in_omega));
    return worst;
}

CapacityResult solve_variational_capacity(const CapacityProblem& problem, const SolverOptions& options) {
    require(problem.kind == CapacityKind::variational, ErrorKind::invalid_problem, "expected a variational problem");
    problem.validate();
    const Space& space = *problem.space;
    const Index n = space.size();
    const PointSet& omega = *problem.omega;
    const auto in_omega = omega.mask(n);

    if (problem.F.empty()) {
        auto r = zero_field_result(n, "trivial");
        r.u = Vec<double>::Zero(n);
        r.g = Vec<double>::Zero(n);
        return r;
    }

    const ULayout L(n, problem.F, omega);
    std::vector<Index> gvar(static_cast<std::size_t>(n), -1);
    Index nv = L.num_free;
    for (Index x : omega) gvar[x] = nv++;

    PowerProgram prog(nv, problem.p);
    set_u_bounds(prog, L);
    for (Index x : omega) {
        prog.set_bounds(gvar[x], 0, std::numeric_limits<double>::infinity());
        prog.set_energy(gvar[x], space.weight(x));
    }
    for (const auto& e : space.edges())
        add_difference_rows(prog, L, e.i, e.j, gvar[e.i], e.length / 2, gvar[e.j], e.length / 2);

    CapacityResult res;
    res.disconnected = f_disconnected(space, problem.F, in_omega);
    const auto ipm = solve_checked(prog, options.ipm);
    res.iterations = ipm.iterations;
    res.method = ipm_tag(ipm);
    Vec<double> u = L.extract(ipm.z);
    Vec<double> g = Vec<double>::Zero(n);
    for (Index x : omega) g(x) = std::max(ipm.z(gvar[x]), 0.0);

    for (const auto& e : space.edges()) {
        const double excess = edge_excess(e, u, g, in_omega);
        if (excess <= 0) continue;
        const int slots = int(in_omega[e.i]) + int(in_omega[e.j]);
        const double bump = excess / (slots * e.length / 2);
        for (Index v : {e.i, e.j})
            if (in_omega[v]) g(v) += bump;
        Index v = in_omega[e.i] ? e.i : e.j;
        while (edge_excess(e, u, g, in_omega) > 0) g(v) = std::nextafter(g(v), 2 * g(v) + 1);
    }

    res.u = u;
    res.g = g;
    res.value = CapacityValue::finite(energy(space, g, problem.p, &omega));
    res.feasibility_residual = variational_residual(problem, u, g);
    return res;
}

// ---------------------------------------------------------------------------
// Riesz

double riesz_residual(const CapacityProblem& problem, const Vec<double>& f) {
    const Space& space = *problem.space;
    double worst = std::max(0.0, -f.minCoeff());
    for (Index j : problem.F) worst = std::max(worst, 1 - riesz_potential_at(space, f, problem.beta, j));
    return worst;
}

CapacityResult solve_riesz_capacity(const CapacityProblem& problem, const SolverOptions& options) {
    require(problem.kind == CapacityKind::riesz, ErrorKind::invalid_problem, "expected a riesz problem");
    problem.validate();
    const Space& space = *problem.space;
    const Index n = space.size();

    if (problem.F.empty()) {
        auto r = zero_field_result(n, "trivial");
        r.f = Vec<double>::Zero(n);
        return r;
    }
    if (n == 1) {
        CapacityResult r;
        r.value = CapacityValue::infinity();
        r.method = "zero-kernel-row";
        r.certified = true;
        return r;
    }

    PowerProgram prog(n, problem.p);
    for (Index x = 0; x < n; ++x) {
        prog.set_bounds(x, 0, std::numeric_limits<double>::infinity());
        prog.set_energy(x, space.weight(x));
    }
    for (Index j : problem.F) {
        Row row;
        detail::for_each_kernel_term(space, j, [&](Index y, double d, double m) {
            row.push_back({y, space.weight(y) * std::pow(d, problem.beta) / m});
        });
        prog.add_row(row, 1);
    }
    const auto ipm = solve_checked(prog, options.ipm);
    Vec<double> f = ipm.z.cwiseMax(0.0);
    double low = std::numeric_limits<double>::infinity();
    for (Index j : problem.F) low = std::min(low, riesz_potential_at(space, f, problem.beta, j));
    if (low > 0 && low < 1) f /= low;
    for (int guard = 0; guard < 8 && riesz_residual(problem, f) > 0; ++guard) f *= 1 + 1e-15;

    CapacityResult res;
    res.iterations = ipm.iterations;
    res.method = ipm_tag(ipm);
    res.f = f;
    res.value = CapacityValue::finite(energy(space, f, problem.p));
    res.feasibility_residual = riesz_residual(problem, f);
    return res;
}

// ---------------------------------------------------------------------------
// Hausdorff content

double cover_cost(const Space& space, const Cover& cover, double q) {
    double c = 0;
    for (const auto& b : cover.balls) c += space.ball_mass(b.center, b.radius) * std::pow(b.radius, -q);
    return c;
}

bool cover_contains(const Space& space, const Cover& cover, const PointSet& F) {
    for (Index z : F) {
        bool hit = false;
        for (const auto& b : cover.balls) hit = hit || space.dist(b.center, z) < b.radius;
        if (!hit) return false;
    }
    return true;
}

namespace {

using Bits = std::vector<std::uint64_t>;

struct Candidate {
    Index center;
    double radius;
    double cost;
    Bits mask;
};

bool subset_bits(const Bits& a, const Bits& b) {
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] & ~b[k]) return false;
    return true;
}

/// One candidate per distinct F-coverage, keeping the cheapest ball.
std::vector<Candidate> content_candidates(const Space& space, const PointSet& F, double q, double rho) {
    const Index n = space.size();
    std::vector<Index> fpos(static_cast<std::size_t>(n), -1);
    Index k = 0;
    for (Index z : F) fpos[z] = k++;
    const std::size_t words = (F.size() + 63) / 64;

    std::map<Bits, Candidate> best;
    auto offer = [&](Index c, double r, Index count, const Bits& mask) {
        if (std::all_of(mask.begin(), mask.end(), [](auto w) { return w == 0; })) return;
        const double cost = space.prefix_mass(c, count) * std::pow(r, -q);
        auto it = best.find(mask);
        if (it == best.end()) best.emplace(mask, Candidate{c, r, cost, mask});
        else if (cost < it->second.cost) it->second = Candidate{c, r, cost, mask};
    };
    for (Index c = 0; c < n; ++c) {
        const auto order = space.neighbor_order(c);
        const auto dist = space.sorted_distances(c);
        Bits mask(words, 0);
        // members of the open ball of radius dist[j] are order[0..j)
        Index j = 0;
        while (true) {
            // extend to the next distinct distance
            const Index start = j;
            while (j < n && (j == start || dist[j] == dist[start])) {
                const Index pos = fpos[order[j]];
                if (pos >= 0) mask[pos / 64] |= std::uint64_t{1} << (pos % 64);
                ++j;
            }
            if (j >= n || dist[j] > rho) break;
            offer(c, dist[j], j, mask);
        }
        // radius rho itself
        const Index count = space.ball_count(c, rho);
        Bits rmask(words, 0);
        for (Index t = 0; t < count; ++t) {
            const Index pos = fpos[order[t]];
            if (pos >= 0) rmask[pos / 64] |= std::uint64_t{1} << (pos % 64);
        }
        offer(c, rho, count, rmask);
    }
    std::vector<Candidate> out;
    out.reserve(best.size());
    for (auto& [m, cand] : best) out.push_back(std::move(cand));
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return a.cost < b.cost || (a.cost == b.cost && std::tie(a.center, a.radius) < std::tie(b.center, b.radius));
    });
    return out;
}

/// Drops candidates covered by a no-more-expensive candidate.
std::vector<Candidate> prune_dominated(std::vector<Candidate> cands) {
    std::vector<Candidate> kept;
    for (auto& c : cands) {  // sorted by cost, so earlier ones are no more expensive
        bool dominated = false;
        for (const auto& k : kept)
            if (subset_bits(c.mask, k.mask)) {
                dominated = true;
                break;
            }
        if (!dominated) kept.push_back(std::move(c));
    }
    return kept;
}

struct CoverSearch {
    std::vector<double> fw;       // weight per F position
    std::vector<double> ratio;    // min cost/mu(B cap F) over candidates containing the point
    double lower_bound(const Bits& uncovered) const {
        double lb = 0;
        for (std::size_t w = 0; w < uncovered.size(); ++w)
            for (auto bits = uncovered[w]; bits; bits &= bits - 1) {
                const std::size_t pos = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
                lb += fw[pos] * ratio[pos];
            }
        return lb;
    }
};

std::vector<std::size_t> greedy_cover(const std::vector<Candidate>& cands, const std::vector<double>& fw, Bits uncovered) {
    std::vector<std::size_t> chosen;
    auto covered_mass = [&](const Bits& m) {
        double s = 0;
        for (std::size_t w = 0; w < m.size(); ++w)
            for (auto bits = m[w] & uncovered[w]; bits; bits &= bits - 1)
                s += fw[w * 64 + static_cast<std::size_t>(std::countr_zero(bits))];
        return s;
    };
    while (std::any_of(uncovered.begin(), uncovered.end(), [](auto w) { return w != 0; })) {
        std::size_t best = cands.size();
        double best_eff = -1, best_mass = 0;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            const double m = covered_mass(cands[i].mask);
            if (m <= 0) continue;
            const double eff = m / cands[i].cost;
            if (eff > best_eff * (1 + 1e-12) || (eff >= best_eff * (1 - 1e-12) && m > best_mass)) {
                best = i;
                best_eff = eff;
                best_mass = m;
            }
        }
        chosen.push_back(best);
        for (std::size_t w = 0; w < uncovered.size(); ++w) uncovered[w] &= ~cands[best].mask[w];
    }
    // drop balls made redundant by later choices, most expensive first
    std::sort(chosen.begin(), chosen.end(), [&](auto a, auto b) { return cands[a].cost > cands[b].cost; });
    for (std::size_t k = 0; k < chosen.size();) {
        Bits rest(uncovered.size(), 0);
        for (std::size_t t = 0; t < chosen.size(); ++t)
            if (t != k)
                for (std::size_t w = 0; w < rest.size(); ++w) rest[w] |= cands[chosen[t]].mask[w];
        if (subset_bits(cands[chosen[k]].mask, rest)) chosen.erase(chosen.begin() + static_cast<long>(k));
        else ++k;
    }
    return chosen;
}

}  // namespace

CapacityResult solve_hausdorff_content(const CapacityProblem& problem, const SolverOptions& options) {
    require(problem.kind == CapacityKind::content, ErrorKind::invalid_problem, "expected a content problem");
    problem.validate();
    const Space& space = *problem.space;
    CapacityResult res;
    if (problem.F.empty()) {
        res.value = CapacityValue::finite(0);
        res.cover = Cover{};
        res.method = "trivial";
        res.certified = true;
        return res;
    }

    const auto m = problem.F.size();
    std::vector<double> fw;
    for (Index z : problem.F) fw.push_back(space.weight(z));
    const bool exact = static_cast<Index>(m) <= options.content_exact_limit;
    auto cands = content_candidates(space, problem.F, problem.q, problem.rho);
    if (exact || cands.size() <= 4000) cands = prune_dominated(std::move(cands));

    CoverSearch search{fw, std::vector<double>(m, std::numeric_limits<double>::infinity())};
    for (const auto& c : cands) {
        double covered = 0;
        for (std::size_t pos = 0; pos < m; ++pos)
            if (c.mask[pos / 64] >> (pos % 64) & 1) covered += fw[pos];
        for (std::size_t pos = 0; pos < m; ++pos)
            if (c.mask[pos / 64] >> (pos % 64) & 1) search.ratio[pos] = std::min(search.ratio[pos], c.cost / covered);
    }
    Bits all((m + 63) / 64, 0);
    for (std::size_t pos = 0; pos < m; ++pos) all[pos / 64] |= std::uint64_t{1} << (pos % 64);
    const double root_lb = search.lower_bound(all);

    auto chosen = greedy_cover(cands, fw, all);
    double best_cost = 0;
    for (auto i : chosen) best_cost += cands[i].cost;
    bool complete = false;
    long nodes = 0;

    if (exact) {
        // per point, the candidates that contain it, in increasing cost
        std::vector<std::vector<std::size_t>> holders(m);
        for (std::size_t i = 0; i < cands.size(); ++i)
            for (std::size_t pos = 0; pos < m; ++pos)
                if (cands[i].mask[0] >> pos & 1) holders[pos].push_back(i);
        std::vector<std::size_t> stack;
        bool aborted = false;
        std::function<void(std::uint64_t, double)> dfs = [&](std::uint64_t unc, double cost) {
            if (aborted) return;
            if (++nodes > options.content_node_limit) {
                aborted = true;
                return;
            }
            if (unc == 0) {
                if (cost < best_cost) {
                    best_cost = cost;
                    chosen = stack;
                }
                return;
            }
            if (cost + search.lower_bound(Bits{unc}) >= best_cost * (1 - 1e-14)) return;
            std::size_t pick = m;
            std::size_t fewest = std::numeric_limits<std::size_t>::max();
            for (auto bits = unc; bits; bits &= bits - 1) {
                const auto pos = static_cast<std::size_t>(std::countr_zero(bits));
                if (holders[pos].size() < fewest) {
                    fewest = holders[pos].size();
                    pick = pos;
                }
            }
            for (std::size_t i : holders[pick]) {
                stack.push_back(i);
                dfs(unc & ~cands[i].mask[0], cost + cands[i].cost);
                stack.pop_back();
            }
        };
        dfs(all[0], 0.0);
        complete = !aborted;
    }

    Cover cover;
    for (auto i : chosen) cover.balls.push_back({cands[i].center, cands[i].radius});
    std::sort(cover.balls.begin(), cover.balls.end(),
              [](const auto& a, const auto& b) { return std::tie(a.center, a.radius) < std::tie(b.center, b.radius); });
    cover.cost = cover_cost(space, cover, problem.q);
    res.value = CapacityValue::finite(cover.cost);
    res.lower_bound = complete ? cover.cost : std::min(root_lb, cover.cost);
    res.optimality_gap = cover.cost > 0 ? (cover.cost - res.lower_bound) / cover.cost : 0.0;
    res.certified = complete || res.optimality_gap <= 1e-12;
    res.method = exact ? (complete ? "bnb-exact" : "bnb-node-limit") : "greedy";
    res.iterations = exact ? nodes : static_cast<long>(chosen.size());
    res.feasibility_residual = cover_contains(space, cover, problem.F) ? 0.0 : 1.0;
    res.cover = std::move(cover);
    return res;
}

CapacityResult solve_capacity(const CapacityProblem& problem, const SolverOptions& options) {
    switch (problem.kind) {
        case CapacityKind::riesz: return solve_riesz_capacity(problem, options);
        case CapacityKind::hajlasz: return solve_hajlasz_capacity(problem, options);
        case CapacityKind::variational: return solve_variational_capacity(problem, options);
        case CapacityKind::content: return solve_hausdorff_content(problem, options);
    }
    throw Error(ErrorKind::internal, "unhandled capacity kind");
}

}  // namespace caplab
