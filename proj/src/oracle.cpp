#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "caplab/capacity.hpp"

namespace caplab {

namespace {

struct Modulus {
    Eigen::MatrixXd M;  // rows: constraints (M z >= 1), cols: variables
    Eigen::VectorXd w;
    double p = 2;
};

struct ModulusSolution {
    Eigen::VectorXd z;
    double value = 0;
    long sweeps = 0;
    bool certified = false;
    bool infinite = false;
};

Eigen::VectorXd primal_of(const Modulus& P, const Eigen::VectorXd& y) {
    Eigen::VectorXd z(y.size());
    for (Index i = 0; i < y.size(); ++i) z(i) = y(i) > 0 ? std::pow(y(i) / (P.p * P.w(i)), 1 / (P.p - 1)) : 0.0;
    return z;
}

/// Dual coordinate ascent on max_lambda>=0 sum lambda - (p-1) sum w z(M^T lambda)^p.
ModulusSolution solve_modulus(const Modulus& P) {
    ModulusSolution s;
    const Index rows = P.M.rows(), vars = P.M.cols();
    s.z = Eigen::VectorXd::Zero(vars);
    if (rows == 0) {
        s.certified = true;
        return s;
    }
    for (Index k = 0; k < rows; ++k)
        if (P.M.row(k).maxCoeff() <= 0) {
            s.infinite = true;
            s.certified = true;
            return s;
        }
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(rows);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(vars);
    const double e = 1 / (P.p - 1);
    auto row_value = [&](Index k, const Eigen::VectorXd& base, double t) {
        double acc = 0;
        for (Index i = 0; i < vars; ++i) {
            const double a = P.M(k, i);
            if (a == 0) continue;
            const double yi = base(i) + t * a;
            if (yi > 0) acc += a * std::pow(yi / (P.p * P.w(i)), e);
        }
        return acc;
    };
    double best_ub = std::numeric_limits<double>::infinity();
    for (long sweep = 1; sweep <= 2'000'000; ++sweep) {
        for (Index k = 0; k < rows; ++k) {
            const Eigen::VectorXd base = y - lambda(k) * P.M.row(k).transpose();
            double t = 0;
            if (row_value(k, base, 0) < 1) {
                double lo = 0, hi = std::max(1e-300, 2 * lambda(k));
                while (row_value(k, base, hi) < 1) hi *= 2;
                for (int it = 0; it < 200 && hi - lo > 1e-17 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (row_value(k, base, mid) < 1 ? lo : hi) = mid;
                }
                t = hi;
            }
            lambda(k) = t;
            y = base + t * P.M.row(k).transpose();
        }
        const Eigen::VectorXd z = primal_of(P, y);
        const double minrow = (P.M * z).minCoeff();
        if (minrow <= 0) continue;
        double ez = 0;
        for (Index i = 0; i < vars; ++i) ez += P.w(i) * std::pow(z(i), P.p);
        const double ub = ez / std::pow(minrow, P.p);
        const double lb = lambda.sum() - (P.p - 1) * ez;
        if (ub < best_ub) {
            best_ub = ub;
            s.z = z / minrow;
            s.value = ub;
        }
        s.sweeps = sweep;
        if (best_ub - lb <= 1e-10 * best_ub) {
            s.certified = true;
            break;
        }
    }
    return s;
}

/// Simple paths from a point of F to a point off Omega whose interior avoids F
/// and the complement, visiting vertices through `next(v)`.
void enumerate_paths(Index n, const std::vector<char>& in_f, const std::vector<char>& in_omega,
                     const std::function<std::vector<Index>(Index)>& next,
                     const std::function<void(const std::vector<Index>&)>& emit) {
    std::vector<Index> path;
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    std::function<void(Index)> walk = [&](Index v) {
        for (Index w : next(v)) {
            if (used[w] || in_f[w]) continue;
            path.push_back(w);
            if (!in_omega[w]) {
                emit(path);
            } else {
                used[w] = 1;
                walk(w);
                used[w] = 0;
            }
            path.pop_back();
        }
    };
    for (Index s = 0; s < n; ++s) {
        if (!in_f[s]) continue;
        path = {s};
        used[s] = 1;
        walk(s);
        used[s] = 0;
    }
}

/// u = min(1, cost-distance to X \ Omega) under symmetric edge costs.
Vec<double> potential_from_costs(Index n, const Eigen::MatrixXd& cost, const std::vector<char>& in_omega,
                                 const std::vector<char>& in_f) {
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd d = cost;
    for (Index i = 0; i < n; ++i) d(i, i) = 0;
    for (Index k = 0; k < n; ++k)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    Vec<double> u(n);
    for (Index x = 0; x < n; ++x) {
        double to_out = inf;
        for (Index y = 0; y < n; ++y)
            if (!in_omega[y]) to_out = std::min(to_out, d(x, y));
        u(x) = in_f[x] ? 1.0 : std::min(1.0, to_out);
    }
    return u;
}

CapacityResult from_modulus(const ModulusSolution& s) {
    CapacityResult r;
    r.value = s.infinite ? CapacityValue::infinity() : CapacityValue::finite(s.value);
    r.iterations = s.sweeps;
    r.certified = s.certified;
    r.method = "path-modulus-dual";
    return r;
}

CapacityResult oracle_riesz(const CapacityProblem& P) {
    const Space& X = *P.space;
    const Index n = X.size();
    Modulus mod{Eigen::MatrixXd::Zero(static_cast<Index>(P.F.size()), n), X.weights(), P.p};
    Index k = 0;
    for (Index j : P.F) {
        for (Index y = 0; y < n; ++y) {
            if (y == j) continue;
            const double d = X.dist(j, y);
            double ball = 0;
            for (Index z = 0; z < n; ++z)
                if (X.dist(j, z) < d) ball += X.weight(z);
            mod.M(k, y) = X.weight(y) * std::pow(d, P.beta) / ball;
        }
        ++k;
    }
    const auto s = solve_modulus(mod);
    auto r = from_modulus(s);
    if (!s.infinite) {
        r.f = s.z;
        r.feasibility_residual = riesz_residual(P, s.z);
    }
    return r;
}

CapacityResult oracle_hajlasz(const CapacityProblem& P) {
    const Space& X = *P.space;
    const Index n = X.size();
    const auto in_f = P.F.mask(n);
    const auto in_omega = P.omega->mask(n);
    std::vector<Eigen::VectorXd> rows;
    std::vector<Index> everyone(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) everyone[i] = i;
    enumerate_paths(n, in_f, in_omega, [&](Index) { return everyone; }, [&](const std::vector<Index>& path) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        for (std::size_t t = 0; t + 1 < path.size(); ++t) {
            const double c = std::pow(X.dist(path[t], path[t + 1]), P.beta);
            row(path[t]) += c;
            row(path[t + 1]) += c;
        }
        rows.push_back(row);
    });
    Modulus mod{Eigen::MatrixXd(static_cast<Index>(rows.size()), n), X.weights(), P.p};
    for (std::size_t k = 0; k < rows.size(); ++k) mod.M.row(static_cast<Index>(k)) = rows[k].transpose();
    const auto s = solve_modulus(mod);
    auto r = from_modulus(s);
    Eigen::MatrixXd cost(n, n);
    for (Index x = 0; x < n; ++x)
        for (Index y = 0; y < n; ++y) cost(x, y) = std::pow(X.dist(x, y), P.beta) * (s.z(x) + s.z(y));
    Vec<double> u = potential_from_costs(n, cost, in_omega, in_f);
    r.u = u;
    r.g = s.z;
    r.feasibility_residual = hajlasz_residual(P, u, s.z);
    return r;
}

CapacityResult oracle_variational(const CapacityProblem& P) {
    const Space& X = *P.space;
    const Index n = X.size();
    const auto in_f = P.F.mask(n);
    const auto in_omega = P.omega->mask(n);
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd len = Eigen::MatrixXd::Constant(n, n, inf);
    std::vector<std::vector<Index>> nbr(static_cast<std::size_t>(n));
    for (const auto& e : X.edges()) {
        if (len(e.i, e.j) == inf) {
            nbr[e.i].push_back(e.j);
            nbr[e.j].push_back(e.i);
        }
        len(e.i, e.j) = len(e.j, e.i) = std::min(len(e.i, e.j), e.length);
    }
    std::vector<Index> var(static_cast<std::size_t>(n), -1);
    Index nv = 0;
    for (Index x : *P.omega) var[x] = nv++;
    Eigen::VectorXd w(nv);
    for (Index x : *P.omega) w(var[x]) = X.weight(x);

    std::vector<Eigen::VectorXd> rows;
    enumerate_paths(n, in_f, in_omega, [&](Index v) { return nbr[v]; }, [&](const std::vector<Index>& path) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(nv);
        for (std::size_t t = 0; t + 1 < path.size(); ++t)
            for (Index v : {path[t], path[t + 1]})
                if (var[v] >= 0) row(var[v]) += len(path[t], path[t + 1]) / 2;
        rows.push_back(row);
    });
    Modulus mod{Eigen::MatrixXd(static_cast<Index>(rows.size()), nv), w, P.p};
    for (std::size_t k = 0; k < rows.size(); ++k) mod.M.row(static_cast<Index>(k)) = rows[k].transpose();
    const auto s = solve_modulus(mod);
    auto r = from_modulus(s);
    Vec<double> g = Vec<double>::Zero(n);
    for (Index x : *P.omega) g(x) = s.z(var[x]);
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, inf);
    for (Index x = 0; x < n; ++x)
        for (Index y : nbr[x]) cost(x, y) = len(x, y) * (g(x) + g(y)) / 2;
    Vec<double> u = potential_from_costs(n, cost, in_omega, in_f);
    r.u = u;
    r.g = g;
    r.feasibility_residual = variational_residual(P, u, g);
    return r;
}

CapacityResult oracle_content(const CapacityProblem& P) {
    const Space& X = *P.space;
    const Index n = X.size();
    std::vector<Index> fpos(static_cast<std::size_t>(n), -1);
    Index m = 0;
    for (Index z : P.F) fpos[z] = m++;
    const std::uint32_t full = (1u << m) - 1;

    struct Ball { Index c; double r; double cost; std::uint32_t mask; };
    std::vector<Ball> balls;
    for (Index c = 0; c < n; ++c) {
        std::vector<double> radii{P.rho};
        for (Index y = 0; y < n; ++y)
            if (y != c && X.dist(c, y) <= P.rho) radii.push_back(X.dist(c, y));
        for (double r : radii) {
            double mass = 0;
            std::uint32_t mask = 0;
            for (Index z = 0; z < n; ++z)
                if (X.dist(c, z) < r) {
                    mass += X.weight(z);
                    if (fpos[z] >= 0) mask |= 1u << fpos[z];
                }
            balls.push_back({c, r, mass * std::pow(r, -P.q), mask});
        }
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(full + 1, inf);
    std::vector<std::pair<std::uint32_t, int>> from(full + 1, {0, -1});
    dp[0] = 0;
    for (std::uint32_t s = 0; s <= full; ++s) {
        if (dp[s] == inf) continue;
        for (std::size_t b = 0; b < balls.size(); ++b) {
            const std::uint32_t t = s | balls[b].mask;
            if (t != s && dp[s] + balls[b].cost < dp[t]) {
                dp[t] = dp[s] + balls[b].cost;
                from[t] = {s, static_cast<int>(b)};
            }
        }
    }
    CapacityResult r;
    Cover cover;
    for (std::uint32_t s = full; s != 0; s = from[s].first) {
        const auto& b = balls[static_cast<std::size_t>(from[s].second)];
        cover.balls.push_back({b.c, b.r});
    }
    cover.cost = dp[full];
    r.value = CapacityValue::finite(dp[full]);
    r.feasibility_residual = cover_contains(X, cover, P.F) ? 0.0 : 1.0;
    r.cover = std::move(cover);
    r.certified = true;
    r.method = "subset-dp";
    r.iterations = static_cast<long>(balls.size());
    return r;
}

}  // namespace

CapacityResult brute_force_capacity(const CapacityProblem& problem) {
    problem.validate();
    const Index n = problem.space->size();
    const Index limit = problem.kind == CapacityKind::content ? 8 : 5;
    require(n <= limit, ErrorKind::refused,
            "brute-force oracle accepts at most " + std::to_string(limit) + " points");
    switch (problem.kind) {
        case CapacityKind::riesz: return oracle_riesz(problem);
        case CapacityKind::hajlasz: return oracle_hajlasz(problem);
        case CapacityKind::variational: return oracle_variational(problem);
        case CapacityKind::content: return oracle_content(problem);
    }
    throw Error(ErrorKind::internal, "unhandled capacity kind");
}

}  // namespace caplab
