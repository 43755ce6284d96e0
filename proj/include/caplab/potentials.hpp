#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "caplab/space.hpp"
#include "caplab/stats.hpp"

namespace caplab {

/// Values on the points of a space, with optional Hoelder metadata.
template <typename Scalar>
struct FieldVector {
    Vec<Scalar> values;
    std::optional<Scalar> holder_exponent;
    std::optional<Scalar> holder_constant;
};

template <typename Scalar>
struct HajlaszCheck {
    bool ok = true;
    Index worst_i = 0;
    Index worst_j = 0;
    Scalar worst_slack = std::numeric_limits<Scalar>::infinity();  // d^beta (g_x + g_y) - |u_x - u_y|
};

template <typename Scalar>
struct KernelReport {
    Scalar beta = 0;
    Scalar eta = 0;
    Scalar c_K_observed = 0;
    Index samples = 0;
    bool vacuous = true;
    bool exhaustive = true;
};

template <typename Scalar>
struct GradientOfPotentialReport {
    Scalar C1_observed = 0;
    Index worst_i = 0;
    Index worst_j = 0;
    Scalar c_mu = 1;
    Scalar c_K = 0;
    Scalar C1_bound = 0;  // constant assembled from the local estimate and the kernel tail sum
};

template <typename Scalar>
struct LocalRieszCheck {
    Scalar lhs = 0;
    Scalar rhs = 0;
    Scalar c_mu = 1;
    bool ok = true;
};

template <typename Scalar>
struct PoincareReport {
    bool ok = true;
    Ball<Scalar> worst_ball{};
    Scalar worst_ratio = 0;  // lhs / rhs, 0 when both vanish
    Scalar worst_lhs = 0;
    Scalar worst_rhs = 0;
    Index balls_checked = 0;
};

template <typename Scalar>
struct LeibnizResult {
    Vec<Scalar> gradient;
    HajlaszCheck<Scalar> check;  // gradient verified against u * psi
};

namespace detail {

template <typename Scalar>
void require_nonnegative(const Vec<Scalar>& f, const char* what) {
    for (Index i = 0; i < f.size(); ++i)
        require(f(i) >= 0, ErrorKind::invalid_input, std::string(what) + " must be nonnegative");
}

template <typename Scalar>
void require_length(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& f, const char* what) {
    require(f.size() == space.size(), ErrorKind::invalid_input,
            std::string(what) + " length does not match the number of points");
}

/// Walks the points by increasing distance from x and hands each y != x to
/// visit(y, d(x,y), mu(B(x, d(x,y)))) with the open-ball mass.
template <typename Scalar, typename Visit>
void for_each_kernel_term(const MetricMeasureSpace<Scalar>& space, Index x, Visit&& visit) {
    auto order = space.neighbor_order(x);
    auto dist = space.sorted_distances(x);
    const Index n = space.size();
    Index group_start = 0;
    for (Index k = 1; k < n; ++k) {
        if (dist[k] != dist[k - 1]) group_start = k;
        visit(order[k], dist[k], space.prefix_mass(x, group_start));
    }
}

}  // namespace detail

/// Riesz kernel d(x,z)^beta / mu(B(x, d(x,z))), zero on the diagonal.
template <typename Scalar>
Mat<Scalar> riesz_kernel(const MetricMeasureSpace<Scalar>& space, Scalar beta) {
    const Index n = space.size();
    Mat<Scalar> k = Mat<Scalar>::Zero(n, n);
    for (Index x = 0; x < n; ++x)
        detail::for_each_kernel_term(space, x, [&](Index y, Scalar d, Scalar m) {
            k(x, y) = std::pow(d, beta) / m;
        });
    return k;
}

/**
 * I_beta f(x) = sum over y with d(x,y) > exclude_radius of
 * f(y) mu({y}) d(x,y)^beta / mu(B(x, d(x,y))). The self term is zero.
 */
template <typename Scalar>
Scalar riesz_potential_at(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& f, Scalar beta,
                          Index x, Scalar exclude_radius = 0) {
    Scalar total = 0;
    detail::for_each_kernel_term(space, x, [&](Index y, Scalar d, Scalar m) {
        if (d > exclude_radius && f(y) != 0) total += f(y) * space.weight(y) * std::pow(d, beta) / m;
    });
    return total;
}

template <typename Scalar>
Vec<Scalar> riesz_potential(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& f, Scalar beta,
                            Scalar exclude_radius = 0) {
    detail::require_length(space, f, "f");
    detail::require_nonnegative(f, "f");
    require(beta > 0, ErrorKind::invalid_parameter, "beta must be positive");
    require(exclude_radius >= 0, ErrorKind::invalid_parameter, "exclude_radius must be nonnegative");
    Vec<Scalar> out(space.size());
    for (Index x = 0; x < space.size(); ++x) out(x) = riesz_potential_at(space, f, beta, x, exclude_radius);
    return out;
}

/**
 * Non-centred maximal function over realized open balls.
 *
 * The distinct open balls about c are the prefixes of neighbor_order(c) cut at
 * distance-group boundaries. A point in group g lies in every prefix from g on,
 * so it receives the suffix maximum of the prefix averages.
 */
template <typename Scalar>
Vec<Scalar> maximal_function(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& f) {
    detail::require_length(space, f, "f");
    const Index n = space.size();
    Vec<Scalar> mf = Vec<Scalar>::Zero(n);
    std::vector<Scalar> avg(static_cast<std::size_t>(n));
    std::vector<Index> group_end;
    for (Index c = 0; c < n; ++c) {
        auto order = space.neighbor_order(c);
        auto dist = space.sorted_distances(c);
        group_end.clear();
        Scalar integral = 0;
        for (Index k = 0; k < n; ++k) {
            integral += std::abs(f(order[k])) * space.weight(order[k]);
            if (k + 1 == n || dist[k + 1] != dist[k]) {
                group_end.push_back(k + 1);
                avg[group_end.size() - 1] = integral / space.prefix_mass(c, k + 1);
            }
        }
        Scalar best = 0;
        Index k = n;
        for (std::size_t g = group_end.size(); g-- > 0;) {
            best = std::max(best, avg[g]);
            const Index start = g == 0 ? 0 : group_end[g - 1];
            for (; k > start; --k) mf(order[k - 1]) = std::max(mf(order[k - 1]), best);
        }
    }
    return mf;
}

/// Checks |u(x) - u(y)| <= d(x,y)^beta (g(x) + g(y)) on every pair.
template <typename Scalar>
HajlaszCheck<Scalar> verify_hajlasz_gradient(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& u,
                                             const Vec<Scalar>& g, Scalar beta,
                                             Scalar tolerance = Scalar(1e-12)) {
    detail::require_length(space, u, "u");
    detail::require_length(space, g, "g");
    detail::require_nonnegative(g, "g");
    HajlaszCheck<Scalar> rep;
    const Index n = space.size();
    for (Index x = 0; x < n; ++x)
        for (Index y = x + 1; y < n; ++y) {
            const Scalar slack = std::pow(space.dist(x, y), beta) * (g(x) + g(y)) - std::abs(u(x) - u(y));
            if (slack < rep.worst_slack) {
                rep.worst_slack = slack;
                rep.worst_i = x;
                rep.worst_j = y;
            }
        }
    const Scalar scale = std::max(Scalar(1), u.cwiseAbs().maxCoeff());
    rep.ok = n < 2 || rep.worst_slack >= -tolerance * scale;
    return rep;
}

/// g(x) = max over y != x of |u(x) - u(y)| / d(x,y)^beta.
template <typename Scalar>
Vec<Scalar> canonical_gradient(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& u, Scalar beta) {
    detail::require_length(space, u, "u");
    const Index n = space.size();
    Vec<Scalar> g = Vec<Scalar>::Zero(n);
    for (Index x = 0; x < n; ++x)
        for (Index y = 0; y < n; ++y)
            if (y != x) g(x) = std::max(g(x), std::abs(u(x) - u(y)) / std::pow(space.dist(x, y), beta));
    return g;
}

/// Smallest kappa with |psi(x) - psi(y)| <= kappa d(x,y)^beta.
template <typename Scalar>
Scalar holder_constant(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& psi, Scalar beta) {
    detail::require_length(space, psi, "psi");
    Scalar kappa = 0;
    for (Index x = 0; x < space.size(); ++x)
        for (Index y = x + 1; y < space.size(); ++y)
            kappa = std::max(kappa, std::abs(psi(x) - psi(y)) / std::pow(space.dist(x, y), beta));
    return kappa;
}

/**
 * Observed kernel-estimate constant: the supremum over w != y and
 * z outside B(w, 2 d(w,y)) of
 *   |k(w,z) - k(y,z)| d(w,z)^(eta-beta) mu(B(w,d(w,z))) / d(w,y)^eta.
 * Exhaustive up to exhaustive_limit points, otherwise `samples` uniform
 * random triples drawn with a fixed seed.
 */
template <typename Scalar>
KernelReport<Scalar> kernel_estimate_measure(const MetricMeasureSpace<Scalar>& space, Scalar beta, Scalar eta,
                                             std::uint64_t seed = 0, Index exhaustive_limit = 200,
                                             Index samples = 1000000) {
    require(beta > 0 && beta < eta, ErrorKind::invalid_parameter, "kernel estimate needs 0 < beta < eta");
    const Index n = space.size();
    const Mat<Scalar> k = riesz_kernel(space, beta);
    Mat<Scalar> ball = Mat<Scalar>::Zero(n, n);  // mu(B(w, d(w,z)))
    for (Index w = 0; w < n; ++w)
        detail::for_each_kernel_term(space, w, [&](Index z, Scalar, Scalar m) { ball(w, z) = m; });

    KernelReport<Scalar> rep{beta, eta, 0, 0, true, n <= exhaustive_limit};
    auto visit = [&](Index w, Index y, Index z) {
        const Scalar dwy = space.dist(w, y);
        const Scalar dwz = space.dist(w, z);
        if (w == y || dwz < 2 * dwy) return;
        const Scalar ratio = std::abs(k(w, z) - k(y, z)) * std::pow(dwz, eta - beta) * ball(w, z) /
                             std::pow(dwy, eta);
        rep.c_K_observed = std::max(rep.c_K_observed, ratio);
        ++rep.samples;
        rep.vacuous = false;
    };
    if (rep.exhaustive) {
        for (Index w = 0; w < n; ++w)
            for (Index y = 0; y < n; ++y)
                for (Index z = 0; z < n; ++z) visit(w, y, z);
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        for (Index s = 0; s < samples; ++s) {
            const Index w = pick(rng), y = pick(rng), z = pick(rng);
            visit(w, y, z);
        }
    }
    return rep;
}

/**
 * Largest |I_beta f(w) - I_beta f(y)| / (d(w,y)^beta (Mf(w) + Mf(y))) over
 * pairs (0/0 counts as 0), together with the constant assembled from
 * c_mu, beta, eta and c_K:
 *   max(c_mu 2^beta / (1 - 2^-beta) + c_K c_mu 2^(beta-eta) / (1 - 2^(beta-eta)),
 *       c_mu 3^beta / (1 - 2^-beta)).
 */
template <typename Scalar>
GradientOfPotentialReport<Scalar> check_gradient_of_potential(const MetricMeasureSpace<Scalar>& space,
                                                              const Vec<Scalar>& f, Scalar beta, Scalar eta,
                                                              std::uint64_t seed = 0) {
    const Vec<Scalar> I = riesz_potential(space, f, beta);
    const Vec<Scalar> mf = maximal_function(space, f);
    GradientOfPotentialReport<Scalar> rep;
    for (Index w = 0; w < space.size(); ++w)
        for (Index y = w + 1; y < space.size(); ++y) {
            const Scalar num = std::abs(I(w) - I(y));
            const Scalar den = std::pow(space.dist(w, y), beta) * (mf(w) + mf(y));
            const Scalar ratio = num == 0 ? Scalar(0) : num / den;
            if (ratio > rep.C1_observed) {
                rep.C1_observed = ratio;
                rep.worst_i = w;
                rep.worst_j = y;
            }
        }
    rep.c_mu = estimate_doubling(space);
    const auto kernel = kernel_estimate_measure(space, beta, eta, seed);
    rep.c_K = kernel.c_K_observed;
    const Scalar local = rep.c_mu / (1 - std::pow(Scalar(2), -beta));
    const Scalar tail = std::pow(Scalar(2), beta - eta);
    rep.C1_bound = std::max(local * std::pow(Scalar(2), beta) + rep.c_K * rep.c_mu * tail / (1 - tail),
                            local * std::pow(Scalar(3), beta));
    return rep;
}

/**
 * Compares the Riesz integral over the open ball B(z,r) with
 * c_mu r^beta Mf(z) sum_i 2^(-i beta) = c_mu r^beta Mf(z) / (1 - 2^-beta).
 * c_mu defaults to the measured doubling constant.
 */
template <typename Scalar>
LocalRieszCheck<Scalar> local_riesz_bound_check(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& f,
                                                Scalar beta, Index z, Scalar r,
                                                std::optional<Scalar> c_mu = std::nullopt) {
    detail::require_length(space, f, "f");
    detail::require_nonnegative(f, "f");
    require(r > 0, ErrorKind::invalid_parameter, "radius must be positive");
    LocalRieszCheck<Scalar> rep;
    rep.c_mu = c_mu ? *c_mu : estimate_doubling(space);
    detail::for_each_kernel_term(space, z, [&](Index y, Scalar d, Scalar m) {
        if (d < r) rep.lhs += f(y) * space.weight(y) * std::pow(d, beta) / m;
    });
    const Vec<Scalar> mf = maximal_function(space, f);
    rep.rhs = rep.c_mu * std::pow(r, beta) * mf(z) / (1 - std::pow(Scalar(2), -beta));
    rep.ok = rep.lhs <= rep.rhs * (1 + Scalar(1e-12));
    return rep;
}

/**
 * (beta,p,p)-Poincare inequality on every realized open ball:
 *   avg_B |u - u_B|^p <= 2^p diam(B)^(beta p) avg_B g^p,
 * with diam(B) the diameter of the member set.
 */
template <typename Scalar>
PoincareReport<Scalar> poincare_check(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& u,
                                      const Vec<Scalar>& g, Scalar beta, Scalar p) {
    require(p >= 1, ErrorKind::invalid_parameter, "Poincare exponent must be at least 1");
    const auto grad = verify_hajlasz_gradient(space, u, g, beta);
    require(grad.ok, ErrorKind::precondition_violation, "g is not a Hajlasz gradient of u");
    PoincareReport<Scalar> rep;
    const Index n = space.size();
    const Scalar factor = std::pow(Scalar(2), p);
    for (Index c = 0; c < n; ++c) {
        auto order = space.neighbor_order(c);
        auto dist = space.sorted_distances(c);
        Scalar diam = 0, mass = 0, mu_sum = 0, gp_sum = 0;
        for (Index k = 0; k < n; ++k) {
            const Index y = order[k];
            for (Index j = 0; j < k; ++j) diam = std::max(diam, space.dist(y, order[j]));
            mass += space.weight(y);
            mu_sum += space.weight(y) * u(y);
            gp_sum += space.weight(y) * std::pow(g(y), p);
            if (k + 1 < n && dist[k + 1] == dist[k]) continue;
            const Scalar mean = mu_sum / mass;
            Scalar dev = 0;
            for (Index j = 0; j <= k; ++j) dev += space.weight(order[j]) * std::pow(std::abs(u(order[j]) - mean), p);
            const Scalar lhs = dev / mass;
            const Scalar rhs = factor * std::pow(diam, beta * p) * gp_sum / mass;
            const Scalar ratio = lhs == 0 ? Scalar(0) : (rhs == 0 ? std::numeric_limits<Scalar>::infinity() : lhs / rhs);
            ++rep.balls_checked;
            const bool violated = lhs > rhs * (1 + Scalar(1e-10)) + Scalar(1e-14);
            if (violated) rep.ok = false;
            if (ratio > rep.worst_ratio || rep.balls_checked == 1) {
                rep.worst_ratio = ratio;
                rep.worst_lhs = lhs;
                rep.worst_rhs = rhs;
                const Scalar radius = k + 1 < n ? dist[k + 1] : dist[k] + 1;
                rep.worst_ball = Ball<Scalar>{c, radius, false};
            }
        }
    }
    return rep;
}

/**
 * Nonlocal Leibniz rule: (g_u sup|psi| + kappa |u|) 1{psi != 0} is a Hajlasz
 * gradient of u psi when kappa bounds the Hoelder constant of psi.
 */
template <typename Scalar>
LeibnizResult<Scalar> leibniz_gradient(const MetricMeasureSpace<Scalar>& space, const Vec<Scalar>& u,
                                       const Vec<Scalar>& g_u, const Vec<Scalar>& psi, Scalar kappa,
                                       Scalar beta) {
    detail::require_length(space, psi, "psi");
    const Scalar realized = holder_constant(space, psi, beta);
    require(kappa >= realized * (1 - Scalar(1e-12)), ErrorKind::invalid_input,
            "kappa is smaller than the Hoelder constant of psi");
    const auto base = verify_hajlasz_gradient(space, u, g_u, beta);
    require(base.ok, ErrorKind::precondition_violation, "g_u is not a Hajlasz gradient of u");
    const Scalar sup_psi = psi.cwiseAbs().maxCoeff();
    LeibnizResult<Scalar> out;
    out.gradient = Vec<Scalar>::Zero(space.size());
    for (Index i = 0; i < space.size(); ++i)
        if (psi(i) != 0) out.gradient(i) = g_u(i) * sup_psi + kappa * std::abs(u(i));
    const Vec<Scalar> product = u.cwiseProduct(psi);
    out.check = verify_hajlasz_gradient(space, product, out.gradient, beta);
    return out;
}

}  // namespace caplab
