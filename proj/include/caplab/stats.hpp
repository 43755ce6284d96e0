#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "caplab/space.hpp"

namespace caplab {

template <typename Scalar>
struct ReverseDoublingFit {
    Scalar sigma = 0;
    Scalar c_sigma_fit = 0;   // exp(intercept) of the log-log fit
    Scalar c_sigma = 0;       // smallest constant making the sampled inequality hold with exponent sigma
    Scalar max_violation = 0; // largest log-excess of a sample above the fitted line
    Index samples = 0;
};

template <typename Scalar>
struct AhlforsFit {
    Scalar Q = 0;
    Scalar c_Q = 0;
    Index samples = 0;
};

template <typename Scalar>
struct GeodesicReport {
    Scalar max_relative_discrepancy = 0;
    Index worst_i = 0;
    Index worst_j = 0;
    bool geodesic = true;
};

template <typename Scalar>
struct SpaceStats {
    Scalar diam = 0;
    Scalar mesh = 0;
    Scalar c_mu = 1;
    std::optional<ReverseDoublingFit<Scalar>> reverse_doubling;
    std::optional<AhlforsFit<Scalar>> ahlfors;
    bool connected = true;
};

/**
 * Exact doubling constant sup mu(B(x,2r)) / mu(B(x,r)) over open balls.
 *
 * For fixed x both masses are step functions of r that jump only at the
 * distances d(x,.) and their halves, and each step is left-open and
 * right-closed, so evaluating at those break points attains the supremum.
 */
template <typename Scalar>
Scalar estimate_doubling(const MetricMeasureSpace<Scalar>& space) {
    Scalar c = 1;
    const Index n = space.size();
    for (Index x = 0; x < n; ++x) {
        auto row = space.sorted_distances(x);
        for (Index k = 1; k < n; ++k) {
            const Scalar d = row[k];
            if (d == row[k - 1]) continue;
            for (Scalar r : {d, d / 2})
                c = std::max(c, space.ball_mass(x, 2 * r) / space.ball_mass(x, r));
        }
    }
    return c;
}

namespace detail {

/// Geometric radius ladder lo, lo*f, ... up to hi (inclusive).
template <typename Scalar>
std::vector<Scalar> radius_ladder(Scalar lo, Scalar hi, Scalar factor) {
    std::vector<Scalar> r;
    for (Scalar t = lo; t <= hi * (1 + Scalar(1e-12)); t *= factor) r.push_back(t);
    return r;
}

/// Upper radius of the log-log fitting window: diam/4, widened to diam/2 or diam
/// when fewer than four ladder radii would remain above 2*mesh.
template <typename Scalar>
Scalar fit_window_top(const MetricMeasureSpace<Scalar>& space, Scalar factor) {
    for (Scalar frac : {Scalar(0.25), Scalar(0.5), Scalar(1)}) {
        const Scalar top = frac * space.diameter();
        if (radius_ladder(2 * space.mesh(), top, factor).size() >= 4) return top;
    }
    return space.diameter();
}

/// Every point when small, else an evenly strided subset.
inline std::vector<Index> sample_centers(Index n, Index cap) {
    std::vector<Index> c;
    const Index stride = std::max<Index>(1, (n + cap - 1) / cap);
    for (Index i = 0; i < n; i += stride) c.push_back(i);
    return c;
}

}  // namespace detail

/**
 * Log-log least-squares fit of mu(B(x,r)) / mu(B(x,R)) <= c (r/R)^sigma.
 *
 * Radii run over a ladder from 2*mesh up to 2*diam; the slope is fitted on
 * pairs below fit_window_top (normally diam/4), where boundary saturation has
 * not set in, and the reported constant c_sigma covers every sampled pair up
 * to 2*diam.
 */
template <typename Scalar>
ReverseDoublingFit<Scalar> estimate_reverse_doubling(const MetricMeasureSpace<Scalar>& space) {
    require(space.size() >= 2, ErrorKind::not_applicable,
            "reverse doubling is vacuous on a single point");
    require(is_connected(space), ErrorKind::refused,
            "reverse doubling fit refused: space is disconnected");
    const Scalar diam = space.diameter();
    const Scalar factor = std::pow(Scalar(2), Scalar(0.25));
    const Scalar top = detail::fit_window_top(space, factor);
    const auto radii = detail::radius_ladder<Scalar>(2 * space.mesh(), 2 * diam, factor);
    require(radii.size() >= 2, ErrorKind::not_applicable, "space too coarse for a reverse doubling fit");
    const auto centers = detail::sample_centers(space.size(), 256);

    Scalar st = 0, sy = 0, stt = 0, sty = 0;
    Index m = 0;
    struct Sample { Scalar t, y; };
    std::vector<Sample> all;
    for (Index x : centers) {
        std::vector<Scalar> mass(radii.size());
        for (std::size_t k = 0; k < radii.size(); ++k) mass[k] = space.ball_mass(x, radii[k]);
        for (std::size_t a = 0; a < radii.size(); ++a)
            for (std::size_t b = a + 1; b < radii.size(); ++b) {
                const Scalar t = std::log(radii[a] / radii[b]);
                const Scalar y = std::log(mass[a] / mass[b]);
                all.push_back({t, y});
                if (radii[b] <= top * (1 + Scalar(1e-12))) {
                    st += t; sy += y; stt += t * t; sty += t * y;
                    ++m;
                }
            }
    }
    require(m >= 2, ErrorKind::not_applicable, "space too coarse for a reverse doubling fit");
    ReverseDoublingFit<Scalar> fit;
    const Scalar denom = m * stt - st * st;
    fit.sigma = (m * sty - st * sy) / denom;
    const Scalar intercept = (sy - fit.sigma * st) / m;
    fit.c_sigma_fit = std::exp(intercept);
    Scalar worst = -std::numeric_limits<Scalar>::infinity();
    for (const auto& s : all) worst = std::max(worst, s.y - fit.sigma * s.t);
    fit.max_violation = std::max(Scalar(0), worst - intercept);
    fit.c_sigma = std::exp(worst);
    fit.samples = static_cast<Index>(all.size());
    return fit;
}

/// Least-squares fit of log mu(B(x,r)) against log r over the same window as the
/// reverse doubling fit.
template <typename Scalar>
AhlforsFit<Scalar> estimate_ahlfors(const MetricMeasureSpace<Scalar>& space) {
    require(space.size() >= 2, ErrorKind::not_applicable, "Ahlfors fit needs at least two points");
    const Scalar factor = std::pow(Scalar(2), Scalar(0.25));
    const auto radii = detail::radius_ladder<Scalar>(2 * space.mesh(), detail::fit_window_top(space, factor), factor);
    require(radii.size() >= 2, ErrorKind::not_applicable, "space too coarse for an Ahlfors fit");
    const auto centers = detail::sample_centers(space.size(), 256);
    Scalar st = 0, sy = 0, stt = 0, sty = 0;
    std::vector<std::pair<Scalar, Scalar>> samples;
    for (Index x : centers)
        for (Scalar r : radii) {
            const Scalar t = std::log(r), y = std::log(space.ball_mass(x, r));
            samples.push_back({t, y});
            st += t; sy += y; stt += t * t; sty += t * y;
        }
    const Scalar m = Scalar(samples.size());
    AhlforsFit<Scalar> fit;
    fit.Q = (m * sty - st * sy) / (m * stt - st * st);
    fit.c_Q = 1;
    for (auto [t, y] : samples) fit.c_Q = std::max(fit.c_Q, std::exp(std::abs(y - fit.Q * t)));
    fit.samples = static_cast<Index>(samples.size());
    return fit;
}

/// Compares graph shortest-path lengths with the metric on every pair.
template <typename Scalar>
GeodesicReport<Scalar> check_geodesic_graph(const MetricMeasureSpace<Scalar>& space) {
    require(space.has_edges(), ErrorKind::not_applicable, "space has no edge graph");
    GeodesicReport<Scalar> rep;
    for (Index i = 0; i < space.size(); ++i) {
        const auto sp = graph_shortest_paths(space, i);
        for (Index j = i + 1; j < space.size(); ++j) {
            const Scalar rel = std::abs(sp.length(j) - space.dist(i, j)) / space.dist(i, j);
            if (!(rel <= rep.max_relative_discrepancy)) {
                rep.max_relative_discrepancy = rel;
                rep.worst_i = i;
                rep.worst_j = j;
            }
        }
    }
    rep.geodesic = rep.max_relative_discrepancy <= Scalar(1e-12);
    return rep;
}

/// Largest |edge length - dist(endpoints)| relative to the distance.
template <typename Scalar>
Scalar edge_length_defect(const MetricMeasureSpace<Scalar>& space) {
    Scalar worst = 0;
    for (const auto& e : space.edges())
        worst = std::max(worst, std::abs(e.length - space.dist(e.i, e.j)) / space.dist(e.i, e.j));
    return worst;
}

template <typename Scalar>
SpaceStats<Scalar> measure_stats(const MetricMeasureSpace<Scalar>& space) {
    SpaceStats<Scalar> s;
    s.diam = space.diameter();
    s.mesh = space.mesh();
    s.c_mu = estimate_doubling(space);
    s.connected = is_connected(space);
    try {
        s.reverse_doubling = estimate_reverse_doubling(space);
    } catch (const Error&) {
    }
    try {
        s.ahlfors = estimate_ahlfors(space);
    } catch (const Error&) {
    }
    return s;
}

}  // namespace caplab
