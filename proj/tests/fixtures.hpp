#pragma once

#include <memory>
#include <random>
#include <vector>

#include "caplab/capacity.hpp"
#include "caplab/space.hpp"

namespace fixtures {

using caplab::Index;
using caplab::PointSet;
using caplab::Space;

/// Points a=0, b=1 at distance 1, unit weights, one edge.
inline std::shared_ptr<const Space> two_point() {
    return std::make_shared<const Space>(caplab::line_space<double>({0.0, 1.0}, {1.0, 1.0}));
}

/// Points a=0, b=1, c=2 on a line, unit weights, path edges.
inline std::shared_ptr<const Space> path3() {
    return std::make_shared<const Space>(caplab::line_space<double>({0.0, 1.0, 2.0}, {1.0, 1.0, 1.0}));
}

inline PointSet set(std::vector<Index> ids) { return PointSet(std::move(ids)); }

inline caplab::CapacityProblem problem(caplab::CapacityKind kind, std::shared_ptr<const Space> space, PointSet F,
                                       std::optional<PointSet> omega = std::nullopt, double beta = 1, double p = 2) {
    caplab::CapacityProblem P;
    P.kind = kind;
    P.space = std::move(space);
    P.F = std::move(F);
    P.omega = std::move(omega);
    P.beta = beta;
    P.p = p;
    return P;
}

/// n random points on a line, or in the unit square with a path through them in
/// index order plus random chords as edges; random weights.
inline std::shared_ptr<const Space> random_small_space(std::mt19937_64& rng, Index n, bool line = false) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    if (line) {
        std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
        double at = 0;
        for (Index i = 0; i < n; ++i) {
            at += 0.2 + U(rng);
            x[i] = at;
            w[i] = 0.2 + 2 * U(rng);
        }
        return std::make_shared<const Space>(caplab::line_space<double>(x, w));
    }
    caplab::Mat<double> pts(n, 2), d(n, n);
    for (Index i = 0; i < n; ++i) {
        pts(i, 0) = U(rng);
        pts(i, 1) = U(rng);
    }
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
    caplab::Vec<double> w(n);
    for (Index i = 0; i < n; ++i) w(i) = 0.2 + 2 * U(rng);
    std::vector<caplab::Edge<double>> edges;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (j == i + 1 || U(rng) < 0.3) edges.push_back({i, j, d(i, j)});
    return std::make_shared<const Space>(d, w, pts, edges);
}

}  // namespace fixtures
