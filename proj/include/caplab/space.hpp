#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "caplab/error.hpp"

namespace caplab {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct Edge {
    Index i = 0;
    Index j = 0;
    Scalar length = 0;
};

/// Open ball {d(center,.) < r} or closed ball {d(center,.) <= r}.
template <typename Scalar>
struct Ball {
    Index center = 0;
    Scalar radius = 0;
    bool closed = false;

    Ball scaled(Scalar t) const { return {center, t * radius, closed}; }
};

/// Sorted, duplicate-free subset of point ids.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(std::vector<Index> ids) : ids_(std::move(ids)) {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    }

    static PointSet all(Index n) {
        std::vector<Index> ids(static_cast<std::size_t>(n));
        std::iota(ids.begin(), ids.end(), Index{0});
        return PointSet(std::move(ids));
    }

    template <typename Pred>
    static PointSet where(Index n, Pred&& pred) {
        std::vector<Index> ids;
        for (Index i = 0; i < n; ++i)
            if (pred(i)) ids.push_back(i);
        return PointSet(std::move(ids));
    }

    const std::vector<Index>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    auto begin() const { return ids_.begin(); }
    auto end() const { return ids_.end(); }
    Index operator[](std::size_t k) const { return ids_[k]; }

    bool contains(Index i) const { return std::binary_search(ids_.begin(), ids_.end(), i); }

    bool subset_of(const PointSet& other) const {
        return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(), ids_.end());
    }

    PointSet intersect(const PointSet& other) const {
        std::vector<Index> out;
        std::set_intersection(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                              std::back_inserter(out));
        return PointSet(std::move(out));
    }

    PointSet unite(const PointSet& other) const {
        std::vector<Index> out;
        std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                       std::back_inserter(out));
        return PointSet(std::move(out));
    }

    PointSet complement(Index n) const {
        return where(n, [this](Index i) { return !contains(i); });
    }

    /// Membership mask of length n.
    std::vector<char> mask(Index n) const {
        std::vector<char> m(static_cast<std::size_t>(n), 0);
        for (Index i : ids_) m[static_cast<std::size_t>(i)] = 1;
        return m;
    }

    friend bool operator==(const PointSet&, const PointSet&) = default;

private:
    std::vector<Index> ids_;
};

/**
 * Finite metric measure space: a symmetric distance matrix, a positive atomic
 * measure, optional coordinates and an optional edge graph.
 *
 * The constructor checks the structural invariants (shape, symmetry, zero
 * diagonal, positive off-diagonal distances, positive weights, valid edges).
 * Metric axioms and the geodesic-graph property are checked separately by
 * triangle_violation() and check_geodesic_graph() so that corrupted inputs can
 * be loaded and diagnosed.
 *
 * Each row of the metric is also kept sorted together with the running measure,
 * so that mu(B(x,r)) is a binary search.
 */
template <typename Scalar>
class MetricMeasureSpace {
public:
    using scalar_type = Scalar;
    using VectorType = Vec<Scalar>;
    using MatrixType = Mat<Scalar>;

    MetricMeasureSpace() = default;

    MetricMeasureSpace(MatrixType dist, VectorType weights,
                       std::optional<MatrixType> coords = std::nullopt,
                       std::vector<Edge<Scalar>> edges = {})
        : dist_(std::move(dist)), weights_(std::move(weights)), coords_(std::move(coords)),
          edges_(std::move(edges)) {
        validate_structure();
        build_index();
    }

    Index size() const { return weights_.size(); }
    Scalar dist(Index i, Index j) const { return dist_(i, j); }
    const MatrixType& distances() const { return dist_; }
    Scalar weight(Index i) const { return weights_(i); }
    const VectorType& weights() const { return weights_; }
    Scalar total_mass() const { return total_mass_; }
    bool has_coords() const { return coords_.has_value(); }
    const std::optional<MatrixType>& coords() const { return coords_; }
    bool has_edges() const { return !edges_.empty(); }
    const std::vector<Edge<Scalar>>& edges() const { return edges_; }

    Scalar diameter() const { return diameter_; }

    /// Largest nearest-neighbour distance: the resolution of the point cloud.
    Scalar mesh() const { return mesh_; }

    /// Distances from x in increasing order.
    std::span<const Scalar> sorted_distances(Index x) const {
        return {sorted_.data() + x * size(), static_cast<std::size_t>(size())};
    }

    /// Point ids ordered by distance from x (x itself first).
    std::span<const Index> neighbor_order(Index x) const {
        return {order_.data() + x * size(), static_cast<std::size_t>(size())};
    }

    /// Measure of the first k points of neighbor_order(x).
    Scalar prefix_mass(Index x, Index k) const { return prefix_(x, k); }

    /// Number of points in the open (or closed) ball of radius r about x.
    Index ball_count(Index x, Scalar r, bool closed = false) const {
        auto row = sorted_distances(x);
        auto it = closed ? std::upper_bound(row.begin(), row.end(), r)
                         : std::lower_bound(row.begin(), row.end(), r);
        return static_cast<Index>(it - row.begin());
    }

    Scalar ball_mass(Index x, Scalar r, bool closed = false) const {
        return prefix_(x, ball_count(x, r, closed));
    }

    Scalar ball_mass(const Ball<Scalar>& b) const { return ball_mass(b.center, b.radius, b.closed); }

    Scalar mass(const PointSet& set) const {
        Scalar m = 0;
        for (Index i : set) m += weights_(i);
        return m;
    }

    /// Sorted distinct positive distances realized by pairs of points.
    std::vector<Scalar> realized_radii() const {
        std::vector<Scalar> r;
        r.reserve(static_cast<std::size_t>(size() * (size() - 1) / 2));
        for (Index i = 0; i < size(); ++i)
            for (Index j = i + 1; j < size(); ++j) r.push_back(dist_(i, j));
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        return r;
    }

    /// Same points and metric with every weight multiplied by lambda.
    MetricMeasureSpace scaled_weights(Scalar lambda) const {
        require(lambda > 0, ErrorKind::invalid_parameter, "weight scale must be positive");
        return MetricMeasureSpace(dist_, weights_ * lambda, coords_, edges_);
    }

private:
    void validate_structure() {
        const Index n = weights_.size();
        require(n >= 1, ErrorKind::invalid_input, "space must contain at least one point");
        require(dist_.rows() == n && dist_.cols() == n, ErrorKind::invalid_input,
                "distance matrix shape does not match the number of weights");
        for (Index i = 0; i < n; ++i) {
            require(std::isfinite(static_cast<double>(weights_(i))) && weights_(i) > 0,
                    ErrorKind::invalid_input, "weight(" + std::to_string(i) + ") must be positive");
            require(dist_(i, i) == 0, ErrorKind::invalid_input, "dist(i,i) must be 0");
            for (Index j = i + 1; j < n; ++j) {
                require(dist_(i, j) == dist_(j, i), ErrorKind::invalid_input,
                        "distance matrix must be symmetric");
                require(std::isfinite(static_cast<double>(dist_(i, j))) && dist_(i, j) > 0,
                        ErrorKind::invalid_input, "distinct points must have positive distance");
            }
        }
        if (coords_) require(coords_->rows() == n, ErrorKind::invalid_input, "coordinate rows mismatch");
        for (const auto& e : edges_) {
            require(e.i >= 0 && e.i < n && e.j >= 0 && e.j < n && e.i != e.j,
                    ErrorKind::invalid_input, "edge endpoint out of range");
            require(e.length > 0, ErrorKind::invalid_input, "edge length must be positive");
        }
    }

    void build_index() {
        const Index n = size();
        order_.resize(n, n);
        sorted_.resize(n, n);
        prefix_.resize(n, n + 1);
        std::vector<Index> idx(static_cast<std::size_t>(n));
        diameter_ = 0;
        mesh_ = 0;
        for (Index x = 0; x < n; ++x) {
            std::iota(idx.begin(), idx.end(), Index{0});
            std::stable_sort(idx.begin(), idx.end(),
                             [&](Index a, Index b) { return dist_(x, a) < dist_(x, b); });
            prefix_(x, 0) = 0;
            for (Index k = 0; k < n; ++k) {
                const Index y = idx[static_cast<std::size_t>(k)];
                order_(x, k) = y;
                sorted_(x, k) = dist_(x, y);
                prefix_(x, k + 1) = prefix_(x, k) + weights_(y);
            }
            diameter_ = std::max(diameter_, sorted_(x, n - 1));
            if (n > 1) mesh_ = std::max(mesh_, sorted_(x, 1));
        }
        total_mass_ = weights_.sum();
    }

    MatrixType dist_;
    VectorType weights_;
    std::optional<MatrixType> coords_;
    std::vector<Edge<Scalar>> edges_;

    RowMat<Index> order_;
    RowMat<Scalar> sorted_;
    RowMat<Scalar> prefix_;
    Scalar diameter_ = 0;
    Scalar mesh_ = 0;
    Scalar total_mass_ = 0;
};

using Space = MetricMeasureSpace<double>;

template <typename Scalar>
PointSet ball_members(const MetricMeasureSpace<Scalar>& space, const Ball<Scalar>& ball) {
    const Index count = space.ball_count(ball.center, ball.radius, ball.closed);
    auto order = space.neighbor_order(ball.center);
    return PointSet(std::vector<Index>(order.begin(), order.begin() + count));
}

/// Largest triangle-inequality defect max(d(i,k) - d(i,j) - d(j,k), 0) over all triples.
template <typename Scalar>
Scalar triangle_violation(const MetricMeasureSpace<Scalar>& space) {
    Scalar worst = 0;
    const Index n = space.size();
    const auto& d = space.distances();
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) {
            const Scalar dij = d(i, j);
            for (Index k = i + 1; k < n; ++k) worst = std::max(worst, d(i, k) - dij - d(j, k));
        }
    return worst;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Points on the real line with consecutive-point edges.
template <typename Scalar = double>
MetricMeasureSpace<Scalar> line_space(const std::vector<Scalar>& x, const std::vector<Scalar>& w) {
    require(x.size() == w.size() && !x.empty(), ErrorKind::invalid_parameter,
            "line_space needs matching nonempty coordinate and weight lists");
    const Index n = static_cast<Index>(x.size());
    std::vector<Index> order(x.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return x[a] < x[b]; });
    Mat<Scalar> d(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) d(i, j) = std::abs(x[i] - x[j]);
    Mat<Scalar> coords(n, 1);
    Vec<Scalar> weights(n);
    for (Index i = 0; i < n; ++i) {
        coords(i, 0) = x[i];
        weights(i) = w[i];
    }
    std::vector<Edge<Scalar>> edges;
    for (std::size_t k = 0; k + 1 < order.size(); ++k)
        edges.push_back({order[k], order[k + 1], d(order[k], order[k + 1])});
    return MetricMeasureSpace<Scalar>(std::move(d), std::move(weights), std::move(coords),
                                      std::move(edges));
}

/// Uniform grid on [0,1]^dim with mesh h = 1/(n-1), weight h^dim and axis-neighbour edges.
template <typename Scalar = double>
MetricMeasureSpace<Scalar> gen_grid(Index n, int dim) {
    require(n >= 2, ErrorKind::invalid_parameter, "gen_grid needs n >= 2");
    require(dim == 1 || dim == 2, ErrorKind::invalid_parameter, "gen_grid supports dim 1 or 2");
    const Scalar h = Scalar(1) / Scalar(n - 1);
    const Index count = dim == 1 ? n : n * n;
    Mat<Scalar> coords(count, dim);
    std::vector<std::array<Index, 2>> lattice(static_cast<std::size_t>(count));
    for (Index p = 0; p < count; ++p) {
        lattice[p] = {p % n, dim == 1 ? Index{0} : p / n};
        for (int a = 0; a < dim; ++a) coords(p, a) = Scalar(lattice[p][a]) * h;
    }
    // Distances come from integer offsets so equal offsets give bit-identical distances.
    Mat<Scalar> d(count, count);
    for (Index p = 0; p < count; ++p)
        for (Index q = 0; q < count; ++q) {
            const Scalar di = Scalar(lattice[p][0] - lattice[q][0]);
            const Scalar dj = Scalar(lattice[p][1] - lattice[q][1]);
            d(p, q) = h * std::sqrt(di * di + dj * dj);
        }
    std::vector<Edge<Scalar>> edges;
    for (Index p = 0; p < count; ++p) {
        if (lattice[p][0] + 1 < n) edges.push_back({p, p + 1, h});
        if (dim == 2 && lattice[p][1] + 1 < n) edges.push_back({p, p + n, h});
    }
    Vec<Scalar> weights = Vec<Scalar>::Constant(count, dim == 1 ? h : h * h);
    return MetricMeasureSpace<Scalar>(std::move(d), std::move(weights), std::move(coords),
                                      std::move(edges));
}

/// Uniform grid on [-halfwidth, halfwidth] with weight h * dist(x, {-1, 1})^(q-1).
///
/// A grid point landing exactly on +-1 gets the half-mesh value (h/2)^(q-1) * h so
/// that every ball keeps positive mass.
template <typename Scalar = double>
MetricMeasureSpace<Scalar> gen_weighted_line(Index n, Scalar halfwidth, Scalar q) {
    require(n >= 3, ErrorKind::invalid_parameter, "gen_weighted_line needs n >= 3");
    require(halfwidth > 1, ErrorKind::invalid_parameter, "gen_weighted_line needs halfwidth > 1");
    require(q >= 1, ErrorKind::invalid_parameter, "gen_weighted_line needs q >= 1");
    const Scalar h = 2 * halfwidth / Scalar(n - 1);
    Mat<Scalar> d(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) d(i, j) = h * Scalar(std::abs(i - j));
    Mat<Scalar> coords(n, 1);
    Vec<Scalar> weights(n);
    for (Index i = 0; i < n; ++i) {
        const Scalar x = -halfwidth + Scalar(i) * h;
        coords(i, 0) = x;
        const Scalar gap = std::min(std::abs(x - 1), std::abs(x + 1));
        weights(i) = gap <= Scalar(1e-12) * h ? std::pow(h / 2, q - 1) * h : h * std::pow(gap, q - 1);
    }
    std::vector<Edge<Scalar>> edges;
    for (Index i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, h});
    return MetricMeasureSpace<Scalar>(std::move(d), std::move(weights), std::move(coords),
                                      std::move(edges));
}

/// Same points and weights with d replaced by d^beta. The edge graph is dropped.
template <typename Scalar>
MetricMeasureSpace<Scalar> snowflake(const MetricMeasureSpace<Scalar>& space, Scalar beta) {
    require(beta > 0 && beta <= 1, ErrorKind::invalid_parameter, "snowflake exponent must lie in (0,1]");
    if (beta == 1) return space;
    Mat<Scalar> d = space.distances().array().pow(beta).matrix();
    return MetricMeasureSpace<Scalar>(std::move(d), space.weights());
}

// ---------------------------------------------------------------------------
// Graph utilities
// ---------------------------------------------------------------------------

template <typename Scalar>
std::vector<std::vector<std::pair<Index, Scalar>>> adjacency(const MetricMeasureSpace<Scalar>& space) {
    std::vector<std::vector<std::pair<Index, Scalar>>> adj(static_cast<std::size_t>(space.size()));
    for (const auto& e : space.edges()) {
        adj[e.i].push_back({e.j, e.length});
        adj[e.j].push_back({e.i, e.length});
    }
    return adj;
}

template <typename Scalar>
struct ShortestPaths {
    Vec<Scalar> length;
    std::vector<Index> parent;  // -1 at the source and at unreachable points

    /// Vertices from `target` back to the source, or empty if unreachable.
    std::vector<Index> path_to(Index target) const {
        std::vector<Index> path;
        if (!std::isfinite(static_cast<double>(length(target)))) return path;
        for (Index v = target; v != -1; v = parent[v]) path.push_back(v);
        return path;
    }
};

/// Dijkstra over the edge graph.
template <typename Scalar>
ShortestPaths<Scalar> graph_shortest_paths(const MetricMeasureSpace<Scalar>& space, Index source) {
    const Index n = space.size();
    const auto adj = adjacency(space);
    ShortestPaths<Scalar> sp{Vec<Scalar>::Constant(n, std::numeric_limits<Scalar>::infinity()),
                             std::vector<Index>(static_cast<std::size_t>(n), -1)};
    using Item = std::pair<Scalar, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    sp.length(source) = 0;
    heap.push({0, source});
    while (!heap.empty()) {
        auto [len, v] = heap.top();
        heap.pop();
        if (len > sp.length(v)) continue;
        for (auto [w, l] : adj[v]) {
            const Scalar cand = len + l;
            if (cand < sp.length(w) || (cand == sp.length(w) && sp.parent[w] > v)) {
                const bool improved = cand < sp.length(w);
                sp.length(w) = cand;
                sp.parent[w] = v;
                if (improved) heap.push({cand, w});
            }
        }
    }
    return sp;
}

/// Connectivity through the edge graph when present, otherwise through
/// 2*mesh-chains.
template <typename Scalar>
bool is_connected(const MetricMeasureSpace<Scalar>& space) {
    const Index n = space.size();
    if (n <= 1) return true;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Index> stack{0};
    seen[0] = 1;
    Index reached = 1;
    if (space.has_edges()) {
        const auto adj = adjacency(space);
        while (!stack.empty()) {
            const Index v = stack.back();
            stack.pop_back();
            for (auto [w, l] : adj[v])
                if (!seen[w]) {
                    seen[w] = 1;
                    ++reached;
                    stack.push_back(w);
                }
        }
    } else {
        const Scalar eps = 2 * space.mesh();
        while (!stack.empty()) {
            const Index v = stack.back();
            stack.pop_back();
            for (Index w = 0; w < n; ++w)
                if (!seen[w] && space.dist(v, w) <= eps) {
                    seen[w] = 1;
                    ++reached;
                    stack.push_back(w);
                }
        }
    }
    return reached == n;
}

}  // namespace caplab
