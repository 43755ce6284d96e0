#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "caplab/space.hpp"

namespace caplab {

/**
 * Chain of balls B_0..B_k walking from outside B(y,R) into B(y,rho), joined by
 * link balls R_i inside consecutive overlaps.
 *
 * Property (ii) compares d(y,B_i) with the nominal diameter 2 r_i, since the
 * realized diameter of a singleton ball is 0.
 */
template <typename Scalar>
struct BallChain {
    Index y = 0;
    Scalar rho = 0;
    Scalar R = 0;
    std::vector<Ball<Scalar>> balls;
    std::vector<Ball<Scalar>> links;

    bool property_i = false;
    bool property_iii_inclusion = false;
    Scalar M_ii = 0;   // smallest M for property (ii)
    Scalar M_iii = 0;  // smallest M with B_i u B_{i+1} inside M R_i
    Index multiplicity = 0;
    Scalar M_observed = std::numeric_limits<Scalar>::infinity();

    bool valid(Scalar M) const {
        return property_i && property_iii_inclusion && M_observed <= M;
    }
};

/// Recomputes properties (i)-(iv) and M_observed from the member sets.
template <typename Scalar>
void validate_chain(const MetricMeasureSpace<Scalar>& space, BallChain<Scalar>& chain) {
    const Index n = space.size();
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    chain.property_i = false;
    chain.property_iii_inclusion = true;
    chain.M_ii = 0;
    chain.M_iii = 0;
    chain.multiplicity = 0;
    chain.M_observed = inf;
    if (chain.balls.empty() || chain.links.size() + 1 != chain.balls.size()) {
        chain.property_iii_inclusion = false;
        return;
    }
    std::vector<PointSet> members;
    for (const auto& b : chain.balls) members.push_back(ball_members(space, b));

    const auto far = ball_members(space, Ball<Scalar>{chain.y, chain.R, false});
    const auto near = ball_members(space, Ball<Scalar>{chain.y, chain.rho, false});
    chain.property_i = members.front().intersect(far).empty() && members.back().subset_of(near);

    for (std::size_t i = 0; i < members.size(); ++i) {
        Scalar dist_to_y = inf;
        for (Index z : members[i]) dist_to_y = std::min(dist_to_y, space.dist(chain.y, z));
        const Scalar diam = 2 * chain.balls[i].radius;
        const Scalar m = dist_to_y == 0 ? inf : std::max(diam / dist_to_y, dist_to_y / diam);
        chain.M_ii = std::max(chain.M_ii, m);
    }

    for (std::size_t i = 0; i + 1 < members.size(); ++i) {
        const auto link = ball_members(space, chain.links[i]);
        if (!link.subset_of(members[i].intersect(members[i + 1]))) chain.property_iii_inclusion = false;
        Scalar reach = 0;
        for (Index z : members[i].unite(members[i + 1]))
            reach = std::max(reach, space.dist(chain.links[i].center, z));
        // open ball B(c, t r) contains a point at distance `reach` iff t r > reach
        const Scalar t = reach / chain.links[i].radius * (1 + Scalar(1e-9));
        chain.M_iii = std::max(chain.M_iii, std::max(Scalar(1), t));
    }

    std::vector<Index> count(static_cast<std::size_t>(n), 0);
    for (const auto& m : members)
        for (Index z : m) chain.multiplicity = std::max(chain.multiplicity, ++count[z]);

    chain.M_observed = std::max({chain.M_ii, chain.M_iii, Scalar(chain.multiplicity)});
}

/**
 * Builds a chain by walking a shortest edge path from the farthest point from
 * y towards y. Each ball is centred on a path vertex with radius d(y,c)/4; the
 * next centre is the last path vertex within half that radius, and the radius
 * is enlarged (staying below d(y,c)) when the next vertex would otherwise fall
 * outside. The walk stops at the first centre whose ball lies inside B(y,rho).
 */
template <typename Scalar>
BallChain<Scalar> build_ball_chain(const MetricMeasureSpace<Scalar>& space, Index y, Scalar rho, Scalar R) {
    require(space.has_edges(), ErrorKind::not_applicable, "ball chains need an edge graph");
    require(rho > 0 && rho < R, ErrorKind::invalid_parameter, "ball chain needs 0 < rho < R");
    require(R < Scalar(0.375) * space.diameter(), ErrorKind::invalid_parameter,
            "ball chain needs R < (3/8) diam");
    require(y >= 0 && y < space.size(), ErrorKind::invalid_parameter, "chain target out of range");

    const auto order = space.neighbor_order(y);
    const Index start = order.back();
    require(space.dist(y, start) * 3 >= 4 * R, ErrorKind::not_applicable,
            "no point far enough outside B(y,R) to start the chain");
    const auto sp = graph_shortest_paths(space, y);
    std::vector<Index> path = sp.path_to(start);  // start ... y
    require(!path.empty(), ErrorKind::not_applicable, "start point is not connected to y");

    BallChain<Scalar> chain;
    chain.y = y;
    chain.rho = rho;
    chain.R = R;

    const auto inside_rho = [&](Index c, Scalar r) {
        return space.dist(y, c) + r <= rho;
    };

    std::size_t pos = 0;
    while (true) {
        const Index c = path[pos];
        const Scalar dc = space.dist(y, c);
        Scalar r = dc / 4;
        const bool last = inside_rho(c, r) || pos + 2 >= path.size();
        if (last) {
            chain.balls.push_back({c, r, false});
            break;
        }
        std::size_t next = pos + 1;
        while (next + 2 < path.size() && space.dist(c, path[next + 1]) <= r / 2) ++next;
        const Scalar step = space.dist(c, path[next]);
        if (step >= r) r = std::min(Scalar(1.5) * step, Scalar(0.95) * dc);
        chain.balls.push_back({c, r, false});

        const Index cn = path[next];
        const Scalar rn_nominal = space.dist(y, cn) / 4;
        // link: the path vertex between the centres with the most room inside both balls
        Index best = cn;
        Scalar room = -1;
        for (std::size_t k = pos; k <= next; ++k) {
            const Index m = path[k];
            const Scalar slack = std::min(r - space.dist(c, m), rn_nominal - space.dist(cn, m));
            if (slack > room) {
                room = slack;
                best = m;
            }
        }
        if (room <= 0) {
            best = cn;
            room = space.sorted_distances(cn)[1] / 2;
        }
        chain.links.push_back({best, room, false});
        pos = next;
    }
    validate_chain(space, chain);
    return chain;
}

}  // namespace caplab
