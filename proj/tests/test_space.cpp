#include <doctest.h>

#include <random>

#include "caplab/space.hpp"
#include "caplab/stats.hpp"
#include "fixtures.hpp"

using namespace caplab;

namespace {

// Membership by direct comparison, independent of the sorted index.
std::vector<Index> naive_ball(const Space& X, Index c, double r, bool closed) {
    std::vector<Index> out;
    for (Index i = 0; i < X.size(); ++i)
        if (closed ? X.dist(c, i) <= r : X.dist(c, i) < r) out.push_back(i);
    return out;
}

// Doubling ratio scanned over a fine radius grid plus every realized distance and its neighbours.
double naive_doubling(const Space& X) {
    double c = 1;
    for (Index x = 0; x < X.size(); ++x)
        for (Index y = 0; y < X.size(); ++y) {
            const double d = X.dist(x, y);
            for (double r : {d / 2, d / 2 + 1e-9, d + 1e-9, d, std::nextafter(d, 0.0)}) {
                if (r <= 0) continue;
                double small = 0, big = 0;
                for (Index z = 0; z < X.size(); ++z) {
                    if (X.dist(x, z) < r) small += X.weight(z);
                    if (X.dist(x, z) < 2 * r) big += X.weight(z);
                }
                c = std::max(c, big / small);
            }
        }
    return c;
}

}  // namespace

TEST_CASE("grid generator") {
    const auto g2 = gen_grid<double>(2, 1);
    CHECK(g2.size() == 2);
    CHECK(g2.dist(0, 1) == 1.0);
    CHECK(g2.weight(0) == 1.0);
    CHECK(g2.weight(1) == 1.0);

    const auto g3 = gen_grid<double>(3, 1);
    CHECK((*g3.coords())(1, 0) == 0.5);
    CHECK(g3.weight(0) == 0.5);
    CHECK(g3.weight(2) == 0.5);

    const auto g = gen_grid<double>(17, 2);
    CHECK(g.size() == 289);
    CHECK(g.edges().size() == 2 * 16 * 17);
    CHECK(g.total_mass() == doctest::Approx(289.0 / 256.0));
    CHECK(triangle_violation(g) <= 1e-12);

    CHECK_THROWS_AS(gen_grid<double>(1, 1), Error);
    CHECK_THROWS_AS(gen_grid<double>(4, 3), Error);
}

TEST_CASE("weighted line generator") {
    const auto w = gen_weighted_line<double>(5, 2.0, 2.0);
    // points -2,-1,0,1,2 with h = 1; the zero of dist(x,{-1,1}) is replaced by (h/2)^(q-1) h
    const double expected[] = {1.0, 0.5, 1.0, 0.5, 1.0};
    for (Index i = 0; i < 5; ++i) {
        CHECK((*w.coords())(i, 0) == doctest::Approx(-2.0 + double(i)));
        CHECK(w.weight(i) == doctest::Approx(expected[i]));
    }
    const auto flat = gen_weighted_line<double>(9, 2.0, 1.0);
    for (Index i = 0; i < 9; ++i) CHECK(flat.weight(i) == doctest::Approx(0.5));
    CHECK_THROWS_AS(gen_weighted_line<double>(2, 2.0, 2.0), Error);
    CHECK_THROWS_AS(gen_weighted_line<double>(5, 1.0, 2.0), Error);
}

TEST_CASE("snowflake") {
    const auto two = line_space<double>({0.0, 4.0}, {1.0, 1.0});
    CHECK(snowflake(two, 0.5).dist(0, 1) == doctest::Approx(2.0));
    CHECK(snowflake(two, 1.0).distances() == two.distances());
    CHECK(snowflake(two, 1.0).has_edges());
    CHECK_FALSE(snowflake(two, 0.5).has_edges());

    const auto p3 = *fixtures::path3();
    const auto s = snowflake(p3, 0.5);
    CHECK(s.dist(0, 2) == doctest::Approx(std::sqrt(2.0)));
    CHECK(triangle_violation(s) <= 0);

    CHECK_THROWS_AS(snowflake(p3, 0.0), Error);
    CHECK_THROWS_AS(snowflake(p3, 1.5), Error);

    const auto g = gen_grid<double>(9, 2);
    const auto twice = snowflake(snowflake(g, 0.7), 0.6);
    const auto once = snowflake(g, 0.42);
    CHECK((twice.distances() - once.distances()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("ball membership follows the open and closed conventions") {
    const auto two = *fixtures::two_point();
    CHECK(ball_members(two, Ball<double>{0, 1.0, false}) == PointSet({0}));
    CHECK(ball_members(two, Ball<double>{0, 1.0, true}) == PointSet({0, 1}));
    const auto p3 = *fixtures::path3();
    CHECK(ball_members(p3, Ball<double>{0, 2.0, false}) == PointSet({0, 1}));

    std::mt19937_64 rng(3);
    for (int t = 0; t < 5; ++t) {
        const auto X = fixtures::random_small_space(rng, 12, t % 2 == 0);
        std::uniform_real_distribution<double> U(0.0, 1.5 * X->diameter());
        for (int k = 0; k < 40; ++k) {
            const Index c = k % X->size();
            const double r = U(rng);
            for (bool closed : {false, true}) {
                const auto got = ball_members(*X, Ball<double>{c, r, closed});
                CHECK(got.ids() == naive_ball(*X, c, r, closed));
                CHECK(X->ball_mass(c, r, closed) == doctest::Approx(X->mass(got)));
            }
            CHECK(ball_members(*X, Ball<double>{c, r, false}).subset_of(ball_members(*X, Ball<double>{c, r, true})));
            CHECK(ball_members(*X, Ball<double>{c, r, true}).subset_of(ball_members(*X, Ball<double>{c, 1.1 * r, false})));
        }
    }
}

TEST_CASE("point set algebra") {
    const PointSet a({3, 1, 1, 2}), b({2, 5});
    CHECK(a.ids() == std::vector<Index>{1, 2, 3});
    CHECK(a.intersect(b) == PointSet({2}));
    CHECK(a.unite(b) == PointSet({1, 2, 3, 5}));
    CHECK(a.complement(6) == PointSet({0, 4, 5}));
    CHECK(PointSet({2}).subset_of(a));
    CHECK_FALSE(b.subset_of(a));
}

TEST_CASE("structural validation rejects malformed spaces") {
    Mat<double> d(2, 2);
    d << 0, 1, 2, 0;
    CHECK_THROWS_AS(Space(d, Vec<double>::Ones(2)), Error);
    d << 0, 1, 1, 0;
    CHECK_THROWS_AS(Space(d, Vec<double>::Zero(2)), Error);
    CHECK_THROWS_AS(Space(d, Vec<double>::Ones(2), std::nullopt, {{0, 2, 1.0}}), Error);
    d << 0, 0, 0, 0;
    CHECK_THROWS_AS(Space(d, Vec<double>::Ones(2)), Error);
}

TEST_CASE("triangle violation detects a corrupted metric") {
    Mat<double> d(3, 3);
    d << 0, 1, 5, 1, 0, 1, 5, 1, 0;
    const Space bad(d, Vec<double>::Ones(3));
    CHECK(triangle_violation(bad) == doctest::Approx(3.0));
}

TEST_CASE("doubling constant") {
    const Space single = line_space<double>({0.0}, {1.0});
    CHECK(estimate_doubling(single) == 1.0);
    CHECK(estimate_doubling(*fixtures::two_point()) == doctest::Approx(2.0));
    // B(b, 1) = {b} doubles to all three points
    CHECK(estimate_doubling(*fixtures::path3()) == doctest::Approx(3.0));

    const auto g = gen_grid<double>(17, 2);
    const double c = estimate_doubling(g);
    CHECK(c >= 3);
    CHECK(c <= 9);
    CHECK(estimate_doubling(g.scaled_weights(7.5)) == doctest::Approx(c).epsilon(1e-12));

    std::mt19937_64 rng(5);
    for (int t = 0; t < 6; ++t) {
        const auto X = fixtures::random_small_space(rng, 9, t % 2 == 1);
        CHECK(estimate_doubling(*X) == doctest::Approx(naive_doubling(*X)).epsilon(1e-12));
    }
}

TEST_CASE("reverse doubling and Ahlfors fits on grids") {
    CHECK(estimate_reverse_doubling(gen_grid<double>(33, 2)).sigma == doctest::Approx(2.0).epsilon(0.15));
    CHECK(estimate_reverse_doubling(gen_grid<double>(33, 1)).sigma == doctest::Approx(1.0).epsilon(0.3));
    CHECK(estimate_ahlfors(gen_grid<double>(17, 2)).Q == doctest::Approx(2.0).epsilon(0.15));
    CHECK_THROWS_AS(estimate_reverse_doubling(line_space<double>({0.0}, {1.0})), Error);

    Mat<double> d(3, 3);
    d << 0, 1, 2, 1, 0, 1, 2, 1, 0;
    const Space split(d, Vec<double>::Ones(3), std::nullopt, {{0, 1, 1.0}});
    try {
        estimate_reverse_doubling(split);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::refused);
    }
}

TEST_CASE("geodesic graph report") {
    CHECK(check_geodesic_graph(gen_grid<double>(3, 1)).max_relative_discrepancy == 0);
    const auto rep = check_geodesic_graph(gen_grid<double>(5, 2));
    CHECK_FALSE(rep.geodesic);
    CHECK(rep.max_relative_discrepancy == doctest::Approx(std::sqrt(2.0) - 1));
    try {
        check_geodesic_graph(snowflake(gen_grid<double>(3, 1), 0.5));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::not_applicable);
    }
}

TEST_CASE("measure statistics") {
    const auto s = measure_stats(gen_grid<double>(9, 2));
    CHECK(s.diam == doctest::Approx(std::sqrt(2.0)));
    CHECK(s.mesh == doctest::Approx(0.125));
    CHECK(s.c_mu >= 1);
    CHECK(s.connected);
    REQUIRE(s.reverse_doubling);
    CHECK(s.reverse_doubling->sigma > 0);
}
