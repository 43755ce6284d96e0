#include <doctest.h>

#include <cmath>
#include <functional>

#include "caplab/density.hpp"
#include "fixtures.hpp"

using namespace caplab;

namespace {

std::shared_ptr<const Space> grid(Index n, Index dim) { return std::make_shared<const Space>(gen_grid<double>(n, dim)); }

PointSet select_box(const Space& X, std::vector<double> lo, std::vector<double> hi) {
    const auto& c = *X.coords();
    return PointSet::where(X.size(), [&](Index i) {
        for (Index d = 0; d < c.cols(); ++d)
            if (c(i, d) < lo[d] - 1e-12 || c(i, d) > hi[d] + 1e-12) return false;
        return true;
    });
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::internal;
}

}  // namespace

TEST_CASE("radius window") {
    const auto g = grid(17, 2);
    const auto [lo, hi] = radius_window(*g, {});
    CHECK(lo == doctest::Approx(1.0 / 16));
    CHECK(hi == doctest::Approx(std::sqrt(2.0) / 4));
    const PointSet all = PointSet::all(g->size());
    CHECK(kind_of([&] { density_scan(g, all, CapacityKind::riesz, {}, {0.5}); }) == ErrorKind::invalid_parameter);
    CHECK(kind_of([&] { density_scan(g, all, CapacityKind::riesz, {}, {0.01}); }) == ErrorKind::invalid_parameter);
    CHECK(kind_of([&] { density_scan(g, all, CapacityKind::riesz, {}, {}); }) == ErrorKind::invalid_parameter);
    CHECK(kind_of([&] { density_scan(g, PointSet{}, CapacityKind::riesz, {}, {0.1}); }) ==
          ErrorKind::invalid_parameter);
    const auto two = fixtures::two_point();
    CHECK(kind_of([&] { density_scan(two, PointSet::all(2), CapacityKind::riesz, {}, {1.0}); }) ==
          ErrorKind::not_applicable);
}

TEST_CASE("spread centers are distinct, inside E, and seeded") {
    const auto g = grid(17, 2);
    const PointSet E = select_box(*g, {0.0, 0.0}, {0.5, 1.0});
    const auto c = spread_centers(*g, E, 10, 3);
    CHECK(c.size() == 10);
    for (Index x : c) CHECK(E.contains(x));
    CHECK(PointSet(c).size() == c.size());
    CHECK(spread_centers(*g, E, 10, 3) == c);
    CHECK(spread_centers(*g, PointSet({4}), 5, 0) == std::vector<Index>{4});
}

TEST_CASE("scan numerators match the brute force oracle") {
    // grid(8,1): window [1/7, 1/4], every closed ball target holds at most 5 points
    const auto g8 = grid(8, 1);
    ScanParams params;
    params.q = 0.7;
    ScanOptions opt;
    opt.max_centers = 8;
    const auto rep = density_scan(g8, PointSet::all(8), CapacityKind::content, params, {0.15, 0.25}, opt);
    CHECK(rep.samples.size() == 16);
    for (const auto& s : rep.samples) {
        const auto P = local_problem(g8, PointSet::all(8), CapacityKind::content, params, s.x, s.r);
        CHECK(s.numerator == doctest::Approx(brute_force_capacity(P).value.value).epsilon(1e-9));
        CHECK(s.denominator == doctest::Approx(std::pow(s.r, -0.7) * g8->ball_mass(s.x, s.r)));
    }

    // grid(5,1): window is the single radius 1/4
    const auto g5 = grid(5, 1);
    opt.max_centers = 5;
    for (CapacityKind k : {CapacityKind::riesz, CapacityKind::hajlasz, CapacityKind::variational}) {
        const auto r = density_scan(g5, PointSet({0, 1, 2}), k, {}, {0.25}, opt);
        REQUIRE(r.samples.size() == 3);
        for (const auto& s : r.samples) {
            const auto P = local_problem(g5, PointSet({0, 1, 2}), k, {}, s.x, s.r);
            const double want = brute_force_capacity(P).value.value;
            CHECK(s.numerator == doctest::Approx(want).epsilon(1e-6));
        }
        double c0 = INFINITY;
        for (const auto& s : r.samples) c0 = std::min(c0, s.ratio);
        CHECK(r.c0_estimate == c0);
    }
}

TEST_CASE("content scan on the full grid stays bounded below") {
    const auto g = grid(17, 2);
    ScanOptions opt;
    opt.max_centers = 5;
    const auto rep = density_scan(g, PointSet::all(g->size()), CapacityKind::content, {}, {0.0625, 0.125, 0.25}, opt);
    CHECK(rep.c0_estimate >= 1);
    CHECK(rep.verdict == "supported on sampled scales");
    for (std::size_t i = 1; i < rep.samples.size(); ++i) {
        const auto& a = rep.samples[i - 1];
        const auto& b = rep.samples[i];
        if (a.x == b.x) CHECK(a.r < b.r);
    }
}

TEST_CASE("single point content density decays with the radius") {
    const auto g = grid(17, 2);
    const PointSet one({144});
    ScanOptions opt;
    opt.max_centers = 1;
    ScanParams params;
    params.q = 1;
    const auto rep = density_scan(g, one, CapacityKind::content, params, {0.0625, 0.125, 0.25}, opt);
    REQUIRE(rep.samples.size() == 3);
    CHECK(rep.samples[0].ratio > rep.samples[1].ratio);
    CHECK(rep.samples[1].ratio > rep.samples[2].ratio);
    CHECK(rep.samples[0].ratio >= 3 * rep.samples[2].ratio);
}

TEST_CASE("raw denominator uses the solved capacity of the full ball") {
    const auto g5 = grid(5, 1);
    ScanOptions opt;
    opt.raw_denominator = true;
    opt.max_centers = 5;
    const auto rep = density_scan(g5, PointSet::all(5), CapacityKind::hajlasz, {}, {0.25}, opt);
    for (const auto& s : rep.samples) CHECK(s.ratio == doctest::Approx(1.0));
}

TEST_CASE("scans are identical for any job count") {
    const auto g = grid(17, 2);
    ScanOptions a, b;
    a.max_centers = b.max_centers = 6;
    a.jobs = 1;
    b.jobs = 4;
    const PointSet all = PointSet::all(g->size());
    const auto ra = density_scan(g, all, CapacityKind::riesz, {}, {0.0625, 0.125}, a);
    const auto rb = density_scan(g, all, CapacityKind::riesz, {}, {0.0625, 0.125}, b);
    REQUIRE(ra.samples.size() == rb.samples.size());
    for (std::size_t i = 0; i < ra.samples.size(); ++i) {
        CHECK(ra.samples[i].x == rb.samples[i].x);
        CHECK(ra.samples[i].numerator == rb.samples[i].numerator);
    }
    CHECK(ra.c0_estimate == rb.c0_estimate);
}

TEST_CASE("content restriction check") {
    const auto g = grid(9, 2);
    const PointSet F = ball_members(*g, Ball<double>{40, 0.25, true});
    const auto c = content_restriction_check(g, F, 1.0, 0.25);
    CHECK(c.unrestricted <= c.restricted);
    CHECK(c.ratio >= 1);
    REQUIRE(c.sigma_fit);
    CHECK(c.band_applicable == (*c.sigma_fit >= 1.0));
    CHECK(kind_of([&] { content_restriction_check(g, PointSet({0, 80}), 1.0, 0.25); }) ==
          ErrorKind::precondition_violation);
    CHECK(kind_of([&] { content_restriction_check(g, F, 0.0, 0.25); }) == ErrorKind::invalid_parameter);
}

TEST_CASE("comparability scans") {
    const auto g = grid(17, 2);
    const PointSet quadrant = select_box(*g, {0.0, 0.0}, {0.5, 0.5});
    ScanOptions opt;
    opt.max_centers = 3;
    ScanParams params;
    params.beta = 0.5;
    const auto rh = comparability_scan(g, quadrant, params, {0.0625, 0.125}, opt);
    CHECK(rh.samples.size() == 6);
    CHECK(rh.band_min > 0);
    CHECK(rh.band_spread < 20);
    CHECK(rh.two_sided);

    const auto vh = comparability_scan(g, quadrant, {}, {0.0625, 0.125}, opt, ComparisonPair::variational_hajlasz);
    for (const auto& s : vh.samples) CHECK(s.inequality_ok);

    const auto cr = comparability_scan(g, quadrant, {}, {0.0625}, opt, ComparisonPair::content_restricted);
    for (const auto& s : cr.samples) {
        CHECK(s.inequality_ok);
        CHECK(s.ratio >= 1);
    }
}

TEST_CASE("self improvement probe") {
    const auto g = grid(17, 2);
    const PointSet all = PointSet::all(g->size());
    ScanOptions opt;
    opt.max_centers = 2;
    const auto t = self_improvement_probe(g, all, {}, {{0.5, 2.0}, {1.0, 3.0}, {0.0, 2.0}}, {0.125}, opt);
    REQUIRE(t.sigma_fit);
    CHECK(t.base_c0 > 1e-3);
    CHECK(t.rows.size() == 1);
    CHECK(t.rows[0].gamma == 0.5);
    CHECK(t.excluded.size() == 2);

    // every grid point excluded: the table is empty and says why
    const auto none = self_improvement_probe(g, all, {}, {{1.0, 3.0}}, {0.125}, opt);
    CHECK(none.rows.empty());
    CHECK_FALSE(none.diagnostic.empty());

    // a single point has no admissible scale at all
    const Space single = line_space<double>({0.0}, {1.0});
    CHECK(kind_of([&] {
              self_improvement_probe(std::make_shared<const Space>(single), PointSet({0}), {}, {{0.5, 2.0}}, {0.1});
          }) != ErrorKind::internal);
}
