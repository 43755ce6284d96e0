#include <doctest.h>

#include <algorithm>

#include "caplab/recipes.hpp"
#include "fixtures.hpp"

using namespace caplab;

namespace {

const CaseCheck* find(const CaseResult& r, const std::string& name) {
    for (const auto& c : r.checks)
        if (c.name == name) return &c;
    return nullptr;
}

}  // namespace

TEST_CASE("verify suite on the two point space") {
    const auto r = verify_suite(*fixtures::two_point());
    CHECK(r.passed());
    CHECK(r.seconds < 1.0);
    CHECK(find(r, "triangle-inequality"));
    CHECK(find(r, "potential-linearity"));
    CHECK(r.bundle.record["passed"] == true);
    CHECK(r.bundle.record["invariants"].size() == r.checks.size());
}

TEST_CASE("verify suite on a grid") {
    const auto r = verify_suite(gen_grid<double>(17, 2));
    for (const auto& c : r.checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.passed);
    }
    CHECK(find(r, "variational-below-4p-hajlasz"));
    CHECK(find(r, "ball-chain-validity"));
}

TEST_CASE("verify suite flags a broken metric") {
    Mat<double> d(3, 3);
    d << 0, 1, 5, 1, 0, 1, 5, 1, 0;
    const auto r = verify_suite(Space(d, Vec<double>::Ones(3)));
    CHECK_FALSE(r.passed());
    const auto* tri = find(r, "triangle-inequality");
    REQUIRE(tri);
    CHECK_FALSE(tri->passed);
}

TEST_CASE("verify suite is deterministic") {
    const Space X = gen_grid<double>(9, 2);
    RecipeOptions a, b;
    a.jobs = 1;
    b.jobs = 4;
    CHECK(verify_suite(X, a).bundle.record == verify_suite(X, b).bundle.record);
}

TEST_CASE("recipe catalogue") {
    const auto& names = case_names();
    for (const char* n : {"weighted-line-degenerate", "ball-comparability", "four-way-equivalence", "annuli-trend"})
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    try {
        reproduce("no-such-case");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_parameter);
    }
}

TEST_CASE("annuli trend recipe") {
    const auto r = annuli_trend();
    for (const auto& c : r.checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.passed);
    }
    CHECK(r.passed());
    CHECK_FALSE(r.bundle.table.empty());
}

TEST_CASE("weighted line recipe") {
    const auto r = weighted_line_degenerate();
    for (const auto& c : r.checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.passed);
    }
    CHECK(r.bundle.record.contains("space_digest"));
}
