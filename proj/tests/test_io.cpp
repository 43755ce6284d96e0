#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "caplab/io.hpp"
#include "fixtures.hpp"

using namespace caplab;
using io::Json;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::internal;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "caplab_test_io";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("space round trip") {
    for (const Space& X : {gen_grid<double>(5, 2), gen_weighted_line<double>(21, 2.0, 3.0),
                           snowflake(gen_grid<double>(4, 2), 0.5), *fixtures::path3()}) {
        const Json j = io::space_to_json(X);
        const Space Y = io::space_from_json(Json::parse(j.dump()));
        REQUIRE(Y.size() == X.size());
        CHECK((Y.distances() - X.distances()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((Y.weights() - X.weights()).cwiseAbs().maxCoeff() == 0);
        CHECK(Y.edges().size() == X.edges().size());
        CHECK(io::space_digest(Y) == io::space_digest(X));
    }
    // the snowflake is not Euclidean in its coordinates, so the matrix form is written
    CHECK(io::space_to_json(snowflake(gen_grid<double>(4, 2), 0.5))["points"].is_null());
    // grid distances come from integer offsets; the exact matrix is kept along with the coordinates
    const Space g = gen_grid<double>(4, 2);
    const Json gj = io::space_to_json(g);
    const Space h = io::space_from_json(gj);
    CHECK(h.distances() == g.distances());
    REQUIRE(h.has_coords());
    CHECK(*h.coords() == *g.coords());
    CHECK(io::space_to_json(*fixtures::path3())["dist"].is_null());
}

TEST_CASE("space digests") {
    const auto a = io::space_digest(gen_grid<double>(5, 1));
    CHECK(a.rfind("fnv1a64:", 0) == 0);
    CHECK(a.size() == 8 + 16);
    CHECK(io::space_digest(gen_grid<double>(5, 1)) == a);
    CHECK(io::space_digest(gen_grid<double>(5, 1).scaled_weights(2)) != a);
    CHECK(io::space_digest(gen_grid<double>(6, 1)) != a);
}

TEST_CASE("malformed space documents") {
    CHECK(kind_of([] { io::space_from_json(Json::parse(R"({"points": [[0],[1]]})")); }) == ErrorKind::parse_error);
    CHECK(kind_of([] { io::space_from_json(Json::parse(R"({"weights": [1,1]})")); }) == ErrorKind::parse_error);
    CHECK(kind_of([] {
              io::space_from_json(Json::parse(R"({"weights": [1,1], "points": [[0],[1]], "dist": [[0,1],[1,0]]})"));
          }) == ErrorKind::parse_error);
    CHECK(kind_of([] { io::space_from_json(Json::parse(R"({"weights": [1,1], "points": [[0],[1,2]]})")); }) ==
          ErrorKind::parse_error);
    CHECK(kind_of([] { io::space_from_json(Json::parse(R"({"weights": [1,"x"], "points": [[0],[1]]})")); }) ==
          ErrorKind::parse_error);
    CHECK(kind_of([] {
              io::space_from_json(Json::parse(R"({"weights": [1,1], "points": [[0],[1]], "edges": [[0,1]]})"));
          }) == ErrorKind::parse_error);
    // structurally well formed but not a metric
    CHECK(kind_of([] { io::space_from_json(Json::parse(R"({"weights": [1,1], "dist": [[0,1],[2,0]]})")); }) ==
          ErrorKind::invalid_input);
}

TEST_CASE("parse errors carry a byte location") {
    const auto p = scratch("broken.json");
    io::write_text(p, "{\"weights\": [1, 2,, 3]}");
    try {
        io::read_json(p);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::parse_error);
        CHECK(std::string(e.what()).find("at byte 19") != std::string::npos);
    }
    CHECK(kind_of([] { io::read_json(scratch("missing.json")); }) == ErrorKind::parse_error);
}

TEST_CASE("selectors") {
    const Space g = gen_grid<double>(5, 2);
    CHECK(io::select_points(g, "all") == PointSet::all(25));
    CHECK(io::select_points(g, Json::parse("[3, 1, 3]")) == PointSet({1, 3}));
    const auto box = io::select_points(g, Json::parse(R"({"box": {"min": [0, 0], "max": [0.25, 0.5]}})"));
    CHECK(box.size() == 6);
    const auto ball = io::select_points(g, Json::parse(R"({"ball": {"center": 12, "radius": 0.25}})"));
    CHECK(ball == PointSet({7, 11, 12, 13, 17}));
    const auto open = io::select_points(g, Json::parse(R"({"ball": {"center": 12, "radius": 0.25, "closed": false}})"));
    CHECK(open == PointSet({12}));

    for (const char* bad : {R"("some")", "[25]", "[-1]", "[0.5]", R"({"box": {"min": [0]}})",
                            R"({"box": {"min": [0], "max": [1]}})", R"({"ball": {"radius": 1}})",
                            R"({"ball": {"center": 0, "radius": 1, "closed": 1}})", R"({"disk": 1})"}) {
        INFO(bad);
        CHECK(kind_of([&] { io::select_points(g, Json::parse(bad)); }) == ErrorKind::parse_error);
    }
    CHECK(kind_of([] {
              io::select_points(*fixtures::path3(), Json::parse(R"({"box": {"min": [0], "max": [1]}})"));
          }) != ErrorKind::parse_error);
}

TEST_CASE("problem documents") {
    const auto sp = scratch("two.json");
    io::write_text(sp, io::dump_record(io::space_to_json(*fixtures::two_point())));
    const auto P = io::problem_from_json(
        Json::parse(R"({"kind": "hajlasz", "space": "two.json", "F": [0], "Omega": [0], "beta": 1, "p": 2})"),
        sp.parent_path());
    CHECK(P.kind == CapacityKind::hajlasz);
    CHECK(P.space->size() == 2);
    CHECK(P.F == PointSet({0}));
    REQUIRE(P.omega);
    CHECK(*P.omega == PointSet({0}));
    const Json back = io::problem_parameters(P);
    CHECK(back["kind"] == "hajlasz");
    CHECK(back["Omega"] == Json::parse("[0]"));

    const auto inline_space = io::problem_from_json(
        Json{{"kind", "content"}, {"space", io::space_to_json(*fixtures::path3())}, {"F", "all"}, {"q", 0.5}}, ".");
    CHECK(inline_space.F.size() == 3);
    CHECK(inline_space.q == 0.5);

    CHECK(kind_of([&] { io::problem_from_json(Json::parse(R"({"kind": "energy", "space": "two.json"})"), sp.parent_path()); }) ==
          ErrorKind::parse_error);
    CHECK(kind_of([&] { io::problem_from_json(Json::parse(R"({"kind": "riesz"})"), sp.parent_path()); }) ==
          ErrorKind::parse_error);
    CHECK(kind_of([&] {
              io::problem_from_json(Json::parse(R"({"kind": "riesz", "space": "two.json", "p": "2"})"), sp.parent_path());
          }) == ErrorKind::parse_error);
}

TEST_CASE("field documents") {
    FieldVector<double> f;
    f.values = Vec<double>::LinSpaced(4, 0, 1);
    f.holder_exponent = 0.5;
    const auto g = io::field_from_json(Json::parse(io::field_to_json(f).dump()));
    CHECK(g.values == f.values);
    CHECK(g.holder_exponent == 0.5);
    CHECK_FALSE(g.holder_constant);
    CHECK(kind_of([] { io::field_from_json(Json::parse("[1, 2]")); }) == ErrorKind::parse_error);
}

TEST_CASE("report bundles") {
    auto X = std::make_shared<const Space>(gen_grid<double>(9, 2));
    ScanOptions opt;
    opt.max_centers = 3;
    const auto rep = density_scan(X, PointSet::all(X->size()), CapacityKind::riesz, {}, {0.125, 0.25}, opt);

    io::ReportBundle b;
    b.record = io::density_to_json(rep);
    b.table = io::density_csv(rep);
    b.plot = {{"ratio", {0.125, 0.25}, {1.0, 2.0}}};
    const auto dir = scratch("bundle");
    b.write(dir, "scan");

    const Json rec = io::read_json(dir / "scan.json");
    CHECK(rec["samples"].size() == rep.samples.size());
    CHECK(rec["summary"]["samples"] == rep.samples.size());
    CHECK(rec["kind"] == "riesz");
    CHECK(rec["denominator"] == "normalized-ball-mass");

    const std::string csv = slurp(dir / "scan.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rep.samples.size()) + 1);
    CHECK(csv.rfind("x,r,numerator,denominator,ratio", 0) == 0);
    CHECK(slurp(dir / "scan.plot.csv") == "series,x,y\nratio,0.125,1\nratio,0.25,2\n");

    // records are deterministic text
    CHECK(io::dump_record(b.record) == slurp(dir / "scan.json"));
}

TEST_CASE("non-finite values are written as strings") {
    CapacityResult r;
    r.value = CapacityValue::infinity();
    const Json j = io::result_to_json(r);
    CHECK(j.dump().find("inf") != std::string::npos);
    CHECK_NOTHROW(Json::parse(j.dump()));
}
