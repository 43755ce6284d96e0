#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

/// A fresh working directory per test case.
fs::path workdir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "caplab_test_cli" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

Run run(const fs::path& dir, const std::string& args, const std::string& env = "") {
    const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" CAPLAB_CLI "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "stdout.txt");
    r.err = slurp(dir / "stderr.txt");
    return r;
}

}  // namespace

TEST_CASE("gen writes a loadable space and a report bundle") {
    const auto d = workdir("gen");
    const auto r = run(d, "gen --grid 5 2 -o g.json");
    REQUIRE(r.code == 0);
    const Json s = Json::parse(slurp(d / "g.json"));
    CHECK(s["weights"].size() == 25);
    CHECK(fs::exists(d / "gen.json"));
    CHECK(fs::exists(d / "gen.csv"));
    CHECK(fs::exists(d / "gen.plot.csv"));

    CHECK(run(d, "stats g.json").code == 0);
    CHECK(Json::parse(slurp(d / "stats.json"))["space_digest"] == Json::parse(slurp(d / "gen.json"))["space_digest"]);

    REQUIRE(run(d, "gen --snowflake 0.5 --from g.json -o s.json").code == 0);
    const Json flake = Json::parse(slurp(d / "s.json"));
    CHECK(flake["dist"][0][1].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("cap solves the two point example") {
    const auto d = workdir("cap");
    put(d / "two.json", R"({"points": [[0], [1]], "dist": null, "weights": [1, 1], "edges": [[0, 1, 1]]})");
    put(d / "prob.json", R"({"kind": "hajlasz", "space": "two.json", "F": [0], "Omega": [0], "beta": 1, "p": 2})");
    const auto r = run(d, "cap prob.json");
    REQUIRE(r.code == 0);
    const Json rec = Json::parse(slurp(d / "cap.json"));
    CHECK(rec["result"]["value"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rec["space_digest"].get<std::string>().rfind("fnv1a64:", 0) == 0);

    const Json opt = Json::parse(slurp(d / rec["result"]["optimizer"].get<std::string>()));
    CHECK(opt["u"].size() == 2);
    CHECK(opt["g"].size() == 2);

    REQUIRE(run(d, "--stem riesz cap prob.json --kind riesz").code == 0);
    const Json riesz = Json::parse(slurp(d / "riesz.json"));
    CHECK(riesz["parameters"]["kind"] == "riesz");
    CHECK(riesz["result"]["value"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

    REQUIRE(run(d, "--stem oracle cap prob.json --oracle").code == 0);
    CHECK(Json::parse(slurp(d / "oracle.json"))["result"]["value"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("density scan of the full grid") {
    const auto d = workdir("density");
    REQUIRE(run(d, "gen --grid 17 2 -o g.json").code == 0);
    put(d / "scan.json", R"({"space": "g.json", "E": "all", "radii": [0.0625, 0.125, 0.25], "max_centers": 4})");
    const auto r = run(d, "--out reports density scan.json --kind content");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("wrote reports/density.json") != std::string::npos);
    const Json rec = Json::parse(slurp(d / "reports" / "density.json"));
    CHECK(rec["report"]["summary"]["c0_estimate"].get<double>() >= 1);
    CHECK(rec["report"]["samples"].size() == 12);
    CHECK(rec.contains("space_digest"));
    CHECK(rec["parameters"]["radii"].size() == 3);
    CHECK(rec["parameters"].contains("seed"));
    const std::string csv = slurp(d / "reports" / "density.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}

TEST_CASE("records do not depend on the worker count") {
    const auto d = workdir("jobs");
    REQUIRE(run(d, "gen --grid 17 2 -o g.json").code == 0);
    put(d / "scan.json",
        R"({"space": "g.json", "E": {"box": {"min": [0, 0], "max": [0.5, 1]}}, "radii": [0.0625, 0.125], "max_centers": 6})");
    REQUIRE(run(d, "--jobs 1 --stem one density scan.json --kind hajlasz").code == 0);
    REQUIRE(run(d, "--jobs 8 --stem eight density scan.json --kind hajlasz").code == 0);
    CHECK(slurp(d / "one.json") == slurp(d / "eight.json"));
    CHECK(slurp(d / "one.csv") == slurp(d / "eight.csv"));
}

TEST_CASE("seed precedence") {
    const auto d = workdir("seed");
    REQUIRE(run(d, "gen --grid 9 2 -o g.json").code == 0);
    put(d / "scan.json", R"({"space": "g.json", "E": "all", "radii": [0.25], "max_centers": 2, "seed": 3})");
    REQUIRE(run(d, "--stem cfg density scan.json").code == 0);
    CHECK(Json::parse(slurp(d / "cfg.json"))["parameters"]["seed"] == 3);
    REQUIRE(run(d, "--seed 4 --stem flag density scan.json").code == 0);
    CHECK(Json::parse(slurp(d / "flag.json"))["parameters"]["seed"] == 4);
    REQUIRE(run(d, "--seed 4 --stem env density scan.json", "CAPLAB_SEED=5").code == 0);
    CHECK(Json::parse(slurp(d / "env.json"))["parameters"]["seed"] == 5);
    CHECK(run(d, "density scan.json", "CAPLAB_SEED=five").code == 2);
}

TEST_CASE("potential operations") {
    const auto d = workdir("potential");
    put(d / "p3.json", R"({"points": [[0], [1], [2]], "dist": null, "weights": [1, 1, 1], "edges": [[0, 1, 1], [1, 2, 1]]})");
    put(d / "riesz.json", R"({"space": "p3.json", "op": "riesz", "f": {"values": [0, 1, 0]}})");
    REQUIRE(run(d, "--stem riesz potential riesz.json").code == 0);
    CHECK(Json::parse(slurp(d / "riesz.json"))["values"][0].get<double>() == doctest::Approx(1.0));
    put(d / "local.json",
        R"({"space": "p3.json", "op": "local-riesz-bound", "f": {"values": [0, 1, 0]}, "z": 0, "r": 1.5, "c_mu": 2})");
    REQUIRE(run(d, "--stem local potential local.json").code == 0);
    const Json local = Json::parse(slurp(d / "local.json"));
    CHECK(local["check"]["lhs"].get<double>() == doctest::Approx(1.0));
    CHECK(local["check"]["ok"] == true);
    put(d / "nope.json", R"({"space": "p3.json", "op": "laplacian"})");
    CHECK(run(d, "potential nope.json").code == 2);
}

TEST_CASE("exit codes") {
    const auto d = workdir("exits");
    CHECK(run(d, "").code == 2);
    CHECK(run(d, "frobnicate").code == 2);
    CHECK(run(d, "stats missing.json").code == 2);
    put(d / "bad.json", "{\"weights\": [1, 2,, 3]}");
    const auto bad = run(d, "stats bad.json");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("at byte") != std::string::npos);
    CHECK(run(d, "reproduce no-such-case").code == 2);
    CHECK(run(d, "gen --grid 1 1").code == 2);
    CHECK(run(d, "--help").code == 0);
}

TEST_CASE("verify names the broken invariant") {
    const auto d = workdir("verify");
    put(d / "ok.json", R"({"points": [[0], [1]], "dist": null, "weights": [1, 1], "edges": [[0, 1, 1]]})");
    const auto good = run(d, "verify ok.json");
    CHECK(good.code == 0);
    put(d / "broken.json", R"({"dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]], "weights": [1, 1, 1]})");
    const auto bad = run(d, "--stem report verify broken.json");
    CHECK(bad.code == 1);
    CHECK(bad.out.find("triangle-inequality") != std::string::npos);
    const Json rec = Json::parse(slurp(d / "report.json"));
    CHECK(rec["passed"] == false);
    bool named = false;
    for (const auto& inv : rec["invariants"])
        if (inv["invariant"] == "triangle-inequality") named = inv["passed"] == false;
    CHECK(named);
}

TEST_CASE("reproduce runs a pinned recipe") {
    const auto d = workdir("reproduce");
    const auto r = run(d, "reproduce annuli-trend");
    CHECK(r.code == 0);
    CHECK(r.out.find("annuli-trend passed") != std::string::npos);
    CHECK(fs::exists(d / "annuli-trend.json"));
}
