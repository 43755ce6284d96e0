#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "caplab/capacity.hpp"
#include "caplab/chain.hpp"
#include "caplab/density.hpp"
#include "caplab/io.hpp"
#include "caplab/parallel.hpp"
#include "caplab/potentials.hpp"
#include "caplab/recipes.hpp"
#include "caplab/stats.hpp"

namespace fs = std::filesystem;
using namespace caplab;
using io::Json;

namespace {

struct Global {
    std::string workdir = ".";
    std::string out = ".";
    std::string stem;
    unsigned jobs = default_jobs();
    std::optional<std::uint64_t> seed;
};

fs::path resolve(const Global& g, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(g.workdir) / path;
}

// CAPLAB_SEED wins over --seed, which wins over the config file's seed.
std::uint64_t effective_seed(const Global& g, const Json& config = Json::object()) {
    if (const char* env = std::getenv("CAPLAB_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw Error(ErrorKind::invalid_parameter, std::string("CAPLAB_SEED is not an unsigned integer: ") + env);
        }
    }
    if (g.seed) return *g.seed;
    if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
    return 0;
}

void emit(const Global& g, const io::ReportBundle& bundle, const std::string& stem) {
    const fs::path dir = resolve(g, g.out);
    const std::string name = g.stem.empty() ? stem : g.stem;
    bundle.write(dir, name);
    std::cout << "wrote " << (dir / (name + ".json")).lexically_normal().string() << "\n";
}

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string s;
    for (const auto& c : cells) s += (s.empty() ? "" : ",") + c;
    return s + "\n";
}

std::string str(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::shared_ptr<const Space> load_space(const Global& g, const Json& config, const std::string& key = "space") {
    if (!config.contains(key)) throw Error(ErrorKind::parse_error, "config is missing \"" + key + "\"");
    if (config[key].is_string()) return std::make_shared<const Space>(io::read_space(resolve(g, config[key].get<std::string>())));
    return std::make_shared<const Space>(io::space_from_json(config[key]));
}

std::vector<double> default_radii(const Space& space, const ScanOptions& so) {
    const auto [lo, hi] = radius_window(space, so);
    std::vector<double> r;
    for (double t = hi; t >= lo * (1 - 1e-12) && r.size() < 3; t /= 2) r.insert(r.begin(), t);
    return r;
}

struct ScanSetup {
    std::shared_ptr<const Space> space;
    PointSet E;
    ScanParams params;
    std::vector<double> radii;
    ScanOptions options;
    Json config;
};

ScanSetup scan_setup(const Global& g, const std::string& path) {
    ScanSetup s;
    s.config = io::read_json(resolve(g, path));
    s.space = load_space(g, s.config);
    s.E = s.config.contains("E") ? io::select_points(*s.space, s.config["E"]) : PointSet::all(s.space->size());
    s.params.beta = s.config.value("beta", 1.0);
    s.params.p = s.config.value("p", 2.0);
    s.params.q = s.config.value("q", 1.0);
    s.options.seed = effective_seed(g, s.config);
    s.options.jobs = g.jobs;
    s.options.max_centers = s.config.value("max_centers", Index{20});
    s.options.raw_denominator = s.config.value("raw_denominator", false);
    s.options.floor_mesh_multiple = s.config.value("floor_mesh_multiple", s.options.floor_mesh_multiple);
    s.options.cap_diam_fraction = s.config.value("cap_diam_fraction", s.options.cap_diam_fraction);
    s.radii = s.config.contains("radii") ? s.config["radii"].get<std::vector<double>>() : default_radii(*s.space, s.options);
    return s;
}

Json scan_provenance(const ScanSetup& s) {
    return {{"space_digest", io::space_digest(*s.space)},
            {"E", s.E.ids()},
            {"radii", s.radii},
            {"seed", s.options.seed},
            {"max_centers", s.options.max_centers},
            {"radius_floor_mesh_multiple", s.options.floor_mesh_multiple},
            {"radius_cap_diam_fraction", s.options.cap_diam_fraction}};
}

int cmd_gen(const Global& g, const std::optional<std::vector<double>>& grid,
            const std::optional<std::vector<double>>& wline, const std::optional<double>& flake,
            const std::string& from, const std::string& output) {
    const int chosen = int(grid.has_value()) + int(wline.has_value()) + int(flake.has_value());
    if (chosen != 1) throw Error(ErrorKind::invalid_parameter, "gen needs exactly one of --grid, --weighted-line, --snowflake");
    Json params;
    std::optional<Space> space;
    if (grid) {
        space = gen_grid<double>(Index((*grid)[0]), int((*grid)[1]));
        params = {{"generator", "grid"}, {"n", (*grid)[0]}, {"dim", (*grid)[1]}};
    } else if (wline) {
        space = gen_weighted_line<double>(Index((*wline)[0]), (*wline)[1], (*wline)[2]);
        params = {{"generator", "weighted-line"}, {"n", (*wline)[0]}, {"halfwidth", (*wline)[1]}, {"q", (*wline)[2]}};
    } else {
        if (from.empty()) throw Error(ErrorKind::invalid_parameter, "--snowflake needs --from <space file>");
        const Space base = io::read_space(resolve(g, from));
        space = snowflake(base, *flake);
        params = {{"generator", "snowflake"}, {"beta", *flake}, {"from_digest", io::space_digest(base)}};
    }
    io::write_text(resolve(g, output), io::dump_record(io::space_to_json(*space)));
    io::ReportBundle b;
    b.record = {{"command", "gen"}, {"space_digest", io::space_digest(*space)}, {"parameters", params},
                {"points", space->size()}, {"output", output}};
    b.table = csv_row({"points", "diameter", "mesh", "total_mass"}) +
              csv_row({std::to_string(space->size()), str(space->diameter()), str(space->mesh()), str(space->total_mass())});
    emit(g, b, "gen");
    std::cout << "space " << output << " with " << space->size() << " points\n";
    return 0;
}

int cmd_stats(const Global& g, const std::string& path) {
    const Space space = io::read_space(resolve(g, path));
    const auto s = measure_stats(space);
    Json rec = {{"command", "stats"}, {"space_digest", io::space_digest(space)}, {"parameters", Json::object()},
                {"diameter", s.diam}, {"mesh", s.mesh}, {"c_mu", s.c_mu}, {"connected", s.connected}};
    rec["reverse_doubling"] = s.reverse_doubling ? Json{{"sigma", s.reverse_doubling->sigma},
                                                         {"c_sigma", s.reverse_doubling->c_sigma},
                                                         {"samples", s.reverse_doubling->samples}}
                                                 : Json(nullptr);
    rec["ahlfors"] = s.ahlfors ? Json{{"Q", s.ahlfors->Q}, {"c_Q", s.ahlfors->c_Q}} : Json(nullptr);
    if (space.has_edges()) {
        const auto geo = check_geodesic_graph(space);
        rec["geodesic"] = {{"geodesic", geo.geodesic}, {"max_relative_discrepancy", geo.max_relative_discrepancy}};
    }
    io::ReportBundle b;
    b.record = rec;
    b.table = csv_row({"diameter", "mesh", "c_mu", "sigma", "Q", "connected"}) +
              csv_row({str(s.diam), str(s.mesh), str(s.c_mu),
                       s.reverse_doubling ? str(s.reverse_doubling->sigma) : "",
                       s.ahlfors ? str(s.ahlfors->Q) : "", s.connected ? "true" : "false"});
    emit(g, b, "stats");
    std::cout << "diam " << s.diam << "  mesh " << s.mesh << "  c_mu " << s.c_mu << "\n";
    return 0;
}

int cmd_cap(const Global& g, const std::string& path, bool oracle, const std::string& kind) {
    Json config = io::read_json(resolve(g, path));
    if (!kind.empty()) config["kind"] = kind;
    const auto P = io::problem_from_json(config, resolve(g, path).parent_path());
    const auto res = oracle ? brute_force_capacity(P) : solve_capacity(P);

    // the optimizer sits next to the report
    Json opt = Json::object();
    if (res.f) opt["f"] = std::vector<double>(res.f->begin(), res.f->end());
    if (res.u) opt["u"] = std::vector<double>(res.u->begin(), res.u->end());
    if (res.g) opt["g"] = std::vector<double>(res.g->begin(), res.g->end());
    if (res.cover) {
        Json balls = Json::array();
        for (const auto& ball : res.cover->balls) balls.push_back({{"center", ball.center}, {"radius", ball.radius}});
        opt["cover"] = balls;
    }
    const std::string stem = g.stem.empty() ? "cap" : g.stem;
    const fs::path opt_path = resolve(g, g.out) / (stem + ".optimizer.json");
    io::write_text(opt_path, io::dump_record(opt));

    io::ReportBundle b;
    Json result = io::result_to_json(res);
    result["optimizer"] = opt_path.lexically_normal().string();
    b.record = {{"command", "cap"}, {"space_digest", io::space_digest(*P.space)},
                {"parameters", io::problem_parameters(P)}, {"oracle", oracle}, {"result", result}};
    b.table = csv_row({"kind", "value", "method", "residual"}) +
              csv_row({to_string(P.kind), res.value.infinite ? "inf" : str(res.value.value), res.method,
                       str(res.feasibility_residual)});
    emit(g, b, "cap");
    std::cout << to_string(P.kind) << " capacity " << (res.value.infinite ? std::string("inf") : str(res.value.value))
              << " (" << res.method << ")\n";
    return 0;
}

int cmd_potential(const Global& g, const std::string& path) {
    const Json config = io::read_json(resolve(g, path));
    const auto space = load_space(g, config);
    const std::string op = config.value("op", std::string("riesz"));
    const double beta = config.value("beta", 1.0);
    auto field = [&](const char* key) {
        if (!config.contains(key)) throw Error(ErrorKind::parse_error, std::string("config is missing \"") + key + "\"");
        const auto& v = config[key];
        return v.is_string() ? io::field_from_json(io::read_json(resolve(g, v.get<std::string>()))).values
                             : io::field_from_json(v).values;
    };
    Json rec = {{"command", "potential"}, {"space_digest", io::space_digest(*space)}};
    Json params = {{"op", op}, {"beta", beta}};
    std::optional<Vec<double>> values;
    if (op == "riesz") {
        const double exclude = config.value("exclude_radius", 0.0);
        params["exclude_radius"] = exclude;
        values = riesz_potential(*space, field("f"), beta, exclude);
    } else if (op == "maximal") {
        values = maximal_function(*space, field("f"));
    } else if (op == "canonical-gradient") {
        values = canonical_gradient(*space, field("u"), beta);
    } else if (op == "verify-gradient") {
        const auto c = verify_hajlasz_gradient(*space, field("u"), field("g"), beta);
        rec["check"] = {{"ok", c.ok}, {"worst_pair", {c.worst_i, c.worst_j}}, {"worst_slack", c.worst_slack}};
    } else if (op == "poincare") {
        const double p = config.value("p", 2.0);
        params["p"] = p;
        const auto c = poincare_check(*space, field("u"), field("g"), beta, p);
        rec["check"] = {{"ok", c.ok}, {"balls_checked", c.balls_checked}, {"worst_ratio", c.worst_ratio},
                        {"worst_ball", {{"center", c.worst_ball.center}, {"radius", c.worst_ball.radius}}}};
    } else if (op == "kernel") {
        const double eta = config.value("eta", 1.0);
        params["eta"] = eta;
        const auto seed = effective_seed(g, config);
        params["seed"] = seed;
        const auto k = kernel_estimate_measure(*space, beta, eta, seed);
        rec["check"] = {{"c_K_observed", k.c_K_observed}, {"samples", k.samples}, {"vacuous", k.vacuous},
                        {"exhaustive", k.exhaustive}};
    } else if (op == "gradient-of-potential") {
        const double eta = config.value("eta", 1.0);
        params["eta"] = eta;
        const auto r = check_gradient_of_potential(*space, field("f"), beta, eta, effective_seed(g, config));
        rec["check"] = {{"C1_observed", r.C1_observed}, {"C1_bound", r.C1_bound}, {"c_mu", r.c_mu}, {"c_K", r.c_K}};
    } else if (op == "local-riesz-bound") {
        if (!config.contains("z") || !config.contains("r"))
            throw Error(ErrorKind::parse_error, "local-riesz-bound needs \"z\" and \"r\"");
        const Index z = config["z"].get<Index>();
        const double r = config["r"].get<double>();
        std::optional<double> c_mu;
        if (config.contains("c_mu")) c_mu = config["c_mu"].get<double>();
        params["z"] = z;
        params["r"] = r;
        const auto c = local_riesz_bound_check(*space, field("f"), beta, z, r, c_mu);
        rec["check"] = {{"ok", c.ok}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"c_mu", c.c_mu}};
    } else if (op == "leibniz") {
        if (!config.contains("kappa")) throw Error(ErrorKind::parse_error, "leibniz needs \"kappa\"");
        const double kappa = config["kappa"].get<double>();
        params["kappa"] = kappa;
        const auto l = leibniz_gradient(*space, field("u"), field("g"), field("psi"), kappa, beta);
        values = l.gradient;
        rec["check"] = {{"ok", l.check.ok}, {"worst_slack", l.check.worst_slack}};
    } else {
        throw Error(ErrorKind::invalid_parameter, "unknown potential op '" + op + "'");
    }
    rec["parameters"] = params;
    io::ReportBundle b;
    std::string table;
    if (values) {
        Json arr = Json::array();
        for (Index i = 0; i < values->size(); ++i) arr.push_back((*values)(i));
        rec["values"] = arr;
        table = "point,value\n";
        io::PlotSeries s{op, {}, {}};
        for (Index i = 0; i < values->size(); ++i) {
            table += csv_row({std::to_string(i), str((*values)(i))});
            s.x.push_back(double(i));
            s.y.push_back((*values)(i));
        }
        b.plot = {s};
    } else {
        table = "key,value\n";
        for (auto it = rec["check"].begin(); it != rec["check"].end(); ++it) table += csv_row({it.key(), it.value().dump()});
    }
    b.record = rec;
    b.table = table;
    emit(g, b, "potential");
    return 0;
}

io::PlotSeries min_ratio_series(const std::string& label, const std::vector<double>& scales,
                                const std::vector<std::pair<double, double>>& rr) {
    io::PlotSeries s{label, {}, {}};
    for (double r : scales) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& [rad, ratio] : rr)
            if (rad == r) m = std::min(m, ratio);
        s.x.push_back(r);
        s.y.push_back(m);
    }
    return s;
}

int cmd_density(const Global& g, const std::string& path, const std::optional<std::string>& kind_flag) {
    auto s = scan_setup(g, path);
    const std::string kname = kind_flag ? *kind_flag : s.config.value("kind", std::string("hajlasz"));
    const auto kind = capacity_kind_from_string(kname);
    const auto rep = density_scan(s.space, s.E, kind, s.params, s.radii, s.options);
    io::ReportBundle b;
    b.record = {{"command", "density"}, {"space_digest", io::space_digest(*s.space)},
                {"parameters", scan_provenance(s)}, {"report", io::density_to_json(rep)}};
    b.table = io::density_csv(rep);
    std::vector<std::pair<double, double>> rr;
    for (const auto& x : rep.samples) rr.push_back({x.r, x.ratio});
    b.plot = {min_ratio_series(std::string(to_string(kind)) + "-min-ratio", rep.scales, rr)};
    emit(g, b, "density");
    std::cout << "c0_estimate " << rep.c0_estimate << " (" << rep.verdict << ")\n";
    return 0;
}

ComparisonPair pair_from_string(const std::string& s) {
    if (s == "riesz-hajlasz") return ComparisonPair::riesz_hajlasz;
    if (s == "variational-hajlasz") return ComparisonPair::variational_hajlasz;
    if (s == "content-restricted") return ComparisonPair::content_restricted;
    throw Error(ErrorKind::invalid_parameter, "unknown pair '" + s + "'");
}

int cmd_compare(const Global& g, const std::string& path, const std::optional<std::string>& pair_flag) {
    auto s = scan_setup(g, path);
    const auto pair = pair_from_string(pair_flag ? *pair_flag : s.config.value("pair", std::string("riesz-hajlasz")));
    const auto rep = comparability_scan(s.space, s.E, s.params, s.radii, s.options, pair);
    io::ReportBundle b;
    b.record = {{"command", "compare"}, {"space_digest", io::space_digest(*s.space)},
                {"parameters", scan_provenance(s)}, {"report", io::comparability_to_json(rep)}};
    b.table = io::comparability_csv(rep);
    std::vector<std::pair<double, double>> rr;
    for (const auto& x : rep.samples) rr.push_back({x.r, x.ratio});
    std::vector<double> scales = s.radii;
    std::sort(scales.begin(), scales.end());
    b.plot = {min_ratio_series(std::string(to_string(pair)) + "-min-ratio", scales, rr)};
    emit(g, b, "compare");
    std::cout << "band [" << rep.band_min << ", " << rep.band_max << "] spread " << rep.band_spread << "\n";
    for (const auto& w : rep.warnings) std::cout << "warning: " << w << "\n";
    return 0;
}

int cmd_probe(const Global& g, const std::string& path) {
    auto s = scan_setup(g, path);
    std::vector<std::pair<double, double>> grid;
    if (!s.config.contains("grid")) throw Error(ErrorKind::parse_error, "config is missing \"grid\"");
    for (const auto& row : s.config["grid"]) grid.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
    const auto t = self_improvement_probe(s.space, s.E, s.params, grid, s.radii, s.options);
    io::ReportBundle b;
    Json params = scan_provenance(s);
    params["grid"] = s.config["grid"];
    b.record = {{"command", "probe"}, {"space_digest", io::space_digest(*s.space)}, {"parameters", params},
                {"report", io::probe_to_json(t)}};
    b.table = "gamma,s,c0_estimate\n";
    io::PlotSeries ps{"c0-by-row", {}, {}};
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        b.table += csv_row({str(t.rows[i].gamma), str(t.rows[i].s), str(t.rows[i].c0_estimate)});
        ps.x.push_back(double(i));
        ps.y.push_back(t.rows[i].c0_estimate);
    }
    b.plot = {ps};
    emit(g, b, "probe");
    if (!t.diagnostic.empty()) std::cout << t.diagnostic << "\n";
    return 0;
}

void print_checks(const CaseResult& r) {
    for (const auto& c : r.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
}

int cmd_verify(const Global& g, const std::string& path) {
    const Space space = io::read_space(resolve(g, path));
    RecipeOptions o{g.jobs, effective_seed(g)};
    const auto r = verify_suite(space, o);
    emit(g, r.bundle, "verify");
    print_checks(r);
    return r.passed() ? 0 : 1;
}

int cmd_reproduce(const Global& g, const std::string& name) {
    RecipeOptions o{g.jobs, effective_seed(g)};
    const auto r = reproduce(name, o);
    emit(g, r.bundle, name);
    print_checks(r);
    std::cout << name << (r.passed() ? " passed" : " FAILED") << " in " << r.seconds << " s\n";
    return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"caplab: capacities and density conditions on finite metric measure spaces"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--workdir", g.workdir, "Directory that relative paths are resolved against");
    app.add_option("--out", g.out, "Report directory, relative to --workdir");
    app.add_option("--stem", g.stem, "File stem for the report bundle");
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Subsampling seed (CAPLAB_SEED takes precedence)");

    std::optional<std::vector<double>> grid, wline;
    std::optional<double> flake;
    std::string from, output = "space.json";
    auto* gen = app.add_subcommand("gen", "Generate a space file");
    gen->add_option("--grid", grid, "N DIM")->expected(2);
    gen->add_option("--weighted-line", wline, "N HALFWIDTH Q")->expected(3);
    gen->add_option("--snowflake", flake, "BETA");
    gen->add_option("--from", from, "Space file to snowflake");
    gen->add_option("-o,--output", output, "Space file to write");

    std::string path;
    auto* stats = app.add_subcommand("stats", "Measured statistics of a space");
    stats->add_option("space", path)->required();

    bool oracle = false;
    auto* cap = app.add_subcommand("cap", "Solve a capacity problem file");
    cap->add_option("problem", path)->required();
    cap->add_flag("--oracle", oracle, "Use the brute-force oracle");
    std::string cap_kind;
    cap->add_option("--kind", cap_kind, "Override the problem file's kind: riesz | hajlasz | variational | content");

    auto* pot = app.add_subcommand("potential", "Potential and gradient operations from a config file");
    pot->add_option("config", path)->required();

    std::optional<std::string> kind, pair;
    auto* den = app.add_subcommand("density", "Density-condition scan from a config file");
    den->add_option("config", path)->required();
    den->add_option("--kind", kind, "riesz | hajlasz | variational | content");

    auto* cmp = app.add_subcommand("compare", "Comparability scan from a config file");
    cmp->add_option("config", path)->required();
    cmp->add_option("--pair", pair, "riesz-hajlasz | variational-hajlasz | content-restricted");

    auto* probe = app.add_subcommand("probe", "Self-improvement probe from a config file");
    probe->add_option("config", path)->required();

    auto* ver = app.add_subcommand("verify", "Run every invariant suite on a space");
    ver->add_option("space", path)->required();

    std::string case_name;
    auto* rep = app.add_subcommand("reproduce", "Run a pinned example recipe");
    rep->add_option("case", case_name)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_gen(g, grid, wline, flake, from, output);
        if (*stats) return cmd_stats(g, path);
        if (*cap) return cmd_cap(g, path, oracle, cap_kind);
        if (*pot) return cmd_potential(g, path);
        if (*den) return cmd_density(g, path, kind);
        if (*cmp) return cmd_compare(g, path, pair);
        if (*probe) return cmd_probe(g, path);
        if (*ver) return cmd_verify(g, path);
        if (*rep) return cmd_reproduce(g, case_name);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::internal ? 1 : 2;
    } catch (const Json::exception& e) {
        std::cerr << "error: parse-error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
