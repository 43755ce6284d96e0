#include "caplab/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace caplab::io {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::parse_error, where + ": " + what);
}

const Json& member(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) bad(where, std::string("missing \"") + key + "\"");
    return j[key];
}

double number(const Json& j, const std::string& where) {
    if (!j.is_number()) bad(where, "expected a number");
    return j.get<double>();
}

bool flag(const Json& j, const std::string& where) {
    if (!j.is_boolean()) bad(where, "expected true or false");
    return j.get<bool>();
}

Index index(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) bad(where, "expected an integer index");
    return j.get<Index>();
}

std::vector<double> numbers(const Json& j, const std::string& where) {
    if (!j.is_array()) bad(where, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

Json vec_json(const Vec<double>& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json value_json(const CapacityValue& v) { return v.infinite ? Json("inf") : Json(v.value); }

Json finite_or_string(double v) {
    if (std::isnan(v)) return "nan";
    return std::isfinite(v) ? Json(v) : Json(v > 0 ? "inf" : "-inf");
}

}  // namespace

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse_error, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::parse_error, path.string() + " at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::invalid_parameter, "cannot write " + path.string());
    out << text;
}

Json space_to_json(const Space& space) {
    const Index n = space.size();
    Json j;
    bool euclidean = space.has_coords();
    if (euclidean) {
        const auto& c = *space.coords();
        for (Index a = 0; a < n && euclidean; ++a)
            for (Index b = a + 1; b < n && euclidean; ++b)
                euclidean = (c.row(a) - c.row(b)).norm() == space.dist(a, b);
    }
    auto coord_rows = [&] {
        const auto& c = *space.coords();
        Json pts = Json::array();
        for (Index a = 0; a < n; ++a) {
            Json row = Json::array();
            for (Index k = 0; k < c.cols(); ++k) row.push_back(c(a, k));
            pts.push_back(row);
        }
        return pts;
    };
    if (euclidean) {
        j["points"] = coord_rows();
        j["dist"] = nullptr;
    } else {
        // coordinates that do not reproduce the metric bit for bit ride along for selectors
        if (space.has_coords()) j["coords"] = coord_rows();
        Json d = Json::array();
        for (Index a = 0; a < n; ++a) {
            Json row = Json::array();
            for (Index b = 0; b < n; ++b) row.push_back(space.dist(a, b));
            d.push_back(row);
        }
        j["points"] = nullptr;
        j["dist"] = d;
    }
    j["weights"] = vec_json(space.weights());
    Json edges = Json::array();
    for (const auto& e : space.edges()) edges.push_back(Json::array({e.i, e.j, e.length}));
    j["edges"] = edges;
    return j;
}

Space space_from_json(const Json& j) {
    if (!j.is_object()) bad("space", "expected an object");
    if (!j.contains("weights")) bad("space", "missing \"weights\"");
    const auto w = numbers(j["weights"], "space.weights");
    const Index n = static_cast<Index>(w.size());
    const bool has_pts = j.contains("points") && !j["points"].is_null();
    const bool has_dist = j.contains("dist") && !j["dist"].is_null();
    if (has_pts == has_dist) bad("space", "exactly one of \"points\" and \"dist\" must be present");
    Mat<double> d(n, n);
    std::optional<Mat<double>> coords;
    if (has_pts) {
        const auto& P = j["points"];
        if (!P.is_array() || static_cast<Index>(P.size()) != n) bad("space.points", "expected one row per weight");
        const auto dim = P.empty() ? 0 : P[0].size();
        Mat<double> c(n, static_cast<Index>(dim));
        for (Index a = 0; a < n; ++a) {
            const auto row = numbers(P[a], "space.points[" + std::to_string(a) + "]");
            if (row.size() != dim) bad("space.points[" + std::to_string(a) + "]", "inconsistent dimension");
            for (std::size_t k = 0; k < dim; ++k) c(a, static_cast<Index>(k)) = row[k];
        }
        for (Index a = 0; a < n; ++a)
            for (Index b = 0; b < n; ++b) d(a, b) = (c.row(a) - c.row(b)).norm();
        coords = std::move(c);
    } else {
        if (j.contains("coords") && !j["coords"].is_null()) {
            const auto& P = j["coords"];
            if (!P.is_array() || static_cast<Index>(P.size()) != n) bad("space.coords", "expected one row per weight");
            const auto dim = P.empty() ? 0 : P[0].size();
            Mat<double> c(n, static_cast<Index>(dim));
            for (Index a = 0; a < n; ++a) {
                const auto row = numbers(P[a], "space.coords[" + std::to_string(a) + "]");
                if (row.size() != dim) bad("space.coords[" + std::to_string(a) + "]", "inconsistent dimension");
                for (std::size_t k = 0; k < dim; ++k) c(a, static_cast<Index>(k)) = row[k];
            }
            coords = std::move(c);
        }
        const auto& D = j["dist"];
        if (!D.is_array() || static_cast<Index>(D.size()) != n) bad("space.dist", "expected an n x n matrix");
        for (Index a = 0; a < n; ++a) {
            const auto row = numbers(D[a], "space.dist[" + std::to_string(a) + "]");
            if (static_cast<Index>(row.size()) != n) bad("space.dist[" + std::to_string(a) + "]", "expected n entries");
            for (Index b = 0; b < n; ++b) d(a, b) = row[b];
        }
    }
    std::vector<Edge<double>> edges;
    if (j.contains("edges") && !j["edges"].is_null()) {
        const auto& E = j["edges"];
        if (!E.is_array()) bad("space.edges", "expected an array");
        for (std::size_t k = 0; k < E.size(); ++k) {
            const std::string where = "space.edges[" + std::to_string(k) + "]";
            if (!E[k].is_array() || E[k].size() != 3) bad(where, "expected [i, j, length]");
            edges.push_back({index(E[k][0], where), index(E[k][1], where), number(E[k][2], where)});
        }
    }
    Vec<double> weights(n);
    for (Index a = 0; a < n; ++a) weights(a) = w[a];
    return Space(std::move(d), std::move(weights), std::move(coords), std::move(edges));
}

Space read_space(const std::filesystem::path& path) { return space_from_json(read_json(path)); }

Json field_to_json(const FieldVector<double>& f) {
    Json j;
    j["values"] = vec_json(f.values);
    if (f.holder_exponent) j["beta"] = *f.holder_exponent;
    if (f.holder_constant) j["kappa"] = *f.holder_constant;
    return j;
}

FieldVector<double> field_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("values")) bad("field", "expected an object with \"values\"");
    const auto v = numbers(j["values"], "field.values");
    FieldVector<double> f;
    f.values = Eigen::Map<const Vec<double>>(v.data(), static_cast<Index>(v.size()));
    if (j.contains("beta") && !j["beta"].is_null()) f.holder_exponent = number(j["beta"], "field.beta");
    if (j.contains("kappa") && !j["kappa"].is_null()) f.holder_constant = number(j["kappa"], "field.kappa");
    return f;
}

std::string space_digest(const Space& space) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < len; ++k) {
            h ^= p[k];
            h *= 1099511628211ull;
        }
    };
    const std::int64_t n = space.size();
    feed(&n, sizeof n);
    for (Index a = 0; a < space.size(); ++a)
        for (Index b = 0; b < space.size(); ++b) {
            const double v = space.dist(a, b);
            feed(&v, sizeof v);
        }
    for (Index a = 0; a < space.size(); ++a) {
        const double v = space.weight(a);
        feed(&v, sizeof v);
    }
    for (const auto& e : space.edges()) {
        const std::int64_t i = e.i, jj = e.j;
        feed(&i, sizeof i);
        feed(&jj, sizeof jj);
        feed(&e.length, sizeof e.length);
    }
    std::ostringstream os;
    os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

PointSet select_points(const Space& space, const Json& sel) {
    const Index n = space.size();
    if (sel.is_string()) {
        if (sel.get<std::string>() == "all") return PointSet::all(n);
        bad("selector", "unknown selector \"" + sel.get<std::string>() + "\"");
    }
    if (sel.is_array()) {
        std::vector<Index> ids;
        for (std::size_t k = 0; k < sel.size(); ++k) {
            const Index i = index(sel[k], "selector[" + std::to_string(k) + "]");
            if (i < 0 || i >= n) bad("selector[" + std::to_string(k) + "]", "point id out of range");
            ids.push_back(i);
        }
        return PointSet(std::move(ids));
    }
    if (sel.is_object() && sel.contains("box")) {
        if (!space.has_coords()) bad("selector.box", "space has no coordinates");
        const auto lo = numbers(member(sel["box"], "min", "selector.box"), "selector.box.min");
        const auto hi = numbers(member(sel["box"], "max", "selector.box"), "selector.box.max");
        const auto& c = *space.coords();
        if (static_cast<Index>(lo.size()) != c.cols() || static_cast<Index>(hi.size()) != c.cols())
            bad("selector.box", "bounds must match the coordinate dimension");
        return PointSet::where(n, [&](Index i) {
            for (Index k = 0; k < c.cols(); ++k)
                if (c(i, k) < lo[k] || c(i, k) > hi[k]) return false;
            return true;
        });
    }
    if (sel.is_object() && sel.contains("ball")) {
        const auto& b = sel["ball"];
        const Index center = index(member(b, "center", "selector.ball"), "selector.ball.center");
        if (center < 0 || center >= n) bad("selector.ball.center", "point id out of range");
        return ball_members(space, Ball<double>{center, number(member(b, "radius", "selector.ball"), "selector.ball.radius"),
                                                b.contains("closed") ? flag(b["closed"], "selector.ball.closed") : true});
    }
    bad("selector", "expected \"all\", an index list, {\"box\":...} or {\"ball\":...}");
}

CapacityProblem problem_from_json(const Json& j, const std::filesystem::path& base) {
    if (!j.is_object()) bad("problem", "expected an object");
    CapacityProblem P;
    if (!j.contains("kind") || !j["kind"].is_string()) bad("problem.kind", "missing kind");
    try {
        P.kind = capacity_kind_from_string(j["kind"].get<std::string>());
    } catch (const Error& e) {
        bad("problem.kind", e.what());
    }
    if (!j.contains("space")) bad("problem.space", "missing space");
    if (j["space"].is_string()) P.space = std::make_shared<const Space>(read_space(base / j["space"].get<std::string>()));
    else P.space = std::make_shared<const Space>(space_from_json(j["space"]));
    P.F = j.contains("F") ? select_points(*P.space, j["F"]) : PointSet{};
    if (j.contains("Omega") && !j["Omega"].is_null()) P.omega = select_points(*P.space, j["Omega"]);
    if (j.contains("beta")) P.beta = number(j["beta"], "problem.beta");
    if (j.contains("p")) P.p = number(j["p"], "problem.p");
    if (j.contains("q")) P.q = number(j["q"], "problem.q");
    if (j.contains("rho")) P.rho = number(j["rho"], "problem.rho");
    return P;
}

Json problem_parameters(const CapacityProblem& P) {
    Json j;
    j["kind"] = to_string(P.kind);
    j["F"] = P.F.ids();
    j["Omega"] = P.omega ? Json(P.omega->ids()) : Json(nullptr);
    j["beta"] = P.beta;
    j["p"] = P.p;
    j["q"] = P.q;
    j["rho"] = P.rho;
    return j;
}

Json result_to_json(const CapacityResult& r) {
    Json j;
    j["value"] = value_json(r.value);
    j["feasibility_residual"] = r.feasibility_residual;
    j["iterations"] = r.iterations;
    j["method"] = r.method;
    j["certified"] = r.certified;
    if (r.disconnected) j["disconnected"] = true;
    if (r.cover) {
        j["lower_bound"] = r.lower_bound;
        j["optimality_gap"] = r.optimality_gap;
    }
    return j;
}

Json density_to_json(const DensityReport& r) {
    Json j;
    j["kind"] = to_string(r.kind);
    j["parameters"] = {{"beta", r.params.beta}, {"p", r.params.p}, {"q", r.params.q}};
    j["scales"] = r.scales;
    j["centers"] = r.centers;
    j["radius_window"] = {r.radius_floor, r.radius_cap};
    j["denominator"] = r.raw_denominator ? "capacity-of-ball" : "normalized-ball-mass";
    Json samples = Json::array();
    for (const auto& s : r.samples)
        samples.push_back({{"x", s.x}, {"r", s.r}, {"numerator", finite_or_string(s.numerator)},
                           {"denominator", s.denominator}, {"ratio", finite_or_string(s.ratio)},
                           {"target_size", s.target_size}, {"method", s.method}, {"certified", s.certified}});
    j["samples"] = samples;
    j["summary"] = {{"c0_estimate", finite_or_string(r.c0_estimate)}, {"verdict", r.verdict},
                    {"samples", r.samples.size()}};
    return j;
}

Json comparability_to_json(const ComparabilityReport& r) {
    Json j;
    j["pair"] = to_string(r.pair);
    j["parameters"] = {{"beta", r.params.beta}, {"p", r.params.p}, {"q", r.params.q}};
    j["two_sided"] = r.two_sided;
    j["sigma_fit"] = r.sigma_fit ? Json(*r.sigma_fit) : Json(nullptr);
    j["warnings"] = r.warnings;
    Json samples = Json::array();
    for (const auto& s : r.samples)
        samples.push_back({{"x", s.x}, {"r", s.r}, {"first", finite_or_string(s.first)},
                           {"second", finite_or_string(s.second)}, {"ratio", finite_or_string(s.ratio)},
                           {"inequality_ok", s.inequality_ok}});
    j["samples"] = samples;
    j["summary"] = {{"band_min", finite_or_string(r.band_min)}, {"band_max", finite_or_string(r.band_max)},
                    {"band_spread", finite_or_string(r.band_spread)}};
    return j;
}

Json probe_to_json(const ProbeTable& t) {
    Json j;
    j["base_c0"] = t.base_c0;
    j["sigma_fit"] = t.sigma_fit ? Json(*t.sigma_fit) : Json(nullptr);
    Json rows = Json::array();
    for (const auto& r : t.rows) rows.push_back({{"gamma", r.gamma}, {"s", r.s}, {"c0_estimate", r.c0_estimate}});
    j["rows"] = rows;
    Json ex = Json::array();
    for (const auto& [g, s] : t.excluded) ex.push_back({{"gamma", g}, {"s", s}});
    j["excluded"] = ex;
    j["diagnostic"] = t.diagnostic;
    return j;
}

std::string density_csv(const DensityReport& r) {
    std::ostringstream os;
    os << "x,r,numerator,denominator,ratio,target_size,method,certified\n";
    for (const auto& s : r.samples)
        os << s.x << ',' << fmt(s.r) << ',' << fmt(s.numerator) << ',' << fmt(s.denominator) << ',' << fmt(s.ratio)
           << ',' << s.target_size << ',' << s.method << ',' << (s.certified ? 1 : 0) << '\n';
    return os.str();
}

std::string comparability_csv(const ComparabilityReport& r) {
    std::ostringstream os;
    os << "x,r,first,second,ratio,inequality_ok\n";
    for (const auto& s : r.samples)
        os << s.x << ',' << fmt(s.r) << ',' << fmt(s.first) << ',' << fmt(s.second) << ',' << fmt(s.ratio) << ','
           << (s.inequality_ok ? 1 : 0) << '\n';
    return os.str();
}

std::string plot_csv(const std::vector<PlotSeries>& series) {
    std::ostringstream os;
    os << "series,x,y\n";
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) os << s.label << ',' << fmt(s.x[k]) << ',' << fmt(s.y[k]) << '\n';
    return os.str();
}

std::string dump_record(const Json& record) { return record.dump(2) + "\n"; }

void ReportBundle::write(const std::filesystem::path& dir, const std::string& stem) const {
    write_text(dir / (stem + ".json"), dump_record(record));
    write_text(dir / (stem + ".csv"), table);
    write_text(dir / (stem + ".plot.csv"), plot_csv(plot));
}

}  // namespace caplab::io
