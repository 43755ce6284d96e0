#pragma once

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "caplab/capacity.hpp"
#include "caplab/density.hpp"
#include "caplab/potentials.hpp"
#include "caplab/space.hpp"

namespace caplab::io {

using Json = nlohmann::json;

/// Reads a JSON document; parse failures become ErrorKind::parse_error with the location.
Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/**
 * Space files: {"points": [[...]...] | null, "dist": [[...]...] | null,
 * "weights": [...], "edges": [[i, j, len], ...], "coords": [[...]...]}. Exactly
 * one of points/dist is present; points imply Euclidean distances. The optional
 * coords accompany dist when coordinates exist but do not reproduce the metric
 * exactly, and serve the box selector.
 */
Json space_to_json(const Space& space);
Space space_from_json(const Json& j);
Space read_space(const std::filesystem::path& path);

/// Field files: {"values": [...], "beta": optional, "kappa": optional}.
Json field_to_json(const FieldVector<double>& f);
FieldVector<double> field_from_json(const Json& j);

/// 64-bit FNV-1a over the metric, weights and edges, as "fnv1a64:<hex>".
std::string space_digest(const Space& space);

/**
 * Point-set selectors: an index list, "all", {"box": {"min": [...], "max": [...]}}
 * over coordinates (inclusive), or {"ball": {"center": i, "radius": r, "closed": bool}}.
 */
PointSet select_points(const Space& space, const Json& selector);

/// Problem files; "space" is resolved relative to `base`.
CapacityProblem problem_from_json(const Json& j, const std::filesystem::path& base);
Json problem_parameters(const CapacityProblem& problem);

Json result_to_json(const CapacityResult& r);
Json density_to_json(const DensityReport& r);
Json comparability_to_json(const ComparabilityReport& r);
Json probe_to_json(const ProbeTable& t);

std::string density_csv(const DensityReport& r);
std::string comparability_csv(const ComparabilityReport& r);

/// A plot series as CSV with columns series,x,y.
struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
};
std::string plot_csv(const std::vector<PlotSeries>& series);

/// Machine record, human table and plot series written side by side.
struct ReportBundle {
    Json record;
    std::string table;
    std::vector<PlotSeries> plot;

    /// Writes <stem>.json, <stem>.csv and <stem>.plot.csv into dir.
    void write(const std::filesystem::path& dir, const std::string& stem) const;
};

/// Deterministic textual form of a machine record.
std::string dump_record(const Json& record);

}  // namespace caplab::io
