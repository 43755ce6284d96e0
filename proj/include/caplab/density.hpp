#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "caplab/capacity.hpp"

namespace caplab {

struct ScanParams {
    double beta = 1;
    double p = 2;
    double q = 1;
};

struct ScanOptions {
    Index max_centers = 20;
    std::uint64_t seed = 0;
    /// Admissible radii lie in [floor_mesh_multiple * mesh, cap_diam_fraction * diam(X)].
    /// With the cap at diam/4 the host ball B(x, 2r) never covers X.
    double floor_mesh_multiple = 1;
    double cap_diam_fraction = 0.25;
    /// Divide by the solved capacity of the full closed ball instead of the
    /// normalized ball mass.
    bool raw_denominator = false;
    unsigned jobs = 1;
    SolverOptions solver;
};

struct DensitySample {
    Index x = 0;
    double r = 0;
    double numerator = 0;
    double denominator = 0;
    double ratio = 0;
    Index target_size = 0;
    std::string method;
    bool certified = false;
};

struct DensityReport {
    CapacityKind kind = CapacityKind::hajlasz;
    ScanParams params;
    std::vector<DensitySample> samples;  // sorted by (center rank, r)
    double c0_estimate = 0;
    std::vector<double> scales;
    std::vector<Index> centers;
    double radius_floor = 0;
    double radius_cap = 0;
    bool raw_denominator = false;
    std::string verdict;  // "supported on sampled scales" or "refuted on sampled scales"
};

enum class ComparisonPair { riesz_hajlasz, variational_hajlasz, content_restricted };

constexpr const char* to_string(ComparisonPair k) {
    switch (k) {
        case ComparisonPair::riesz_hajlasz: return "riesz-hajlasz";
        case ComparisonPair::variational_hajlasz: return "variational-hajlasz";
        case ComparisonPair::content_restricted: return "content-restricted-unrestricted";
    }
    return "unknown";
}

struct ComparabilitySample {
    Index x = 0;
    double r = 0;
    double first = 0;   // hajlasz; hajlasz; restricted content
    double second = 0;  // riesz; variational; unrestricted content
    double ratio = 0;   // first / second
    bool inequality_ok = true;  // variational <= 4^p hajlasz, or unrestricted <= restricted
};

struct ComparabilityReport {
    ComparisonPair pair = ComparisonPair::riesz_hajlasz;
    ScanParams params;
    std::vector<ComparabilitySample> samples;
    double band_min = 0;
    double band_max = 0;
    double band_spread = 1;
    bool two_sided = false;
    std::optional<double> sigma_fit;
    std::vector<std::string> warnings;
};

struct ContentRestriction {
    double restricted = 0;
    double unrestricted = 0;
    double ratio = 1;
    bool band_applicable = false;  // sigma fit >= q
    std::optional<double> sigma_fit;
};

struct ProbeRow {
    double gamma = 0;
    double s = 0;
    double c0_estimate = 0;
};

struct ProbeTable {
    double base_c0 = 0;
    std::optional<double> sigma_fit;
    std::vector<ProbeRow> rows;
    std::vector<std::pair<double, double>> excluded;
    std::string diagnostic;
};

/// Admissible radius window for scans over `space`.
std::pair<double, double> radius_window(const Space& space, const ScanOptions& options);

/// Up to k well-spread points of E chosen by farthest-point selection from a seeded start.
std::vector<Index> spread_centers(const Space& space, const PointSet& E, Index k, std::uint64_t seed);

/// The capacity problem of E cap closed B(x,r) used by the scans.
CapacityProblem local_problem(std::shared_ptr<const Space> space, const PointSet& E, CapacityKind kind,
                              const ScanParams& params, Index x, double r);

DensityReport density_scan(std::shared_ptr<const Space> space, const PointSet& E, CapacityKind kind,
                           const ScanParams& params, const std::vector<double>& radii,
                           const ScanOptions& options = {});

ComparabilityReport comparability_scan(std::shared_ptr<const Space> space, const PointSet& E, const ScanParams& params,
                                       const std::vector<double>& radii, const ScanOptions& options = {},
                                       ComparisonPair pair = ComparisonPair::riesz_hajlasz);

ContentRestriction content_restriction_check(std::shared_ptr<const Space> space, const PointSet& F, double q, double r,
                                             const SolverOptions& options = {});

ProbeTable self_improvement_probe(std::shared_ptr<const Space> space, const PointSet& E, const ScanParams& params,
                                  const std::vector<std::pair<double, double>>& grid, const std::vector<double>& radii,
                                  const ScanOptions& options = {});

}  // namespace caplab
