#pragma once

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "caplab/convex.hpp"
#include "caplab/space.hpp"

namespace caplab {

enum class CapacityKind { riesz, hajlasz, variational, content };

constexpr const char* to_string(CapacityKind k) {
    switch (k) {
        case CapacityKind::riesz: return "riesz";
        case CapacityKind::hajlasz: return "hajlasz";
        case CapacityKind::variational: return "variational";
        case CapacityKind::content: return "content";
    }
    return "unknown";
}

CapacityKind capacity_kind_from_string(const std::string& s);

struct CapacityProblem {
    CapacityKind kind = CapacityKind::hajlasz;
    std::shared_ptr<const Space> space;
    PointSet F;
    std::optional<PointSet> omega;  // open host; hajlasz and variational only
    double beta = 1;
    double p = 2;
    double q = 1;
    double rho = 1;

    /// Checks the invariants for the problem's kind.
    void validate() const;
};

/// Nonnegative real or +infinity, kept as a tag rather than a float overflow.
struct CapacityValue {
    double value = 0;
    bool infinite = false;

    static CapacityValue finite(double v) { return {v, false}; }
    static CapacityValue infinity() { return {std::numeric_limits<double>::infinity(), true}; }
    double as_double() const { return infinite ? std::numeric_limits<double>::infinity() : value; }
};

struct CoverBall {
    Index center = 0;
    double radius = 0;
};

struct Cover {
    std::vector<CoverBall> balls;
    double cost = 0;
};

struct CapacityResult {
    CapacityValue value;
    std::optional<Vec<double>> f;  // riesz
    std::optional<Vec<double>> u;  // hajlasz / variational
    std::optional<Vec<double>> g;
    std::optional<Cover> cover;    // content
    double feasibility_residual = 0;
    long iterations = 0;
    std::string method;
    bool certified = false;
    bool disconnected = false;     // variational: part of F cannot reach X \ Omega
    double lower_bound = 0;        // content: proven lower bound
    double optimality_gap = 0;     // content: (value - lower_bound) / value
};

struct SolverOptions {
    IpmOptions ipm;
    /// Hajlasz pair constraints are generated lazily above this many points.
    Index lazy_threshold = 400;
    int lazy_max_rounds = 40;
    /// Exact content cover search up to this many target points.
    Index content_exact_limit = 40;
    long content_node_limit = 2'000'000;
};

CapacityResult solve_riesz_capacity(const CapacityProblem& problem, const SolverOptions& options = {});
CapacityResult solve_hajlasz_capacity(const CapacityProblem& problem, const SolverOptions& options = {});
CapacityResult solve_variational_capacity(const CapacityProblem& problem, const SolverOptions& options = {});
CapacityResult solve_hausdorff_content(const CapacityProblem& problem, const SolverOptions& options = {});

/// Dispatches on problem.kind.
CapacityResult solve_capacity(const CapacityProblem& problem, const SolverOptions& options = {});

/**
 * Independent small-instance oracle.
 *
 * Capacity kinds are rewritten as a path-modulus program: minimize
 * sum w z^p subject to M z >= 1, z >= 0, where the rows of M are the Riesz
 * kernel rows, or one row per simple path from F to X \ Omega (complete graph
 * for hajlasz, edge graph for variational). That program is solved by dual
 * coordinate ascent until the primal/dual gap certifies 1e-10 relative.
 * Content enumerates covers by dynamic programming over subsets of F.
 */
CapacityResult brute_force_capacity(const CapacityProblem& problem);

/// Cost sum mu(B_k) r_k^{-q} of a cover, and whether its open balls contain F.
double cover_cost(const Space& space, const Cover& cover, double q);
bool cover_contains(const Space& space, const Cover& cover, const PointSet& F);

/// Largest violation of the hajlasz program's constraints at (u, g).
double hajlasz_residual(const CapacityProblem& problem, const Vec<double>& u, const Vec<double>& g);
/// Largest violation of the variational program's constraints at (u, g).
double variational_residual(const CapacityProblem& problem, const Vec<double>& u, const Vec<double>& g);
/// Largest violation of I_beta f >= 1 on F (and f >= 0).
double riesz_residual(const CapacityProblem& problem, const Vec<double>& f);

}  // namespace caplab
