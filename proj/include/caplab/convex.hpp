#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace caplab {

/**
 * minimize   sum_i energy_i * z_i^p
 * subject to A z >= b   (sparse rows)
 *            lower <= z <= upper
 *
 * Variables with positive energy must have lower bound 0. Bounds may be
 * infinite.
 */
class PowerProgram {
public:
    PowerProgram(Eigen::Index num_vars, double p);

    Eigen::Index num_vars() const { return lower_.size(); }
    Eigen::Index num_rows() const { return static_cast<Eigen::Index>(rhs_.size()); }
    double p() const { return p_; }

    void set_bounds(Eigen::Index i, double lo, double hi);
    void set_energy(Eigen::Index i, double weight);

    /// Appends the row sum_k coef_k z_{idx_k} >= b.
    void add_row(std::initializer_list<std::pair<Eigen::Index, double>> entries, double b);
    void add_row(const std::vector<std::pair<Eigen::Index, double>>& entries, double b);

    const Eigen::VectorXd& lower() const { return lower_; }
    const Eigen::VectorXd& upper() const { return upper_; }
    const Eigen::VectorXd& energy() const { return energy_; }
    const std::vector<Eigen::Index>& row_start() const { return row_start_; }
    const std::vector<Eigen::Index>& cols() const { return cols_; }
    const std::vector<double>& vals() const { return vals_; }
    const std::vector<double>& rhs() const { return rhs_; }

    double objective(const Eigen::VectorXd& z) const;

    /// max_k (b_k - a_k z)^+ in the units of the rows as added.
    double max_row_violation(const Eigen::VectorXd& z) const;

private:
    Eigen::VectorXd lower_, upper_, energy_;
    double p_;
    std::vector<Eigen::Index> row_start_{0};
    std::vector<Eigen::Index> cols_;
    std::vector<double> vals_;
    std::vector<double> rhs_;
};

struct IpmOptions {
    int max_iterations = 300;
    double tolerance = 1e-11;
    // accepted when progress stalls or the Newton matrix cannot be factored
    double acceptable_tolerance = 1e-8;
    std::optional<bool> dense;  // force the dense or sparse Newton path
};

struct IpmResult {
    Eigen::VectorXd z;
    double objective = 0;
    int iterations = 0;
    bool converged = false;
    bool dense = true;
    double primal_residual = 0;
    double dual_residual = 0;
    double complementarity = 0;
    std::string status;
};

/// Mehrotra predictor-corrector primal-dual interior-point method.
IpmResult solve_power_program(const PowerProgram& program, const IpmOptions& options = {});

}  // namespace caplab
