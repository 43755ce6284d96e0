#include "caplab/convex.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>

#include "caplab/error.hpp"

namespace caplab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rows with more entries than this go through a dense rank update.
constexpr Eigen::Index kWideRow = 48;

struct Scaled {
    Eigen::Index n = 0, m = 0;
    std::vector<Eigen::Index> start, cols;
    std::vector<double> vals;
    Eigen::VectorXd b, lo, hi, c;
    double p = 2;
    double obj_scale = 1;
};

Scaled normalize(const PowerProgram& prog) {
    Scaled s;
    s.n = prog.num_vars();
    s.m = prog.num_rows();
    s.start = prog.row_start();
    s.cols = prog.cols();
    s.vals = prog.vals();
    s.b = Eigen::Map<const Eigen::VectorXd>(prog.rhs().data(), s.m);
    for (Eigen::Index k = 0; k < s.m; ++k) {
        double mx = 0;
        for (auto e = s.start[k]; e < s.start[k + 1]; ++e) mx = std::max(mx, std::abs(s.vals[e]));
        if (mx == 0) continue;
        for (auto e = s.start[k]; e < s.start[k + 1]; ++e) s.vals[e] /= mx;
        s.b(k) /= mx;
    }
    s.lo = prog.lower();
    s.hi = prog.upper();
    s.p = prog.p();
    const double cmax = prog.energy().size() ? prog.energy().maxCoeff() : 0.0;
    s.obj_scale = cmax > 0 ? 1.0 / cmax : 1.0;
    s.c = prog.energy() * s.obj_scale;
    return s;
}

void row_product(const Scaled& s, const Eigen::VectorXd& z, Eigen::VectorXd& out) {
    out.resize(s.m);
    for (Eigen::Index k = 0; k < s.m; ++k) {
        double acc = 0;
        for (auto e = s.start[k]; e < s.start[k + 1]; ++e) acc += s.vals[e] * z(s.cols[e]);
        out(k) = acc;
    }
}

void transpose_product(const Scaled& s, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
    out.setZero(s.n);
    for (Eigen::Index k = 0; k < s.m; ++k)
        for (auto e = s.start[k]; e < s.start[k + 1]; ++e) out(s.cols[e]) += s.vals[e] * y(k);
}

/// Largest step in (0,1] keeping v + a*dv >= 0 for the listed entries.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = 1;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0) a = std::min(a, -v(i) / dv(i));
    return a;
}

class NewtonSystem {
public:
    NewtonSystem(const Scaled& s, bool dense) : s_(s), dense_(dense) {
        if (dense_) {
            for (Eigen::Index k = 0; k < s.m; ++k)
                (s.start[k + 1] - s.start[k] > kWideRow ? wide_ : narrow_).push_back(k);
            wide_block_.resize(static_cast<Eigen::Index>(wide_.size()), s.n);
        }
    }

    /// Factors diag(d) + A^T diag(w) A.
    bool factor(const Eigen::VectorXd& d, const Eigen::VectorXd& w) {
        double reg = 0;
        for (int attempt = 0; attempt < 6; ++attempt) {
            if (dense_ ? factor_dense(d, w, reg) : factor_sparse(d, w, reg)) return true;
            reg = reg == 0 ? 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff()) : reg * 100;
        }
        return false;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        if (!dense_) return sparse_ldlt_.solve(rhs);
        return use_ldlt_ ? Eigen::VectorXd(dense_ldlt_.solve(rhs)) : Eigen::VectorXd(dense_llt_.solve(rhs));
    }

private:
    bool factor_dense(const Eigen::VectorXd& d, const Eigen::VectorXd& w, double reg) {
        H_.setZero(s_.n, s_.n);
        for (Eigen::Index k : narrow_) {
            const double wk = w(k);
            for (auto e = s_.start[k]; e < s_.start[k + 1]; ++e) {
                const auto i = s_.cols[e];
                const double vi = wk * s_.vals[e];
                for (auto f = s_.start[k]; f < s_.start[k + 1]; ++f) {
                    const auto j = s_.cols[f];
                    if (j <= i) H_(i, j) += vi * s_.vals[f];
                }
            }
        }
        if (!wide_.empty()) {
            wide_block_.setZero();
            for (std::size_t r = 0; r < wide_.size(); ++r) {
                const auto k = wide_[r];
                const double sw = std::sqrt(w(k));
                for (auto e = s_.start[k]; e < s_.start[k + 1]; ++e)
                    wide_block_(static_cast<Eigen::Index>(r), s_.cols[e]) += sw * s_.vals[e];
            }
            H_.selfadjointView<Eigen::Lower>().rankUpdate(wide_block_.transpose());
        }
        H_.diagonal() += d;
        H_.diagonal().array() += reg;
        // blocked Cholesky first; the pivoted LDLT is slower but survives rounding-level indefiniteness
        use_ldlt_ = false;
        dense_llt_.compute(H_);
        if (dense_llt_.info() == Eigen::Success) return true;
        use_ldlt_ = true;
        dense_ldlt_.compute(H_);
        return dense_ldlt_.info() == Eigen::Success && (dense_ldlt_.vectorD().array() > 0).all();
    }

    bool factor_sparse(const Eigen::VectorXd& d, const Eigen::VectorXd& w, double reg) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(s_.n) + 4 * s_.cols.size());
        for (Eigen::Index i = 0; i < s_.n; ++i) trip.emplace_back(i, i, d(i) + reg);
        for (Eigen::Index k = 0; k < s_.m; ++k)
            for (auto e = s_.start[k]; e < s_.start[k + 1]; ++e)
                for (auto f = s_.start[k]; f < s_.start[k + 1]; ++f)
                    if (s_.cols[f] <= s_.cols[e])
                        trip.emplace_back(s_.cols[e], s_.cols[f], w(k) * s_.vals[e] * s_.vals[f]);
        Eigen::SparseMatrix<double> H(s_.n, s_.n);
        H.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed_) {
            sparse_ldlt_.analyzePattern(H);
            analyzed_ = true;
        }
        sparse_ldlt_.factorize(H);
        if (sparse_ldlt_.info() != Eigen::Success) return false;
        return (sparse_ldlt_.vectorD().array() > 0).all();
    }

    const Scaled& s_;
    bool dense_;
    std::vector<Eigen::Index> narrow_, wide_;
    Eigen::MatrixXd wide_block_;
    Eigen::MatrixXd H_;
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> dense_llt_;
    Eigen::LDLT<Eigen::MatrixXd, Eigen::Lower> dense_ldlt_;
    bool use_ldlt_ = false;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> sparse_ldlt_;
    bool analyzed_ = false;
};

}  // namespace

PowerProgram::PowerProgram(Eigen::Index num_vars, double p)
    : lower_(Eigen::VectorXd::Constant(num_vars, -kInf)),
      upper_(Eigen::VectorXd::Constant(num_vars, kInf)),
      energy_(Eigen::VectorXd::Zero(num_vars)),
      p_(p) {
    require(num_vars >= 0, ErrorKind::invalid_parameter, "negative variable count");
    require(p > 1, ErrorKind::invalid_parameter, "power program needs p > 1");
}

void PowerProgram::set_bounds(Eigen::Index i, double lo, double hi) {
    require(lo < hi, ErrorKind::invalid_parameter, "variable bounds must satisfy lower < upper");
    lower_(i) = lo;
    upper_(i) = hi;
}

void PowerProgram::set_energy(Eigen::Index i, double weight) {
    require(weight >= 0, ErrorKind::invalid_parameter, "energy weights must be nonnegative");
    energy_(i) = weight;
}

void PowerProgram::add_row(std::initializer_list<std::pair<Eigen::Index, double>> entries, double b) {
    add_row(std::vector<std::pair<Eigen::Index, double>>(entries), b);
}

void PowerProgram::add_row(const std::vector<std::pair<Eigen::Index, double>>& entries, double b) {
    for (const auto& [i, v] : entries) {
        require(i >= 0 && i < num_vars(), ErrorKind::invalid_parameter, "row references unknown variable");
        if (v == 0) continue;
        cols_.push_back(i);
        vals_.push_back(v);
    }
    row_start_.push_back(static_cast<Eigen::Index>(cols_.size()));
    rhs_.push_back(b);
}

double PowerProgram::objective(const Eigen::VectorXd& z) const {
    double f = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (energy_(i) > 0) f += energy_(i) * std::pow(std::max(z(i), 0.0), p_);
    return f;
}

double PowerProgram::max_row_violation(const Eigen::VectorXd& z) const {
    double worst = 0;
    for (Eigen::Index k = 0; k < num_rows(); ++k) {
        double acc = 0;
        for (auto e = row_start_[k]; e < row_start_[k + 1]; ++e) acc += vals_[e] * z(cols_[e]);
        worst = std::max(worst, rhs_[k] - acc);
    }
    return worst;
}

IpmResult solve_power_program(const PowerProgram& program, const IpmOptions& options) {
    const Scaled s = normalize(program);
    const Eigen::Index n = s.n, m = s.m;
    const double p = s.p;
    for (Eigen::Index i = 0; i < n; ++i)
        require(s.c(i) == 0 || s.lo(i) == 0, ErrorKind::invalid_problem,
                "energy variables must have lower bound 0");

    double fill = 0;
    for (Eigen::Index k = 0; k < m; ++k) {
        const double w = double(s.start[k + 1] - s.start[k]);
        fill += w * w;
    }
    const bool dense = options.dense.value_or(n <= 400 || fill >= 0.1 * double(n) * double(n));

    std::vector<Eigen::Index> lo_idx, hi_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isfinite(s.lo(i))) lo_idx.push_back(i);
        if (std::isfinite(s.hi(i))) hi_idx.push_back(i);
    }
    const auto nl = static_cast<Eigen::Index>(lo_idx.size());
    const auto nu = static_cast<Eigen::Index>(hi_idx.size());

    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool fl = std::isfinite(s.lo(i)), fu = std::isfinite(s.hi(i));
        if (fl && fu) z(i) = 0.5 * (s.lo(i) + s.hi(i));
        else if (fl) z(i) = s.lo(i) + 1;
        else if (fu) z(i) = s.hi(i) - 1;
        else z(i) = 0;
    }
    Eigen::VectorXd Az;
    row_product(s, z, Az);
    Eigen::VectorXd slack = (Az - s.b).cwiseMax(1.0);
    Eigen::VectorXd lam = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd nu_l = Eigen::VectorXd::Ones(nl), nu_u = Eigen::VectorXd::Ones(nu);

    const double bnorm = 1 + (m ? s.b.cwiseAbs().maxCoeff() : 0.0);
    const double count = double(m + nl + nu);

    NewtonSystem system(s, dense);
    IpmResult res;
    res.dense = dense;

    Eigen::VectorXd grad(n), hess(n), ATl(n), rd(n), rp(m), gl(nl), gu(nu);
    auto gaps = [&](const Eigen::VectorXd& zz) {
        for (Eigen::Index k = 0; k < nl; ++k) gl(k) = zz(lo_idx[k]) - s.lo(lo_idx[k]);
        for (Eigen::Index k = 0; k < nu; ++k) gu(k) = s.hi(hi_idx[k]) - zz(hi_idx[k]);
    };

    // the last iterate can lose accuracy once the barrier is tiny; the best one is returned
    struct Best {
        double worst = kInf, primal = 0, dual = 0, comp = 0;
        Eigen::VectorXd z;
    } best;
    int stalled = 0;
    for (int it = 0; it < options.max_iterations; ++it) {
        res.iterations = it;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (s.c(i) > 0) {
                const double zi = std::max(z(i), 1e-300);
                grad(i) = p * s.c(i) * std::pow(zi, p - 1);
                hess(i) = p * (p - 1) * s.c(i) * std::pow(zi, p - 2);
            } else {
                grad(i) = 0;
                hess(i) = 0;
            }
        }
        row_product(s, z, Az);
        transpose_product(s, lam, ATl);
        gaps(z);
        rd = grad - ATl;
        for (Eigen::Index k = 0; k < nl; ++k) rd(lo_idx[k]) -= nu_l(k);
        for (Eigen::Index k = 0; k < nu; ++k) rd(hi_idx[k]) += nu_u(k);
        rp = Az - slack - s.b;

        const double comp = slack.dot(lam) + gl.dot(nu_l) + gu.dot(nu_u);
        const double mu = count > 0 ? comp / count : 0.0;
        double fval = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (s.c(i) > 0) fval += s.c(i) * std::pow(z(i), p);
        // KKT error with bound multipliers recovered from grad - A^T lam; the iterates
        // nu_l, nu_u lag badly on variables that reach a bound with vanishing gradient
        Eigen::VectorXd kkt = grad - ATl;
        double kkt_comp = slack.dot(lam);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (kkt(i) > 0 && std::isfinite(s.lo(i))) {
                kkt_comp += (z(i) - s.lo(i)) * kkt(i);
                kkt(i) = 0;
            } else if (kkt(i) < 0 && std::isfinite(s.hi(i))) {
                kkt_comp -= (s.hi(i) - z(i)) * kkt(i);
                kkt(i) = 0;
            }
        }
        const double dscale = 1 + (n ? grad.cwiseAbs().maxCoeff() : 0.0);
        res.primal_residual = m ? rp.cwiseAbs().maxCoeff() / bnorm : 0.0;
        res.dual_residual = n ? std::min(rd.cwiseAbs().maxCoeff(), kkt.cwiseAbs().maxCoeff()) / dscale : 0.0;
        res.complementarity = (kkt.cwiseAbs().maxCoeff() <= rd.cwiseAbs().maxCoeff() ? kkt_comp : comp) /
                              std::max(1.0, std::abs(fval));
        if (res.primal_residual <= options.tolerance && res.dual_residual <= options.tolerance &&
            res.complementarity <= options.tolerance) {
            res.converged = true;
            break;
        }
        const double worst = std::max({res.primal_residual, res.dual_residual, res.complementarity});
        if (!std::isfinite(worst)) {
            res.status = "numerical breakdown";
            break;
        }
        stalled = worst < 0.9 * best.worst ? 0 : stalled + 1;
        if (worst < best.worst) best = {worst, res.primal_residual, res.dual_residual, res.complementarity, z};
        if (stalled >= 12) {
            res.status = "stalled";
            break;
        }

        Eigen::VectorXd d = hess;
        for (Eigen::Index k = 0; k < nl; ++k) d(lo_idx[k]) += nu_l(k) / gl(k);
        for (Eigen::Index k = 0; k < nu; ++k) d(hi_idx[k]) += nu_u(k) / gu(k);
        const Eigen::VectorXd w = lam.cwiseQuotient(slack);
        if (!system.factor(d, w)) {
            res.status = "newton system factorization failed";
            break;
        }

        struct Direction {
            Eigen::VectorXd dz, ds, dl, dnl, dnu;
        };
        auto direction = [&](const Eigen::VectorXd& cs, const Eigen::VectorXd& cl, const Eigen::VectorXd& cu) {
            Eigen::VectorXd rhs = -rd;
            Eigen::VectorXd t = (cs - lam.cwiseProduct(rp)).cwiseQuotient(slack);
            Eigen::VectorXd At;
            transpose_product(s, t, At);
            rhs += At;
            for (Eigen::Index k = 0; k < nl; ++k) rhs(lo_idx[k]) += cl(k) / gl(k);
            for (Eigen::Index k = 0; k < nu; ++k) rhs(hi_idx[k]) -= cu(k) / gu(k);
            Direction dir;
            dir.dz = system.solve(rhs);
            Eigen::VectorXd Adz;
            row_product(s, dir.dz, Adz);
            dir.ds = Adz + rp;
            dir.dl = (cs - lam.cwiseProduct(dir.ds)).cwiseQuotient(slack);
            dir.dnl.resize(nl);
            dir.dnu.resize(nu);
            for (Eigen::Index k = 0; k < nl; ++k) dir.dnl(k) = (cl(k) - nu_l(k) * dir.dz(lo_idx[k])) / gl(k);
            for (Eigen::Index k = 0; k < nu; ++k) dir.dnu(k) = (cu(k) + nu_u(k) * dir.dz(hi_idx[k])) / gu(k);
            return dir;
        };
        auto step_length = [&](const Direction& dir) {
            Eigen::VectorXd dgl(nl), dgu(nu);
            for (Eigen::Index k = 0; k < nl; ++k) dgl(k) = dir.dz(lo_idx[k]);
            for (Eigen::Index k = 0; k < nu; ++k) dgu(k) = -dir.dz(hi_idx[k]);
            return std::min({max_step(slack, dir.ds), max_step(lam, dir.dl), max_step(gl, dgl),
                             max_step(gu, dgu), max_step(nu_l, dir.dnl), max_step(nu_u, dir.dnu)});
        };

        const Direction aff = direction(-slack.cwiseProduct(lam), -gl.cwiseProduct(nu_l), -gu.cwiseProduct(nu_u));
        const double a_aff = step_length(aff);
        double comp_aff = (slack + a_aff * aff.ds).dot(lam + a_aff * aff.dl);
        for (Eigen::Index k = 0; k < nl; ++k)
            comp_aff += (gl(k) + a_aff * aff.dz(lo_idx[k])) * (nu_l(k) + a_aff * aff.dnl(k));
        for (Eigen::Index k = 0; k < nu; ++k)
            comp_aff += (gu(k) - a_aff * aff.dz(hi_idx[k])) * (nu_u(k) + a_aff * aff.dnu(k));
        const double sigma = std::clamp(std::pow(comp_aff / std::max(comp, 1e-300), 3.0), 0.0, 1.0);
        const double target = sigma * mu;

        Eigen::VectorXd cs = Eigen::VectorXd::Constant(m, target) - slack.cwiseProduct(lam) -
                             aff.ds.cwiseProduct(aff.dl);
        Eigen::VectorXd cl(nl), cu(nu);
        for (Eigen::Index k = 0; k < nl; ++k)
            cl(k) = target - gl(k) * nu_l(k) - aff.dz(lo_idx[k]) * aff.dnl(k);
        for (Eigen::Index k = 0; k < nu; ++k)
            cu(k) = target - gu(k) * nu_u(k) + aff.dz(hi_idx[k]) * aff.dnu(k);
        const Direction dir = direction(cs, cl, cu);
        const double a = std::min(1.0, 0.995 * step_length(dir));

        z += a * dir.dz;
        slack += a * dir.ds;
        lam += a * dir.dl;
        nu_l += a * dir.dnl;
        nu_u += a * dir.dnu;
        res.iterations = it + 1;
    }
    if (!res.converged && res.status.empty()) res.status = "iteration limit reached";
    if (res.converged) {
        res.status = "converged";
    } else if (best.z.size() == n) {
        z = best.z;
        res.primal_residual = best.primal;
        res.dual_residual = best.dual;
        res.complementarity = best.comp;
        if (best.worst <= options.acceptable_tolerance) {
            res.converged = true;
            res.status = "converged to acceptable tolerance (" + res.status + ")";
        }
    }
    res.z = z;
    res.objective = program.objective(z);
    return res;
}

}  // namespace caplab
