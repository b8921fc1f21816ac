#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "l2sep/instance.hpp"

namespace l2sep {

/// LP relaxation data: instance rows plus dynamically appended cut rows.
struct LpProblem {
    std::vector<double> objective;
    std::vector<double> col_lb;
    std::vector<double> col_ub;
    std::vector<SparseRow> rows;
    int num_base_rows = 0;

    static LpProblem from_instance(const MilpInstance& inst);
    int num_cols() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }
    void append_row(SparseRow r) { rows.push_back(std::move(r)); }
};

enum class LpStatus : std::uint8_t { Optimal, Infeasible, Unbounded, IterationLimit };
enum class BasisStatus : std::uint8_t { Lower, Basic, Upper, Zero };

const char* to_string(LpStatus s);

struct Basis {
    std::vector<BasisStatus> cols;
    std::vector<BasisStatus> rows;  // status of each row's logical (r_i = a_i x)
    bool empty() const { return cols.empty() && rows.empty(); }
};

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> x;
    double objective = kInf;
    std::vector<double> duals;           // one per row
    std::vector<double> reduced_costs;   // one per column
    std::vector<double> row_activity;    // a_i x
    Basis basis;
    long pivot_count = 0;
};

struct LpOptions {
    long max_pivots = 50000;
    double feas_tol = 1e-7;
    double opt_tol = 1e-7;
    double drop_tol = 1e-12;
    double pivot_tol = 1e-9;
    int refactor_every = 100;
    int degenerate_before_bland = 100;
};

/// Bounded-variable dual simplex on the computational form  A x - r = 0,
/// col_lb <= x <= col_ub, row_lo <= r <= row_hi.
///
/// Every variable is boxed: structurals by assumption (finite bound box) and
/// logicals by the activity range implied by the structural box at the time the
/// row is added. Any basis can therefore be made dual feasible by bound flips,
/// so the dual simplex handles both cold starts (slack basis) and warm starts
/// after row additions or bound changes.
class DualSimplex {
public:
    explicit DualSimplex(LpProblem problem, LpOptions opts = {});

    const LpProblem& problem() const { return prob_; }
    const LpOptions& options() const { return opts_; }
    int num_cols() const { return n_; }
    int num_rows() const { return m_; }

    /// Working (node-local) structural bounds. The LpProblem keeps the global ones.
    void set_col_bounds(int j, double lb, double ub);
    void set_col_bounds(const std::vector<double>& lb, const std::vector<double>& ub);
    double col_lb(int j) const { return lo_[j]; }
    double col_ub(int j) const { return hi_[j]; }
    /// Logical bounds (valid for every point of the global structural box).
    double row_lo(int i) const { return lo_[n_ + i]; }
    double row_hi(int i) const { return hi_[n_ + i]; }

    /// Appends rows; their logicals enter the basis.
    void add_rows(const std::vector<SparseRow>& rows);
    /// Removes rows. If any removed logical is nonbasic the basis is reset to slack.
    void remove_rows(std::vector<int> rows);

    /// Installs a warm-start basis; falls back to the slack basis if it is malformed or singular.
    bool set_basis(const Basis& b);
    void reset_basis();
    Basis basis() const;

    LpSolution solve();

    /// Coefficients t with x_basic = sum_j t_j v_j over nonbasic variables v (structurals then logicals).
    /// Entries of basic variables are 0. Throws if `var` is not basic.
    std::vector<double> tableau_row(int var) const;
    bool is_basic(int var) const { return status_[var] == BasisStatus::Basic; }
    /// Current value of variable `var` (structural or logical) after solve().
    double value(int var) const { return x_[var]; }

    long total_pivots() const { return total_pivots_; }

private:
    void build_columns();
    void compute_logical_bounds(int first_row);
    bool refactor();
    void compute_primal();
    void compute_duals();
    double nonbasic_value(int j) const;
    double col_dot(const Eigen::VectorXd& v, int j) const;  // v . column_j
    void col_axpy(double a, int j, Eigen::VectorXd& out) const;

    LpProblem prob_;
    LpOptions opts_;
    int n_ = 0;
    int m_ = 0;
    std::vector<std::vector<std::pair<int, double>>> cols_;  // structural columns (row, coef)
    std::vector<double> lo_, hi_, cost_;
    std::vector<BasisStatus> status_;
    std::vector<int> head_;   // basis position -> variable
    std::vector<int> pos_;    // variable -> basis position or -1
    Eigen::MatrixXd binv_;
    std::vector<double> x_;
    Eigen::VectorXd y_;
    std::vector<double> d_;
    bool infeasible_bounds_ = false;
    bool factored_ = false;
    int since_refactor_ = 0;
    long total_pivots_ = 0;
};

LpSolution solve_lp(const LpProblem& p, const LpOptions& opts = {});
/// Appends `new_rows` to a copy of `p` and resolves from `warm_basis` (a basis of `p`).
LpSolution resolve_with_rows(const LpProblem& p, const std::vector<SparseRow>& new_rows, const Basis& warm_basis,
                             const LpOptions& opts = {});
/// Tableau row of a basic variable (index in [0, n + m)) for the basis stored in `sol`.
std::vector<double> tableau_row(const LpProblem& p, const LpSolution& sol, int basic_var_index);

}  // namespace l2sep
