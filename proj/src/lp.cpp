#include "l2sep/lp.hpp"

#include <algorithm>
#include <cmath>

namespace l2sep {

const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        case LpStatus::IterationLimit: return "iteration_limit";
    }
    return "?";
}

LpProblem LpProblem::from_instance(const MilpInstance& inst) {
    LpProblem p;
    p.objective = inst.objective;
    p.col_lb = inst.lb;
    p.col_ub = inst.ub;
    p.rows = inst.rows;
    p.num_base_rows = inst.num_rows();
    return p;
}

DualSimplex::DualSimplex(LpProblem problem, LpOptions opts) : prob_(std::move(problem)), opts_(opts) {
    n_ = prob_.num_cols();
    m_ = prob_.num_rows();
    for (int j = 0; j < n_; ++j)
        if (!std::isfinite(prob_.col_lb[j]) || !std::isfinite(prob_.col_ub[j]))
            throw ValidationError("DualSimplex: column " + std::to_string(j) + " has an infinite bound");
    lo_.assign(n_ + m_, 0.0);
    hi_.assign(n_ + m_, 0.0);
    cost_.assign(n_ + m_, 0.0);
    for (int j = 0; j < n_; ++j) {
        lo_[j] = prob_.col_lb[j];
        hi_[j] = prob_.col_ub[j];
        cost_[j] = prob_.objective[j];
        if (lo_[j] > hi_[j] + opts_.feas_tol) infeasible_bounds_ = true;
    }
    compute_logical_bounds(0);
    build_columns();
    reset_basis();
}

void DualSimplex::build_columns() {
    cols_.assign(n_, {});
    for (int i = 0; i < m_; ++i) {
        const auto& r = prob_.rows[i];
        for (std::size_t k = 0; k < r.idx.size(); ++k)
            if (std::abs(r.coef[k]) > opts_.drop_tol) cols_[r.idx[k]].emplace_back(i, r.coef[k]);
    }
}

void DualSimplex::compute_logical_bounds(int first_row) {
    for (int i = first_row; i < m_; ++i) {
        const auto& r = prob_.rows[i];
        double mn = 0.0, mx = 0.0;
        for (std::size_t k = 0; k < r.idx.size(); ++k) {
            const double a = r.coef[k];
            const int j = r.idx[k];
            mn += a > 0 ? a * prob_.col_lb[j] : a * prob_.col_ub[j];
            mx += a > 0 ? a * prob_.col_ub[j] : a * prob_.col_lb[j];
        }
        double lo = mn, hi = mx;
        if (r.sense != RowSense::Le) lo = std::max(lo, r.rhs);
        if (r.sense != RowSense::Ge) hi = std::min(hi, r.rhs);
        if (lo > hi) {
            if (lo > hi + opts_.feas_tol * std::max(1.0, std::abs(hi)))
                infeasible_bounds_ = true;
            else
                lo = hi;
        }
        lo_[n_ + i] = lo;
        hi_[n_ + i] = hi;
    }
}

void DualSimplex::set_col_bounds(int j, double lb, double ub) {
    lo_[j] = lb;
    hi_[j] = ub;
    if (lb > ub + opts_.feas_tol) infeasible_bounds_ = true;
}

void DualSimplex::set_col_bounds(const std::vector<double>& lb, const std::vector<double>& ub) {
    infeasible_bounds_ = false;
    for (int j = 0; j < n_; ++j) set_col_bounds(j, lb[j], ub[j]);
    for (int i = 0; i < m_; ++i)
        if (lo_[n_ + i] > hi_[n_ + i] + opts_.feas_tol) infeasible_bounds_ = true;
}

void DualSimplex::add_rows(const std::vector<SparseRow>& rows) {
    if (rows.empty()) return;
    const int first = m_;
    for (const auto& r : rows) prob_.rows.push_back(r);
    m_ = prob_.num_rows();
    lo_.resize(n_ + m_, 0.0);
    hi_.resize(n_ + m_, 0.0);
    cost_.resize(n_ + m_, 0.0);
    status_.resize(n_ + m_, BasisStatus::Basic);
    x_.resize(n_ + m_, 0.0);
    compute_logical_bounds(first);
    build_columns();
    head_.clear();
    pos_.assign(n_ + m_, -1);
    for (int v = 0; v < n_ + m_; ++v)
        if (status_[v] == BasisStatus::Basic) {
            pos_[v] = static_cast<int>(head_.size());
            head_.push_back(v);
        }
    factored_ = false;
}

void DualSimplex::remove_rows(std::vector<int> rows) {
    if (rows.empty()) return;
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    bool all_basic = true;
    for (int i : rows) all_basic = all_basic && status_[n_ + i] == BasisStatus::Basic;
    std::vector<char> drop(m_, 0);
    for (int i : rows) drop[i] = 1;
    std::vector<SparseRow> kept;
    std::vector<double> lo(lo_.begin(), lo_.begin() + n_), hi(hi_.begin(), hi_.begin() + n_);
    std::vector<double> cost(cost_.begin(), cost_.begin() + n_);
    std::vector<BasisStatus> st(status_.begin(), status_.begin() + n_);
    std::vector<double> x(x_.begin(), x_.begin() + n_);
    int base_removed = 0;
    for (int i = 0; i < m_; ++i) {
        if (drop[i]) {
            if (i < prob_.num_base_rows) ++base_removed;
            continue;
        }
        kept.push_back(std::move(prob_.rows[i]));
        lo.push_back(lo_[n_ + i]);
        hi.push_back(hi_[n_ + i]);
        cost.push_back(0.0);
        st.push_back(status_[n_ + i]);
        x.push_back(x_[n_ + i]);
    }
    prob_.rows = std::move(kept);
    prob_.num_base_rows -= base_removed;
    m_ = prob_.num_rows();
    lo_ = std::move(lo);
    hi_ = std::move(hi);
    cost_ = std::move(cost);
    status_ = std::move(st);
    x_ = std::move(x);
    build_columns();
    if (!all_basic) {
        reset_basis();
        return;
    }
    head_.clear();
    pos_.assign(n_ + m_, -1);
    for (int v = 0; v < n_ + m_; ++v)
        if (status_[v] == BasisStatus::Basic) {
            pos_[v] = static_cast<int>(head_.size());
            head_.push_back(v);
        }
    factored_ = false;
}

void DualSimplex::reset_basis() {
    status_.assign(n_ + m_, BasisStatus::Basic);
    for (int j = 0; j < n_; ++j) status_[j] = cost_[j] >= 0.0 ? BasisStatus::Lower : BasisStatus::Upper;
    head_.resize(m_);
    pos_.assign(n_ + m_, -1);
    for (int i = 0; i < m_; ++i) {
        head_[i] = n_ + i;
        pos_[n_ + i] = i;
    }
    x_.assign(n_ + m_, 0.0);
    binv_ = -Eigen::MatrixXd::Identity(m_, m_);
    factored_ = true;
    since_refactor_ = 0;
}

bool DualSimplex::set_basis(const Basis& b) {
    if (static_cast<int>(b.cols.size()) != n_ || static_cast<int>(b.rows.size()) != m_) {
        reset_basis();
        return false;
    }
    int basics = 0;
    for (auto s : b.cols) basics += s == BasisStatus::Basic;
    for (auto s : b.rows) basics += s == BasisStatus::Basic;
    if (basics != m_) {
        reset_basis();
        return false;
    }
    for (int j = 0; j < n_; ++j) status_[j] = b.cols[j] == BasisStatus::Zero ? BasisStatus::Lower : b.cols[j];
    for (int i = 0; i < m_; ++i) status_[n_ + i] = b.rows[i] == BasisStatus::Zero ? BasisStatus::Lower : b.rows[i];
    head_.clear();
    pos_.assign(n_ + m_, -1);
    for (int v = 0; v < n_ + m_; ++v)
        if (status_[v] == BasisStatus::Basic) {
            pos_[v] = static_cast<int>(head_.size());
            head_.push_back(v);
        }
    if (!refactor()) {
        reset_basis();
        return false;
    }
    return true;
}

Basis DualSimplex::basis() const {
    Basis b;
    b.cols.assign(status_.begin(), status_.begin() + n_);
    b.rows.assign(status_.begin() + n_, status_.end());
    return b;
}

bool DualSimplex::refactor() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int p = 0; p < m_; ++p) {
        const int v = head_[p];
        if (v < n_) {
            for (const auto& [i, a] : cols_[v]) B(i, p) = a;
        } else {
            B(v - n_, p) = -1.0;
        }
    }
    since_refactor_ = 0;
    if (m_ == 0) {
        binv_.resize(0, 0);
        factored_ = true;
        return true;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    const auto& u = lu.matrixLU();
    double umax = 0.0, umin = kInf;
    for (int k = 0; k < m_; ++k) {
        umax = std::max(umax, std::abs(u(k, k)));
        umin = std::min(umin, std::abs(u(k, k)));
    }
    if (!(umin > 1e-11 * std::max(1.0, umax))) return false;
    binv_ = lu.inverse();
    factored_ = true;
    return true;
}

double DualSimplex::nonbasic_value(int j) const {
    switch (status_[j]) {
        case BasisStatus::Upper: return hi_[j];
        case BasisStatus::Zero: return 0.0;
        default: return lo_[j];
    }
}

double DualSimplex::col_dot(const Eigen::VectorXd& v, int j) const {
    if (j >= n_) return -v[j - n_];
    double s = 0.0;
    for (const auto& [i, a] : cols_[j]) s += v[i] * a;
    return s;
}

void DualSimplex::col_axpy(double a, int j, Eigen::VectorXd& out) const {
    if (j >= n_) {
        out[j - n_] -= a;
        return;
    }
    for (const auto& [i, c] : cols_[j]) out[i] += a * c;
}

void DualSimplex::compute_primal() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int v = 0; v < n_ + m_; ++v) {
        if (status_[v] == BasisStatus::Basic) continue;
        x_[v] = nonbasic_value(v);
        if (x_[v] != 0.0) col_axpy(x_[v], v, rhs);
    }
    const Eigen::VectorXd xb = -(binv_ * rhs);
    for (int p = 0; p < m_; ++p) x_[head_[p]] = xb[p];
}

void DualSimplex::compute_duals() {
    Eigen::VectorXd cb(m_);
    for (int p = 0; p < m_; ++p) cb[p] = cost_[head_[p]];
    y_ = binv_.transpose() * cb;
    d_.assign(n_ + m_, 0.0);
    for (int v = 0; v < n_ + m_; ++v)
        if (status_[v] != BasisStatus::Basic) d_[v] = cost_[v] - col_dot(y_, v);
}

LpSolution DualSimplex::solve() {
    LpSolution sol;
    if (infeasible_bounds_) {
        sol.status = LpStatus::Infeasible;
        sol.basis = basis();
        return sol;
    }
    if (!factored_ && !refactor()) {
        reset_basis();
    }
    long pivots = 0;
    int degenerate = 0;
    bool bland = false;
    int mismatch_retries = 0;
    Eigen::VectorXd alpha(m_);

    while (true) {
        compute_duals();
        for (int v = 0; v < n_ + m_; ++v) {
            if (status_[v] == BasisStatus::Basic || lo_[v] == hi_[v]) continue;
            if (status_[v] == BasisStatus::Lower && d_[v] < -opts_.opt_tol) status_[v] = BasisStatus::Upper;
            else if (status_[v] == BasisStatus::Upper && d_[v] > opts_.opt_tol) status_[v] = BasisStatus::Lower;
        }
        compute_primal();

        int r = -1;
        double worst = 0.0;
        for (int p = 0; p < m_; ++p) {
            const int v = head_[p];
            const double tol = opts_.feas_tol;
            double inf = 0.0;
            if (x_[v] < lo_[v] - tol) inf = lo_[v] - x_[v];
            else if (x_[v] > hi_[v] + tol) inf = x_[v] - hi_[v];
            if (inf <= 0.0) continue;
            if (bland) {
                if (r < 0 || v < head_[r]) r = p;
            } else if (inf > worst) {
                worst = inf;
                r = p;
            }
        }
        if (r < 0) {
            sol.status = LpStatus::Optimal;
            break;
        }
        if (pivots >= opts_.max_pivots) {
            sol.status = LpStatus::IterationLimit;
            break;
        }
        const int leaving = head_[r];
        const bool to_lower = x_[leaving] < lo_[leaving];
        const Eigen::VectorXd rho = binv_.row(r).transpose();

        // Harris two-pass ratio test over eligible nonbasic columns.
        struct Cand {
            int v;
            double a;
            double dj;
        };
        std::vector<Cand> cands;
        double tmax = kInf;
        for (int v = 0; v < n_ + m_; ++v) {
            if (status_[v] == BasisStatus::Basic || lo_[v] == hi_[v]) continue;
            const double a = col_dot(rho, v);
            if (std::abs(a) < opts_.pivot_tol) continue;
            const bool at_lower = status_[v] != BasisStatus::Upper;
            const bool eligible = to_lower ? (at_lower ? a < 0 : a > 0) : (at_lower ? a > 0 : a < 0);
            if (!eligible) continue;
            const double dj = at_lower ? std::max(0.0, d_[v]) : std::max(0.0, -d_[v]);
            cands.push_back({v, a, dj});
            tmax = std::min(tmax, (dj + opts_.opt_tol) / std::abs(a));
        }
        if (cands.empty()) {
            sol.status = LpStatus::Infeasible;
            break;
        }
        int q = -1;
        double qa = 0.0, qratio = 0.0;
        if (bland) {
            double best = kInf;
            for (const auto& c : cands) {
                const double ratio = c.dj / std::abs(c.a);
                if (ratio < best - 1e-12 || (ratio <= best + 1e-12 && c.v < q)) {
                    best = std::min(best, ratio);
                    q = c.v;
                    qa = c.a;
                    qratio = ratio;
                }
            }
        } else {
            for (const auto& c : cands) {
                const double ratio = c.dj / std::abs(c.a);
                if (ratio <= tmax && std::abs(c.a) > std::abs(qa)) {
                    q = c.v;
                    qa = c.a;
                    qratio = ratio;
                }
            }
        }

        alpha.setZero(m_);
        if (q >= n_) {
            alpha = -binv_.col(q - n_);
        } else {
            for (const auto& [i, a] : cols_[q]) alpha += a * binv_.col(i);
        }
        if (std::abs(alpha[r] - qa) > 1e-6 * (1.0 + std::abs(qa)) && mismatch_retries < 3) {
            ++mismatch_retries;
            if (!refactor()) reset_basis();
            continue;
        }
        mismatch_retries = 0;
        const double piv = alpha[r];

        if (qratio < 1e-12) {
            if (++degenerate >= opts_.degenerate_before_bland) bland = true;
        } else {
            degenerate = 0;
            bland = false;
        }

        status_[leaving] = to_lower ? BasisStatus::Lower : BasisStatus::Upper;
        pos_[leaving] = -1;
        binv_.row(r) /= piv;
        for (int i = 0; i < m_; ++i)
            if (i != r && alpha[i] != 0.0) binv_.row(i) -= alpha[i] * binv_.row(r);
        head_[r] = q;
        pos_[q] = r;
        status_[q] = BasisStatus::Basic;
        ++pivots;
        ++total_pivots_;
        if (++since_refactor_ >= opts_.refactor_every && !refactor()) reset_basis();
    }

    sol.pivot_count = pivots;
    sol.basis = basis();
    sol.x.assign(x_.begin(), x_.begin() + n_);
    sol.row_activity.assign(x_.begin() + n_, x_.end());
    sol.duals.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) sol.duals[i] = y_.size() == m_ ? y_[i] : 0.0;
    sol.reduced_costs.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) sol.reduced_costs[j] = status_[j] == BasisStatus::Basic ? 0.0 : d_[j];
    if (sol.status == LpStatus::Optimal) {
        double z = 0.0;
        for (int j = 0; j < n_; ++j) z += cost_[j] * x_[j];
        sol.objective = z;
    } else {
        sol.objective = sol.status == LpStatus::Infeasible ? kInf : sol.objective;
    }
    return sol;
}

std::vector<double> DualSimplex::tableau_row(int var) const {
    if (var < 0 || var >= n_ + m_ || status_[var] != BasisStatus::Basic)
        throw ValidationError("tableau_row: variable " + std::to_string(var) + " is not basic");
    const Eigen::VectorXd rho = binv_.row(pos_[var]).transpose();
    std::vector<double> t(n_ + m_, 0.0);
    for (int v = 0; v < n_ + m_; ++v) {
        if (status_[v] == BasisStatus::Basic) continue;
        const double a = -col_dot(rho, v);
        t[v] = std::abs(a) > opts_.drop_tol ? a : 0.0;
    }
    return t;
}

LpSolution solve_lp(const LpProblem& p, const LpOptions& opts) {
    DualSimplex s(p, opts);
    return s.solve();
}

LpSolution resolve_with_rows(const LpProblem& p, const std::vector<SparseRow>& new_rows, const Basis& warm_basis,
                             const LpOptions& opts) {
    DualSimplex s(p, opts);
    s.set_basis(warm_basis);
    s.add_rows(new_rows);
    return s.solve();
}

std::vector<double> tableau_row(const LpProblem& p, const LpSolution& sol, int basic_var_index) {
    DualSimplex s(p);
    if (!s.set_basis(sol.basis)) throw ValidationError("tableau_row: basis does not match the problem");
    return s.tableau_row(basic_var_index);
}

}  // namespace l2sep
