#include "l2sep/brute_force.hpp"

#include <algorithm>
#include <cmath>

#include "l2sep/lp.hpp"

namespace l2sep {
namespace {

class Enumerator {
public:
    Enumerator(const MilpInstance& inst, const BruteForceOptions& opts) : inst_(inst), opts_(opts) {
        n_ = inst.num_vars();
        for (int j = 0; j < n_; ++j) {
            if (inst.integer[j]) {
                if (!std::isfinite(inst.lb[j]) || !std::isfinite(inst.ub[j]))
                    throw RefusalError("brute force: integer variable " + std::to_string(j) + " is unbounded");
                ints_.push_back(j);
            } else {
                conts_.push_back(j);
            }
        }
        if (static_cast<int>(ints_.size()) > opts.var_limit)
            throw RefusalError("brute force: " + std::to_string(ints_.size()) + " integer variables exceed the limit of " +
                               std::to_string(opts.var_limit));
        for (int j : conts_)
            if (!std::isfinite(inst.lb[j]) || !std::isfinite(inst.ub[j]))
                throw RefusalError("brute force: continuous variable " + std::to_string(j) + " is unbounded");

        const int m = inst.num_rows();
        act_.assign(m, 0.0);
        rest_min_.assign(ints_.size() + 1, std::vector<double>(m, 0.0));
        rest_max_.assign(ints_.size() + 1, std::vector<double>(m, 0.0));
        std::vector<std::vector<std::pair<int, double>>> col(n_);
        for (int i = 0; i < m; ++i)
            for (std::size_t k = 0; k < inst.rows[i].idx.size(); ++k)
                col[inst.rows[i].idx[k]].emplace_back(i, inst.rows[i].coef[k]);
        cols_ = col;
        // rest_*[d] = activity range contributed by integer vars d.. plus every continuous var
        std::vector<double> lo(m, 0.0), hi(m, 0.0);
        for (int j : conts_)
            for (auto [i, a] : col[j]) {
                lo[i] += std::min(a * inst.lb[j], a * inst.ub[j]);
                hi[i] += std::max(a * inst.lb[j], a * inst.ub[j]);
            }
        obj_rest_.assign(ints_.size() + 1, 0.0);
        for (int j : conts_) obj_rest_[ints_.size()] += std::min(inst.objective[j] * inst.lb[j], inst.objective[j] * inst.ub[j]);
        rest_min_[ints_.size()] = lo;
        rest_max_[ints_.size()] = hi;
        for (int d = static_cast<int>(ints_.size()) - 1; d >= 0; --d) {
            const int j = ints_[d];
            for (auto [i, a] : col[j]) {
                lo[i] += std::min(a * inst.lb[j], a * inst.ub[j]);
                hi[i] += std::max(a * inst.lb[j], a * inst.ub[j]);
            }
            rest_min_[d] = lo;
            rest_max_[d] = hi;
            obj_rest_[d] = obj_rest_[d + 1] + std::min(inst.objective[j] * inst.lb[j], inst.objective[j] * inst.ub[j]);
        }
        x_.assign(n_, 0.0);
    }

    Assignment run() {
        dfs(0, 0.0);
        Assignment a;
        if (best_x_.empty()) return a;
        a.status = Assignment::Status::Optimal;
        a.values = best_x_;
        a.objective = best_;
        return a;
    }

private:
    bool rows_possible(int depth) const {
        const double tol = opts_.tol;
        for (int i = 0; i < inst_.num_rows(); ++i) {
            const auto& r = inst_.rows[i];
            const double lo = act_[i] + rest_min_[depth][i];
            const double hi = act_[i] + rest_max_[depth][i];
            if (r.sense != RowSense::Ge && lo > r.rhs + tol) return false;
            if (r.sense != RowSense::Le && hi < r.rhs - tol) return false;
        }
        return true;
    }

    void dfs(std::size_t depth, double obj) {
        if (++nodes_ > opts_.node_limit) throw RefusalError("brute force: node budget exhausted");
        if (obj + obj_rest_[depth] >= best_ - 1e-9) return;
        if (!rows_possible(static_cast<int>(depth))) return;
        if (depth == ints_.size()) {
            leaf(obj);
            return;
        }
        const int j = ints_[depth];
        const double lb = std::ceil(inst_.lb[j] - opts_.tol), ub = std::floor(inst_.ub[j] + opts_.tol);
        // try the objective-preferred end first so good incumbents appear early
        const bool down = inst_.objective[j] >= 0;
        for (double k = 0; k <= ub - lb; k += 1.0) {
            const double v = down ? lb + k : ub - k;
            x_[j] = v;
            for (auto [i, a] : cols_[j]) act_[i] += a * v;
            dfs(depth + 1, obj + inst_.objective[j] * v);
            for (auto [i, a] : cols_[j]) act_[i] -= a * v;
        }
        x_[j] = 0.0;
    }

    void leaf(double obj) {
        if (conts_.empty()) {
            if (obj < best_) {
                best_ = obj;
                best_x_ = x_;
            }
            return;
        }
        LpProblem p;
        for (int j : conts_) {
            p.objective.push_back(inst_.objective[j]);
            p.col_lb.push_back(inst_.lb[j]);
            p.col_ub.push_back(inst_.ub[j]);
        }
        std::vector<int> local(n_, -1);
        for (std::size_t k = 0; k < conts_.size(); ++k) local[conts_[k]] = static_cast<int>(k);
        for (int i = 0; i < inst_.num_rows(); ++i) {
            const auto& r = inst_.rows[i];
            SparseRow q;
            q.sense = r.sense;
            q.rhs = r.rhs - act_[i];
            for (std::size_t k = 0; k < r.idx.size(); ++k)
                if (local[r.idx[k]] >= 0) {
                    q.idx.push_back(local[r.idx[k]]);
                    q.coef.push_back(r.coef[k]);
                }
            p.rows.push_back(std::move(q));
        }
        p.num_base_rows = p.num_rows();
        const auto sol = solve_lp(p);
        if (sol.status != LpStatus::Optimal) return;
        if (obj + sol.objective < best_) {
            best_ = obj + sol.objective;
            best_x_ = x_;
            for (std::size_t k = 0; k < conts_.size(); ++k) best_x_[conts_[k]] = sol.x[k];
        }
    }

    const MilpInstance& inst_;
    BruteForceOptions opts_;
    int n_ = 0;
    std::vector<int> ints_, conts_;
    std::vector<std::vector<std::pair<int, double>>> cols_;
    std::vector<double> act_;
    std::vector<std::vector<double>> rest_min_, rest_max_;
    std::vector<double> obj_rest_;
    std::vector<double> x_, best_x_;
    double best_ = kInf;
    long nodes_ = 0;
};

}  // namespace

Assignment brute_force_opt(const MilpInstance& inst, const BruteForceOptions& opts) {
    return Enumerator(inst, opts).run();
}

Assignment brute_force_opt(const MilpInstance& inst, int var_limit) {
    BruteForceOptions o;
    o.var_limit = var_limit;
    return brute_force_opt(inst, o);
}

double brute_force_max(const MilpInstance& inst, const std::vector<double>& w, const BruteForceOptions& opts) {
    MilpInstance q = inst;
    for (int j = 0; j < q.num_vars(); ++j) q.objective[j] = j < static_cast<int>(w.size()) ? -w[j] : 0.0;
    const auto a = brute_force_opt(q, opts);
    if (a.status != Assignment::Status::Optimal) return -kInf;
    return -a.objective;
}

}  // namespace l2sep
