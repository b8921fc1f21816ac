#include "l2sep/separators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "l2sep/brute_force.hpp"

namespace l2sep {

const char* to_string(SeparatorId id) {
    switch (id) {
        case SeparatorId::GomoryFractional: return "gomory_fractional";
        case SeparatorId::GomoryMir: return "gomory_mir";
        case SeparatorId::CmirAggregation: return "cmir_aggregation";
        case SeparatorId::KnapsackCover: return "knapsack_cover";
        case SeparatorId::Clique: return "clique";
        case SeparatorId::OddCycle: return "oddcycle";
        case SeparatorId::ZeroHalf: return "zerohalf";
        case SeparatorId::ImpliedBounds: return "impliedbounds";
    }
    return "?";
}

SeparatorId separator_from_string(const std::string& s) {
    for (auto id : kAllSeparators)
        if (s == to_string(id)) return id;
    throw ConfigError("unknown separator '" + s + "'");
}

int SeparatorConfig::count() const { return std::popcount(bits); }

std::string SeparatorConfig::to_string() const {
    std::string s(kNumSeparators, '0');
    for (int k = 0; k < kNumSeparators; ++k)
        if ((bits >> k) & 1u) s[k] = '1';
    return s;
}

SeparatorConfig SeparatorConfig::from_string(const std::string& s) {
    if (s.size() != kNumSeparators) throw ConfigError("separator config '" + s + "' must have 8 characters");
    SeparatorConfig c;
    for (int k = 0; k < kNumSeparators; ++k) {
        if (s[k] != '0' && s[k] != '1') throw ConfigError("separator config '" + s + "' must contain only 0/1");
        if (s[k] == '1') c.bits |= static_cast<std::uint8_t>(1u << k);
    }
    return c;
}

int hamming(SeparatorConfig a, SeparatorConfig b) { return std::popcount(static_cast<unsigned>(a.bits ^ b.bits)); }

double Cut::norm() const {
    double s = 0.0;
    for (double v : coef) s += v * v;
    return std::sqrt(s);
}

double Cut::activity(const std::vector<double>& x) const {
    double a = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) a += coef[k] * x[idx[k]];
    return a;
}

SparseRow Cut::to_row() const { return SparseRow{idx, coef, RowSense::Le, rhs}; }

double cut_efficacy(const Cut& cut, const std::vector<double>& x) {
    const double nrm = cut.norm();
    if (nrm <= 0.0) return 0.0;
    return (cut.activity(x) - cut.rhs) / nrm;
}

double cut_parallelism(const Cut& a, const Cut& b) {
    const double na = a.norm(), nb = b.norm();
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    double dot = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.idx.size() && j < b.idx.size()) {
        if (a.idx[i] == b.idx[j]) dot += a.coef[i++] * b.coef[j++];
        else if (a.idx[i] < b.idx[j]) ++i;
        else ++j;
    }
    return std::abs(dot) / (na * nb);
}

void score_cut(Cut& cut, const std::vector<double>& x, const std::vector<double>& objective) {
    cut.efficacy = cut_efficacy(cut, x);
    double cn = 0.0, dot = 0.0;
    for (double c : objective) cn += c * c;
    for (std::size_t k = 0; k < cut.idx.size(); ++k) dot += cut.coef[k] * objective[cut.idx[k]];
    const double nn = cut.norm();
    cut.obj_parallelism = (cn > 0.0 && nn > 0.0) ? dot / (std::sqrt(cn) * nn) : 0.0;
    cut.score = cut.efficacy + 0.1 * cut.obj_parallelism;
}

bool CutPool::add(Cut cut) {
    for (const auto& c : cuts) {
        if (c.idx != cut.idx || std::abs(c.rhs - cut.rhs) > 1e-9 * (1.0 + std::abs(c.rhs))) continue;
        bool same = true;
        for (std::size_t k = 0; k < c.coef.size() && same; ++k)
            same = std::abs(c.coef[k] - cut.coef[k]) <= 1e-9 * (1.0 + std::abs(c.coef[k]));
        if (same) return false;
    }
    cuts.push_back(std::move(cut));
    return true;
}

long CutPool::generated_count(SeparatorId id) const {
    return std::count_if(cuts.begin(), cuts.end(), [&](const Cut& c) { return c.origin == id; });
}

long CutPool::applied_count(SeparatorId id) const {
    return std::count_if(cuts.begin(), cuts.end(), [&](const Cut& c) { return c.origin == id && c.applied; });
}

void CutPool::age_and_purge(int max_age) {
    for (auto& c : cuts)
        if (!c.applied) ++c.age;
    std::erase_if(cuts, [&](const Cut& c) { return !c.applied && c.age > max_age; });
}

std::vector<Cut> select_cuts(CutPool& pool, const std::vector<double>& x, const std::vector<double>& objective,
                             int max_cuts, double parallelism_thresh, double min_efficacy) {
    std::vector<std::size_t> cand;
    for (std::size_t k = 0; k < pool.cuts.size(); ++k) {
        auto& c = pool.cuts[k];
        if (c.applied) continue;
        score_cut(c, x, objective);
        if (c.efficacy > min_efficacy) cand.push_back(k);
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return pool.cuts[a].score > pool.cuts[b].score; });
    std::vector<std::size_t> chosen;
    for (std::size_t k : cand) {
        if (static_cast<int>(chosen.size()) >= max_cuts) break;
        bool ok = true;
        for (std::size_t s : chosen)
            if (cut_parallelism(pool.cuts[k], pool.cuts[s]) > parallelism_thresh) {
                ok = false;
                break;
            }
        if (ok) chosen.push_back(k);
    }
    std::vector<Cut> out;
    for (std::size_t k : chosen) {
        pool.cuts[k].applied = true;
        out.push_back(pool.cuts[k]);
    }
    return out;
}

bool clean_cut(Cut& cut, const MilpInstance& inst, const SeparatorParams& params) {
    std::map<int, double> merged;
    for (std::size_t k = 0; k < cut.idx.size(); ++k) merged[cut.idx[k]] += cut.coef[k];
    cut.idx.clear();
    cut.coef.clear();
    double amax = 0.0, amin = kInf;
    for (auto [j, a] : merged) {
        if (!std::isfinite(a)) return false;
        if (std::abs(a) < params.drop_tol) {
            // a x_j >= min over the box, so dropping it and lowering rhs by that min stays valid
            const double lo = std::min(a * inst.lb[j], a * inst.ub[j]);
            if (!std::isfinite(lo)) return false;
            cut.rhs -= lo;
            continue;
        }
        cut.idx.push_back(j);
        cut.coef.push_back(a);
        amax = std::max(amax, std::abs(a));
        amin = std::min(amin, std::abs(a));
    }
    if (cut.idx.empty() || !std::isfinite(cut.rhs)) return false;
    if (amax / amin > params.max_dynamism) return false;
    return true;
}

bool validate_cut(const Cut& cut, const MilpInstance& inst, int var_limit, double tol) {
    std::vector<double> w(inst.num_vars(), 0.0);
    for (std::size_t k = 0; k < cut.idx.size(); ++k) w[cut.idx[k]] += cut.coef[k];
    BruteForceOptions o;
    o.var_limit = var_limit;
    const double mx = brute_force_max(inst, w, o);
    return mx <= cut.rhs + tol * std::max(1.0, std::abs(cut.rhs));
}

bool ConflictGraph::has_edge(int i, int j) const {
    return std::binary_search(adj[i].begin(), adj[i].end(), j);
}

namespace {

bool is_binary(const MilpInstance& inst, int j) {
    return inst.integer[j] && inst.lb[j] == 0.0 && inst.ub[j] == 1.0;
}

bool near_int(double v, double tol = 1e-9) { return std::abs(v - std::round(v)) <= tol; }

/// A row in <= form over structural variables.
struct LeRow {
    std::vector<int> idx;
    std::vector<double> coef;
    double rhs = 0.0;
};

std::vector<LeRow> le_forms(const SparseRow& r) {
    std::vector<LeRow> out;
    if (r.sense != RowSense::Ge) out.push_back({r.idx, r.coef, r.rhs});
    if (r.sense != RowSense::Le) {
        LeRow n{r.idx, r.coef, -r.rhs};
        for (auto& v : n.coef) v = -v;
        out.push_back(std::move(n));
    }
    return out;
}

/// Uniform view over structural (v < n) and logical (v >= n) variables.
class VarView {
public:
    explicit VarView(const SepContext& ctx) : ctx_(ctx), n_(ctx.inst.num_vars()), m_(ctx.lp.num_rows()) {
        row_int_.assign(m_, 0);
        for (int i = 0; i < m_; ++i) {
            const auto& r = ctx.lp.problem().rows[i];
            bool ok = true;
            for (std::size_t k = 0; k < r.idx.size() && ok; ++k) ok = ctx.inst.integer[r.idx[k]] && near_int(r.coef[k]);
            row_int_[i] = ok;
        }
    }
    int n() const { return n_; }
    int m() const { return m_; }
    double lb(int v) const { return v < n_ ? ctx_.inst.lb[v] : ctx_.lp.row_lo(v - n_); }
    double ub(int v) const { return v < n_ ? ctx_.inst.ub[v] : ctx_.lp.row_hi(v - n_); }
    double value(int v) const { return v < n_ ? ctx_.sol.x[v] : ctx_.sol.row_activity[v - n_]; }
    bool is_int(int v) const { return v < n_ ? static_cast<bool>(ctx_.inst.integer[v]) : row_int_[v - n_]; }
    const SparseRow& row(int i) const { return ctx_.lp.problem().rows[i]; }

private:
    const SepContext& ctx_;
    int n_, m_;
    std::vector<char> row_int_;
};

/// Finishes a cut given over structural + logical variables: substitutes logicals,
/// cleans and scores. Returns false if the cut should be discarded.
bool finish_cut(const SepContext& ctx, const VarView& vv, const std::map<int, double>& coefs, double rhs,
                SeparatorId origin, Cut& out, long& work) {
    std::map<int, double> s;
    for (auto [v, g] : coefs) {
        if (v < vv.n()) {
            s[v] += g;
        } else {
            const auto& r = vv.row(v - vv.n());
            work += static_cast<long>(r.idx.size());
            for (std::size_t k = 0; k < r.idx.size(); ++k) s[r.idx[k]] += g * r.coef[k];
        }
    }
    out = Cut{};
    out.origin = origin;
    out.rhs = rhs;
    for (auto [j, a] : s) {
        out.idx.push_back(j);
        out.coef.push_back(a);
    }
    if (!clean_cut(out, ctx.inst, ctx.params)) return false;
    score_cut(out, ctx.sol.x, ctx.inst.objective);
    return out.efficacy > ctx.params.min_efficacy;
}

/// Mixed-integer rounding of  sum a_v v <= beta  (structural and logical v) after dividing
/// by delta and complementing each variable to its nearer global bound.
/// With cg=true every variable must be integer and plain Chvatal-Gomory rounding is used.
bool mir_cut(const SepContext& ctx, const VarView& vv, const std::vector<std::pair<int, double>>& row, double beta,
             double delta, bool cg, SeparatorId origin, Cut& out, long& work) {
    const double min_frac = ctx.params.min_frac;
    struct Term {
        int v;
        double a;  // coefficient in complemented space
        bool at_lb;
        double bound;
    };
    std::vector<Term> terms;
    terms.reserve(row.size());
    double b = beta / delta;
    for (auto [v, a0] : row) {
        const double a = a0 / delta;
        if (a == 0.0) continue;
        if (cg && !vv.is_int(v)) return false;
        const double l = vv.lb(v), u = vv.ub(v), x = vv.value(v);
        if (!std::isfinite(l) || !std::isfinite(u)) return false;
        const bool at_lb = (x - l) <= (u - x);
        const double bnd = at_lb ? l : u;
        b -= a * bnd;
        terms.push_back({v, at_lb ? a : -a, at_lb, bnd});
    }
    work += static_cast<long>(terms.size());
    const double fb = std::floor(b);
    const double f = b - fb;
    if (f < min_frac || f > 1.0 - min_frac) return false;
    std::map<int, double> coefs;
    double rhs = fb;
    for (const auto& t : terms) {
        double g;
        if (cg) {
            g = std::floor(t.a + 1e-9);
        } else if (vv.is_int(t.v)) {
            const double fl = std::floor(t.a + 1e-9);
            const double fj = std::max(0.0, t.a - fl);
            g = fl + std::max(0.0, fj - f) / (1.0 - f);
        } else {
            g = t.a < 0.0 ? t.a / (1.0 - f) : 0.0;
        }
        if (g == 0.0) continue;
        // back to original space: v' = v - l  or  v' = u - v
        if (t.at_lb) {
            coefs[t.v] += g * delta;
            rhs += g * t.bound;
        } else {
            coefs[t.v] -= g * delta;
            rhs -= g * t.bound;
        }
    }
    return finish_cut(ctx, vv, coefs, rhs * delta, origin, out, work);
}

void push_unique(std::vector<Cut>& cuts, Cut c) {
    for (const auto& d : cuts)
        if (d.idx == c.idx && d.coef == c.coef && d.rhs == c.rhs) return;
    cuts.push_back(std::move(c));
}

SeparationResult gomory_impl(const SepContext& ctx, bool cg) {
    SeparationResult res;
    VarView vv(ctx);
    const int nv = vv.n() + vv.m();
    std::vector<std::pair<double, int>> cand;
    for (int v = 0; v < nv; ++v) {
        if (!ctx.lp.is_basic(v) || !vv.is_int(v)) continue;
        const double x = vv.value(v);
        const double f = x - std::floor(x);
        if (f < ctx.params.min_frac || f > 1.0 - ctx.params.min_frac) continue;
        cand.emplace_back(-std::min(f, 1.0 - f), v);
    }
    std::sort(cand.begin(), cand.end());
    if (static_cast<int>(cand.size()) > ctx.params.max_tableau_rows) cand.resize(ctx.params.max_tableau_rows);
    const auto id = cg ? SeparatorId::GomoryFractional : SeparatorId::GomoryMir;
    for (const auto& [unused, v] : cand) {
        const auto t = ctx.lp.tableau_row(v);
        res.work += static_cast<long>(vv.m()) * nv / 50 + nv;
        // x_v - sum t_j v_j = 0
        std::vector<std::pair<int, double>> row{{v, 1.0}};
        for (int j = 0; j < nv; ++j)
            if (t[j] != 0.0) row.emplace_back(j, -t[j]);
        Cut c;
        if (mir_cut(ctx, vv, row, 0.0, 1.0, cg, id, c, res.work)) push_unique(res.cuts, std::move(c));
        if (static_cast<int>(res.cuts.size()) >= ctx.params.max_cuts_per_call) break;
    }
    return res;
}

}  // namespace

SeparationResult separate_gomory_fractional(const SepContext& ctx) { return gomory_impl(ctx, true); }
SeparationResult separate_gomory_mir(const SepContext& ctx) { return gomory_impl(ctx, false); }

SeparationResult separate_cmir(const SepContext& ctx) {
    SeparationResult res;
    VarView vv(ctx);
    const int base = ctx.lp.problem().num_base_rows;
    std::vector<std::pair<double, int>> by_dual;
    for (int i = 0; i < base; ++i)
        if (std::abs(ctx.sol.duals[i]) > 1e-9) by_dual.emplace_back(-std::abs(ctx.sol.duals[i]), i);
    std::sort(by_dual.begin(), by_dual.end());
    // orientation: <= rows as is, >= rows negated, equalities by the sign of their dual
    auto oriented = [&](int i) {
        const auto& r = vv.row(i);
        double s = 1.0;
        if (r.sense == RowSense::Ge || (r.sense == RowSense::Eq && ctx.sol.duals[i] > 0.0)) s = -1.0;
        return s;
    };
    auto strictly_inside = [&](int j) {
        const double x = ctx.sol.x[j];
        return x > ctx.inst.lb[j] + 1e-6 && x < ctx.inst.ub[j] - 1e-6;
    };
    const int starts = std::min<int>(ctx.params.cmir_max_starts, static_cast<int>(by_dual.size()));
    for (int s = 0; s < starts; ++s) {
        const int r0 = by_dual[s].second;
        const double w0 = std::abs(ctx.sol.duals[r0]);
        std::map<int, double> agg;
        double beta = 0.0;
        std::vector<int> used;
        auto add_row = [&](int i, double w) {
            const auto& r = vv.row(i);
            const double sg = oriented(i) * w;
            for (std::size_t k = 0; k < r.idx.size(); ++k) agg[r.idx[k]] += sg * r.coef[k];
            beta += sg * r.rhs;
            used.push_back(i);
            res.work += static_cast<long>(r.idx.size());
        };
        add_row(r0, 1.0);
        Cut best;
        bool have = false;
        for (int step = 0; step < 3; ++step) {
            std::vector<std::pair<int, double>> row(agg.begin(), agg.end());
            std::vector<double> deltas{1.0};
            for (auto [j, a] : row)
                if (ctx.inst.integer[j] && strictly_inside(j) && std::abs(a) > 1e-6) deltas.push_back(std::abs(a));
            std::sort(deltas.begin(), deltas.end());
            deltas.erase(std::unique(deltas.begin(), deltas.end(),
                                     [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                         deltas.end());
            if (deltas.size() > 8) deltas.resize(8);
            for (double d : deltas) {
                Cut c;
                if (mir_cut(ctx, vv, row, beta, d, false, SeparatorId::CmirAggregation, c, res.work) &&
                    (!have || c.efficacy > best.efficacy)) {
                    best = std::move(c);
                    have = true;
                }
            }
            if (step == 2) break;
            // next row: largest |dual| among unused rows touching a variable strictly inside its bounds
            int next = -1;
            for (const auto& [negd, i] : by_dual) {
                if (std::find(used.begin(), used.end(), i) != used.end()) continue;
                const auto& r = vv.row(i);
                bool touches = false;
                for (int j : r.idx)
                    if (agg.count(j) && std::abs(agg[j]) > 1e-9 && strictly_inside(j)) {
                        touches = true;
                        break;
                    }
                if (touches) {
                    next = i;
                    break;
                }
            }
            if (next < 0) break;
            add_row(next, std::abs(ctx.sol.duals[next]) / w0);
        }
        if (have) push_unique(res.cuts, std::move(best));
    }
    return res;
}

SeparationResult separate_knapsack_cover(const SepContext& ctx) {
    SeparationResult res;
    const auto& inst = ctx.inst;
    const auto& x = ctx.sol.x;
    for (const auto& row : inst.rows) {
        for (const auto& f : le_forms(row)) {
            res.work += static_cast<long>(f.idx.size());
            bool ok = !f.idx.empty();
            for (int j : f.idx) ok = ok && is_binary(inst, j);
            if (!ok) continue;
            // complement negative coefficients: a x = a - a (1 - x)
            struct Item {
                int j;
                double a;
                bool comp;
                double xv;
            };
            std::vector<Item> items;
            double b = f.rhs;
            for (std::size_t k = 0; k < f.idx.size(); ++k) {
                const int j = f.idx[k];
                double a = f.coef[k];
                if (a == 0.0) continue;
                bool comp = false;
                if (a < 0) {
                    b -= a;
                    a = -a;
                    comp = true;
                }
                items.push_back({j, a, comp, comp ? 1.0 - x[j] : x[j]});
            }
            double total = 0.0;
            for (const auto& it : items) total += it.a;
            if (total <= b + 1e-9 || b < 0) continue;
            bool frac = false;
            for (const auto& it : items) frac = frac || (it.xv > 1e-6 && it.xv < 1 - 1e-6);
            if (!frac) continue;
            std::vector<std::size_t> order(items.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
                return (1.0 - items[p].xv) / items[p].a < (1.0 - items[q].xv) / items[q].a;
            });
            std::vector<std::size_t> cover;
            double w = 0.0;
            for (std::size_t p : order) {
                cover.push_back(p);
                w += items[p].a;
                if (w > b + 1e-9) break;
            }
            if (w <= b + 1e-9) continue;
            // minimize: drop items with the smallest x first while the set stays a cover
            std::vector<std::size_t> by_x = cover;
            std::stable_sort(by_x.begin(), by_x.end(), [&](std::size_t p, std::size_t q) {
                return items[p].xv < items[q].xv || (items[p].xv == items[q].xv && items[p].a < items[q].a);
            });
            std::set<std::size_t> keep(cover.begin(), cover.end());
            for (std::size_t p : by_x)
                if (w - items[p].a > b + 1e-9) {
                    keep.erase(p);
                    w -= items[p].a;
                }
            res.work += static_cast<long>(items.size());
            // sum_{C} y_j <= |C| - 1 with y_j = x_j or 1 - x_j
            Cut c;
            c.origin = SeparatorId::KnapsackCover;
            c.rhs = static_cast<double>(keep.size()) - 1.0;
            std::map<int, double> coefs;
            for (std::size_t p : keep) {
                if (items[p].comp) {
                    coefs[items[p].j] -= 1.0;
                    c.rhs -= 1.0;
                } else {
                    coefs[items[p].j] += 1.0;
                }
            }
            for (auto [j, a] : coefs) {
                c.idx.push_back(j);
                c.coef.push_back(a);
            }
            if (!clean_cut(c, inst, ctx.params)) continue;
            score_cut(c, x, inst.objective);
            if (c.efficacy > ctx.params.min_efficacy) push_unique(res.cuts, std::move(c));
            if (static_cast<int>(res.cuts.size()) >= ctx.params.max_cuts_per_call) return res;
        }
    }
    return res;
}

ConflictGraph build_conflict_graph(const MilpInstance& inst) {
    ConflictGraph g;
    g.n = inst.num_vars();
    std::vector<std::set<int>> adj(g.n);
    for (const auto& row : inst.rows) {
        for (const auto& f : le_forms(row)) {
            bool ok = !f.idx.empty();
            for (std::size_t k = 0; k < f.idx.size() && ok; ++k) ok = is_binary(inst, f.idx[k]) && f.coef[k] >= 0.0;
            if (!ok || f.idx.size() > 400) continue;
            // pair conflict: both at one exceeds the rhs
            for (std::size_t p = 0; p < f.idx.size(); ++p)
                for (std::size_t q = p + 1; q < f.idx.size(); ++q)
                    if (f.coef[p] + f.coef[q] > f.rhs + 1e-9 && f.coef[p] <= f.rhs + 1e-9 && f.coef[q] <= f.rhs + 1e-9) {
                        adj[f.idx[p]].insert(f.idx[q]);
                        adj[f.idx[q]].insert(f.idx[p]);
                    }
        }
    }
    g.adj.resize(g.n);
    for (int i = 0; i < g.n; ++i) g.adj[i].assign(adj[i].begin(), adj[i].end());
    return g;
}

namespace {

const ConflictGraph& conflicts_for(const SepContext& ctx, ConflictGraph& local) {
    if (ctx.conflicts) return *ctx.conflicts;
    local = build_conflict_graph(ctx.inst);
    return local;
}

}  // namespace

SeparationResult separate_clique(const SepContext& ctx) {
    SeparationResult res;
    ConflictGraph local;
    const auto& g = conflicts_for(ctx, local);
    const auto& x = ctx.sol.x;
    std::vector<int> frac;
    for (int j = 0; j < g.n; ++j)
        if (!g.adj[j].empty() && x[j] > 1e-6 && x[j] < 1 - 1e-6) frac.push_back(j);
    std::stable_sort(frac.begin(), frac.end(), [&](int a, int b) { return x[a] > x[b]; });
    std::set<std::vector<int>> seen;
    for (int s : frac) {
        std::vector<int> clique{s};
        std::vector<int> cand = g.adj[s];
        std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) { return x[a] > x[b]; });
        for (int v : cand) {
            res.work += static_cast<long>(clique.size());
            bool all = true;
            for (int u : clique)
                if (!g.has_edge(u, v)) {
                    all = false;
                    break;
                }
            if (all) clique.push_back(v);
        }
        double sum = 0.0;
        for (int v : clique) sum += x[v];
        if (clique.size() < 3 || sum <= 1.0 + 1e-6) continue;
        std::sort(clique.begin(), clique.end());
        if (!seen.insert(clique).second) continue;
        Cut c;
        c.origin = SeparatorId::Clique;
        c.idx = clique;
        c.coef.assign(clique.size(), 1.0);
        c.rhs = 1.0;
        score_cut(c, x, ctx.inst.objective);
        if (c.efficacy > ctx.params.min_efficacy) res.cuts.push_back(std::move(c));
        if (static_cast<int>(res.cuts.size()) >= ctx.params.max_cuts_per_call) break;
    }
    return res;
}

namespace {

/// Shortens an odd closed walk to a simple odd cycle (one always exists inside it).
std::vector<int> simple_odd_cycle(std::vector<int> walk) {
    // walk is v0 v1 ... v_{k-1} (closed: v_{k-1} -- v0), k odd
    while (true) {
        const int k = static_cast<int>(walk.size());
        int a = -1, b = -1;
        for (int i = 0; i < k && a < 0; ++i)
            for (int j = i + 1; j < k; ++j)
                if (walk[i] == walk[j]) {
                    a = i;
                    b = j;
                    break;
                }
        if (a < 0) return walk;
        std::vector<int> inner(walk.begin() + a, walk.begin() + b);
        std::vector<int> outer(walk.begin(), walk.begin() + a);
        outer.insert(outer.end(), walk.begin() + b, walk.end());
        walk = (inner.size() % 2 == 1) ? inner : outer;
    }
}

}  // namespace

SeparationResult separate_oddcycle(const SepContext& ctx) {
    SeparationResult res;
    ConflictGraph local;
    const auto& g = conflicts_for(ctx, local);
    const auto& x = ctx.sol.x;
    // restrict to vertices with positive LP value; zero vertices cannot help a violated cycle much
    std::vector<int> verts, loc(g.n, -1);
    for (int j = 0; j < g.n; ++j)
        if (!g.adj[j].empty() && x[j] > 1e-6) {
            loc[j] = static_cast<int>(verts.size());
            verts.push_back(j);
        }
    const int nv = static_cast<int>(verts.size());
    if (nv < 3) return res;
    std::vector<int> starts;
    for (int j : verts)
        if (x[j] < 1 - 1e-6) starts.push_back(j);
    std::stable_sort(starts.begin(), starts.end(), [&](int a, int b) {
        return std::abs(x[a] - 0.5) < std::abs(x[b] - 0.5);
    });
    if (static_cast<int>(starts.size()) > ctx.params.oddcycle_max_starts) starts.resize(ctx.params.oddcycle_max_starts);
    std::set<std::vector<int>> seen;
    for (int s : starts) {
        // Dijkstra on the doubled graph: node 2*l + side
        std::vector<double> dist(2 * nv, kInf);
        std::vector<int> prev(2 * nv, -1);
        using QE = std::pair<double, int>;
        std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
        const int src = 2 * loc[s], dst = 2 * loc[s] + 1;
        dist[src] = 0.0;
        pq.push({0.0, src});
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[u]) continue;
            if (u == dst || d >= 1.0) break;
            const int vu = verts[u / 2], side = u % 2;
            for (int w : g.adj[vu]) {
                ++res.work;
                if (loc[w] < 0) continue;
                const double wt = std::max(0.0, 1.0 - x[vu] - x[w]);
                const int t = 2 * loc[w] + (1 - side);
                if (d + wt < dist[t] - 1e-12) {
                    dist[t] = d + wt;
                    prev[t] = u;
                    pq.push({dist[t], t});
                }
            }
        }
        if (!(dist[dst] < 1.0 - 1e-6)) continue;
        std::vector<int> walk;
        for (int u = dst; u != src; u = prev[u]) walk.push_back(verts[u / 2]);
        // walk holds v_k..v_1 with v_k == s; the closing edge returns to s
        std::reverse(walk.begin(), walk.end());
        const auto cyc = simple_odd_cycle(walk);
        if (cyc.size() < 3) continue;
        double sum = 0.0;
        for (int v : cyc) sum += x[v];
        const double rhs = static_cast<double>((cyc.size() - 1) / 2);
        if (sum <= rhs + 1e-6) continue;
        auto key = cyc;
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) continue;
        Cut c;
        c.origin = SeparatorId::OddCycle;
        c.idx = key;
        c.coef.assign(key.size(), 1.0);
        c.rhs = rhs;
        score_cut(c, x, ctx.inst.objective);
        if (c.efficacy > ctx.params.min_efficacy) res.cuts.push_back(std::move(c));
        if (static_cast<int>(res.cuts.size()) >= ctx.params.max_cuts_per_call) break;
    }
    return res;
}

SeparationResult separate_zerohalf(const SepContext& ctx) {
    SeparationResult res;
    const auto& inst = ctx.inst;
    const auto& x = ctx.sol.x;
    struct ZRow {
        std::map<int, long long> a;
        long long b;
        double slack;
    };
    std::vector<ZRow> rows;
    for (const auto& row : inst.rows) {
        for (const auto& f : le_forms(row)) {
            res.work += static_cast<long>(f.idx.size());
            bool ok = near_int(f.rhs);
            for (std::size_t k = 0; k < f.idx.size() && ok; ++k)
                ok = inst.integer[f.idx[k]] && near_int(f.coef[k]) && std::isfinite(inst.lb[f.idx[k]]) &&
                     std::isfinite(inst.ub[f.idx[k]]) && near_int(inst.lb[f.idx[k]]) && near_int(inst.ub[f.idx[k]]);
            if (!ok) continue;
            ZRow z;
            double act = 0.0;
            for (std::size_t k = 0; k < f.idx.size(); ++k) {
                z.a[f.idx[k]] += std::llround(f.coef[k]);
                act += f.coef[k] * x[f.idx[k]];
            }
            z.b = std::llround(f.rhs);
            z.slack = std::max(0.0, f.rhs - act);
            if (z.slack < 1.0 - 1e-6) rows.push_back(std::move(z));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ZRow& p, const ZRow& q) { return p.slack < q.slack; });
    if (static_cast<int>(rows.size()) > ctx.params.zerohalf_max_rows) rows.resize(ctx.params.zerohalf_max_rows);

    auto try_combo = [&](const ZRow& r1, const ZRow* r2) {
        std::map<int, long long> a = r1.a;
        long long b = r1.b;
        double slack = r1.slack;
        if (r2) {
            for (auto [j, v] : r2->a) a[j] += v;
            b += r2->b;
            slack += r2->slack;
        }
        res.work += static_cast<long>(a.size());
        // make every coefficient even with a bound inequality, preferring the tighter one at x
        std::map<int, long long> even;
        for (auto [j, v] : a) {
            long long c = v;
            if (c % 2 != 0) {
                const double sl_lb = x[j] - inst.lb[j], sl_ub = inst.ub[j] - x[j];
                if (sl_ub <= sl_lb) {
                    c += 1;
                    b += std::llround(inst.ub[j]);
                    slack += std::max(0.0, sl_ub);
                } else {
                    c -= 1;
                    b -= std::llround(inst.lb[j]);
                    slack += std::max(0.0, sl_lb);
                }
            }
            if (c != 0) even[j] = c;
        }
        if (((b % 2) + 2) % 2 == 0 || slack >= 1.0 - 1e-6 || even.empty()) return;
        Cut c;
        c.origin = SeparatorId::ZeroHalf;
        for (auto [j, v] : even) {
            c.idx.push_back(j);
            c.coef.push_back(static_cast<double>(v / 2));
        }
        c.rhs = static_cast<double>((b - 1) / 2);
        if (!clean_cut(c, inst, ctx.params)) return;
        score_cut(c, x, inst.objective);
        if (c.efficacy > ctx.params.min_efficacy) push_unique(res.cuts, std::move(c));
    };
    for (std::size_t p = 0; p < rows.size(); ++p) {
        try_combo(rows[p], nullptr);
        for (std::size_t q = p + 1; q < rows.size(); ++q) {
            if (static_cast<int>(res.cuts.size()) >= ctx.params.max_cuts_per_call) return res;
            if (rows[p].slack + rows[q].slack >= 1.0 - 1e-6) continue;
            try_combo(rows[p], &rows[q]);
        }
    }
    return res;
}

SeparationResult separate_implied_bounds(const SepContext& ctx) {
    SeparationResult res;
    const auto& inst = ctx.inst;
    const auto& x = ctx.sol.x;
    auto frac = [&](int j) { return x[j] > 1e-6 && x[j] < 1 - 1e-6; };
    for (const auto& row : inst.rows) {
        for (const auto& f : le_forms(row)) {
            const int len = static_cast<int>(f.idx.size());
            if (len < 2 || len > 200) continue;
            double minact = 0.0;
            bool finite = true;
            for (int k = 0; k < len; ++k) {
                const int j = f.idx[k];
                const double a = f.coef[k];
                const double lo = std::min(a * inst.lb[j], a * inst.ub[j]);
                finite = finite && std::isfinite(lo);
                minact += lo;
            }
            if (!finite) continue;
            for (int kz = 0; kz < len; ++kz) {
                const int z = f.idx[kz];
                if (!is_binary(inst, z) || !frac(z)) continue;
                const double az = f.coef[kz];
                const double zmin = std::min(0.0, az);
                for (int zval = 0; zval <= 1; ++zval) {
                    // minimum activity of the others with z fixed
                    const double base = minact - zmin + az * zval;
                    for (int kj = 0; kj < len; ++kj) {
                        if (kj == kz) continue;
                        ++res.work;
                        const int j = f.idx[kj];
                        const double a = f.coef[kj];
                        if (a == 0.0) continue;
                        const double rest = base - std::min(a * inst.lb[j], a * inst.ub[j]);
                        const double lim = (f.rhs - rest) / a;
                        Cut c;
                        c.origin = SeparatorId::ImpliedBounds;
                        if (a > 0) {
                            double u = lim;
                            if (inst.integer[j]) u = std::floor(u + 1e-9);
                            if (u >= inst.ub[j] - 1e-6 || u < inst.lb[j] - 1e-9) continue;
                            const double gap = inst.ub[j] - u;
                            // z = zval implies x_j <= u
                            if (zval == 0) {
                                c.idx = {j, z};
                                c.coef = {1.0, -gap};
                                c.rhs = u;
                            } else {
                                c.idx = {j, z};
                                c.coef = {1.0, gap};
                                c.rhs = inst.ub[j];
                            }
                        } else {
                            double l = lim;
                            if (inst.integer[j]) l = std::ceil(l - 1e-9);
                            if (l <= inst.lb[j] + 1e-6 || l > inst.ub[j] + 1e-9) continue;
                            const double gap = l - inst.lb[j];
                            if (zval == 0) {
                                c.idx = {j, z};
                                c.coef = {-1.0, -gap};
                                c.rhs = -l;
                            } else {
                                c.idx = {j, z};
                                c.coef = {-1.0, gap};
                                c.rhs = -inst.lb[j];
                            }
                        }
                        if (c.idx[0] > c.idx[1]) {
                            std::swap(c.idx[0], c.idx[1]);
                            std::swap(c.coef[0], c.coef[1]);
                        }
                        if (!clean_cut(c, inst, ctx.params)) continue;
                        score_cut(c, x, inst.objective);
                        if (c.efficacy > ctx.params.min_efficacy) push_unique(res.cuts, std::move(c));
                        if (static_cast<int>(res.cuts.size()) >= ctx.params.max_cuts_per_call) return res;
                    }
                }
            }
        }
    }
    return res;
}

SeparationResult separate(SeparatorId id, const SepContext& ctx) {
    switch (id) {
        case SeparatorId::GomoryFractional: return separate_gomory_fractional(ctx);
        case SeparatorId::GomoryMir: return separate_gomory_mir(ctx);
        case SeparatorId::CmirAggregation: return separate_cmir(ctx);
        case SeparatorId::KnapsackCover: return separate_knapsack_cover(ctx);
        case SeparatorId::Clique: return separate_clique(ctx);
        case SeparatorId::OddCycle: return separate_oddcycle(ctx);
        case SeparatorId::ZeroHalf: return separate_zerohalf(ctx);
        case SeparatorId::ImpliedBounds: return separate_implied_bounds(ctx);
    }
    return {};
}

}  // namespace l2sep
