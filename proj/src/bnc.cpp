#include "l2sep/bnc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <set>
#include <unordered_map>

namespace l2sep {

using nlohmann::json;

SeparatorConfig ConfigSchedule::at(long round) const {
    const std::pair<long, SeparatorConfig>* hit = nullptr;
    for (const auto& u : updates) {
        if (u.first > round) break;
        hit = &u;
    }
    if (hit) return hit->second;
    if (prefix) return *prefix;
    if (!updates.empty()) return updates.front().second;
    return SeparatorConfig::all_off();
}

void ConfigSchedule::validate() const {
    if (updates.empty()) throw ConfigError("schedule has no updates");
    for (std::size_t j = 0; j < updates.size(); ++j) {
        if (updates[j].first < 0) throw ConfigError("schedule round indices must be >= 0");
        if (j > 0 && updates[j].first <= updates[j - 1].first)
            throw ConfigError("schedule round indices must be strictly increasing");
    }
    if (updates.front().first != 0 && !prefix)
        throw ConfigError("schedule starts at round " + std::to_string(updates.front().first) +
                          " but gives no prefix configuration");
}

ConfigSchedule default_schedule() { return ConfigSchedule::constant(SeparatorConfig::all_on()); }

json schedule_to_json(const ConfigSchedule& s) {
    json j;
    j["updates"] = json::array();
    for (const auto& [r, c] : s.updates) j["updates"].push_back({{"round", r}, {"config", c.to_string()}});
    if (s.prefix) j["prefix"] = s.prefix->to_string();
    return j;
}

ConfigSchedule schedule_from_json(const json& j) {
    ConfigSchedule s;
    try {
        for (const auto& u : j.at("updates")) s.updates.emplace_back(u.at("round").get<long>(),
                                                                      SeparatorConfig::from_string(u.at("config").get<std::string>()));
        if (j.contains("prefix")) s.prefix = SeparatorConfig::from_string(j.at("prefix").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
    s.validate();
    return s;
}

json params_to_json(const BnCParams& p) {
    return {{"max_sep_rounds_root", p.max_sep_rounds_root},
            {"node_sep_freq", p.node_sep_freq},
            {"max_cuts_per_round", p.max_cuts_per_round},
            {"parallelism_thresh", p.parallelism_thresh},
            {"gap_limit", p.gap_limit},
            {"node_limit", p.node_limit},
            {"w_pivot", p.weights.w_pivot},
            {"w_sepcall", p.weights.w_sepcall},
            {"w_node", p.weights.w_node},
            {"call_cost", p.weights.call_cost},
            {"work_scale", p.weights.work_scale},
            {"hard_stop_ratio", p.hard_stop_ratio},
            {"reference_effort", p.reference_effort},
            {"effort_limit", p.effort_limit},
            {"cut_max_age", p.cut_max_age},
            {"stall_rounds", p.stall_rounds},
            {"max_pivots", p.lp.max_pivots}};
}

BnCParams params_from_json(const json& j) {
    BnCParams p;
    if (!j.is_object()) throw ConfigError("params: expected an object");
    try {
        for (const auto& [k, v] : j.items()) {
            if (k == "max_sep_rounds_root") p.max_sep_rounds_root = v.get<int>();
            else if (k == "node_sep_freq") p.node_sep_freq = v.get<int>();
            else if (k == "max_cuts_per_round") p.max_cuts_per_round = v.get<int>();
            else if (k == "parallelism_thresh") p.parallelism_thresh = v.get<double>();
            else if (k == "gap_limit") p.gap_limit = v.get<double>();
            else if (k == "node_limit") p.node_limit = v.get<long>();
            else if (k == "w_pivot") p.weights.w_pivot = v.get<double>();
            else if (k == "w_sepcall") p.weights.w_sepcall = v.get<double>();
            else if (k == "w_node") p.weights.w_node = v.get<double>();
            else if (k == "call_cost") p.weights.call_cost = v.get<double>();
            else if (k == "work_scale") p.weights.work_scale = v.get<double>();
            else if (k == "hard_stop_ratio") p.hard_stop_ratio = v.get<double>();
            else if (k == "reference_effort") p.reference_effort = v.get<double>();
            else if (k == "effort_limit") p.effort_limit = v.get<double>();
            else if (k == "cut_max_age") p.cut_max_age = v.get<int>();
            else if (k == "stall_rounds") p.stall_rounds = v.get<int>();
            else if (k == "max_pivots") p.lp.max_pivots = v.get<long>();
            else throw ConfigError("params: unknown key '" + k + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("params: ") + e.what());
    }
    if (p.max_sep_rounds_root < 0 || p.node_sep_freq < 0 || p.max_cuts_per_round < 0 || p.gap_limit < 0 ||
        p.node_limit < 0)
        throw ConfigError("params: limits must be >= 0");
    if (p.weights.w_pivot <= 0 || p.weights.w_sepcall <= 0 || p.weights.w_node <= 0)
        throw ConfigError("params: effort weights must be > 0");
    return p;
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::GapReached: return "gap_reached";
        case SolveStatus::NodeLimit: return "node_limit";
        case SolveStatus::HardStop: return "hard_stop";
        case SolveStatus::EffortLimit: return "effort_limit";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::NumericalError: return "numerical_error";
        case SolveStatus::Interrupted: return "interrupted";
    }
    return "?";
}

json result_to_json(const SolveResult& r, bool include_snapshots) {
    auto num = [](double v) -> json {
        if (std::isfinite(v)) return v;
        return v > 0 ? "inf" : "-inf";
    };
    json j{{"status", to_string(r.status)},
           {"objective", num(r.objective)},
           {"bound", num(r.bound)},
           {"gap", r.gap},
           {"nodes", r.nodes},
           {"rounds", r.rounds},
           {"pivots", r.pivots},
           {"lp_solves", r.lp_solves},
           {"root_bound", num(r.root_bound)},
           {"effort", r.effort},
           {"wall_seconds", r.wall_seconds},
           {"solution", r.solution}};
    json seps = json::object();
    for (auto id : kAllSeparators) {
        const auto& c = r.sep[static_cast<int>(id)];
        seps[to_string(id)] = {{"calls", c.calls}, {"cuts", c.cuts}, {"applied", c.applied}, {"work", c.work}};
    }
    j["separators"] = seps;
    if (include_snapshots) {
        j["snapshots"] = json::array();
        for (const auto& s : r.snapshots)
            j["snapshots"].push_back({{"round", s.round},
                                      {"reached", s.reached},
                                      {"depth", s.depth},
                                      {"rows", s.rows.size()},
                                      {"objective", s.objective}});
    }
    return j;
}

double relative_gap(double z, double bound) {
    if (!std::isfinite(z) || !std::isfinite(bound)) return 1.0;
    const double g = std::abs(z - bound) / std::max(std::abs(z), 1e-10);
    return std::min(1.0, g);
}

double effort(const SolveResult& r, const EffortWeights& w) {
    double sep = 0.0;
    for (const auto& c : r.sep) sep += w.call_cost * static_cast<double>(c.calls) + w.work_scale * static_cast<double>(c.work);
    return w.w_pivot * static_cast<double>(r.pivots) + w.w_sepcall * sep + w.w_node * static_cast<double>(r.nodes);
}

namespace {

struct Interrupt {};
struct LimitHit {
    SolveStatus status;
};

struct Node {
    long id = 0;
    int depth = 0;
    double bound = -kInf;
    std::vector<double> lb, ub;
    Basis basis;
    std::vector<long> row_ids;
};

struct NodeOrder {
    bool operator()(const Node* a, const Node* b) const {
        if (a->bound != b->bound) return a->bound > b->bound;
        return a->id > b->id;
    }
};

class BranchAndCut {
public:
    BranchAndCut(const MilpInstance& inst, const ConfigSchedule& sched, const BnCParams& p)
        : inst_(inst), sched_(sched), p_(p), lp_(LpProblem::from_instance(inst), p.lp) {
        const int m = inst.num_rows();
        for (int i = 0; i < m; ++i) {
            row_ids_.push_back(next_row_id_++);
            row_origin_.push_back(-1);
            row_birth_.push_back(0);
            row_score_.push_back(0.0);
        }
        col_age_.assign(inst.num_vars(), 0);
        pending_.insert(p.snapshot_rounds.begin(), p.snapshot_rounds.end());
    }

    SolveResult run() {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            search();
        } catch (const LimitHit& h) {
            res_.status = h.status;
        } catch (const Interrupt&) {
            res_.status = SolveStatus::Interrupted;
        } catch (const NumericalError&) {
            res_.status = SolveStatus::NumericalError;
        }
        fill_missing_snapshots();
        res_.objective = incumbent_;
        res_.solution = best_x_;
        if (res_.status == SolveStatus::Optimal) {
            res_.bound = incumbent_;
        } else if (res_.status == SolveStatus::Infeasible) {
            res_.bound = kInf;
        } else {
            double b = current_bound_;
            for (const auto& n : open_) b = std::min(b, n->bound);
            res_.bound = std::min(b, incumbent_);
        }
        res_.gap = res_.status == SolveStatus::Optimal ? 0.0 : relative_gap(incumbent_, res_.bound);
        res_.effort = effort(res_, p_.weights);
        res_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::move(res_);
    }

private:
    double cutoff() const {
        return std::isfinite(incumbent_) ? incumbent_ - 1e-9 * std::max(1.0, std::abs(incumbent_)) : kInf;
    }

    void check_limits() {
        const double e = effort(res_, p_.weights);
        if (p_.reference_effort > 0 && e > p_.hard_stop_ratio * p_.reference_effort) throw LimitHit{SolveStatus::HardStop};
        if (p_.effort_limit > 0 && e > p_.effort_limit) throw LimitHit{SolveStatus::EffortLimit};
    }

    LpSolution solve_lp() {
        auto sol = lp_.solve();
        res_.pivots += sol.pivot_count;
        ++res_.lp_solves;
        if (sol.status == LpStatus::IterationLimit || sol.status == LpStatus::Unbounded)
            throw NumericalError("LP solve failed: " + std::string(to_string(sol.status)));
        for (int j = 0; j < inst_.num_vars(); ++j)
            col_age_[j] = sol.basis.cols[j] == BasisStatus::Basic ? 0 : col_age_[j] + 1;
        if (sol.status == LpStatus::Optimal) {
            if (last_depth_ == 0) res_.root_bound = sol.objective;
            last_opt_ = sol;
        }
        return sol;
    }

    bool integral(const std::vector<double>& x) const {
        for (int j = 0; j < inst_.num_vars(); ++j)
            if (inst_.integer[j] && std::abs(x[j] - std::round(x[j])) > 1e-6) return false;
        return true;
    }

    void try_incumbent(const std::vector<double>& x) {
        std::vector<double> r = x;
        for (int j = 0; j < inst_.num_vars(); ++j)
            if (inst_.integer[j]) r[j] = std::round(r[j]);
        if (!inst_.is_feasible(r, 1e-6)) return;
        const double z = inst_.objective_value(r);
        if (z < incumbent_) {
            incumbent_ = z;
            best_x_ = r;
        }
    }

    LpSnapshot make_snapshot(const LpSolution& sol, int depth, long round, bool reached) const {
        LpSnapshot s;
        s.round = round;
        s.reached = reached;
        s.depth = depth;
        s.rows = lp_.problem().rows;
        s.num_base_rows = inst_.num_rows();
        s.row_origin = row_origin_;
        for (long b : row_birth_) s.row_age.push_back(static_cast<int>(res_.rounds - b));
        s.row_score = row_score_;
        for (int i = 0; i < lp_.num_rows(); ++i) {
            s.row_lo.push_back(lp_.row_lo(i));
            s.row_hi.push_back(lp_.row_hi(i));
        }
        for (int j = 0; j < lp_.num_cols(); ++j) {
            s.col_lb.push_back(lp_.col_lb(j));
            s.col_ub.push_back(lp_.col_ub(j));
        }
        s.x = sol.x;
        s.row_activity = sol.row_activity;
        s.duals = sol.duals;
        s.reduced_costs = sol.reduced_costs;
        s.col_age = col_age_;
        s.basis = sol.basis;
        s.objective = sol.objective;
        s.lp_solves = res_.lp_solves;
        return s;
    }

    void maybe_snapshot(const LpSolution& sol, int depth) {
        if (pending_.empty()) return;
        if (!pending_.count(res_.rounds)) {
            fallback_ = make_snapshot(sol, depth, res_.rounds, false);
            return;
        }
        pending_.erase(res_.rounds);
        res_.snapshots.push_back(make_snapshot(sol, depth, res_.rounds, true));
        if (p_.stop_after_snapshots && pending_.empty()) throw Interrupt{};
    }

    /// Unreached rounds get the latest LP state that is still consistent with the rows.
    void fill_missing_snapshots() {
        if (pending_.empty()) return;
        std::optional<LpSnapshot> last = std::move(fallback_);
        if (!last && last_opt_ && static_cast<int>(last_opt_->row_activity.size()) == lp_.num_rows())
            last = make_snapshot(*last_opt_, last_depth_, 0, false);
        if (!last) return;
        for (long r : pending_) {
            res_.snapshots.push_back(*last);
            res_.snapshots.back().round = r;
        }
        pending_.clear();
        std::sort(res_.snapshots.begin(), res_.snapshots.end(),
                  [](const LpSnapshot& a, const LpSnapshot& b) { return a.round < b.round; });
    }

    void add_cut_rows(const std::vector<Cut>& cuts) {
        std::vector<SparseRow> rows;
        for (const auto& c : cuts) {
            rows.push_back(c.to_row());
            row_ids_.push_back(next_row_id_++);
            row_origin_.push_back(static_cast<int>(c.origin));
            row_birth_.push_back(res_.rounds);
            row_score_.push_back(c.score);
            auto& ctr = res_.sep[static_cast<int>(c.origin)];
            ++ctr.applied;
        }
        lp_.add_rows(rows);
    }

    /// Drops cut rows whose logical is basic with positive slack.
    void remove_slack_cuts(const LpSolution& sol) {
        std::vector<int> drop;
        const int n = inst_.num_vars();
        for (int i = inst_.num_rows(); i < lp_.num_rows(); ++i)
            if (lp_.is_basic(n + i) && sol.row_activity[i] < lp_.row_hi(i) - 1e-6) drop.push_back(i);
        if (drop.empty()) return;
        lp_.remove_rows(drop);
        std::vector<char> gone(row_ids_.size(), 0);
        for (int i : drop) gone[i] = 1;
        auto keep = [&](auto& v) {
            std::size_t w = 0;
            for (std::size_t k = 0; k < v.size(); ++k)
                if (!gone[k]) v[w++] = v[k];
            v.resize(w);
        };
        keep(row_ids_);
        keep(row_origin_);
        keep(row_birth_);
        keep(row_score_);
    }

    const ConflictGraph* conflicts() {
        if (!conflicts_) conflicts_ = build_conflict_graph(inst_);
        return &*conflicts_;
    }

    /// Returns false if the node became infeasible or was cut off.
    bool separation_loop(LpSolution& sol, int depth, int max_rounds) {
        int stall = 0;
        for (int r = 0; r < max_rounds; ++r) {
            if (integral(sol.x)) break;
            maybe_snapshot(sol, depth);
            const SeparatorConfig cfg = sched_.at(res_.rounds);
            ++res_.rounds;
            SepContext ctx{inst_, lp_, sol, p_.sep};
            if (cfg.active(SeparatorId::Clique) || cfg.active(SeparatorId::OddCycle)) ctx.conflicts = conflicts();
            for (auto id : kAllSeparators) {
                if (!cfg.active(id)) continue;
                auto out = separate(id, ctx);
                auto& ctr = res_.sep[static_cast<int>(id)];
                ++ctr.calls;
                ctr.work += out.work;
                for (auto& c : out.cuts) {
                    if (p_.cut_observer) p_.cut_observer(c);
                    if (pool_.add(std::move(c))) ++ctr.cuts;
                }
            }
            auto chosen = select_cuts(pool_, sol.x, inst_.objective, p_.max_cuts_per_round, p_.parallelism_thresh,
                                      p_.sep.min_efficacy);
            pool_.age_and_purge(p_.cut_max_age);
            check_limits();
            if (chosen.empty()) break;
            add_cut_rows(chosen);
            const double prev = sol.objective;
            sol = solve_lp();
            check_limits();
            if (sol.status == LpStatus::Infeasible || sol.objective >= cutoff()) return false;
            try_incumbent(sol.x);
            if (sol.objective - prev <= 1e-6 * std::max(1.0, std::abs(prev))) {
                if (++stall >= p_.stall_rounds) break;
            } else {
                stall = 0;
            }
        }
        return true;
    }

    void install_basis(const Node& node) {
        if (node.basis.empty()) {
            lp_.reset_basis();
            return;
        }
        std::unordered_map<long, int> where;
        for (std::size_t k = 0; k < node.row_ids.size(); ++k) where[node.row_ids[k]] = static_cast<int>(k);
        Basis b;
        b.cols = node.basis.cols;
        b.rows.resize(row_ids_.size(), BasisStatus::Basic);
        for (std::size_t i = 0; i < row_ids_.size(); ++i) {
            auto it = where.find(row_ids_[i]);
            if (it != where.end()) b.rows[i] = node.basis.rows[it->second];
        }
        lp_.set_basis(b);
    }

    void process(Node& node) {
        ++res_.nodes;
        last_depth_ = node.depth;
        lp_.set_col_bounds(node.lb, node.ub);
        install_basis(node);
        LpSolution sol = solve_lp();
        check_limits();
        if (sol.status == LpStatus::Infeasible || sol.objective >= cutoff()) return;
        try_incumbent(sol.x);
        int rounds = 0;
        if (node.depth == 0) rounds = p_.max_sep_rounds_root;
        else if (p_.node_sep_freq > 0 && node.depth % p_.node_sep_freq == 0) rounds = 1;
        if (rounds > 0 && !separation_loop(sol, node.depth, rounds)) return;
        if (node.depth == 0 || lp_.num_rows() > inst_.num_rows() + 300) remove_slack_cuts(sol);
        if (integral(sol.x)) {
            try_incumbent(sol.x);
            return;
        }
        // most fractional, lowest index on ties
        int bj = -1;
        double best = -1.0;
        for (int j = 0; j < inst_.num_vars(); ++j) {
            if (!inst_.integer[j]) continue;
            const double f = sol.x[j] - std::floor(sol.x[j]);
            const double score = std::min(f, 1.0 - f);
            if (score > 1e-6 && score > best + 1e-12) {
                best = score;
                bj = j;
            }
        }
        if (bj < 0) return;
        const double bound = std::max(node.bound, sol.objective);
        const Basis basis = lp_.basis();
        for (int side = 0; side < 2; ++side) {
            auto child = std::make_unique<Node>();
            child->id = next_node_id_++;
            child->depth = node.depth + 1;
            child->bound = bound;
            child->lb = node.lb;
            child->ub = node.ub;
            if (side == 0) child->ub[bj] = std::floor(sol.x[bj]);
            else child->lb[bj] = std::ceil(sol.x[bj]);
            child->basis = basis;
            child->row_ids = row_ids_;
            open_.push_back(std::move(child));
            std::push_heap(open_.begin(), open_.end(), heap_cmp_);
        }
    }

    void search() {
        auto root = std::make_unique<Node>();
        root->id = next_node_id_++;
        root->lb = inst_.lb;
        root->ub = inst_.ub;
        open_.push_back(std::move(root));
        while (!open_.empty()) {
            std::pop_heap(open_.begin(), open_.end(), heap_cmp_);
            std::unique_ptr<Node> node = std::move(open_.back());
            open_.pop_back();
            if (node->bound >= cutoff()) continue;
            current_bound_ = node->bound;
            if (p_.gap_limit > 0 && std::isfinite(incumbent_) &&
                relative_gap(incumbent_, node->bound) <= p_.gap_limit) {
                open_.push_back(std::move(node));
                std::push_heap(open_.begin(), open_.end(), heap_cmp_);
                throw LimitHit{SolveStatus::GapReached};
            }
            if (res_.nodes >= p_.node_limit) {
                open_.push_back(std::move(node));
                std::push_heap(open_.begin(), open_.end(), heap_cmp_);
                throw LimitHit{SolveStatus::NodeLimit};
            }
            process(*node);
            current_bound_ = kInf;
        }
        res_.status = std::isfinite(incumbent_) ? SolveStatus::Optimal : SolveStatus::Infeasible;
    }

    struct HeapCmp {
        bool operator()(const std::unique_ptr<Node>& a, const std::unique_ptr<Node>& b) const {
            return NodeOrder{}(a.get(), b.get());
        }
    };

    const MilpInstance& inst_;
    const ConfigSchedule& sched_;
    const BnCParams& p_;
    DualSimplex lp_;
    CutPool pool_;
    std::optional<ConflictGraph> conflicts_;
    std::vector<long> row_ids_;
    std::vector<int> row_origin_;
    std::vector<long> row_birth_;
    std::vector<double> row_score_;
    long next_row_id_ = 0;
    long next_node_id_ = 0;
    std::vector<int> col_age_;
    std::set<long> pending_;
    std::optional<LpSolution> last_opt_;
    std::optional<LpSnapshot> fallback_;
    int last_depth_ = 0;
    std::vector<std::unique_ptr<Node>> open_;
    HeapCmp heap_cmp_;
    double incumbent_ = kInf;
    double current_bound_ = kInf;
    std::vector<double> best_x_;
    SolveResult res_;
};

}  // namespace

SolveResult solve(const MilpInstance& inst, const ConfigSchedule& schedule, const BnCParams& params, std::uint64_t) {
    inst.validate();
    if (!inst.has_finite_box()) throw ValidationError("solve: every variable needs finite bounds");
    schedule.validate();
    return BranchAndCut(inst, schedule, params).run();
}

}  // namespace l2sep
