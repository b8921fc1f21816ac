#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "l2sep/instance.hpp"
#include "l2sep/lp.hpp"
#include "l2sep/separators.hpp"

namespace l2sep {

/// Piecewise-constant separator configuration indexed by the global separation-round
/// counter: updates[j].second applies to rounds [updates[j].first, updates[j+1].first).
struct ConfigSchedule {
    std::vector<std::pair<long, SeparatorConfig>> updates;
    /// Used for rounds before the first update when that update is not at round 0.
    std::optional<SeparatorConfig> prefix;

    static ConfigSchedule constant(SeparatorConfig c) { return ConfigSchedule{{{0, c}}, std::nullopt}; }
    SeparatorConfig at(long round) const;
    void validate() const;
    bool operator==(const ConfigSchedule&) const = default;
};

ConfigSchedule default_schedule();

nlohmann::json schedule_to_json(const ConfigSchedule& s);
ConfigSchedule schedule_from_json(const nlohmann::json& j);

struct EffortWeights {
    double w_pivot = 1.0;
    double w_sepcall = 1.0;
    double w_node = 50.0;
    /// Fixed cost charged per separator invocation, on top of its reported work.
    double call_cost = 5.0;
    /// Reported separator work units per effort unit.
    double work_scale = 0.001;
};

struct BnCParams {
    int max_sep_rounds_root = 30;
    int node_sep_freq = 4;
    int max_cuts_per_round = 20;
    double parallelism_thresh = 0.9;
    double gap_limit = 0.0;
    long node_limit = 100000;
    EffortWeights weights;
    double hard_stop_ratio = 3.0;
    /// Reference effort for the hard stop; <= 0 disables it.
    double reference_effort = 0.0;
    /// Absolute effort limit (gap objective); <= 0 disables it.
    double effort_limit = 0.0;
    /// Capture the LP state immediately before these global rounds.
    std::vector<long> snapshot_rounds;
    /// Return as soon as every requested snapshot has been captured.
    bool stop_after_snapshots = false;
    int cut_max_age = 5;
    int stall_rounds = 3;
    SeparatorParams sep;
    LpOptions lp;
    /// Test hook: sees every cut a separator returns, before it enters the pool.
    std::function<void(const Cut&)> cut_observer;
};

nlohmann::json params_to_json(const BnCParams& p);
BnCParams params_from_json(const nlohmann::json& j);

enum class SolveStatus : std::uint8_t {
    Optimal,
    GapReached,
    NodeLimit,
    HardStop,
    EffortLimit,
    Infeasible,
    NumericalError,
    Interrupted,  // stopped after the requested snapshots
};
const char* to_string(SolveStatus s);

struct SepCounters {
    long calls = 0;
    long cuts = 0;      // added to the pool
    long applied = 0;   // added to the LP
    long work = 0;
};

/// LP state at the start of a separation round, as needed by the context encoder.
struct LpSnapshot {
    long round = -1;
    bool reached = false;  // false: the solve ended earlier and this is its last LP state
    int depth = 0;
    std::vector<SparseRow> rows;  // base rows first, then applied cuts
    int num_base_rows = 0;
    std::vector<int> row_origin;     // -1 for instance rows, else separator index
    std::vector<int> row_age;        // rounds since the row entered the LP
    std::vector<double> row_score;   // selection score when applied (0 for instance rows)
    std::vector<double> row_lo, row_hi;
    std::vector<double> col_lb, col_ub;
    std::vector<double> x, row_activity, duals, reduced_costs;
    std::vector<int> col_age;        // LP solves since the column was last basic
    Basis basis;
    double objective = 0.0;
    long lp_solves = 0;
};

struct SolveResult {
    SolveStatus status = SolveStatus::Infeasible;
    double objective = kInf;  // incumbent z
    double bound = -kInf;
    double gap = 1.0;
    std::vector<double> solution;
    long nodes = 0;
    long rounds = 0;  // global separation-round counter at termination
    long pivots = 0;
    long lp_solves = 0;
    double root_bound = -kInf;
    double effort = 0.0;
    double wall_seconds = 0.0;
    std::array<SepCounters, kNumSeparators> sep{};
    std::vector<LpSnapshot> snapshots;
};

nlohmann::json result_to_json(const SolveResult& r, bool include_snapshots = false);

/// Relative gap |z - bound| / max(|z|, 1e-10), capped at 1 (1 when either side is infinite).
double relative_gap(double z, double bound);

/// w_pivot * pivots + w_sepcall * sum_k (call_cost * calls_k + work_scale * work_k) + w_node * nodes.
double effort(const SolveResult& r, const EffortWeights& w = {});

SolveResult solve(const MilpInstance& inst, const ConfigSchedule& schedule, const BnCParams& params = {},
                  std::uint64_t seed = 0);

}  // namespace l2sep
