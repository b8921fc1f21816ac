#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "l2sep/instance.hpp"
#include "l2sep/lp.hpp"

namespace l2sep {

inline constexpr int kNumSeparators = 8;

enum class SeparatorId : std::uint8_t {
    GomoryFractional,
    GomoryMir,
    CmirAggregation,
    KnapsackCover,
    Clique,
    OddCycle,
    ZeroHalf,
    ImpliedBounds,
};

const char* to_string(SeparatorId id);
SeparatorId separator_from_string(const std::string& s);
inline constexpr std::array<SeparatorId, kNumSeparators> kAllSeparators = {
    SeparatorId::GomoryFractional, SeparatorId::GomoryMir, SeparatorId::CmirAggregation, SeparatorId::KnapsackCover,
    SeparatorId::Clique,           SeparatorId::OddCycle,  SeparatorId::ZeroHalf,        SeparatorId::ImpliedBounds};

/// Activation bitmask; bit k corresponds to SeparatorId k.
struct SeparatorConfig {
    std::uint8_t bits = 0;

    static SeparatorConfig all_on() { return {0xFF}; }
    static SeparatorConfig all_off() { return {0x00}; }
    bool active(SeparatorId id) const { return (bits >> static_cast<int>(id)) & 1u; }
    void set(SeparatorId id, bool on) {
        const auto m = static_cast<std::uint8_t>(1u << static_cast<int>(id));
        bits = on ? (bits | m) : (bits & ~m);
    }
    int count() const;
    /// "10110000": character k is the bit of separator k.
    std::string to_string() const;
    static SeparatorConfig from_string(const std::string& s);

    auto operator<=>(const SeparatorConfig&) const = default;
};

int hamming(SeparatorConfig a, SeparatorConfig b);

/// nu' x <= omega over structural variables.
struct Cut {
    std::vector<int> idx;
    std::vector<double> coef;
    double rhs = 0.0;
    SeparatorId origin = SeparatorId::GomoryFractional;
    double efficacy = 0.0;
    double obj_parallelism = 0.0;
    double score = 0.0;
    int age = 0;
    bool applied = false;

    double norm() const;
    double activity(const std::vector<double>& x) const;
    SparseRow to_row() const;
};

double cut_efficacy(const Cut& cut, const std::vector<double>& x);
double cut_parallelism(const Cut& a, const Cut& b);
/// Refreshes efficacy, objective parallelism and score at x.
void score_cut(Cut& cut, const std::vector<double>& x, const std::vector<double>& objective);

struct CutPool {
    std::vector<Cut> cuts;

    /// Adds the cut unless an identical one is already present. Returns true if added.
    bool add(Cut cut);
    long generated_count(SeparatorId id) const;
    long applied_count(SeparatorId id) const;
    /// Ages unapplied cuts and drops those older than max_age.
    void age_and_purge(int max_age);
};

/// Greedy selection by score = efficacy + 0.1 * objective parallelism, skipping cuts
/// whose parallelism to an already selected cut exceeds parallelism_thresh.
/// Only unapplied cuts with efficacy > min_efficacy are candidates; the chosen ones are
/// marked applied and returned.
std::vector<Cut> select_cuts(CutPool& pool, const std::vector<double>& x, const std::vector<double>& objective,
                             int max_cuts = 20, double parallelism_thresh = 0.9, double min_efficacy = 1e-6);

struct SeparatorParams {
    int max_tableau_rows = 30;
    double min_frac = 0.01;
    int max_cuts_per_call = 50;
    int cmir_max_starts = 8;
    int zerohalf_max_rows = 60;
    int oddcycle_max_starts = 40;
    double min_efficacy = 1e-6;
    double max_dynamism = 1e7;
    double drop_tol = 1e-10;
};

/// Conflict graph on binary variables: i--j when x_i + x_j <= 1 is implied by a single row.
struct ConflictGraph {
    int n = 0;
    std::vector<std::vector<int>> adj;  // sorted
    bool has_edge(int i, int j) const;
};
ConflictGraph build_conflict_graph(const MilpInstance& inst);

/// Everything a separator may read: the instance (global bounds), the solved LP engine
/// (current rows, logical bounds, basis, tableau) and its solution.
struct SepContext {
    const MilpInstance& inst;
    const DualSimplex& lp;
    const LpSolution& sol;
    SeparatorParams params{};
    const ConflictGraph* conflicts = nullptr;  // built on demand when null
};

struct SeparationResult {
    std::vector<Cut> cuts;
    long work = 0;  // abstract operation count, feeds the effort measure
};

SeparationResult separate(SeparatorId id, const SepContext& ctx);

SeparationResult separate_gomory_fractional(const SepContext& ctx);
SeparationResult separate_gomory_mir(const SepContext& ctx);
SeparationResult separate_cmir(const SepContext& ctx);
SeparationResult separate_knapsack_cover(const SepContext& ctx);
SeparationResult separate_clique(const SepContext& ctx);
SeparationResult separate_oddcycle(const SepContext& ctx);
SeparationResult separate_zerohalf(const SepContext& ctx);
SeparationResult separate_implied_bounds(const SepContext& ctx);

/// Drops tiny coefficients (relaxing the rhs over the global box so validity is kept),
/// merges duplicates and rejects empty or badly scaled cuts. Returns false if rejected.
bool clean_cut(Cut& cut, const MilpInstance& inst, const SeparatorParams& params = {});

/// True iff no integer-feasible point of inst violates the cut by more than tol.
bool validate_cut(const Cut& cut, const MilpInstance& inst, int var_limit = 16, double tol = 1e-6);

}  // namespace l2sep
