#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "l2sep/bnc.hpp"
#include "l2sep/metrics.hpp"
#include "l2sep/separators.hpp"

namespace l2sep {

/// All masks over M bits with at most `radius` active bits, by popcount then value.
std::vector<std::uint32_t> near_zero_masks(int M, int radius);

/// Near-Zero configs plus the Near-Best-Random neighbourhood: the best of `n_random` uniform
/// configs under `eval`, every config within Hamming distance `radius` of it, and every
/// subset of its active set. Duplicates are dropped keeping first occurrence.
std::vector<SeparatorConfig> sample_initial_configs(int n_random, int radius, std::uint64_t seed,
                                                    const std::function<double(SeparatorConfig)>& eval);

struct RewardTable {
    std::vector<SeparatorConfig> configs;
    std::vector<std::string> instances;
    std::vector<std::vector<double>> T;           // T[i][j]: config i on instance j
    std::vector<std::vector<bool>> failed;        // solver failure, cell set to r_min
    long update_round = 0;
    double r_min = kRewardFloor;

    std::size_t num_configs() const { return configs.size(); }
    std::size_t num_instances() const { return instances.size(); }
    void validate() const;
};

/// Returns the improvement delta of configuration `ci` on instance `ij` for one repetition `rep`.
/// Throwing marks the cell as failed.
using CellEvaluator = std::function<double(std::size_t ci, std::size_t ij, int rep)>;

RewardTable build_reward_table(const std::vector<SeparatorConfig>& configs, const std::vector<std::string>& instances,
                               const CellEvaluator& eval, int repetitions = 1, double r_min = kRewardFloor,
                               int jobs = 1, long update_round = 0);

/// Solver-backed table: delta of `prefix + (update_round, s_i)` against the default schedule.
RewardTable build_reward_table(const std::vector<SeparatorConfig>& configs, const std::vector<MilpInstance>& instances,
                               const BnCParams& params, const ConfigSchedule& prefix, long update_round,
                               int repetitions = 1, double r_min = kRewardFloor, int jobs = 1);

std::string table_to_csv(const RewardTable& t);
nlohmann::json table_header_json(const RewardTable& t);
RewardTable table_from_csv(const std::string& csv, const nlohmann::json& header);

double erm_performance(const std::vector<std::size_t>& A, const RewardTable& t);
double instance_agnostic_perf(std::size_t config, const RewardTable& t);

struct SubspaceStep {
    SeparatorConfig added;
    double erm = 0.0;        // training-set performance of the ERM selector on A
    double mean_agn = 0.0;   // mean instance-agnostic performance over A
    double worst_agn = 0.0;  // worst member
};

struct RestrictedSubspace {
    std::vector<SeparatorConfig> A;
    std::vector<std::size_t> rows;  // table rows of A
    std::vector<SubspaceStep> steps;
    double threshold = -std::numeric_limits<double>::infinity();
};

/// Greedy marginal-gain selection among configs with instance-agnostic performance > b.
/// Ties: higher instance-agnostic performance, then lower bitmask. Throws ConfigError when no
/// config passes the filter.
RestrictedSubspace restrict_subspace(const RewardTable& t, std::size_t size,
                                     double b = -std::numeric_limits<double>::infinity());

nlohmann::json subspace_to_json(const RestrictedSubspace& s);
RestrictedSubspace subspace_from_json(const nlohmann::json& j);

struct TradeoffRow {
    double threshold = 0.0;
    std::size_t step = 0;  // |A| after the step
    SubspaceStep data;
};

std::vector<TradeoffRow> tradeoff_curve(const RewardTable& t, const std::vector<double>& thresholds, std::size_t size);
std::string tradeoff_to_csv(const std::vector<TradeoffRow>& rows);

/// Exact expectation of the two-level mistake model: with probability alpha the predictor
/// picks uniformly from A on the population, otherwise its population value equals its training
/// value; on the training set it is the ERM selector with probability 1 - beta and uniform over A
/// otherwise. Computed by enumerating every outcome.
double simulate_mistake_model(const std::vector<std::size_t>& A, const RewardTable& train,
                              const RewardTable& population, double alpha, double beta);
/// (1-a)(1-b) ERM + (1-a) b mean_train_agn(A) + a mean_pop_agn(A).
double mistake_model_closed_form(const std::vector<std::size_t>& A, const RewardTable& train,
                                 const RewardTable& population, double alpha, double beta);

}  // namespace l2sep
