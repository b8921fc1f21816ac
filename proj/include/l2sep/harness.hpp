#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "l2sep/bandit.hpp"
#include "l2sep/bnc.hpp"
#include "l2sep/generators.hpp"
#include "l2sep/metrics.hpp"
#include "l2sep/model.hpp"
#include "l2sep/subspace.hpp"

namespace l2sep {

enum class Objective : std::uint8_t { Time, Gap };
enum class MetricMode : std::uint8_t { Effort, Wall };
const char* to_string(Objective o);
const char* to_string(MetricMode m);

struct DatasetSizes {
    int k_small = 40;
    int k_large = 200;
    int valid = 20;
    int test = 50;
};

struct RestrictionParams {
    int n_random = 32;
    int radius = 3;
    std::size_t size = 12;
    /// Fixed filter threshold; unset picks one from `thresholds` (see choose_threshold).
    std::optional<double> threshold;
    std::vector<double> thresholds{-1e9, -0.5, -0.25, -0.1, 0.0, 0.05, 0.1};
    int repetitions = 1;
    double r_min = kRewardFloor;
};

struct ExperimentConfig {
    std::string name = "experiment";
    GeneratorSpec generator;
    std::uint64_t seed = 1;
    DatasetSizes sizes;
    BnCParams solver;
    RestrictionParams restriction;
    TrainRunConfig run;
    NetArch arch;
    MetricMode metric = MetricMode::Effort;
    /// Training objective and headline metric.
    Objective objective = Objective::Time;
    /// Effort limit of the gap objective as a fraction of the median default effort on K_small.
    double gap_fraction = 0.5;
    /// Also score every method under the gap objective during evaluation.
    bool evaluate_gap = true;
    /// "auto" picks point or ucb on the validation split.
    std::string infer_strategy = "auto";
    int jobs = 0;

    /// Reduced sizes that run on a laptop.
    static ExperimentConfig desk(ClassTag tag);
    /// Dataset sizes and instance dimensions of the benchmark.
    static ExperimentConfig full(ClassTag tag);
    /// Tiny instances and budgets; runs the whole pipeline in seconds.
    static ExperimentConfig smoke(ClassTag tag);
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep the values of `base`; unknown keys are errors.
    static ExperimentConfig from_json(const nlohmann::json& j, const ExperimentConfig& base);
    static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Datasets are disjoint by seed: split s, item k uses mix_seed(seed, s * 2^32 + k).
struct Split {
    std::string name;
    std::vector<MilpInstance> instances;
    std::vector<std::uint64_t> seeds;
};
Split make_split(const ExperimentConfig& cfg, const std::string& split, int count);

enum class Method : std::uint8_t { Default, Random, Prune, InstanceAgnostic, RandomWithinSubspace, L2Sep };
inline constexpr std::array<Method, 6> kAllMethods = {Method::Default,          Method::Random,
                                                      Method::Prune,            Method::InstanceAgnostic,
                                                      Method::RandomWithinSubspace, Method::L2Sep};
const char* to_string(Method m);
Method method_from_string(const std::string& s);

/// Separators never applied by the default schedule on any of `results` are switched off.
SeparatorConfig prune_mask(const std::vector<SolveResult>& default_results);

/// Threshold maximising 0.5 * ERM + 0.5 * mean instance-agnostic performance of the final
/// subspace (the population estimate of the mistake model with alpha = 0.5). Ties: lower b.
double choose_threshold(const RewardTable& t, const std::vector<double>& thresholds, std::size_t size);

struct MethodSamples {
    Method method;
    std::vector<ImprovementSample> time;  // delta per test instance
    std::vector<double> gap;              // gap improvement per test instance (optional)
    std::vector<ConfigSchedule> schedules;
};

struct EvalResult {
    std::vector<std::string> instances;
    std::vector<Reference> refs;
    std::vector<double> default_gap;  // under the gap limit
    double gap_limit = 0.0;
    std::vector<MethodSamples> methods;
    std::string strategy;
    nlohmann::json validation;  // per strategy median on the validation split
};

/// Stage names in execution order.
const std::vector<std::string>& pipeline_stages();

/// Checkpointed experiment in a directory. A stage runs when its artifact is missing or any
/// earlier stage ran in the same invocation.
class Pipeline {
public:
    Pipeline(ExperimentConfig cfg, std::filesystem::path dir, int jobs = 0);

    const ExperimentConfig& config() const { return cfg_; }
    const std::filesystem::path& dir() const { return dir_; }
    void set_log(std::function<void(const std::string&)> log) { log_ = std::move(log); }

    void gen_data();
    void references();
    void build_table();
    void tradeoff();
    void restrict();
    void train();
    void evaluate();
    void report();
    /// Runs every stage whose artifact is missing (all of them when `force`).
    void run(bool force = false);
    /// Runs one stage by name; its inputs must exist.
    void run_stage(const std::string& stage);
    bool stage_done(const std::string& stage) const;

    std::filesystem::path report_dir() const { return dir_ / "report"; }

private:
    std::vector<MilpInstance> load_split(const std::string& split) const;
    std::vector<Reference> load_refs(const std::string& split) const;
    EnvOptions env_options(bool gap) const;
    double gap_limit() const;
    void log(const std::string& msg) const;
    void write(const std::filesystem::path& rel, const std::string& text) const;
    void note_timing(const std::string& stage, double seconds) const;

    ExperimentConfig cfg_;
    std::filesystem::path dir_;
    int jobs_;
    std::function<void(const std::string&)> log_;
};

/// Report files from an evaluation; returns the human-readable results table.
std::string results_table(const EvalResult& r, Objective objective);
std::string results_csv(const EvalResult& r, Objective objective);
std::string samples_csv(const EvalResult& r);
std::string heatmap_csv(const std::vector<SeparatorConfig>& A);
/// Selection frequency of each config of A at each update over the l2sep test schedules.
std::string frequencies_csv(const EvalResult& r, const std::vector<SeparatorConfig>& A,
                            const std::vector<long>& update_rounds);

nlohmann::json eval_to_json(const EvalResult& r);
EvalResult eval_from_json(const nlohmann::json& j);

}  // namespace l2sep
