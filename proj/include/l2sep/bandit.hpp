#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "l2sep/bnc.hpp"
#include "l2sep/common.hpp"
#include "l2sep/metrics.hpp"
#include "l2sep/model.hpp"
#include "l2sep/parallel.hpp"
#include "l2sep/rng.hpp"

namespace l2sep {

enum class ZMode : std::uint8_t { Full, Diag, LastLayer };
const char* to_string(ZMode m);
ZMode z_mode_from_string(const std::string& s);
/// Diagonal above 5000 parameters, full otherwise.
ZMode auto_z_mode(std::size_t param_count);

/// Exploration matrix of the confidence bonus. In LastLayer mode only the gradient slice
/// [offset, offset + dim) enters, with a full matrix over that slice.
struct UcbState {
    ZMode mode = ZMode::Diag;
    double gamma = 0.9375;
    double lambda = 0.001;
    std::size_t offset = 0;
    std::size_t dim = 0;
    Eigen::MatrixXd Z, Zinv;  // Full / LastLayer
    Eigen::VectorXd zdiag;    // Diag

    static UcbState make(ZMode mode, std::size_t param_count, std::size_t head_offset, double gamma = 0.9375,
                         double lambda = 0.001);

    Eigen::VectorXd project(const Eigen::VectorXd& grad) const;
    /// gamma * sqrt(g' Z^-1 g) for a full-length gradient.
    double bonus(const Eigen::VectorXd& grad) const;
    /// Z += g g'.
    void update(const Eigen::VectorXd& grad);
    /// Throws NumericalError (with a summary of the state) unless Z is symmetric positive definite.
    void check() const;
    nlohmann::json summary() const;
    nlohmann::json to_json() const;
    static UcbState from_json(const nlohmann::json& j);
};

/// Uniform gradient access for the two network types.
inline double net_value_and_gradient(const RewardNet& net, const TripletGraph& g, Eigen::VectorXd& grad) {
    return net.value_and_gradient(g, grad);
}
inline double net_value_and_gradient(const Mlp& net, const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    return net.value_and_gradient(x, grad);
}
inline std::size_t net_head_offset(const RewardNet& net) { return net.head_offset(); }
inline std::size_t net_head_offset(const Mlp& net) { return net.head_offset(); }

template <class Net, class X>
double ucb_score(const Net& net, const UcbState& state, const X& ctx, Eigen::VectorXd* grad_out = nullptr) {
    Eigen::VectorXd g;
    const double f = net_value_and_gradient(net, ctx, g);
    const double u = state.gamma == 0.0 ? f : f + state.bonus(g);
    if (grad_out) *grad_out = std::move(g);
    return u;
}

/// Draws D distinct arms without replacement, each draw proportional to softmax(U / temperature)
/// over the remaining arms, then adds the chosen arms' gradient outer products to Z.
template <class Net, class X>
std::vector<std::size_t> sample_arms(const Net& net, UcbState& state, const std::vector<X>& arms, std::size_t D,
                                     std::uint64_t seed, double temperature = 1.0) {
    if (D > arms.size()) throw ConfigError("sample_arms: D exceeds the number of arms");
    std::vector<double> U(arms.size());
    std::vector<Eigen::VectorXd> grads(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) U[a] = ucb_score(net, state, arms[a], &grads[a]);
    Rng rng(seed);
    std::vector<char> taken(arms.size(), 0);
    std::vector<std::size_t> out;
    std::vector<double> w(arms.size());
    for (std::size_t d = 0; d < D; ++d) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < arms.size(); ++a)
            if (!taken[a]) hi = std::max(hi, U[a]);
        for (std::size_t a = 0; a < arms.size(); ++a) w[a] = taken[a] ? 0.0 : std::exp((U[a] - hi) / temperature);
        const std::size_t pick = rng.weighted(w);
        taken[pick] = 1;
        out.push_back(pick);
    }
    for (std::size_t a : out) state.update(grads[a]);
    return out;
}

/// Index of the highest score; ties go to the lowest bitmask.
std::size_t argmax_arm(const std::vector<double>& scores, const std::vector<SeparatorConfig>& configs);

/// Highest-UCB arm (ties to the lowest bitmask); Z is updated with its gradient.
template <class Net, class X>
std::size_t select_ucb_argmax(const Net& net, UcbState& state, const std::vector<X>& arms,
                              const std::vector<SeparatorConfig>& configs) {
    std::vector<double> U(arms.size());
    std::vector<Eigen::VectorXd> grads(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) U[a] = ucb_score(net, state, arms[a], &grads[a]);
    const std::size_t best = argmax_arm(U, configs);
    state.update(grads[best]);
    return best;
}

/// D picks without replacement: uniform among the unselected with probability eps, else the
/// highest point estimate among the unselected. `random_picks` counts the uniform ones.
template <class Net, class X>
std::vector<std::size_t> epsilon_greedy_select(const Net& net, const std::vector<X>& arms,
                                               const std::vector<SeparatorConfig>& configs, std::size_t D, double eps,
                                               std::uint64_t seed, std::size_t* random_picks = nullptr) {
    if (D > arms.size()) throw ConfigError("epsilon_greedy_select: D exceeds the number of arms");
    std::vector<double> f(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) f[a] = net.forward(arms[a]);
    Rng rng(seed);
    std::vector<char> taken(arms.size(), 0);
    std::vector<std::size_t> out;
    std::size_t randoms = 0;
    for (std::size_t d = 0; d < D; ++d) {
        std::vector<std::size_t> left;
        for (std::size_t a = 0; a < arms.size(); ++a)
            if (!taken[a]) left.push_back(a);
        std::size_t pick;
        if (rng.uniform() < eps) {
            pick = left[rng.index(left.size())];
            ++randoms;
        } else {
            std::vector<double> s;
            std::vector<SeparatorConfig> c;
            for (std::size_t a : left) {
                s.push_back(f[a]);
                c.push_back(configs[a]);
            }
            pick = left[argmax_arm(s, c)];
        }
        taken[pick] = 1;
        out.push_back(pick);
    }
    if (random_picks) *random_picks = randoms;
    return out;
}

// ---------------------------------------------------------------------------------------------
// Environments

/// Problem side of the bandit loop. Update step j is the one after `prefix.size()` earlier choices.
template <class X>
class BanditEnv {
public:
    virtual ~BanditEnv() = default;
    virtual std::size_t num_instances() const = 0;
    virtual std::string instance_id(std::size_t i) const = 0;
    virtual std::size_t num_updates() const = 0;
    /// Context of instance i at update prefix.size(), arm-independent part.
    virtual X context(std::size_t i, const std::vector<SeparatorConfig>& prefix) const = 0;
    virtual X with_arm(const X& ctx, SeparatorConfig s) const = 0;
    virtual std::uint64_t fingerprint(const X& ctx) const = 0;
    /// Clipped reward of holding `s` from update prefix.size() until termination. Must be thread safe.
    virtual double reward(std::size_t i, const std::vector<SeparatorConfig>& prefix, SeparatorConfig s,
                          std::uint64_t seed) const = 0;
};

/// How a schedule is scored against the default schedule.
struct EnvOptions {
    SepFeatures sep = SepFeatures::Rich;
    int repetitions = 1;
    double r_min = kRewardFloor;
    /// Time objective measured in wall seconds (median of the repetitions) instead of effort units.
    bool wall_clock = false;
    /// > 0 switches to the gap objective: primal-dual gap after this much effort.
    double gap_effort_limit = 0.0;

    bool gap_objective() const { return gap_effort_limit > 0; }
};

struct Reference {
    double value = 0.0;   // t0 (time objective) or g0 (gap objective)
    double effort = 0.0;  // default effort, drives the hard stop
};

Reference reference_value(const MilpInstance& inst, const BnCParams& params, const EnvOptions& opts,
                          std::uint64_t seed = 0);
/// One improvement per repetition: delta floored at -3 (hard stops included) for the time
/// objective, gap improvement for the gap objective.
std::vector<double> improvements(const MilpInstance& inst, const ConfigSchedule& sched, const BnCParams& params,
                                 const EnvOptions& opts, const Reference& ref, std::uint64_t seed = 0);
std::vector<Reference> reference_values(const std::vector<MilpInstance>& instances, const BnCParams& params,
                                        const EnvOptions& opts, int jobs = 1);

/// Branch-and-cut environment: contexts are triplet graphs at the update rounds, rewards are
/// clipped improvements over the default schedule.
class BncEnv : public BanditEnv<TripletGraph> {
public:
    BncEnv(std::vector<MilpInstance> instances, BnCParams params, std::vector<long> update_rounds,
           EnvOptions opts = {}, int jobs = 1);
    BncEnv(std::vector<MilpInstance> instances, BnCParams params, std::vector<long> update_rounds,
           std::vector<Reference> refs, EnvOptions opts = {});

    std::size_t num_instances() const override { return instances_.size(); }
    std::string instance_id(std::size_t i) const override { return instances_[i].name; }
    std::size_t num_updates() const override { return rounds_.size(); }
    TripletGraph context(std::size_t i, const std::vector<SeparatorConfig>& prefix) const override;
    TripletGraph with_arm(const TripletGraph& ctx, SeparatorConfig s) const override;
    std::uint64_t fingerprint(const TripletGraph& ctx) const override { return ctx.fingerprint(); }
    double reward(std::size_t i, const std::vector<SeparatorConfig>& prefix, SeparatorConfig s,
                  std::uint64_t seed) const override;

    /// Schedule applying choices[j] from update round j onwards.
    ConfigSchedule schedule(const std::vector<SeparatorConfig>& choices) const;
    const std::vector<Reference>& references() const { return refs_; }
    const std::vector<long>& update_rounds() const { return rounds_; }
    const MilpInstance& instance(std::size_t i) const { return instances_[i]; }
    const BnCParams& params() const { return params_; }
    const EnvOptions& options() const { return opts_; }

private:
    std::vector<MilpInstance> instances_;
    BnCParams params_;
    std::vector<long> rounds_;
    std::vector<Reference> refs_;
    EnvOptions opts_;
};

/// Planted contextual bandit. Each instance has a context z in [-1, 1]^d; the reward of config s
/// is theta . phi(z, s) + N(0, sigma^2), where phi(z, s) = [bits(s), z (x) bits(s)]. Instances whose
/// best arm over `arms` wins by less than `margin` are rejected at construction.
class SyntheticEnv : public BanditEnv<Eigen::VectorXd> {
public:
    SyntheticEnv(std::vector<SeparatorConfig> arms, std::size_t num_instances, int context_dim, double sigma,
                 std::uint64_t seed, double margin = 0.1);

    std::size_t num_instances() const override { return z_.size(); }
    std::string instance_id(std::size_t i) const override { return "syn_" + std::to_string(i); }
    std::size_t num_updates() const override { return 1; }
    Eigen::VectorXd context(std::size_t i, const std::vector<SeparatorConfig>& prefix) const override;
    Eigen::VectorXd with_arm(const Eigen::VectorXd& ctx, SeparatorConfig s) const override;
    std::uint64_t fingerprint(const Eigen::VectorXd& ctx) const override;
    double reward(std::size_t i, const std::vector<SeparatorConfig>& prefix, SeparatorConfig s,
                  std::uint64_t seed) const override;

    int feature_dim() const { return kNumSeparators * (1 + dim_); }
    double expected_reward(std::size_t i, SeparatorConfig s) const;
    SeparatorConfig best_arm(std::size_t i) const;
    const std::vector<SeparatorConfig>& arms() const { return arms_; }

private:
    std::vector<SeparatorConfig> arms_;
    int dim_;
    double sigma_;
    Eigen::VectorXd theta_;
    std::vector<Eigen::VectorXd> z_;
};

// ---------------------------------------------------------------------------------------------
// Training

enum class ArmSelection : std::uint8_t { Softmax, Argmax, EpsilonGreedy };
const char* to_string(ArmSelection s);
ArmSelection arm_selection_from_string(const std::string& s);

struct TrainRunConfig {
    int T = 70;  // epochs
    int P = 6;   // instances per epoch
    int D = 8;   // configs per instance
    int k = 2;   // update steps
    std::vector<long> update_rounds{0, 5};
    ArmSelection selection = ArmSelection::Softmax;
    double temperature = 1.0;
    double epsilon = 0.1;
    /// Z mode; unset picks auto_z_mode(param_count).
    std::optional<ZMode> z_mode;
    double gamma = 0.9375;
    double lambda = 0.001;
    /// Per-epoch refit: optimiser steps of `batch` samples over the whole buffer.
    long steps_per_epoch = 16;
    int batch = 32;
    double lr = 1e-3;
    /// Re-initialise the network before each refit instead of warm-starting.
    bool full_restart = false;
    int jobs = 1;

    void validate(std::size_t arms) const;
    nlohmann::json to_json() const;
    static TrainRunConfig from_json(const nlohmann::json& j);
};

struct BufferRecord {
    std::string instance;
    std::size_t instance_index = 0;
    int update = 0;
    SeparatorConfig config;
    std::uint64_t fingerprint = 0;
    double reward = 0.0;
};

nlohmann::json record_to_json(const BufferRecord& r);
BufferRecord record_from_json(const nlohmann::json& j);

/// Append-only experience buffer; contexts are kept in memory for refits.
template <class X>
struct BanditBuffer {
    std::vector<BufferRecord> records;
    std::deque<X> contexts;

    std::size_t size() const { return records.size(); }
    void append(BufferRecord r, X ctx) {
        records.push_back(std::move(r));
        contexts.push_back(std::move(ctx));
    }
    std::string to_jsonl() const {
        std::string out;
        for (const auto& r : records) out += record_to_json(r).dump() + "\n";
        return out;
    }
};

struct TrainLogRow {
    int update = 0;
    int epoch = 0;
    std::size_t buffer_size = 0;
    double mean_reward = 0.0;
    double loss = 0.0;
};
std::string train_log_to_csv(const std::vector<TrainLogRow>& rows);

template <class Net, class X>
struct TrainOutput {
    Net net;
    UcbState state;
    BanditBuffer<X> buffer;
    std::vector<TrainLogRow> log;
};

/// Refit hooks per network type.
std::vector<double> refit(RewardNet& net, const std::deque<TripletGraph>& ctx, const std::vector<BufferRecord>& recs,
                          const FitOptions& opts, AdamState* adam);
std::vector<double> refit(Mlp& net, const std::deque<Eigen::VectorXd>& ctx, const std::vector<BufferRecord>& recs,
                          const FitOptions& opts, AdamState* adam);
/// Freezes input normalisation from sample contexts (no-op for Mlp).
void prepare_norm(RewardNet& net, const std::vector<TripletGraph>& samples);
inline void prepare_norm(Mlp&, const std::vector<Eigen::VectorXd>&) {}
void reinit(RewardNet& net, std::uint64_t seed);
void reinit(Mlp& net, std::uint64_t seed);

/// Choices made by frozen networks at the first nets.size() updates (argmax point estimate).
template <class Net, class X>
std::vector<SeparatorConfig> greedy_prefix(const BanditEnv<X>& env, std::size_t i, const std::vector<Net>& nets,
                                           const std::vector<SeparatorConfig>& A) {
    std::vector<SeparatorConfig> prefix;
    for (const auto& net : nets) {
        const X ctx = env.context(i, prefix);
        std::vector<double> f;
        for (auto s : A) f.push_back(net.forward(env.with_arm(ctx, s)));
        prefix.push_back(A[argmax_arm(f, A)]);
    }
    return prefix;
}

/// Trains `net` for update step prev_nets.size(); the frozen prev_nets choose the earlier updates.
template <class Net, class X>
TrainOutput<Net, X> neural_ucb_train(const BanditEnv<X>& env, const std::vector<std::size_t>& train_set,
                                     const std::vector<SeparatorConfig>& A, Net net, const std::vector<Net>& prev_nets,
                                     const TrainRunConfig& cfg, std::uint64_t seed) {
    cfg.validate(A.size());
    if (train_set.empty()) throw ConfigError("neural_ucb_train: empty training set");
    const int step = static_cast<int>(prev_nets.size());
    if (static_cast<std::size_t>(step) >= env.num_updates()) throw ConfigError("neural_ucb_train: no update left");
    const auto P = std::min<std::size_t>(static_cast<std::size_t>(cfg.P), train_set.size());
    const auto D = static_cast<std::size_t>(cfg.D);

    TrainOutput<Net, X> out{std::move(net), {}, {}, {}};
    const ZMode mode = cfg.z_mode.value_or(auto_z_mode(out.net.param_count()));
    out.state = UcbState::make(mode, out.net.param_count(), net_head_offset(out.net), cfg.gamma, cfg.lambda);

    // Contexts are fixed given the frozen networks, so they are computed once per instance.
    std::map<std::size_t, std::pair<std::vector<SeparatorConfig>, X>> cache;
    auto context_of = [&](std::size_t i) -> const std::pair<std::vector<SeparatorConfig>, X>& {
        auto it = cache.find(i);
        if (it == cache.end()) {
            auto prefix = greedy_prefix(env, i, prev_nets, A);
            X ctx = env.context(i, prefix);
            it = cache.emplace(i, std::make_pair(std::move(prefix), std::move(ctx))).first;
        }
        return it->second;
    };
    {
        std::vector<X> norm_samples;
        const std::size_t n = std::min<std::size_t>(train_set.size(), 32);
        for (std::size_t k = 0; k < n; ++k)
            for (auto s : A) norm_samples.push_back(env.with_arm(context_of(train_set[k]).second, s));
        prepare_norm(out.net, norm_samples);
    }

    Rng rng(seed);
    AdamState adam;
    for (int t = 0; t < cfg.T; ++t) {
        std::vector<std::size_t> pool = train_set;
        rng.shuffle(pool);
        pool.resize(P);
        struct Job {
            std::size_t inst;
            SeparatorConfig s;
            X graph;
            std::uint64_t seed;
            double reward = 0.0;
        };
        std::vector<Job> jobs;
        for (std::size_t p = 0; p < P; ++p) {
            const auto& [prefix, ctx] = context_of(pool[p]);
            std::vector<X> arms;
            for (auto s : A) arms.push_back(env.with_arm(ctx, s));
            const std::uint64_t pick_seed = mix_seed(seed, (static_cast<std::uint64_t>(t) << 20) | p);
            std::vector<std::size_t> picks;
            switch (cfg.selection) {
                case ArmSelection::Softmax:
                    picks = sample_arms(out.net, out.state, arms, D, pick_seed, cfg.temperature);
                    break;
                case ArmSelection::Argmax:
                    if (D != 1) throw ConfigError("argmax selection needs D = 1");
                    picks = {select_ucb_argmax(out.net, out.state, arms, A)};
                    break;
                case ArmSelection::EpsilonGreedy:
                    picks = epsilon_greedy_select(out.net, arms, A, D, cfg.epsilon, pick_seed);
                    break;
            }
            for (std::size_t a : picks)
                jobs.push_back(Job{pool[p], A[a], std::move(arms[a]), mix_seed(pick_seed, a), 0.0});
        }
        parallel_for(jobs.size(), cfg.jobs, [&](std::size_t q) {
            const auto& prefix = cache.at(jobs[q].inst).first;
            jobs[q].reward = env.reward(jobs[q].inst, prefix, jobs[q].s, jobs[q].seed);
        });
        double sum = 0.0;
        for (auto& j : jobs) {
            sum += j.reward;
            BufferRecord r{env.instance_id(j.inst), j.inst, step, j.s, env.fingerprint(j.graph), j.reward};
            out.buffer.append(std::move(r), std::move(j.graph));
        }
        FitOptions fo;
        fo.epochs = std::numeric_limits<int>::max();
        fo.max_steps = cfg.steps_per_epoch;
        fo.batch = cfg.batch;
        fo.lr = cfg.lr;
        fo.seed = mix_seed(seed ^ 0x5eedULL, static_cast<std::uint64_t>(t));
        if (cfg.full_restart) {
            reinit(out.net, mix_seed(seed, 0xfeedULL));
            adam = AdamState{};
            fo.max_steps = cfg.steps_per_epoch * (t + 1);
        }
        const auto trace = refit(out.net, out.buffer.contexts, out.buffer.records, fo, &adam);
        double loss = 0.0;
        if (!trace.empty()) loss = trace.back();
        out.log.push_back(TrainLogRow{step, t, out.buffer.size(), sum / static_cast<double>(jobs.size()), loss});
    }
    return out;
}

/// Forward training: k networks, each trained with the earlier ones frozen.
template <class Net, class X>
std::vector<TrainOutput<Net, X>> forward_training(const BanditEnv<X>& env, const std::vector<std::size_t>& train_set,
                                                  const std::vector<SeparatorConfig>& A, const Net& init_net,
                                                  const TrainRunConfig& cfg, std::uint64_t seed) {
    if (cfg.k < 1 || static_cast<std::size_t>(cfg.k) > env.num_updates())
        throw ConfigError("forward_training: k must be in [1, number of update rounds]");
    std::vector<TrainOutput<Net, X>> outs;
    std::vector<Net> frozen;
    for (int j = 0; j < cfg.k; ++j) {
        Net fresh = init_net;
        reinit(fresh, mix_seed(seed, 1000 + static_cast<std::uint64_t>(j)));
        outs.push_back(neural_ucb_train(env, train_set, A, std::move(fresh), frozen, cfg,
                                        mix_seed(seed, static_cast<std::uint64_t>(j))));
        frozen.push_back(outs.back().net);
    }
    return outs;
}

enum class InferStrategy : std::uint8_t { Point, Ucb };
const char* to_string(InferStrategy s);
InferStrategy infer_strategy_from_string(const std::string& s);

/// Per-update choices: at update j the context is built from the earlier choices and the arm
/// with the highest score (point estimate or UCB, Z left unchanged) is taken; ties go to the
/// lowest bitmask.
template <class Net, class X>
std::vector<SeparatorConfig> infer_choices(const BanditEnv<X>& env, std::size_t i, const std::vector<Net>& nets,
                                           const std::vector<UcbState>& states, const std::vector<SeparatorConfig>& A,
                                           InferStrategy strategy) {
    if (A.empty()) throw ConfigError("infer: empty configuration subspace");
    if (strategy == InferStrategy::Ucb && states.size() != nets.size())
        throw ConfigError("infer: ucb strategy needs one exploration state per network");
    std::vector<SeparatorConfig> prefix;
    for (std::size_t j = 0; j < nets.size(); ++j) {
        if (A.size() == 1) {
            prefix.push_back(A[0]);
            continue;
        }
        const X ctx = env.context(i, prefix);
        std::vector<double> f;
        for (auto s : A) {
            const X g = env.with_arm(ctx, s);
            f.push_back(strategy == InferStrategy::Point ? nets[j].forward(g) : ucb_score(nets[j], states[j], g));
        }
        prefix.push_back(A[argmax_arm(f, A)]);
    }
    return prefix;
}

ConfigSchedule infer_schedule(const BncEnv& env, std::size_t i, const std::vector<RewardNet>& nets,
                              const std::vector<UcbState>& states, const std::vector<SeparatorConfig>& A,
                              InferStrategy strategy);

/// Network checkpoint with its exploration state.
void save_policy(const std::filesystem::path& path, const std::vector<RewardNet>& nets,
                 const std::vector<UcbState>& states, const std::vector<SeparatorConfig>& A,
                 const std::vector<long>& update_rounds);
struct Policy {
    std::vector<RewardNet> nets;
    std::vector<UcbState> states;
    std::vector<SeparatorConfig> A;
    std::vector<long> update_rounds;
};
Policy load_policy(const std::filesystem::path& path, const NetArch& expected);

}  // namespace l2sep
