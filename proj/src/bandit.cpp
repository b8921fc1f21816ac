#include "l2sep/bandit.hpp"

#include <algorithm>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "l2sep/instance_io.hpp"

namespace l2sep {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

const char* to_string(ZMode m) {
    switch (m) {
        case ZMode::Full: return "full";
        case ZMode::Diag: return "diag";
        case ZMode::LastLayer: return "lastlayer";
    }
    return "?";
}

ZMode z_mode_from_string(const std::string& s) {
    if (s == "full") return ZMode::Full;
    if (s == "diag") return ZMode::Diag;
    if (s == "lastlayer") return ZMode::LastLayer;
    throw ConfigError("unknown Z mode '" + s + "' (expected full, diag or lastlayer)");
}

ZMode auto_z_mode(std::size_t param_count) { return param_count > 5000 ? ZMode::Diag : ZMode::Full; }

UcbState UcbState::make(ZMode mode, std::size_t param_count, std::size_t head_offset, double gamma, double lambda) {
    if (!(lambda > 0)) throw ConfigError("UCB regulariser lambda must be positive");
    if (!(gamma >= 0)) throw ConfigError("UCB scaling gamma must be nonnegative");
    UcbState s;
    s.mode = mode;
    s.gamma = gamma;
    s.lambda = lambda;
    if (mode == ZMode::Diag) {
        s.dim = param_count;
        s.zdiag = VectorXd::Constant(static_cast<long>(param_count), lambda);
        return s;
    }
    if (mode == ZMode::LastLayer) {
        if (head_offset > param_count) throw ConfigError("head offset beyond parameter count");
        s.offset = head_offset;
    }
    s.dim = param_count - s.offset;
    const long d = static_cast<long>(s.dim);
    s.Z = MatrixXd::Identity(d, d) * lambda;
    s.Zinv = MatrixXd::Identity(d, d) / lambda;
    return s;
}

VectorXd UcbState::project(const VectorXd& grad) const {
    if (static_cast<std::size_t>(grad.size()) < offset + dim)
        throw ConfigError("UCB gradient has " + std::to_string(grad.size()) + " entries, state expects " +
                          std::to_string(offset + dim));
    return grad.segment(static_cast<long>(offset), static_cast<long>(dim));
}

double UcbState::bonus(const VectorXd& grad) const {
    const VectorXd v = project(grad);
    double q;
    if (mode == ZMode::Diag)
        q = (v.array().square() / zdiag.array()).sum();
    else
        q = v.dot(Zinv * v);
    if (!std::isfinite(q) || q < -1e-9 * (1.0 + v.squaredNorm() / lambda))
        throw NumericalError("UCB bonus is not real: g'Z^-1 g = " + std::to_string(q) + "; state " + summary().dump());
    return gamma * std::sqrt(std::max(q, 0.0));
}

void UcbState::update(const VectorXd& grad) {
    const VectorXd v = project(grad);
    if (!v.allFinite()) throw NumericalError("UCB update with a non-finite gradient; state " + summary().dump());
    if (mode == ZMode::Diag) {
        zdiag.array() += v.array().square();
        return;
    }
    Z.noalias() += v * v.transpose();
    const VectorXd u = Zinv * v;
    const double den = 1.0 + v.dot(u);
    if (!(den > 0) || !std::isfinite(den))
        throw NumericalError("UCB matrix lost positive definiteness; state " + summary().dump());
    Zinv.noalias() -= (u / den) * u.transpose();
    Zinv = 0.5 * (Zinv + Zinv.transpose()).eval();
}

void UcbState::check() const {
    if (mode == ZMode::Diag) {
        if (!zdiag.allFinite() || zdiag.minCoeff() < lambda)
            throw NumericalError("UCB diagonal below lambda; state " + summary().dump());
        return;
    }
    const double asym = (Z - Z.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) throw NumericalError("UCB matrix not symmetric; state " + summary().dump());
    Eigen::LLT<MatrixXd> llt(Z);
    if (llt.info() != Eigen::Success) throw NumericalError("UCB matrix not positive definite; state " + summary().dump());
}

json UcbState::summary() const {
    json j{{"mode", to_string(mode)}, {"gamma", gamma}, {"lambda", lambda}, {"offset", offset}, {"dim", dim}};
    if (mode == ZMode::Diag) {
        if (zdiag.size()) j["diag_min"] = zdiag.minCoeff(), j["diag_max"] = zdiag.maxCoeff();
    } else if (Z.size()) {
        j["trace"] = Z.trace();
        j["diag_min"] = Z.diagonal().minCoeff();
        j["diag_max"] = Z.diagonal().maxCoeff();
    }
    return j;
}

json UcbState::to_json() const {
    json j{{"mode", to_string(mode)}, {"gamma", gamma}, {"lambda", lambda}, {"offset", offset}, {"dim", dim}};
    if (mode == ZMode::Diag) {
        j["z"] = std::vector<double>(zdiag.data(), zdiag.data() + zdiag.size());
    } else {
        const MatrixXd& M = Z;
        std::vector<double> flat;
        for (long r = 0; r < M.rows(); ++r)
            for (long c = 0; c < M.cols(); ++c) flat.push_back(M(r, c));
        j["z"] = std::move(flat);
    }
    return j;
}

UcbState UcbState::from_json(const json& j) {
    try {
        UcbState s;
        s.mode = z_mode_from_string(j.at("mode").get<std::string>());
        s.gamma = j.at("gamma").get<double>();
        s.lambda = j.at("lambda").get<double>();
        s.offset = j.at("offset").get<std::size_t>();
        s.dim = j.at("dim").get<std::size_t>();
        const auto z = j.at("z").get<std::vector<double>>();
        const long d = static_cast<long>(s.dim);
        if (s.mode == ZMode::Diag) {
            if (static_cast<long>(z.size()) != d) throw ParseError("ucb_state.z", "size mismatch");
            s.zdiag = Eigen::Map<const VectorXd>(z.data(), d);
        } else {
            if (static_cast<long>(z.size()) != d * d) throw ParseError("ucb_state.z", "size mismatch");
            s.Z = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(z.data(), d, d);
            Eigen::LLT<MatrixXd> llt(s.Z);
            if (llt.info() != Eigen::Success) throw NumericalError("stored UCB matrix is not positive definite");
            s.Zinv = llt.solve(MatrixXd::Identity(d, d));
            s.Zinv = 0.5 * (s.Zinv + s.Zinv.transpose()).eval();
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError("ucb_state", e.what());
    }
}

std::size_t argmax_arm(const std::vector<double>& scores, const std::vector<SeparatorConfig>& configs) {
    if (scores.empty() || scores.size() != configs.size()) throw ConfigError("argmax_arm: size mismatch");
    std::size_t best = 0;
    for (std::size_t a = 1; a < scores.size(); ++a)
        if (scores[a] > scores[best] || (scores[a] == scores[best] && configs[a].bits < configs[best].bits)) best = a;
    return best;
}

// ---------------------------------------------------------------------------------------------

namespace {

void check_rounds(const std::vector<long>& rounds) {
    if (rounds.empty()) throw ConfigError("at least one update round is required");
    if (rounds.front() < 0) throw ConfigError("update rounds must be nonnegative");
    for (std::size_t k = 1; k < rounds.size(); ++k)
        if (rounds[k] <= rounds[k - 1]) throw ConfigError("update rounds must be strictly increasing");
}

SolveResult checked_solve(const MilpInstance& inst, const ConfigSchedule& sched, const BnCParams& p,
                          std::uint64_t seed) {
    auto r = solve(inst, sched, p, seed);
    if (r.status == SolveStatus::NumericalError) throw NumericalError("solve failed on " + inst.name);
    return r;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Reference reference_value(const MilpInstance& inst, const BnCParams& params, const EnvOptions& opts,
                          std::uint64_t seed) {
    if (opts.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    BnCParams p = params;
    p.reference_effort = 0.0;
    p.snapshot_rounds.clear();
    Reference ref;
    if (opts.gap_objective()) {
        p.effort_limit = opts.gap_effort_limit;
        const auto r = checked_solve(inst, default_schedule(), p, seed);
        ref.value = r.gap;
        ref.effort = std::max(r.effort, 1.0);
        return ref;
    }
    p.effort_limit = 0.0;
    std::vector<double> walls;
    for (int rep = 0; rep < (opts.wall_clock ? opts.repetitions : 1); ++rep) {
        const auto r = checked_solve(inst, default_schedule(), p, mix_seed(seed, static_cast<std::uint64_t>(rep)));
        ref.effort = std::max(r.effort, 1.0);
        walls.push_back(std::max(r.wall_seconds, 1e-9));
    }
    ref.value = opts.wall_clock ? median_of(walls) : ref.effort;
    return ref;
}

std::vector<Reference> reference_values(const std::vector<MilpInstance>& instances, const BnCParams& params,
                                        const EnvOptions& opts, int jobs) {
    std::vector<Reference> refs(instances.size());
    parallel_for(instances.size(), jobs, [&](std::size_t j) { refs[j] = reference_value(instances[j], params, opts); });
    return refs;
}

std::vector<double> improvements(const MilpInstance& inst, const ConfigSchedule& sched, const BnCParams& params,
                                 const EnvOptions& opts, const Reference& ref, std::uint64_t seed) {
    BnCParams p = params;
    p.snapshot_rounds.clear();
    std::vector<double> out;
    if (opts.gap_objective()) {
        p.reference_effort = 0.0;
        p.effort_limit = opts.gap_effort_limit;
        const auto r = checked_solve(inst, sched, p, seed);
        out.push_back(gap_improvement(ref.value, r.gap));
        return out;
    }
    p.effort_limit = 0.0;
    p.reference_effort = ref.effort;
    const int reps = opts.wall_clock ? opts.repetitions : 1;
    for (int rep = 0; rep < reps; ++rep) {
        const auto r = checked_solve(inst, sched, p, mix_seed(seed, static_cast<std::uint64_t>(rep)));
        if (r.status == SolveStatus::HardStop) {
            out.push_back(kHardStopFloor);
            continue;
        }
        const double t = opts.wall_clock ? std::max(r.wall_seconds, 1e-9) : r.effort;
        out.push_back(std::max(rel_improvement(ref.value, t), kHardStopFloor));
    }
    return out;
}

BncEnv::BncEnv(std::vector<MilpInstance> instances, BnCParams params, std::vector<long> update_rounds, EnvOptions opts,
               int jobs)
    : BncEnv(instances, params, update_rounds, reference_values(instances, params, opts, jobs), opts) {}

BncEnv::BncEnv(std::vector<MilpInstance> instances, BnCParams params, std::vector<long> update_rounds,
               std::vector<Reference> refs, EnvOptions opts)
    : instances_(std::move(instances)),
      params_(std::move(params)),
      rounds_(std::move(update_rounds)),
      refs_(std::move(refs)),
      opts_(opts) {
    check_rounds(rounds_);
    if (refs_.size() != instances_.size()) throw ConfigError("one reference value per instance is required");
    if (opts_.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    params_.snapshot_rounds.clear();
    params_.stop_after_snapshots = false;
}

ConfigSchedule BncEnv::schedule(const std::vector<SeparatorConfig>& choices) const {
    if (choices.size() > rounds_.size()) throw ConfigError("more choices than update rounds");
    if (choices.empty()) return default_schedule();
    ConfigSchedule s;
    for (std::size_t k = 0; k < choices.size(); ++k) s.updates.emplace_back(rounds_[k], choices[k]);
    if (rounds_.front() != 0) s.prefix = SeparatorConfig::all_on();
    return s;
}

TripletGraph BncEnv::context(std::size_t i, const std::vector<SeparatorConfig>& prefix) const {
    const std::size_t j = prefix.size();
    if (j >= rounds_.size()) throw ConfigError("context: no update left");
    BnCParams p = params_;
    p.snapshot_rounds = {rounds_[j]};
    p.stop_after_snapshots = true;
    p.reference_effort = 0.0;
    p.effort_limit = 0.0;
    const auto r = checked_solve(instances_[i], schedule(prefix), p, 0);
    if (r.snapshots.empty())
        throw NumericalError("no LP state available at round " + std::to_string(rounds_[j]) + " for " +
                             instances_[i].name);
    return encode(instances_[i], r.snapshots.front(), SeparatorConfig::all_off(), opts_.sep);
}

TripletGraph BncEnv::with_arm(const TripletGraph& ctx, SeparatorConfig s) const {
    TripletGraph g = ctx;
    g.set_config(s);
    return g;
}

double BncEnv::reward(std::size_t i, const std::vector<SeparatorConfig>& prefix, SeparatorConfig s,
                      std::uint64_t seed) const {
    std::vector<SeparatorConfig> choices = prefix;
    choices.push_back(s);
    return clipped_reward(improvements(instances_[i], schedule(choices), params_, opts_, refs_[i], seed), opts_.r_min);
}

ConfigSchedule infer_schedule(const BncEnv& env, std::size_t i, const std::vector<RewardNet>& nets,
                              const std::vector<UcbState>& states, const std::vector<SeparatorConfig>& A,
                              InferStrategy strategy) {
    return env.schedule(infer_choices(env, i, nets, states, A, strategy));
}

// ---------------------------------------------------------------------------------------------

SyntheticEnv::SyntheticEnv(std::vector<SeparatorConfig> arms, std::size_t num_instances, int context_dim,
                           double sigma, std::uint64_t seed, double margin)
    : arms_(std::move(arms)), dim_(context_dim), sigma_(sigma) {
    if (arms_.empty()) throw ConfigError("synthetic bandit needs at least one arm");
    if (dim_ < 1) throw ConfigError("synthetic bandit context dimension must be >= 1");
    Rng rng(seed);
    theta_.resize(feature_dim());
    const double scale = 1.0 / std::sqrt(1.0 + dim_);
    for (long k = 0; k < theta_.size(); ++k) theta_[k] = rng.uniform(-1.0, 1.0) * scale;
    long attempts = 0;
    while (z_.size() < num_instances) {
        if (++attempts > 1000 * static_cast<long>(num_instances) + 1000)
            throw ConfigError("synthetic bandit: margin too large, cannot sample instances");
        VectorXd z(dim_);
        for (int k = 0; k < dim_; ++k) z[k] = rng.uniform(-1.0, 1.0);
        z_.push_back(z);
        if (arms_.size() > 1) {
            std::vector<double> r;
            for (auto s : arms_) r.push_back(expected_reward(z_.size() - 1, s));
            std::sort(r.rbegin(), r.rend());
            if (r[0] - r[1] < margin) z_.pop_back();
        }
    }
}

VectorXd SyntheticEnv::context(std::size_t i, const std::vector<SeparatorConfig>&) const { return z_.at(i); }

VectorXd SyntheticEnv::with_arm(const VectorXd& z, SeparatorConfig s) const {
    VectorXd phi = VectorXd::Zero(feature_dim());
    for (int k = 0; k < kNumSeparators; ++k) {
        if (!((s.bits >> k) & 1u)) continue;
        phi[k] = 1.0;
        phi.segment(kNumSeparators + k * dim_, dim_) = z;
    }
    return phi;
}

std::uint64_t SyntheticEnv::fingerprint(const VectorXd& ctx) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (long k = 0; k < ctx.size(); ++k) {
        std::uint64_t b;
        const double v = ctx[k];
        std::memcpy(&b, &v, sizeof b);
        h = (h ^ b) * 1099511628211ULL;
    }
    return h;
}

double SyntheticEnv::expected_reward(std::size_t i, SeparatorConfig s) const { return theta_.dot(with_arm(z_.at(i), s)); }

double SyntheticEnv::reward(std::size_t i, const std::vector<SeparatorConfig>&, SeparatorConfig s,
                            std::uint64_t seed) const {
    Rng rng(seed);
    return expected_reward(i, s) + sigma_ * rng.normal();
}

SeparatorConfig SyntheticEnv::best_arm(std::size_t i) const {
    std::vector<double> r;
    for (auto s : arms_) r.push_back(expected_reward(i, s));
    return arms_[argmax_arm(r, arms_)];
}

// ---------------------------------------------------------------------------------------------

const char* to_string(ArmSelection s) {
    switch (s) {
        case ArmSelection::Softmax: return "softmax";
        case ArmSelection::Argmax: return "argmax";
        case ArmSelection::EpsilonGreedy: return "epsilon_greedy";
    }
    return "?";
}

ArmSelection arm_selection_from_string(const std::string& s) {
    if (s == "softmax") return ArmSelection::Softmax;
    if (s == "argmax") return ArmSelection::Argmax;
    if (s == "epsilon_greedy") return ArmSelection::EpsilonGreedy;
    throw ConfigError("unknown arm selection '" + s + "'");
}

const char* to_string(InferStrategy s) { return s == InferStrategy::Point ? "point" : "ucb"; }

InferStrategy infer_strategy_from_string(const std::string& s) {
    if (s == "point") return InferStrategy::Point;
    if (s == "ucb") return InferStrategy::Ucb;
    throw ConfigError("unknown inference strategy '" + s + "' (expected point or ucb)");
}

void TrainRunConfig::validate(std::size_t arms) const {
    if (T < 1 || P < 1 || D < 1) throw ConfigError("T, P and D must be >= 1");
    if (static_cast<std::size_t>(D) > arms)
        throw ConfigError("D = " + std::to_string(D) + " exceeds |A| = " + std::to_string(arms));
    if (k < 1 || k > 3) throw ConfigError("k must be 1, 2 or 3");
    if (update_rounds.size() < static_cast<std::size_t>(k))
        throw ConfigError("k = " + std::to_string(k) + " needs as many update rounds");
    check_rounds(update_rounds);
    if (steps_per_epoch < 1 || batch < 1 || !(lr > 0)) throw ConfigError("refit budget must be positive");
    if (!(temperature > 0)) throw ConfigError("softmax temperature must be positive");
    if (!(epsilon >= 0 && epsilon <= 1)) throw ConfigError("epsilon must lie in [0, 1]");
}

json TrainRunConfig::to_json() const {
    json j{{"T", T},
           {"P", P},
           {"D", D},
           {"k", k},
           {"update_rounds", update_rounds},
           {"selection", to_string(selection)},
           {"temperature", temperature},
           {"epsilon", epsilon},
           {"z_mode", z_mode ? json(to_string(*z_mode)) : json("auto")},
           {"gamma", gamma},
           {"lambda", lambda},
           {"steps_per_epoch", steps_per_epoch},
           {"batch", batch},
           {"lr", lr},
           {"full_restart", full_restart}};
    return j;
}

TrainRunConfig TrainRunConfig::from_json(const json& j) {
    TrainRunConfig c;
    if (!j.is_object()) throw ConfigError("run config must be an object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "T") c.T = v.get<int>();
            else if (key == "P") c.P = v.get<int>();
            else if (key == "D") c.D = v.get<int>();
            else if (key == "k") c.k = v.get<int>();
            else if (key == "update_rounds") c.update_rounds = v.get<std::vector<long>>();
            else if (key == "selection") c.selection = arm_selection_from_string(v.get<std::string>());
            else if (key == "temperature") c.temperature = v.get<double>();
            else if (key == "epsilon") c.epsilon = v.get<double>();
            else if (key == "z_mode") {
                const auto s = v.get<std::string>();
                if (s == "auto") c.z_mode.reset();
                else c.z_mode = z_mode_from_string(s);
            } else if (key == "gamma") c.gamma = v.get<double>();
            else if (key == "lambda") c.lambda = v.get<double>();
            else if (key == "steps_per_epoch") c.steps_per_epoch = v.get<long>();
            else if (key == "batch") c.batch = v.get<int>();
            else if (key == "lr") c.lr = v.get<double>();
            else if (key == "full_restart") c.full_restart = v.get<bool>();
            else if (key == "jobs") c.jobs = v.get<int>();
            else throw ConfigError("run config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    return c;
}

json record_to_json(const BufferRecord& r) {
    return json{{"instance", r.instance},  {"index", r.instance_index},   {"update", r.update},
                {"config", r.config.to_string()}, {"fingerprint", r.fingerprint}, {"reward", r.reward}};
}

BufferRecord record_from_json(const json& j) {
    try {
        BufferRecord r;
        r.instance = j.at("instance").get<std::string>();
        r.instance_index = j.at("index").get<std::size_t>();
        r.update = j.at("update").get<int>();
        r.config = SeparatorConfig::from_string(j.at("config").get<std::string>());
        r.fingerprint = j.at("fingerprint").get<std::uint64_t>();
        r.reward = j.at("reward").get<double>();
        return r;
    } catch (const json::exception& e) {
        throw ParseError("buffer record", e.what());
    }
}

std::string train_log_to_csv(const std::vector<TrainLogRow>& rows) {
    std::ostringstream out;
    out << std::setprecision(10) << "update,epoch,buffer_size,mean_reward,loss\n";
    for (const auto& r : rows)
        out << r.update << "," << r.epoch << "," << r.buffer_size << "," << r.mean_reward << "," << r.loss << "\n";
    return out.str();
}

std::vector<double> refit(RewardNet& net, const std::deque<TripletGraph>& ctx, const std::vector<BufferRecord>& recs,
                          const FitOptions& opts, AdamState* adam) {
    std::vector<Sample> samples;
    samples.reserve(recs.size());
    for (std::size_t k = 0; k < recs.size(); ++k) samples.push_back(Sample{&ctx[k], recs[k].reward});
    return fit(net, samples, opts, adam);
}

std::vector<double> refit(Mlp& net, const std::deque<VectorXd>& ctx, const std::vector<BufferRecord>& recs,
                          const FitOptions& opts, AdamState* adam) {
    std::vector<std::pair<VectorXd, double>> data;
    data.reserve(recs.size());
    for (std::size_t k = 0; k < recs.size(); ++k) data.emplace_back(ctx[k], recs[k].reward);
    return fit_mlp(net, data, opts, adam);
}

void prepare_norm(RewardNet& net, const std::vector<TripletGraph>& samples) {
    std::vector<const TripletGraph*> ptrs;
    for (const auto& g : samples) ptrs.push_back(&g);
    if (!ptrs.empty()) net.fit_input_norm(ptrs);
}

void reinit(RewardNet& net, std::uint64_t seed) { net.init(seed); }
void reinit(Mlp& net, std::uint64_t seed) { net.init(seed); }

// ---------------------------------------------------------------------------------------------

void save_policy(const std::filesystem::path& path, const std::vector<RewardNet>& nets,
                 const std::vector<UcbState>& states, const std::vector<SeparatorConfig>& A,
                 const std::vector<long>& update_rounds) {
    json j;
    j["format"] = "l2sep-policy";
    j["version"] = 1;
    json a = json::array();
    for (auto s : A) a.push_back(s.to_string());
    j["A"] = std::move(a);
    j["update_rounds"] = update_rounds;
    j["nets"] = json::array();
    for (const auto& n : nets) j["nets"].push_back(n.to_json());
    j["states"] = json::array();
    for (const auto& s : states) j["states"].push_back(s.to_json());
    write_text_file(path, j.dump() + "\n");
}

Policy load_policy(const std::filesystem::path& path, const NetArch& expected) {
    const json j = read_json_file(path);
    if (j.value("format", std::string()) != "l2sep-policy") throw ParseError(path.string(), "not a policy checkpoint");
    Policy p;
    try {
        for (const auto& s : j.at("A")) p.A.push_back(SeparatorConfig::from_string(s.get<std::string>()));
        p.update_rounds = j.at("update_rounds").get<std::vector<long>>();
        for (const auto& n : j.at("nets")) {
            const auto stored = n.value("arch_hash", std::uint64_t{0});
            if (stored != expected.hash())
                throw ValidationError(path.string() + ": architecture hash mismatch (checkpoint " +
                                      std::to_string(stored) + ", expected " + std::to_string(expected.hash()) + " for " +
                                      expected.to_string() + ")");
            p.nets.push_back(RewardNet::from_json(n));
        }
        for (const auto& s : j.at("states")) p.states.push_back(UcbState::from_json(s));
    } catch (const json::exception& e) {
        throw ParseError(path.string(), e.what());
    }
    return p;
}

}  // namespace l2sep
