#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "../support/graphs.hpp"
#include "l2sep/bandit.hpp"
#include "l2sep/generators.hpp"

using namespace l2sep;
using Eigen::VectorXd;

namespace fake {

// Scores are looked up per arm index; gradients are fixed vectors.
struct TableNet {
    std::vector<double> f;
    std::vector<VectorXd> g;
    double forward(int a) const { return f[a]; }
    std::size_t param_count() const { return g.empty() ? 0 : static_cast<std::size_t>(g[0].size()); }
};

inline double net_value_and_gradient(const TableNet& n, int a, VectorXd& grad) {
    grad = n.g[a];
    return n.f[a];
}

}  // namespace fake

namespace {

std::vector<SeparatorConfig> ten_arms() {
    std::vector<SeparatorConfig> A;
    Rng rng(77);
    std::set<std::uint8_t> seen;
    while (A.size() < 10) {
        const auto b = static_cast<std::uint8_t>(rng.uniform_int(1, 255));
        if (seen.insert(b).second) A.push_back(SeparatorConfig{b});
    }
    return A;
}

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
    std::vector<std::size_t> v;
    for (std::size_t i = a; i < b; ++i) v.push_back(i);
    return v;
}

double expected_regret(const SyntheticEnv& env, const BanditBuffer<VectorXd>& buf) {
    double r = 0.0;
    for (const auto& rec : buf.records)
        r += env.expected_reward(rec.instance_index, env.best_arm(rec.instance_index)) -
             env.expected_reward(rec.instance_index, rec.config);
    return r;
}

double random_regret(const SyntheticEnv& env, const BanditBuffer<VectorXd>& buf) {
    double r = 0.0;
    for (const auto& rec : buf.records) {
        const auto i = rec.instance_index;
        const double best = env.expected_reward(i, env.best_arm(i));
        for (auto s : env.arms()) r += (best - env.expected_reward(i, s)) / static_cast<double>(env.arms().size());
    }
    return r;
}

double accuracy(const SyntheticEnv& env, const Mlp& net, const std::vector<std::size_t>& test) {
    int hit = 0;
    for (auto i : test) {
        const auto c = infer_choices(env, i, std::vector<Mlp>{net}, {}, env.arms(), InferStrategy::Point);
        hit += c[0] == env.best_arm(i);
    }
    return static_cast<double>(hit) / static_cast<double>(test.size());
}

}  // namespace

TEST_CASE("bonus with gamma zero is the point estimate") {
    Mlp net(12, 5);
    net.init(3);
    auto st = UcbState::make(ZMode::Full, net.param_count(), net.head_offset(), 0.0);
    VectorXd x = VectorXd::LinSpaced(12, -1, 1);
    CHECK(ucb_score(net, st, x) == net.forward(x));
}

TEST_CASE("bonus at Z = lambda I has the closed form") {
    Mlp net(12, 5);
    net.init(4);
    VectorXd x = VectorXd::LinSpaced(12, -1, 2);
    const VectorXd g = net.gradient(x);
    for (auto mode : {ZMode::Full, ZMode::Diag}) {
        auto st = UcbState::make(mode, net.param_count(), net.head_offset(), 0.9375, 0.001);
        CHECK(st.bonus(g) == doctest::Approx(0.9375 * g.norm() / std::sqrt(0.001)).epsilon(1e-12));
    }
    auto st = UcbState::make(ZMode::LastLayer, net.param_count(), net.head_offset());
    const VectorXd tail = g.tail(static_cast<long>(net.param_count() - net.head_offset()));
    CHECK(st.dim == 6);
    CHECK(st.bonus(g) == doctest::Approx(0.9375 * tail.norm() / std::sqrt(0.001)).epsilon(1e-12));
}

TEST_CASE("bonus shrinks as an arm's own gradient accumulates") {
    Mlp net(10, 6);
    net.init(5);
    Rng rng(6);
    for (auto mode : {ZMode::Full, ZMode::Diag, ZMode::LastLayer}) {
        auto st = UcbState::make(mode, net.param_count(), net.head_offset());
        VectorXd x(10);
        for (int k = 0; k < 10; ++k) x[k] = rng.uniform(-1, 1);
        const VectorXd g = net.gradient(x);
        double prev = st.bonus(g);
        for (int t = 0; t < 10; ++t) {
            VectorXd other(10);
            for (int k = 0; k < 10; ++k) other[k] = rng.uniform(-1, 1);
            st.update(g);
            st.update(net.gradient(other));
            const double b = st.bonus(g);
            CHECK(b <= prev + 1e-15);
            CHECK(b >= 0.0);
            prev = b;
        }
        CHECK_NOTHROW(st.check());
    }
}

TEST_CASE("full-mode inverse tracks Z") {
    auto st = UcbState::make(ZMode::Full, 7, 0);
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        VectorXd v(7);
        for (int k = 0; k < 7; ++k) v[k] = rng.normal() * 3;
        st.update(v);
    }
    st.check();
    CHECK((st.Z * st.Zinv - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-8);
    const auto back = UcbState::from_json(st.to_json());
    CHECK(back.Z == st.Z);
    VectorXd v = VectorXd::Ones(7);
    CHECK(back.bonus(v) == doctest::Approx(st.bonus(v)).epsilon(1e-9));
}

TEST_CASE("a non positive definite state is reported") {
    auto st = UcbState::make(ZMode::Full, 3, 0);
    st.Z(0, 0) = -1.0;
    CHECK_THROWS_AS(st.check(), NumericalError);
    auto d = UcbState::make(ZMode::Diag, 3, 0);
    d.zdiag[1] = 0.0;
    CHECK_THROWS_AS(d.check(), NumericalError);
    CHECK_THROWS_AS(UcbState::make(ZMode::Full, 3, 0, 0.9, 0.0), ConfigError);
}

TEST_CASE("sample_arms edge cases") {
    fake::TableNet net;
    net.f = {0.1, -0.2, 0.3, 0.0, 0.05};
    for (int a = 0; a < 5; ++a) net.g.push_back(VectorXd::Unit(5, a));
    std::vector<int> arms = {0, 1, 2, 3, 4};
    auto st = UcbState::make(ZMode::Full, 5, 0);
    auto all = sample_arms(net, st, arms, 5, 1);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
    // every chosen arm's gradient entered Z
    CHECK(st.Z.diagonal().minCoeff() == doctest::Approx(1.001));
    CHECK_THROWS_AS(sample_arms(net, st, arms, 6, 1), ConfigError);

    net.f[3] = 1e6;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto s = UcbState::make(ZMode::Full, 5, 0, 0.0);
        const auto picks = sample_arms(net, s, arms, 2, seed);
        CHECK(std::find(picks.begin(), picks.end(), 3u) != picks.end());
        CHECK(picks[0] == 3u);
    }
}

TEST_CASE("sample_arms draw frequencies follow the softmax") {
    fake::TableNet net;
    net.f = {0.5, -0.3, 1.2, 0.0};
    for (int a = 0; a < 4; ++a) net.g.push_back(VectorXd::Unit(4, a) * (0.01 * (a + 1)));
    std::vector<int> arms = {0, 1, 2, 3};
    const auto base = UcbState::make(ZMode::Full, 4, 0);
    std::vector<double> U, w;
    double z = 0;
    for (int a = 0; a < 4; ++a) {
        U.push_back(ucb_score(net, base, a));
        w.push_back(std::exp(U.back()));
        z += w.back();
    }
    std::vector<int> count(4, 0);
    const int N = 10000;
    for (int seed = 0; seed < N; ++seed) {
        auto st = base;
        ++count[sample_arms(net, st, arms, 1, static_cast<std::uint64_t>(seed))[0]];
    }
    for (int a = 0; a < 4; ++a) CHECK(std::abs(count[a] / double(N) - w[a] / z) < 0.02);
}

TEST_CASE("argmax ties go to the lowest bitmask") {
    std::vector<SeparatorConfig> A = {SeparatorConfig{9}, SeparatorConfig{3}, SeparatorConfig{5}};
    CHECK(argmax_arm({1.0, 1.0, 1.0}, A) == 1);
    CHECK(argmax_arm({1.0, 2.0, 2.0}, A) == 1);
    CHECK(argmax_arm({3.0, 2.0, 2.0}, A) == 0);
}

TEST_CASE("epsilon-greedy extremes and random-pick rate") {
    fake::TableNet net;
    net.f = {0.4, 0.9, -0.1, 0.7, 0.2, 0.0};
    std::vector<int> arms = {0, 1, 2, 3, 4, 5};
    std::vector<SeparatorConfig> cfg;
    for (int a = 0; a < 6; ++a) cfg.push_back(SeparatorConfig{static_cast<std::uint8_t>(a + 1)});
    CHECK(epsilon_greedy_select(net, arms, cfg, 3, 0.0, 1) == std::vector<std::size_t>{1, 3, 0});

    std::vector<int> first(6, 0);
    std::size_t randoms = 0, total = 0;
    const int N = 10000;
    for (int seed = 0; seed < N; ++seed) {
        std::size_t r = 0;
        const auto p = epsilon_greedy_select(net, arms, cfg, 2, 1.0, static_cast<std::uint64_t>(seed), &r);
        CHECK(p[0] != p[1]);
        ++first[p[0]];
        CHECK(r == 2);
    }
    for (int a = 0; a < 6; ++a) CHECK(std::abs(first[a] / double(N) - 1.0 / 6) < 0.02);

    for (int seed = 0; seed < N; ++seed) {
        std::size_t r = 0;
        epsilon_greedy_select(net, arms, cfg, 1, 0.1, static_cast<std::uint64_t>(seed) + 99, &r);
        randoms += r;
        ++total;
    }
    CHECK(std::abs(randoms / double(total) - 0.1) < 0.01);
}

TEST_CASE("run config validation") {
    TrainRunConfig c;
    CHECK_NOTHROW(c.validate(8));
    CHECK_THROWS_AS(c.validate(7), ConfigError);
    c.k = 3;
    CHECK_THROWS_AS(c.validate(8), ConfigError);
    c.update_rounds = {0, 5, 3};
    CHECK_THROWS_AS(c.validate(8), ConfigError);
    c.update_rounds = {0, 5, 8};
    CHECK_NOTHROW(c.validate(8));
    c.k = 4;
    CHECK_THROWS_AS(c.validate(8), ConfigError);
    TrainRunConfig d;
    d.z_mode = ZMode::LastLayer;
    d.T = 5;
    const auto back = TrainRunConfig::from_json(d.to_json());
    CHECK(back.T == 5);
    CHECK(back.z_mode == ZMode::LastLayer);
    CHECK_THROWS_AS(TrainRunConfig::from_json({{"Tx", 3}}), ConfigError);
}

TEST_CASE("synthetic bandit: neural UCB beats random and epsilon-greedy sits between") {
    const auto A = ten_arms();
    SyntheticEnv env(A, 400, 3, 0.05, 11);
    const auto train = range(0, 350), test = range(350, 400);

    TrainRunConfig cfg;
    cfg.T = 2000;
    cfg.P = 1;
    cfg.D = 1;
    cfg.k = 1;
    cfg.update_rounds = {0};
    cfg.steps_per_epoch = 4;
    cfg.lr = 3e-3;
    Mlp net(env.feature_dim(), 16);
    net.init(12);

    cfg.selection = ArmSelection::EpsilonGreedy;
    const auto eps = neural_ucb_train(env, train, A, net, std::vector<Mlp>{}, cfg, 13);
    const double r_eps = expected_regret(env, eps.buffer);
    const double r_rand = random_regret(env, eps.buffer);
    CHECK(r_eps <= r_rand);

    cfg.selection = ArmSelection::Argmax;
    for (auto mode : {ZMode::Full, ZMode::Diag, ZMode::LastLayer}) {
        cfg.z_mode = mode;
        const auto ucb = neural_ucb_train(env, train, A, net, std::vector<Mlp>{}, cfg, 13);
        CHECK(ucb.buffer.size() == 2000);
        const double r_ucb = expected_regret(env, ucb.buffer);
        const double acc = accuracy(env, ucb.net, test);
        MESSAGE(std::string(to_string(mode)) << ": regret ucb " << r_ucb << " eps " << r_eps << " random " << r_rand
                                << ", best-arm accuracy " << acc);
        CHECK(r_ucb <= 0.5 * r_rand);
        CHECK(acc >= 0.9);
        CHECK_NOTHROW(ucb.state.check());
        // the full matrix keeps the bonus large in unexplored directions of the 545 parameters
        if (mode != ZMode::Full) CHECK(r_eps >= r_ucb);
    }
}

TEST_CASE("synthetic bandit: softmax sampling with the default epoch shape recovers the best arm") {
    const auto A = ten_arms();
    SyntheticEnv env(A, 250, 3, 0.05, 21);
    const auto train = range(0, 200), test = range(200, 250);
    TrainRunConfig cfg;
    cfg.k = 1;
    cfg.update_rounds = {0};
    cfg.lr = 3e-3;
    cfg.steps_per_epoch = 30;
    Mlp net(env.feature_dim(), 16);
    net.init(22);
    const auto out = neural_ucb_train(env, train, A, net, std::vector<Mlp>{}, cfg, 23);
    CHECK(out.buffer.size() == 70u * 6u * 8u);
    CHECK(out.log.size() == 70u);
    CHECK(out.log.back().buffer_size == 3360u);
    const double acc = accuracy(env, out.net, test);
    MESSAGE("best-arm accuracy " << acc);
    CHECK(acc >= 0.9);
}

TEST_CASE("a single arm reduces training to regression on that arm") {
    const std::vector<SeparatorConfig> A = {SeparatorConfig{6}};
    SyntheticEnv env(A, 30, 2, 0.05, 31);
    TrainRunConfig cfg;
    cfg.T = 5;
    cfg.P = 3;
    cfg.D = 1;
    cfg.k = 1;
    cfg.update_rounds = {0};
    Mlp net(env.feature_dim(), 4);
    net.init(1);
    const auto out = neural_ucb_train(env, range(0, 30), A, net, std::vector<Mlp>{}, cfg, 2);
    CHECK(out.buffer.size() == 15);
    for (const auto& r : out.buffer.records) CHECK(r.config == A[0]);
    CHECK(infer_choices(env, 3, std::vector<Mlp>{out.net}, {}, A, InferStrategy::Point) ==
          std::vector<SeparatorConfig>{A[0]});
}

TEST_CASE("inference with a zero network picks the lowest bitmask") {
    const std::vector<SeparatorConfig> A = {SeparatorConfig{40}, SeparatorConfig{7}, SeparatorConfig{12}};
    SyntheticEnv env(A, 5, 2, 0.05, 41, 0.0);
    Mlp zero(env.feature_dim(), 4);
    const auto c = infer_choices(env, 0, std::vector<Mlp>{zero}, {}, A, InferStrategy::Point);
    CHECK(c == std::vector<SeparatorConfig>{SeparatorConfig{7}});
}

namespace {

std::vector<MilpInstance> small_packing(int count, std::uint64_t seed) {
    std::vector<MilpInstance> v;
    for (int k = 0; k < count; ++k) v.push_back(generate_packing(10, 8, seed + static_cast<std::uint64_t>(k)));
    return v;
}

std::vector<SeparatorConfig> small_A() {
    return {SeparatorConfig{0}, SeparatorConfig{1}, SeparatorConfig{2}, SeparatorConfig{3}};
}

}  // namespace

TEST_CASE("branch-and-cut environment rewards and contexts") {
    BnCParams params;
    BncEnv env(small_packing(4, 500), params, {0, 5});
    CHECK(env.num_updates() == 2);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto r0 = solve(env.instance(i), default_schedule(), params);
        CHECK(env.references()[i].value == std::max(r0.effort, 1.0));
        const SeparatorConfig s{3};
        const double rew = env.reward(i, {}, s, 0);
        BnCParams p = params;
        p.reference_effort = env.references()[i].effort;
        const auto r = solve(env.instance(i), ConfigSchedule::constant(s), p);
        const double d = r.status == SolveStatus::HardStop ? -3.0 : (env.references()[i].value - r.effort) / env.references()[i].value;
        CHECK(rew == doctest::Approx(std::max(d, kRewardFloor)).epsilon(1e-12));
        CHECK(rew >= kRewardFloor);
    }
    const auto sched = env.schedule({SeparatorConfig{1}, SeparatorConfig{2}});
    REQUIRE(sched.updates.size() == 2);
    CHECK(sched.updates[0].first == 0);
    CHECK(sched.updates[1].first == 5);
    CHECK(env.schedule({}) == default_schedule());

    const auto g = env.context(0, {});
    const auto g1 = env.with_arm(g, SeparatorConfig{5});
    CHECK(g1.S(0, 0) == 1.0);
    CHECK(g1.S(1, 0) == 0.0);
    CHECK(g1.S(2, 0) == 1.0);
    CHECK(g.fingerprint() != g1.fingerprint());
    const auto later = env.context(0, {SeparatorConfig{1}});
    CHECK(later.num_vars() == g.num_vars());
}

TEST_CASE("hard-stopped solves become r_min rewards") {
    BnCParams params;
    auto inst = small_packing(1, 900);
    BncEnv env(inst, params, {0}, std::vector<Reference>{Reference{1.0, 1.0}});
    CHECK(env.reward(0, {}, SeparatorConfig{255}, 0) == kRewardFloor);
}

TEST_CASE("gap objective rewards are gap improvements under the effort limit") {
    BnCParams params;
    auto insts = small_packing(3, 950);
    EnvOptions opts;
    opts.gap_effort_limit = 150.0;
    BncEnv env(insts, params, {0}, opts);
    for (std::size_t i = 0; i < insts.size(); ++i) {
        BnCParams p = params;
        p.effort_limit = 150.0;
        const auto d = solve(insts[i], default_schedule(), p);
        CHECK(env.references()[i].value == d.gap);
        const auto r = solve(insts[i], ConfigSchedule::constant(SeparatorConfig{0}), p);
        CHECK(env.reward(i, {}, SeparatorConfig{0}, 0) == gap_improvement(d.gap, r.gap));
    }
}

TEST_CASE("forward training on the solver: buffer shape, freezing and schedules") {
    BnCParams params;
    BncEnv env(small_packing(6, 700), params, {0, 5});
    const auto A = small_A();
    TrainRunConfig cfg;
    cfg.T = 2;
    cfg.P = 2;
    cfg.D = 2;
    cfg.k = 2;
    cfg.update_rounds = {0, 5};
    cfg.steps_per_epoch = 2;
    cfg.batch = 4;
    NetArch arch;
    arch.hidden = 8;
    arch.heads = 2;
    RewardNet net(arch);
    const auto outs = forward_training(env, range(0, 6), A, net, cfg, 5);
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].buffer.size() == 8);
    CHECK(outs[1].buffer.size() == 8);
    for (const auto& r : outs[1].buffer.records) {
        CHECK(r.update == 1);
        CHECK(r.reward >= kRewardFloor);
        CHECK(std::find(A.begin(), A.end(), r.config) != A.end());
    }
    CHECK(outs[0].state.mode == auto_z_mode(net.param_count()));

    // net 1 alone, with the same seeds, is what forward training produced and kept
    RewardNet fresh = net;
    reinit(fresh, mix_seed(5, 1000));
    const auto alone = neural_ucb_train(env, range(0, 6), A, fresh, std::vector<RewardNet>{}, cfg, mix_seed(5, 0));
    CHECK(alone.net.params() == outs[0].net.params());

    TrainRunConfig one = cfg;
    one.k = 1;
    const auto k1 = forward_training(env, range(0, 6), A, net, one, 5);
    REQUIRE(k1.size() == 1);
    CHECK(k1[0].net.params() == outs[0].net.params());

    std::vector<RewardNet> nets = {outs[0].net, outs[1].net};
    const auto sched = infer_schedule(env, 0, nets, {}, A, InferStrategy::Point);
    REQUIRE(sched.updates.size() == 2);
    CHECK(sched.updates[0].first == 0);
    CHECK(sched.updates[1].first == 5);
    for (const auto& u : sched.updates) CHECK(std::find(A.begin(), A.end(), u.second) != A.end());
    std::vector<UcbState> states = {outs[0].state, outs[1].state};
    const auto su = infer_schedule(env, 0, nets, states, A, InferStrategy::Ucb);
    CHECK(su.updates.size() == 2);

    const std::vector<SeparatorConfig> single = {SeparatorConfig{6}};
    const auto s1 = infer_schedule(env, 1, nets, {}, single, InferStrategy::Point);
    for (const auto& u : s1.updates) CHECK(u.second == single[0]);

    SUBCASE("rewards do not depend on the worker count") {
        TrainRunConfig par = cfg;
        par.k = 1;
        par.jobs = 3;
        const auto p = forward_training(env, range(0, 6), A, net, par, 5);
        CHECK(p[0].buffer.to_jsonl() == k1[0].buffer.to_jsonl());
        CHECK(p[0].net.params() == k1[0].net.params());
    }

    SUBCASE("policy checkpoint round trip") {
        const auto path = std::filesystem::temp_directory_path() / "l2sep_policy_test.json";
        save_policy(path, nets, states, A, {0, 5});
        const auto pol = load_policy(path, arch);
        CHECK(pol.A == A);
        CHECK(pol.update_rounds == std::vector<long>{0, 5});
        REQUIRE(pol.nets.size() == 2);
        CHECK(pol.nets[1].params() == nets[1].params());
        CHECK(pol.states[0].zdiag == states[0].zdiag);
        NetArch other = arch;
        other.hidden = 16;
        CHECK_THROWS_AS(load_policy(path, other), ValidationError);
        std::filesystem::remove(path);
    }
}

TEST_CASE("buffer records serialise as JSON lines") {
    BufferRecord r{"inst_3", 3, 1, SeparatorConfig{0x81}, 12345678901234567ULL, -0.25};
    const auto back = record_from_json(nlohmann::json::parse(record_to_json(r).dump()));
    CHECK(back.instance == "inst_3");
    CHECK(back.instance_index == 3);
    CHECK(back.update == 1);
    CHECK(back.config == SeparatorConfig{0x81});
    CHECK(back.fingerprint == 12345678901234567ULL);
    CHECK(back.reward == -0.25);
}
