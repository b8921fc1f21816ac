#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "../support/small_instances.hpp"
#include "l2sep/generators.hpp"
#include "l2sep/rng.hpp"
#include "l2sep/subspace.hpp"

using namespace l2sep;

namespace {

RewardTable random_table(std::size_t S, std::size_t K, std::uint64_t seed) {
    Rng rng(seed);
    RewardTable t;
    for (std::size_t i = 0; i < S; ++i) {
        t.configs.push_back(SeparatorConfig{static_cast<std::uint8_t>(i)});
        std::vector<double> row;
        for (std::size_t j = 0; j < K; ++j) row.push_back(rng.uniform(-1.5, 1.0));
        t.T.push_back(row);
    }
    for (std::size_t j = 0; j < K; ++j) t.instances.push_back("i" + std::to_string(j));
    t.failed.assign(S, std::vector<bool>(K, false));
    return t;
}

// direct definition, kept deliberately naive
double erm_oracle(const std::vector<std::size_t>& A, const RewardTable& t) {
    double total = 0.0;
    for (std::size_t j = 0; j < t.instances.size(); ++j) {
        std::vector<double> col;
        for (auto i : A) col.push_back(t.T[i][j]);
        total += *std::max_element(col.begin(), col.end());
    }
    return total / static_cast<double>(t.instances.size());
}

double best_subset(const RewardTable& t, std::size_t k) {
    const std::size_t S = t.configs.size();
    double best = -1e300;
    for (std::uint32_t m = 1; m < (1u << S); ++m) {
        if (static_cast<std::size_t>(__builtin_popcount(m)) != k) continue;
        std::vector<std::size_t> A;
        for (std::size_t i = 0; i < S; ++i)
            if (m >> i & 1) A.push_back(i);
        best = std::max(best, erm_oracle(A, t));
    }
    return best;
}

}  // namespace

TEST_CASE("initial configuration sampling") {
    CHECK(near_zero_masks(8, 3).size() == 93);
    CHECK(near_zero_masks(17, 3).size() == 834);
    CHECK(near_zero_masks(8, 0).size() == 1);

    // pivot is the config maximising the planted score: exactly bits {0,2,4,6}
    auto score = [](SeparatorConfig c) { return -static_cast<double>(hamming(c, SeparatorConfig{0x55})); };
    const auto S = sample_initial_configs(2000, 3, 11, score);
    std::set<std::uint8_t> u;
    for (auto c : S) u.insert(c.bits);
    CHECK(u.size() == S.size());
    for (std::uint32_t s = 0x55;; s = (s - 1) & 0x55) {
        CHECK(u.count(static_cast<std::uint8_t>(s)) == 1);
        if (s == 0) break;
    }
    for (int b = 0; b < 256; ++b) {
        const bool near_zero = __builtin_popcount(b) <= 3;
        const bool near_pivot = __builtin_popcount(b ^ 0x55) <= 3;
        const bool subset = (b & ~0x55) == 0;
        CHECK(static_cast<bool>(u.count(static_cast<std::uint8_t>(b))) == (near_zero || near_pivot || subset));
    }
    CHECK(sample_initial_configs(50, 3, 4, score) == sample_initial_configs(50, 3, 4, score));
    CHECK(sample_initial_configs(0, 3, 4, score).size() == 93);
}

TEST_CASE("ERM and instance-agnostic performance") {
    const auto t = random_table(6, 4, 3);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& r = t.T[i];
        CHECK(erm_performance({i}, t) == doctest::Approx((r[0] + r[1] + r[2] + r[3]) / 4).epsilon(1e-14));
        CHECK(instance_agnostic_perf(i, t) == doctest::Approx(erm_performance({i}, t)).epsilon(1e-14));
    }
    for (std::size_t a = 0; a < 6; ++a)
        for (std::size_t b = 0; b < 6; ++b)
            for (std::size_t c = 0; c < 6; ++c) {
                std::vector<std::size_t> A{a, b, c};
                CHECK(erm_performance(A, t) == doctest::Approx(erm_oracle(A, t)).epsilon(1e-14));
            }
    std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
    for (std::size_t i = 0; i < 6; ++i) CHECK(erm_performance({i}, t) <= erm_performance(all, t));

    RewardTable u = t;
    u.T[2] = {0.2, 0.2, 0.2, 0.2};
    CHECK(instance_agnostic_perf(2, u) == doctest::Approx(0.2));
    RewardTable p = t;
    for (auto& row : p.T) std::reverse(row.begin(), row.end());
    for (std::size_t i = 0; i < 6; ++i) CHECK(instance_agnostic_perf(i, p) == doctest::Approx(instance_agnostic_perf(i, t)));
}

TEST_CASE("monotone submodular fuzz") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t S = 4 + rng.index(9), K = 1 + rng.index(8);
        const auto t = random_table(S, K, 1000 + trial);
        std::vector<std::size_t> B, C;
        std::size_t outside = S;
        for (std::size_t i = 0; i < S; ++i) {
            const double u = rng.uniform();
            if (u < 0.3) {
                B.push_back(i);
                C.push_back(i);
            } else if (u < 0.6) {
                C.push_back(i);
            } else if (outside == S) {
                outside = i;
            }
        }
        if (outside == S) continue;
        auto f = [&](std::vector<std::size_t> A) { return A.empty() ? -1.5 : erm_performance(A, t); };
        auto plus = [&](std::vector<std::size_t> A) {
            A.push_back(outside);
            return A;
        };
        CHECK(f(B) <= f(C) + 1e-12);
        CHECK(f(plus(B)) - f(B) >= f(plus(C)) - f(C) - 1e-12);
    }
}

TEST_CASE("greedy restriction") {
    const auto t = random_table(8, 5, 21);
    const auto s = restrict_subspace(t, 3);
    REQUIRE(s.A.size() == 3);
    std::size_t top = 0;
    for (std::size_t i = 1; i < 8; ++i)
        if (instance_agnostic_perf(i, t) > instance_agnostic_perf(top, t)) top = i;
    CHECK(s.rows[0] == top);
    CHECK(erm_performance(s.rows, t) - (-1.5) >= (1 - 1 / std::exp(1.0)) * (best_subset(t, 3) - (-1.5)) - 1e-12);
    CHECK(s.steps.size() == 3);
    CHECK(s.steps[2].erm == doctest::Approx(erm_performance(s.rows, t)));

    double hi = -1e9;
    for (std::size_t i = 0; i < 8; ++i) hi = std::max(hi, instance_agnostic_perf(i, t));
    CHECK_THROWS_AS(restrict_subspace(t, 3, hi + 0.01), ConfigError);
    const double b = instance_agnostic_perf(top, t) - 0.3;
    const auto f = restrict_subspace(t, 8, b);
    for (auto r : f.rows) CHECK(instance_agnostic_perf(r, t) > b);
    CHECK(subspace_from_json(subspace_to_json(f)).rows == f.rows);
}

TEST_CASE("greedy guarantee exhaustive") {
    // ERM shifted by -r_min is a nonnegative monotone submodular function with f(empty) = 0
    int counterexamples = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t S = 5 + trial % 8, K = 2 + trial % 6, k = 1 + trial % 4;
        const auto t = random_table(S, K, 5000 + trial);
        const auto s = restrict_subspace(t, k);
        const double g = erm_performance(s.rows, t) + 1.5, opt = best_subset(t, k) + 1.5;
        if (g < (1 - 1 / std::exp(1.0)) * opt - 1e-12) ++counterexamples;
    }
    CHECK(counterexamples == 0);
}

TEST_CASE("tradeoff curve") {
    const auto t = random_table(10, 6, 8);
    const std::vector<double> th{-kInf, -0.6, -0.4};
    const auto rows = tradeoff_curve(t, th, 4);
    auto curve = [&](double b) {
        std::vector<TradeoffRow> r;
        for (const auto& x : rows)
            if (x.threshold == b) r.push_back(x);
        return r;
    };
    const auto loose = curve(-kInf);
    CHECK(loose.size() == 4);
    for (double b : {-0.6, -0.4}) {
        const auto c = curve(b);
        for (std::size_t k = 0; k < c.size(); ++k) {
            CHECK(loose[k].data.erm >= c[k].data.erm - 1e-12);
            CHECK(c[k].data.worst_agn > b);
        }
    }
    CHECK(tradeoff_to_csv(curve(-0.6)).find("threshold,size") == 0);
}

TEST_CASE("mistake model decomposition") {
    const auto train = random_table(7, 9, 1);
    const auto pop = random_table(7, 23, 2);
    for (double a : {0.0, 0.3, 1.0})
        for (double b : {0.0, 0.3, 1.0}) {
            for (std::vector<std::size_t> A : {std::vector<std::size_t>{0}, {1, 4}, {0, 2, 3, 6}}) {
                const double sim = simulate_mistake_model(A, train, pop, a, b);
                CHECK(std::abs(sim - mistake_model_closed_form(A, train, pop, a, b)) <= 1e-12);
                if (b == 0.0) {
                    double pagn = 0.0;
                    for (auto s : A) pagn += instance_agnostic_perf(s, pop);
                    pagn /= static_cast<double>(A.size());
                    CHECK(std::abs(sim - ((1 - a) * erm_performance(A, train) + a * pagn)) <= 1e-12);
                }
            }
        }
}

TEST_CASE("solver-backed reward table") {
    std::vector<MilpInstance> insts{generate_packing(8, 6, 1), generate_max_cut(6, 9, 2)};
    insts[0].name = "p";
    insts[1].name = "m";
    const std::vector<SeparatorConfig> S{SeparatorConfig::all_on(), SeparatorConfig::all_off(), SeparatorConfig{0x03}};
    const auto t = build_reward_table(S, insts, BnCParams{}, ConfigSchedule{}, 0);
    t.validate();
    CHECK(t.T[0][0] == 0.0);
    CHECK(t.T[0][1] == 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double t0 = solve(insts[j], default_schedule()).effort;
            const double tp = solve(insts[j], ConfigSchedule::constant(S[i])).effort;
            CHECK(t.T[i][j] == doctest::Approx(std::max(rel_improvement(t0, tp), -1.5)).epsilon(1e-12));
        }
    const auto par = build_reward_table(S, insts, BnCParams{}, ConfigSchedule{}, 0, 1, -1.5, 3);
    CHECK(par.T == t.T);
    const auto back = table_from_csv(table_to_csv(t), table_header_json(t));
    CHECK(back.T == t.T);
    CHECK(back.configs == t.configs);

    auto failing = [](std::size_t i, std::size_t, int) -> double {
        if (i == 1) throw NumericalError("boom");
        return 0.25;
    };
    const auto f = build_reward_table(S, {"a", "b"}, failing, 2);
    CHECK(f.T[1][0] == -1.5);
    CHECK(f.failed[1][1]);
    CHECK(f.T[2][1] == 0.25);
}
