#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "../support/small_instances.hpp"
#include "l2sep/bnc.hpp"
#include "l2sep/brute_force.hpp"

using namespace l2sep;

namespace {

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> o(v.size());
        for (std::size_t k = 0; k < o.size(); ++k) o[k] = k;
        std::sort(o.begin(), o.end(), [&](std::size_t p, std::size_t q) { return v[p] < v[q]; });
        std::vector<double> r(v.size());
        for (std::size_t k = 0; k < o.size(); ++k) r[o[k]] = static_cast<double>(k);
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double d2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d2 += (ra[k] - rb[k]) * (ra[k] - rb[k]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST_CASE("schedule semantics") {
    ConfigSchedule s;
    s.updates = {{0, SeparatorConfig{0x01}}, {5, SeparatorConfig{0x02}}};
    CHECK(s.at(0).bits == 0x01);
    CHECK(s.at(4).bits == 0x01);
    CHECK(s.at(5).bits == 0x02);
    CHECK(s.at(500).bits == 0x02);
    s.validate();

    ConfigSchedule late;
    late.updates = {{3, SeparatorConfig{0x04}}};
    CHECK_THROWS_AS(late.validate(), ConfigError);
    late.prefix = SeparatorConfig::all_on();
    late.validate();
    CHECK(late.at(2).bits == 0xFF);
    CHECK(late.at(3).bits == 0x04);

    ConfigSchedule bad;
    bad.updates = {{0, SeparatorConfig{}}, {0, SeparatorConfig{}}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    CHECK(default_schedule().updates.size() == 1);
    CHECK(default_schedule().at(0).bits == 0xFF);
    CHECK(schedule_from_json(schedule_to_json(s)) == s);
    CHECK(schedule_from_json(schedule_to_json(late)) == late);
}

TEST_CASE("default schedule equals explicit all-on") {
    const auto inst = testsupport::small_instance(1, 3);
    const auto a = solve(inst, default_schedule());
    const auto b = solve(inst, ConfigSchedule::constant(SeparatorConfig::all_on()));
    CHECK(a.effort == b.effort);
    CHECK(a.nodes == b.nodes);
}

TEST_CASE("all-off on a pure binary 8-variable instance") {
    const auto inst = generate_bin_packing(8, 3, 12);
    const auto r = solve(inst, ConfigSchedule::constant(SeparatorConfig::all_off()));
    CHECK(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(brute_force_opt(inst).objective).epsilon(1e-9));
    CHECK(r.gap <= 1e-9);
    for (const auto& c : r.sep) CHECK(c.applied == 0);
}

TEST_CASE("solve matches enumeration for random configurations") {
    for (int k = 0; k < 40; ++k) {
        const auto inst = testsupport::small_instance(k, 7);
        const auto opt = brute_force_opt(inst);
        Rng rng(static_cast<std::uint64_t>(k));
        for (int t = 0; t < 5; ++t) {
            const SeparatorConfig cfg{static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
            const auto r = solve(inst, ConfigSchedule::constant(cfg));
            CAPTURE(k);
            CAPTURE(cfg.to_string());
            REQUIRE(r.status == SolveStatus::Optimal);
            CHECK(std::abs(r.objective - opt.objective) <= 1e-6);
            CHECK(inst.is_feasible(r.solution));
            CHECK(r.bound <= r.objective + 1e-6);
        }
    }
}

TEST_CASE("cuts reduce the tree on knapsack-style instances") {
    std::vector<long> on, off;
    for (int s = 0; s < 30; ++s) {
        const auto inst = generate_bin_packing(20, 4, 500 + s);
        on.push_back(solve(inst, default_schedule()).nodes);
        off.push_back(solve(inst, ConfigSchedule::constant(SeparatorConfig::all_off())).nodes);
    }
    std::sort(on.begin(), on.end());
    std::sort(off.begin(), off.end());
    CHECK(on[15] <= off[15]);
}

TEST_CASE("gap limit") {
    const auto inst = generate_packing(25, 25, 3);
    BnCParams p;
    p.gap_limit = 0.1;
    const auto r = solve(inst, default_schedule(), p);
    if (r.status == SolveStatus::GapReached) CHECK(r.gap <= 0.1 + 1e-9);
    CHECK(r.bound <= r.objective + 1e-6);
    p.gap_limit = 0.0;
    const auto full = solve(inst, default_schedule(), p);
    CHECK(full.status == SolveStatus::Optimal);
    CHECK(full.gap <= 1e-9);
}

TEST_CASE("effort accounting") {
    SolveResult r;
    CHECK(effort(r) == 0.0);
    r.pivots = 10;
    r.nodes = 3;
    r.sep[2].calls = 4;
    r.sep[2].work = 1000;
    const double e = effort(r);
    CHECK(e > 0.0);
    SolveResult d = r;
    d.pivots *= 2;
    d.nodes *= 2;
    d.sep[2].calls *= 2;
    d.sep[2].work *= 2;
    CHECK(effort(d) == doctest::Approx(2 * e));
    SolveResult more = r;
    ++more.pivots;
    CHECK(effort(more) > e);
    more = r;
    ++more.nodes;
    CHECK(effort(more) > e);
    more = r;
    ++more.sep[5].calls;
    CHECK(effort(more) > e);
}

TEST_CASE("effort tracks wall time across instances") {
    std::vector<double> eff, wall;
    for (int k = 0; k < 20; ++k) {
        const auto inst = generate_packing(10 + 2 * k, 10 + 2 * k, 40 + k);
        BnCParams p;
        p.node_limit = 400;
        double best = kInf;
        SolveResult r;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            r = solve(inst, default_schedule(), p);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        eff.push_back(r.effort);
        wall.push_back(best);
    }
    CHECK(spearman(eff, wall) > 0.8);
}

TEST_CASE("determinism and limits") {
    const auto inst = generate_packing(20, 20, 9);
    const auto a = solve(inst, default_schedule());
    const auto b = solve(inst, default_schedule());
    CHECK(a.nodes == b.nodes);
    CHECK(a.pivots == b.pivots);
    CHECK(a.effort == b.effort);
    CHECK(a.objective == b.objective);
    for (int k = 0; k < kNumSeparators; ++k) CHECK(a.sep[k].work == b.sep[k].work);

    BnCParams p;
    p.reference_effort = a.effort / 10.0;
    const auto h = solve(inst, default_schedule(), p);
    CHECK(h.status == SolveStatus::HardStop);
    CHECK(h.effort > 3.0 * p.reference_effort);
    CHECK(h.bound <= a.objective + 1e-6);

    BnCParams q;
    q.node_limit = 2;
    CHECK(solve(inst, ConfigSchedule::constant(SeparatorConfig::all_off()), q).status == SolveStatus::NodeLimit);
}

TEST_CASE("snapshots before update rounds") {
    const auto inst = generate_packing(20, 20, 4);
    BnCParams p;
    p.snapshot_rounds = {0, 3};
    const auto r = solve(inst, default_schedule(), p);
    REQUIRE(r.snapshots.size() == 2);
    CHECK(r.snapshots[0].round == 0);
    CHECK(r.snapshots[0].reached);
    CHECK(static_cast<int>(r.snapshots[0].rows.size()) == inst.num_rows());
    CHECK(r.snapshots[1].round == 3);
    CHECK(r.snapshots[1].rows.size() >= r.snapshots[0].rows.size());
    p.stop_after_snapshots = true;
    const auto s = solve(inst, default_schedule(), p);
    CHECK(s.status == SolveStatus::Interrupted);
    CHECK(s.snapshots.size() == 2);
    CHECK(s.rounds == 3);
}

TEST_CASE("infeasible instance") {
    MilpInstance m;
    m.objective = {1, 1};
    m.lb = {0, 0};
    m.ub = {1, 1};
    m.integer = {true, true};
    m.rows = {make_row({0, 1}, {2, 2}, RowSense::Eq, 1)};
    const auto r = solve(m, default_schedule());
    CHECK(r.status == SolveStatus::Infeasible);
}
