#include "doctest.h"

#include <cmath>

#include "../support/small_instances.hpp"
#include "l2sep/bnc.hpp"
#include "l2sep/brute_force.hpp"
#include "l2sep/separators.hpp"

using namespace l2sep;

namespace {

struct Solved {
    MilpInstance inst;
    DualSimplex lp;
    LpSolution sol;
    explicit Solved(MilpInstance i) : inst(std::move(i)), lp(LpProblem::from_instance(inst)) { sol = lp.solve(); }
    SepContext ctx() const { return SepContext{inst, lp, sol}; }
};

MilpInstance binary_instance(std::vector<double> c, std::vector<SparseRow> rows) {
    MilpInstance m;
    m.objective = std::move(c);
    const auto n = m.objective.size();
    m.lb.assign(n, 0.0);
    m.ub.assign(n, 1.0);
    m.integer.assign(n, true);
    m.rows = std::move(rows);
    return m;
}

Cut make_cut(std::vector<int> idx, std::vector<double> coef, double rhs) {
    Cut c;
    c.idx = std::move(idx);
    c.coef = std::move(coef);
    c.rhs = rhs;
    return c;
}

}  // namespace

TEST_CASE("separator config bitmask") {
    CHECK(SeparatorConfig::all_on().bits == 0xFF);
    CHECK(SeparatorConfig::all_on().count() == 8);
    auto c = SeparatorConfig::from_string("10010000");
    CHECK(c.active(SeparatorId::GomoryFractional));
    CHECK(c.active(SeparatorId::KnapsackCover));
    CHECK_FALSE(c.active(SeparatorId::Clique));
    CHECK(c.to_string() == "10010000");
    c.set(SeparatorId::Clique, true);
    CHECK(c.count() == 3);
    CHECK(hamming(c, SeparatorConfig::all_off()) == 3);
    CHECK_THROWS_AS(SeparatorConfig::from_string("1001"), ConfigError);
    for (auto id : kAllSeparators) CHECK(separator_from_string(to_string(id)) == id);
}

TEST_CASE("clique cut on a triangle") {
    Solved s(binary_instance({-1, -1, -1}, {make_row({0, 1}, {1, 1}, RowSense::Le, 1),
                                            make_row({1, 2}, {1, 1}, RowSense::Le, 1),
                                            make_row({0, 2}, {1, 1}, RowSense::Le, 1)}));
    REQUIRE(s.sol.objective == doctest::Approx(-1.5));
    for (double v : s.sol.x) CHECK(v == doctest::Approx(0.5));
    const auto r = separate_clique(s.ctx());
    REQUIRE(r.cuts.size() == 1);
    const auto& c = r.cuts[0];
    CHECK(c.idx == std::vector<int>{0, 1, 2});
    CHECK(c.coef == std::vector<double>{1, 1, 1});
    CHECK(c.rhs == 1.0);
    CHECK(c.activity(s.sol.x) - c.rhs == doctest::Approx(0.5));
    CHECK(validate_cut(c, s.inst));
    // the triangle is also an odd cycle
    const auto o = separate_oddcycle(s.ctx());
    REQUIRE(o.cuts.size() == 1);
    CHECK(o.cuts[0].rhs == 1.0);
}

TEST_CASE("knapsack cover") {
    Solved s(binary_instance({-3, -4, -5}, {make_row({0, 1, 2}, {3, 4, 5}, RowSense::Le, 6)}));
    REQUIRE(s.sol.status == LpStatus::Optimal);
    const auto r = separate_knapsack_cover(s.ctx());
    REQUIRE_FALSE(r.cuts.empty());
    for (const auto& c : r.cuts) {
        CHECK(c.efficacy > 0);
        // minimal cover: dropping any member leaves weight <= 6
        double w = 0.0;
        const std::vector<double> a{3, 4, 5};
        for (int j : c.idx) w += a[j];
        CHECK(w > 6);
        for (int j : c.idx) CHECK(w - a[j] <= 6);
        CHECK(c.rhs == static_cast<double>(c.idx.size()) - 1);
        // enumeration of all 8 points
        for (int mask = 0; mask < 8; ++mask) {
            std::vector<double> x{double(mask & 1), double((mask >> 1) & 1), double((mask >> 2) & 1)};
            if (3 * x[0] + 4 * x[1] + 5 * x[2] <= 6) CHECK(c.activity(x) <= c.rhs + 1e-9);
        }
        CHECK(validate_cut(c, s.inst));
    }
}

TEST_CASE("gomory cuts are violated by the LP point") {
    // max x + y  s.t.  2x + 2y <= 3, x, y in {0, 1, 2}
    MilpInstance m;
    m.objective = {-1, -1.1};
    m.lb = {0, 0};
    m.ub = {2, 2};
    m.integer = {true, true};
    m.rows = {make_row({0, 1}, {2, 2}, RowSense::Le, 3)};
    Solved s(m);
    REQUIRE(s.sol.status == LpStatus::Optimal);
    for (auto f : {separate_gomory_fractional, separate_gomory_mir}) {
        const auto r = f(s.ctx());
        REQUIRE_FALSE(r.cuts.empty());
        for (const auto& c : r.cuts) {
            CHECK(c.activity(s.sol.x) > c.rhs + 1e-6);
            CHECK(validate_cut(c, s.inst));
        }
    }
}

TEST_CASE("cut efficacy and validation") {
    const auto c = make_cut({0}, {1.0}, 0.0);
    CHECK(cut_efficacy(c, {1.0}) == doctest::Approx(1.0));
    const auto d = make_cut({0, 1}, {1.0, 2.0}, 3.0);
    const auto d2 = make_cut({0, 1}, {2.0, 4.0}, 6.0);
    const std::vector<double> x{1.5, 1.5};
    CHECK(cut_efficacy(d, x) == doctest::Approx(cut_efficacy(d2, x)));
    CHECK(cut_efficacy(d, {0.0, 0.0}) <= 0.0);

    const auto inst = binary_instance({-3, -2}, {make_row({0, 1}, {2, 1}, RowSense::Le, 2)});
    CHECK(validate_cut(make_cut({}, {}, 0.0), inst));
    CHECK(validate_cut(make_cut({0, 1}, {1, 1}, 1.0), inst));
    CHECK_FALSE(validate_cut(make_cut({0}, {1}, 0.0), inst));  // excludes the optimum (1, 0)
}

TEST_CASE("select_cuts") {
    CutPool empty;
    CHECK(select_cuts(empty, {0.0}, {0.0}).empty());

    CutPool twin;
    twin.add(make_cut({0, 1}, {1, 1}, 1));
    twin.cuts.push_back(make_cut({0, 1}, {2, 2}, 2));
    const std::vector<double> x{1, 1}, obj{0, 0};
    const auto one = select_cuts(twin, x, obj);
    CHECK(one.size() == 1);

    // five cuts on distinct variables, efficacies 0.5 .. 2.5; objective parallel to x3 only
    CutPool pool;
    const std::vector<double> x5{0.5, 1.0, 1.5, 2.0, 2.5};
    const std::vector<double> c5{0, 0, 0, -1, 0};
    for (int j = 0; j < 5; ++j) pool.add(make_cut({j}, {1.0}, 0.0));
    for (auto& cut : pool.cuts) cut.origin = SeparatorId::Clique;
    // scores: 0.5, 1.0, 1.5, 2.0 - 0.1 = 1.9, 2.5
    const auto top = select_cuts(pool, x5, c5, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].idx[0] == 4);
    CHECK(top[1].idx[0] == 3);
    CHECK(top[1].score == doctest::Approx(1.9));
    CHECK(pool.applied_count(SeparatorId::Clique) == 2);
    CHECK(pool.generated_count(SeparatorId::Clique) == 5);
    CHECK(pool.cuts[4].applied);
    CHECK_FALSE(pool.cuts[0].applied);
    // applied cuts are not selected again
    const auto next = select_cuts(pool, x5, c5, 10);
    CHECK(next.size() == 3);
}

TEST_CASE("clean_cut drops tiny coefficients safely") {
    const auto inst = binary_instance({0, 0, 0}, {});
    auto c = make_cut({0, 1, 2}, {1.0, -1e-12, 1.0}, 1.0);
    REQUIRE(clean_cut(c, inst));
    CHECK(c.idx == std::vector<int>{0, 2});
    CHECK(c.rhs == doctest::Approx(1.0 + 1e-12));
    auto bad = make_cut({0, 1}, {1.0, 1e-8}, 1.0);
    CHECK_FALSE(clean_cut(bad, inst));
}

TEST_CASE("every separator emits valid cuts on small instances") {
    long total = 0;
    for (int k = 0; k < 60; ++k) {
        const auto inst = testsupport::small_instance(k, 99);
        BnCParams p;
        p.cut_observer = [&](const Cut& c) {
            ++total;
            CHECK(validate_cut(c, inst));
            CHECK(c.efficacy > 0.0);
        };
        solve(inst, default_schedule(), p);
    }
    CHECK(total > 100);
}

TEST_CASE("separators are deterministic") {
    const auto inst = testsupport::small_instance(2, 5);
    Solved a(inst), b(inst);
    for (auto id : kAllSeparators) {
        const auto ra = separate(id, a.ctx());
        const auto rb = separate(id, b.ctx());
        REQUIRE(ra.cuts.size() == rb.cuts.size());
        CHECK(ra.work == rb.work);
        for (std::size_t k = 0; k < ra.cuts.size(); ++k) {
            CHECK(ra.cuts[k].idx == rb.cuts[k].idx);
            CHECK(ra.cuts[k].coef == rb.cuts[k].coef);
            CHECK(ra.cuts[k].rhs == rb.cuts[k].rhs);
        }
    }
}
