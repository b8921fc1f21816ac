#include "doctest.h"

#include <cmath>

#include "l2sep/lp.hpp"
#include "l2sep/rng.hpp"
#include "lp_oracle.hpp"

using namespace l2sep;

namespace {

LpProblem random_lp(Rng& rng, int n, int m) {
    LpProblem p;
    std::vector<double> x0(n);
    for (int j = 0; j < n; ++j) {
        p.col_lb.push_back(-static_cast<double>(rng.uniform_int(0, 3)));
        p.col_ub.push_back(static_cast<double>(rng.uniform_int(0, 5)));
        p.objective.push_back(rng.uniform(-5, 5));
        x0[j] = rng.uniform(p.col_lb[j], p.col_ub[j]);
    }
    for (int i = 0; i < m; ++i) {
        SparseRow r;
        for (int j = 0; j < n; ++j)
            if (rng.bernoulli(0.6)) {
                r.idx.push_back(j);
                r.coef.push_back(static_cast<double>(rng.uniform_int(-5, 5)));
            }
        const double act = r.activity(x0);
        const int s = static_cast<int>(rng.uniform_int(0, 5));
        // mostly feasible at x0, sometimes shifted to make the LP infeasible
        const double shift = rng.bernoulli(0.1) ? rng.uniform(-6, 6) : 0.0;
        if (s <= 2) {
            r.sense = RowSense::Le;
            r.rhs = act + rng.uniform(0, 2) + shift;
        } else if (s <= 4) {
            r.sense = RowSense::Ge;
            r.rhs = act - rng.uniform(0, 2) + shift;
        } else {
            r.sense = RowSense::Eq;
            r.rhs = act + shift;
        }
        p.rows.push_back(r);
    }
    p.num_base_rows = m;
    return p;
}

void check_certificate(const LpProblem& p, const LpSolution& s) {
    const int n = p.num_cols(), m = p.num_rows();
    REQUIRE(s.status == LpStatus::Optimal);
    for (int j = 0; j < n; ++j) {
        CHECK(s.x[j] >= p.col_lb[j] - 1e-7);
        CHECK(s.x[j] <= p.col_ub[j] + 1e-7);
    }
    for (int i = 0; i < m; ++i) {
        const double a = p.rows[i].activity(s.x);
        CHECK(a == doctest::Approx(s.row_activity[i]).epsilon(1e-9));
        if (p.rows[i].sense != RowSense::Ge) CHECK(a <= p.rows[i].rhs + 1e-7);
        if (p.rows[i].sense != RowSense::Le) CHECK(a >= p.rows[i].rhs - 1e-7);
    }
    // c'x = y'(Ax) + d'x and complementary slackness on the column bounds
    double rhs = 0.0;
    for (int i = 0; i < m; ++i) rhs += s.duals[i] * s.row_activity[i];
    for (int j = 0; j < n; ++j) {
        double d = p.objective[j];
        for (int i = 0; i < m; ++i)
            for (std::size_t k = 0; k < p.rows[i].idx.size(); ++k)
                if (p.rows[i].idx[k] == j) d -= s.duals[i] * p.rows[i].coef[k];
        CHECK(d == doctest::Approx(s.reduced_costs[j]).epsilon(1e-6));
        rhs += d * s.x[j];
        if (d > 1e-6 && p.col_lb[j] < p.col_ub[j]) CHECK(s.x[j] == doctest::Approx(p.col_lb[j]).epsilon(1e-6));
        if (d < -1e-6 && p.col_lb[j] < p.col_ub[j]) CHECK(s.x[j] == doctest::Approx(p.col_ub[j]).epsilon(1e-6));
    }
    CHECK(rhs == doctest::Approx(s.objective).epsilon(1e-6));
}

}  // namespace

TEST_CASE("lp: single binding row") {
    LpProblem p;
    p.objective = {-1.0, -1.0};
    p.col_lb = {0, 0};
    p.col_ub = {1, 1};
    p.rows = {make_row({0, 1}, {1, 1}, RowSense::Le, 1.5)};
    p.num_base_rows = 1;
    const auto s = solve_lp(p);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.objective == doctest::Approx(-1.5));
    check_certificate(p, s);
}

TEST_CASE("lp: infeasible box") {
    LpProblem p;
    p.objective = {1.0};
    p.col_lb = {2};
    p.col_ub = {3};
    p.rows = {make_row({0}, {1}, RowSense::Le, 1.0)};
    CHECK(solve_lp(p).status == LpStatus::Infeasible);
    p.rows = {make_row({0}, {1}, RowSense::Ge, 1.0), make_row({0}, {1}, RowSense::Le, 2.5)};
    CHECK(solve_lp(p).objective == doctest::Approx(2.0));
}

TEST_CASE("lp: random 8x8 problems agree with the tableau oracle") {
    Rng rng(2024);
    int feasible = 0;
    for (int t = 0; t < 300; ++t) {
        const auto p = random_lp(rng, 8, 8);
        const auto s = solve_lp(p);
        const auto o = oracle::tableau_simplex(p);
        CAPTURE(t);
        REQUIRE(s.status != LpStatus::IterationLimit);
        CHECK((s.status == LpStatus::Optimal) == o.feasible);
        if (o.feasible && s.status == LpStatus::Optimal) {
            ++feasible;
            CHECK(s.objective == doctest::Approx(o.objective).epsilon(1e-6).scale(1.0));
            check_certificate(p, s);
        }
    }
    CHECK(feasible > 150);
}

TEST_CASE("lp: optimum is below every sampled feasible point") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const auto p = random_lp(rng, 6, 4);
        const auto s = solve_lp(p);
        if (s.status != LpStatus::Optimal) continue;
        for (int k = 0; k < 200; ++k) {
            std::vector<double> x(6);
            for (int j = 0; j < 6; ++j) x[j] = rng.uniform(p.col_lb[j], p.col_ub[j]);
            bool ok = true;
            for (const auto& r : p.rows) {
                const double a = r.activity(x);
                ok = ok && (r.sense == RowSense::Ge || a <= r.rhs) && (r.sense == RowSense::Le || a >= r.rhs);
            }
            if (!ok) continue;
            double z = 0.0;
            for (int j = 0; j < 6; ++j) z += p.objective[j] * x[j];
            CHECK(s.objective <= z + 1e-9);
        }
    }
}

TEST_CASE("lp: warm resolve after row additions matches cold solve") {
    Rng rng(77);
    int cases = 0, fewer = 0, checked = 0;
    while (cases < 200) {
        const auto p = random_lp(rng, 8, 6);
        const auto s = solve_lp(p);
        if (s.status != LpStatus::Optimal) continue;
        ++cases;
        std::vector<SparseRow> cuts;
        const int k = static_cast<int>(rng.uniform_int(1, 3));
        for (int c = 0; c < k; ++c) {
            SparseRow r;
            for (int j = 0; j < 8; ++j)
                if (rng.bernoulli(0.5)) {
                    r.idx.push_back(j);
                    r.coef.push_back(rng.uniform(-3, 3));
                }
            r.sense = RowSense::Le;
            r.rhs = r.activity(s.x) - rng.uniform(0.01, 1.0);  // violated by x*
            cuts.push_back(r);
        }
        auto q = p;
        for (const auto& r : cuts) q.append_row(r);
        const auto warm = resolve_with_rows(p, cuts, s.basis);
        const auto cold = solve_lp(q);
        CAPTURE(cases);
        REQUIRE(warm.status == cold.status);
        if (cold.status == LpStatus::Optimal) {
            ++checked;
            CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-6));
            CHECK(warm.objective >= s.objective - 1e-9);
            if (warm.pivot_count <= cold.pivot_count) ++fewer;
        }
        CHECK(oracle::tableau_simplex(q).feasible == (cold.status == LpStatus::Optimal));
    }
    CHECK(checked > 50);
    CHECK(fewer * 2 > checked);
}

TEST_CASE("lp: empty and non-binding additions") {
    Rng rng(3);
    LpProblem p;
    do {
        p = random_lp(rng, 5, 4);
    } while (solve_lp(p).status != LpStatus::Optimal);
    const auto s = solve_lp(p);
    const auto same = resolve_with_rows(p, {}, s.basis);
    CHECK(same.pivot_count == 0);
    CHECK(same.x == s.x);
    SparseRow loose = make_row({0, 1}, {1, 1}, RowSense::Le, 1000.0);
    const auto w = resolve_with_rows(p, {loose}, s.basis);
    CHECK(w.pivot_count == 0);
    for (int j = 0; j < 5; ++j) CHECK(w.x[j] == doctest::Approx(s.x[j]));
}

TEST_CASE("lp: tableau rows") {
    LpProblem p;
    p.objective = {1.0, 1.0, 1.0};
    p.col_lb = {0, 0, 0};
    p.col_ub = {4, 4, 4};
    p.rows = {make_row({0, 1, 2}, {2, -1, 3}, RowSense::Le, 10.0), make_row({0, 2}, {1, 1}, RowSense::Le, 6.0)};
    DualSimplex slack(p);
    // the slack basis is optimal here; each logical's tableau row is its original row
    const auto s0 = slack.solve();
    CHECK(s0.pivot_count == 0);
    const auto t = slack.tableau_row(3);
    CHECK(t[0] == 2.0);
    CHECK(t[1] == -1.0);
    CHECK(t[2] == 3.0);
    CHECK(t[3] == 0.0);
    CHECK_THROWS_AS(slack.tableau_row(0), ValidationError);

    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const auto q = random_lp(rng, 7, 6);
        DualSimplex ds(q);
        const auto s = ds.solve();
        if (s.status != LpStatus::Optimal) continue;
        const int nv = 7 + 6;
        for (int v = 0; v < nv; ++v) {
            if (!ds.is_basic(v)) continue;
            const auto row = ds.tableau_row(v);
            const auto row2 = tableau_row(q, s, v);
            for (int k = 0; k < nv; ++k) CHECK(std::abs(row[k] - row2[k]) <= 1e-9);
            for (int sample = 0; sample < 5; ++sample) {
                std::vector<double> x(7), full(nv);
                for (int j = 0; j < 7; ++j) full[j] = x[j] = rng.uniform(-3, 3);
                for (int i = 0; i < 6; ++i) full[7 + i] = q.rows[i].activity(x);
                double lhs = 0.0;
                for (int k = 0; k < nv; ++k) lhs += row[k] * full[k];
                CHECK(lhs == doctest::Approx(full[v]).epsilon(1e-9).scale(1.0));
            }
        }
    }
}

TEST_CASE("lp: bound changes and row removal") {
    Rng rng(8);
    for (int t = 0; t < 60; ++t) {
        const auto p = random_lp(rng, 6, 5);
        DualSimplex ds(p);
        if (ds.solve().status != LpStatus::Optimal) continue;
        auto lb = p.col_lb, ub = p.col_ub;
        const int j = static_cast<int>(rng.index(6));
        ub[j] = std::floor((lb[j] + ub[j]) / 2);
        ds.set_col_bounds(lb, ub);
        const auto w = ds.solve();
        auto q = p;
        q.col_ub = ub;
        const auto o = oracle::tableau_simplex(q);
        CHECK((w.status == LpStatus::Optimal) == o.feasible);
        if (o.feasible && w.status == LpStatus::Optimal) CHECK(w.objective == doctest::Approx(o.objective).epsilon(1e-6));

        ds.remove_rows({0, 2});
        auto r = q;
        r.rows.erase(r.rows.begin() + 2);
        r.rows.erase(r.rows.begin());
        const auto w2 = ds.solve();
        const auto o2 = oracle::tableau_simplex(r);
        CHECK((w2.status == LpStatus::Optimal) == o2.feasible);
        if (o2.feasible && w2.status == LpStatus::Optimal) CHECK(w2.objective == doctest::Approx(o2.objective).epsilon(1e-6));
    }
}
