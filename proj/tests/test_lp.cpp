#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>
#include <functional>

#include "evgrid/lp.hpp"
#include "evgrid/rng.hpp"

using namespace evgrid;
using Catch::Approx;

namespace {

// Vertex-enumeration oracle for small dense LPs: tries every subset of
// potentially-active conditions (rows plus variable bounds), solves the
// square system, keeps the best feasible point. Exponential; tests only.
struct OracleResult {
    bool feasible = false;
    double objective = 0.0;
    std::vector<double> x;
};

OracleResult lp_oracle(const lp::Problem& p) {
    const int n = p.num_vars;
    struct Cond {
        std::vector<double> a;
        double b;
    };
    std::vector<Cond> conds;
    for (const auto& row : p.rows) {
        Cond c{std::vector<double>(n, 0.0), row.rhs};
        for (auto [j, v] : row.coeffs) c.a[j] += v;
        conds.push_back(c);
    }
    for (int j = 0; j < n; ++j) {
        if (p.lower[j] > -lp::kInf) {
            Cond c{std::vector<double>(n, 0.0), p.lower[j]};
            c.a[j] = 1.0;
            conds.push_back(c);
        }
        if (p.upper[j] < lp::kInf) {
            Cond c{std::vector<double>(n, 0.0), p.upper[j]};
            c.a[j] = 1.0;
            conds.push_back(c);
        }
    }
    const int m = static_cast<int>(conds.size());
    OracleResult best;

    auto feasible = [&](const std::vector<double>& x) {
        for (int j = 0; j < n; ++j) {
            if (x[j] < p.lower[j] - 1e-7 || x[j] > p.upper[j] + 1e-7) return false;
        }
        for (const auto& row : p.rows) {
            double lhs = 0.0;
            for (auto [j, v] : row.coeffs) lhs += v * x[j];
            if (row.sense == lp::Sense::LessEq && lhs > row.rhs + 1e-7) return false;
            if (row.sense == lp::Sense::GreaterEq && lhs < row.rhs - 1e-7) return false;
            if (row.sense == lp::Sense::Equal && std::fabs(lhs - row.rhs) > 1e-7) return false;
        }
        return true;
    };

    std::vector<int> pick(n);
    auto solve_subset = [&](const std::vector<int>& idx) {
        // Gaussian elimination on the n x n system
        std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) a[i][j] = conds[idx[i]].a[j];
            a[i][n] = conds[idx[i]].b;
        }
        for (int k = 0; k < n; ++k) {
            int piv = -1;
            double bestv = 1e-9;
            for (int i = k; i < n; ++i)
                if (std::fabs(a[i][k]) > bestv) {
                    bestv = std::fabs(a[i][k]);
                    piv = i;
                }
            if (piv < 0) return;
            std::swap(a[k], a[piv]);
            for (int i = 0; i < n; ++i) {
                if (i == k) continue;
                const double f = a[i][k] / a[k][k];
                for (int j = k; j <= n; ++j) a[i][j] -= f * a[k][j];
            }
        }
        std::vector<double> x(n);
        for (int i = 0; i < n; ++i) x[i] = a[i][n] / a[i][i];
        if (!feasible(x)) return;
        double obj = 0.0;
        for (int j = 0; j < n; ++j) obj += p.cost[j] * x[j];
        if (!best.feasible || obj < best.objective - 1e-12) {
            best.feasible = true;
            best.objective = obj;
            best.x = x;
        }
    };

    // enumerate all n-subsets of conds
    std::vector<int> idx;
    std::function<void(int)> rec = [&](int start) {
        if (static_cast<int>(idx.size()) == n) {
            solve_subset(idx);
            return;
        }
        for (int i = start; i < m; ++i) {
            idx.push_back(i);
            rec(i + 1);
            idx.pop_back();
        }
    };
    rec(0);
    return best;
}

double dual_objective(const lp::Problem& p, const lp::Solution& s) {
    double v = 0.0;
    for (std::size_t i = 0; i < p.rows.size(); ++i) v += s.row_dual[i] * p.rows[i].rhs;
    for (int j = 0; j < p.num_vars; ++j) v += s.reduced_cost[j] * s.x[j];
    return v;
}

}  // namespace

TEST_CASE("minimize x subject to x >= 3", "[lp]") {
    lp::Problem p;
    const int x = p.add_var(0.0, lp::kInf, 1.0);
    p.add_row(lp::Sense::GreaterEq, 3.0, {{x, 1.0}});
    const auto s = lp::solve(p);
    REQUIRE(s.status == lp::Status::Optimal);
    REQUIRE(s.x[x] == Approx(3.0));
    REQUIRE(s.row_dual[0] == Approx(1.0));
}

TEST_CASE("two-variable LP matches vertex enumeration", "[lp]") {
    lp::Problem p;
    const int x = p.add_var(0.0, 4.0, 2.0);
    const int y = p.add_var(0.0, lp::kInf, 3.0);
    p.add_row(lp::Sense::GreaterEq, 10.0, {{x, 1.0}, {y, 1.0}});
    const auto s = lp::solve(p);
    REQUIRE(s.status == lp::Status::Optimal);
    REQUIRE(s.x[x] == Approx(4.0));
    REQUIRE(s.x[y] == Approx(6.0));
    REQUIRE(s.objective == Approx(26.0));
    const auto oracle = lp_oracle(p);
    REQUIRE(oracle.feasible);
    REQUIRE(s.objective == Approx(oracle.objective));
}

TEST_CASE("contradictory constraints are infeasible", "[lp]") {
    lp::Problem p;
    const int x = p.add_var(-lp::kInf, lp::kInf, 1.0);
    p.add_row(lp::Sense::GreaterEq, 2.0, {{x, 1.0}});
    p.add_row(lp::Sense::LessEq, 1.0, {{x, 1.0}});
    REQUIRE(lp::solve(p).status == lp::Status::Infeasible);
}

TEST_CASE("unbounded detection", "[lp]") {
    lp::Problem p;
    const int x = p.add_var(-lp::kInf, lp::kInf, -1.0);
    p.add_row(lp::Sense::GreaterEq, 0.0, {{x, 1.0}});
    REQUIRE(lp::solve(p).status == lp::Status::Unbounded);
}

TEST_CASE("equality rows and negative bounds", "[lp]") {
    lp::Problem p;
    const int x = p.add_var(-5.0, 5.0, 1.0);
    const int y = p.add_var(-5.0, 5.0, -2.0);
    p.add_row(lp::Sense::Equal, 1.0, {{x, 1.0}, {y, 1.0}});
    const auto s = lp::solve(p);
    REQUIRE(s.status == lp::Status::Optimal);
    REQUIRE(s.x[y] == Approx(5.0));
    REQUIRE(s.x[x] == Approx(-4.0));
    REQUIRE(s.objective == Approx(-14.0));
}

TEST_CASE("random LPs agree with oracle and satisfy strong duality", "[lp][property]") {
    Rng rng(2024);
    int solved = 0;
    for (int trial = 0; trial < 60; ++trial) {
        lp::Problem p;
        const int n = 2 + static_cast<int>(rng.below(3));  // 2..4 vars
        for (int j = 0; j < n; ++j) {
            const double lo = rng.uniform() < 0.3 ? -rng.uniform(0.0, 5.0) : 0.0;
            const double hi = rng.uniform() < 0.2 ? lp::kInf : rng.uniform(1.0, 10.0);
            p.add_var(lo, hi, rng.uniform(-5.0, 5.0));
        }
        const int m = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < m; ++i) {
            std::vector<std::pair<int, double>> coeffs;
            for (int j = 0; j < n; ++j)
                if (rng.uniform() < 0.8) coeffs.push_back({j, rng.uniform(-3.0, 3.0)});
            if (coeffs.empty()) coeffs.push_back({0, 1.0});
            const double r = rng.uniform();
            const auto sense = r < 0.4   ? lp::Sense::LessEq
                               : r < 0.8 ? lp::Sense::GreaterEq
                                         : lp::Sense::Equal;
            p.add_row(sense, rng.uniform(-5.0, 5.0), coeffs);
        }
        // keep the instance bounded for the oracle's sake
        for (int j = 0; j < n; ++j)
            if (p.upper[j] == lp::kInf) p.upper[j] = 50.0;

        const auto s = lp::solve(p);
        const auto oracle = lp_oracle(p);
        if (s.status == lp::Status::Infeasible) {
            REQUIRE_FALSE(oracle.feasible);
            continue;
        }
        REQUIRE(s.status == lp::Status::Optimal);
        REQUIRE(oracle.feasible);
        REQUIRE(s.objective == Approx(oracle.objective).margin(1e-6));
        // strong duality: primal == dual objective within 1e-9
        const double scale = std::max(1.0, std::fabs(s.objective));
        REQUIRE(std::fabs(s.objective - dual_objective(p, s)) <= 1e-9 * scale);
        ++solved;
    }
    REQUIRE(solved > 20);  // the generator must produce a healthy mix
}
