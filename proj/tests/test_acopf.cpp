#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "evgrid/acopf.hpp"
#include "support/synth.hpp"

using namespace evgrid;
using Catch::Approx;

namespace {

double total_dispatch(const OpfSolution& s) {
    double p = 0.0;
    for (const auto& d : s.dispatch) p += d.p_mw;
    return p;
}

}  // namespace

TEST_CASE("uncongested single unit: dispatch and LMP from the cost curve", "[acopf][oracle]") {
    // one generator (a=0, b=20, c=0.01) serving 100 MW over a lossless line
    auto net = synth::case_2bus(100.0, 0.0);
    const auto sol = solve_acopf(net);
    REQUIRE(sol.converged);
    REQUIRE(sol.pf.converged);

    // brute-force 0.1 MW grid over the generator range: the lossless case
    // forces P = load, and the secant at the minimum prices the next MW
    double best_p = -1.0, best_cost = std::numeric_limits<double>::infinity();
    const auto& g = net.generators[0];
    for (double p = 0.0; p <= 500.0 + 1e-9; p += 0.1) {
        if (std::fabs(p - 100.0) > 0.05) continue;  // infeasible: must serve the load
        if (g.cost_at(p) < best_cost) {
            best_cost = g.cost_at(p);
            best_p = p;
        }
    }
    REQUIRE(best_p == Approx(100.0));
    REQUIRE(total_dispatch(sol) == Approx(100.0).margin(0.2));
    const double lambda = g.marginal_at(100.0);  // 22 $/MWh
    REQUIRE(lambda == Approx(22.0));
    for (double l : sol.lmp) REQUIRE(l == Approx(lambda).epsilon(0.05));
    REQUIRE(sol.penalty_total == 0.0);
    REQUIRE(sol.objective == Approx(g.cost_at(total_dispatch(sol))).margin(1e-6));
}

TEST_CASE("congested two-generator case matches the 1 MW dispatch-grid oracle", "[acopf][oracle]") {
    auto net = synth::case_congested_2gen(50.0, 80.0);

    // oracle: sweep the remote unit on a 1 MW grid, slack absorbs the rest,
    // a candidate is feasible when the tie line is within rating and the
    // slack unit within bounds; independent of the SLP/LP machinery
    double best_cost = std::numeric_limits<double>::infinity();
    double best_p2 = -1.0, best_p1 = -1.0;
    for (double p2 = 0.0; p2 <= 200.0 + 1e-9; p2 += 1.0) {
        Network probe = net;
        probe.generators[1].p_out = p2;
        const auto pf = solve_acpf(probe);
        if (!pf.converged) continue;
        const double p1 = pf.slack_p_mw;
        if (p1 < net.generators[0].p_min - 1e-6 || p1 > net.generators[0].p_max + 1e-6) continue;
        const auto flow = branch_flow(probe, pf, probe.branches[0]);
        if (flow.s_mva > 50.0 + 1e-6) continue;
        const double cost = net.generators[0].cost_at(p1) + net.generators[1].cost_at(p2);
        if (cost < best_cost) {
            best_cost = cost;
            best_p2 = p2;
            best_p1 = p1;
        }
    }
    REQUIRE(best_p2 >= 0.0);

    const auto sol = solve_acopf(net);
    REQUIRE(sol.pf.converged);
    REQUIRE(sol.dispatch[0].p_mw == Approx(best_p1).margin(1.0 + 1e-6));
    REQUIRE(sol.dispatch[1].p_mw == Approx(best_p2).margin(1.0 + 1e-6));

    // LMPs separate across the binding line: cheap side near 10, load side near 50
    const auto b1 = static_cast<std::size_t>(net.bus_index(1));
    const auto b2 = static_cast<std::size_t>(net.bus_index(2));
    REQUIRE(sol.lmp[b2] - sol.lmp[b1] > 10.0);
    REQUIRE(sol.lmp[b1] == Approx(10.0).epsilon(0.10));
    REQUIRE(sol.lmp[b2] == Approx(50.0).epsilon(0.10));
}

TEST_CASE("demand beyond capability returns a penalized solution, not an abort", "[acopf]") {
    auto net = synth::case_2bus(300.0, 0.0);
    net.generators[0].p_max = 200.0;
    const auto sol = solve_acopf(net);  // must not throw
    REQUIRE(sol.pf.converged);
    REQUIRE(sol.penalty_total > 0.0);
    REQUIRE(sol.unserved_mw > 50.0);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        REQUIRE(sol.dispatch[g].p_mw <= net.generators[g].p_max + 0.5);
        REQUIRE(sol.dispatch[g].p_mw >= net.generators[g].p_min - 0.5);
        REQUIRE(sol.dispatch[g].q_mvar <= net.generators[g].q_max + 1e-6);
        REQUIRE(sol.dispatch[g].q_mvar >= net.generators[g].q_min - 1e-6);
    }
}

TEST_CASE("unconstrained optimum equalizes marginal costs", "[acopf][property]") {
    // lossless variant: with no loss gradient and nothing binding, interior
    // units must run at one common marginal cost
    auto net = synth::case_5bus();
    net.generators[1].cost_b = 17.0;  // close enough that both units run interior
    for (auto& br : net.branches) br.r = 0.0;
    const auto sol = solve_acopf(net);
    REQUIRE(sol.converged);
    const auto& g1 = net.generators[0];
    const auto& g2 = net.generators[1];
    const double m1 = g1.marginal_at(sol.dispatch[0].p_mw);
    const double m2 = g2.marginal_at(sol.dispatch[1].p_mw);
    REQUIRE(sol.dispatch[0].p_mw > 1.0);
    REQUIRE(sol.dispatch[0].p_mw < g1.p_max - 1.0);
    REQUIRE(sol.dispatch[1].p_mw > 1.0);
    REQUIRE(sol.dispatch[1].p_mw < g2.p_max - 1.0);
    REQUIRE(std::fabs(m1 - m2) <= 1e-3);
    for (double l : sol.lmp) REQUIRE(l == Approx(m1).epsilon(0.05));
}

TEST_CASE("lossy network prices each unit at its own bus", "[acopf][property]") {
    auto net = synth::case_5bus();
    net.generators[1].cost_b = 17.0;
    const auto sol = solve_acopf(net);
    REQUIRE(sol.converged);
    // interior units run where their marginal equals their local LMP, and
    // every LMP sits within the loss-gradient band of the system marginal
    const double m1 = net.generators[0].marginal_at(sol.dispatch[0].p_mw);
    const double m2 = net.generators[1].marginal_at(sol.dispatch[1].p_mw);
    REQUIRE(m1 == Approx(sol.lmp[net.bus_index(1)]).margin(5e-3));
    REQUIRE(m2 == Approx(sol.lmp[net.bus_index(2)]).margin(5e-3));
    // this case's series resistances are deliberately heavy, so allow a
    // wider loss-gradient band than the low-loss acceptance cases use
    for (double l : sol.lmp) REQUIRE(l == Approx(m1).epsilon(0.10));
}

TEST_CASE("returned objective beats sampled feasible dispatches", "[acopf][property]") {
    auto net = synth::case_5bus();
    const auto sol = solve_acopf(net);
    REQUIRE(sol.pf.converged);

    Rng rng(99);
    int accepted = 0;
    for (int k = 0; k < 100; ++k) {
        Network probe = net;
        probe.generators[1].p_out = rng.uniform(0.0, net.generators[1].p_max);
        const auto pf = solve_acpf(probe);
        if (!pf.converged) continue;
        const double p1 = pf.slack_p_mw;
        if (p1 < net.generators[0].p_min || p1 > net.generators[0].p_max) continue;
        bool volt_ok = true;
        for (std::size_t i = 0; i < net.buses.size(); ++i)
            if (pf.v_mag[i] < net.buses[i].v_min - 1e-9 || pf.v_mag[i] > net.buses[i].v_max + 1e-9)
                volt_ok = false;
        if (!volt_ok) continue;
        const double cost = net.generators[0].cost_at(p1) +
                            net.generators[1].cost_at(probe.generators[1].p_out);
        REQUIRE(sol.objective <= cost + 1e-6);
        ++accepted;
    }
    REQUIRE(accepted > 50);
}

TEST_CASE("raising the soft penalty never increases the violation", "[acopf][property]") {
    // congestion where overloading is cheaper than redispatch at a low
    // penalty price: delta-cost across the line is 40 $/MWh
    auto net = synth::case_congested_2gen(50.0, 80.0);
    auto violation = [&](double penalty) {
        OpfOptions opt;
        opt.penalty_mva = penalty;
        const auto sol = solve_acopf(net, opt);
        double v = 0.0;
        for (std::size_t b = 0; b < net.branches.size(); ++b)
            v += std::max(0.0, sol.branch_flows[b].s_mva - net.branches[b].s_rating);
        return v;
    };
    const double v_low = violation(30.0);
    const double v_high = violation(300.0);
    REQUIRE(v_low > 1.0);  // cheap penalty accepts the overload
    REQUIRE(v_high <= v_low + 1e-6);
    REQUIRE(v_high < 1.0);
}

TEST_CASE("acopf rejects degenerate inputs", "[acopf]") {
    auto net = synth::case_2bus();
    SECTION("no generators") {
        net.generators.clear();
        REQUIRE_THROWS_AS(solve_acopf(net), ModelError);
    }
    SECTION("concave cost") {
        net.generators[0].cost_c = -1.0;
        REQUIRE_THROWS_AS(solve_acopf(net), ModelError);
    }
}
