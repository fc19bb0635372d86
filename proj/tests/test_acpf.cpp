#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "evgrid/acpf.hpp"
#include "evgrid/grid.hpp"
#include "support/synth.hpp"

using namespace evgrid;
using Catch::Approx;

namespace {

// Independent 2-bus oracle: slack V1 = 1<0 feeding load (p, q) pu through
// series z = r + jx. Nested bisection, no Newton machinery: the outer loop
// bisects the load-bus angle against the P balance, the inner loop bisects
// |V2| against the Q balance.
struct TwoBusOracle {
    double v2, th2;
};

TwoBusOracle two_bus_oracle(double r, double x, double p_load, double q_load) {
    const Complex z(r, x);
    const Complex yser = 1.0 / z;
    const double g = yser.real(), b = yser.imag();

    // injections at bus 2 for candidate (v2, th2); Y22 = yser, Y21 = -yser
    auto p_inj = [&](double v2, double th2) {
        return v2 * v2 * g + v2 * 1.0 * (-g * std::cos(th2) - b * std::sin(th2));
    };
    auto q_inj = [&](double v2, double th2) {
        return -v2 * v2 * b + v2 * 1.0 * (-g * std::sin(th2) + b * std::cos(th2));
    };

    auto solve_v2 = [&](double th2) {
        double lo = 0.3, hi = 1.5;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (q_inj(mid, th2) + q_load > 0.0)
                hi = mid;
            else
                lo = mid;
        }
        return 0.5 * (lo + hi);
    };

    double lo = -1.2, hi = 0.0;  // consuming bus angle is negative
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double v2 = solve_v2(mid);
        if (p_inj(v2, mid) + p_load > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    const double th2 = 0.5 * (lo + hi);
    return {solve_v2(th2), th2};
}

}  // namespace

TEST_CASE("zero-injection network converges immediately to flat", "[acpf]") {
    auto net = synth::case_3bus();
    net.loads.clear();
    for (auto& g : net.generators) g.p_out = 0.0;
    // remove line charging so the zero-injection point is exactly flat
    for (auto& br : net.branches) br.b_shunt = 0.0;
    const auto sol = solve_acpf(net);
    REQUIRE(sol.converged);
    REQUIRE(sol.iterations <= 1);
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        REQUIRE(sol.v_mag[i] == Approx(1.0).margin(1e-10));
        REQUIRE(sol.v_ang[i] == Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("2-bus case matches the nested bisection oracle", "[acpf][oracle]") {
    // 1.0 pu load through x = 0.1
    auto net = synth::case_2bus(100.0, 0.0);
    const auto sol = solve_acpf(net);
    REQUIRE(sol.converged);
    REQUIRE(sol.max_mismatch <= 1e-8);

    const auto oracle = two_bus_oracle(0.0, 0.1, 1.0, 0.0);
    REQUIRE(sol.v_mag[1] == Approx(oracle.v2).margin(1e-6));
    REQUIRE(sol.v_ang[1] == Approx(oracle.th2).margin(1e-6));

    // closed form for the lossless case as a second cross-check
    const double u = (1.0 + std::sqrt(1.0 - 4.0 * 0.01)) / 2.0;
    REQUIRE(sol.v_mag[1] == Approx(std::sqrt(u)).margin(1e-9));
}

TEST_CASE("2-bus with reactive load matches oracle", "[acpf][oracle]") {
    auto net = synth::case_2bus(80.0, 30.0);
    net.branches[0].r = 0.02;
    const auto sol = solve_acpf(net);
    REQUIRE(sol.converged);
    const auto oracle = two_bus_oracle(0.02, 0.1, 0.8, 0.3);
    REQUIRE(sol.v_mag[1] == Approx(oracle.v2).margin(1e-6));
    REQUIRE(sol.v_ang[1] == Approx(oracle.th2).margin(1e-6));
}

TEST_CASE("3-bus self-consistency: recomputed injections match schedule", "[acpf][oracle]") {
    const auto net = synth::case_3bus();
    const auto sol = solve_acpf(net);
    REQUIRE(sol.converged);
    const double base = net.base_mva;
    // bus 3 (pq): net injection must equal minus its load
    REQUIRE(sol.p_inj[2] == Approx(-90.0).margin(1e-8 * base));
    REQUIRE(sol.q_inj[2] == Approx(-25.0).margin(1e-8 * base));
    // bus 2 (pv): real injection = gen - load
    REQUIRE(sol.p_inj[1] == Approx(80.0 - 60.0).margin(1e-8 * base));
    REQUIRE(sol.v_mag[1] == Approx(net.buses[1].v_mag));
}

TEST_CASE("power balance: slack absorbs losses", "[acpf]") {
    const auto net = synth::case_5bus();
    const auto sol = solve_acpf(net);
    REQUIRE(sol.converged);
    double total_inj = 0.0;
    for (double p : sol.p_inj) total_inj += p;
    // sum of net injections equals system losses net of charging
    REQUIRE(total_inj > -5.0);
    REQUIRE(total_inj < 20.0);
    double load = 0.0;
    for (const auto& l : net.loads) load += l.p_base;
    double gen_nonslack = 0.0;
    for (const auto& g : net.generators)
        if (net.buses[net.bus_index(g.bus)].kind != BusKind::Slack) gen_nonslack += g.p_out;
    REQUIRE(sol.slack_p_mw == Approx(load + total_inj - gen_nonslack).margin(1e-5));
}

TEST_CASE("iteration cap produces a non-converged result with mismatch attached", "[acpf]") {
    auto net = synth::case_2bus(100.0, 0.0);
    AcpfOptions opt;
    opt.max_iterations = 0;  // forbid any Newton step
    const auto sol = solve_acpf(net, opt);
    REQUIRE_FALSE(sol.converged);
    REQUIRE(sol.max_mismatch > 0.0);
}

TEST_CASE("mismatch of a converged solution is below the reported maximum", "[acpf][property]") {
    Rng rng(11);
    for (int trial = 0; trial < 8; ++trial) {
        const auto net = synth::random_network(rng, 10 + static_cast<int>(rng.below(8)));
        const auto sol = solve_acpf(net);
        if (!sol.converged) continue;
        // independent recomputation of every pq/pv mismatch from (V, Y)
        const auto y = build_admittance(net);
        const double base = net.base_mva;
        std::vector<double> p_sched(net.buses.size(), 0.0), q_sched(net.buses.size(), 0.0);
        for (const auto& g : net.generators) p_sched[net.bus_index(g.bus)] += g.p_out / base;
        for (const auto& l : net.loads) {
            p_sched[net.bus_index(l.bus)] -= (l.p_base + l.p_ev) / base;
            q_sched[net.bus_index(l.bus)] -= l.q_base / base;
        }
        for (std::size_t i = 0; i < net.buses.size(); ++i) {
            if (net.buses[i].kind == BusKind::Slack) continue;
            double pi = 0.0, qi = 0.0;
            for (std::size_t k = 0; k < net.buses.size(); ++k) {
                const Complex yik = y.at(i, k);
                const double th = sol.v_ang[i] - sol.v_ang[k];
                pi += sol.v_mag[i] * sol.v_mag[k] *
                      (yik.real() * std::cos(th) + yik.imag() * std::sin(th));
                qi += sol.v_mag[i] * sol.v_mag[k] *
                      (yik.real() * std::sin(th) - yik.imag() * std::cos(th));
            }
            REQUIRE(std::fabs(p_sched[i] - pi) <= sol.max_mismatch + 1e-12);
            if (net.buses[i].kind == BusKind::Pq)
                REQUIRE(std::fabs(q_sched[i] - qi) <= sol.max_mismatch + 1e-12);
        }
    }
}

TEST_CASE("branch flow identities", "[acpf]") {
    SECTION("identical endpoint voltages and no shunt give zero flow") {
        auto net = synth::case_2bus(0.0, 0.0);
        const auto sol = solve_acpf(net);
        REQUIRE(sol.converged);
        const auto bf = branch_flow(net, sol, net.branches[0]);
        REQUIRE(bf.p_mw == Approx(0.0).margin(1e-7));
        REQUIRE(bf.q_mvar == Approx(0.0).margin(1e-7));
    }
    SECTION("lossless line with 0.1 rad separation carries (1/x) sin(0.1)") {
        Network net;
        net.buses = {synth::make_bus(1, BusKind::Slack), synth::make_bus(2, BusKind::Pq)};
        net.branches = {synth::make_line(1, 1, 2, 0.0, 0.1)};
        net.finalize();
        PowerFlowSolution sol;
        sol.converged = true;
        sol.v_mag = {1.0, 1.0};
        sol.v_ang = {0.1, 0.0};
        const auto bf = branch_flow(net, sol, net.branches[0]);
        REQUIRE(bf.p_mw / net.base_mva == Approx(10.0 * std::sin(0.1)).margin(1e-12));
    }
    SECTION("energy balance on a 3-bus solution") {
        const auto net = synth::case_3bus();
        const auto sol = solve_acpf(net);
        REQUIRE(sol.converged);
        double losses = 0.0;
        for (const auto& br : net.branches) {
            const auto f = branch_flow(net, sol, br);
            Branch rev = br;
            std::swap(rev.from_bus, rev.to_bus);
            rev.tap = 1.0 / (br.tap == 0.0 ? 1.0 : br.tap);
            const auto g = branch_flow(net, sol, rev);
            losses += f.p_mw + g.p_mw;
        }
        double inj_total = 0.0;
        for (double p : sol.p_inj) inj_total += p;
        REQUIRE(losses == Approx(inj_total).margin(1e-6));
    }
}

TEST_CASE("reactive limit enforcement keeps pv generator within bounds", "[acpf]") {
    auto net = synth::case_3bus();
    net.generators[1].q_min = -5.0;
    net.generators[1].q_max = 5.0;  // tight band the regulation needs to exceed
    AcpfOptions opt;
    opt.enforce_q_limits = true;
    const auto sol = solve_acpf(net, opt);
    REQUIRE(sol.converged);
    const auto idx = static_cast<std::size_t>(net.bus_index(2));
    REQUIRE(sol.q_gen_mvar[idx] <= 5.0 + 1e-6);
    REQUIRE(sol.q_gen_mvar[idx] >= -5.0 - 1e-6);
}
