#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "evgrid/grid.hpp"
#include "evgrid/linalg.hpp"

namespace evgrid {

struct PowerFlowSolution {
    std::vector<double> v_mag;  // pu
    std::vector<double> v_ang;  // rad
    std::vector<double> p_inj;  // MW, net injection per bus
    std::vector<double> q_inj;  // MVAr
    double max_mismatch = 0.0;  // pu
    int iterations = 0;
    bool converged = false;
    // reactive output required at each pv/slack bus, MVAr (post-solve)
    std::vector<double> q_gen_mvar;
    // slack bus real output, MW (total across slack-bus generators)
    double slack_p_mw = 0.0;
};

struct AcpfOptions {
    double tolerance = 1e-8;  // pu mismatch
    int max_iterations = 20;
    bool enforce_q_limits = false;
    int max_q_limit_rounds = 6;
};

namespace detail {

// P_i, Q_i (pu) at every bus from voltages and the admittance matrix.
inline void injections_pu(const Admittance& y, const std::vector<double>& vm, const std::vector<double>& va,
                          std::vector<double>& p, std::vector<double>& q) {
    const std::size_t n = y.n;
    p.assign(n, 0.0);
    q.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double pi = 0.0, qi = 0.0;
        y.y.for_row(i, [&](std::size_t k, Complex yik) {
            const double g = yik.real(), b = yik.imag();
            const double th = va[i] - va[k];
            const double c = std::cos(th), s = std::sin(th);
            pi += vm[i] * vm[k] * (g * c + b * s);
            qi += vm[i] * vm[k] * (g * s - b * c);
        });
        p[i] = pi;
        q[i] = qi;
    }
}

}  // namespace detail

// Newton-Raphson power flow in polar form. Bus kinds come from the network;
// v_mag on slack/pv buses is the regulation setpoint. With enforce_q_limits
// set, pv buses whose generators hit a reactive limit are re-solved as pq at
// the limit.
inline PowerFlowSolution solve_acpf(const Network& net, const AcpfOptions& opt = {},
                                    const PowerFlowSolution* warm = nullptr) {
    const std::size_t n = net.buses.size();
    const auto y = build_admittance(net);
    const double base = net.base_mva;

    // per-bus scheduled injections (pu)
    std::vector<double> p_sched(n, 0.0), q_sched(n, 0.0);
    std::vector<double> qg_min(n, 0.0), qg_max(n, 0.0);  // aggregate gen bounds per bus
    std::vector<bool> has_gen(n, false);
    for (const auto& g : net.generators) {
        const auto i = static_cast<std::size_t>(net.bus_index(g.bus));
        p_sched[i] += g.p_out / base;
        has_gen[i] = true;
        qg_min[i] += g.q_min / base;
        qg_max[i] += g.q_max / base;
    }
    for (const auto& l : net.loads) {
        const auto i = static_cast<std::size_t>(net.bus_index(l.bus));
        p_sched[i] -= (l.p_base + l.p_ev) / base;
        q_sched[i] -= l.q_base / base;
    }

    std::vector<BusKind> kind(n);
    std::size_t slack = n;
    for (std::size_t i = 0; i < n; ++i) {
        kind[i] = net.buses[i].kind;
        if (kind[i] == BusKind::Slack) slack = i;
    }
    if (slack == n) throw ModelError("network '" + net.name + "' has no slack bus");

    std::vector<double> vm(n, 1.0), va(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (kind[i] != BusKind::Pq) {
            vm[i] = net.buses[i].v_mag;
            va[i] = 0.0;
        }
    }
    if (warm && warm->v_mag.size() == n) {
        vm = warm->v_mag;
        va = warm->v_ang;
        for (std::size_t i = 0; i < n; ++i)
            if (kind[i] != BusKind::Pq) vm[i] = net.buses[i].v_mag;
    }
    va[slack] = net.buses[slack].v_ang;

    // pv buses converted to pq when a reactive limit binds (value = limit, pu)
    std::vector<std::optional<double>> q_fixed(n);

    PowerFlowSolution sol;
    std::vector<double> p_calc, q_calc;

    const int q_rounds = opt.enforce_q_limits ? opt.max_q_limit_rounds : 1;
    for (int round = 0; round < q_rounds; ++round) {
        // index maps for the reduced system
        std::vector<std::size_t> ang_vars, mag_vars;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == slack) continue;
            ang_vars.push_back(i);
            const bool is_pq = kind[i] == BusKind::Pq || q_fixed[i].has_value();
            if (is_pq) mag_vars.push_back(i);
        }
        const std::size_t na = ang_vars.size(), nm = mag_vars.size();
        const std::size_t nv = na + nm;

        sol.converged = false;
        sol.iterations = 0;
        for (int it = 0; it <= opt.max_iterations; ++it) {
            detail::injections_pu(y, vm, va, p_calc, q_calc);
            std::vector<double> mis(nv, 0.0);
            double worst = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                const std::size_t i = ang_vars[a];
                mis[a] = p_sched[i] - p_calc[i];
                worst = std::max(worst, std::fabs(mis[a]));
            }
            for (std::size_t m = 0; m < nm; ++m) {
                const std::size_t i = mag_vars[m];
                const double qs = q_fixed[i] ? (*q_fixed[i] + q_sched[i]) : q_sched[i];
                mis[na + m] = qs - q_calc[i];
                worst = std::max(worst, std::fabs(mis[na + m]));
            }
            sol.max_mismatch = worst;
            sol.iterations = it;
            if (worst <= opt.tolerance) {
                sol.converged = true;
                break;
            }
            if (it == opt.max_iterations) break;

            // polar Jacobian on the reduced variable set
            DenseMatrix J(nv, nv, 0.0);
            std::vector<int> ang_pos(n, -1), mag_pos(n, -1);
            for (std::size_t a = 0; a < na; ++a) ang_pos[ang_vars[a]] = static_cast<int>(a);
            for (std::size_t m = 0; m < nm; ++m) mag_pos[mag_vars[m]] = static_cast<int>(m);

            for (std::size_t a = 0; a < na; ++a) {
                const std::size_t i = ang_vars[a];
                y.y.for_row(i, [&](std::size_t k, Complex yik) {
                    const double g = yik.real(), b = yik.imag();
                    const double th = va[i] - va[k];
                    const double c = std::cos(th), s = std::sin(th);
                    if (k == i) {
                        // dP_i/dtheta_i and dP_i/dV_i accumulate the full sums
                        J(a, a) += -q_calc[i] - b * vm[i] * vm[i];
                        if (mag_pos[i] >= 0)
                            J(a, na + static_cast<std::size_t>(mag_pos[i])) +=
                                p_calc[i] / vm[i] + g * vm[i];
                    } else {
                        // dP_i/dtheta_k = Vi Vk (G sin - B cos), theta_ik = th_i - th_k
                        if (ang_pos[k] >= 0)
                            J(a, static_cast<std::size_t>(ang_pos[k])) = vm[i] * vm[k] * (g * s - b * c);
                        if (mag_pos[k] >= 0)
                            J(a, na + static_cast<std::size_t>(mag_pos[k])) = vm[i] * (g * c + b * s);
                    }
                });
            }
            for (std::size_t m = 0; m < nm; ++m) {
                const std::size_t i = mag_vars[m];
                y.y.for_row(i, [&](std::size_t k, Complex yik) {
                    const double g = yik.real(), b = yik.imag();
                    const double th = va[i] - va[k];
                    const double c = std::cos(th), s = std::sin(th);
                    if (k == i) {
                        J(na + m, static_cast<std::size_t>(ang_pos[i])) += p_calc[i] - g * vm[i] * vm[i];
                        J(na + m, na + m) += q_calc[i] / vm[i] - b * vm[i];
                    } else {
                        // dQ_i/dtheta_k = -Vi Vk (G cos + B sin)
                        if (ang_pos[k] >= 0)
                            J(na + m, static_cast<std::size_t>(ang_pos[k])) = -vm[i] * vm[k] * (g * c + b * s);
                        if (mag_pos[k] >= 0)
                            J(na + m, na + static_cast<std::size_t>(mag_pos[k])) = vm[i] * (g * s - b * c);
                    }
                });
            }

            std::vector<double> step;
            try {
                step = lu_solve(std::move(J), mis);
            } catch (const NumericalError&) {
                throw NumericalError("acpf: singular Jacobian at iteration " + std::to_string(it) +
                                     " (network '" + net.name + "')");
            }
            for (std::size_t a = 0; a < na; ++a) va[ang_vars[a]] += step[a];
            for (std::size_t m = 0; m < nm; ++m) {
                vm[mag_vars[m]] += step[na + m];
                vm[mag_vars[m]] = std::max(vm[mag_vars[m]], 0.05);  // keep away from the origin
            }
        }

        if (!sol.converged || !opt.enforce_q_limits) break;

        // reactive limit check on regulating buses
        bool switched = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (kind[i] != BusKind::Pv || q_fixed[i].has_value() || !has_gen[i]) continue;
            const double qg = q_calc[i] - q_sched[i];  // pu generation required
            if (qg > qg_max[i] + 1e-9) {
                q_fixed[i] = qg_max[i];
                switched = true;
            } else if (qg < qg_min[i] - 1e-9) {
                q_fixed[i] = qg_min[i];
                switched = true;
            }
        }
        if (!switched) break;
    }

    detail::injections_pu(y, vm, va, p_calc, q_calc);
    sol.v_mag = vm;
    sol.v_ang = va;
    sol.p_inj.resize(n);
    sol.q_inj.resize(n);
    sol.q_gen_mvar.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sol.p_inj[i] = p_calc[i] * base;
        sol.q_inj[i] = q_calc[i] * base;
        if (kind[i] != BusKind::Pq) sol.q_gen_mvar[i] = (q_calc[i] - q_sched[i]) * base;
    }
    double load_at_slack = 0.0;
    for (const auto& l : net.loads)
        if (static_cast<std::size_t>(net.bus_index(l.bus)) == slack) load_at_slack += l.p_base + l.p_ev;
    sol.slack_p_mw = sol.p_inj[slack] + load_at_slack;
    return sol;
}

// From-side branch flow at a solved operating point: P, Q (MW/MVAr) and
// apparent power S (MVA).
struct BranchFlow {
    double p_mw = 0.0;
    double q_mvar = 0.0;
    double s_mva = 0.0;
};

inline BranchFlow branch_flow(const Network& net, const PowerFlowSolution& sol, const Branch& br) {
    const auto f = static_cast<std::size_t>(net.bus_index(br.from_bus));
    const auto t = static_cast<std::size_t>(net.bus_index(br.to_bus));
    if (!br.in_service) return {};
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const double tap = br.tap == 0.0 ? 1.0 : br.tap;
    // from-side self and transfer admittances of the pi model
    const Complex yff = (ys + Complex(0.0, br.b_shunt / 2.0)) / (tap * tap);
    const Complex yft = -ys / tap;
    const double g_ff = yff.real(), b_ff = yff.imag();
    const double g_ft = yft.real(), b_ft = yft.imag();
    const double vi = sol.v_mag[f], vk = sol.v_mag[t];
    const double th = sol.v_ang[f] - sol.v_ang[t];
    // P_l = Vi^2 G_ff + Vi Vk (G_ft cos + B_ft sin)
    // expressed with the branch's own admittances so taps are handled;
    // for tap = 1 this reduces to Vi^2 g - Vi Vk (g cos th + b sin th).
    const double p = (vi * vi * g_ff + vi * vk * (g_ft * std::cos(th) + b_ft * std::sin(th))) * net.base_mva;
    const double q = (-vi * vi * b_ff + vi * vk * (g_ft * std::sin(th) - b_ft * std::cos(th))) * net.base_mva;
    BranchFlow bf;
    bf.p_mw = p;
    bf.q_mvar = q;
    bf.s_mva = std::hypot(p, q);
    return bf;
}

}  // namespace evgrid
