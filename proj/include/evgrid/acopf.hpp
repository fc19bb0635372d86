#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "evgrid/acpf.hpp"
#include "evgrid/grid.hpp"
#include "evgrid/lp.hpp"

namespace evgrid {

struct OpfOptions {
    double dispatch_tol_mw = 0.1;   // successive-solution dispatch threshold
    double voltage_tol_pu = 1e-4;   // successive-solution voltage threshold
    int max_slp_iterations = 30;
    int piecewise_segments = 10;    // quadratic cost linearization per generator
    double trust_fraction = 0.2;    // generator move limit per LP step, of range
    double penalty_mva = 1000.0;    // $/MVA h on branch soft limits
    double penalty_voltage = 10000.0;   // $/pu h on voltage soft limits
    double penalty_unserved = 10000.0;  // $/MWh on demand relief
    AcpfOptions acpf{};
};

struct GeneratorDispatch {
    int gen_id = 0;
    double p_mw = 0.0;
    double q_mvar = 0.0;
};

struct OpfSolution {
    std::vector<GeneratorDispatch> dispatch;
    double objective = 0.0;  // $/h, true quadratic cost at the final point
    std::vector<double> lmp;  // $/MWh per bus, dual of the real balance row
    std::vector<BranchFlow> branch_flows;
    double penalty_total = 0.0;  // $/h of soft-constraint violation at the final point
    double unserved_mw = 0.0;    // total demand relief applied
    int slp_iterations = 0;
    PowerFlowSolution pf;        // final AC operating point
    bool converged = false;      // SLP loop met its thresholds
};

namespace detail {

// pu partial derivatives of the from-side branch P and Q with respect to
// (theta_f, theta_t, v_f, v_t), evaluated at the given operating point.
struct FlowPartials {
    double p0 = 0.0, q0 = 0.0;  // pu
    double dp[4] = {0, 0, 0, 0};
    double dq[4] = {0, 0, 0, 0};
};

inline FlowPartials branch_partials(const Branch& br, double vf, double vt, double thf, double tht) {
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const double tap = br.tap == 0.0 ? 1.0 : br.tap;
    const Complex yff = (ys + Complex(0.0, br.b_shunt / 2.0)) / (tap * tap);
    const Complex yft = -ys / tap;
    const double gff = yff.real(), bff = yff.imag();
    const double gft = yft.real(), bft = yft.imag();
    const double th = thf - tht;
    const double c = std::cos(th), s = std::sin(th);
    FlowPartials fp;
    fp.p0 = vf * vf * gff + vf * vt * (gft * c + bft * s);
    fp.q0 = -vf * vf * bff + vf * vt * (gft * s - bft * c);
    fp.dp[0] = vf * vt * (-gft * s + bft * c);   // d/dtheta_f
    fp.dp[1] = -fp.dp[0];                        // d/dtheta_t
    fp.dp[2] = 2.0 * vf * gff + vt * (gft * c + bft * s);
    fp.dp[3] = vf * (gft * c + bft * s);
    fp.dq[0] = vf * vt * (gft * c + bft * s);
    fp.dq[1] = -fp.dq[0];
    fp.dq[2] = -2.0 * vf * bff + vt * (gft * s - bft * c);
    fp.dq[3] = vf * (gft * s - bft * c);
    return fp;
}

// pu injection partials at the operating point, same formulas as the Newton
// Jacobian but assembled bus-by-bus for the LP rows.
struct InjectionPartials {
    std::vector<double> p, q;                    // pu injections
    // dense per-bus rows: dP[i][k] over all buses k (theta), dPdV[i][k]
    std::vector<std::vector<double>> dp_dth, dp_dv, dq_dth, dq_dv;
};

inline InjectionPartials injection_partials(const Admittance& y, const std::vector<double>& vm,
                                            const std::vector<double>& va) {
    const std::size_t n = y.n;
    InjectionPartials ip;
    injections_pu(y, vm, va, ip.p, ip.q);
    ip.dp_dth.assign(n, std::vector<double>(n, 0.0));
    ip.dp_dv.assign(n, std::vector<double>(n, 0.0));
    ip.dq_dth.assign(n, std::vector<double>(n, 0.0));
    ip.dq_dv.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        y.y.for_row(i, [&](std::size_t k, Complex yik) {
            const double g = yik.real(), b = yik.imag();
            const double th = va[i] - va[k];
            const double c = std::cos(th), s = std::sin(th);
            if (k == i) {
                ip.dp_dth[i][i] = -ip.q[i] - b * vm[i] * vm[i];
                ip.dp_dv[i][i] = ip.p[i] / vm[i] + g * vm[i];
                ip.dq_dth[i][i] = ip.p[i] - g * vm[i] * vm[i];
                ip.dq_dv[i][i] = ip.q[i] / vm[i] - b * vm[i];
            } else {
                ip.dp_dth[i][k] = vm[i] * vm[k] * (g * s - b * c);
                ip.dp_dv[i][k] = vm[i] * (g * c + b * s);
                ip.dq_dth[i][k] = -vm[i] * vm[k] * (g * c + b * s);
                ip.dq_dv[i][k] = vm[i] * (g * s - b * c);
            }
        });
    }
    return ip;
}

// Proportional split of a bus total across its generators' [lo, hi] ranges.
inline std::vector<double> proportional_split(double total, const std::vector<double>& lo,
                                              const std::vector<double>& hi) {
    double lsum = 0.0, span = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        lsum += lo[i];
        span += hi[i] - lo[i];
    }
    const double frac = span > 0.0 ? (total - lsum) / span : 0.0;
    std::vector<double> out(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) out[i] = lo[i] + frac * (hi[i] - lo[i]);
    return out;
}

}  // namespace detail

// AC-OPF by successive linear programming around Newton power-flow points.
// Each pass solves the AC power flow at the current dispatch, linearizes the
// balance, voltage, and branch-MVA constraints there, and solves an LP whose
// objective is the piecewise-linearized generation cost plus soft-constraint
// penalties (branch MVA, bus voltage, demand relief). The loop ends when
// successive dispatch and voltage solutions agree within the thresholds.
// Bus LMPs are the duals of the final LP's real-power balance rows.
inline OpfSolution solve_acopf(const Network& net, const OpfOptions& opt = {}) {
    if (net.generators.empty()) throw ModelError("acopf: network has no generators");
    for (const auto& g : net.generators)
        if (g.cost_c < 0.0) throw ModelError("acopf: generator " + std::to_string(g.id) + " has concave cost");

    const std::size_t n = net.buses.size();
    const double base = net.base_mva;

    // generators sorted by id so equal-cost ties resolve to the lowest id
    std::vector<std::size_t> gen_order(net.generators.size());
    for (std::size_t i = 0; i < gen_order.size(); ++i) gen_order[i] = i;
    std::sort(gen_order.begin(), gen_order.end(),
              [&](std::size_t a, std::size_t b) { return net.generators[a].id < net.generators[b].id; });

    std::size_t slack_bus = n;
    for (std::size_t i = 0; i < n; ++i)
        if (net.buses[i].kind == BusKind::Slack) slack_bus = i;
    if (slack_bus == n) throw ModelError("acopf: no slack bus");

    // per-bus demand (MW / MVAr)
    std::vector<double> p_dem(n, 0.0), q_dem(n, 0.0);
    for (const auto& l : net.loads) {
        const auto i = static_cast<std::size_t>(net.bus_index(l.bus));
        p_dem[i] += l.p_base + l.p_ev;
        q_dem[i] += l.q_base;
    }

    // working dispatch, clamped into bounds
    std::vector<double> p_sched(net.generators.size());
    for (std::size_t g = 0; g < p_sched.size(); ++g)
        p_sched[g] = std::clamp(net.generators[g].p_out, net.generators[g].p_min, net.generators[g].p_max);
    std::vector<double> shed(n, 0.0);

    AcpfOptions pf_opt = opt.acpf;
    pf_opt.enforce_q_limits = true;

    auto make_snapshot = [&](const std::vector<double>& disp, const std::vector<double>& relief) {
        Network cur = net;
        for (std::size_t g = 0; g < disp.size(); ++g) cur.generators[g].p_out = disp[g];
        for (std::size_t i = 0; i < n; ++i)
            if (relief[i] > 0.0) {
                LoadPoint lp;
                lp.bus = net.buses[i].id;
                lp.p_base = -relief[i];
                cur.loads.push_back(lp);
            }
        return cur;
    };

    auto run_pf = [&](const Network& cur, const PowerFlowSolution* warm) {
        auto sol = solve_acpf(cur, pf_opt, warm);
        if (!sol.converged) sol = solve_acpf(cur, pf_opt, nullptr);  // retry cold
        if (!sol.converged)
            throw SolverError("acopf: inner power flow diverged (mismatch " +
                              std::to_string(sol.max_mismatch) + " pu after " +
                              std::to_string(sol.iterations) + " iterations)");
        return sol;
    };

    // scalar infeasibility measure used for trust-region control
    auto feasibility = [&](const Network& cur, const PowerFlowSolution& pf) {
        double v = 0.0;
        for (const auto& br : cur.branches) {
            if (!br.in_service || br.s_rating <= 0.0) continue;
            const auto f = branch_flow(cur, pf, br);
            v += std::max(0.0, f.s_mva - br.s_rating);
        }
        for (std::size_t i = 0; i < n; ++i) {
            v += 100.0 * std::max(0.0, pf.v_mag[i] - net.buses[i].v_max);
            v += 100.0 * std::max(0.0, net.buses[i].v_min - pf.v_mag[i]);
        }
        return v;
    };

    const auto y = build_admittance(net);
    double prev_infeas = -1.0;
    PowerFlowSolution pf;
    std::vector<double> lmp(n, 0.0);
    bool have_pf = false;
    bool slp_converged = false;
    int it = 0;

    // Per-generator trust radius: starts wide, tightens to the floor as the
    // iterates settle so the final LP resolves marginal cost finely (cost
    // segments span the trust window, not the whole range). Convergence is
    // declared only once every window has contracted near the floor, so the
    // reported LMPs come from a finely-segmented LP.
    const double trust_floor = opt.dispatch_tol_mw;
    std::vector<double> trust(net.generators.size());
    for (std::size_t g = 0; g < trust.size(); ++g)
        trust[g] = std::max(opt.trust_fraction * (net.generators[g].p_max - net.generators[g].p_min),
                            trust_floor);

    for (it = 1; it <= opt.max_slp_iterations; ++it) {
        const Network cur = make_snapshot(p_sched, shed);
        PowerFlowSolution pf_new = run_pf(cur, have_pf ? &pf : nullptr);

        const double infeas = feasibility(cur, pf_new);
        const bool worsened = prev_infeas >= 0.0 && infeas > prev_infeas + 1e-9;
        if (worsened)
            for (double& d : trust) d = std::max(d * 0.5, trust_floor);
        prev_infeas = infeas;

        const double dv_pf = have_pf ? [&] {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(pf_new.v_mag[i] - pf.v_mag[i]));
            return m;
        }() : 1.0;
        pf = pf_new;
        have_pf = true;

        // trust-window anchor: scheduled dispatch, except slack-bus units
        // which anchor at their realized share of the slack power
        std::vector<double> p_point = p_sched;
        {
            std::vector<std::size_t> sg;
            for (std::size_t g = 0; g < net.generators.size(); ++g)
                if (static_cast<std::size_t>(net.bus_index(net.generators[g].bus)) == slack_bus)
                    sg.push_back(g);
            if (!sg.empty()) {
                std::vector<double> lo, hi;
                for (auto g : sg) {
                    lo.push_back(net.generators[g].p_min);
                    hi.push_back(net.generators[g].p_max);
                }
                const auto split = detail::proportional_split(pf.slack_p_mw, lo, hi);
                for (std::size_t k = 0; k < sg.size(); ++k)
                    p_point[sg[k]] = std::clamp(split[k], lo[k], hi[k]);
            }
        }

        // ---- assemble the LP around this operating point ----
        lp::Problem prob;
        const auto ip = detail::injection_partials(y, pf.v_mag, pf.v_ang);

        // cost segments over each generator's trust window [wlo, whi], with a
        // breakpoint pinned at the anchor; slopes are secants of the quadratic
        std::vector<std::vector<int>> seg_vars(net.generators.size());
        std::vector<double> window_lo(net.generators.size());
        for (std::size_t oi = 0; oi < gen_order.size(); ++oi) {
            const std::size_t g = gen_order[oi];
            const auto& gen = net.generators[g];
            const double wlo = std::max(gen.p_min, p_point[g] - trust[g]);
            const double whi = std::min(gen.p_max, p_point[g] + trust[g]);
            window_lo[g] = wlo;
            if (whi - wlo <= 1e-12) continue;  // fixed unit
            auto add_segments = [&](double a, double b, int count) {
                if (b - a <= 1e-12 || count <= 0) return;
                const double w = (b - a) / count;
                for (int s = 0; s < count; ++s) {
                    const double x0 = a + s * w;
                    const double slope = gen.cost_b + gen.cost_c * (2.0 * x0 + w);
                    seg_vars[g].push_back(prob.add_var(0.0, w, slope));
                }
            };
            if (gen.cost_c > 0.0) {
                const int half = std::max(1, opt.piecewise_segments / 2);
                add_segments(wlo, p_point[g], half);
                add_segments(p_point[g], whi, half);
            } else {
                add_segments(wlo, whi, 1);
            }
        }
        // state move variables
        std::vector<int> dth(n, -1), dv(n, -1);
        for (std::size_t i = 0; i < n; ++i) {
            if (i != slack_bus) dth[i] = prob.add_var(-0.5, 0.5, 0.0);
            if (net.buses[i].kind == BusKind::Pq) dv[i] = prob.add_var(-0.1, 0.1, 0.0);
        }
        // soft-constraint slacks
        std::vector<int> shed_var(n, -1);
        for (std::size_t i = 0; i < n; ++i)
            if (p_dem[i] > 0.0) shed_var[i] = prob.add_var(0.0, p_dem[i], opt.penalty_unserved);

        // real power balance per bus (MW); dual is the bus LMP
        std::vector<int> balance_row(n, -1);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::pair<int, double>> c;
            double gen_const = 0.0;  // window lower edges of units at this bus
            for (std::size_t g = 0; g < net.generators.size(); ++g) {
                if (static_cast<std::size_t>(net.bus_index(net.generators[g].bus)) != i) continue;
                for (int v : seg_vars[g]) c.push_back({v, 1.0});
                gen_const += window_lo[g];
            }
            if (shed_var[i] >= 0) c.push_back({shed_var[i], 1.0});
            for (std::size_t k = 0; k < n; ++k) {
                if (dth[k] >= 0 && ip.dp_dth[i][k] != 0.0) c.push_back({dth[k], -base * ip.dp_dth[i][k]});
                if (dv[k] >= 0 && ip.dp_dv[i][k] != 0.0) c.push_back({dv[k], -base * ip.dp_dv[i][k]});
            }
            balance_row[i] = static_cast<int>(prob.rows.size());
            prob.add_row(lp::Sense::Equal, base * ip.p[i] + p_dem[i] - gen_const, std::move(c));
        }
        // reactive balance at pq buses (no reactive recourse: ties dv to dth)
        for (std::size_t i = 0; i < n; ++i) {
            if (net.buses[i].kind != BusKind::Pq) continue;
            std::vector<std::pair<int, double>> c;
            for (std::size_t k = 0; k < n; ++k) {
                if (dth[k] >= 0 && ip.dq_dth[i][k] != 0.0) c.push_back({dth[k], -base * ip.dq_dth[i][k]});
                if (dv[k] >= 0 && ip.dq_dv[i][k] != 0.0) c.push_back({dv[k], -base * ip.dq_dv[i][k]});
            }
            prob.add_row(lp::Sense::Equal, base * ip.q[i] + q_dem[i], std::move(c));
        }
        // branch MVA soft limits, from side
        for (const auto& br : net.branches) {
            if (!br.in_service || br.s_rating <= 0.0) continue;
            const auto f = static_cast<std::size_t>(net.bus_index(br.from_bus));
            const auto t = static_cast<std::size_t>(net.bus_index(br.to_bus));
            const auto fp = detail::branch_partials(br, pf.v_mag[f], pf.v_mag[t], pf.v_ang[f], pf.v_ang[t]);
            const double s0 = std::hypot(fp.p0, fp.q0) * base;  // MVA
            if (s0 < 1e-3) continue;  // no meaningful linearization at zero flow
            const double up = fp.p0 * base / s0, uq = fp.q0 * base / s0;
            std::vector<std::pair<int, double>> c;
            auto put = [&](int var, double coeff) {
                if (var >= 0 && coeff != 0.0) c.push_back({var, coeff});
            };
            put(dth[f], (up * fp.dp[0] + uq * fp.dq[0]) * base);
            put(dth[t], (up * fp.dp[1] + uq * fp.dq[1]) * base);
            put(dv[f], (up * fp.dp[2] + uq * fp.dq[2]) * base);
            put(dv[t], (up * fp.dp[3] + uq * fp.dq[3]) * base);
            const int viol = prob.add_var(0.0, lp::kInf, opt.penalty_mva);
            c.push_back({viol, -1.0});
            prob.add_row(lp::Sense::LessEq, br.s_rating - s0, std::move(c));
        }
        // voltage soft limits at pq buses
        for (std::size_t i = 0; i < n; ++i) {
            if (dv[i] < 0) continue;
            const int over = prob.add_var(0.0, lp::kInf, opt.penalty_voltage);
            const int under = prob.add_var(0.0, lp::kInf, opt.penalty_voltage);
            prob.add_row(lp::Sense::LessEq, net.buses[i].v_max - pf.v_mag[i], {{dv[i], 1.0}, {over, -1.0}});
            prob.add_row(lp::Sense::GreaterEq, net.buses[i].v_min - pf.v_mag[i], {{dv[i], 1.0}, {under, 1.0}});
        }

        const auto lps = lp::solve(prob);
        if (lps.status == lp::Status::Unbounded) throw ModelError("acopf: inner LP is unbounded");
        if (lps.status != lp::Status::Optimal)
            throw SolverError("acopf: inner LP infeasible at iteration " + std::to_string(it));

        // extract the LP's target dispatch and relief
        std::vector<double> p_new(net.generators.size());
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            double v = window_lo[g];
            for (int var : seg_vars[g]) v += lps.x[static_cast<std::size_t>(var)];
            p_new[g] = std::clamp(v, net.generators[g].p_min, net.generators[g].p_max);
        }
        std::vector<double> shed_new(n, 0.0);
        double dshed = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (shed_var[i] >= 0) {
                shed_new[i] = lps.x[static_cast<std::size_t>(shed_var[i])];
                if (shed_new[i] < 1e-9) shed_new[i] = 0.0;
                dshed = std::max(dshed, std::fabs(shed_new[i] - shed[i]));
            }
        for (std::size_t i = 0; i < n; ++i) lmp[i] = lps.row_dual[static_cast<std::size_t>(balance_row[i])];

        bool windows_fine = true;
        for (double d : trust) windows_fine = windows_fine && d <= 1.5 * trust_floor + 1e-12;

        double dmax = 0.0;
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            const double move = std::fabs(p_new[g] - p_point[g]);
            dmax = std::max(dmax, move);
            if (!worsened)
                trust[g] = std::clamp(2.0 * move + trust_floor, trust_floor,
                                      std::max(opt.trust_fraction *
                                                   (net.generators[g].p_max - net.generators[g].p_min),
                                               trust_floor));
        }
        p_sched = p_new;
        shed = shed_new;

        if (windows_fine && dmax <= opt.dispatch_tol_mw && dshed <= opt.dispatch_tol_mw &&
            dv_pf <= opt.voltage_tol_pu && it > 1) {
            slp_converged = true;
            break;
        }
    }

    // final operating point at the converged dispatch
    const Network fin = make_snapshot(p_sched, shed);
    pf = run_pf(fin, have_pf ? &pf : nullptr);

    OpfSolution out;
    out.slp_iterations = std::min(it, opt.max_slp_iterations);
    out.converged = slp_converged;
    out.pf = pf;
    out.lmp = lmp;

    // realized dispatch: scheduled for non-slack, proportional share of the
    // realized slack power for slack-bus units; reactive split per bus range.
    std::map<std::size_t, std::vector<std::size_t>> gens_at;
    for (std::size_t g = 0; g < net.generators.size(); ++g)
        gens_at[static_cast<std::size_t>(net.bus_index(net.generators[g].bus))].push_back(g);
    std::vector<double> p_real = p_sched;
    if (gens_at.count(slack_bus)) {
        const auto& sg = gens_at[slack_bus];
        std::vector<double> lo, hi;
        for (auto g : sg) {
            lo.push_back(net.generators[g].p_min);
            hi.push_back(net.generators[g].p_max);
        }
        const auto split = detail::proportional_split(pf.slack_p_mw, lo, hi);
        for (std::size_t k = 0; k < sg.size(); ++k) p_real[sg[k]] = split[k];
    }
    std::vector<double> q_real(net.generators.size(), 0.0);
    for (const auto& [bi, gl] : gens_at) {
        if (net.buses[bi].kind == BusKind::Pq) continue;
        std::vector<double> lo, hi;
        for (auto g : gl) {
            lo.push_back(net.generators[g].q_min);
            hi.push_back(net.generators[g].q_max);
        }
        const auto split = detail::proportional_split(pf.q_gen_mvar[bi], lo, hi);
        for (std::size_t k = 0; k < gl.size(); ++k) q_real[gl[k]] = split[k];
    }
    out.dispatch.resize(net.generators.size());
    out.objective = 0.0;
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        out.dispatch[g] = {net.generators[g].id, p_real[g], q_real[g]};
        out.objective += net.generators[g].cost_at(p_real[g]);
    }

    // soft-constraint accounting at the final AC point
    out.unserved_mw = 0.0;
    for (double s : shed) out.unserved_mw += s;
    out.penalty_total = out.unserved_mw * opt.penalty_unserved;
    out.branch_flows.resize(net.branches.size());
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        out.branch_flows[b] = branch_flow(fin, pf, net.branches[b]);
        const auto& br = net.branches[b];
        if (br.in_service && br.s_rating > 0.0)
            out.penalty_total += opt.penalty_mva * std::max(0.0, out.branch_flows[b].s_mva - br.s_rating);
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.penalty_total += opt.penalty_voltage * std::max(0.0, pf.v_mag[i] - net.buses[i].v_max);
        out.penalty_total += opt.penalty_voltage * std::max(0.0, net.buses[i].v_min - pf.v_mag[i]);
    }
    return out;
}

}  // namespace evgrid
