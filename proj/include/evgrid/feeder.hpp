#pragma once

#include <array>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "evgrid/errors.hpp"
#include "evgrid/geo.hpp"
#include "evgrid/linalg.hpp"

namespace evgrid {

inline constexpr unsigned kPhaseA = 1u, kPhaseB = 2u, kPhaseC = 4u, kPhaseABC = 7u;

inline unsigned phases_from_string(const std::string& s) {
    unsigned m = 0;
    for (char c : s) {
        if (c == 'A' || c == 'a') m |= kPhaseA;
        else if (c == 'B' || c == 'b') m |= kPhaseB;
        else if (c == 'C' || c == 'c') m |= kPhaseC;
        else throw InputError("bad phase spec '" + s + "'");
    }
    return m;
}

inline std::string phases_to_string(unsigned m) {
    std::string s;
    if (m & kPhaseA) s += 'A';
    if (m & kPhaseB) s += 'B';
    if (m & kPhaseC) s += 'C';
    return s;
}

struct FeederNode {
    int id = 0;
    unsigned phases = kPhaseABC;
    LatLon location;
    // constant-power load per phase, kW / kvar; ev_kw is the injected EV
    // component (unity power factor)
    std::array<double, 3> p_kw{0.0, 0.0, 0.0};
    std::array<double, 3> q_kvar{0.0, 0.0, 0.0};
    std::array<double, 3> ev_kw{0.0, 0.0, 0.0};
};

struct FeederSegment {
    int id = 0;
    int from_node = 0, to_node = 0;
    // symmetric 3x3 phase impedance, ohms (length already folded in);
    // zero rows/columns for phases the segment does not carry
    std::array<std::array<Complex, 3>, 3> z{};
    // per-phase shunt admittance, siemens, split half to each end
    std::array<Complex, 3> y_shunt{};
    double amp_rating = 0.0;  // 0 = unrated
};

struct FeederTransformer {
    int id = 0;
    int from_node = 0, to_node = 0;
    double ratio = 1.0;     // per-phase primary:secondary voltage ratio
    Complex z{0.0, 0.0};    // series impedance per phase, ohms on the secondary side
    double kva_rating = 0.0;
};

// Radial feeder rooted at head_node; head_bus names the transmission bus
// this feeder hangs from.
struct Feeder {
    std::string id;
    int head_bus = 0;
    int head_node = 0;
    double base_kv_ll = 12.47;
    std::vector<FeederNode> nodes;
    std::vector<FeederSegment> segments;
    std::vector<FeederTransformer> transformers;

    int node_index(int node_id) const {
        auto it = index_.find(node_id);
        if (it == index_.end())
            throw ModelError("feeder '" + id + "': unknown node " + std::to_string(node_id));
        return it->second;
    }

    void finalize() {
        index_.clear();
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (!index_.emplace(nodes[i].id, static_cast<int>(i)).second)
                throw InputError("feeder '" + id + "': duplicate node id " + std::to_string(nodes[i].id));
        (void)node_index(head_node);
    }

  private:
    std::map<int, int> index_;
};

struct DistOptions {
    double tolerance_pu = 1e-6;  // max per-phase voltage change between sweeps
    int max_sweeps = 50;
};

// One directed tree edge in sweep order (segment or transformer).
struct SweepEdge {
    bool is_transformer = false;
    std::size_t index = 0;   // into segments or transformers
    int parent = 0, child = 0;  // node indices
};

struct DistSolution {
    std::vector<std::array<Complex, 3>> node_v;   // volts
    std::vector<std::array<Complex, 3>> seg_i;    // amps, per segment
    std::vector<std::array<Complex, 3>> xfmr_i;   // amps, secondary side
    std::array<Complex, 3> head_power_va{};       // per-phase complex power at the head
    double losses_kw = 0.0;
    bool converged = false;
    int iterations = 0;

    double head_p_mw() const {
        return (head_power_va[0].real() + head_power_va[1].real() + head_power_va[2].real()) / 1e6;
    }
    double head_q_mvar() const {
        return (head_power_va[0].imag() + head_power_va[1].imag() + head_power_va[2].imag()) / 1e6;
    }
};

// Balanced positive-sequence head voltage set for a feeder, volts line-neutral.
inline std::array<Complex, 3> balanced_head(const Feeder& f, double v_pu = 1.0, double ang_rad = 0.0) {
    const double v_ln = f.base_kv_ll * 1000.0 / std::sqrt(3.0) * v_pu;
    const double a = 2.0 * 3.14159265358979323846 / 3.0;
    return {std::polar(v_ln, ang_rad), std::polar(v_ln, ang_rad - a), std::polar(v_ln, ang_rad + a)};
}

namespace detail {

// Breadth-first tree ordering from the head; rejects cycles and detached nodes.
inline std::vector<SweepEdge> sweep_order(const Feeder& f) {
    const std::size_t n = f.nodes.size();
    std::vector<std::vector<SweepEdge>> adj(n);
    auto link = [&](bool is_x, std::size_t idx, int a_id, int b_id) {
        const int a = f.node_index(a_id), b = f.node_index(b_id);
        SweepEdge e{is_x, idx, a, b};
        adj[static_cast<std::size_t>(a)].push_back(e);
        SweepEdge r{is_x, idx, b, a};
        adj[static_cast<std::size_t>(b)].push_back(r);
    };
    for (std::size_t s = 0; s < f.segments.size(); ++s)
        link(false, s, f.segments[s].from_node, f.segments[s].to_node);
    for (std::size_t t = 0; t < f.transformers.size(); ++t)
        link(true, t, f.transformers[t].from_node, f.transformers[t].to_node);

    std::vector<SweepEdge> order;
    std::vector<char> seen(n, 0);
    // parent edge key per node: (kind, index), kind -1 for the root
    std::vector<std::pair<int, std::size_t>> came_by(n, {-1, 0});
    std::vector<int> queue{f.node_index(f.head_node)};
    seen[static_cast<std::size_t>(queue[0])] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const int u = queue[qi];
        for (const auto& e : adj[static_cast<std::size_t>(u)]) {
            const std::pair<int, std::size_t> key{e.is_transformer ? 1 : 0, e.index};
            if (key == came_by[static_cast<std::size_t>(u)]) continue;  // edge we arrived by
            if (seen[static_cast<std::size_t>(e.child)])
                throw TopologyError("feeder '" + f.id + "': cycle detected at node " +
                                    std::to_string(f.nodes[static_cast<std::size_t>(e.child)].id));
            seen[static_cast<std::size_t>(e.child)] = 1;
            came_by[static_cast<std::size_t>(e.child)] = key;
            order.push_back(e);
            queue.push_back(e.child);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i])
            throw TopologyError("feeder '" + f.id + "': node " + std::to_string(f.nodes[i].id) +
                                " is not connected to the head");
    return order;
}

}  // namespace detail

// Forward/backward sweep to a fixed point. Constant-power loads; line shunts
// split half per end; transformers are an ideal per-phase ratio plus series
// impedance on the secondary side.
inline DistSolution solve_feeder(const Feeder& f, const std::array<Complex, 3>& head_v,
                                 const DistOptions& opt = {}) {
    for (const auto& v : head_v)
        if (std::abs(v) <= 0.0) throw InputError("feeder '" + f.id + "': head voltage magnitude must be > 0");

    const std::size_t n = f.nodes.size();
    const auto order = detail::sweep_order(f);
    const int head = f.node_index(f.head_node);

    // per-node parent edge (for child lookup during sweeps) and nominal
    // magnitude for pu convergence scaling
    std::vector<double> vnom(n, std::abs(head_v[0]));
    std::vector<std::array<Complex, 3>> v(n), v_prev(n);
    std::vector<std::array<Complex, 3>> node_shunt(n, {Complex{}, Complex{}, Complex{}});

    for (const auto& s : f.segments) {
        const auto a = static_cast<std::size_t>(f.node_index(s.from_node));
        const auto b = static_cast<std::size_t>(f.node_index(s.to_node));
        for (int p = 0; p < 3; ++p) {
            node_shunt[a][p] += s.y_shunt[static_cast<std::size_t>(p)] * 0.5;
            node_shunt[b][p] += s.y_shunt[static_cast<std::size_t>(p)] * 0.5;
        }
    }

    // initial guess: head voltage carried down, scaled through ratios
    v[static_cast<std::size_t>(head)] = head_v;
    for (const auto& e : order) {
        const auto pi = static_cast<std::size_t>(e.parent), ci = static_cast<std::size_t>(e.child);
        v[ci] = v[pi];
        vnom[ci] = vnom[pi];
        if (e.is_transformer) {
            const double ratio = f.transformers[e.index].ratio;
            for (auto& ph : v[ci]) ph /= ratio;
            vnom[ci] /= ratio;
        }
        const unsigned mask = f.nodes[ci].phases;
        for (int p = 0; p < 3; ++p)
            if (!(mask & (1u << p))) v[ci][static_cast<std::size_t>(p)] = Complex(0.0, 0.0);
    }

    DistSolution sol;
    sol.seg_i.assign(f.segments.size(), {Complex{}, Complex{}, Complex{}});
    sol.xfmr_i.assign(f.transformers.size(), {Complex{}, Complex{}, Complex{}});

    std::vector<std::array<Complex, 3>> inj(n);  // accumulated current entering each node
    std::array<Complex, 3> head_i{};

    auto load_current = [&](std::size_t ni, int p) -> Complex {
        const auto& node = f.nodes[ni];
        if (!(node.phases & (1u << p))) return {};
        const double pw = (node.p_kw[static_cast<std::size_t>(p)] + node.ev_kw[static_cast<std::size_t>(p)]) * 1e3;
        const double qv = node.q_kvar[static_cast<std::size_t>(p)] * 1e3;
        if (pw == 0.0 && qv == 0.0) return {};
        const Complex s(pw, qv);
        const Complex vp = v[ni][static_cast<std::size_t>(p)];
        if (std::abs(vp) < 1e-6)
            throw NumericalError("feeder '" + f.id + "': collapsed voltage at node " +
                                 std::to_string(node.id));
        return std::conj(s / vp);
    };

    int sweep = 0;
    double last_dmax = 0.0;
    for (sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        v_prev = v;

        // backward: accumulate currents from the leaves toward the head
        for (std::size_t ni = 0; ni < n; ++ni)
            for (int p = 0; p < 3; ++p)
                inj[ni][static_cast<std::size_t>(p)] =
                    load_current(ni, p) + node_shunt[ni][static_cast<std::size_t>(p)] *
                                              v[ni][static_cast<std::size_t>(p)];
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const auto pi = static_cast<std::size_t>(it->parent), ci = static_cast<std::size_t>(it->child);
            if (it->is_transformer) {
                const auto& x = f.transformers[it->index];
                sol.xfmr_i[it->index] = inj[ci];
                for (int p = 0; p < 3; ++p)
                    inj[pi][static_cast<std::size_t>(p)] += inj[ci][static_cast<std::size_t>(p)] / x.ratio;
            } else {
                sol.seg_i[it->index] = inj[ci];
                for (int p = 0; p < 3; ++p)
                    inj[pi][static_cast<std::size_t>(p)] += inj[ci][static_cast<std::size_t>(p)];
            }
        }
        head_i = inj[static_cast<std::size_t>(head)];

        // forward: propagate voltages from the head toward the leaves
        double dmax = 0.0;
        for (const auto& e : order) {
            const auto pi = static_cast<std::size_t>(e.parent), ci = static_cast<std::size_t>(e.child);
            std::array<Complex, 3> nv{};
            if (e.is_transformer) {
                const auto& x = f.transformers[e.index];
                for (int p = 0; p < 3; ++p)
                    nv[static_cast<std::size_t>(p)] =
                        v[pi][static_cast<std::size_t>(p)] / x.ratio -
                        x.z * sol.xfmr_i[e.index][static_cast<std::size_t>(p)];
            } else {
                const auto& s = f.segments[e.index];
                for (int p = 0; p < 3; ++p) {
                    Complex drop{};
                    for (int q = 0; q < 3; ++q)
                        drop += s.z[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] *
                                sol.seg_i[e.index][static_cast<std::size_t>(q)];
                    nv[static_cast<std::size_t>(p)] = v[pi][static_cast<std::size_t>(p)] - drop;
                }
            }
            const unsigned mask = f.nodes[ci].phases;
            for (int p = 0; p < 3; ++p) {
                if (!(mask & (1u << p))) {
                    nv[static_cast<std::size_t>(p)] = Complex(0.0, 0.0);
                    continue;
                }
                dmax = std::max(dmax, std::abs(nv[static_cast<std::size_t>(p)] -
                                               v_prev[ci][static_cast<std::size_t>(p)]) / vnom[ci]);
            }
            v[ci] = nv;
        }

        last_dmax = dmax;
        if (dmax <= opt.tolerance_pu) {
            sol.converged = true;
            break;
        }
    }
    sol.iterations = std::min(sweep, opt.max_sweeps);
    if (!sol.converged)
        throw NumericalError("feeder '" + f.id + "': sweep did not converge in " +
                             std::to_string(opt.max_sweeps) + " iterations (last voltage change " +
                             std::to_string(last_dmax) + " pu)");

    sol.node_v = v;
    for (int p = 0; p < 3; ++p)
        sol.head_power_va[static_cast<std::size_t>(p)] =
            head_v[static_cast<std::size_t>(p)] * std::conj(head_i[static_cast<std::size_t>(p)]);

    // losses = head real power minus load and shunt consumption
    double load_w = 0.0, shunt_w = 0.0;
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (int p = 0; p < 3; ++p) {
            load_w += (f.nodes[ni].p_kw[static_cast<std::size_t>(p)] +
                       f.nodes[ni].ev_kw[static_cast<std::size_t>(p)]) *
                      1e3;
            const Complex vp = v[ni][static_cast<std::size_t>(p)];
            shunt_w += (std::conj(node_shunt[ni][static_cast<std::size_t>(p)]) * vp * std::conj(vp)).real();
        }
    }
    const double head_w = sol.head_power_va[0].real() + sol.head_power_va[1].real() +
                          sol.head_power_va[2].real();
    sol.losses_kw = (head_w - load_w - shunt_w) / 1e3;
    return sol;
}

struct Overload {
    enum class Kind { Segment, Transformer };
    Kind kind;
    int element_id = 0;
    double ratio = 0.0;  // loading relative to rating
};

using OverloadList = std::vector<Overload>;

// Elements loaded past their rating, with the loading ratio.
inline OverloadList feeder_overloads(const DistSolution& sol, const Feeder& f) {
    if (!sol.converged) throw StaleStateError("feeder '" + f.id + "': overload scan needs a converged solve");
    OverloadList out;
    for (std::size_t s = 0; s < f.segments.size(); ++s) {
        if (f.segments[s].amp_rating <= 0.0) continue;
        double amps = 0.0;
        for (int p = 0; p < 3; ++p)
            amps = std::max(amps, std::abs(sol.seg_i[s][static_cast<std::size_t>(p)]));
        const double ratio = amps / f.segments[s].amp_rating;
        if (ratio > 1.0) out.push_back({Overload::Kind::Segment, f.segments[s].id, ratio});
    }
    for (std::size_t t = 0; t < f.transformers.size(); ++t) {
        const auto& x = f.transformers[t];
        if (x.kva_rating <= 0.0) continue;
        double kva = 0.0;
        const auto ci = static_cast<std::size_t>(f.node_index(x.to_node));
        for (int p = 0; p < 3; ++p)
            kva += std::abs(sol.node_v[ci][static_cast<std::size_t>(p)] *
                            std::conj(sol.xfmr_i[t][static_cast<std::size_t>(p)])) /
                   1e3;
        const double ratio = kva / x.kva_rating;
        if (ratio > 1.0) out.push_back({Overload::Kind::Transformer, x.id, ratio});
    }
    return out;
}

// Per-boundary-bus positive-sequence equivalent (P, Q) in MW/MVAr: the three
// phase head powers summed. Negative/zero-sequence head content is reported
// via head_unbalance as a diagnostic only.
struct BoundaryAggregate {
    double p_mw = 0.0;
    double q_mvar = 0.0;
    double unbalance = 0.0;  // max per-phase deviation from the mean, fraction
};

inline std::map<int, BoundaryAggregate> aggregate_boundary(
    const std::vector<const Feeder*>& feeders, const std::vector<const DistSolution*>& solutions) {
    if (feeders.size() != solutions.size())
        throw InputError("aggregate_boundary: feeder/solution count mismatch");
    std::map<int, BoundaryAggregate> out;
    for (std::size_t i = 0; i < feeders.size(); ++i) {
        const auto* f = feeders[i];
        const auto* s = solutions[i];
        if (s == nullptr || !s->converged)
            throw StaleStateError("aggregate_boundary: feeder '" + f->id + "' has no converged solution");
        auto& agg = out[f->head_bus];
        agg.p_mw += s->head_p_mw();
        agg.q_mvar += s->head_q_mvar();
        const double mean_p = s->head_p_mw() / 3.0 * 1e6;
        double dev = 0.0;
        for (int p = 0; p < 3; ++p)
            dev = std::max(dev, std::fabs(s->head_power_va[static_cast<std::size_t>(p)].real() - mean_p));
        if (mean_p != 0.0) agg.unbalance = std::max(agg.unbalance, dev / std::fabs(mean_p));
    }
    return out;
}

}  // namespace evgrid
