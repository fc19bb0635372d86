#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "evgrid/errors.hpp"
#include "evgrid/geo.hpp"
#include "evgrid/linalg.hpp"

namespace evgrid {

enum class BusKind { Slack, Pv, Pq };

inline std::string to_string(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::Pv: return "pv";
        default: return "pq";
    }
}

inline BusKind bus_kind_from_string(const std::string& s) {
    if (s == "slack") return BusKind::Slack;
    if (s == "pv") return BusKind::Pv;
    if (s == "pq") return BusKind::Pq;
    throw InputError("unknown bus kind '" + s + "'");
}

struct Bus {
    int id = 0;
    double base_kv = 0.0;
    double v_mag = 1.0;   // setpoint for slack/pv, initial guess for pq (pu)
    double v_ang = 0.0;   // radians
    double v_min = 0.9;
    double v_max = 1.1;
    BusKind kind = BusKind::Pq;
    LatLon location;
    bool is_boundary = false;  // distribution interconnection point
    int area = 0;              // stored attribute only, no area constraints
};

struct Branch {
    int id = 0;
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;        // pu series resistance
    double x = 0.0;        // pu series reactance
    double b_shunt = 0.0;  // pu total line charging
    double tap = 1.0;      // off-nominal ratio at from side, 1.0 for lines
    double s_rating = 0.0; // MVA nameplate, 0 = unrated
    bool in_service = true;
};

struct Generator {
    int id = 0;
    int bus = 0;
    double p_min = 0.0, p_max = 0.0;  // MW
    double q_min = 0.0, q_max = 0.0;  // MVAr
    double cost_a = 0.0;              // $/h
    double cost_b = 0.0;              // $/MWh
    double cost_c = 0.0;              // $/MW^2 h
    double p_out = 0.0, q_out = 0.0;  // dispatch, MW / MVAr

    double cost_at(double p_mw) const { return cost_a + cost_b * p_mw + cost_c * p_mw * p_mw; }
    double marginal_at(double p_mw) const { return cost_b + 2.0 * cost_c * p_mw; }
};

struct LoadPoint {
    int bus = 0;
    double p_base = 0.0;  // MW
    double q_base = 0.0;  // MVAr
    double p_ev = 0.0;    // MW, mutable per hour via network snapshots
};

struct Shunt {
    int bus = 0;
    double g_s = 0.0;  // pu conductance on system base
    double b_s = 0.0;  // pu susceptance on system base
};

// Transmission network snapshot. Treated as immutable once built; hourly EV
// updates clone the network and replace the loads (see with_ev_loads).
struct Network {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<LoadPoint> loads;
    std::vector<Shunt> shunts;

    int bus_index(int bus_id) const {
        auto it = bus_index_.find(bus_id);
        if (it == bus_index_.end()) throw ModelError("unknown bus id " + std::to_string(bus_id));
        return it->second;
    }

    bool has_bus(int bus_id) const { return bus_index_.count(bus_id) != 0; }

    void finalize() {
        bus_index_.clear();
        for (std::size_t i = 0; i < buses.size(); ++i) {
            if (!bus_index_.emplace(buses[i].id, static_cast<int>(i)).second)
                throw InputError("duplicate bus id " + std::to_string(buses[i].id));
        }
    }

    // Total P demand (MW) at bus index, background plus EV.
    double p_demand_mw(int bi) const {
        double p = 0.0;
        for (const auto& l : loads)
            if (bus_index(l.bus) == bi) p += l.p_base + l.p_ev;
        return p;
    }

    double q_demand_mvar(int bi) const {
        double q = 0.0;
        for (const auto& l : loads)
            if (bus_index(l.bus) == bi) q += l.q_base;
        return q;
    }

    // New snapshot with the EV component of every load replaced from the
    // given per-bus map (MW). Buses absent from the map get zero EV load.
    Network with_ev_loads(const std::map<int, double>& ev_mw_per_bus) const {
        Network n = *this;
        std::map<int, double> remaining = ev_mw_per_bus;
        for (auto& l : n.loads) {
            auto it = remaining.find(l.bus);
            if (it != remaining.end()) {
                l.p_ev = it->second;
                remaining.erase(it);
            } else {
                l.p_ev = 0.0;
            }
        }
        for (const auto& [bus, mw] : remaining) {
            LoadPoint lp;
            lp.bus = bus;
            lp.p_ev = mw;
            n.loads.push_back(lp);
        }
        return n;
    }

  private:
    std::map<int, int> bus_index_;
};

// Bus admittance matrix, pu on the system base, compressed rows.
struct Admittance {
    std::size_t n = 0;
    SparseComplex y;

    Complex at(std::size_t i, std::size_t k) const { return y.at(i, k); }
};

// Y assembly per the standard pi model. Off-diagonal Y[f][t] = -y_series/tap;
// diagonals accumulate series, half charging, and bus shunt admittances.
inline Admittance build_admittance(const Network& net) {
    const std::size_t n = net.buses.size();
    std::map<std::pair<std::size_t, std::size_t>, Complex> tri;
    for (const auto& br : net.branches) {
        if (!br.in_service) continue;
        if (!net.has_bus(br.from_bus) || !net.has_bus(br.to_bus))
            throw ModelError("branch " + std::to_string(br.id) + " references a missing bus");
        if (br.r == 0.0 && br.x == 0.0)
            throw ModelError("branch " + std::to_string(br.id) + " has zero impedance");
        const std::size_t f = static_cast<std::size_t>(net.bus_index(br.from_bus));
        const std::size_t t = static_cast<std::size_t>(net.bus_index(br.to_bus));
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex ysh(0.0, br.b_shunt / 2.0);
        const double tap = (br.tap == 0.0) ? 1.0 : br.tap;
        tri[{f, f}] += (ys + ysh) / (tap * tap);
        tri[{t, t}] += ys + ysh;
        tri[{f, t}] += -ys / tap;
        tri[{t, f}] += -ys / tap;
    }
    for (const auto& sh : net.shunts) {
        const std::size_t i = static_cast<std::size_t>(net.bus_index(sh.bus));
        tri[{i, i}] += Complex(sh.g_s, sh.b_s);
    }
    // ensure structural diagonal for isolated buses
    for (std::size_t i = 0; i < n; ++i) tri.emplace(std::make_pair(i, i), Complex(0.0, 0.0));
    Admittance a;
    a.n = n;
    a.y = SparseComplex::from_triplets(n, tri);
    return a;
}

struct ValidationIssue {
    enum class Kind { Island, MissingSlack, ExtraSlack, BoundViolation, DanglingReference, ZeroImpedance };
    Kind kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

// Report-only network checks: connectivity islands, slack presence per
// island, and field-level bound violations.
inline ValidationReport validate_network(const Network& net) {
    ValidationReport rep;
    auto add = [&rep](ValidationIssue::Kind k, const std::string& d) { rep.issues.push_back({k, d}); };

    const std::size_t n = net.buses.size();
    // adjacency over in-service branches
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& br : net.branches) {
        if (!net.has_bus(br.from_bus) || !net.has_bus(br.to_bus)) {
            add(ValidationIssue::Kind::DanglingReference,
                "branch " + std::to_string(br.id) + " references a missing bus");
            continue;
        }
        if (br.r == 0.0 && br.x == 0.0)
            add(ValidationIssue::Kind::ZeroImpedance, "branch " + std::to_string(br.id) + " has zero impedance");
        if (br.from_bus == br.to_bus)
            add(ValidationIssue::Kind::BoundViolation,
                "branch " + std::to_string(br.id) + " connects a bus to itself");
        if (!br.in_service) continue;
        const std::size_t f = static_cast<std::size_t>(net.bus_index(br.from_bus));
        const std::size_t t = static_cast<std::size_t>(net.bus_index(br.to_bus));
        adj[f].push_back(t);
        adj[t].push_back(f);
    }

    // island discovery
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::size_t> stack{s};
        comp[s] = ncomp;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t v : adj[u])
                if (comp[v] < 0) {
                    comp[v] = ncomp;
                    stack.push_back(v);
                }
        }
        ++ncomp;
    }
    std::vector<int> slack_count(ncomp, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (net.buses[i].kind == BusKind::Slack) slack_count[comp[i]]++;
    for (int c = 0; c < ncomp; ++c) {
        if (slack_count[c] == 0)
            add(ValidationIssue::Kind::MissingSlack, "island " + std::to_string(c) + " has no slack bus");
        if (slack_count[c] > 1)
            add(ValidationIssue::Kind::ExtraSlack, "island " + std::to_string(c) + " has multiple slack buses");
    }
    if (ncomp > 1)
        add(ValidationIssue::Kind::Island, std::to_string(ncomp) + " islands in network '" + net.name + "'");

    for (const auto& b : net.buses) {
        if (!(b.v_min < b.v_max))
            add(ValidationIssue::Kind::BoundViolation, "bus " + std::to_string(b.id) + " has v_min >= v_max");
        if (!(b.base_kv > 0.0))
            add(ValidationIssue::Kind::BoundViolation, "bus " + std::to_string(b.id) + " has base_kv <= 0");
    }
    for (const auto& g : net.generators) {
        if (g.p_min > g.p_max)
            add(ValidationIssue::Kind::BoundViolation, "generator " + std::to_string(g.id) + " has p_min > p_max");
        if (g.q_min > g.q_max)
            add(ValidationIssue::Kind::BoundViolation, "generator " + std::to_string(g.id) + " has q_min > q_max");
        if (g.cost_c < 0.0)
            add(ValidationIssue::Kind::BoundViolation,
                "generator " + std::to_string(g.id) + " has concave cost (c < 0)");
        if (!net.has_bus(g.bus))
            add(ValidationIssue::Kind::DanglingReference,
                "generator " + std::to_string(g.id) + " references missing bus " + std::to_string(g.bus));
    }
    for (const auto& l : net.loads) {
        if (l.p_ev < 0.0)
            add(ValidationIssue::Kind::BoundViolation, "load at bus " + std::to_string(l.bus) + " has p_ev < 0");
        if (!net.has_bus(l.bus))
            add(ValidationIssue::Kind::DanglingReference, "load references missing bus " + std::to_string(l.bus));
    }
    return rep;
}

}  // namespace evgrid
