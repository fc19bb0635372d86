#pragma once

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "evgrid/csvio.hpp"
#include "evgrid/errors.hpp"
#include "evgrid/grid.hpp"

namespace evgrid {

// Grid case file: sectioned whitespace-separated tables.
//
//   case <name>
//   base_mva <value>
//   [buses]      id base_kv v_mag v_ang v_min v_max kind lat lon is_boundary area
//   [branches]   id from to r x b_shunt tap s_rating status
//   [generators] id bus p_min p_max q_min q_max cost_a cost_b cost_c p_out q_out
//   [loads]      bus p_base q_base p_ev
//   [shunts]     bus g_s b_s
//
// Units: MW / MVAr for powers, pu impedance/admittance on the system base,
// v_ang in radians, kind one of slack|pv|pq. '#' starts a comment.
// Files containing "mpc." are read as MATPOWER cases instead (see below).

namespace detail {

inline std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string t;
    while (is >> t) {
        if (!t.empty() && t[0] == '#') break;
        out.push_back(t);
    }
    return out;
}

}  // namespace detail

inline Network load_case_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open case file: " + path.string());
    Network net;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto tok = detail::tokens(line);
        if (tok.empty()) continue;
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        if (tok[0][0] == '[') {
            section = tok[0];
            continue;
        }
        if (tok[0] == "case") {
            net.name = tok.size() > 1 ? tok[1] : "";
            continue;
        }
        if (tok[0] == "base_mva") {
            net.base_mva = parse_num(tok.at(1), where + " base_mva");
            continue;
        }
        auto need = [&](std::size_t n) {
            if (tok.size() < n)
                throw InputError(where + ": expected " + std::to_string(n) + " columns in " + section);
        };
        if (section == "[buses]") {
            need(10);
            Bus b;
            b.id = static_cast<int>(parse_int(tok[0], where + " bus id"));
            b.base_kv = parse_num(tok[1], where + " base_kv");
            b.v_mag = parse_num(tok[2], where + " v_mag");
            b.v_ang = parse_num(tok[3], where + " v_ang");
            b.v_min = parse_num(tok[4], where + " v_min");
            b.v_max = parse_num(tok[5], where + " v_max");
            b.kind = bus_kind_from_string(tok[6]);
            b.location.lat = parse_num(tok[7], where + " lat");
            b.location.lon = parse_num(tok[8], where + " lon");
            b.is_boundary = parse_int(tok[9], where + " is_boundary") != 0;
            if (tok.size() > 10) b.area = static_cast<int>(parse_int(tok[10], where + " area"));
            net.buses.push_back(b);
        } else if (section == "[branches]") {
            need(9);
            Branch br;
            br.id = static_cast<int>(parse_int(tok[0], where + " branch id"));
            br.from_bus = static_cast<int>(parse_int(tok[1], where + " from"));
            br.to_bus = static_cast<int>(parse_int(tok[2], where + " to"));
            br.r = parse_num(tok[3], where + " r");
            br.x = parse_num(tok[4], where + " x");
            br.b_shunt = parse_num(tok[5], where + " b_shunt");
            br.tap = parse_num(tok[6], where + " tap");
            br.s_rating = parse_num(tok[7], where + " s_rating");
            br.in_service = parse_int(tok[8], where + " status") != 0;
            net.branches.push_back(br);
        } else if (section == "[generators]") {
            need(11);
            Generator g;
            g.id = static_cast<int>(parse_int(tok[0], where + " gen id"));
            g.bus = static_cast<int>(parse_int(tok[1], where + " gen bus"));
            g.p_min = parse_num(tok[2], where + " p_min");
            g.p_max = parse_num(tok[3], where + " p_max");
            g.q_min = parse_num(tok[4], where + " q_min");
            g.q_max = parse_num(tok[5], where + " q_max");
            g.cost_a = parse_num(tok[6], where + " cost_a");
            g.cost_b = parse_num(tok[7], where + " cost_b");
            g.cost_c = parse_num(tok[8], where + " cost_c");
            g.p_out = parse_num(tok[9], where + " p_out");
            g.q_out = parse_num(tok[10], where + " q_out");
            net.generators.push_back(g);
        } else if (section == "[loads]") {
            need(4);
            LoadPoint l;
            l.bus = static_cast<int>(parse_int(tok[0], where + " load bus"));
            l.p_base = parse_num(tok[1], where + " p_base");
            l.q_base = parse_num(tok[2], where + " q_base");
            l.p_ev = parse_num(tok[3], where + " p_ev");
            net.loads.push_back(l);
        } else if (section == "[shunts]") {
            need(3);
            Shunt s;
            s.bus = static_cast<int>(parse_int(tok[0], where + " shunt bus"));
            s.g_s = parse_num(tok[1], where + " g_s");
            s.b_s = parse_num(tok[2], where + " b_s");
            net.shunts.push_back(s);
        } else {
            throw InputError(where + ": data outside a known section");
        }
    }
    net.finalize();
    return net;
}

inline void save_case_text(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write case file: " + path.string());
    out << "case " << (net.name.empty() ? "unnamed" : net.name) << "\n";
    out << "base_mva " << fmt_num(net.base_mva) << "\n";
    out << "[buses]\n# id base_kv v_mag v_ang v_min v_max kind lat lon is_boundary area\n";
    for (const auto& b : net.buses)
        out << b.id << ' ' << fmt_num(b.base_kv) << ' ' << fmt_num(b.v_mag) << ' ' << fmt_num(b.v_ang) << ' '
            << fmt_num(b.v_min) << ' ' << fmt_num(b.v_max) << ' ' << to_string(b.kind) << ' '
            << fmt_num(b.location.lat) << ' ' << fmt_num(b.location.lon) << ' ' << (b.is_boundary ? 1 : 0)
            << ' ' << b.area << "\n";
    out << "[branches]\n# id from to r x b_shunt tap s_rating status\n";
    for (const auto& br : net.branches)
        out << br.id << ' ' << br.from_bus << ' ' << br.to_bus << ' ' << fmt_num(br.r) << ' ' << fmt_num(br.x)
            << ' ' << fmt_num(br.b_shunt) << ' ' << fmt_num(br.tap) << ' ' << fmt_num(br.s_rating) << ' '
            << (br.in_service ? 1 : 0) << "\n";
    out << "[generators]\n# id bus p_min p_max q_min q_max cost_a cost_b cost_c p_out q_out\n";
    for (const auto& g : net.generators)
        out << g.id << ' ' << g.bus << ' ' << fmt_num(g.p_min) << ' ' << fmt_num(g.p_max) << ' '
            << fmt_num(g.q_min) << ' ' << fmt_num(g.q_max) << ' ' << fmt_num(g.cost_a) << ' '
            << fmt_num(g.cost_b) << ' ' << fmt_num(g.cost_c) << ' ' << fmt_num(g.p_out) << ' '
            << fmt_num(g.q_out) << "\n";
    out << "[loads]\n# bus p_base q_base p_ev\n";
    for (const auto& l : net.loads)
        out << l.bus << ' ' << fmt_num(l.p_base) << ' ' << fmt_num(l.q_base) << ' ' << fmt_num(l.p_ev) << "\n";
    out << "[shunts]\n# bus g_s b_s\n";
    for (const auto& s : net.shunts) out << s.bus << ' ' << fmt_num(s.g_s) << ' ' << fmt_num(s.b_s) << "\n";
}

// MATPOWER .m ingestion. Column mapping:
//   mpc.bus    BUS_I TYPE PD QD GS BS AREA VM VA BASE_KV ZONE VMAX VMIN
//              (TYPE 3=slack, 2=pv, 1=pq; VA degrees; GS/BS MW/MVAr at 1 pu)
//   mpc.gen    BUS PG QG QMAX QMIN VG MBASE STATUS PMAX PMIN
//   mpc.branch F T R X B RATEA RATEB RATEC TAP SHIFT STATUS
//   mpc.gencost MODEL STARTUP SHUTDOWN NCOST c2 c1 c0  (polynomial only)
// Phase shift != 0 is rejected (not modeled).
namespace detail {

inline std::vector<std::vector<double>> matpower_matrix(const std::string& text, const std::string& field) {
    const auto start = text.find("mpc." + field);
    if (start == std::string::npos) return {};
    const auto open = text.find('[', start);
    const auto close = text.find(']', open);
    if (open == std::string::npos || close == std::string::npos)
        throw InputError("malformed MATPOWER matrix mpc." + field);
    std::vector<std::vector<double>> rows;
    std::string body = text.substr(open + 1, close - open - 1);
    std::istringstream is(body);
    std::string line;
    while (std::getline(is, line, ';')) {
        // strip % comments
        auto pc = line.find('%');
        if (pc != std::string::npos) line = line.substr(0, pc);
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

inline Network load_case_matpower(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open case file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();

    Network net;
    net.name = path.stem().string();
    std::smatch m;
    if (std::regex_search(text, m, std::regex(R"(mpc\.baseMVA\s*=\s*([0-9.eE+-]+))")))
        net.base_mva = std::stod(m[1]);

    for (const auto& row : detail::matpower_matrix(text, "bus")) {
        if (row.size() < 13) throw InputError("MATPOWER bus row too short");
        Bus b;
        b.id = static_cast<int>(row[0]);
        const int type = static_cast<int>(row[1]);
        b.kind = type == 3 ? BusKind::Slack : (type == 2 ? BusKind::Pv : BusKind::Pq);
        b.base_kv = row[9] > 0.0 ? row[9] : 138.0;
        b.v_mag = row[7];
        b.v_ang = row[8] * Projection::kDegToRad;
        b.v_max = row[11];
        b.v_min = row[12];
        b.area = static_cast<int>(row[6]);
        net.buses.push_back(b);
        if (row[2] != 0.0 || row[3] != 0.0) {
            LoadPoint l;
            l.bus = b.id;
            l.p_base = row[2];
            l.q_base = row[3];
            net.loads.push_back(l);
        }
        if (row[4] != 0.0 || row[5] != 0.0) {
            Shunt s;
            s.bus = b.id;
            s.g_s = row[4] / net.base_mva;
            s.b_s = row[5] / net.base_mva;
            net.shunts.push_back(s);
        }
    }
    const auto gens = detail::matpower_matrix(text, "gen");
    const auto costs = detail::matpower_matrix(text, "gencost");
    int gid = 0;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        const auto& row = gens[i];
        if (row.size() < 10) throw InputError("MATPOWER gen row too short");
        if (row[7] <= 0.0) continue;  // out of service
        Generator g;
        g.id = ++gid;
        g.bus = static_cast<int>(row[0]);
        g.p_out = row[1];
        g.q_out = row[2];
        g.q_max = row[3];
        g.q_min = row[4];
        g.p_max = row[8];
        g.p_min = row[9];
        if (i < costs.size()) {
            const auto& c = costs[i];
            if (c.size() >= 4) {
                if (static_cast<int>(c[0]) != 2)
                    throw InputError("only polynomial MATPOWER gencost (MODEL=2) is supported");
                const int ncost = static_cast<int>(c[3]);
                if (ncost >= 3 && c.size() >= 7) {
                    g.cost_c = c[4];
                    g.cost_b = c[5];
                    g.cost_a = c[6];
                } else if (ncost == 2 && c.size() >= 6) {
                    g.cost_b = c[4];
                    g.cost_a = c[5];
                }
            }
        }
        net.generators.push_back(g);
    }
    int brid = 0;
    for (const auto& row : detail::matpower_matrix(text, "branch")) {
        if (row.size() < 11) throw InputError("MATPOWER branch row too short");
        Branch br;
        br.id = ++brid;
        br.from_bus = static_cast<int>(row[0]);
        br.to_bus = static_cast<int>(row[1]);
        br.r = row[2];
        br.x = row[3];
        br.b_shunt = row[4];
        br.s_rating = row[5];
        br.tap = row[8] == 0.0 ? 1.0 : row[8];
        if (row[9] != 0.0) throw InputError("phase-shifting branch in MATPOWER case is not supported");
        br.in_service = row[10] != 0.0;
        net.branches.push_back(br);
    }
    net.finalize();
    return net;
}

// Loads either format; MATPOWER files are recognized by the mpc. prefix.
inline Network load_case(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open case file: " + path.string());
    std::string head(2048, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    if (head.find("mpc.") != std::string::npos) return load_case_matpower(path);
    return load_case_text(path);
}

}  // namespace evgrid
