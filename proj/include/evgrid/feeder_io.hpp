#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "evgrid/case_io.hpp"
#include "evgrid/feeder.hpp"

namespace evgrid {

// Feeder file: sectioned whitespace-separated tables, one feeder per block.
//
//   feeder <id>
//   head_bus <transmission bus id>
//   head_node <node id>
//   base_kv_ll <kV>
//   [nodes]        id phases lat lon
//   [segments]     id from to amp_rating  zaa_r zaa_x zab_r zab_x zac_r zac_x
//                  zbb_r zbb_x zbc_r zbc_x zcc_r zcc_x [ya_g ya_b yb_g yb_b yc_g yc_b]
//   [transformers] id from to ratio r x kva_rating
//   [loads]        node phase p_kw q_kvar
//
// Impedances in ohms (symmetric 3x3 via its 6 unique entries), shunt
// admittance in siemens per phase (optional columns, default 0). A file may
// hold several blocks, each starting with a `feeder` line.
inline std::vector<Feeder> load_feeders(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open feeder file: " + path.string());
    std::vector<Feeder> out;
    Feeder* cur = nullptr;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = detail::tokens(line);
        if (tok.empty()) continue;
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        if (tok[0] == "feeder") {
            out.emplace_back();
            cur = &out.back();
            cur->id = tok.size() > 1 ? tok[1] : ("feeder" + std::to_string(out.size()));
            section.clear();
            continue;
        }
        if (cur == nullptr) throw InputError(where + ": data before any 'feeder' header");
        if (tok[0][0] == '[') {
            section = tok[0];
            continue;
        }
        if (tok[0] == "head_bus") {
            cur->head_bus = static_cast<int>(parse_int(tok.at(1), where));
            continue;
        }
        if (tok[0] == "head_node") {
            cur->head_node = static_cast<int>(parse_int(tok.at(1), where));
            continue;
        }
        if (tok[0] == "base_kv_ll") {
            cur->base_kv_ll = parse_num(tok.at(1), where);
            continue;
        }
        auto need = [&](std::size_t k) {
            if (tok.size() < k)
                throw InputError(where + ": expected at least " + std::to_string(k) + " columns in " +
                                 section);
        };
        if (section == "[nodes]") {
            need(4);
            FeederNode nd;
            nd.id = static_cast<int>(parse_int(tok[0], where + " node id"));
            nd.phases = phases_from_string(tok[1]);
            nd.location.lat = parse_num(tok[2], where + " lat");
            nd.location.lon = parse_num(tok[3], where + " lon");
            cur->nodes.push_back(nd);
        } else if (section == "[segments]") {
            need(16);
            FeederSegment sg;
            sg.id = static_cast<int>(parse_int(tok[0], where + " segment id"));
            sg.from_node = static_cast<int>(parse_int(tok[1], where));
            sg.to_node = static_cast<int>(parse_int(tok[2], where));
            sg.amp_rating = parse_num(tok[3], where + " amp_rating");
            auto zc = [&](std::size_t k) {
                return Complex(parse_num(tok[4 + 2 * k], where + " z"), parse_num(tok[5 + 2 * k], where + " z"));
            };
            const Complex zaa = zc(0), zab = zc(1), zac = zc(2), zbb = zc(3), zbc = zc(4), zcc = zc(5);
            sg.z = {{{zaa, zab, zac}, {zab, zbb, zbc}, {zac, zbc, zcc}}};
            if (tok.size() >= 22)
                for (int p = 0; p < 3; ++p)
                    sg.y_shunt[static_cast<std::size_t>(p)] =
                        Complex(parse_num(tok[16 + 2 * static_cast<std::size_t>(p)], where + " y"),
                                parse_num(tok[17 + 2 * static_cast<std::size_t>(p)], where + " y"));
            cur->segments.push_back(sg);
        } else if (section == "[transformers]") {
            need(7);
            FeederTransformer x;
            x.id = static_cast<int>(parse_int(tok[0], where + " transformer id"));
            x.from_node = static_cast<int>(parse_int(tok[1], where));
            x.to_node = static_cast<int>(parse_int(tok[2], where));
            x.ratio = parse_num(tok[3], where + " ratio");
            x.z = Complex(parse_num(tok[4], where + " r"), parse_num(tok[5], where + " x"));
            x.kva_rating = parse_num(tok[6], where + " kva_rating");
            cur->transformers.push_back(x);
        } else if (section == "[loads]") {
            need(4);
            const int node = static_cast<int>(parse_int(tok[0], where + " load node"));
            const unsigned mask = phases_from_string(tok[1]);
            const double p = parse_num(tok[2], where + " p_kw");
            const double q = parse_num(tok[3], where + " q_kvar");
            // find the node in this feeder block (finalize not yet called)
            FeederNode* target = nullptr;
            for (auto& nd : cur->nodes)
                if (nd.id == node) target = &nd;
            if (!target) throw InputError(where + ": load references unknown node " + std::to_string(node));
            int nph = 0;
            for (int ph = 0; ph < 3; ++ph)
                if (mask & (1u << ph)) ++nph;
            if (nph == 0) throw InputError(where + ": load with empty phase set");
            for (int ph = 0; ph < 3; ++ph)
                if (mask & (1u << ph)) {
                    target->p_kw[static_cast<std::size_t>(ph)] += p / nph;
                    target->q_kvar[static_cast<std::size_t>(ph)] += q / nph;
                }
        } else {
            throw InputError(where + ": data outside a known section");
        }
    }
    for (auto& f : out) f.finalize();
    return out;
}

inline void save_feeders(const std::vector<Feeder>& feeders, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write feeder file: " + path.string());
    for (const auto& f : feeders) {
        out << "feeder " << f.id << "\n";
        out << "head_bus " << f.head_bus << "\n";
        out << "head_node " << f.head_node << "\n";
        out << "base_kv_ll " << fmt_num(f.base_kv_ll) << "\n";
        out << "[nodes]\n# id phases lat lon\n";
        for (const auto& nd : f.nodes)
            out << nd.id << ' ' << phases_to_string(nd.phases) << ' ' << fmt_num(nd.location.lat) << ' '
                << fmt_num(nd.location.lon) << "\n";
        out << "[segments]\n";
        for (const auto& s : f.segments) {
            out << s.id << ' ' << s.from_node << ' ' << s.to_node << ' ' << fmt_num(s.amp_rating);
            const Complex zs[6] = {s.z[0][0], s.z[0][1], s.z[0][2], s.z[1][1], s.z[1][2], s.z[2][2]};
            for (const auto& z : zs) out << ' ' << fmt_num(z.real()) << ' ' << fmt_num(z.imag());
            for (const auto& ysh : s.y_shunt) out << ' ' << fmt_num(ysh.real()) << ' ' << fmt_num(ysh.imag());
            out << "\n";
        }
        out << "[transformers]\n";
        for (const auto& x : f.transformers)
            out << x.id << ' ' << x.from_node << ' ' << x.to_node << ' ' << fmt_num(x.ratio) << ' '
                << fmt_num(x.z.real()) << ' ' << fmt_num(x.z.imag()) << ' ' << fmt_num(x.kva_rating) << "\n";
        out << "[loads]\n";
        for (const auto& nd : f.nodes)
            for (int p = 0; p < 3; ++p)
                if (nd.p_kw[static_cast<std::size_t>(p)] != 0.0 || nd.q_kvar[static_cast<std::size_t>(p)] != 0.0)
                    out << nd.id << ' ' << phases_to_string(1u << p) << ' '
                        << fmt_num(nd.p_kw[static_cast<std::size_t>(p)]) << ' '
                        << fmt_num(nd.q_kvar[static_cast<std::size_t>(p)]) << "\n";
        out << "\n";
    }
}

}  // namespace evgrid
