#pragma once

#include <charconv>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dsg/topology.hpp"

namespace dsg {

inline NodeKey parse_key(const std::string& s) {
    NodeKey k;
    std::size_t plus = s.find('+');
    auto parse_int = [](std::string_view sv) {
        std::int64_t v = 0;
        auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
        if (res.ec != std::errc() || res.ptr != sv.data() + sv.size())
            throw std::invalid_argument("bad key field");
        return v;
    };
    if (plus == std::string::npos) {
        k.whole = parse_int(s);
        return k;
    }
    k.whole = parse_int(std::string_view(s).substr(0, plus));
    std::size_t slash = s.find('/', plus);
    if (slash == std::string::npos) throw std::invalid_argument("bad fractional key " + s);
    k.num = static_cast<std::uint64_t>(parse_int(std::string_view(s).substr(plus + 1, slash - plus - 1)));
    k.den = static_cast<std::uint64_t>(parse_int(std::string_view(s).substr(slash + 1)));
    if (k.den == 0 || k.num >= k.den) throw std::invalid_argument("bad fractional key " + s);
    return k;
}

// Canonical dump: deterministic key order and array padding so that equal
// topologies serialize to byte-identical text.
inline std::string export_topology(const Topology& t) {
    using json = nlohmann::ordered_json;
    int h = t.height();
    json out;
    out["height"] = h;
    out["balance"] = t.balance_a;
    out["nodes"] = json::array();
    for (const auto& n : t.nodes) {
        json jn;
        jn["id"] = n.key.str();
        jn["is_dummy"] = n.is_dummy;
        std::string bits;
        for (auto b : n.bits) bits.push_back(b ? '1' : '0');
        jn["membership"] = bits;
        json ts = json::array(), gs = json::array(), ds = json::array();
        for (int lvl = 0; lvl < h; ++lvl) {
            ts.push_back(n.ts(lvl));
            gs.push_back(n.gid(lvl));
            ds.push_back(n.dom(lvl) ? 1 : 0);
        }
        jn["timestamps"] = std::move(ts);
        jn["group_ids"] = std::move(gs);
        jn["dominating"] = std::move(ds);
        jn["group_base"] = n.group_base;
        out["nodes"].push_back(std::move(jn));
    }
    return out.dump(1) + "\n";
}

inline Topology import_topology(const std::string& text) {
    using json = nlohmann::json;
    json in = json::parse(text);
    Topology t;
    t.balance_a = in.at("balance").get<int>();
    int h = in.at("height").get<int>();
    for (const auto& jn : in.at("nodes")) {
        NodeRecord n;
        n.key = parse_key(jn.at("id").get<std::string>());
        n.is_dummy = jn.at("is_dummy").get<bool>();
        for (char c : jn.at("membership").get<std::string>()) {
            if (c != '0' && c != '1') throw std::invalid_argument("bad membership bit");
            n.bits.push_back(c == '1');
        }
        n.timestamps = jn.at("timestamps").get<std::vector<std::int64_t>>();
        n.group_ids = jn.at("group_ids").get<std::vector<std::int64_t>>();
        for (int b : jn.at("dominating").get<std::vector<int>>()) n.dominating.push_back(b ? 1 : 0);
        n.group_base = jn.at("group_base").get<int>();
        if (static_cast<int>(n.timestamps.size()) != h || static_cast<int>(n.group_ids.size()) != h)
            throw std::invalid_argument("array length != height");
        t.nodes.push_back(std::move(n));
    }
    for (std::size_t i = 0; i + 1 < t.nodes.size(); ++i)
        if (!(t.nodes[i].key < t.nodes[i + 1].key)) throw std::invalid_argument("nodes not sorted");
    if (t.height() != h) throw std::invalid_argument("height mismatch");
    return t;
}

}  // namespace dsg
