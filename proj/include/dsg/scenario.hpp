#pragma once

#include <string>
#include <vector>

#include "dsg/dsg_engine.hpp"
#include "dsg/oracle.hpp"
#include "dsg/simulator.hpp"
#include "dsg/topology.hpp"

namespace dsg {
namespace scenario {

// Ten-node scripted state (ids are alphabet positions: B=2, D=4, E=5, F=6,
// G=7, H=8, I=9, J=10, U=21, V=22) in which U and V communicate while
// {B,D,G,U} and {E,V} are the established groups, {F,I} and {H,J} sit apart
// with bases 2 and 3, and the level-2 trio {B,G,D} carries timestamp 4.
inline Topology figure3_state() {
    Topology t;
    t.balance_a = 3;
    struct Row {
        std::int64_t id;
        std::vector<std::uint8_t> bits;
        std::vector<std::int64_t> ts;
        std::vector<std::int64_t> gid;
        int base;
    };
    const std::vector<Row> rows = {
        {2, {0, 0, 0, 0}, {0, 2, 4, 0, 0}, {2, 2, 2, 2, 2}, 1},        // B
        {4, {0, 0, 0, 1}, {0, 2, 4, 0, 0}, {2, 2, 2, 4, 4}, 1},        // D
        {5, {1, 0, 0, 0}, {0, 5, 0, 0, 0}, {5, 5, 5, 5, 5}, 1},        // E
        {6, {1, 0, 0, 1}, {0, 2, 2, 0, 0}, {6, 6, 6, 6, 6}, 2},        // F
        {7, {0, 0, 1}, {0, 2, 4, 0, 0}, {2, 2, 2, 7, 7}, 1},           // G
        {8, {1, 1, 0, 0}, {0, 2, 2, 0, 0}, {10, 10, 10, 10, 8}, 3},    // H
        {9, {1, 0, 1}, {0, 2, 2, 0, 0}, {6, 6, 6, 9, 9}, 2},           // I
        {10, {1, 1, 0, 1}, {0, 2, 2, 0, 0}, {10, 10, 10, 10, 10}, 3},  // J
        {21, {0, 1}, {0, 2, 0, 0, 0}, {2, 2, 21, 21, 21}, 1},          // U
        {22, {1, 1, 1}, {0, 5, 0, 0, 0}, {5, 5, 22, 22, 22}, 1},       // V
    };
    for (const auto& r : rows) {
        NodeRecord n;
        n.key = NodeKey::real(r.id);
        n.bits = r.bits;
        n.timestamps = r.ts;
        n.group_ids = r.gid;
        n.group_base = r.base;
        t.nodes.push_back(std::move(n));
    }
    std::sort(t.nodes.begin(), t.nodes.end(),
              [](const NodeRecord& a, const NodeRecord& b) { return a.key < b.key; });
    return t;
}

inline PinnedMedians figure3_pins() { return PinnedMedians{{1, 2}, {2, 5}}; }

constexpr std::int64_t fig3_u = 21;
constexpr std::int64_t fig3_v = 22;
constexpr std::int64_t fig3_time = 8;

// Expectations on the transformed state. Returns human-readable failures.
inline std::vector<std::string> figure3_check(const Topology& t, const TransformReport& rep) {
    std::vector<std::string> bad;
    auto expect = [&bad](bool ok, const std::string& what) {
        if (!ok) bad.push_back(what);
    };

    // 0-subgraph at level 1 holds exactly {B, D, E, G, U, V}.
    std::vector<std::int64_t> zero_side;
    for (const auto& n : t.nodes)
        if (!n.is_dummy && n.top_level() >= 1 && n.bits[0] == 0) zero_side.push_back(n.id());
    expect(zero_side == std::vector<std::int64_t>({2, 4, 5, 7, 21, 22}),
           "level-1 0-subgraph is not {B,D,E,G,U,V}");

    int bi = t.find_id(2);
    expect(bi >= 0 && t.nodes[bi].ts(2) == 4, "T^B_2 != 4");

    // B's level-2 group is exactly {B, G, D}.
    std::vector<std::int64_t> b_group;
    for (const auto& n : t.nodes)
        if (!n.is_dummy && n.top_level() >= 2 && n.gid(2) == t.nodes[bi].gid(2))
            b_group.push_back(n.id());
    expect(b_group == std::vector<std::int64_t>({2, 4, 7}), "level-2 group of B is not {B,G,D}");

    int fi = t.find_id(6), ii = t.find_id(9);
    expect(fi >= 0 && t.nodes[fi].group_base == 2, "group base of F != 2");
    expect(ii >= 0 && t.nodes[ii].group_base == 2, "group base of I != 2");
    expect(t.nodes[fi].ts(0) == 0 && t.nodes[fi].ts(1) == 0, "F carries stamps below its base");
    expect(t.nodes[ii].ts(0) == 0 && t.nodes[ii].ts(1) == 0, "I carries stamps below its base");

    expect(validate(t).empty(), "validate reports violations");
    expect(check_group_contiguity(t).empty(), "group contiguity broken");
    expect(rep.direct_link_level >= 0, "no direct link recorded");
    return bad;
}

// Communication script behind the working-set example: the last (u,v)
// request sees exactly five reachable nodes (e, a, k, u, v).
struct WsScript {
    std::vector<Request> history;
    std::int64_t query_u, query_v;
    std::int64_t query_time;
    std::int64_t expected;
};

inline WsScript figure2_script() {
    WsScript s;
    const std::int64_t a = 1, b = 2, c = 3, e = 5, k = 11, u = 21, v = 22;
    s.history = {{1, u, v}, {2, e, a}, {3, a, k}, {4, k, u}, {5, b, c}};
    s.query_u = u;
    s.query_v = v;
    s.query_time = 6;
    s.expected = 5;
    return s;
}

// Repeating-pair script: after (U,V) and a k-1 step chain hanging off U, the
// working set number of the next (U,V) request is k+1.
inline WsScript figure4_script(int k) {
    WsScript s;
    const std::int64_t u = 100, v = 101;
    s.history.push_back({1, u, v});
    std::int64_t prev = u;
    for (int i = 1; i < k; ++i) {
        s.history.push_back({1 + i, prev, i});
        prev = i;
    }
    s.query_u = u;
    s.query_v = v;
    s.query_time = 1 + k;
    s.expected = k + 1;
    return s;
}

}  // namespace scenario
}  // namespace dsg
