#pragma once

#include <stdexcept>
#include <vector>

#include "dsg/topology.hpp"

namespace dsg {

struct RoutePath {
    std::vector<NodeKey> hops;  // source first, destination last
    long long rounds = 0;       // one per edge traversed
    int alpha = 0;              // highest common level of src and dst

    int distance() const { return hops.size() < 2 ? 0 : static_cast<int>(hops.size()) - 2; }
};

// Standard top-down greedy skip graph routing: from the source's top level,
// move toward the destination while the next id does not overshoot, drop a
// level otherwise. Dummies are traversable relays but not endpoints.
inline RoutePath route(const Topology& t, const LevelLists& view, std::int64_t src, std::int64_t dst) {
    int si = t.find_id(src), di = t.find_id(dst);
    if (si < 0 || di < 0) throw std::invalid_argument("unknown endpoint");
    if (t.nodes[si].is_dummy || t.nodes[di].is_dummy) throw std::invalid_argument("dummy endpoint");

    RoutePath out;
    out.hops.push_back(t.nodes[si].key);
    if (si == di) {
        out.alpha = t.nodes[si].top_level();
        return out;
    }
    const NodeKey target = t.nodes[di].key;
    const bool rightward = t.nodes[di].key > t.nodes[si].key;

    int cur = si;
    int level = t.nodes[si].top_level();
    while (cur != di) {
        if (level < 0) throw std::logic_error("routing fell below base level");
        int li = view.list_of[level][cur];
        int pos = view.pos_of[level][cur];
        const auto& list = view.lists[level][li];
        int next = -1;
        if (rightward && pos + 1 < static_cast<int>(list.size())) next = list[pos + 1];
        if (!rightward && pos > 0) next = list[pos - 1];
        bool take = false;
        if (next >= 0) {
            const NodeKey& nk = t.nodes[next].key;
            take = rightward ? !(nk > target) : !(nk < target);
        }
        if (take) {
            cur = next;
            out.hops.push_back(t.nodes[cur].key);
            out.rounds += 1;
        } else {
            --level;
        }
    }

    const auto& ub = t.nodes[si].bits;
    const auto& vb = t.nodes[di].bits;
    int alpha = 0;
    while (alpha < static_cast<int>(std::min(ub.size(), vb.size())) && ub[alpha] == vb[alpha]) ++alpha;
    out.alpha = alpha;
    return out;
}

inline RoutePath route(const Topology& t, std::int64_t src, std::int64_t dst) {
    LevelLists view = build_levels(t);
    return route(t, view, src, dst);
}

}  // namespace dsg
