#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "dsg/priority.hpp"
#include "dsg/topology.hpp"

namespace dsg {

// Timestamped communication history, ground truth for working-set numbers
// and the group-connectivity checks.
struct CommunicationGraph {
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::int64_t>> edges;
    std::set<std::int64_t> nodes;

    static std::pair<std::int64_t, std::int64_t> key(std::int64_t u, std::int64_t v) {
        return {std::min(u, v), std::max(u, v)};
    }

    void record(std::int64_t u, std::int64_t v, std::int64_t time) {
        if (u == v) throw std::invalid_argument("self edge");
        auto& hist = edges[key(u, v)];
        if (!hist.empty() && hist.back() >= time) throw std::invalid_argument("times must increase per pair");
        hist.push_back(time);
        nodes.insert(u);
        nodes.insert(v);
    }

    std::int64_t last_time(std::int64_t u, std::int64_t v) const {
        auto it = edges.find(key(u, v));
        return it == edges.end() || it->second.empty() ? 0 : it->second.back();
    }

    // Nodes reachable from any seed through edges with a communication time
    // inside [from, to], both ends inclusive.
    std::set<std::int64_t> reachable(const std::vector<std::int64_t>& seeds, std::int64_t from,
                                     std::int64_t to) const {
        std::map<std::int64_t, std::vector<std::int64_t>> adj;
        for (const auto& [k, hist] : edges) {
            bool in_window = std::any_of(hist.begin(), hist.end(),
                                         [&](std::int64_t t) { return t >= from && t <= to; });
            if (!in_window) continue;
            adj[k.first].push_back(k.second);
            adj[k.second].push_back(k.first);
        }
        std::set<std::int64_t> seen(seeds.begin(), seeds.end());
        std::vector<std::int64_t> frontier(seeds.begin(), seeds.end());
        while (!frontier.empty()) {
            std::int64_t x = frontier.back();
            frontier.pop_back();
            auto it = adj.find(x);
            if (it == adj.end()) continue;
            for (std::int64_t y : it->second)
                if (seen.insert(y).second) frontier.push_back(y);
        }
        return seen;
    }
};

// Working set number T(u,v): count of nodes reachable from u or v in the
// window since their last communication; n on first contact.
inline std::int64_t working_set_number(const CommunicationGraph& g, std::int64_t u, std::int64_t v,
                                       std::int64_t now, std::int64_t population) {
    std::int64_t last = g.last_time(u, v);
    if (last == 0) return population;
    auto reach = g.reachable({u, v}, last, now);
    return static_cast<std::int64_t>(reach.size());
}

// WS(sigma) = sum of log2(T_i) over a request history.
inline double ws_bound(const std::vector<std::int64_t>& working_set_numbers) {
    double s = 0.0;
    for (auto t : working_set_numbers) s += std::log2(static_cast<double>(std::max<std::int64_t>(1, t)));
    return s;
}

struct MedianOracle {
    PriorityValue value;
    std::int64_t origin = 0;
    std::int64_t rank = 0;  // 1-based position in the (value, origin) order
};

// Exact median: the element at position ceil(n/2) in the sorted order, with
// ties broken by origin id.
inline MedianOracle exact_median(std::vector<RankedPriority> values) {
    if (values.empty()) throw std::invalid_argument("empty input");
    std::sort(values.begin(), values.end());
    std::int64_t rank = (static_cast<std::int64_t>(values.size()) + 1) / 2;
    const auto& pick = values[rank - 1];
    return {pick.value, pick.origin, rank};
}

// 1-based rank of (value, origin) in the sorted multiset.
inline std::int64_t rank_of(const std::vector<RankedPriority>& values, const RankedPriority& probe) {
    std::int64_t below = 0;
    for (const auto& v : values) below += v < probe;
    return below + 1;
}

struct Lemma2Sample {
    int level = 0;
    std::int64_t group_id = 0;
    std::int64_t member = 0;  // the reference node x
};

struct Lemma2Violation {
    Lemma2Sample sample;
    std::int64_t disconnected = 0;
};

// For each sampled (group, member x): every group member y with a strictly
// newer level stamp must be connected to the rest in the communication graph
// restricted to times >= T^x_d.
inline std::vector<Lemma2Violation> lemma2_check(const Topology& t, const CommunicationGraph& g,
                                                 const std::vector<Lemma2Sample>& samples,
                                                 std::int64_t now) {
    std::vector<Lemma2Violation> out;
    for (const auto& s : samples) {
        int xi = t.find_id(s.member);
        if (xi < 0) continue;
        std::int64_t tx = t.nodes[xi].ts(s.level);
        std::vector<std::int64_t> newer;
        for (const auto& n : t.nodes) {
            if (n.is_dummy) continue;
            if (n.gid(s.level) == s.group_id && n.ts(s.level) > tx) newer.push_back(n.id());
        }
        if (newer.size() <= 1) continue;
        auto reach = g.reachable({newer.front()}, tx, now);
        for (std::int64_t y : newer)
            if (!reach.count(y)) out.push_back({s, y});
    }
    return out;
}

}  // namespace dsg
