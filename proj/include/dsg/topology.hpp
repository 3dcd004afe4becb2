#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsg/core.hpp"

namespace dsg {

// Per-node state. `bits[i]` is the membership bit deciding the sublist at
// level i+1; a node appears in one list per level from 0 up to bits.size().
// The timestamp/group/dominating arrays are indexed by level and grown on
// demand; absent entries read as the defaults (0 / own id / false).
struct NodeRecord {
    NodeKey key;
    bool is_dummy = false;
    std::vector<std::uint8_t> bits;
    std::vector<std::int64_t> timestamps;
    std::vector<std::int64_t> group_ids;
    std::vector<std::uint8_t> dominating;
    int group_base = 0;

    int top_level() const { return static_cast<int>(bits.size()); }
    std::int64_t id() const { return key.whole; }

    std::int64_t ts(int level) const {
        return level < static_cast<int>(timestamps.size()) ? timestamps[level] : 0;
    }
    void set_ts(int level, std::int64_t v) {
        if (level >= static_cast<int>(timestamps.size())) timestamps.resize(level + 1, 0);
        timestamps[level] = v;
    }
    std::int64_t gid(int level) const {
        if (level < static_cast<int>(group_ids.size())) return group_ids[level];
        return is_dummy ? 0 : key.whole;
    }
    void set_gid(int level, std::int64_t v) {
        if (level >= static_cast<int>(group_ids.size())) {
            std::size_t old = group_ids.size();
            group_ids.resize(level + 1, 0);
            if (!is_dummy)
                for (std::size_t i = old; i < group_ids.size(); ++i) group_ids[i] = key.whole;
        }
        group_ids[level] = v;
    }
    bool dom(int level) const {
        return level < static_cast<int>(dominating.size()) && dominating[level] != 0;
    }
    void set_dom(int level, bool v) {
        if (level >= static_cast<int>(dominating.size())) dominating.resize(level + 1, 0);
        dominating[level] = v ? 1 : 0;
    }
};

struct Topology {
    std::vector<NodeRecord> nodes;  // ascending by key
    int balance_a = 2;

    int height() const {
        int top = 0;
        for (const auto& n : nodes) top = std::max(top, n.top_level());
        return top + 1;
    }
    std::size_t real_count() const {
        std::size_t c = 0;
        for (const auto& n : nodes) c += !n.is_dummy;
        return c;
    }
    std::size_t dummy_count() const { return nodes.size() - real_count(); }

    int find(const NodeKey& k) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), k,
                                   [](const NodeRecord& n, const NodeKey& key) { return n.key < key; });
        if (it == nodes.end() || !(it->key == k)) return -1;
        return static_cast<int>(it - nodes.begin());
    }
    int find_id(std::int64_t id) const { return find(NodeKey::real(id)); }

    int insert(NodeRecord rec) {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), rec.key,
                                   [](const NodeRecord& n, const NodeKey& key) { return n.key < key; });
        if (it != nodes.end() && it->key == rec.key) throw std::invalid_argument("duplicate key");
        return static_cast<int>(std::distance(nodes.begin(), nodes.insert(it, std::move(rec))));
    }
    void erase(int idx) { nodes.erase(nodes.begin() + idx); }
};

// Derived per-level list structure: lists[level] holds the member index sets
// (each in key order), list_of/pos_of locate a node inside its level.
struct LevelLists {
    std::vector<std::vector<std::vector<int>>> lists;
    std::vector<std::vector<int>> list_of;
    std::vector<std::vector<int>> pos_of;

    int levels() const { return static_cast<int>(lists.size()); }
};

inline LevelLists build_levels(const Topology& t) {
    LevelLists v;
    int h = t.height();
    int n = static_cast<int>(t.nodes.size());
    v.lists.resize(h);
    v.list_of.assign(h, std::vector<int>(n, -1));
    v.pos_of.assign(h, std::vector<int>(n, -1));

    std::vector<int> base(n);
    for (int i = 0; i < n; ++i) base[i] = i;
    v.lists[0].push_back(base);

    for (int lvl = 0; lvl + 1 < h; ++lvl) {
        for (const auto& list : v.lists[lvl]) {
            std::vector<int> zero, one;
            for (int idx : list) {
                const auto& node = t.nodes[idx];
                if (node.top_level() <= lvl) continue;
                (node.bits[lvl] == 0 ? zero : one).push_back(idx);
            }
            if (!zero.empty()) v.lists[lvl + 1].push_back(std::move(zero));
            if (!one.empty()) v.lists[lvl + 1].push_back(std::move(one));
        }
    }
    for (int lvl = 0; lvl < h; ++lvl)
        for (std::size_t li = 0; li < v.lists[lvl].size(); ++li)
            for (std::size_t p = 0; p < v.lists[lvl][li].size(); ++p) {
                int idx = v.lists[lvl][li][p];
                v.list_of[lvl][idx] = static_cast<int>(li);
                v.pos_of[lvl][idx] = static_cast<int>(p);
            }
    return v;
}

struct Violation {
    std::string code;
    int level = -1;
    int list_index = -1;
    std::string detail;
};
using ValidationReport = std::vector<Violation>;

// Checks every structural invariant and reports each breach with its
// location. An empty report means the topology is a member of the family.
inline ValidationReport validate(const Topology& t) {
    ValidationReport rep;
    auto flag = [&rep](std::string code, int level, int list, std::string detail) {
        rep.push_back(Violation{std::move(code), level, list, std::move(detail)});
    };

    for (std::size_t i = 0; i + 1 < t.nodes.size(); ++i)
        if (!(t.nodes[i].key < t.nodes[i + 1].key))
            flag("base_order", 0, 0, "keys out of order near " + t.nodes[i].key.str());
    for (const auto& n : t.nodes) {
        if (!n.is_dummy && !n.key.is_integer())
            flag("id_domain", -1, -1, "real node with fractional key " + n.key.str());
        if (n.group_base < 0 || n.group_base > t.height())
            flag("group_base_range", -1, -1, n.key.str());
    }
    if (t.balance_a < 2) flag("balance_param", -1, -1, "a < 2");

    LevelLists v = build_levels(t);
    int a = t.balance_a;
    for (int lvl = 0; lvl < v.levels(); ++lvl) {
        for (std::size_t li = 0; li < v.lists[lvl].size(); ++li) {
            const auto& list = v.lists[lvl][li];
            int reals = 0;
            for (int idx : list) reals += !t.nodes[idx].is_dummy;
            bool has_zero = false, has_one = false;
            for (int idx : list) {
                const auto& node = t.nodes[idx];
                if (node.top_level() <= lvl) {
                    if (!node.is_dummy && reals >= 2)
                        flag("split_incomplete", lvl, static_cast<int>(li),
                             "real node " + node.key.str() + " stops in a multi-node list");
                    continue;
                }
                if (!node.is_dummy && reals == 1)
                    flag("over_extended", lvl, static_cast<int>(li),
                         "lone real node " + node.key.str() + " extends upward");
                (node.bits[lvl] == 0 ? has_zero : has_one) = true;
            }
            int extenders = 0;
            for (int idx : list) extenders += t.nodes[idx].top_level() > lvl;
            if (extenders >= 2 && (!has_zero || !has_one))
                flag("one_sided_split", lvl, static_cast<int>(li), "all members share one sublist");
            if (reals == 0 && !list.empty())
                flag("dummy_only_list", lvl, static_cast<int>(li), "");

            // a-balance: no a+1 consecutive members may share a sublist.
            int run = 0, prev_bit = -1;
            for (int idx : list) {
                const auto& node = t.nodes[idx];
                int bit = node.top_level() > lvl ? node.bits[lvl] : -1;
                if (bit >= 0 && bit == prev_bit) {
                    ++run;
                } else {
                    run = bit >= 0 ? 1 : 0;
                }
                prev_bit = bit;
                if (run >= a + 1) {
                    flag("a_balance", lvl, static_cast<int>(li),
                         "run of " + std::to_string(run) + " ending at " + node.key.str());
                    run = 1;  // report once per breach point
                }
            }
        }
    }

    std::size_t n = t.real_count();
    if (n > 0 && t.dummy_count() > (n + a - 1) / a)
        flag("dummy_budget", -1, -1,
             std::to_string(t.dummy_count()) + " dummies for " + std::to_string(n) + " nodes");
    return rep;
}

namespace detail {

// Random 0/1 interleaving with ceil(s/2) zeros and no run longer than max_run.
inline std::vector<std::uint8_t> balanced_interleaving(std::size_t s, int max_run, Rng& rng) {
    std::vector<std::uint8_t> bits(s);
    for (std::size_t i = 0; i < s; ++i) bits[i] = i % 2;  // fallback pattern
    std::vector<std::uint8_t> cand(s);
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::size_t zeros = (s + 1) / 2;
        for (std::size_t i = 0; i < s; ++i) cand[i] = i < zeros ? 0 : 1;
        for (std::size_t i = s; i > 1; --i) std::swap(cand[i - 1], cand[rng.below(i)]);
        int run = 0, prev = -1;
        bool ok = true;
        for (std::size_t i = 0; i < s && ok; ++i) {
            run = (cand[i] == prev) ? run + 1 : 1;
            prev = cand[i];
            ok = run <= max_run;
        }
        if (ok) return cand;
    }
    if (s % 2 == 1) return bits;
    // Even sizes need ceil(s/2) zeros; the alternating pattern already has it.
    return bits;
}

inline void bisect(Topology& t, std::vector<int>& members, int level, Rng& rng) {
    if (members.size() <= 1) return;
    auto bits = balanced_interleaving(members.size(), t.balance_a, rng);
    std::vector<int> zero, one;
    for (std::size_t i = 0; i < members.size(); ++i) {
        t.nodes[members[i]].bits.push_back(bits[i]);
        (bits[i] == 0 ? zero : one).push_back(members[i]);
    }
    bisect(t, zero, level + 1, rng);
    bisect(t, one, level + 1, rng);
}

}  // namespace detail

// Builds a valid initial topology by recursive balanced bisection: each list
// splits into ceil/floor halves through an a-balance-respecting interleaving,
// giving height ceil(log2 n) + 1 and fresh per-node defaults.
inline Topology build_initial(std::vector<std::int64_t> ids, int a, std::uint64_t seed) {
    if (ids.empty()) throw std::invalid_argument("empty id set");
    if (a < 2) throw std::invalid_argument("balance parameter must be >= 2");
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i + 1 < ids.size(); ++i)
        if (ids[i] == ids[i + 1]) throw std::invalid_argument("duplicate id " + std::to_string(ids[i]));
    if (ids.front() < 1) throw std::invalid_argument("ids must be positive");

    Topology t;
    t.balance_a = a;
    t.nodes.reserve(ids.size());
    for (std::int64_t id : ids) {
        NodeRecord rec;
        rec.key = NodeKey::real(id);
        t.nodes.push_back(std::move(rec));
    }
    Rng rng(Rng::mix(seed, 0x746f706fULL));
    std::vector<int> all(t.nodes.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    detail::bisect(t, all, 0, rng);
    for (auto& n : t.nodes) n.group_base = n.top_level();
    return t;
}

struct CommonLevel {
    int alpha = 0;
    std::vector<int> list;  // member indices of the level-alpha common list
};

// Highest level whose list contains both nodes, with that list's members.
inline CommonLevel highest_common_level(const Topology& t, std::int64_t u, std::int64_t v) {
    int ui = t.find_id(u), vi = t.find_id(v);
    if (ui < 0 || vi < 0) throw std::invalid_argument("unknown node id");
    if (ui == vi) throw std::invalid_argument("u and v must differ");
    if (t.nodes[ui].is_dummy || t.nodes[vi].is_dummy) throw std::invalid_argument("dummy endpoint");

    const auto& ub = t.nodes[ui].bits;
    const auto& vb = t.nodes[vi].bits;
    int alpha = 0;
    while (alpha < static_cast<int>(std::min(ub.size(), vb.size())) && ub[alpha] == vb[alpha]) ++alpha;

    CommonLevel out;
    out.alpha = alpha;
    for (int i = 0; i < static_cast<int>(t.nodes.size()); ++i) {
        const auto& n = t.nodes[i];
        if (n.top_level() < alpha) continue;
        if (std::equal(ub.begin(), ub.begin() + alpha, n.bits.begin())) out.list.push_back(i);
    }
    return out;
}

// Count of levels at which two nodes share a list (common prefix length + 1).
inline int shared_level_count(const NodeRecord& x, const NodeRecord& w) {
    const auto& xb = x.bits;
    const auto& wb = w.bits;
    int p = 0;
    while (p < static_cast<int>(std::min(xb.size(), wb.size())) && xb[p] == wb[p]) ++p;
    return p + 1;
}

}  // namespace dsg
