#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "dsg/amf.hpp"
#include "dsg/costing.hpp"
#include "dsg/priority.hpp"
#include "dsg/routing.hpp"
#include "dsg/topology.hpp"

namespace dsg {

// Testing hook: forces the median seen by the list containing u and v at the
// given absolute level. Pinned medians compare by value with ties kept on
// the 0-subgraph side.
using PinnedMedians = std::map<int, std::int64_t>;

struct TransformInstrumentation {
    long long fallback_splits = 0;
    long long discipline_breaches = 0;  // uninvolved group split outside the allowed rules
    long long contiguity_renames = 0;
    long long sign_breaches = 0;        // P2 not positive / P3-P4 not negative
    long long ts_monotonicity_breaches = 0;  // reported only, never fatal
    long long bracket_fallbacks = 0;
};

struct LevelMedian {
    int level = 0;  // bit level decided with this median
    bool pinned = false;
    PriorityValue value;
};

struct TransformReport {
    int alpha = 0;
    int direct_link_level = -1;
    long long rounds = 0;
    long long messages = 0;
    int max_message_bits = 0;
    int dummies_inserted = 0;
    int dummies_destroyed = 0;
    int group_splits = 0;
    std::vector<LevelMedian> medians;  // medians received along the u,v path
    TransformInstrumentation instr;
};

struct TransformOptions {
    std::uint64_t seed = 0;
    const PinnedMedians* pins = nullptr;
};

// Eq. (3): a group with id g may be split by a negative median m at time t
// when its priority band straddles m.
inline bool gs_band_contains(std::int64_t g, std::int64_t m, std::int64_t t) {
    return -(g * t) >= m && m >= -((g + 1) * t);
}

namespace engine_detail {

struct WMember {
    NodeKey key;
    std::int64_t id = 0;
    bool is_dummy = false;
    int node_index = -1;  // index into the pre-transform node array
    std::vector<std::uint8_t> newbits;  // bits for levels alpha+1, alpha+2, ...
    PriorityValue P;
    std::map<int, std::int64_t> gid_over;
    std::map<int, bool> dom_over;
    std::map<int, MedianPriority> median_at;  // bit level -> median received
    long long dist_u = 0, dist_v = 0;         // routing distances in S_t
};

// A group (keyed by its pre-split id) whose members took different sides.
struct SplitEvent {
    int level = 0;
    std::int64_t group_id = 0;
    std::vector<int> members;
    std::vector<int> side1;
    bool merged_group = false;
    bool allowed = false;  // case 1 on the communicating group, or the g_s rule
};

enum class Branch { case1, gs_big, gs_small, gs_mid, no_gs };

struct SplitOutcome {
    std::vector<int> zero, one;
    long long rounds = 0;
    Branch branch = Branch::case1;
    bool fallback = false;
    std::int64_t gs_gid = -1;
    bool terminal = false;
};

struct Transformer {
    Topology& topo;
    std::int64_t u_id, v_id;
    std::int64_t now;
    const TransformOptions& opt;
    TransformReport rep;

    std::vector<NodeRecord> snap;      // state before any rule ran
    std::vector<WMember> ws;           // participants in key order (reals first, dummies appended)
    std::vector<std::uint8_t> prefix;  // shared bits of l_alpha (levels 1..alpha)
    int alpha = 0;
    int a;
    int snap_height = 1;
    std::int64_t merged_gid;
    BitTable bits_table;
    CostMeter meter;
    std::vector<SplitEvent> events;                 // operational splits, by current ids
    std::vector<std::pair<int, std::vector<int>>> snap_group_splits;  // (level, ws members)
    std::set<std::int64_t> glower_participants;
    int wu = -1, wv = -1;

    Transformer(Topology& t, std::int64_t u, std::int64_t v, std::int64_t time,
                const TransformOptions& o)
        : topo(t), u_id(u), v_id(v), now(time), opt(o), a(t.balance_a), merged_gid(u) {}

    const NodeRecord& snap_of(const WMember& m) const { return snap[m.node_index]; }
    int snap_find(std::int64_t id) const {
        auto it = std::lower_bound(snap.begin(), snap.end(), NodeKey::real(id),
                                   [](const NodeRecord& n, const NodeKey& k) { return n.key < k; });
        if (it == snap.end() || !(it->key == NodeKey::real(id))) return -1;
        return static_cast<int>(it - snap.begin());
    }

    std::int64_t cur_gid(const WMember& m, int level) const {
        auto it = m.gid_over.find(level);
        if (it != m.gid_over.end()) return it->second;
        return m.is_dummy ? 0 : snap_of(m).gid(level);
    }
    bool cur_dom(const WMember& m, int level) const {
        auto it = m.dom_over.find(level);
        if (it != m.dom_over.end()) return it->second;
        return m.is_dummy ? false : snap_of(m).dom(level);
    }

    // ---- notification ------------------------------------------------------

    void notify_and_snapshot() {
        CommonLevel cl = highest_common_level(topo, u_id, v_id);
        alpha = cl.alpha;
        rep.alpha = alpha;
        std::vector<NodeKey> doomed;
        for (int idx : cl.list)
            if (topo.nodes[idx].is_dummy) doomed.push_back(topo.nodes[idx].key);
        for (const auto& k : doomed) topo.erase(topo.find(k));
        rep.dummies_destroyed += static_cast<int>(doomed.size());
        if (!doomed.empty()) rep.rounds += 1;  // self-destruct splice

        snap = topo.nodes;
        snap_height = topo.height();
        bits_table = BitTable::for_run(topo.nodes.size(), snap_height, now);

        cl = highest_common_level(topo, u_id, v_id);
        int ui = topo.find_id(u_id);
        prefix.assign(topo.nodes[ui].bits.begin(), topo.nodes[ui].bits.begin() + alpha);
        LevelLists pre_view = build_levels(topo);
        for (int idx : cl.list) {
            WMember m;
            m.key = topo.nodes[idx].key;
            m.id = m.key.whole;
            m.node_index = idx;
            m.dist_u = m.id == u_id ? 0 : route(topo, pre_view, m.id, u_id).distance();
            m.dist_v = m.id == v_id ? 0 : route(topo, pre_view, m.id, v_id).distance();
            ws.push_back(std::move(m));
        }
        for (std::size_t i = 0; i < ws.size(); ++i) {
            if (ws[i].id == u_id) wu = static_cast<int>(i);
            if (ws[i].id == v_id) wv = static_cast<int>(i);
        }

        long long spread = 0;
        for (std::size_t i = 0; i < ws.size(); ++i)
            spread = std::max<long long>(
                spread, std::min(std::abs(static_cast<long long>(i) - wu),
                                 std::abs(static_cast<long long>(i) - wv)));
        rep.rounds += 1 + spread + std::max(0, snap_height - 1);
        meter.msg(bits_table.notification_chunk_bits(),
                  static_cast<long long>(ws.empty() ? 0 : ws.size() - 1) * snap_height + 1);
    }

    // ---- priorities P1-P3 and the merge at alpha ---------------------------

    void compute_priorities() {
        const NodeRecord& su = snap[ws[wu].node_index];
        const NodeRecord& sv = snap[ws[wv].node_index];
        std::int64_t gu = su.gid(alpha), gv = sv.gid(alpha);
        for (auto& m : ws) {
            if (m.id == u_id || m.id == v_id) {
                m.P = PriorityValue::inf();
                continue;
            }
            const NodeRecord& sx = snap_of(m);
            std::int64_t gx = sx.gid(alpha);
            if (gx == gu || gx == gv) {
                const NodeRecord& ref = (gx == gu) ? su : sv;
                int c = alpha;
                for (int lvl = 0; lvl < snap_height; ++lvl)
                    if (sx.gid(lvl) == ref.gid(lvl)) c = lvl;
                m.P = PriorityValue::finite(std::min(sx.ts(c), ref.ts(c)));
                if (!(m.P.number > 0)) rep.instr.sign_breaches += 1;
            } else {
                m.P = PriorityValue::finite(-(gx * now) + sx.ts(alpha + 1));
                if (!m.P.is_negative()) rep.instr.sign_breaches += 1;
            }
        }
    }

    void merge_groups() {
        std::int64_t gu = snap[ws[wu].node_index].gid(alpha);
        std::int64_t gv = snap[ws[wv].node_index].gid(alpha);
        for (auto& m : ws) {
            if (m.is_dummy) continue;
            std::int64_t gx = snap_of(m).gid(alpha);
            if (gx == gu || gx == gv) m.gid_over[alpha] = merged_gid;
        }
    }

    // ---- recursion over levels ---------------------------------------------

    int bit_of(const WMember& m, int level) const {
        int i = level - alpha - 1;
        if (i < 0 || i >= static_cast<int>(m.newbits.size())) return -1;
        return m.newbits[i];
    }
    bool all_zero_path(const WMember& m) const {
        for (auto b : m.newbits)
            if (b) return false;
        return true;
    }

    void run_recursion() {
        std::vector<std::vector<int>> frontier;
        {
            std::vector<int> root;
            for (std::size_t i = 0; i < ws.size(); ++i)
                if (!ws[i].is_dummy) root.push_back(static_cast<int>(i));
            frontier.push_back(std::move(root));
        }
        int d = alpha + 1;
        while (!frontier.empty()) {
            if (d > alpha + 4 * 64) throw std::logic_error("transformation failed to terminate");
            std::vector<std::vector<int>> next;
            long long level_rounds = 0;
            std::vector<SplitOutcome> outcomes;
            outcomes.reserve(frontier.size());

            for (auto& L : frontier) {
                SplitOutcome oc = split_list(L, d);
                level_rounds = std::max(level_rounds, oc.rounds);
                for (int m : oc.zero) ws[m].newbits.push_back(0);
                for (int m : oc.one) ws[m].newbits.push_back(1);
                outcomes.push_back(std::move(oc));
            }

            int planned = plan_balance_dummies(frontier, d);
            level_rounds += 1 + (planned > 0 ? 1 : 0);

            for (std::size_t li = 0; li < frontier.size(); ++li) {
                const SplitOutcome& oc = outcomes[li];
                bool split_here = reassign_group_ids(frontier[li], oc, d);
                if (split_here)
                    level_rounds += est_skiplist_height(frontier[li].size()) + a;
                if (oc.zero.size() >= 2) next.push_back(oc.zero);
                if (oc.one.size() >= 2) next.push_back(oc.one);
            }
            fix_contiguity(frontier, d);
            for (const SplitOutcome& oc : outcomes) {
                recompute_p4(oc.zero, d);
                recompute_p4(oc.one, d);
            }

            rep.rounds += level_rounds;
            frontier = std::move(next);
            ++d;
        }
    }

    int est_skiplist_height(std::size_t n) const {
        int h = 0;
        while (n > 1) { n = (n + a - 1) / a; ++h; }
        return h;
    }

    SplitOutcome split_list(const std::vector<int>& L, int d) {
        SplitOutcome oc;
        bool has_u = std::find(L.begin(), L.end(), wu) != L.end();
        bool has_v = std::find(L.begin(), L.end(), wv) != L.end();
        bool is_uv_list = has_u && has_v;

        if (is_uv_list && L.size() == 2) {
            // Terminal pair: two infinite priorities cannot be separated by a
            // median, so the lower id takes the 0-sublist.
            rep.direct_link_level = d - 1;
            int lo = ws[L[0]].id < ws[L[1]].id ? L[0] : L[1];
            int hi = lo == L[0] ? L[1] : L[0];
            oc.zero = {lo};
            oc.one = {hi};
            oc.rounds = 1;
            oc.terminal = true;
            return oc;
        }

        std::vector<std::int64_t> ids;
        std::vector<PriorityValue> values;
        ids.reserve(L.size());
        for (int m : L) {
            ids.push_back(ws[m].id);
            values.push_back(ws[m].P);
        }
        std::uint64_t seed = Rng::mix(opt.seed, Rng::mix(static_cast<std::uint64_t>(d) * 0x10001,
                                                         static_cast<std::uint64_t>(ids[0]) ^ now));
        BalancedSkipList sl = build_balanced_skiplist(ids, a, seed, &meter, &bits_table);
        MedianResult mr = approx_median(sl, values, &meter, &bits_table);
        rep.instr.bracket_fallbacks += mr.bracket_fallbacks;
        oc.rounds += mr.rounds;

        MedianPriority M = mr.median;
        bool pinned = false;
        if (is_uv_list && opt.pins && opt.pins->count(d)) {
            M = MedianPriority::pinned(opt.pins->at(d));
            pinned = true;
        }
        for (int m : L) ws[m].median_at[d] = M;
        if (is_uv_list) rep.medians.push_back({d, pinned, M.value});

        bool case1 = !M.value.is_negative();
        std::optional<std::vector<int>> gs;

        if (case1) {
            oc.branch = Branch::case1;
            for (int m : L)
                (at_or_above(ws[m].P, ws[m].id, M) ? oc.zero : oc.one).push_back(m);
        } else {
            gs = detect_gs(L, M, d);
            if (!gs) {
                oc.branch = Branch::no_gs;
                for (int m : L)
                    (at_or_above(ws[m].P, ws[m].id, M) ? oc.zero : oc.one).push_back(m);
            } else {
                oc.gs_gid = cur_gid(ws[gs->front()], d - 1);
                std::set<int> in_gs(gs->begin(), gs->end());
                long long low = 0, high = 0;
                for (int m : L) (at_or_above(ws[m].P, ws[m].id, M) ? high : low) += 1;
                // Count vectors travel through the skip list the AMF built.
                oc.rounds += static_cast<long long>(a) * std::max(0, sl.height()) +
                             std::max(0, sl.height());
                meter.msg(bits_table.count_vector_bits(),
                          static_cast<long long>(L.size() > 1 ? L.size() - 1 : 0) * 2);

                long long sz = static_cast<long long>(L.size());
                long long gsz = static_cast<long long>(gs->size());
                if (3 * gsz > 2 * sz) {
                    oc.branch = Branch::gs_big;
                    for (int m : L) {
                        if (!in_gs.count(m)) oc.zero.push_back(m);
                        else (cur_dom(ws[m], d) ? oc.one : oc.zero).push_back(m);
                    }
                } else if (3 * gsz < sz) {
                    oc.branch = Branch::gs_small;
                    bool gs_to_zero = high < low;
                    for (int m : L) {
                        if (in_gs.count(m)) (gs_to_zero ? oc.zero : oc.one).push_back(m);
                        else (at_or_above(ws[m].P, ws[m].id, M) ? oc.zero : oc.one).push_back(m);
                    }
                } else {
                    oc.branch = Branch::gs_mid;
                    for (int m : L) (in_gs.count(m) ? oc.one : oc.zero).push_back(m);
                }
            }
        }

        if (oc.zero.empty() || oc.one.empty()) {
            oc.fallback = true;
            rep.instr.fallback_splits += 1;
            oc.zero.clear();
            oc.one.clear();
            auto by_order = [&](int x, int y) {
                return RankedPriority{ws[x].P, ws[x].id} < RankedPriority{ws[y].P, ws[y].id};
            };
            if (gs && oc.branch == Branch::gs_big) {
                // Split g_s at its own middle; everyone else keeps the 0 side.
                std::vector<int> g = *gs;
                std::sort(g.begin(), g.end(), by_order);
                std::set<int> lower_half(g.begin(), g.begin() + g.size() / 2);
                for (int m : L) (lower_half.count(m) ? oc.one : oc.zero).push_back(m);
            } else {
                std::vector<int> all = L;
                std::sort(all.begin(), all.end(), by_order);
                std::set<int> lower_half(all.begin(), all.begin() + all.size() / 2);
                for (int m : L) (lower_half.count(m) ? oc.one : oc.zero).push_back(m);
            }
        }
        if (case1) {
            std::set<int> zs(oc.zero.begin(), oc.zero.end());
            for (int m : L) ws[m].dom_over[d] = zs.count(m) > 0;
        }
        if (is_uv_list) {
            std::set<int> zs(oc.zero.begin(), oc.zero.end());
            if (!zs.count(wu) || !zs.count(wv))
                throw std::logic_error("communicating pair left the 0-subgraph");
        }
        oc.rounds += a;  // neighbor discovery at the new level
        return oc;
    }

    // The non-communicating group whose priority band straddles M; ties on a
    // shared band boundary go to the smaller group id (the higher band).
    std::optional<std::vector<int>> detect_gs(const std::vector<int>& L, const MedianPriority& M,
                                              int d) {
        if (!M.value.is_negative()) return std::nullopt;
        std::map<std::int64_t, std::vector<int>> groups;
        for (int m : L) {
            std::int64_t g = cur_gid(ws[m], d - 1);
            if (g == merged_gid || !ws[m].P.is_negative()) continue;
            groups[g].push_back(m);
        }
        for (auto& [g, members] : groups)
            if (gs_band_contains(g, M.value.number, now)) return members;  // lowest id wins
        return std::nullopt;
    }

    bool reassign_group_ids(const std::vector<int>& L, const SplitOutcome& oc, int d) {
        std::set<int> zs(oc.zero.begin(), oc.zero.end());
        bool any_split = false;

        std::map<std::int64_t, std::vector<int>> groups;
        for (int m : L) groups[cur_gid(ws[m], d - 1)].push_back(m);
        for (auto& [g, members] : groups) {
            std::vector<int> g0, g1;
            for (int m : members) (zs.count(m) ? g0 : g1).push_back(m);
            if (g0.empty() || g1.empty()) continue;
            any_split = true;
            rep.group_splits += 1;

            SplitEvent ev;
            ev.level = d;
            ev.group_id = g;
            ev.members = members;
            ev.side1 = g1;
            ev.merged_group = (g == merged_gid);
            ev.allowed = ev.merged_group ||
                         (g == oc.gs_gid && (oc.branch == Branch::gs_big));
            if (!ev.allowed && members.size() >= 2) rep.instr.discipline_breaches += 1;
            events.push_back(ev);

            auto leftmost = [&](const std::vector<int>& part) {
                return *std::min_element(part.begin(), part.end(), [&](int x, int y) {
                    return ws[x].key < ws[y].key;
                });
            };
            std::int64_t new1 = ws[leftmost(g1)].id;
            for (int m : g1) ws[m].gid_over[d] = new1;
            // The 0 side keeps its old level-d ids unless one collides with
            // the 1 side's fresh id.
            for (int m : g0)
                if (cur_gid(ws[m], d) == new1) {
                    std::int64_t new0 = ws[leftmost(g0)].id;
                    for (int mm : g0) ws[mm].gid_over[d] = new0;
                    rep.instr.contiguity_renames += 1;
                    break;
                }
        }

        // The list holding both communicating nodes takes u's id. (A node's
        // all-zero path implies this except at the terminal singleton split.)
        bool zero_has_u = std::find(oc.zero.begin(), oc.zero.end(), wu) != oc.zero.end();
        bool zero_has_v = std::find(oc.zero.begin(), oc.zero.end(), wv) != oc.zero.end();
        if (zero_has_u && zero_has_v)
            for (int m : oc.zero) ws[m].gid_over[d] = merged_gid;
        if (any_split)
            meter.msg(bits_table.group_id_bits(), static_cast<long long>(L.size()));
        return any_split;
    }

    void recompute_p4(const std::vector<int>& side, int d) {
        bool has_u = std::find(side.begin(), side.end(), wu) != side.end();
        bool has_v = std::find(side.begin(), side.end(), wv) != side.end();
        if (has_u && has_v) return;
        for (int m : side) {
            if (m == wu || m == wv) continue;
            std::int64_t g = cur_gid(ws[m], d);
            ws[m].P = PriorityValue::finite(-(g * now) + snap_of(ws[m]).ts(d + 1));
            if (!ws[m].P.is_negative()) rep.instr.sign_breaches += 1;
        }
    }

    void fix_contiguity(const std::vector<std::vector<int>>& frontier, int d) {
        std::map<std::int64_t, std::map<std::vector<std::uint8_t>, std::vector<int>>> holders;
        for (const auto& L : frontier)
            for (int m : L) holders[cur_gid(ws[m], d)][ws[m].newbits].push_back(m);
        for (auto& [g, by_list] : holders) {
            if (by_list.size() <= 1) continue;
            auto leftmost = [&](const std::vector<int>& frag) {
                return *std::min_element(frag.begin(), frag.end(), [&](int x, int y) {
                    return ws[x].key < ws[y].key;
                });
            };
            // The fragment holding the id's owner keeps the label; otherwise
            // the leftmost fragment does. Every other fragment renames to its
            // own leftmost member.
            const std::vector<int>* keep = nullptr;
            NodeKey best{};
            for (auto& [lk, frag] : by_list) {
                bool owns = std::any_of(frag.begin(), frag.end(),
                                        [&](int m) { return ws[m].id == g && !ws[m].is_dummy; });
                if (owns) { keep = &frag; break; }
                NodeKey k = ws[leftmost(frag)].key;
                if (!keep || k < best) { keep = &frag; best = k; }
            }
            for (auto& [lk, frag] : by_list) {
                if (&frag == keep) continue;
                std::int64_t nid = ws[leftmost(frag)].id;
                for (int m : frag) ws[m].gid_over[d] = nid;
                rep.instr.contiguity_renames += 1;
            }
        }
    }

    // a-balance repair while level d forms. A chain of exactly a same-bit
    // members gets one relay near its end (cheap to release later); longer
    // chains are cut into segments of at most a.
    int plan_balance_dummies(const std::vector<std::vector<int>>& frontier, int d) {
        int planned = 0;
        for (const auto& L : frontier) {
            struct Entry { NodeKey key; int widx; };
            std::vector<Entry> entries;
            for (int m : L) entries.push_back({ws[m].key, m});
            std::vector<std::uint8_t> want(ws[L[0]].newbits.begin(), ws[L[0]].newbits.end() - 1);
            for (std::size_t i = 0; i < ws.size(); ++i) {
                const auto& m = ws[i];
                if (!m.is_dummy || m.newbits.size() < want.size()) continue;
                if (!std::equal(want.begin(), want.end(), m.newbits.begin())) continue;
                entries.push_back({m.key, static_cast<int>(i)});
            }
            std::sort(entries.begin(), entries.end(),
                      [](const Entry& x, const Entry& y) { return x.key < y.key; });

            struct Run { std::size_t start = 0; std::size_t len = 0; int bit = -1; };
            std::vector<Run> runs;
            {
                Run cur;
                for (std::size_t i = 0; i <= entries.size(); ++i) {
                    int bit = i < entries.size() ? bit_of(ws[entries[i].widx], d) : -1;
                    if (bit >= 0 && bit == cur.bit) { cur.len += 1; continue; }
                    if (cur.len > 0) runs.push_back(cur);
                    cur = Run{i, bit >= 0 ? std::size_t(1) : std::size_t(0), bit};
                }
            }
            for (const auto& run : runs) {
                if (run.len < static_cast<std::size_t>(a)) continue;
                std::vector<std::size_t> cuts;  // gap before entries[start + j]
                if (run.len == static_cast<std::size_t>(a)) cuts.push_back(run.len - 1);
                else
                    for (std::size_t j = a; j < run.len; j += a) cuts.push_back(j);
                for (std::size_t j : cuts) {
                    std::size_t at = run.start + j;
                    bool uv_pair = (entries[at - 1].widx == wu && entries[at].widx == wv) ||
                                   (entries[at - 1].widx == wv && entries[at].widx == wu);
                    if (uv_pair) {
                        if (j >= 2) at -= 1;                       // shift one gap left
                        else if (run.start + j + 1 < run.start + run.len) at += 1;
                        else continue;                             // a bare pair: leave it
                    }
                    auto taken = [&](const NodeKey& k) {
                        if (topo.find(k) >= 0) return true;
                        for (const auto& w : ws)
                            if (w.key == k) return true;
                        return false;
                    };
                    NodeKey mid = NodeKey::between(entries[at - 1].key, entries[at].key);
                    while (taken(mid)) mid = NodeKey::between(entries[at - 1].key, mid);

                    WMember dummy;
                    dummy.key = mid;
                    dummy.id = mid.whole;
                    dummy.is_dummy = true;
                    dummy.newbits = want;
                    int sibling = 1 - run.bit;
                    bool lands_between_uv =
                        sibling == 0 && ((mid > ws[wu].key && mid < ws[wv].key) ||
                                         (mid > ws[wv].key && mid < ws[wu].key));
                    if (!lands_between_uv)
                        dummy.newbits.push_back(static_cast<std::uint8_t>(sibling));
                    ws.push_back(std::move(dummy));
                    rep.dummies_inserted += 1;
                    planned += 1;
                }
            }
        }
        if (planned > 0) meter.msg(bits_table.group_id_bits(), planned * 2LL);
        return planned;
    }

    // ---- write-back --------------------------------------------------------

    void write_back() {
        for (auto& m : ws) {
            if (m.is_dummy) continue;
            NodeRecord& node = topo.nodes[m.node_index];
            node.bits = prefix;
            node.bits.insert(node.bits.end(), m.newbits.begin(), m.newbits.end());
            for (auto& [lvl, g] : m.gid_over) node.set_gid(lvl, g);
            for (auto& [lvl, dm] : m.dom_over) node.set_dom(lvl, dm);
        }
        for (auto& m : ws) {
            if (!m.is_dummy) continue;
            NodeRecord rec;
            rec.key = m.key;
            rec.is_dummy = true;
            rec.bits = prefix;
            rec.bits.insert(rec.bits.end(), m.newbits.begin(), m.newbits.end());
            topo.insert(std::move(rec));
        }
    }

    // ---- group-ids below alpha (the G_lower broadcast) ---------------------

    void update_lower_group_ids() {
        if (alpha < 1) return;
        int sui = snap_find(u_id), svi = snap_find(v_id);
        const NodeRecord& su = snap[sui];
        const NodeRecord& sv = snap[svi];
        if (su.gid(alpha - 1) == sv.gid(alpha - 1)) return;

        int bu = su.group_base, bv = sv.group_base;
        const NodeRecord& src = (bu <= bv) ? su : sv;
        std::vector<std::int64_t> g_lower(alpha);
        for (int i = 0; i < alpha; ++i) g_lower[i] = src.gid(i);

        if (std::min(bu, bv) < alpha) {
            int max_b = std::max(bu, bv);
            LevelLists view = build_levels(topo);
            int ui = topo.find_id(u_id), vi = topo.find_id(v_id);
            if (max_b < view.levels() && view.list_of[max_b][ui] >= 0 &&
                view.list_of[max_b][ui] == view.list_of[max_b][vi]) {
                std::int64_t tag_u = su.gid(max_b), tag_v = sv.gid(max_b);
                const auto& lst = view.lists[max_b][view.list_of[max_b][ui]];
                for (int yi : lst) {
                    NodeRecord& y = topo.nodes[yi];
                    if (y.is_dummy) continue;
                    int ysnap = snap_find(y.id());
                    if (ysnap < 0) continue;
                    std::int64_t yg = snap[ysnap].gid(max_b);
                    if (yg != tag_u && yg != tag_v) continue;
                    y.group_base = std::min(bu, bv);
                    for (int i = 0; i < alpha; ++i) y.set_gid(i, g_lower[i]);
                    glower_participants.insert(y.id());
                }
                rep.rounds += static_cast<long long>(lst.size()) > 1
                                  ? static_cast<long long>(lst.size()) / 2 + alpha
                                  : 0;
                meter.msg(bits_table.group_id_bits(),
                          static_cast<long long>(lst.size() > 0 ? lst.size() - 1 : 0) *
                              (alpha + 1));
            }
        }
        for (auto& m : ws) {
            if (m.is_dummy) continue;
            NodeRecord& x = topo.nodes[topo.find_id(m.id)];
            if (x.gid(alpha) != merged_gid) continue;
            for (int i = 0; i < alpha; ++i) x.set_gid(i, g_lower[i]);
            glower_participants.insert(x.id());
        }
    }

    // ---- group-base updates -------------------------------------------------

    // Level of the first bit divergence among a set of members, or -1.
    int min_divergence(const std::vector<int>& members) const {
        std::vector<const std::vector<std::uint8_t>*> v;
        for (int m : members) v.push_back(&ws[m].newbits);
        std::size_t idx = 0;
        std::vector<const std::vector<std::uint8_t>*> curr = v;
        for (;;) {
            std::vector<const std::vector<std::uint8_t>*> zero, one;
            bool any_ended = false;
            for (auto* b : curr) {
                if (idx >= b->size()) { any_ended = true; continue; }
                ((*b)[idx] == 0 ? zero : one).push_back(b);
            }
            if (!zero.empty() && !one.empty()) return alpha + 1 + static_cast<int>(idx);
            if (any_ended) return -1;  // members stopped together; no divergence
            curr = zero.empty() ? one : zero;
            if (curr.size() <= 1) return -1;
            ++idx;
        }
    }

    void compute_snapshot_group_splits() {
        for (int lvl = alpha; lvl < snap_height; ++lvl) {
            std::map<std::int64_t, std::vector<int>> groups;
            for (std::size_t i = 0; i < ws.size(); ++i) {
                if (ws[i].is_dummy) continue;
                groups[snap_of(ws[i]).gid(lvl)].push_back(static_cast<int>(i));
            }
            for (auto& [g, members] : groups) {
                if (members.size() < 2) continue;
                int div = min_divergence(members);
                if (div >= 0 && div <= lvl) snap_group_splits.push_back({lvl, members});
            }
        }
    }

    void update_group_bases() {
        std::map<std::int64_t, std::set<int>> snap_split_levels;  // node id -> levels
        for (auto& [lvl, members] : snap_group_splits)
            for (int m : members) snap_split_levels[ws[m].id].insert(lvl);
        std::map<std::int64_t, int> lowest_op_split;  // node id -> lowest event level
        for (const auto& ev : events)
            for (int m : ev.members) {
                auto it = lowest_op_split.find(ws[m].id);
                if (it == lowest_op_split.end() || ev.level < it->second)
                    lowest_op_split[ws[m].id] = ev.level;
            }

        for (auto& m : ws) {
            if (m.is_dummy) continue;
            NodeRecord& x = topo.nodes[topo.find_id(m.id)];
            auto it = snap_split_levels.find(m.id);
            if (it != snap_split_levels.end() && x.group_base >= alpha &&
                it->second.count(x.group_base))
                x.group_base -= 1;
            if (x.group_base == alpha) {
                auto lo = lowest_op_split.find(m.id);
                if (lo != lowest_op_split.end() && lo->second > alpha + 1)
                    x.group_base = lo->second - 1;
            }
        }
    }

    // ---- timestamp rules T1-T6 ----------------------------------------------

    void apply_timestamps() {
        NodeRecord& u = topo.nodes[topo.find_id(u_id)];
        NodeRecord& v = topo.nodes[topo.find_id(v_id)];
        int dl = rep.direct_link_level;

        // T1
        std::vector<std::int64_t> premax(std::max(dl, 0));
        for (int i = 0; i < dl; ++i) premax[i] = std::max(u.ts(i), v.ts(i));
        u.set_ts(dl, now);
        u.set_ts(dl + 1, now);
        v.set_ts(dl, now);
        v.set_ts(dl + 1, now);
        for (int i = dl - 1; i >= u.group_base; --i) u.set_ts(i, premax[i]);
        for (int i = dl - 1; i >= v.group_base; --i) v.set_ts(i, premax[i]);

        // T2
        for (auto& m : ws) {
            if (m.is_dummy || m.id == u_id || m.id == v_id) continue;
            NodeRecord& x = topo.nodes[topo.find_id(m.id)];
            std::int64_t near_id = (m.dist_u <= m.dist_v) ? u_id : v_id;
            const NodeRecord& w = snap[snap_find(near_id)];
            int cprime = shared_level_count(snap_of(m), w);
            int xtop = x.top_level();
            for (int lvl = alpha + 1; lvl <= std::min(xtop, u.top_level()); ++lvl) {
                if (x.gid(lvl) != u.gid(lvl)) continue;
                auto med = m.median_at.find(lvl);
                if (med == m.median_at.end() || med->second.value.infinite) continue;
                std::int64_t mv = med->second.value.number;
                bool found = false;
                for (int c = alpha; c < cprime && c < snap_height; ++c) {
                    if (snap_of(m).ts(c) > mv) {
                        x.set_ts(lvl, snap_of(m).ts(c));
                        found = true;
                        break;
                    }
                }
                if (!found) x.set_ts(lvl, mv);
            }
        }

        // T3
        for (auto& m : ws) {
            if (m.is_dummy || m.id == u_id || m.id == v_id) continue;
            const NodeRecord& sx = snap_of(m);
            const NodeRecord& su = snap[snap_find(u_id)];
            const NodeRecord& sv = snap[snap_find(v_id)];
            const NodeRecord* w_snap = nullptr;
            std::int64_t w_id = 0;
            if (sx.gid(alpha) == su.gid(alpha)) { w_snap = &su; w_id = u_id; }
            else if (sx.gid(alpha) == sv.gid(alpha)) { w_snap = &sv; w_id = v_id; }
            if (!w_snap) continue;
            NodeRecord& x = topo.nodes[topo.find_id(m.id)];
            const NodeRecord& w_cur = topo.nodes[topo.find_id(w_id)];
            int cprime = shared_level_count(sx, *w_snap);
            int csecond = shared_level_count(x, w_cur);
            if (cprime - 1 > csecond + 1) {
                std::int64_t fill = x.ts(cprime);
                for (int i = cprime - 1; i >= csecond + 1; --i) x.set_ts(i, fill);
            }
        }

        // T4
        for (std::int64_t id : glower_participants) {
            int xi = topo.find_id(id);
            if (xi < 0) continue;
            NodeRecord& x = topo.nodes[xi];
            int found_d = -1;
            for (int dd = 0; dd + 1 < topo.height(); ++dd)
                if (x.ts(dd + 1) == 0) { found_d = dd; break; }
            if (found_d < 0 || found_d <= x.group_base) continue;
            for (int i = found_d; i >= x.group_base; --i) x.set_ts(i, x.ts(found_d + 1));
        }

        // T5
        for (auto& [lvl, members] : snap_group_splits) {
            if (lvl < 1) continue;
            for (int m : members) {
                NodeRecord& x = topo.nodes[topo.find_id(ws[m].id)];
                if (x.ts(lvl - 1) == 0) x.set_ts(lvl - 1, x.ts(lvl));
            }
        }

        // T6
        for (auto& m : ws) {
            if (m.is_dummy) continue;
            NodeRecord& x = topo.nodes[topo.find_id(m.id)];
            for (int dd = 0; dd < x.group_base; ++dd) x.set_ts(dd, 0);
        }

        for (auto& m : ws) {
            if (m.is_dummy) continue;
            const NodeRecord& x = topo.nodes[topo.find_id(m.id)];
            for (int i = 0; i + 1 <= x.top_level(); ++i)
                if (x.ts(i) > x.ts(i + 1)) {
                    rep.instr.ts_monotonicity_breaches += 1;
                    break;
                }
        }
    }
};

// Breaks every run of more than `trigger` same-sublist members anywhere in
// the topology by inserting dummy relays; loops until no run remains.
inline int repair_balance_runs(Topology& topo, int trigger, std::int64_t guard_u,
                               std::int64_t guard_v) {
    int inserted = 0;
    for (int pass = 0; pass < 64 + static_cast<int>(topo.nodes.size()); ++pass) {
        LevelLists view = build_levels(topo);
        bool dirty = false;
        for (int lvl = 0; lvl < view.levels() && !dirty; ++lvl) {
            for (const auto& list : view.lists[lvl]) {
                int run = 0, prev = -2, run_start = -1;
                for (std::size_t i = 0; i < list.size(); ++i) {
                    const auto& node = topo.nodes[list[i]];
                    int bit = node.top_level() > lvl ? node.bits[lvl] : -1;
                    if (bit >= 0 && bit == prev) ++run;
                    else { run = bit >= 0 ? 1 : 0; run_start = static_cast<int>(i); }
                    prev = bit;
                    if (run <= trigger) continue;

                    std::size_t cut = i;
                    const auto& lkey = topo.nodes[list[cut - 1]].key;
                    const auto& rkey = topo.nodes[list[cut]].key;
                    bool uv_pair = (lkey == NodeKey::real(guard_u) && rkey == NodeKey::real(guard_v)) ||
                                   (lkey == NodeKey::real(guard_v) && rkey == NodeKey::real(guard_u));
                    if (uv_pair) {
                        if (cut - 1 > static_cast<std::size_t>(run_start)) --cut;
                        else continue;
                    }
                    NodeRecord dummy;
                    dummy.key = NodeKey::between(topo.nodes[list[cut - 1]].key,
                                                 topo.nodes[list[cut]].key);
                    while (topo.find(dummy.key) >= 0)
                        dummy.key = NodeKey::between(topo.nodes[list[cut - 1]].key, dummy.key);
                    dummy.is_dummy = true;
                    dummy.bits.assign(topo.nodes[list[cut]].bits.begin(),
                                      topo.nodes[list[cut]].bits.begin() + lvl);
                    int sibling = 1 - bit;
                    int ui = topo.find_id(guard_u), vi = topo.find_id(guard_v);
                    bool between_uv = false;
                    if (sibling == 0 && ui >= 0 && vi >= 0) {
                        const auto& ku = topo.nodes[ui].key;
                        const auto& kv = topo.nodes[vi].key;
                        between_uv = (dummy.key > ku && dummy.key < kv) ||
                                     (dummy.key > kv && dummy.key < ku);
                    }
                    if (!between_uv) dummy.bits.push_back(static_cast<std::uint8_t>(sibling));
                    topo.insert(std::move(dummy));
                    ++inserted;
                    dirty = true;
                    break;
                }
                if (dirty) break;
            }
        }
        if (!dirty) return inserted;
    }
    throw std::logic_error("balance repair did not converge");
}

// Trims the relay population back to the ceil(n/a) budget by releasing
// dummies whose removal leaves every same-sublist run at length <= a.
inline int gc_dummies(Topology& topo) {
    std::size_t budget = (topo.real_count() + topo.balance_a - 1) / topo.balance_a;
    int released = 0;
    bool progress = true;
    while (topo.dummy_count() > budget && progress) {
        progress = false;
        for (int i = 0; i < static_cast<int>(topo.nodes.size()); ++i) {
            if (!topo.nodes[i].is_dummy) continue;
            NodeRecord saved = topo.nodes[i];
            topo.erase(i);
            bool ok = true;
            for (const auto& v : validate(topo))
                if (v.code == "a_balance") { ok = false; break; }
            if (ok) {
                released += 1;
                progress = true;
                break;
            }
            topo.insert(std::move(saved));
        }
    }
    return released;
}

}  // namespace engine_detail

// Priorities every member of l_alpha would assign for the request (u, v) at
// time `now` (rules P1-P3, evaluated on a scratch copy).
inline std::map<std::int64_t, PriorityValue> compute_request_priorities(const Topology& topo,
                                                                        std::int64_t u,
                                                                        std::int64_t v,
                                                                        std::int64_t now) {
    Topology scratch = topo;
    TransformOptions opt;
    engine_detail::Transformer tr(scratch, u, v, now, opt);
    tr.notify_and_snapshot();
    tr.compute_priorities();
    std::map<std::int64_t, PriorityValue> out;
    for (const auto& m : tr.ws)
        if (!m.is_dummy) out[m.id] = m.P;
    return out;
}

// Full DSG transformation for the request (u, v) at logical time `now`.
// Routing must have happened already; the result leaves u and v in a size-2
// list and every structural invariant intact.
inline TransformReport transform(Topology& topo, std::int64_t u, std::int64_t v, std::int64_t now,
                                 const TransformOptions& opt = {}) {
    if (u == v) throw std::invalid_argument("u and v must differ");
    engine_detail::Transformer tr(topo, u, v, now, opt);
    tr.notify_and_snapshot();
    tr.compute_priorities();
    tr.merge_groups();
    tr.run_recursion();
    tr.write_back();
    tr.rep.dummies_inserted += engine_detail::repair_balance_runs(topo, topo.balance_a, u, v);
    tr.rep.dummies_destroyed += engine_detail::gc_dummies(topo);
    tr.update_lower_group_ids();
    tr.compute_snapshot_group_splits();
    tr.update_group_bases();
    tr.apply_timestamps();
    tr.rep.rounds += 1;  // release for the next communication
    tr.rep.messages = tr.meter.messages;
    tr.rep.max_message_bits = tr.meter.max_bits;
    return tr.rep;
}

// Standard skip graph join: the newcomer walks upward flipping membership
// bits until singleton, initializes default state, then checks a-balance.
inline void add_node(Topology& topo, std::int64_t id, std::uint64_t seed) {
    if (id < 1) throw std::invalid_argument("ids must be positive");
    if (topo.find_id(id) >= 0) throw std::invalid_argument("duplicate id");
    NodeRecord rec;
    rec.key = NodeKey::real(id);
    int idx = topo.insert(std::move(rec));
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(id) * 0x9e37u));

    for (int lvl = 0;; ++lvl) {
        NodeRecord& self = topo.nodes[idx];
        std::vector<int> others;
        for (int i = 0; i < static_cast<int>(topo.nodes.size()); ++i) {
            if (i == idx) continue;
            const auto& n = topo.nodes[i];
            if (n.top_level() < lvl) continue;
            if (!std::equal(self.bits.begin(), self.bits.end(), n.bits.begin())) continue;
            others.push_back(i);
        }
        if (others.empty()) break;
        std::vector<int> extenders;
        int real_stopper = -1;
        for (int i : others) {
            if (topo.nodes[i].top_level() > lvl) extenders.push_back(i);
            else if (!topo.nodes[i].is_dummy) real_stopper = i;
        }
        if (extenders.empty() && real_stopper < 0) break;  // only capped dummies remain
        std::uint8_t b = rng.chance(1, 2) ? 1 : 0;
        if (extenders.empty()) {
            // The lone resident was a singleton; both now extend one level.
            topo.nodes[real_stopper].bits.push_back(1 - b);
            topo.nodes[idx].bits.push_back(b);
            break;
        }
        topo.nodes[idx].bits.push_back(b);
    }
    topo.nodes[idx].group_base = topo.nodes[idx].top_level();
    engine_detail::repair_balance_runs(topo, topo.balance_a, -1, -1);
    engine_detail::gc_dummies(topo);
}

namespace engine_detail {

// Re-normalizes list nesting after a removal: one-sided splits contract (the
// vanished level's state entries shift out) and lone survivors stop early.
inline void compact_structure(Topology& topo) {
    for (bool changed = true; changed;) {
        changed = false;
        LevelLists view = build_levels(topo);
        for (int lvl = 0; lvl < view.levels() && !changed; ++lvl) {
            for (const auto& list : view.lists[lvl]) {
                int reals = 0;
                for (int i : list) reals += !topo.nodes[i].is_dummy;
                if (reals == 0 && lvl > 0) {  // orphaned dummy relay chain
                    std::vector<NodeKey> doomed;
                    for (int i : list) doomed.push_back(topo.nodes[i].key);
                    for (const auto& k : doomed) topo.erase(topo.find(k));
                    changed = true;
                    break;
                }
                std::vector<int> extenders;
                bool has0 = false, has1 = false;
                for (int i : list) {
                    if (topo.nodes[i].top_level() <= lvl) continue;
                    extenders.push_back(i);
                    (topo.nodes[i].bits[lvl] ? has1 : has0) = true;
                }
                if (reals == 1) {
                    for (int i : list) {
                        auto& n = topo.nodes[i];
                        if (n.is_dummy || n.top_level() <= lvl) continue;
                        n.bits.resize(lvl);
                        if (static_cast<int>(n.timestamps.size()) > lvl + 1) n.timestamps.resize(lvl + 1);
                        if (static_cast<int>(n.group_ids.size()) > lvl + 1) n.group_ids.resize(lvl + 1);
                        if (static_cast<int>(n.dominating.size()) > lvl + 1) n.dominating.resize(lvl + 1);
                        n.group_base = std::min(n.group_base, lvl);
                        changed = true;
                    }
                    if (changed) break;
                    continue;
                }
                if (!extenders.empty() && (!has0 || !has1) && extenders.size() >= 1 && reals >= 2) {
                    // Single-child split: erase the vanished level.
                    for (int i : extenders) {
                        auto& n = topo.nodes[i];
                        n.bits.erase(n.bits.begin() + lvl);
                        if (static_cast<int>(n.timestamps.size()) > lvl + 1)
                            n.timestamps.erase(n.timestamps.begin() + lvl + 1);
                        if (static_cast<int>(n.group_ids.size()) > lvl + 1)
                            n.group_ids.erase(n.group_ids.begin() + lvl + 1);
                        if (static_cast<int>(n.dominating.size()) > lvl + 1)
                            n.dominating.erase(n.dominating.begin() + lvl + 1);
                        if (n.group_base > lvl) n.group_base -= 1;
                    }
                    changed = true;
                    break;
                }
            }
        }
    }
}

}  // namespace engine_detail

// Standard skip graph leave with structural compaction and a-balance checks.
inline void remove_node(Topology& topo, std::int64_t id) {
    int idx = topo.find_id(id);
    if (idx < 0) throw std::invalid_argument("unknown id");
    if (topo.nodes[idx].is_dummy) throw std::invalid_argument("cannot remove a dummy");
    topo.erase(idx);
    engine_detail::compact_structure(topo);
    if (!topo.nodes.empty()) {
        engine_detail::repair_balance_runs(topo, topo.balance_a, -1, -1);
        engine_detail::gc_dummies(topo);
    }
}

// Group contiguity: holders of one group id share a single list per level.
inline std::vector<Violation> check_group_contiguity(const Topology& topo) {
    std::vector<Violation> out;
    LevelLists view = build_levels(topo);
    for (int lvl = 0; lvl < view.levels(); ++lvl) {
        std::map<std::int64_t, std::set<int>> lists_of_gid;
        for (int i = 0; i < static_cast<int>(topo.nodes.size()); ++i) {
            const auto& n = topo.nodes[i];
            if (n.is_dummy || n.top_level() < lvl) continue;
            lists_of_gid[n.gid(lvl)].insert(view.list_of[lvl][i]);
        }
        for (auto& [g, ls] : lists_of_gid)
            if (ls.size() > 1)
                out.push_back({"group_contiguity", lvl, *ls.begin(),
                               "group " + std::to_string(g) + " spans " +
                                   std::to_string(ls.size()) + " lists"});
    }
    return out;
}

}  // namespace dsg
