#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dsg/core.hpp"
#include "dsg/costing.hpp"
#include "dsg/priority.hpp"

namespace dsg {

// A value in flight during median finding. The ranks are counts of values
// guaranteed larger (left) and smaller (right) than this one.
struct RankedValue {
    PriorityValue value;
    std::int64_t origin = 0;
    std::int64_t left_rank = 0;
    std::int64_t right_rank = 0;

    RankedPriority ranked() const { return {value, origin}; }
};

// Probabilistic balanced skip list over an ordered member list. The leftmost
// member steps up with probability 1, everyone else with probability 1/a;
// local repair keeps every consecutive support within [ceil(a/2), 2a].
struct BalancedSkipList {
    std::vector<std::int64_t> members;     // ordered ids
    std::vector<std::vector<int>> levels;  // levels[l] = member indices present at level l
    int a = 2;
    bool small = false;  // at most a members, construction skipped
    long long build_rounds = 0;

    int height() const { return static_cast<int>(levels.size()) - 1; }
    std::size_t size() const { return members.size(); }

    // Support of each consecutive pair at `level` in lower-level hops.
    std::vector<int> supports(int level) const {
        std::vector<int> out;
        if (level <= 0 || level >= static_cast<int>(levels.size())) return out;
        const auto& upper = levels[level];
        std::vector<int> pos_below(members.size(), -1);
        for (std::size_t p = 0; p < levels[level - 1].size(); ++p) pos_below[levels[level - 1][p]] = static_cast<int>(p);
        for (std::size_t i = 0; i + 1 < upper.size(); ++i)
            out.push_back(pos_below[upper[i + 1]] - pos_below[upper[i]]);
        return out;
    }
};

namespace detail {

// One level of construction: random step-up, then demote under-supported
// members and promote inside over-long gaps until supports fit [minS, 2a].
inline std::vector<int> step_up_level(const std::vector<int>& lower, int a, Rng& rng) {
    const int min_support = (a + 1) / 2;
    const int max_support = 2 * a;
    std::vector<char> up(lower.size(), 0);
    up[0] = 1;
    for (std::size_t i = 1; i < lower.size(); ++i) up[i] = rng.chance(1, static_cast<std::uint64_t>(a));

    std::vector<int> kept_pos;
    int last = 0;
    kept_pos.push_back(0);
    for (std::size_t i = 1; i < lower.size(); ++i) {
        if (!up[i]) continue;
        if (static_cast<int>(i) - last >= min_support) {
            kept_pos.push_back(static_cast<int>(i));
            last = static_cast<int>(i);
        }
    }
    // Shrink guard (only bites for a == 2, where min_support == 1).
    if (kept_pos.size() == lower.size() && lower.size() > 1) {
        std::vector<int> thinned;
        for (std::size_t i = 0; i < kept_pos.size(); i += 2) thinned.push_back(kept_pos[i]);
        kept_pos = std::move(thinned);
    }

    std::vector<int> final_pos;
    auto split_gap = [&](int from, int to) {
        int g = to - from;
        if (g <= max_support) return;
        int pieces = (g + max_support - 1) / max_support;
        for (int p = 1; p < pieces; ++p) final_pos.push_back(from + (g * p) / pieces);
    };
    for (std::size_t i = 0; i < kept_pos.size(); ++i) {
        final_pos.push_back(kept_pos[i]);
        int next = (i + 1 < kept_pos.size()) ? kept_pos[i + 1] : static_cast<int>(lower.size());
        split_gap(kept_pos[i], next);
    }
    std::sort(final_pos.begin(), final_pos.end());

    std::vector<int> upper;
    upper.reserve(final_pos.size());
    for (int p : final_pos) upper.push_back(lower[p]);
    return upper;
}

}  // namespace detail

inline BalancedSkipList build_balanced_skiplist(const std::vector<std::int64_t>& members, int a,
                                                std::uint64_t seed, CostMeter* meter = nullptr,
                                                const BitTable* bits = nullptr) {
    if (members.empty()) throw std::invalid_argument("empty member list");
    if (a < 2) throw std::invalid_argument("balance parameter must be >= 2");
    BalancedSkipList sl;
    sl.members = members;
    sl.a = a;
    Rng rng(Rng::mix(seed, 0x616d665fULL));

    std::vector<int> level(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) level[i] = static_cast<int>(i);
    sl.levels.push_back(level);
    if (members.size() <= static_cast<std::size_t>(a)) {
        // Below the construction threshold: the leftmost node is the root.
        sl.small = true;
        if (members.size() > 1) sl.levels.push_back({0});
        return sl;
    }
    while (sl.levels.back().size() > 1) {
        std::vector<int> next = detail::step_up_level(sl.levels.back(), a, rng);
        sl.build_rounds += 1;
        if (meter && bits) meter->msg(bits->group_id_bits(), static_cast<long long>(sl.levels.back().size()));
        if (next.size() >= sl.levels.back().size()) {  // safety: must shrink
            next.assign(1, sl.levels.back()[0]);
        }
        sl.levels.push_back(std::move(next));
    }
    return sl;
}

struct MedianResult {
    MedianPriority median;
    long long rounds = 0;
    bool used_exact_path = false;
    long long bracket_fallbacks = 0;
    std::vector<RankedValue> root_pool;  // what the root saw, ranks included
};

namespace detail {

// Ranks travel in exclusive form: each value carries only the counts it has
// absorbed itself, so the guarantee sets of any two in-flight values stay
// disjoint. Cumulative ranks are derived once, at the pick.
struct CumRanked {
    RankedValue rv;
    std::int64_t cum_left = 0;   // values guaranteed larger anywhere in the pool
    std::int64_t cum_right = 0;  // values guaranteed smaller
};

inline std::vector<CumRanked> cumulative_ranks(std::vector<RankedValue> pool) {
    std::sort(pool.begin(), pool.end(),
              [](const RankedValue& x, const RankedValue& y) { return x.ranked() < y.ranked(); });
    std::vector<CumRanked> out(pool.size());
    std::int64_t acc = 0;
    for (std::size_t i = pool.size(); i-- > 0;) {
        out[i].rv = pool[i];
        out[i].cum_left = acc + pool[i].left_rank;
        acc += pool[i].left_rank + 1;
    }
    acc = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        out[i].cum_right = acc + pool[i].right_rank;
        acc += pool[i].right_rank + 1;
    }
    return out;
}

// Even-stride sampling with both endpoints kept. Every discarded value is
// absorbed exactly once: its larger-side set joins the kept neighbor below,
// its smaller-side set the kept neighbor above, and the value itself counts
// toward whichever side faces the batch middle, keeping the counts tight
// around the median.
inline std::vector<RankedValue> sample_and_absorb(std::vector<RankedValue> sorted, int keep) {
    if (static_cast<int>(sorted.size()) <= keep) return sorted;
    std::vector<std::size_t> kept_idx;
    kept_idx.reserve(keep);
    double step = static_cast<double>(sorted.size() - 1) / (keep - 1);
    for (int j = 0; j < keep; ++j)
        kept_idx.push_back(static_cast<std::size_t>(std::llround(j * step)));

    std::vector<RankedValue> out;
    out.reserve(keep);
    for (std::size_t k = 0; k < kept_idx.size(); ++k) out.push_back(sorted[kept_idx[k]]);
    const std::size_t mid_pos = sorted.size() / 2;
    for (std::size_t k = 0; k + 1 < kept_idx.size(); ++k) {
        for (std::size_t d = kept_idx[k] + 1; d < kept_idx[k + 1]; ++d) {
            out[k].left_rank += sorted[d].left_rank;
            out[k + 1].right_rank += sorted[d].right_rank;
            if (d >= mid_pos) out[k].left_rank += 1;
            else out[k + 1].right_rank += 1;
        }
    }
    return out;
}

inline int sampling_threshold(int a, int h) {
    if (a <= 2) return h + 1;  // a/2 == 1: never sample, exact gather
    double t = std::log(std::max(1, h)) / std::log(a / 2.0);
    return static_cast<int>(std::ceil(t)) + 2;
}

}  // namespace detail

// Approximate median of one value per member. Values flow leftward then
// upward through the skip list; above the sampling threshold each collector
// sorts, stride-samples a*h values (endpoints kept), and refreshes ranks.
// Lists of at most 2a members skip construction and return the exact pick.
inline MedianResult approx_median(const BalancedSkipList& sl, const std::vector<PriorityValue>& values,
                                  CostMeter* meter = nullptr, const BitTable* bits = nullptr) {
    if (values.size() != sl.members.size()) throw std::invalid_argument("value count mismatch");
    const std::int64_t n = static_cast<std::int64_t>(values.size());
    MedianResult res;

    std::vector<RankedValue> init(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) init[i] = RankedValue{values[i], sl.members[i], 0, 0};

    auto finish = [&](std::vector<RankedValue> pool) {
        auto cum = detail::cumulative_ranks(std::move(pool));
        res.root_pool.clear();
        for (const auto& c : cum) {
            RankedValue rv = c.rv;
            rv.left_rank = c.cum_left;
            rv.right_rank = c.cum_right;
            res.root_pool.push_back(rv);
        }
        return cum;
    };
    // With partial ranks the true rank of s lies in [right+1, n-left]; the
    // root takes the value whose interval sits tightest around ceil(n/2).
    auto pick_sampled = [&](std::vector<RankedValue> pool) {
        auto cum = finish(std::move(pool));
        std::int64_t mid = (n + 1) / 2;
        const detail::CumRanked* best = &cum.front();
        std::int64_t best_d = -1;
        for (const auto& c : cum) {
            std::int64_t lo = c.cum_right + 1, hi = n - c.cum_left;
            if (lo > hi) { res.bracket_fallbacks += 1; continue; }
            std::int64_t d = std::max(std::llabs(lo - mid), std::llabs(hi - mid));
            if (best_d < 0 || d < best_d) { best_d = d; best = &c; }
        }
        return MedianPriority{best->rv.value, best->rv.origin};
    };
    // Exact ranks make the bracket rule unambiguous: the smallest value with
    // left_rank < ceil(n/2) <= n - right_rank, i.e. position floor(n/2)+1.
    auto pick_exact = [&](std::vector<RankedValue> pool) {
        auto cum = finish(std::move(pool));
        return MedianPriority{cum[n / 2].rv.value, cum[n / 2].rv.origin};
    };

    if (n <= 2 * sl.a) {
        res.used_exact_path = true;
        res.median = pick_exact(std::move(init));
        res.rounds = 2 * n;  // linear collect at the head, then broadcast back
        if (meter && bits) meter->msg(bits->ranked_value_bits(), std::max<std::int64_t>(0, n - 1));
        return res;
    }

    const int h = sl.height();
    const int threshold = detail::sampling_threshold(sl.a, h);
    const int keep = sl.a * std::max(1, h);

    std::vector<std::vector<RankedValue>> batch(sl.members.size());
    for (std::size_t i = 0; i < sl.levels[0].size(); ++i) batch[sl.levels[0][i]] = {init[i]};

    for (int lvl = 0; lvl < h; ++lvl) {
        const auto& lower = sl.levels[lvl];
        const auto& upper = sl.levels[lvl + 1];
        // Drain each gap into its left collector.
        std::size_t cpos = 0;
        for (std::size_t u = 0; u < upper.size(); ++u) {
            while (cpos < lower.size() && lower[cpos] != upper[u]) ++cpos;
            std::size_t end = cpos + 1;
            while (end < lower.size() &&
                   (u + 1 >= upper.size() || lower[end] != upper[u + 1]))
                ++end;
            auto& dest = batch[upper[u]];
            for (std::size_t p = cpos + 1; p < end; ++p) {
                auto& src = batch[lower[p]];
                if (meter && bits && !src.empty())
                    meter->msg(bits->ranked_value_bits(),
                               static_cast<long long>(src.size()) * static_cast<long long>(p - cpos));
                dest.insert(dest.end(), src.begin(), src.end());
                src.clear();
            }
            cpos = end - 1;
        }
        res.rounds += sl.a;  // bounded neighbor-relay cost per level
        if (lvl + 1 >= threshold) {
            for (int m : upper) {
                auto& b = batch[m];
                std::sort(b.begin(), b.end(),
                          [](const RankedValue& x, const RankedValue& y) { return x.ranked() < y.ranked(); });
                b = detail::sample_and_absorb(std::move(b), keep);
            }
        }
    }
    res.rounds += sl.build_rounds;
    std::vector<RankedValue> root_pool = batch[sl.levels[h][0]];
    res.median = pick_sampled(std::move(root_pool));
    res.rounds += h;  // broadcast the median down to the base
    if (meter && bits) meter->msg(bits->median_bits(), std::max<std::int64_t>(0, n - 1));
    return res;
}

// Componentwise exact sum of equal-length integer vectors, gathered to the
// head of the skip list and broadcast back.
inline std::pair<std::vector<std::int64_t>, long long> distributed_sum(
    const BalancedSkipList& sl, const std::vector<std::vector<std::int64_t>>& vectors,
    CostMeter* meter = nullptr, const BitTable* bits = nullptr) {
    if (vectors.size() != sl.members.size()) throw std::invalid_argument("vector count mismatch");
    std::size_t width = vectors.empty() ? 0 : vectors[0].size();
    for (const auto& v : vectors)
        if (v.size() != width) throw std::invalid_argument("vector length mismatch");

    std::vector<std::int64_t> total(width, 0);
    for (const auto& v : vectors)
        for (std::size_t i = 0; i < width; ++i) total[i] += v[i];

    int h = std::max(0, sl.height());
    long long rounds = sl.size() <= 1 ? 0 : static_cast<long long>(sl.a) * h + h;
    if (meter && bits && sl.size() > 1)
        meter->msg(bits->count_vector_bits(), static_cast<long long>(sl.size() - 1) * 2);
    return {std::move(total), rounds};
}

// Delivers a payload of `chunks` congest-sized messages to every member.
inline long long broadcast(const BalancedSkipList& sl, int chunks = 1, CostMeter* meter = nullptr,
                           int chunk_bits = 0) {
    if (sl.size() <= 1) return 0;
    if (chunks < 1) chunks = 1;
    long long rounds = sl.height() + sl.a + (chunks - 1);
    if (meter) meter->msg(chunk_bits, static_cast<long long>(sl.size() - 1) * chunks);
    return rounds;
}

}  // namespace dsg
