#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "dsg/routing.hpp"
#include "dsg/topology.hpp"

using namespace dsg;

namespace {

// Independent re-implementation of the greedy rule, derived straight from
// per-level neighbor maps, used as the oracle for route().
std::vector<NodeKey> oracle_route(const Topology& t, std::int64_t src, std::int64_t dst) {
    int h = t.height();
    std::map<NodeKey, NodeKey> right[64], left[64];
    for (int lvl = 0; lvl < h && lvl < 64; ++lvl) {
        std::map<std::vector<std::uint8_t>, NodeKey> last;
        for (const auto& n : t.nodes) {
            if (n.top_level() < lvl) continue;
            std::vector<std::uint8_t> pfx(n.bits.begin(), n.bits.begin() + lvl);
            auto it = last.find(pfx);
            if (it != last.end()) {
                right[lvl][it->second] = n.key;
                left[lvl][n.key] = it->second;
            }
            last[pfx] = n.key;
        }
    }
    NodeKey cur = NodeKey::real(src);
    NodeKey target = NodeKey::real(dst);
    bool rightward = target > cur;
    int lvl = t.nodes[t.find(cur)].top_level();
    std::vector<NodeKey> hops{cur};
    while (!(cur == target)) {
        REQUIRE(lvl >= 0);
        auto& dir = rightward ? right[lvl] : left[lvl];
        auto it = dir.find(cur);
        bool ok = it != dir.end() &&
                  (rightward ? !(it->second > target) : !(it->second < target));
        if (ok) {
            cur = it->second;
            hops.push_back(cur);
        } else {
            --lvl;
        }
    }
    return hops;
}

}  // namespace

TEST_CASE("routing basics") {
    Topology t = build_initial({1, 7, 10, 13, 18, 23}, 3, 17);

    SECTION("identity") {
        RoutePath p = route(t, 13, 13);
        CHECK(p.hops.size() == 1);
        CHECK(p.distance() == 0);
        CHECK(p.rounds == 0);
    }
    SECTION("terminates within a*H and reports the common level") {
        RoutePath p = route(t, 1, 13);
        CHECK(p.hops.front() == NodeKey::real(1));
        CHECK(p.hops.back() == NodeKey::real(13));
        CHECK(static_cast<int>(p.hops.size()) - 1 <= t.balance_a * t.height());
        CHECK(p.alpha == highest_common_level(t, 1, 13).alpha);
    }
    SECTION("unknown endpoint") {
        CHECK_THROWS_AS(route(t, 1, 999), std::invalid_argument);
    }
}

TEST_CASE("routing matches the hand-rule oracle on a random topology") {
    std::vector<std::int64_t> ids(64);
    for (int i = 0; i < 64; ++i) ids[i] = 2 * i + 1;
    Topology t = build_initial(ids, 3, 555);
    REQUIRE(validate(t).empty());
    LevelLists view = build_levels(t);

    Rng rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        std::int64_t s = ids[rng.below(ids.size())];
        std::int64_t d = ids[rng.below(ids.size())];
        RoutePath p = route(t, view, s, d);
        auto expect = oracle_route(t, s, d);
        CHECK(p.hops == expect);
        CHECK(static_cast<int>(p.hops.size()) - 1 <= t.balance_a * t.height());
        // The reverse direction also respects the bound.
        RoutePath back = route(t, view, d, s);
        CHECK(static_cast<int>(back.hops.size()) - 1 <= t.balance_a * t.height());
    }
}

TEST_CASE("dummies relay but do not affect reachability") {
    Topology t = build_initial({2, 4, 6, 8}, 3, 9);
    std::map<std::pair<std::int64_t, std::int64_t>, int> plain_distance;
    for (std::int64_t s : {2, 4, 6, 8})
        for (std::int64_t d : {2, 4, 6, 8}) plain_distance[{s, d}] = route(t, s, d).distance();

    // Drop a relay between 4 and 6 at the base level only.
    NodeRecord dummy;
    dummy.key = NodeKey::between(NodeKey::real(4), NodeKey::real(6));
    dummy.is_dummy = true;
    t.insert(std::move(dummy));
    REQUIRE(validate(t).empty());

    for (std::int64_t s : {2, 4, 6, 8})
        for (std::int64_t d : {2, 4, 6, 8}) {
            RoutePath q = route(t, s, d);
            CHECK(q.hops.back() == NodeKey::real(d));
            // A pure relay can lengthen a path but never break it.
            CHECK(q.distance() <= plain_distance[{s, d}] + 1);
        }
}
