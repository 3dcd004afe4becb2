#include <catch2/catch_amalgamated.hpp>

#include "dsg/topology.hpp"
#include "dsg/topology_io.hpp"

using namespace dsg;

namespace {

// The six-node three-split structure from the introduction figures: A and M
// share a level-1 list {A, J, M}, G and W form the 10-subgraph.
Topology figure1_state() {
    Topology t;
    t.balance_a = 3;
    struct Row { std::int64_t id; std::vector<std::uint8_t> bits; };
    for (const auto& r : std::vector<Row>{{1, {0, 0, 0}},    // A
                                          {7, {1, 0, 0}},    // G
                                          {10, {0, 0, 1}},   // J
                                          {13, {0, 1}},      // M
                                          {18, {1, 1}},      // R
                                          {23, {1, 0, 1}}})  // W
    {
        NodeRecord n;
        n.key = NodeKey::real(r.id);
        n.bits = r.bits;
        n.group_base = n.top_level();
        t.nodes.push_back(std::move(n));
    }
    return t;
}

}  // namespace

TEST_CASE("build_initial basics") {
    SECTION("singleton") {
        Topology t = build_initial({7}, 3, 1);
        CHECK(t.height() == 1);
        CHECK(t.nodes[0].group_base == 0);
        CHECK(validate(t).empty());
    }
    SECTION("forced split of two") {
        Topology t = build_initial({1, 2}, 3, 1);
        CHECK(t.height() == 2);
        CHECK(t.nodes[0].top_level() == 1);
        CHECK(t.nodes[1].top_level() == 1);
        CHECK(t.nodes[0].bits[0] != t.nodes[1].bits[0]);
        CHECK(validate(t).empty());
    }
    SECTION("six ordered ids give a valid topology") {
        Topology t = build_initial({1, 7, 10, 13, 18, 23}, 3, 99);
        CHECK(validate(t).empty());
        CHECK(t.height() >= 3);
    }
    SECTION("defaults") {
        Topology t = build_initial({3, 5, 9, 12}, 3, 5);
        for (const auto& n : t.nodes) {
            for (int lvl = 0; lvl < t.height(); ++lvl) {
                CHECK(n.ts(lvl) == 0);
                CHECK(n.gid(lvl) == n.id());
                CHECK_FALSE(n.dom(lvl));
            }
            CHECK(n.group_base == n.top_level());
        }
    }
    SECTION("input errors") {
        CHECK_THROWS_AS(build_initial({}, 3, 1), std::invalid_argument);
        CHECK_THROWS_AS(build_initial({1, 1}, 3, 1), std::invalid_argument);
        CHECK_THROWS_AS(build_initial({1, 2}, 1, 1), std::invalid_argument);
        CHECK_THROWS_AS(build_initial({0, 2}, 3, 1), std::invalid_argument);
    }
    SECTION("balanced bisection height") {
        for (int n : {8, 16, 64, 100}) {
            std::vector<std::int64_t> ids(n);
            for (int i = 0; i < n; ++i) ids[i] = i + 1;
            Topology t = build_initial(ids, 3, 42);
            CHECK(validate(t).empty());
            CHECK(t.height() == ceil_log2(static_cast<std::uint64_t>(n)) + 1);
        }
    }
}

TEST_CASE("validate flags corrupted structures") {
    SECTION("unsorted base") {
        Topology t = build_initial({1, 2, 3, 4}, 3, 1);
        std::swap(t.nodes[0].key, t.nodes[1].key);
        ValidationReport rep = validate(t);
        bool found = false;
        for (const auto& v : rep) found |= v.code == "base_order";
        CHECK(found);
    }
    SECTION("hand-built a-balance breach is flagged exactly there") {
        // Seven zeros in a row at level 1 with a = 3.
        Topology t;
        t.balance_a = 3;
        for (std::int64_t id = 1; id <= 8; ++id) {
            NodeRecord n;
            n.key = NodeKey::real(id);
            // ids 1..4 all to sublist 0 (a+1 = 4 consecutive), 5..8 to 1.
            std::uint8_t b = id <= 4 ? 0 : 1;
            n.bits = {b, static_cast<std::uint8_t>((id - 1) % 2),
                      static_cast<std::uint8_t>(((id - 1) / 2) % 2)};
            n.group_base = 3;
            t.nodes.push_back(std::move(n));
        }
        ValidationReport rep = validate(t);
        int balance_hits = 0;
        for (const auto& v : rep)
            if (v.code == "a_balance") {
                ++balance_hits;
                CHECK(v.level == 0);
            }
        CHECK(balance_hits >= 1);
    }
    SECTION("validate is pure") {
        Topology t = build_initial({1, 2, 3, 4, 5}, 3, 7);
        std::string before = export_topology(t);
        CHECK(validate(t).empty());
        CHECK(validate(t).empty());
        CHECK(export_topology(t) == before);
    }
}

TEST_CASE("highest common level") {
    Topology t = figure1_state();
    REQUIRE(validate(t).empty());

    SECTION("figure pair A, M shares level 1") {
        CommonLevel cl = highest_common_level(t, 1, 13);
        CHECK(cl.alpha == 1);
        std::vector<std::int64_t> ids;
        for (int i : cl.list) ids.push_back(t.nodes[i].id());
        CHECK(ids == std::vector<std::int64_t>{1, 10, 13});  // A, J, M
    }
    SECTION("adjacent singleton-split pair") {
        CommonLevel cl = highest_common_level(t, 1, 10);  // A and J
        CHECK(cl.alpha == 2);
        CHECK(cl.list.size() == 2);
    }
    SECTION("errors") {
        CHECK_THROWS_AS(highest_common_level(t, 1, 1), std::invalid_argument);
        CHECK_THROWS_AS(highest_common_level(t, 1, 999), std::invalid_argument);
    }
    SECTION("alpha equals the structural common level on a random topology") {
        std::vector<std::int64_t> ids(16);
        for (int i = 0; i < 16; ++i) ids[i] = (i + 1) * 3;
        Topology r = build_initial(ids, 3, 2024);
        LevelLists view = build_levels(r);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                int alpha = highest_common_level(r, ids[i], ids[j]).alpha;
                int ui = r.find_id(ids[i]), vi = r.find_id(ids[j]);
                int structural = 0;
                for (int lvl = 0; lvl < view.levels(); ++lvl) {
                    if (view.list_of[lvl][ui] < 0 || view.list_of[lvl][vi] < 0) break;
                    if (view.list_of[lvl][ui] == view.list_of[lvl][vi]) structural = lvl;
                }
                CHECK(alpha == structural);
            }
    }
}

TEST_CASE("canonical dump") {
    SECTION("equal topologies dump identically") {
        Topology t1 = build_initial({2, 4, 6, 8, 10, 12}, 3, 11);
        Topology t2 = t1;
        CHECK(export_topology(t1) == export_topology(t2));
    }
    SECTION("dump-parse-dump is a fixed point") {
        Topology t = build_initial({5, 9, 14, 20, 27, 33, 41, 50}, 4, 3);
        t.nodes[2].set_ts(1, 17);
        t.nodes[3].set_gid(0, 5);
        t.nodes[4].set_dom(2, true);
        std::string d1 = export_topology(t);
        Topology back = import_topology(d1);
        CHECK(export_topology(back) == d1);
    }
    SECTION("round trip preserves every field") {
        Topology t = build_initial({5, 9, 14, 20}, 3, 3);
        t.nodes[0].set_ts(0, 4);
        t.nodes[1].set_gid(1, 9);
        t.nodes[1].group_base = 1;
        Topology back = import_topology(export_topology(t));
        REQUIRE(back.nodes.size() == t.nodes.size());
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
            CHECK(back.nodes[i].key == t.nodes[i].key);
            CHECK(back.nodes[i].bits == t.nodes[i].bits);
            CHECK(back.nodes[i].group_base == t.nodes[i].group_base);
            for (int lvl = 0; lvl < t.height(); ++lvl) {
                CHECK(back.nodes[i].ts(lvl) == t.nodes[i].ts(lvl));
                CHECK(back.nodes[i].gid(lvl) == t.nodes[i].gid(lvl));
                CHECK(back.nodes[i].dom(lvl) == t.nodes[i].dom(lvl));
            }
        }
    }
    SECTION("figure node M carries membership 01") {
        std::string dump = export_topology(figure1_state());
        CHECK(dump.find("\"membership\": \"01\"") != std::string::npos);
    }
}

TEST_CASE("node key ordering and midpoints") {
    NodeKey a = NodeKey::real(4), b = NodeKey::real(5);
    NodeKey mid = NodeKey::between(a, b);
    CHECK(a < mid);
    CHECK(mid < b);
    NodeKey mid2 = NodeKey::between(a, mid);
    CHECK(a < mid2);
    CHECK(mid2 < mid);
    NodeKey far = NodeKey::between(NodeKey::real(4), NodeKey::real(9));
    CHECK(NodeKey::real(4) < far);
    CHECK(far < NodeKey::real(5));
}
