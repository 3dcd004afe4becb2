#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <sstream>

#include "dsg/workload.hpp"

using namespace dsg;

TEST_CASE("workload generation") {
    RunConfig cfg;
    cfg.n = 64;
    cfg.seed = 2024;

    SECTION("zero requests") {
        cfg.requests = 0;
        CHECK(generate_workload(cfg).empty());
    }
    SECTION("repeated pair with p = 1") {
        cfg.workload = WorkloadKind::repeated_pair;
        cfg.pair_prob = 1.0;
        cfg.requests = 5;
        auto reqs = generate_workload(cfg);
        REQUIRE(reqs.size() == 5);
        for (const auto& r : reqs) {
            CHECK(r.u == reqs[0].u);
            CHECK(r.v == reqs[0].v);
            CHECK(r.u != r.v);
        }
        for (std::size_t i = 0; i < reqs.size(); ++i) CHECK(reqs[i].time == static_cast<std::int64_t>(i + 1));
    }
    SECTION("zipf skew beats uniform by 3x on the top rank") {
        cfg.workload = WorkloadKind::zipf;
        cfg.zipf_s = 1.2;
        cfg.requests = 10000;
        auto reqs = generate_workload(cfg);
        std::map<std::int64_t, int> freq;
        for (const auto& r : reqs) freq[r.u] += 1;
        int top = 0;
        for (auto& [id, c] : freq) top = std::max(top, c);
        CHECK(static_cast<double>(top) / cfg.requests >= 3.0 / 64.0);
    }
    SECTION("cluster traffic is mostly intra-clique") {
        cfg.workload = WorkloadKind::cluster;
        cfg.clusters = 4;
        cfg.requests = 4000;
        auto reqs = generate_workload(cfg);
        auto clique = [&](std::int64_t id) { return (id - 1) * cfg.clusters / cfg.n; };
        int cross = 0;
        for (const auto& r : reqs) cross += clique(r.u) != clique(r.v);
        CHECK(cross < static_cast<int>(reqs.size() / 4));
        CHECK(cross > 0);
    }
    SECTION("generation is open loop and reproducible") {
        cfg.workload = WorkloadKind::uniform;
        cfg.requests = 50;
        auto a = generate_workload(cfg);
        auto b = generate_workload(cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].u == b[i].u);
            CHECK(a[i].v == b[i].v);
        }
    }
    SECTION("parameter validation") {
        cfg.n = 1;
        CHECK_THROWS_AS(generate_workload(cfg), std::invalid_argument);
        cfg.n = 8;
        cfg.workload = WorkloadKind::zipf;
        cfg.zipf_s = 0;
        CHECK_THROWS_AS(generate_workload(cfg), std::invalid_argument);
    }
}

TEST_CASE("replay parsing") {
    SECTION("happy path") {
        std::istringstream in("1 3 4\n2 4 5\n# comment\n7 3 5\n");
        auto reqs = parse_replay(in);
        REQUIRE(reqs.size() == 3);
        CHECK(reqs[2].time == 7);
        CHECK(reqs[2].u == 3);
        CHECK(reqs[2].v == 5);
    }
    SECTION("times must ascend") {
        std::istringstream in("2 3 4\n2 4 5\n");
        CHECK_THROWS_AS(parse_replay(in), std::invalid_argument);
    }
    SECTION("self pairs rejected") {
        std::istringstream in("1 3 3\n");
        CHECK_THROWS_AS(parse_replay(in), std::invalid_argument);
    }
}
