// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exits nonzero on any failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "dsg/amf.hpp"
#include "dsg/oracle.hpp"
#include "dsg/scenario.hpp"
#include "dsg/simulator.hpp"
#include "dsg/workload.hpp"

using namespace dsg;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Simulation run_config(std::int64_t n, int a, WorkloadKind kind, std::int64_t requests,
                      std::uint64_t seed, int lemma2_samples = 0, int check_every = 1) {
    RunConfig cfg;
    cfg.n = n;
    cfg.a = a;
    cfg.seed = seed;
    cfg.workload = kind;
    cfg.zipf_s = 1.2;
    cfg.pair_prob = 0.9;
    cfg.clusters = 4;
    cfg.requests = requests;
    auto reqs = generate_workload(cfg);

    std::vector<std::int64_t> ids(n);
    for (std::int64_t i = 0; i < n; ++i) ids[i] = i + 1;
    SimConfig sim_cfg;
    sim_cfg.seed = seed;
    sim_cfg.check_every = check_every;
    sim_cfg.lemma2_samples = lemma2_samples;
    return run_sequence(build_initial(ids, a, seed), reqs, sim_cfg);
}

long long kind_count(const Simulation& s, const std::string& kind) {
    auto it = s.violations_by_kind.find(kind);
    return it == s.violations_by_kind.end() ? 0 : it->second;
}

}  // namespace

int main() {
    // Criteria 1, 2, 3, 9, 10 share the structural-validity runs.
    std::vector<Simulation> runs;
    {
        bool ok1 = true, ok2 = true, ok3 = true, ok9 = true, ok10 = true;
        double worst_time = 0;
        std::string slowest;
        for (std::int64_t n : {16, 64, 256}) {
            for (int a : {3, 4}) {
                for (WorkloadKind kind : {WorkloadKind::uniform, WorkloadKind::zipf}) {
                    auto t0 = std::chrono::steady_clock::now();
                    Simulation sim = run_config(n, a, kind, 1000, 42 + n + a);
                    double dt = seconds_since(t0);
                    if (dt > worst_time) {
                        worst_time = dt;
                        slowest = "n=" + std::to_string(n) + " a=" + std::to_string(a) + " " +
                                  workload_name(kind);
                    }
                    ok1 &= kind_count(sim, "validate") == 0 && kind_count(sim, "contiguity") == 0 &&
                           dt < 300.0;
                    ok2 &= kind_count(sim, "direct_link") == 0 && kind_count(sim, "link_level") == 0;
                    ok3 &= kind_count(sim, "height") == 0;
                    ok9 &= kind_count(sim, "cost") == 0;
                    ok10 &= kind_count(sim, "bits") == 0;
                    runs.push_back(std::move(sim));
                }
            }
        }
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "structural validity over 12 configs x 1000 requests (slowest %s: %.1fs)",
                      slowest.c_str(), worst_time);
        report(1, ok1, buf);
        report(2, ok2, "every request ends direct-linked within the level bound");
        report(3, ok3, "post-transform height within ceil(log1.5(n+dummies)) + 1");

        // Criterion 4: rank guarantee of the approximate median.
        bool ok4 = true;
        long long checked = 0;
        for (int n : {64, 512, 4096}) {
            const int a = 4;
            for (int trial = 0; trial < 1000; ++trial) {
                std::uint64_t seed = Rng::mix(n, trial);
                Rng rng(Rng::mix(seed, 17));
                std::vector<std::int64_t> ids(n);
                for (int i = 0; i < n; ++i) ids[i] = i + 1;
                std::vector<PriorityValue> vals;
                std::vector<RankedPriority> all;
                for (int i = 0; i < n; ++i) {
                    auto v = PriorityValue::finite(static_cast<std::int64_t>(rng.below(4 * n)) - 2 * n);
                    vals.push_back(v);
                    all.push_back({v, ids[i]});
                }
                auto sl = build_balanced_skiplist(ids, a, seed);
                auto res = approx_median(sl, vals);
                if (!res.median.origin) { ok4 = false; continue; }
                auto rank = rank_of(all, RankedPriority{res.median.value, *res.median.origin});
                ++checked;
                if (rank < n / 2.0 - n / 8.0 - 1e-9 || rank > n / 2.0 + n / 8.0 + 1e-9) ok4 = false;
            }
        }
        report(4, ok4, "median rank in n/2 +- n/8 over " + std::to_string(checked) + " trials");

        // Criterion 5: distributed sums are exact.
        bool ok5 = true;
        for (int trial = 0; trial < 1000; ++trial) {
            Rng rng(trial * 7 + 1);
            int m = 2 + static_cast<int>(rng.below(199));
            std::vector<std::int64_t> ids(m);
            for (int i = 0; i < m; ++i) ids[i] = i + 1;
            auto sl = build_balanced_skiplist(ids, 4, trial);
            std::vector<std::vector<std::int64_t>> vs;
            std::vector<std::int64_t> expect(4, 0);
            for (int i = 0; i < m; ++i) {
                std::vector<std::int64_t> row(4);
                for (auto& x : row) x = static_cast<std::int64_t>(rng.below(20001)) - 10000;
                for (int k = 0; k < 4; ++k) expect[k] += row[k];
                vs.push_back(std::move(row));
            }
            ok5 &= distributed_sum(sl, vs).first == expect;
        }
        report(5, ok5, "1000 random count vectors summed exactly");

        // Criterion 6: working-set property on skewed workloads.
        bool ok6 = true;
        double worst_ratio = 0;
        for (WorkloadKind kind : {WorkloadKind::repeated_pair, WorkloadKind::cluster}) {
            Simulation sim = run_config(64, 3, kind, 2000, 7, 0, 10);
            ok6 &= kind_count(sim, "working_set") == 0;
            for (const auto& r : sim.trace)
                if (r.ws_T < 64 && r.d > 0)
                    worst_ratio = std::max(
                        worst_ratio, static_cast<double>(r.d) /
                                         std::log2(static_cast<double>(r.ws_T + 1)));
        }
        char buf6[128];
        std::snprintf(buf6, sizeof buf6,
                      "repeat-request distance bound held (max observed d/log2(T+1) = %.2f)",
                      worst_ratio);
        report(6, ok6, buf6);

        // Criterion 7: group-connectivity oracle over a sampled run.
        {
            Simulation sim = run_config(32, 3, WorkloadKind::uniform, 500, 99, 50, 1);
            report(7, kind_count(sim, "lemma2") == 0,
                   "50 sampled (group, member) pairs per request, 500 requests, zero violations");
        }

        // Criterion 8: expected O(log n) median rounds.
        {
            bool ok8 = true;
            const int a = 4;
            std::string detail = "median rounds per doubling:";
            auto median_rounds = [&](int n) {
                std::vector<long long> rounds;
                for (int seed = 0; seed < 200; ++seed) {
                    std::vector<std::int64_t> ids(n);
                    for (int i = 0; i < n; ++i) ids[i] = i + 1;
                    Rng rng(Rng::mix(seed, n));
                    std::vector<PriorityValue> vals;
                    for (int i = 0; i < n; ++i)
                        vals.push_back(PriorityValue::finite(static_cast<std::int64_t>(rng.next() >> 40)));
                    auto sl = build_balanced_skiplist(ids, a, seed);
                    rounds.push_back(approx_median(sl, vals).rounds);
                }
                std::sort(rounds.begin(), rounds.end());
                return rounds[rounds.size() / 2];
            };
            for (int n : {128, 256, 512}) {
                long long before = median_rounds(n), after = median_rounds(2 * n);
                detail += " " + std::to_string(before) + "->" + std::to_string(after);
                ok8 &= after - before <= a + 2;
            }
            report(8, ok8, detail);
        }

        report(9, ok9, "ledger total equals d + rho + 1 on every request");

        // Criterion 10: budget held, and doubling n adds at most 8 bits.
        {
            bool ok = ok10;
            std::vector<int> observed;
            std::string detail = "max bits by n:";
            for (std::int64_t n : {32, 64, 128, 256}) {
                Simulation sim = run_config(n, 3, WorkloadKind::uniform, 300, 5, 0, 50);
                int mx = 0;
                for (const auto& r : sim.trace) mx = std::max(mx, r.max_bits);
                observed.push_back(mx);
                detail += " " + std::to_string(mx);
            }
            for (std::size_t i = 0; i + 1 < observed.size(); ++i)
                ok &= observed[i + 1] <= observed[i] + 8;
            report(10, ok, detail);
        }

        // Criterion 11: scripted paper examples.
        {
            bool a_ok = false, b_ok = false, c_ok = false;
            {
                auto s = scenario::figure2_script();
                CommunicationGraph g;
                for (const auto& r : s.history) g.record(r.u, r.v, r.time);
                a_ok = working_set_number(g, s.query_u, s.query_v, s.query_time, 100) == s.expected;
            }
            {
                Topology t = scenario::figure3_state();
                PinnedMedians pins = scenario::figure3_pins();
                TransformOptions opt;
                opt.seed = 11;
                opt.pins = &pins;
                TransformReport rep =
                    transform(t, scenario::fig3_u, scenario::fig3_v, scenario::fig3_time, opt);
                b_ok = scenario::figure3_check(t, rep).empty();
            }
            {
                Topology t = scenario::figure3_state();
                auto p = compute_request_priorities(t, 21, 22, 7);
                c_ok = p.at(21).infinite && p.at(22).infinite &&
                       p.at(2) == PriorityValue::finite(2) && p.at(7) == PriorityValue::finite(2) &&
                       p.at(4) == PriorityValue::finite(2) && p.at(5) == PriorityValue::finite(5) &&
                       p.at(8) == PriorityValue::finite(-68) &&
                       p.at(10) == PriorityValue::finite(-68) &&
                       p.at(6) == PriorityValue::finite(-40) && p.at(9) == PriorityValue::finite(-40);
            }
            report(11, a_ok && b_ok && c_ok,
                   std::string("replays: working-set=") + (a_ok ? "ok" : "BAD") +
                       " pinned-median=" + (b_ok ? "ok" : "BAD") +
                       " priorities=" + (c_ok ? "ok" : "BAD"));
        }

        // Criterion 12: byte-identical traces for identical seeds.
        {
            Simulation s1 = run_config(32, 3, WorkloadKind::zipf, 400, 2121);
            Simulation s2 = run_config(32, 3, WorkloadKind::zipf, 400, 2121);
            report(12, trace_csv(s1) == trace_csv(s2) && s1.violations == 0,
                   "two identical runs, identical CSV traces");
        }
    }

    if (failures == 0) std::printf("all acceptance criteria passed\n");
    else std::printf("%d acceptance criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
