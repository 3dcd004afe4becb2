#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dsg/costing.hpp"
#include "dsg/dsg_engine.hpp"
#include "dsg/oracle.hpp"
#include "dsg/routing.hpp"
#include "dsg/topology.hpp"

namespace dsg {

// Smallest k with (num/den)^k >= n, computed exactly.
inline int ceil_log_ratio(std::int64_t n, std::int64_t num, std::int64_t den) {
    if (n <= 1) return 0;
    __int128 hi = 1, lo = 1;
    for (int k = 0; k < 256; ++k) {
        if (hi >= static_cast<__int128>(n) * lo) return k;
        hi *= num;
        lo *= den;
    }
    return 256;
}

struct Request {
    std::int64_t time = 0;
    std::int64_t u = 0, v = 0;
};

struct RequestRecord {
    std::int64_t t = 0, u = 0, v = 0;
    int alpha = 0;
    long long d = 0;
    long long rho = 0;
    long long total = 0;
    long long messages = 0;
    int max_bits = 0;
    int height = 0;
    long long dummies = 0;
    std::int64_t ws_T = 0;
    double ws_logT = 0.0;
    int direct_link_level = -1;
};

struct SimConfig {
    std::uint64_t seed = 0;
    int check_every = 1;      // run the heavy invariant checks every k-th request
    int lemma2_samples = 0;   // sampled (group, member) pairs per checked request
    bool halt_on_violation = false;
};

struct Simulation {
    Topology topo;
    CommunicationGraph graph;
    SimConfig cfg;
    std::vector<RequestRecord> trace;
    long long violations = 0;
    std::map<std::string, long long> violations_by_kind;
    std::vector<std::string> violation_notes;
    TransformInstrumentation instr_totals;
    long long requests_served = 0;

    void note(const std::string& kind, const std::string& what, std::int64_t t) {
        violations += 1;
        violations_by_kind[kind] += 1;
        if (violation_notes.size() < 64)
            violation_notes.push_back("t=" + std::to_string(t) + " [" + kind + "] " + what);
    }
};

// Serves one request: route, oracle bookkeeping, transform, cost accounting,
// then the configured invariant checks against the new topology.
inline RequestRecord execute_request(Simulation& sim, const Request& req,
                                     const PinnedMedians* pins = nullptr) {
    Topology& topo = sim.topo;
    RequestRecord rec;
    rec.t = req.time;
    rec.u = req.u;
    rec.v = req.v;

    LevelLists view = build_levels(topo);
    RoutePath path = route(topo, view, req.u, req.v);
    rec.alpha = path.alpha;
    rec.d = path.distance();

    std::int64_t population = static_cast<std::int64_t>(topo.real_count());
    rec.ws_T = working_set_number(sim.graph, req.u, req.v, req.time, population);
    rec.ws_logT = std::log2(static_cast<double>(std::max<std::int64_t>(1, rec.ws_T)));
    bool repeat_pair = sim.graph.last_time(req.u, req.v) > 0;
    sim.graph.record(req.u, req.v, req.time);

    TransformOptions opt;
    opt.seed = Rng::mix(sim.cfg.seed, static_cast<std::uint64_t>(req.time));
    opt.pins = pins;
    TransformReport tr = transform(topo, req.u, req.v, req.time, opt);

    rec.rho = tr.rounds;
    rec.total = rec.d + rec.rho + 1;  // cost identity: distance + rounds + one
    rec.messages = tr.messages;
    rec.max_bits = tr.max_message_bits;
    rec.height = topo.height();
    rec.dummies = static_cast<long long>(topo.dummy_count());
    rec.direct_link_level = tr.direct_link_level;

    sim.instr_totals.fallback_splits += tr.instr.fallback_splits;
    sim.instr_totals.discipline_breaches += tr.instr.discipline_breaches;
    sim.instr_totals.contiguity_renames += tr.instr.contiguity_renames;
    sim.instr_totals.sign_breaches += tr.instr.sign_breaches;
    sim.instr_totals.ts_monotonicity_breaches += tr.instr.ts_monotonicity_breaches;
    sim.instr_totals.bracket_fallbacks += tr.instr.bracket_fallbacks;

    const int a = topo.balance_a;
    const std::int64_t n_now = static_cast<std::int64_t>(topo.real_count());

    // Direct-link model compliance, checked on every request.
    {
        int ui = topo.find_id(req.u), vi = topo.find_id(req.v);
        const auto& ub = topo.nodes[ui].bits;
        const auto& vb = topo.nodes[vi].bits;
        int lcp = 0;
        while (lcp < static_cast<int>(std::min(ub.size(), vb.size())) && ub[lcp] == vb[lcp]) ++lcp;
        int reals_in_list = 0;
        for (const auto& n : topo.nodes) {
            if (n.is_dummy || n.top_level() < lcp) continue;
            if (std::equal(ub.begin(), ub.begin() + lcp, n.bits.begin())) ++reals_in_list;
        }
        if (reals_in_list != 2) sim.note("direct_link", "pair not in a size-2 list", req.time);
        if (lcp != tr.direct_link_level) sim.note("direct_link", "link level mismatch", req.time);
        int link_bound = ceil_log_ratio(n_now, 2 * a, a + 1);
        if (tr.direct_link_level > link_bound)
            sim.note("link_level",
                     std::to_string(tr.direct_link_level) + " exceeds bound " + std::to_string(link_bound),
                     req.time);
    }
    // Height bound after every transformation.
    {
        int bound = ceil_log_ratio(n_now + rec.dummies, 3, 2) + 1;
        if (rec.height > bound)
            sim.note("height",
                     std::to_string(rec.height) + " exceeds bound " + std::to_string(bound), req.time);
    }
    // Message budget.
    {
        int budget = BitTable::budget(static_cast<std::uint64_t>(n_now + rec.dummies));
        if (rec.max_bits > budget) sim.note("bits", "message bits over budget", req.time);
    }
    if (rec.total != rec.d + rec.rho + 1) sim.note("cost", "cost identity broken", req.time);
    // Working-set property for repeat pairs.
    if (repeat_pair) {
        long long bound = static_cast<long long>(a) * ceil_log_ratio(rec.ws_T + 1, 3, 2) + a;
        if (rec.d > bound)
            sim.note("working_set", "d " + std::to_string(rec.d) + " over bound " + std::to_string(bound),
                     req.time);
    }

    bool heavy = sim.cfg.check_every > 0 && (sim.requests_served % sim.cfg.check_every == 0);
    if (heavy) {
        ValidationReport vr = validate(topo);
        for (const auto& viol : vr) sim.note("validate", viol.code + " " + viol.detail, req.time);
        for (const auto& viol : check_group_contiguity(topo))
            sim.note("contiguity", viol.detail, req.time);
        if (sim.cfg.lemma2_samples > 0) {
            Rng rng(Rng::mix(sim.cfg.seed, 0x4c32 ^ static_cast<std::uint64_t>(req.time)));
            std::vector<Lemma2Sample> samples;
            std::vector<int> reals;
            for (int i = 0; i < static_cast<int>(topo.nodes.size()); ++i)
                if (!topo.nodes[i].is_dummy) reals.push_back(i);
            for (int s = 0; s < sim.cfg.lemma2_samples && !reals.empty(); ++s) {
                const auto& node = topo.nodes[reals[rng.below(reals.size())]];
                int lvl = static_cast<int>(rng.below(std::max(1, node.top_level() + 1)));
                samples.push_back({lvl, node.gid(lvl), node.id()});
            }
            auto bad = lemma2_check(topo, sim.graph, samples, req.time);
            for (const auto& b : bad)
                sim.note("lemma2",
                         "node " + std::to_string(b.disconnected) + " disconnected at level " +
                             std::to_string(b.sample.level),
                         req.time);
        }
    }
    sim.requests_served += 1;
    sim.trace.push_back(rec);
    if (sim.violations > 0 && sim.cfg.halt_on_violation)
        throw std::runtime_error("invariant violation: " +
                                 (sim.violation_notes.empty() ? "?" : sim.violation_notes.front()));
    return rec;
}

struct RunSummary {
    double avg_cost = 0.0;
    double ws_bound = 0.0;
    int max_height = 0;
    int max_direct_link_level = -1;
    long long violations = 0;
};

inline RunSummary summarize(const Simulation& sim) {
    RunSummary s;
    s.violations = sim.violations;
    long long total = 0;
    for (const auto& r : sim.trace) {
        total += r.total;
        s.ws_bound += r.ws_logT;
        s.max_height = std::max(s.max_height, r.height);
        s.max_direct_link_level = std::max(s.max_direct_link_level, r.direct_link_level);
    }
    s.avg_cost = sim.trace.empty() ? 0.0 : static_cast<double>(total) / sim.trace.size();
    return s;
}

inline std::string trace_csv(const Simulation& sim) {
    std::ostringstream os;
    os << "t,u,v,alpha,d,rho,total,messages,max_bits,height,dummies,ws_T,ws_logT,direct_link_level\n";
    char buf[64];
    for (const auto& r : sim.trace) {
        std::snprintf(buf, sizeof buf, "%.6f", r.ws_logT);
        os << r.t << ',' << r.u << ',' << r.v << ',' << r.alpha << ',' << r.d << ',' << r.rho << ','
           << r.total << ',' << r.messages << ',' << r.max_bits << ',' << r.height << ',' << r.dummies
           << ',' << r.ws_T << ',' << buf << ',' << r.direct_link_level << '\n';
    }
    return os.str();
}

inline Simulation run_sequence(Topology topo, const std::vector<Request>& requests,
                               const SimConfig& cfg, const PinnedMedians* pins = nullptr) {
    Simulation sim;
    sim.topo = std::move(topo);
    sim.cfg = cfg;
    for (const auto& req : requests) execute_request(sim, req, pins);
    return sim;
}

}  // namespace dsg
