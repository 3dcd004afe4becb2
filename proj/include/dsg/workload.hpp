#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsg/core.hpp"
#include "dsg/simulator.hpp"

namespace dsg {

enum class WorkloadKind { uniform, zipf, repeated_pair, cluster, replay };

struct RunConfig {
    std::int64_t n = 16;
    int a = 3;
    std::uint64_t seed = 1;
    WorkloadKind workload = WorkloadKind::uniform;
    double zipf_s = 1.0;
    double pair_prob = 0.9;
    int clusters = 4;
    std::string replay_file;
    std::int64_t requests = 100;
    bool checks_full = true;
    int check_rate = 1;
    std::string out = "run";

    void check() const {
        if (n < 2) throw std::invalid_argument("n must be >= 2");
        if (a < 2) throw std::invalid_argument("a must be >= 2");
        if (requests < 0) throw std::invalid_argument("requests must be >= 0");
        if (workload == WorkloadKind::zipf && !(zipf_s > 0)) throw std::invalid_argument("zipf s must be > 0");
        if (workload == WorkloadKind::repeated_pair && (pair_prob < 0 || pair_prob > 1))
            throw std::invalid_argument("pair probability must lie in [0, 1]");
        if (workload == WorkloadKind::cluster && clusters < 1)
            throw std::invalid_argument("clusters must be >= 1");
    }
};

inline const char* workload_name(WorkloadKind k) {
    switch (k) {
        case WorkloadKind::uniform: return "uniform";
        case WorkloadKind::zipf: return "zipf";
        case WorkloadKind::repeated_pair: return "repeated_pair";
        case WorkloadKind::cluster: return "cluster";
        case WorkloadKind::replay: return "replay";
    }
    return "?";
}

inline std::vector<Request> parse_replay(std::istream& in) {
    std::vector<Request> out;
    std::string line;
    std::int64_t prev_t = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Request r;
        if (!(ls >> r.time >> r.u >> r.v)) throw std::invalid_argument("bad replay line: " + line);
        if (r.time <= prev_t) throw std::invalid_argument("replay times must ascend");
        if (r.u == r.v) throw std::invalid_argument("replay pair must differ");
        prev_t = r.time;
        out.push_back(r);
    }
    return out;
}

// Open-loop request stream: fully determined by the config and seed, never by
// topology state, so traces stay comparable across algorithm changes.
inline std::vector<Request> generate_workload(const RunConfig& cfg) {
    cfg.check();
    std::vector<Request> out;
    out.reserve(static_cast<std::size_t>(cfg.requests));
    Rng rng(Rng::mix(cfg.seed, 0x776f726bULL));

    if (cfg.workload == WorkloadKind::replay) {
        std::ifstream in(cfg.replay_file);
        if (!in) throw std::runtime_error("cannot open replay file " + cfg.replay_file);
        return parse_replay(in);
    }

    auto uniform_pair = [&](Request& r) {
        r.u = 1 + static_cast<std::int64_t>(rng.below(cfg.n));
        do {
            r.v = 1 + static_cast<std::int64_t>(rng.below(cfg.n));
        } while (r.v == r.u);
    };

    std::vector<double> zipf_cum;
    if (cfg.workload == WorkloadKind::zipf) {
        zipf_cum.resize(cfg.n);
        double acc = 0;
        for (std::int64_t k = 1; k <= cfg.n; ++k) {
            acc += std::pow(static_cast<double>(k), -cfg.zipf_s);
            zipf_cum[k - 1] = acc;
        }
    }
    auto zipf_draw = [&]() {
        double x = rng.unit() * zipf_cum.back();
        auto it = std::lower_bound(zipf_cum.begin(), zipf_cum.end(), x);
        return 1 + static_cast<std::int64_t>(it - zipf_cum.begin());
    };

    Request fixed;
    if (cfg.workload == WorkloadKind::repeated_pair) uniform_pair(fixed);

    std::vector<std::int64_t> cluster_of;
    if (cfg.workload == WorkloadKind::cluster) {
        cluster_of.resize(cfg.n);
        for (std::int64_t i = 0; i < cfg.n; ++i) cluster_of[i] = i * cfg.clusters / cfg.n;
    }

    for (std::int64_t i = 0; i < cfg.requests; ++i) {
        Request r;
        r.time = i + 1;
        switch (cfg.workload) {
            case WorkloadKind::uniform:
                uniform_pair(r);
                break;
            case WorkloadKind::zipf:
                r.u = zipf_draw();
                do { r.v = zipf_draw(); } while (r.v == r.u);
                break;
            case WorkloadKind::repeated_pair:
                if (rng.unit() < cfg.pair_prob) { r.u = fixed.u; r.v = fixed.v; }
                else uniform_pair(r);
                break;
            case WorkloadKind::cluster: {
                // Mostly intra-clique traffic, with rare cross-clique edges.
                if (rng.chance(15, 16) && cfg.clusters < cfg.n) {
                    std::int64_t c = static_cast<std::int64_t>(rng.below(cfg.clusters));
                    std::int64_t lo = c * cfg.n / cfg.clusters;
                    std::int64_t hi = (c + 1) * cfg.n / cfg.clusters;
                    if (hi - lo < 2) { uniform_pair(r); break; }
                    r.u = 1 + lo + static_cast<std::int64_t>(rng.below(hi - lo));
                    do {
                        r.v = 1 + lo + static_cast<std::int64_t>(rng.below(hi - lo));
                    } while (r.v == r.u);
                } else {
                    uniform_pair(r);
                }
                break;
            }
            case WorkloadKind::replay:
                break;
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace dsg
