// Command-line driver: builds a skip graph, feeds it a request workload, and
// emits a per-request CSV trace, a JSON summary, and the final topology dump.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsg/scenario.hpp"
#include "dsg/simulator.hpp"
#include "dsg/topology_io.hpp"
#include "dsg/workload.hpp"

namespace {

using nlohmann::ordered_json;

dsg::WorkloadKind parse_workload(const std::string& name, dsg::RunConfig& cfg) {
    std::string base = name;
    std::string arg;
    auto open = name.find('(');
    if (open != std::string::npos && name.back() == ')') {
        base = name.substr(0, open);
        arg = name.substr(open + 1, name.size() - open - 2);
    }
    if (base == "uniform") return dsg::WorkloadKind::uniform;
    if (base == "zipf") {
        if (!arg.empty()) cfg.zipf_s = std::stod(arg);
        return dsg::WorkloadKind::zipf;
    }
    if (base == "repeated_pair") {
        if (!arg.empty()) cfg.pair_prob = std::stod(arg);
        return dsg::WorkloadKind::repeated_pair;
    }
    if (base == "cluster") {
        if (!arg.empty()) cfg.clusters = std::stoi(arg);
        return dsg::WorkloadKind::cluster;
    }
    if (base == "replay") {
        if (!arg.empty()) cfg.replay_file = arg;
        return dsg::WorkloadKind::replay;
    }
    throw CLI::ValidationError("unknown workload " + name);
}

void load_config_file(const std::string& path, dsg::RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("cannot open config " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.contains("n")) cfg.n = j["n"].get<std::int64_t>();
    if (j.contains("a")) cfg.a = j["a"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("requests")) cfg.requests = j["requests"].get<std::int64_t>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    if (j.contains("workload")) cfg.workload = parse_workload(j["workload"].get<std::string>(), cfg);
    if (j.contains("checks")) {
        std::string c = j["checks"].get<std::string>();
        if (c == "full") { cfg.checks_full = true; cfg.check_rate = 1; }
        else if (c.rfind("sampled", 0) == 0) {
            cfg.checks_full = false;
            auto open = c.find('(');
            cfg.check_rate = open == std::string::npos ? 10 : std::stoi(c.substr(open + 1));
        }
    }
}

int write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write " << path << "\n";
        return 1;
    }
    out << body;
    return out.good() ? 0 : 1;
}

ordered_json summary_json(const dsg::RunSummary& s) {
    ordered_json j;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", s.avg_cost);
    j["avg_cost"] = std::stod(buf);
    std::snprintf(buf, sizeof buf, "%.6f", s.ws_bound);
    j["ws_bound"] = std::stod(buf);
    j["max_height"] = s.max_height;
    j["max_direct_link_level"] = s.max_direct_link_level;
    j["violations"] = s.violations;
    return j;
}

int run_one(const dsg::RunConfig& cfg) {
    std::vector<std::int64_t> ids(cfg.n);
    for (std::int64_t i = 0; i < cfg.n; ++i) ids[i] = i + 1;
    dsg::Topology topo = dsg::build_initial(ids, cfg.a, cfg.seed);

    std::vector<dsg::Request> reqs = dsg::generate_workload(cfg);
    dsg::SimConfig sim_cfg;
    sim_cfg.seed = cfg.seed;
    sim_cfg.check_every = cfg.checks_full ? 1 : std::max(1, cfg.check_rate);
    sim_cfg.lemma2_samples = 0;
    dsg::Simulation sim = dsg::run_sequence(std::move(topo), reqs, sim_cfg);

    dsg::RunSummary s = dsg::summarize(sim);
    int rc = 0;
    rc |= write_file(cfg.out + ".trace.csv", dsg::trace_csv(sim));
    rc |= write_file(cfg.out + ".summary.json", summary_json(s).dump(1) + "\n");
    rc |= write_file(cfg.out + ".topology.json", dsg::export_topology(sim.topo));
    if (rc) return 2;
    for (const auto& note : sim.violation_notes) std::cerr << "violation: " << note << "\n";
    return s.violations == 0 ? 0 : 1;
}

int run_fig3_scenario(const dsg::RunConfig& cfg) {
    dsg::Topology topo = dsg::scenario::figure3_state();
    dsg::PinnedMedians pins = dsg::scenario::figure3_pins();
    dsg::Simulation sim;
    sim.topo = std::move(topo);
    sim.cfg.seed = cfg.seed;
    dsg::Request req{dsg::scenario::fig3_time, dsg::scenario::fig3_u, dsg::scenario::fig3_v};
    dsg::execute_request(sim, req, &pins);

    dsg::TransformReport rep;
    rep.direct_link_level = sim.trace.back().direct_link_level;
    auto failures = dsg::scenario::figure3_check(sim.topo, rep);
    dsg::RunSummary s = dsg::summarize(sim);

    ordered_json j = summary_json(s);
    j["scenario_match"] = failures.empty();
    int rc = 0;
    rc |= write_file(cfg.out + ".trace.csv", dsg::trace_csv(sim));
    rc |= write_file(cfg.out + ".summary.json", j.dump(1) + "\n");
    rc |= write_file(cfg.out + ".topology.json", dsg::export_topology(sim.topo));
    for (const auto& f : failures) std::cerr << "scenario mismatch: " << f << "\n";
    if (rc) return 2;
    return failures.empty() && s.violations == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Round-based simulator for locally self-adjusting skip graphs"};
    dsg::RunConfig cfg;
    std::string workload_name = "uniform";
    std::string checks = "full";
    std::string config_path;
    std::string scenario_name;
    int parallel_seeds = 1;

    app.add_option("--config", config_path, "JSON config file (flags override it)");
    app.add_option("--nodes", cfg.n, "node count");
    app.add_option("--balance-a", cfg.a, "balance parameter a");
    app.add_option("--seed", cfg.seed, "random seed");
    app.add_option("--workload", workload_name, "uniform|zipf|repeated_pair|cluster|replay");
    app.add_option("--zipf-s", cfg.zipf_s, "zipf exponent");
    app.add_option("--pair-prob", cfg.pair_prob, "repeated_pair probability");
    app.add_option("--clusters", cfg.clusters, "cluster count");
    app.add_option("--requests", cfg.requests, "request count");
    app.add_option("--replay", cfg.replay_file, "replay file (one 't u v' per line)");
    app.add_option("--checks", checks, "full or sampled(rate)");
    app.add_option("--out", cfg.out, "output path prefix");
    app.add_option("--scenario", scenario_name, "run a built-in scripted scenario (fig3)");
    app.add_option("--parallel-seeds", parallel_seeds, "fan out over consecutive seeds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) load_config_file(config_path, cfg);
        for (const auto* opt : app.get_options()) {
            if (opt->count() == 0) continue;
            const std::string& name = opt->get_name();
            if (name == "--workload") cfg.workload = parse_workload(workload_name, cfg);
            if (name == "--replay") cfg.workload = dsg::WorkloadKind::replay;
            if (name == "--checks") {
                if (checks == "full") { cfg.checks_full = true; cfg.check_rate = 1; }
                else {
                    cfg.checks_full = false;
                    auto open = checks.find('(');
                    cfg.check_rate = open == std::string::npos ? 10 : std::stoi(checks.substr(open + 1));
                }
            }
        }
        if (scenario_name == "fig3") return run_fig3_scenario(cfg);
        if (!scenario_name.empty()) {
            std::cerr << "unknown scenario " << scenario_name << "\n";
            return 2;
        }
        cfg.check();
        if (parallel_seeds <= 1) return run_one(cfg);
        int rc = 0;
        dsg::RunConfig sub = cfg;
        for (int s = 0; s < parallel_seeds; ++s) {
            sub.seed = cfg.seed + static_cast<std::uint64_t>(s);
            sub.out = cfg.out + ".s" + std::to_string(s);
            rc |= run_one(sub);
        }
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
