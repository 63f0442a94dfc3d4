// detnet: scenario generation, bounds, admission, simulation and experiments.

#include "detnet/harness.hpp"
#include "detnet/log.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace detnet;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kInvariant = 2;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

harness::ExperimentConfig loadConfig(const Globals& g)
{
    auto cfg = g.config.empty() ? harness::ExperimentConfig{} : harness::loadConfigFile(g.config);
    if (g.seed) {
        // The seed list keeps its length and starts at --seed.
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) cfg.seeds[i] = *g.seed + i;
    }
    return cfg;
}

struct Inputs {
    std::string network;
    std::string flows;
};

harness::Scenario loadOrGenerate(const harness::ExperimentConfig& cfg, const Inputs& in)
{
    if (in.network.empty() != in.flows.empty())
        throw ValidationError("--network and --flows must be given together");
    if (in.network.empty()) return harness::generateScenario(cfg.scenario, cfg.seeds.front());
    harness::Scenario sc;
    sc.net = netmodel::loadNetworkFile(in.network);
    sc.flows = netmodel::loadFlowsFile(in.flows, sc.net);
    return sc;
}

std::ofstream openOut(const fs::path& dir, const std::string& file)
{
    fs::create_directories(dir);
    std::ofstream f(dir / file);
    if (!f) throw ValidationError("cannot write " + (dir / file).string());
    return f;
}

scheduler::ScheduleResult runSchedule(const harness::ExperimentConfig& cfg, const harness::Scenario& sc, bool greedy)
{
    return greedy ? scheduler::greedyBaseline(sc.flows, sc.net, cfg.scheduler)
                  : scheduler::scheduleTrace(sc.flows, sc.net, cfg.scheduler, harness::pricingFor(cfg, sc));
}

int cmdGen(const Globals& g)
{
    const auto cfg = loadConfig(g);
    const auto sc = harness::generateScenario(cfg.scenario, cfg.seeds.front());
    openOut(g.out, "network.json") << netmodel::toJson(sc.net).dump(2) << '\n';
    openOut(g.out, "flows.json") << netmodel::toJson(sc.flows, sc.net).dump(2) << '\n';
    std::cout << "wrote " << sc.net.domains().size() << " domains, " << sc.net.nodes().size() << " nodes, "
              << sc.net.links().size() << " links and " << sc.flows.size() << " flows to " << g.out << '\n';
    return kOk;
}

int cmdBounds(const Globals& g, const Inputs& in, const std::string& only)
{
    const auto cfg = loadConfig(g);
    const auto sc = loadOrGenerate(cfg, in);
    netmodel::PathCache paths(sc.net, cfg.scheduler.maxPaths);
    auto out = openOut(g.out, "bounds.csv");
    out << "flow_id,path_rank,path,quotas_bits,shaper_ns,trans_ns,cross_prop_ns,total_ns,meets_deadline\n";
    std::size_t rows = 0, feasible = 0, matched = 0;
    for (const auto& f : sc.flows) {
        if (!only.empty() && f.id != only) continue;
        ++matched;
        for (const auto& c : scheduler::enumerateCombinations(f, sc.net, cfg.scheduler.menu, paths)) {
            const auto bd = bounds::tryEndToEndDelayBound(sc.net, f, c.path, c.quotas, cfg.scheduler.bound);
            auto join = [](const std::vector<Nanos>& v) {
                std::string s;
                for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
                return s;
            };
            std::string quotas;
            for (std::size_t k = 0; k < c.quotas.quota.size(); ++k)
                quotas += (k ? " " : "") + std::to_string(c.quotas.quota[k]);
            const bool ok = bounds::checkDeadline(f, bd);
            out << f.id << ',' << c.pathRank << ',' << netmodel::describePath(sc.net, c.path) << ',' << quotas << ',';
            if (bd)
                out << join(bd->shaper) << ',' << join(bd->trans) << ',' << join(bd->crossPropagation) << ','
                    << bd->total;
            else
                out << ",,,unbounded";
            out << ',' << (ok ? 1 : 0) << '\n';
            ++rows;
            feasible += ok;
        }
    }
    if (!only.empty() && matched == 0) throw ValidationError("no flow named " + only);
    std::cout << rows << " combinations, " << feasible << " meet their deadline; wrote " << (fs::path(g.out) / "bounds.csv").string()
              << '\n';
    return kOk;
}

int cmdSchedule(const Globals& g, const Inputs& in, bool greedy)
{
    const auto cfg = loadConfig(g);
    const auto sc = loadOrGenerate(cfg, in);
    const auto r = runSchedule(cfg, sc, greedy);
    r.ledger.checkInvariant();
    auto out = openOut(g.out, greedy ? "decisions_greedy.csv" : "decisions.csv");
    harness::writeDecisionsCsv(out, sc.net, r);
    std::cout << (greedy ? "greedy" : "auction") << ": admitted " << r.admitted() << " of " << sc.flows.size()
              << ", objective " << r.objective << '\n';
    return kOk;
}

int cmdSimulate(const Globals& g, const Inputs& in, const std::string& mode, double load, double durationMs, bool trace)
{
    auto cfg = loadConfig(g);
    if (durationMs > 0) cfg.simulation.duration = static_cast<Nanos>(durationMs * 1e6);
    if (mode != "det" && mode != "be") throw ValidationError("--mode must be det or be");
    const auto sc = loadOrGenerate(cfg, in);
    const auto r = runSchedule(cfg, sc, false);
    const auto admitted = harness::admittedFlows(sc.flows, r);
    auto simCfg = harness::simConfigFor(cfg, mode == "det" ? simulator::Mode::Deterministic : simulator::Mode::BestEffort,
                                        load, cfg.seeds.front());
    simCfg.keepRecords = trace;
    const auto stats = simulator::runSimulation(sc.net, admitted, simCfg);
    auto out = openOut(g.out, "flow_stats.csv");
    harness::writeFlowStatsCsv(out, stats);
    if (trace) {
        auto t = openOut(g.out, "trace.csv");
        harness::writeTraceCsv(t, stats, admitted);
    }
    std::printf("%zu flows, %llu events, max delay %.1f us, max jitter %.1f us, violations %llu, shaper overflows %llu, "
                "drops %llu, utilization mean %.3f max %.3f\n",
                stats.flows.size(), static_cast<unsigned long long>(stats.events),
                static_cast<double>(stats.maxDelay()) / 1e3, static_cast<double>(stats.maxJitter()) / 1e3,
                static_cast<unsigned long long>(stats.totalViolations()),
                static_cast<unsigned long long>(stats.totalShaperOverflows()),
                static_cast<unsigned long long>(stats.totalDrops()), stats.meanUtilization, stats.maxUtilization);
    if (simCfg.mode == simulator::Mode::Deterministic && (stats.totalViolations() || stats.totalShaperOverflows())) {
        std::cerr << "error: admitted flows exceeded their bound or overflowed a shaper\n";
        return kInvariant;
    }
    return kOk;
}

int cmdExperiment(const Globals& g, const std::string& name)
{
    const auto cfg = loadConfig(g);
    std::vector<std::string> names;
    if (name == "all")
        names = harness::experimentNames();
    else
        names = {name};
    for (const auto& n : names) {
        const auto m = harness::runExperiment(n, cfg, g.out);
        for (const auto& a : m.artifacts) std::cout << n << ": " << a.file << " (" << a.rows << " rows)\n";
    }
    return kOk;
}

int cmdReport(const Globals& g, const std::string& dir)
{
    std::cout << harness::report(dir.empty() ? g.out : dir);
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cross-domain deterministic networking: bounds, admission and simulation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "first seed");
    app.add_option("--out", g.out, "output directory");

    Inputs in;
    auto addInputs = [&](CLI::App* c) {
        c->add_option("--network", in.network, "topology JSON (default: generated scenario)")->check(CLI::ExistingFile);
        c->add_option("--flows", in.flows, "flow trace JSON")->check(CLI::ExistingFile);
    };

    auto* gen = app.add_subcommand("gen", "generate the scenario topology and flow trace");

    auto* bnd = app.add_subcommand("bounds", "end-to-end bounds for every path and quota combination");
    addInputs(bnd);
    std::string onlyFlow;
    bnd->add_option("--flow", onlyFlow, "restrict to one flow id");

    auto* sch = app.add_subcommand("schedule", "run online admission over the flow trace");
    addInputs(sch);
    bool greedy = false;
    sch->add_flag("--greedy", greedy, "use the lease-cost greedy baseline");

    auto* sim = app.add_subcommand("simulate", "admit, then simulate the data plane");
    addInputs(sim);
    std::string mode = "det";
    double load = 0.0, durationMs = 0.0;
    bool trace = false;
    sim->add_option("--mode", mode, "det or be")->check(CLI::IsMember({"det", "be"}));
    sim->add_option("--load", load, "background load in [0, 1)")->check(CLI::Range(0.0, 0.999999));
    sim->add_option("--duration-ms", durationMs, "simulated time (default from config)")->check(CLI::PositiveNumber);
    sim->add_flag("--trace", trace, "also write a per-packet trace");

    auto* exp = app.add_subcommand("experiment", "run fig4, fig5, fig6, fig7 or all");
    std::string expName;
    exp->add_option("name", expName)->required();

    auto* rep = app.add_subcommand("report", "summarize experiment outputs");
    std::string repDir;
    rep->add_option("dir", repDir, "directory holding manifests (default: --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (gen->parsed()) return cmdGen(g);
        if (bnd->parsed()) return cmdBounds(g, in, onlyFlow);
        if (sch->parsed()) return cmdSchedule(g, in, greedy);
        if (sim->parsed()) return cmdSimulate(g, in, mode, load, durationMs, trace);
        if (exp->parsed()) return cmdExperiment(g, expName);
        if (rep->parsed()) return cmdReport(g, repDir);
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
