#include "detnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace detnet::harness {

using nlohmann::json;
using scheduler::ScheduleResult;
using simulator::AdmittedFlow;
using simulator::Mode;

namespace {

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string modeName(Mode m) { return m == Mode::Deterministic ? "deterministic" : "best_effort"; }

std::string quotaList(const bounds::ShaperAssignment& a)
{
    std::string s;
    for (std::size_t k = 0; k < a.quota.size(); ++k) s += (k ? " " : "") + std::to_string(a.quota[k]);
    return s;
}

struct Scheduled {
    Scenario scenario;
    ScheduleResult result;
    std::vector<AdmittedFlow> admitted;
};

Scheduled scheduleSeed(const ExperimentConfig& cfg, const ScenarioConfig& scfg, std::uint64_t seed)
{
    Scheduled s{generateScenario(scfg, seed), {}, {}};
    s.result = scheduler::scheduleTrace(s.scenario.flows, s.scenario.net, cfg.scheduler, pricingFor(cfg, s.scenario));
    s.admitted = admittedFlows(s.scenario.flows, s.result);
    return s;
}

}  // namespace

// --- pipeline ------------------------------------------------------------------

scheduler::PricingConfig pricingFor(const ExperimentConfig& cfg, const Scenario& sc)
{
    if (cfg.pricing) return scheduler::validatePricing(*cfg.pricing, sc.net.maxLeasePrice());
    return scheduler::deriveValueDensityBounds(sc.flows, sc.net.maxLeasePrice());
}

std::vector<AdmittedFlow> admittedFlows(const std::vector<Flow>& flows, const ScheduleResult& result)
{
    std::map<std::string, const Flow*> byId;
    for (const auto& f : flows) byId[f.id] = &f;
    std::vector<AdmittedFlow> out;
    for (const auto& d : result.decisions) {
        if (!d.admitted) continue;
        auto it = byId.find(d.flowId);
        if (it == byId.end()) throw ValidationError("decision for unknown flow " + d.flowId);
        if (!d.chosen || !d.chosen->bound) throw InvariantViolation("admitted flow " + d.flowId + " has no bound");
        out.push_back({*it->second, d.chosen->path, d.chosen->quotas, d.chosen->bound->total});
    }
    return out;
}

simulator::SimConfig simConfigFor(const ExperimentConfig& cfg, Mode mode, double load, std::uint64_t seed)
{
    simulator::SimConfig s;
    s.mode = mode;
    s.duration = cfg.simulation.duration;
    s.seed = seed;
    s.shaperQueues = cfg.simulation.shaperQueues;
    s.bufferPackets = cfg.simulation.bufferPackets;
    s.background = cfg.simulation.background;
    s.background.load = load;
    return s;
}

void parallelFor(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// --- experiments ---------------------------------------------------------------

Fig4Result runFig4(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto& seeds = cfg.seeds;
    std::vector<Scheduled> sched(seeds.size());
    parallelFor(seeds.size(), cfg.threads, [&](std::size_t i) { sched[i] = scheduleSeed(cfg, cfg.scenario, seeds[i]); });

    const auto& loads = cfg.simulation.loads;
    const Mode modes[] = {Mode::Deterministic, Mode::BestEffort};
    const std::size_t runs = seeds.size() * loads.size() * 2;
    std::vector<std::vector<Fig4Row>> rows(runs);
    std::vector<std::vector<Fig4Sample>> series(runs);
    parallelFor(runs, cfg.threads, [&](std::size_t r) {
        const std::size_t si = r / (loads.size() * 2);
        const std::size_t li = (r / 2) % loads.size();
        const Mode mode = modes[r % 2];
        const auto& s = sched[si];
        auto sc = simConfigFor(cfg, mode, loads[li], seeds[si]);
        if (si == 0 && !s.admitted.empty()) {
            sc.keepRecords = true;
            sc.recordFlow = 0;
        }
        const auto stats = simulator::runSimulation(s.scenario.net, s.admitted, sc);
        for (std::size_t f = 0; f < stats.flows.size(); ++f) {
            const auto& fs = stats.flows[f];
            rows[r].push_back({loads[li], seeds[si], modeName(mode), fs.id, fs.delivered, fs.maxDelay, fs.meanDelay,
                               fs.jitter(), fs.bound, fs.violations, fs.drops, fs.shaperOverflows,
                               stats.meanUtilization});
        }
        for (const auto& rec : stats.records)
            series[r].push_back({loads[li], modeName(mode), stats.flows[rec.flow].id, rec.createdAt,
                                 rec.deliveredAt - rec.createdAt});
    });
    Fig4Result out;
    for (std::size_t r = 0; r < runs; ++r) {
        out.rows.insert(out.rows.end(), rows[r].begin(), rows[r].end());
        out.series.insert(out.series.end(), series[r].begin(), series[r].end());
    }
    return out;
}

std::vector<Fig5Row> runFig5(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto& seeds = cfg.seeds;
    std::vector<std::vector<Fig5Row>> perSeed(seeds.size());
    const double load = cfg.simulation.loads.empty() ? 0.0 : cfg.simulation.loads.front();
    parallelFor(seeds.size(), cfg.threads, [&](std::size_t i) {
        const auto s = scheduleSeed(cfg, cfg.scenario, seeds[i]);
        const auto stats =
            simulator::runSimulation(s.scenario.net, s.admitted, simConfigFor(cfg, Mode::Deterministic, load, seeds[i]));
        const auto& net = s.scenario.net;
        for (std::size_t f = 0; f < s.admitted.size(); ++f) {
            const auto& af = s.admitted[f];
            const auto bd = bounds::endToEndDelayBound(net, af.flow, af.path, af.quotas, cfg.scheduler.bound);
            Fig5Row row;
            row.seed = seeds[i];
            row.flowId = af.flow.id;
            row.fromDomain = net.domain(af.path.segments.front().domain).id;
            row.toDomain = net.domain(af.path.segments.back().domain).id;
            row.measuredCross = stats.flows[f].meanCrossDomainDelay;
            for (std::size_t k = 1; k < af.path.domainCount(); ++k) {
                const Nanos prop = net.link(af.path.crossLinks[k - 1]).propagation;
                row.boundCross += bd.shaper[k] + prop;
                row.modelCross += slotMappingDelayModel(net.domain(af.path.segments[k - 1].domain),
                                                        net.domain(af.path.segments[k].domain)) +
                                  prop;
            }
            perSeed[i].push_back(row);
        }
    });
    std::vector<Fig5Row> out;
    for (auto& v : perSeed) out.insert(out.end(), v.begin(), v.end());
    return out;
}

std::vector<Fig6Row> runFig6(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto sc = generateScenario(cfg.scenario, cfg.seeds.front());
    netmodel::PathCache paths(sc.net, cfg.scheduler.maxPaths);
    // One representative flow per source domain.
    std::vector<const Flow*> reps;
    std::vector<bool> seen(sc.net.domains().size(), false);
    for (const auto& f : sc.flows) {
        const auto d = sc.net.node(f.source).domain;
        if (!seen[d]) {
            seen[d] = true;
            reps.push_back(&f);
        }
    }
    std::sort(reps.begin(), reps.end(), [](const Flow* a, const Flow* b) { return a->id < b->id; });
    std::vector<Fig6Row> out;
    for (const auto& classes : cfg.periodClasses) {
        const Nanos h = hypercycle(classes);
        const Nanos shortest = *std::min_element(classes.begin(), classes.end());
        for (const Flow* rep : reps) {
            Flow f = *rep;
            f.gen = netmodel::GenProfile{shortest, cfg.scenario.packetSize};
            Fig6Row row;
            row.classes = classes.size();
            row.hypercycle = h;
            row.flowId = f.id;
            row.proposed = countFeasibleSolutions(CountModel::Proposed, f, sc.net, cfg.scheduler.menu, paths);
            row.hypercycleCount = countFeasibleSolutions(CountModel::Hypercycle, f, sc.net, cfg.scheduler.menu, paths, h);
            out.push_back(row);
        }
    }
    return out;
}

std::vector<Fig7Row> runFig7(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto& eps = cfg.epsilons;
    const auto& seeds = cfg.seeds;
    std::vector<Fig7Row> out(eps.size() * seeds.size());
    parallelFor(out.size(), cfg.threads, [&](std::size_t r) {
        ScenarioConfig scfg = cfg.scenario;
        scfg.leasePrice = eps[r / seeds.size()];
        const std::uint64_t seed = seeds[r % seeds.size()];
        const auto sc = generateScenario(scfg, seed);
        const auto auction = scheduler::scheduleTrace(sc.flows, sc.net, cfg.scheduler, pricingFor(cfg, sc));
        const auto greedy = scheduler::greedyBaseline(sc.flows, sc.net, cfg.scheduler);
        out[r] = {scfg.leasePrice, seed, auction.objective, greedy.objective, auction.admitted(), greedy.admitted()};
    });
    return out;
}

// --- output --------------------------------------------------------------------

json Manifest::toJson() const
{
    json j;
    j["experiment"] = experiment;
    j["label"] = label;
    j["config_hash"] = configHash;
    j["seeds"] = seeds;
    j["artifacts"] = json::array();
    for (const auto& a : artifacts)
        j["artifacts"].push_back({{"file", a.file}, {"rows", a.rows}, {"description", a.description}});
    return j;
}

void writeManifest(const std::filesystem::path& dir, const Manifest& m)
{
    std::ofstream out(dir / ("manifest_" + m.experiment + ".json"));
    if (!out) throw ValidationError("cannot write manifest in " + dir.string());
    out << m.toJson().dump(2) << '\n';
}

std::size_t writeDecisionsCsv(std::ostream& os, const Network& net, const ScheduleResult& result)
{
    os << "order,flow_id,weight,admitted,reason,path,quotas_bits,bound_ns,price,objective_running\n";
    std::size_t n = 0;
    for (const auto& d : result.decisions) {
        os << n << ',' << d.flowId << ',' << fmt(d.weight) << ',' << (d.admitted ? 1 : 0) << ','
           << scheduler::reasonName(d.reason) << ',';
        if (d.chosen) {
            os << netmodel::describePath(net, d.chosen->path) << ',' << quotaList(d.chosen->quotas) << ','
               << (d.chosen->bound ? std::to_string(d.chosen->bound->total) : std::string()) << ',';
        } else {
            os << ",,,";
        }
        os << fmt(d.price) << ',' << fmt(d.objectiveRunning) << '\n';
        ++n;
    }
    return n;
}

std::size_t writeFlowStatsCsv(std::ostream& os, const simulator::SimStats& stats)
{
    os << "flow_id,packets,max_delay_ns,mean_delay_ns,jitter_ns,bound_ns,violations,drops,shaper_overflows\n";
    for (const auto& f : stats.flows)
        os << f.id << ',' << f.delivered << ',' << f.maxDelay << ',' << fmt(f.meanDelay) << ',' << f.jitter() << ','
           << f.bound << ',' << f.violations << ',' << f.drops << ',' << f.shaperOverflows << '\n';
    return stats.flows.size();
}

std::size_t writeTraceCsv(std::ostream& os, const simulator::SimStats& stats, const std::vector<AdmittedFlow>& flows)
{
    os << "flow_id,seq,size_bits,created_ns,delivered_ns,delay_ns,domain_stamps\n";
    for (const auto& r : stats.records) {
        os << flows.at(r.flow).flow.id << ',' << r.seq << ',' << r.size << ',' << r.createdAt << ',' << r.deliveredAt
           << ',' << r.deliveredAt - r.createdAt << ',';
        for (std::size_t k = 0; k < r.domains.size(); ++k)
            os << (k ? " " : "") << r.domains[k].ingress << '/' << r.domains[k].release << '/' << r.domains[k].egress;
        os << '\n';
    }
    return stats.records.size();
}

const std::vector<std::string>& experimentNames()
{
    static const std::vector<std::string> names{"fig4", "fig5", "fig6", "fig7"};
    return names;
}

namespace {

std::ofstream openCsv(const std::filesystem::path& dir, const std::string& file)
{
    std::ofstream out(dir / file);
    if (!out) throw ValidationError("cannot write " + (dir / file).string());
    return out;
}

}  // namespace

Manifest runExperiment(const std::string& name, const ExperimentConfig& cfg, const std::filesystem::path& out)
{
    const auto& names = experimentNames();
    if (std::find(names.begin(), names.end(), name) == names.end())
        throw ValidationError("unknown experiment '" + name + "'");
    std::filesystem::create_directories(out);
    Manifest m;
    m.experiment = name;
    m.seeds = cfg.seeds;
    m.configHash = configHash(cfg);

    if (name == "fig4") {
        const auto r = runFig4(cfg);
        m.label = "measured delays, deterministic vs best-effort";
        auto f = openCsv(out, "fig4_delays.csv");
        f << "load,seed,mode,flow_id,packets,max_delay_ns,mean_delay_ns,jitter_ns,bound_ns,violations,drops,"
             "shaper_overflows,utilization\n";
        for (const auto& x : r.rows)
            f << fmt(x.load) << ',' << x.seed << ',' << x.mode << ',' << x.flowId << ',' << x.packets << ','
              << x.maxDelay << ',' << fmt(x.meanDelay) << ',' << x.jitter << ',' << x.bound << ',' << x.violations
              << ',' << x.drops << ',' << x.shaperOverflows << ',' << fmt(x.utilization) << '\n';
        m.artifacts.push_back({"fig4_delays.csv", r.rows.size(), "per-flow delay statistics per load, seed and mode"});
        auto g = openCsv(out, "fig4_series.csv");
        g << "load,mode,flow_id,created_ns,delay_ns\n";
        for (const auto& x : r.series)
            g << fmt(x.load) << ',' << x.mode << ',' << x.flowId << ',' << x.createdAt << ',' << x.delay << '\n';
        m.artifacts.push_back({"fig4_series.csv", r.series.size(), "delay time series of one flow, first seed"});
    } else if (name == "fig5") {
        const auto r = runFig5(cfg);
        m.label = "model-based comparison";
        auto f = openCsv(out, "fig5_cross_domain.csv");
        f << "seed,flow_id,from_domain,to_domain,measured_cross_ns,bound_cross_ns,slot_mapping_model_ns\n";
        for (const auto& x : r)
            f << x.seed << ',' << x.flowId << ',' << x.fromDomain << ',' << x.toDomain << ',' << fmt(x.measuredCross)
              << ',' << x.boundCross << ',' << x.modelCross << '\n';
        m.artifacts.push_back({"fig5_cross_domain.csv", r.size(), "cross-domain delay, proposed vs slot-mapping model"});
    } else if (name == "fig6") {
        const auto r = runFig6(cfg);
        m.label = "model-based comparison";
        auto f = openCsv(out, "fig6_counts.csv");
        f << "classes,hypercycle_ns,flow_id,proposed_count,hypercycle_count\n";
        for (const auto& x : r)
            f << x.classes << ',' << x.hypercycle << ',' << x.flowId << ',' << fmt(x.proposed) << ','
              << fmt(x.hypercycleCount) << '\n';
        m.artifacts.push_back({"fig6_counts.csv", r.size(), "feasible-solution counts vs heterogeneous period classes"});
    } else {
        const auto r = runFig7(cfg);
        m.label = "objective, auction vs greedy";
        auto f = openCsv(out, "fig7_objective.csv");
        f << "epsilon,seed,auction_objective,greedy_objective,auction_admitted,greedy_admitted\n";
        for (const auto& x : r)
            f << fmt(x.epsilon) << ',' << x.seed << ',' << fmt(x.auction) << ',' << fmt(x.greedy) << ','
              << x.auctionAdmitted << ',' << x.greedyAdmitted << '\n';
        m.artifacts.push_back({"fig7_objective.csv", r.size(), "objective per lease price and seed"});
    }
    writeManifest(out, m);
    return m;
}

// --- report --------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> readCsv(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in) throw ValidationError("cannot read " + p.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name)
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
}

void summarizeFig4(std::ostream& os, const std::filesystem::path& file)
{
    const auto rows = readCsv(file);
    if (rows.size() < 2) return;
    const auto& h = rows[0];
    const auto cLoad = column(h, "load"), cMode = column(h, "mode"), cMax = column(h, "max_delay_ns"),
               cJit = column(h, "jitter_ns"), cViol = column(h, "violations"), cUtil = column(h, "utilization");
    struct Agg {
        long long maxDelay = 0;
        double jitterSum = 0;
        std::size_t n = 0;
        long long violations = 0;
        double util = 0;
    };
    std::map<std::pair<std::string, std::string>, Agg> agg;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        auto& a = agg[{r[cLoad], r[cMode]}];
        a.maxDelay = std::max(a.maxDelay, std::stoll(r[cMax]));
        a.jitterSum += std::stod(r[cJit]);
        a.violations += std::stoll(r[cViol]);
        a.util = std::max(a.util, std::stod(r[cUtil]));
        ++a.n;
    }
    for (const auto& [key, a] : agg) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "  load %s %-13s max delay %8.1f us  mean jitter %8.1f us  violations %lld  utilization %.3f\n",
                      key.first.c_str(), key.second.c_str(), static_cast<double>(a.maxDelay) / 1e3,
                      a.jitterSum / static_cast<double>(a.n) / 1e3, a.violations, a.util);
        os << buf;
    }
}

void summarizeFig7(std::ostream& os, const std::filesystem::path& file)
{
    const auto rows = readCsv(file);
    if (rows.size() < 2) return;
    const auto& h = rows[0];
    const auto cEps = column(h, "epsilon"), cA = column(h, "auction_objective"), cG = column(h, "greedy_objective");
    std::map<double, std::tuple<double, double, std::size_t>> agg;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto& [a, g, n] = agg[std::stod(rows[i][cEps])];
        a += std::stod(rows[i][cA]);
        g += std::stod(rows[i][cG]);
        ++n;
    }
    for (const auto& [eps, v] : agg) {
        const auto& [a, g, n] = v;
        char buf[200];
        std::snprintf(buf, sizeof buf, "  epsilon %6.2f  auction %12.1f  greedy %12.1f  gap %10.1f  (%zu seeds)\n", eps,
                      a / static_cast<double>(n), g / static_cast<double>(n), (a - g) / static_cast<double>(n), n);
        os << buf;
    }
}

}  // namespace

std::string report(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
    std::vector<std::filesystem::path> manifests;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("manifest_", 0) == 0 && e.path().extension() == ".json") manifests.push_back(e.path());
    }
    if (manifests.empty()) throw ValidationError("no manifest found in " + dir.string());
    std::sort(manifests.begin(), manifests.end());
    std::ostringstream os;
    for (const auto& p : manifests) {
        std::ifstream in(p);
        json m;
        try {
            in >> m;
        } catch (const json::exception& e) {
            throw ValidationError(p.string() + ": " + e.what());
        }
        const std::string exp = m.at("experiment").get<std::string>();
        os << exp << " [" << m.at("label").get<std::string>() << "] config " << m.at("config_hash").get<std::string>()
           << ", " << m.at("seeds").size() << " seeds\n";
        for (const auto& a : m.at("artifacts")) {
            const auto file = a.at("file").get<std::string>();
            os << "  " << file << ": " << a.at("rows").get<std::size_t>() << " rows\n";
            if (file == "fig4_delays.csv") summarizeFig4(os, dir / file);
            if (file == "fig7_objective.csv") summarizeFig7(os, dir / file);
        }
    }
    return os.str();
}

}  // namespace detnet::harness
