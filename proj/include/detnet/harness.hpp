#pragma once

// Scenario generation, comparison models, experiment orchestration and CSV output.

#include "detnet/netmodel.hpp"
#include "detnet/scheduler.hpp"
#include "detnet/simulator.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace detnet::harness {

using netmodel::Flow;
using netmodel::Network;

// --- scenario ----------------------------------------------------------------

struct UserDomainSpec {
    std::string topology = "ring";  // "ring" or "line"
    Nanos slot = 2 * kMicrosecond;
    std::string attachment = "N1";  // provider node the gateway connects to
};

struct ScenarioConfig {
    std::size_t flowsPerUserDomain = 100;
    std::vector<Nanos> periods{200 * kMicrosecond, 300 * kMicrosecond, 400 * kMicrosecond, 500 * kMicrosecond};
    Bits packetSize = 12000;
    Nanos deadline = kMillisecond;
    double weightMin = 1.0;
    double weightMax = 100.0;
    double leasePrice = 7.5;  // per Mb/s, every link
    std::string sink = "N1";

    Nanos providerSlot = 10 * kMicrosecond;
    BitsPerSec providerBandwidth = 10 * kGbps;
    Nanos providerPropagation = 150 * kMicrosecond;
    BitsPerSec userBandwidth = kGbps;
    std::size_t userNodes = 6;
    BitsPerSec crossBandwidth = kGbps;
    Nanos crossPropagation = 10 * kMicrosecond;
    std::vector<UserDomainSpec> userDomains{{"ring", 2 * kMicrosecond, "N13"},
                                            {"ring", 8 * kMicrosecond, "N3"},
                                            {"ring", 2 * kMicrosecond, "N9"},
                                            {"line", 8 * kMicrosecond, "N1"},
                                            {"line", 2 * kMicrosecond, "N14"}};

    void validate() const;
    static ScenarioConfig fromJson(const nlohmann::json& j);
    nlohmann::json toJson() const;
};

struct Scenario {
    Network net;
    std::vector<Flow> flows;
};

/// Declared mean rate for a periodic flow: one `packet`-bit packet per period,
/// counted in bytes rather than bits (1500 B every 200 us -> 7.5 Mb/s).
BitsPerSec declaredRate(Bits packet, Nanos period);

/// The 15-node provider mesh plus the configured user domains, and a shuffled
/// arrival order of flowsPerUserDomain flows per user domain. Deterministic in seed.
Scenario generateScenario(const ScenarioConfig& cfg, std::uint64_t seed);

// --- comparison models ---------------------------------------------------------

Nanos hypercycle(const std::vector<Nanos>& periods);

/// Worst cross-domain alignment delay of a slot-mapping mechanism: tau_prev + 2 tau_next.
Nanos slotMappingDelayModel(const netmodel::Domain& prev, const netmodel::Domain& next);

enum class CountModel { Proposed, Hypercycle };

/// Proposed: sum over candidate paths of m^{K_p}. Hypercycle: sum over paths of
/// (H / period)^{hops}, one slot-position choice per hop inside the hypercycle H.
double countFeasibleSolutions(CountModel model, const Flow& flow, const Network& net,
                              const scheduler::QuotaMenu& menu, netmodel::PathCache& paths, Nanos hyper = 0);

// --- experiment configuration --------------------------------------------------

struct SimulationSettings {
    Nanos duration = 100 * kMillisecond;
    std::size_t shaperQueues = 10;
    std::size_t bufferPackets = 4096;
    std::vector<double> loads{0.224, 0.784};
    simulator::BackgroundConfig background;  // load is taken from `loads`
};

struct ExperimentConfig {
    ScenarioConfig scenario;
    scheduler::SchedulerConfig scheduler;
    std::optional<scheduler::PricingConfig> pricing;  // unset: derived from the trace
    SimulationSettings simulation;
    std::vector<double> epsilons{2.5, 5.0, 7.5, 10.0, 12.5};
    std::vector<std::vector<Nanos>> periodClasses{{200 * kMicrosecond},
                                                  {200 * kMicrosecond, 300 * kMicrosecond},
                                                  {200 * kMicrosecond, 300 * kMicrosecond, 400 * kMicrosecond},
                                                  {200 * kMicrosecond, 300 * kMicrosecond, 400 * kMicrosecond,
                                                   500 * kMicrosecond}};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::size_t threads = 0;  // 0: hardware concurrency

    void validate() const;
    static ExperimentConfig fromJson(const nlohmann::json& j);
    nlohmann::json toJson() const;
};

ExperimentConfig loadConfigFile(const std::string& path);

std::uint64_t fnv1a(const std::string& data);
/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string configHash(const ExperimentConfig& cfg);

// --- pipeline ------------------------------------------------------------------

scheduler::PricingConfig pricingFor(const ExperimentConfig& cfg, const Scenario& sc);

/// Admitted flows in decision order, ready for the simulator.
std::vector<simulator::AdmittedFlow> admittedFlows(const std::vector<Flow>& flows,
                                                   const scheduler::ScheduleResult& result);

simulator::SimConfig simConfigFor(const ExperimentConfig& cfg, simulator::Mode mode, double load, std::uint64_t seed);

/// Runs fn(i) for i in [0, n) on up to `threads` workers; exceptions propagate.
void parallelFor(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// --- experiments ---------------------------------------------------------------

struct Fig4Row {
    double load = 0.0;
    std::uint64_t seed = 0;
    std::string mode;
    std::string flowId;
    std::uint64_t packets = 0;
    Nanos maxDelay = 0;
    double meanDelay = 0.0;
    Nanos jitter = 0;
    Nanos bound = 0;
    std::uint64_t violations = 0;
    std::uint64_t drops = 0;
    std::uint64_t shaperOverflows = 0;
    double utilization = 0.0;  // measured mean over ports carrying flows
};

struct Fig4Sample {
    double load = 0.0;
    std::string mode;
    std::string flowId;
    Nanos createdAt = 0;
    Nanos delay = 0;
};

struct Fig4Result {
    std::vector<Fig4Row> rows;
    std::vector<Fig4Sample> series;  // first seed, first admitted flow
};

struct Fig5Row {
    std::uint64_t seed = 0;
    std::string flowId;
    std::string fromDomain;
    std::string toDomain;
    double measuredCross = 0.0;  // mean shaper wait plus cross link, ns
    Nanos boundCross = 0;        // downstream shaper bound plus cross-link propagation
    Nanos modelCross = 0;        // slot-mapping model plus cross-link propagation
};

struct Fig6Row {
    std::size_t classes = 0;
    Nanos hypercycle = 0;
    std::string flowId;
    double proposed = 0.0;
    double hypercycleCount = 0.0;
};

struct Fig7Row {
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    double auction = 0.0;
    double greedy = 0.0;
    std::size_t auctionAdmitted = 0;
    std::size_t greedyAdmitted = 0;
};

Fig4Result runFig4(const ExperimentConfig& cfg);
std::vector<Fig5Row> runFig5(const ExperimentConfig& cfg);
std::vector<Fig6Row> runFig6(const ExperimentConfig& cfg);
std::vector<Fig7Row> runFig7(const ExperimentConfig& cfg);

// --- output --------------------------------------------------------------------

struct Artifact {
    std::string file;
    std::size_t rows = 0;
    std::string description;
};

struct Manifest {
    std::string experiment;
    std::string label;
    std::vector<Artifact> artifacts;
    std::vector<std::uint64_t> seeds;
    std::string configHash;

    nlohmann::json toJson() const;
};

void writeManifest(const std::filesystem::path& dir, const Manifest& m);

std::size_t writeDecisionsCsv(std::ostream& os, const Network& net, const scheduler::ScheduleResult& result);
std::size_t writeFlowStatsCsv(std::ostream& os, const simulator::SimStats& stats);
std::size_t writeTraceCsv(std::ostream& os, const simulator::SimStats& stats,
                          const std::vector<simulator::AdmittedFlow>& flows);

const std::vector<std::string>& experimentNames();

/// Runs one named experiment, writing CSVs and a manifest into `out`. Throws
/// ValidationError on an unknown name.
Manifest runExperiment(const std::string& name, const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Human-readable summary of every manifest found in `dir`.
std::string report(const std::filesystem::path& dir);

}  // namespace detnet::harness
