#include "detnet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace detnet::harness {

using nlohmann::json;
using netmodel::DomainSide;
using netmodel::LinkKind;

namespace {

void checkKeys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ValidationError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get(const json& j, const char* key, T fallback)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
    }
}

// Atlanta-like metro mesh: 15 nodes, 22 links; every attachment point is
// within four hops of N1.
constexpr std::pair<int, int> kProviderEdges[] = {
    {1, 2},  {1, 3},   {1, 4},   {2, 5},   {2, 6},   {3, 6},   {3, 7},   {4, 7},   {4, 8},   {5, 9},   {6, 9},
    {6, 10}, {7, 10},  {7, 11},  {8, 11},  {9, 12},  {10, 12}, {10, 13}, {11, 13}, {9, 14},  {13, 15}, {14, 15},
};
constexpr int kProviderNodes = 15;

}  // namespace

// --- scenario config ---------------------------------------------------------------

void ScenarioConfig::validate() const
{
    if (periods.empty()) throw ValidationError("period set is empty");
    for (Nanos p : periods)
        if (p <= 0) throw ValidationError("periods must be positive");
    if (packetSize <= 0) throw ValidationError("packet size must be positive");
    if (deadline <= 0) throw ValidationError("deadline must be positive");
    if (!(weightMin > 0) || !(weightMax >= weightMin)) throw ValidationError("weights need 0 < min <= max");
    if (!(leasePrice >= 0)) throw ValidationError("lease price must be nonnegative");
    if (providerSlot <= 0 || providerBandwidth <= 0 || providerPropagation < 0)
        throw ValidationError("provider parameters out of range");
    if (userBandwidth <= 0 || crossBandwidth <= 0 || crossPropagation < 0)
        throw ValidationError("user or cross-link parameters out of range");
    if (userNodes < 1) throw ValidationError("user domains need at least one node");
    if (userDomains.empty()) throw ValidationError("at least one user domain is required");
    for (const auto& u : userDomains) {
        if (u.topology != "ring" && u.topology != "line")
            throw ValidationError("user topology must be ring or line, got '" + u.topology + "'");
        if (u.slot <= 0) throw ValidationError("user slot must be positive");
    }
}

ScenarioConfig ScenarioConfig::fromJson(const json& j)
{
    checkKeys(j,
              {"flows_per_user_domain", "periods_ns", "packet_bits", "deadline_ns", "weight_min", "weight_max",
               "lease_price", "sink", "provider_slot_ns", "provider_bandwidth_bps", "provider_prop_ns",
               "user_bandwidth_bps", "user_nodes", "cross_bandwidth_bps", "cross_prop_ns", "user_domains"},
              "scenario");
    ScenarioConfig c;
    c.flowsPerUserDomain = get(j, "flows_per_user_domain", c.flowsPerUserDomain);
    c.periods = get(j, "periods_ns", c.periods);
    c.packetSize = get(j, "packet_bits", c.packetSize);
    c.deadline = get(j, "deadline_ns", c.deadline);
    c.weightMin = get(j, "weight_min", c.weightMin);
    c.weightMax = get(j, "weight_max", c.weightMax);
    c.leasePrice = get(j, "lease_price", c.leasePrice);
    c.sink = get(j, "sink", c.sink);
    c.providerSlot = get(j, "provider_slot_ns", c.providerSlot);
    c.providerBandwidth = get(j, "provider_bandwidth_bps", c.providerBandwidth);
    c.providerPropagation = get(j, "provider_prop_ns", c.providerPropagation);
    c.userBandwidth = get(j, "user_bandwidth_bps", c.userBandwidth);
    c.userNodes = get(j, "user_nodes", c.userNodes);
    c.crossBandwidth = get(j, "cross_bandwidth_bps", c.crossBandwidth);
    c.crossPropagation = get(j, "cross_prop_ns", c.crossPropagation);
    if (j.contains("user_domains")) {
        c.userDomains.clear();
        for (const auto& u : j.at("user_domains")) {
            checkKeys(u, {"topology", "slot_ns", "attachment"}, "user domain");
            UserDomainSpec s;
            s.topology = get(u, "topology", s.topology);
            s.slot = get(u, "slot_ns", s.slot);
            s.attachment = get(u, "attachment", s.attachment);
            c.userDomains.push_back(s);
        }
    }
    c.validate();
    return c;
}

json ScenarioConfig::toJson() const
{
    json j;
    j["flows_per_user_domain"] = flowsPerUserDomain;
    j["periods_ns"] = periods;
    j["packet_bits"] = packetSize;
    j["deadline_ns"] = deadline;
    j["weight_min"] = weightMin;
    j["weight_max"] = weightMax;
    j["lease_price"] = leasePrice;
    j["sink"] = sink;
    j["provider_slot_ns"] = providerSlot;
    j["provider_bandwidth_bps"] = providerBandwidth;
    j["provider_prop_ns"] = providerPropagation;
    j["user_bandwidth_bps"] = userBandwidth;
    j["user_nodes"] = userNodes;
    j["cross_bandwidth_bps"] = crossBandwidth;
    j["cross_prop_ns"] = crossPropagation;
    j["user_domains"] = json::array();
    for (const auto& u : userDomains)
        j["user_domains"].push_back({{"topology", u.topology}, {"slot_ns", u.slot}, {"attachment", u.attachment}});
    return j;
}

// --- scenario ------------------------------------------------------------------------

BitsPerSec declaredRate(Bits packet, Nanos period)
{
    if (packet <= 0 || period <= 0) throw ValidationError("packet and period must be positive");
    return static_cast<BitsPerSec>(static_cast<__int128>(packet) * kNanosPerSecond / (8 * period));
}

Scenario generateScenario(const ScenarioConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    std::vector<netmodel::Domain> domains{{"provider", DomainSide::Provider, cfg.providerSlot, cfg.providerBandwidth}};
    std::vector<netmodel::Node> nodes;
    std::vector<netmodel::Link> links;
    for (int i = 1; i <= kProviderNodes; ++i) nodes.push_back({"N" + std::to_string(i), 0});
    for (const auto& [a, b] : kProviderEdges)
        links.push_back({"N" + std::to_string(a) + "-N" + std::to_string(b), static_cast<std::size_t>(a - 1),
                         static_cast<std::size_t>(b - 1), LinkKind::Intra, cfg.providerBandwidth,
                         cfg.providerPropagation, cfg.leasePrice});

    auto providerNode = [&](const std::string& id) -> std::size_t {
        for (std::size_t i = 0; i < kProviderNodes; ++i)
            if (nodes[i].id == id) return i;
        throw ValidationError("'" + id + "' is not a provider node");
    };

    std::vector<std::vector<std::size_t>> userNodeIdx;
    for (std::size_t d = 0; d < cfg.userDomains.size(); ++d) {
        const auto& spec = cfg.userDomains[d];
        const std::string tag = "U" + std::to_string(d + 1);
        domains.push_back({"user" + std::to_string(d + 1), DomainSide::User, spec.slot, cfg.userBandwidth});
        const std::size_t dom = domains.size() - 1;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < cfg.userNodes; ++i) {
            nodes.push_back({tag + "-" + std::to_string(i + 1), dom});
            idx.push_back(nodes.size() - 1);
        }
        for (std::size_t i = 0; i + 1 < idx.size(); ++i)
            links.push_back({nodes[idx[i]].id + "-" + std::to_string(i + 2), idx[i], idx[i + 1], LinkKind::Intra,
                             cfg.userBandwidth, 0, cfg.leasePrice});
        if (spec.topology == "ring" && idx.size() >= 3)
            links.push_back({tag + "-ring", idx.back(), idx.front(), LinkKind::Intra, cfg.userBandwidth, 0,
                             cfg.leasePrice});
        // Gateway first so the accounting domain of the cross link is the provider.
        links.push_back({"X" + std::to_string(d + 1), idx.front(), providerNode(spec.attachment), LinkKind::CrossDomain,
                         cfg.crossBandwidth, cfg.crossPropagation, cfg.leasePrice});
        userNodeIdx.push_back(std::move(idx));
    }

    const std::size_t sink = providerNode(cfg.sink);
    Scenario sc{Network(std::move(domains), std::move(nodes), std::move(links)), {}};

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> weight(cfg.weightMin, cfg.weightMax);
    std::uniform_int_distribution<std::size_t> pickPeriod(0, cfg.periods.size() - 1);
    for (std::size_t d = 0; d < userNodeIdx.size(); ++d) {
        const auto& idx = userNodeIdx[d];
        // Sources sit behind the gateway when the domain has more than one node.
        std::uniform_int_distribution<std::size_t> pickNode(idx.size() > 1 ? 1 : 0, idx.size() - 1);
        for (std::size_t j = 0; j < cfg.flowsPerUserDomain; ++j) {
            Flow f;
            char id[32];
            std::snprintf(id, sizeof id, "u%zuf%03zu", d + 1, j + 1);
            f.id = id;
            const Nanos period = cfg.periods[pickPeriod(rng)];
            f.gen = netmodel::GenProfile{period, cfg.packetSize};
            f.meanRate = declaredRate(cfg.packetSize, period);
            f.maxBurst = cfg.packetSize;
            f.source = idx[pickNode(rng)];
            f.sink = sink;
            f.deadline = cfg.deadline;
            f.weight = weight(rng);
            sc.flows.push_back(std::move(f));
        }
    }
    std::shuffle(sc.flows.begin(), sc.flows.end(), rng);
    for (std::size_t i = 0; i < sc.flows.size(); ++i) sc.flows[i].arrivalOrder = static_cast<std::int64_t>(i);
    return sc;
}

// --- comparison models ---------------------------------------------------------------

Nanos hypercycle(const std::vector<Nanos>& periods)
{
    if (periods.empty()) throw ValidationError("hypercycle of an empty period set");
    Nanos h = 1;
    for (Nanos p : periods) {
        if (p <= 0) throw ValidationError("periods must be positive");
        h = std::lcm(h, p);
    }
    return h;
}

Nanos slotMappingDelayModel(const netmodel::Domain& prev, const netmodel::Domain& next)
{
    return prev.slot + 2 * next.slot;
}

double countFeasibleSolutions(CountModel model, const Flow& flow, const Network& /*net*/,
                              const scheduler::QuotaMenu& menu, netmodel::PathCache& paths, Nanos hyper)
{
    const auto& ps = paths.paths(flow.source, flow.sink);
    double total = 0.0;
    if (model == CountModel::Proposed) {
        menu.validate();
        for (const auto& p : ps) total += std::pow(static_cast<double>(menu.m()), static_cast<double>(p.domainCount()));
        return total;
    }
    if (!flow.gen) throw ValidationError("flow " + flow.id + " has no period");
    const Nanos period = flow.gen->period;
    const Nanos h = hyper > 0 ? hyper : period;
    if (h % period != 0) throw ValidationError("hypercycle is not a multiple of the flow period");
    const double positions = static_cast<double>(h / period);
    for (const auto& p : ps) total += std::pow(positions, static_cast<double>(p.hopCount()));
    return total;
}

// --- experiment config ---------------------------------------------------------------

void ExperimentConfig::validate() const
{
    scenario.validate();
    scheduler.menu.validate();
    if (scheduler.maxPaths == 0) throw ValidationError("max_paths must be positive");
    if (simulation.duration <= 0) throw ValidationError("simulation duration must be positive");
    if (simulation.shaperQueues < 2) throw ValidationError("shaper needs at least two queues");
    for (double l : simulation.loads)
        if (!(l >= 0 && l < 1)) throw ValidationError("background loads must be in [0, 1)");
    if (seeds.empty()) throw ValidationError("seed list is empty");
    for (double e : epsilons)
        if (!(e >= 0)) throw ValidationError("lease prices must be nonnegative");
    for (const auto& c : periodClasses) hypercycle(c);
    if (pricing && !(pricing->vMin > 0 && pricing->vMax >= pricing->vMin))
        throw ValidationError("pricing needs 0 < v_min <= v_max");
}

ExperimentConfig ExperimentConfig::fromJson(const json& j)
{
    checkKeys(j,
              {"schema_version", "scenario", "scheduler", "pricing", "simulation", "epsilons", "period_classes_ns",
               "seeds", "threads"},
              "config");
    if (get(j, "schema_version", netmodel::kSchemaVersion) != netmodel::kSchemaVersion)
        throw ValidationError("unsupported schema_version");
    ExperimentConfig c;
    if (j.contains("scenario")) c.scenario = ScenarioConfig::fromJson(j.at("scenario"));
    if (j.contains("scheduler")) {
        const auto& s = j.at("scheduler");
        checkKeys(s, {"quota_menu_bps", "max_paths", "cross_link_accounting", "bound_method", "grid_step_ns",
                      "grid_horizon_ns", "search_horizon_ns"},
                  "scheduler");
        c.scheduler.menu.rates = get(s, "quota_menu_bps", c.scheduler.menu.rates);
        c.scheduler.maxPaths = get(s, "max_paths", c.scheduler.maxPaths);
        c.scheduler.crossLinkAccounting = get(s, "cross_link_accounting", c.scheduler.crossLinkAccounting);
        const std::string method = get<std::string>(s, "bound_method", "analytic");
        if (method != "analytic" && method != "grid") throw ValidationError("bound_method must be analytic or grid");
        c.scheduler.bound.method = method == "grid" ? bounds::Method::Grid : bounds::Method::Analytic;
        c.scheduler.bound.grid.gridStep = get(s, "grid_step_ns", c.scheduler.bound.grid.gridStep);
        c.scheduler.bound.grid.horizon = get(s, "grid_horizon_ns", c.scheduler.bound.grid.horizon);
        c.scheduler.bound.searchHorizon = get(s, "search_horizon_ns", c.scheduler.bound.searchHorizon);
    }
    if (j.contains("pricing") && !j.at("pricing").is_null()) {
        const auto& p = j.at("pricing");
        checkKeys(p, {"v_min", "v_max"}, "pricing");
        scheduler::PricingConfig pc;
        pc.vMin = get(p, "v_min", 0.0);
        pc.vMax = get(p, "v_max", 0.0);
        c.pricing = pc;
    }
    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        checkKeys(s, {"duration_ns", "shaper_queues", "buffer_packets", "loads", "burst_packets", "burst_rate_factor",
                      "background_packet_bits"},
                  "simulation");
        auto& sim = c.simulation;
        sim.duration = get(s, "duration_ns", sim.duration);
        sim.shaperQueues = get(s, "shaper_queues", sim.shaperQueues);
        sim.bufferPackets = get(s, "buffer_packets", sim.bufferPackets);
        sim.loads = get(s, "loads", sim.loads);
        sim.background.burstPackets = get(s, "burst_packets", sim.background.burstPackets);
        sim.background.burstRateFactor = get(s, "burst_rate_factor", sim.background.burstRateFactor);
        sim.background.packetSize = get(s, "background_packet_bits", sim.background.packetSize);
    }
    c.epsilons = get(j, "epsilons", c.epsilons);
    c.periodClasses = get(j, "period_classes_ns", c.periodClasses);
    c.seeds = get(j, "seeds", c.seeds);
    c.threads = get(j, "threads", c.threads);
    c.validate();
    return c;
}

json ExperimentConfig::toJson() const
{
    json j;
    j["schema_version"] = netmodel::kSchemaVersion;
    j["scenario"] = scenario.toJson();
    j["scheduler"] = {{"quota_menu_bps", scheduler.menu.rates},
                      {"max_paths", scheduler.maxPaths},
                      {"cross_link_accounting", scheduler.crossLinkAccounting},
                      {"bound_method", scheduler.bound.method == bounds::Method::Grid ? "grid" : "analytic"},
                      {"grid_step_ns", scheduler.bound.grid.gridStep},
                      {"grid_horizon_ns", scheduler.bound.grid.horizon},
                      {"search_horizon_ns", scheduler.bound.searchHorizon}};
    j["pricing"] = pricing ? json{{"v_min", pricing->vMin}, {"v_max", pricing->vMax}} : json(nullptr);
    j["simulation"] = {{"duration_ns", simulation.duration},
                       {"shaper_queues", simulation.shaperQueues},
                       {"buffer_packets", simulation.bufferPackets},
                       {"loads", simulation.loads},
                       {"burst_packets", simulation.background.burstPackets},
                       {"burst_rate_factor", simulation.background.burstRateFactor},
                       {"background_packet_bits", simulation.background.packetSize}};
    j["epsilons"] = epsilons;
    j["period_classes_ns"] = periodClasses;
    j["seeds"] = seeds;
    j["threads"] = threads;
    return j;
}

ExperimentConfig loadConfigFile(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
    return ExperimentConfig::fromJson(j);
}

std::uint64_t fnv1a(const std::string& data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string configHash(const ExperimentConfig& cfg)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(cfg.toJson().dump())));
    return buf;
}

}  // namespace detnet::harness
