#include "detnet/netmodel.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>

namespace detnet::netmodel {

using nlohmann::json;

Network::Network(std::vector<Domain> domains, std::vector<Node> nodes, std::vector<Link> links)
    : domains_(std::move(domains)), nodes_(std::move(nodes)), links_(std::move(links))
{
    for (DomainIndex d = 0; d < domains_.size(); ++d) {
        const auto& dom = domains_[d];
        if (dom.slot <= 0) throw ValidationError("domain " + dom.id + ": slot length must be positive");
        if (dom.bandwidth <= 0) throw ValidationError("domain " + dom.id + ": bandwidth must be positive");
        if (!domainIds_.emplace(dom.id, d).second) throw ValidationError("duplicate domain id " + dom.id);
    }
    for (NodeIndex n = 0; n < nodes_.size(); ++n) {
        if (nodes_[n].domain >= domains_.size())
            throw ValidationError("node " + nodes_[n].id + " references an unknown domain");
        if (!nodeIds_.emplace(nodes_[n].id, n).second) throw ValidationError("duplicate node id " + nodes_[n].id);
    }
    adjacency_.assign(nodes_.size(), {});
    std::set<std::string> linkIds;
    for (LinkIndex l = 0; l < links_.size(); ++l) {
        const auto& ln = links_[l];
        if (!linkIds.insert(ln.id).second) throw ValidationError("duplicate link id " + ln.id);
        if (ln.a >= nodes_.size() || ln.b >= nodes_.size())
            throw ValidationError("link " + ln.id + " references an unknown node");
        if (ln.a == ln.b) throw ValidationError("link " + ln.id + " is a self loop");
        if (ln.bandwidth <= 0) throw ValidationError("link " + ln.id + ": bandwidth must be positive");
        if (ln.propagation < 0) throw ValidationError("link " + ln.id + ": negative propagation delay");
        if (ln.leasePrice < 0) throw ValidationError("link " + ln.id + ": negative lease price");
        const bool sameDomain = nodes_[ln.a].domain == nodes_[ln.b].domain;
        if (ln.kind == LinkKind::CrossDomain && sameDomain)
            throw ValidationError("cross-domain link " + ln.id + " connects nodes of one domain");
        if (ln.kind == LinkKind::Intra && !sameDomain)
            throw ValidationError("intra-domain link " + ln.id + " connects two domains");
        adjacency_[ln.a].push_back({ln.b, l});
        adjacency_[ln.b].push_back({ln.a, l});
    }
}

std::optional<NodeIndex> Network::findNode(const std::string& id) const
{
    auto it = nodeIds_.find(id);
    if (it == nodeIds_.end()) return std::nullopt;
    return it->second;
}

std::optional<DomainIndex> Network::findDomain(const std::string& id) const
{
    auto it = domainIds_.find(id);
    if (it == domainIds_.end()) return std::nullopt;
    return it->second;
}

NodeIndex Network::nodeIndex(const std::string& id) const
{
    auto n = findNode(id);
    if (!n) throw ValidationError("unknown node " + id);
    return *n;
}

std::optional<LinkIndex> Network::linkBetween(NodeIndex a, NodeIndex b) const
{
    for (const auto& adj : adjacency_.at(a))
        if (adj.neighbor == b) return adj.link;
    return std::nullopt;
}

DomainIndex Network::accountingDomain(LinkIndex l, NodeIndex from) const
{
    const auto& ln = links_.at(l);
    if (ln.kind == LinkKind::Intra) return nodes_[ln.a].domain;
    return nodes_[ln.other(from)].domain;
}

double Network::maxLeasePrice() const
{
    double m = 0.0;
    for (const auto& l : links_) m = std::max(m, l.leasePrice);
    return m;
}

void Flow::validate() const
{
    if (meanRate <= 0) throw ValidationError("flow " + id + ": mean rate must be positive");
    if (maxBurst < 0) throw ValidationError("flow " + id + ": negative burst");
    if (deadline <= 0) throw ValidationError("flow " + id + ": deadline must be positive");
    if (!(weight > 0)) throw ValidationError("flow " + id + ": weight must be positive");
    if (source == sink) throw ValidationError("flow " + id + ": source equals sink");
    if (gen) {
        if (gen->period <= 0 || gen->packetSize <= 0)
            throw ValidationError("flow " + id + ": invalid generation profile");
        if (maxBurst < gen->packetSize) throw ValidationError("flow " + id + ": burst smaller than a packet");
    }
}

std::vector<LinkIndex> PathDecomposition::allLinks() const
{
    std::vector<LinkIndex> out;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        if (k > 0) out.push_back(crossLinks[k - 1]);
        out.insert(out.end(), segments[k].links.begin(), segments[k].links.end());
    }
    return out;
}

std::vector<NodeIndex> PathDecomposition::flatten() const
{
    std::vector<NodeIndex> out;
    for (const auto& s : segments) out.insert(out.end(), s.nodes.begin(), s.nodes.end());
    return out;
}

namespace {

void checkSchema(const json& doc)
{
    if (!doc.is_object()) throw ValidationError("document is not a JSON object");
    if (!doc.contains("schema_version")) throw ValidationError("missing schema_version");
    if (doc.at("schema_version").get<int>() != kSchemaVersion)
        throw ValidationError("unsupported schema_version " + doc.at("schema_version").dump());
}

DomainSide parseSide(const std::string& s)
{
    if (s == "user") return DomainSide::User;
    if (s == "provider") return DomainSide::Provider;
    throw ValidationError("unknown domain side '" + s + "'");
}

LinkKind parseKind(const std::string& s)
{
    if (s == "intra") return LinkKind::Intra;
    if (s == "cross") return LinkKind::CrossDomain;
    throw ValidationError("unknown link kind '" + s + "'");
}

json readJsonFile(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

}  // namespace

std::string sideName(DomainSide side) { return side == DomainSide::User ? "user" : "provider"; }

Network loadNetwork(const json& doc)
{
    checkSchema(doc);
    try {
        std::vector<Domain> domains;
        std::map<std::string, DomainIndex> domainIds;
        for (const auto& d : doc.at("domains")) {
            Domain dom{d.at("id").get<std::string>(), parseSide(d.at("side").get<std::string>()),
                       d.at("slot_ns").get<Nanos>(), d.at("bw_bps").get<BitsPerSec>()};
            domainIds.emplace(dom.id, domains.size());
            domains.push_back(std::move(dom));
        }
        std::vector<Node> nodes;
        std::map<std::string, NodeIndex> nodeIds;
        for (const auto& n : doc.at("nodes")) {
            const auto dom = n.at("domain").get<std::string>();
            auto it = domainIds.find(dom);
            if (it == domainIds.end()) throw ValidationError("node references unknown domain " + dom);
            nodeIds.emplace(n.at("id").get<std::string>(), nodes.size());
            nodes.push_back({n.at("id").get<std::string>(), it->second});
        }
        std::vector<Link> links;
        for (const auto& l : doc.at("links")) {
            auto endpoint = [&](const char* key) {
                const auto id = l.at(key).get<std::string>();
                auto it = nodeIds.find(id);
                if (it == nodeIds.end()) throw ValidationError("link references unknown node " + id);
                return it->second;
            };
            links.push_back({l.at("id").get<std::string>(), endpoint("a"), endpoint("b"),
                             parseKind(l.at("kind").get<std::string>()), l.at("bw_bps").get<BitsPerSec>(),
                             l.at("prop_ns").get<Nanos>(), l.value("lease_price", 0.0)});
        }
        return Network(std::move(domains), std::move(nodes), std::move(links));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("topology document: ") + e.what());
    }
}

Network loadNetworkFile(const std::string& path) { return loadNetwork(readJsonFile(path)); }

json toJson(const Network& net)
{
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["domains"] = json::array();
    for (const auto& d : net.domains())
        doc["domains"].push_back({{"id", d.id}, {"side", sideName(d.side)}, {"slot_ns", d.slot}, {"bw_bps", d.bandwidth}});
    doc["nodes"] = json::array();
    for (const auto& n : net.nodes()) doc["nodes"].push_back({{"id", n.id}, {"domain", net.domain(n.domain).id}});
    doc["links"] = json::array();
    for (const auto& l : net.links())
        doc["links"].push_back({{"id", l.id},
                                {"a", net.node(l.a).id},
                                {"b", net.node(l.b).id},
                                {"kind", l.kind == LinkKind::Intra ? "intra" : "cross"},
                                {"bw_bps", l.bandwidth},
                                {"prop_ns", l.propagation},
                                {"lease_price", l.leasePrice}});
    return doc;
}

std::vector<Flow> loadFlows(const json& doc, const Network& net)
{
    checkSchema(doc);
    std::vector<Flow> flows;
    try {
        for (const auto& f : doc.at("flows")) {
            Flow flow;
            flow.id = f.at("id").get<std::string>();
            flow.meanRate = f.at("rate_bps").get<BitsPerSec>();
            flow.maxBurst = f.at("burst_bits").get<Bits>();
            flow.source = net.nodeIndex(f.at("src").get<std::string>());
            flow.sink = net.nodeIndex(f.at("sink").get<std::string>());
            flow.deadline = f.at("deadline_ns").get<Nanos>();
            flow.weight = f.at("weight").get<double>();
            flow.arrivalOrder = f.value("arrival_order", static_cast<std::int64_t>(flows.size()));
            if (f.contains("gen") && !f.at("gen").is_null())
                flow.gen = GenProfile{f.at("gen").at("period_ns").get<Nanos>(), f.at("gen").at("packet_bits").get<Bits>()};
            flow.validate();
            flows.push_back(std::move(flow));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("flow document: ") + e.what());
    }
    std::stable_sort(flows.begin(), flows.end(),
                     [](const Flow& a, const Flow& b) { return a.arrivalOrder < b.arrivalOrder; });
    return flows;
}

std::vector<Flow> loadFlowsFile(const std::string& path, const Network& net)
{
    return loadFlows(readJsonFile(path), net);
}

json toJson(const std::vector<Flow>& flows, const Network& net)
{
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["flows"] = json::array();
    for (const auto& f : flows) {
        json j{{"id", f.id},
               {"rate_bps", f.meanRate},
               {"burst_bits", f.maxBurst},
               {"src", net.node(f.source).id},
               {"sink", net.node(f.sink).id},
               {"deadline_ns", f.deadline},
               {"weight", f.weight},
               {"arrival_order", f.arrivalOrder}};
        if (f.gen) j["gen"] = {{"period_ns", f.gen->period}, {"packet_bits", f.gen->packetSize}};
        doc["flows"].push_back(std::move(j));
    }
    return doc;
}

PathDecomposition decompose(const Network& net, const std::vector<NodeIndex>& rawPath)
{
    if (rawPath.size() < 2) throw ValidationError("a path needs at least two nodes");
    std::set<NodeIndex> seen;
    PathDecomposition p;
    p.nodes = rawPath;
    for (std::size_t i = 0; i < rawPath.size(); ++i) {
        if (rawPath[i] >= net.nodes().size()) throw ValidationError("path references an unknown node");
        if (!seen.insert(rawPath[i]).second) throw ValidationError("path visits a node twice");
        const DomainIndex d = net.node(rawPath[i]).domain;
        if (i == 0) {
            p.segments.push_back({d, {rawPath[i]}, {}});
            continue;
        }
        auto link = net.linkBetween(rawPath[i - 1], rawPath[i]);
        if (!link) throw ValidationError("path is disconnected between " + net.node(rawPath[i - 1]).id + " and " +
                                         net.node(rawPath[i]).id);
        p.propagation += net.link(*link).propagation;
        if (d == p.segments.back().domain) {
            p.segments.back().nodes.push_back(rawPath[i]);
            p.segments.back().links.push_back(*link);
        } else {
            p.crossLinks.push_back(*link);
            p.segments.push_back({d, {rawPath[i]}, {}});
        }
    }
    return p;
}

namespace {

struct Partial {
    Nanos propagation;
    std::vector<NodeIndex> nodes;
};

// Lexicographic comparison by node ids, the final tie-break.
bool idsLess(const Network& net, const std::vector<NodeIndex>& a, const std::vector<NodeIndex>& b)
{
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [&](NodeIndex x, NodeIndex y) { return net.node(x).id < net.node(y).id; });
}

bool rankLess(const Network& net, const Partial& a, const Partial& b)
{
    if (a.propagation != b.propagation) return a.propagation < b.propagation;
    if (a.nodes.size() != b.nodes.size()) return a.nodes.size() < b.nodes.size();
    return idsLess(net, a.nodes, b.nodes);
}

constexpr std::size_t kExpansionBudget = 2'000'000;

}  // namespace

std::vector<PathDecomposition> enumeratePaths(const Network& net, NodeIndex src, NodeIndex sink, std::size_t maxPaths)
{
    if (src >= net.nodes().size() || sink >= net.nodes().size()) throw ValidationError("unknown endpoint");
    if (src == sink) throw ValidationError("source equals sink");
    std::vector<PathDecomposition> out;
    if (maxPaths == 0) return out;

    // Best-first search over partial paths. Extending a path never lowers its
    // rank key, so complete paths pop in exactly the required order.
    auto greater = [&net](const Partial& a, const Partial& b) { return rankLess(net, b, a); };
    std::priority_queue<Partial, std::vector<Partial>, decltype(greater)> frontier(greater);
    frontier.push({0, {src}});
    std::size_t expansions = 0;
    while (!frontier.empty() && out.size() < maxPaths && expansions < kExpansionBudget) {
        Partial cur = frontier.top();
        frontier.pop();
        ++expansions;
        const NodeIndex last = cur.nodes.back();
        if (last == sink) {
            out.push_back(decompose(net, cur.nodes));
            continue;
        }
        for (const auto& adj : net.neighbors(last)) {
            if (std::find(cur.nodes.begin(), cur.nodes.end(), adj.neighbor) != cur.nodes.end()) continue;
            Partial next{cur.propagation + net.link(adj.link).propagation, cur.nodes};
            next.nodes.push_back(adj.neighbor);
            frontier.push(std::move(next));
        }
    }
    return out;
}

const std::vector<PathDecomposition>& PathCache::paths(NodeIndex src, NodeIndex sink)
{
    auto key = std::make_pair(src, sink);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, enumeratePaths(*net_, src, sink, maxPaths_)).first;
    return it->second;
}

std::string describePath(const Network& net, const PathDecomposition& p)
{
    std::string s;
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
        if (i) s += ' ';
        s += net.node(p.nodes[i]).id;
    }
    return s;
}

}  // namespace detnet::netmodel
