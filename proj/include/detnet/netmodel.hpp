#pragma once

// Multi-domain topology, flows and end-to-end paths.

#include "detnet/units.hpp"

#include "json.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace detnet::netmodel {

inline constexpr int kSchemaVersion = 1;

using DomainIndex = std::size_t;
using NodeIndex = std::size_t;
using LinkIndex = std::size_t;

enum class DomainSide { User, Provider };
enum class Mechanism { CQF, SDF };

struct Domain {
    std::string id;
    DomainSide side = DomainSide::User;
    Nanos slot = 0;            // tau_n
    BitsPerSec bandwidth = 0;  // BW_n

    // User domains forward with CQF, provider domains with SDF.
    Mechanism mechanism() const { return side == DomainSide::User ? Mechanism::CQF : Mechanism::SDF; }
};

struct Node {
    std::string id;
    DomainIndex domain = 0;
};

enum class LinkKind { Intra, CrossDomain };

struct Link {
    std::string id;
    NodeIndex a = 0;
    NodeIndex b = 0;
    LinkKind kind = LinkKind::Intra;
    BitsPerSec bandwidth = 0;
    Nanos propagation = 0;
    double leasePrice = 0.0;  // per Mb/s of reservation

    NodeIndex other(NodeIndex n) const { return n == a ? b : a; }
};

struct Adjacent {
    NodeIndex neighbor;
    LinkIndex link;
};

class Network {
public:
    Network() = default;
    Network(std::vector<Domain> domains, std::vector<Node> nodes, std::vector<Link> links);

    const std::vector<Domain>& domains() const { return domains_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const Domain& domain(DomainIndex d) const { return domains_.at(d); }
    const Node& node(NodeIndex n) const { return nodes_.at(n); }
    const Link& link(LinkIndex l) const { return links_.at(l); }
    const Domain& domainOf(NodeIndex n) const { return domains_.at(nodes_.at(n).domain); }
    const std::vector<Adjacent>& neighbors(NodeIndex n) const { return adjacency_.at(n); }

    std::optional<NodeIndex> findNode(const std::string& id) const;
    std::optional<DomainIndex> findDomain(const std::string& id) const;
    NodeIndex nodeIndex(const std::string& id) const;  // throws ValidationError
    std::optional<LinkIndex> linkBetween(NodeIndex a, NodeIndex b) const;

    /// The domain whose slot clock governs reservations on the link when it is
    /// traversed from `from`: the link's own domain, or the downstream domain
    /// for a cross-domain link.
    DomainIndex accountingDomain(LinkIndex l, NodeIndex from) const;

    double maxLeasePrice() const;

private:
    std::vector<Domain> domains_;
    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<Adjacent>> adjacency_;
    std::map<std::string, NodeIndex> nodeIds_;
    std::map<std::string, DomainIndex> domainIds_;
};

struct GenProfile {
    Nanos period = 0;
    Bits packetSize = 0;
};

struct Flow {
    std::string id;
    BitsPerSec meanRate = 0;  // r_{i,0}
    Bits maxBurst = 0;        // b_{i,0}
    NodeIndex source = 0;
    NodeIndex sink = 0;
    Nanos deadline = 0;       // Gamma_i
    double weight = 0.0;      // v_i
    std::optional<GenProfile> gen;
    std::int64_t arrivalOrder = 0;

    void validate() const;
};

/// One domain's stretch of a path. `links` are the intra-domain hops e_{p,k,j}.
struct Segment {
    DomainIndex domain = 0;
    std::vector<NodeIndex> nodes;
    std::vector<LinkIndex> links;

    std::size_t hops() const { return links.size(); }
};

struct PathDecomposition {
    std::vector<NodeIndex> nodes;
    std::vector<Segment> segments;
    std::vector<LinkIndex> crossLinks;  // crossLinks[k-1] enters segments[k]
    Nanos propagation = 0;

    std::size_t domainCount() const { return segments.size(); }
    std::size_t hopCount() const { return nodes.empty() ? 0 : nodes.size() - 1; }
    /// Every link in traversal order.
    std::vector<LinkIndex> allLinks() const;
    /// Concatenation of the segments' nodes; reproduces `nodes`.
    std::vector<NodeIndex> flatten() const;
};

Network loadNetwork(const nlohmann::json& doc);
Network loadNetworkFile(const std::string& path);
nlohmann::json toJson(const Network& net);

std::vector<Flow> loadFlows(const nlohmann::json& doc, const Network& net);
std::vector<Flow> loadFlowsFile(const std::string& path, const Network& net);
nlohmann::json toJson(const std::vector<Flow>& flows, const Network& net);

/// Groups a loop-free node sequence into per-domain segments.
PathDecomposition decompose(const Network& net, const std::vector<NodeIndex>& rawPath);

/// Up to maxPaths loop-free paths ordered by (propagation, hop count, node ids).
std::vector<PathDecomposition> enumeratePaths(const Network& net, NodeIndex src, NodeIndex sink, std::size_t maxPaths);

/// Memoizes enumeratePaths per (src, sink). Not thread-safe.
class PathCache {
public:
    PathCache(const Network& net, std::size_t maxPaths) : net_(&net), maxPaths_(maxPaths) {}
    const std::vector<PathDecomposition>& paths(NodeIndex src, NodeIndex sink);

private:
    const Network* net_;
    std::size_t maxPaths_;
    std::map<std::pair<NodeIndex, NodeIndex>, std::vector<PathDecomposition>> cache_;
};

std::string sideName(DomainSide side);
std::string describePath(const Network& net, const PathDecomposition& p);

}  // namespace detnet::netmodel
