#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "detnet/netmodel.hpp"

#include <algorithm>
#include <functional>
#include <tuple>

using namespace detnet;
using namespace detnet::netmodel;
using nlohmann::json;

namespace {

json domainJson(const std::string& id, const std::string& side, Nanos slot, BitsPerSec bw)
{
    return {{"id", id}, {"side", side}, {"slot_ns", slot}, {"bw_bps", bw}};
}

json linkJson(const std::string& a, const std::string& b, const std::string& kind, Nanos prop, double price = 1.0)
{
    return {{"id", a + "-" + b}, {"a", a}, {"b", b}, {"kind", kind}, {"bw_bps", kGbps}, {"prop_ns", prop},
            {"lease_price", price}};
}

json emptyDoc()
{
    return {{"schema_version", 1}, {"domains", json::array()}, {"nodes", json::array()}, {"links", json::array()}};
}

void addNodes(json& doc, const std::string& domain, const std::vector<std::string>& ids)
{
    for (const auto& id : ids) doc["nodes"].push_back({{"id", id}, {"domain", domain}});
}

// A desk-scale two-sided topology: provider mesh P1..P6, user ring U1..U4 and
// user chain V1..V3, each user side with a single gateway link.
json deskTopology()
{
    json doc = emptyDoc();
    doc["domains"].push_back(domainJson("prov", "provider", 10 * kMicrosecond, 10 * kGbps));
    doc["domains"].push_back(domainJson("ua", "user", 2 * kMicrosecond, kGbps));
    doc["domains"].push_back(domainJson("ub", "user", 8 * kMicrosecond, kGbps));
    addNodes(doc, "prov", {"P1", "P2", "P3", "P4", "P5", "P6"});
    addNodes(doc, "ua", {"U1", "U2", "U3", "U4"});
    addNodes(doc, "ub", {"V1", "V2", "V3"});
    for (auto [a, b, p] : std::vector<std::tuple<std::string, std::string, Nanos>>{
             {"P1", "P2", 150}, {"P2", "P3", 150}, {"P3", "P4", 100}, {"P4", "P1", 200},
             {"P2", "P5", 50},  {"P5", "P6", 50},  {"P6", "P1", 50},  {"P3", "P6", 150}})
        doc["links"].push_back(linkJson(a, b, "intra", p * kMicrosecond));
    doc["links"].push_back(linkJson("U1", "U2", "intra", 0));
    doc["links"].push_back(linkJson("U2", "U3", "intra", 0));
    doc["links"].push_back(linkJson("U3", "U4", "intra", 0));
    doc["links"].push_back(linkJson("U4", "U1", "intra", 0));
    doc["links"].push_back(linkJson("V1", "V2", "intra", 0));
    doc["links"].push_back(linkJson("V2", "V3", "intra", 0));
    doc["links"].push_back(linkJson("U1", "P3", "cross", 10 * kMicrosecond));
    doc["links"].push_back(linkJson("V1", "P4", "cross", 10 * kMicrosecond));
    return doc;
}

// Exhaustive DFS over loop-free paths, then sort and truncate.
std::vector<std::vector<NodeIndex>> dfsOracle(const Network& net, NodeIndex src, NodeIndex sink, std::size_t n)
{
    struct Found {
        Nanos prop;
        std::vector<NodeIndex> nodes;
    };
    std::vector<Found> all;
    std::vector<NodeIndex> stack{src};
    std::vector<bool> used(net.nodes().size(), false);
    used[src] = true;
    std::function<void(Nanos)> go = [&](Nanos prop) {
        const NodeIndex u = stack.back();
        if (u == sink) {
            all.push_back({prop, stack});
            return;
        }
        for (const auto& l : net.links()) {
            if (l.a != u && l.b != u) continue;
            const NodeIndex v = l.other(u);
            if (used[v]) continue;
            used[v] = true;
            stack.push_back(v);
            go(prop + l.propagation);
            stack.pop_back();
            used[v] = false;
        }
    };
    go(0);
    auto ids = [&](const std::vector<NodeIndex>& p) {
        std::vector<std::string> s;
        for (auto x : p) s.push_back(net.node(x).id);
        return s;
    };
    std::sort(all.begin(), all.end(), [&](const Found& a, const Found& b) {
        return std::make_tuple(a.prop, a.nodes.size(), ids(a.nodes)) < std::make_tuple(b.prop, b.nodes.size(), ids(b.nodes));
    });
    std::vector<std::vector<NodeIndex>> out;
    for (std::size_t i = 0; i < all.size() && i < n; ++i) out.push_back(all[i].nodes);
    return out;
}

std::vector<NodeIndex> ids(const Network& net, std::initializer_list<const char*> names)
{
    std::vector<NodeIndex> v;
    for (auto n : names) v.push_back(net.nodeIndex(n));
    return v;
}

}  // namespace

TEST_CASE("single domain network")
{
    json doc = emptyDoc();
    doc["domains"].push_back(domainJson("d", "user", 2000, kGbps));
    addNodes(doc, "d", {"a", "b"});
    doc["links"].push_back(linkJson("a", "b", "intra", 0));
    const Network net = loadNetwork(doc);
    CHECK(net.domains().size() == 1);
    CHECK(net.domain(0).mechanism() == Mechanism::CQF);
    CHECK(net.linkBetween(0, 1).has_value());
}

TEST_CASE("invalid documents are rejected")
{
    json doc = emptyDoc();
    doc["domains"].push_back(domainJson("d", "user", 2000, kGbps));
    doc["domains"].push_back(domainJson("e", "provider", 10000, kGbps));
    addNodes(doc, "d", {"a", "b"});
    addNodes(doc, "e", {"c"});

    SUBCASE("cross link inside one domain")
    {
        doc["links"].push_back(linkJson("a", "b", "cross", 0));
        CHECK_THROWS_AS(loadNetwork(doc), ValidationError);
    }
    SUBCASE("intra link across domains")
    {
        doc["links"].push_back(linkJson("a", "c", "intra", 0));
        CHECK_THROWS_AS(loadNetwork(doc), ValidationError);
    }
    SUBCASE("dangling node")
    {
        doc["links"].push_back(linkJson("a", "zz", "intra", 0));
        CHECK_THROWS_AS(loadNetwork(doc), ValidationError);
    }
    SUBCASE("nonpositive slot")
    {
        doc["domains"][0]["slot_ns"] = 0;
        CHECK_THROWS_AS(loadNetwork(doc), ValidationError);
    }
    SUBCASE("negative propagation")
    {
        doc["links"].push_back(linkJson("a", "b", "intra", -1));
        CHECK_THROWS_AS(loadNetwork(doc), ValidationError);
    }
    SUBCASE("missing field")
    {
        doc["links"].push_back(linkJson("a", "b", "intra", 0));
        doc["links"][0].erase("bw_bps");
        CHECK_THROWS_AS(loadNetwork(doc), ValidationError);
    }
    SUBCASE("wrong version")
    {
        doc["schema_version"] = 2;
        CHECK_THROWS_AS(loadNetwork(doc), ValidationError);
    }
}

TEST_CASE("chain and ring path counts")
{
    json chain = emptyDoc();
    chain["domains"].push_back(domainJson("d", "user", 2000, kGbps));
    addNodes(chain, "d", {"a", "b", "c"});
    chain["links"].push_back(linkJson("a", "b", "intra", 0));
    chain["links"].push_back(linkJson("b", "c", "intra", 0));
    const Network cn = loadNetwork(chain);
    const auto cp = enumeratePaths(cn, cn.nodeIndex("a"), cn.nodeIndex("c"), 10);
    REQUIRE(cp.size() == 1);
    CHECK(cp[0].hopCount() == 2);

    json ring = emptyDoc();
    ring["domains"].push_back(domainJson("d", "user", 2000, kGbps));
    addNodes(ring, "d", {"a", "b", "c", "d"});
    ring["links"].push_back(linkJson("a", "b", "intra", 0));
    ring["links"].push_back(linkJson("b", "c", "intra", 0));
    ring["links"].push_back(linkJson("c", "d", "intra", 0));
    ring["links"].push_back(linkJson("d", "a", "intra", 0));
    const Network rn = loadNetwork(ring);
    const auto rp = enumeratePaths(rn, rn.nodeIndex("a"), rn.nodeIndex("c"), 10);
    REQUIRE(rp.size() == 2);
    CHECK(describePath(rn, rp[0]) == "a b c");
    CHECK(describePath(rn, rp[1]) == "a d c");
    CHECK(enumeratePaths(rn, 0, 2, 1).size() == 1);
}

TEST_CASE("disconnected endpoints give no paths")
{
    json doc = emptyDoc();
    doc["domains"].push_back(domainJson("d", "user", 2000, kGbps));
    addNodes(doc, "d", {"a", "b"});
    const Network net = loadNetwork(doc);
    CHECK(enumeratePaths(net, 0, 1, 10).empty());
    CHECK_THROWS_AS(enumeratePaths(net, 0, 0, 10), ValidationError);
}

TEST_CASE("desk topology matches the exhaustive oracle")
{
    const Network net = loadNetwork(deskTopology());
    for (const char* src : {"U2", "U3", "V3", "U1"}) {
        for (std::size_t n : {1u, 3u, 10u, 50u}) {
            const NodeIndex s = net.nodeIndex(src);
            const NodeIndex t = net.nodeIndex("P1");
            const auto got = enumeratePaths(net, s, t, n);
            const auto want = dfsOracle(net, s, t, n);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].nodes == want[i]);
                CHECK(got[i].flatten() == got[i].nodes);
                CHECK(got[i].domainCount() == 2);
                CHECK(got[i].crossLinks.size() == 1);
                CHECK(got[i].segments.front().nodes.front() == s);
                CHECK(got[i].segments.back().nodes.back() == t);
            }
        }
    }
    // Deterministic across calls and through the cache.
    PathCache cache(net, 10);
    const auto& a = cache.paths(net.nodeIndex("U3"), net.nodeIndex("P1"));
    const auto b = enumeratePaths(net, net.nodeIndex("U3"), net.nodeIndex("P1"), 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].nodes == b[i].nodes);
    CHECK(&cache.paths(net.nodeIndex("U3"), net.nodeIndex("P1")) == &a);
}

TEST_CASE("decompose groups domain runs")
{
    const Network net = loadNetwork(deskTopology());

    const auto one = decompose(net, ids(net, {"P1", "P2", "P3"}));
    CHECK(one.domainCount() == 1);
    CHECK(one.crossLinks.empty());
    CHECK(one.segments[0].hops() == 2);
    CHECK(one.propagation == 300 * kMicrosecond);

    const auto two = decompose(net, ids(net, {"U2", "U1", "P3", "P2", "P1"}));
    CHECK(two.domainCount() == 2);
    REQUIRE(two.crossLinks.size() == 1);
    CHECK(net.link(two.crossLinks[0]).id == "U1-P3");
    CHECK(two.segments[0].hops() == 1);
    CHECK(two.segments[1].hops() == 2);
    CHECK(two.allLinks().size() == 4);

    // Hand decomposition: {U3 U4 U1} | U1-P3 | {P3 P4} | P4-V1 | {V1 V2}
    const auto three = decompose(net, ids(net, {"U3", "U4", "U1", "P3", "P4", "V1", "V2"}));
    REQUIRE(three.domainCount() == 3);
    CHECK(three.segments[0].nodes == ids(net, {"U3", "U4", "U1"}));
    CHECK(three.segments[1].nodes == ids(net, {"P3", "P4"}));
    CHECK(three.segments[2].nodes == ids(net, {"V1", "V2"}));
    CHECK(net.link(three.crossLinks[0]).id == "U1-P3");
    CHECK(net.link(three.crossLinks[1]).id == "V1-P4");
    CHECK(three.flatten() == three.nodes);
    CHECK(net.accountingDomain(three.crossLinks[1], net.nodeIndex("P4")) == *net.findDomain("ub"));
    CHECK(net.accountingDomain(three.crossLinks[0], net.nodeIndex("U1")) == *net.findDomain("prov"));

    CHECK_THROWS_AS(decompose(net, ids(net, {"U1", "P1"})), ValidationError);
    CHECK_THROWS_AS(decompose(net, ids(net, {"P1", "P2", "P1"})), ValidationError);
    CHECK_THROWS_AS(decompose(net, ids(net, {"P1"})), ValidationError);
}

TEST_CASE("topology and flow round trip")
{
    const Network net = loadNetwork(deskTopology());
    const json again = toJson(net);
    const Network net2 = loadNetwork(again);
    CHECK(toJson(net2) == again);
    CHECK(net2.links().size() == net.links().size());

    json flows = {{"schema_version", 1},
                  {"flows",
                   {{{"id", "f2"}, {"rate_bps", 3000000}, {"burst_bits", 12000}, {"src", "U2"}, {"sink", "P1"},
                     {"deadline_ns", 1000000}, {"weight", 4.5}, {"arrival_order", 2},
                     {"gen", {{"period_ns", 500000}, {"packet_bits", 12000}}}},
                    {{"id", "f1"}, {"rate_bps", 5000000}, {"burst_bits", 100}, {"src", "V3"}, {"sink", "P1"},
                     {"deadline_ns", 1000000}, {"weight", 1.0}, {"arrival_order", 1}}}}};
    const auto fl = loadFlows(flows, net);
    REQUIRE(fl.size() == 2);
    CHECK(fl[0].id == "f1");
    CHECK(!fl[0].gen);
    CHECK(fl[1].gen->packetSize == 12000);
    CHECK(toJson(loadFlows(toJson(fl, net), net), net) == toJson(fl, net));

    json bad = flows;
    bad["flows"][0]["burst_bits"] = 100;  // smaller than its packets
    CHECK_THROWS_AS(loadFlows(bad, net), ValidationError);
    bad = flows;
    bad["flows"][1]["weight"] = 0.0;
    CHECK_THROWS_AS(loadFlows(bad, net), ValidationError);
    bad = flows;
    bad["flows"][1]["sink"] = "nowhere";
    CHECK_THROWS_AS(loadFlows(bad, net), ValidationError);
}
