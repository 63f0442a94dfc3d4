#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "detnet/log.hpp"
#include "detnet/scheduler.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace detnet;
using namespace detnet::scheduler;
using netmodel::DomainSide;
using netmodel::LinkKind;

namespace {

struct NetSpec {
    double lease = 7.5;
    BitsPerSec userBw = kGbps;
    BitsPerSec crossBw = kGbps;
    BitsPerSec provBw = 10 * kGbps;
    bool mesh = false;  // provider K5 instead of a two-node chain
};

// User chain U0-U1-U2 (2 us slots), cross link U2-P0, then the provider.
Network makeNet(const NetSpec& s = {})
{
    std::vector<netmodel::Domain> d{{"ua", DomainSide::User, 2 * kMicrosecond, s.userBw},
                                    {"prov", DomainSide::Provider, 10 * kMicrosecond, s.provBw}};
    std::vector<netmodel::Node> n{{"U0", 0}, {"U1", 0}, {"U2", 0}};
    const std::size_t provNodes = s.mesh ? 5 : 2;
    for (std::size_t i = 0; i < provNodes; ++i) n.push_back({"P" + std::to_string(i), 1});
    std::vector<netmodel::Link> l{{"u01", 0, 1, LinkKind::Intra, s.userBw, 0, s.lease},
                                  {"u12", 1, 2, LinkKind::Intra, s.userBw, 0, s.lease},
                                  {"x", 2, 3, LinkKind::CrossDomain, s.crossBw, 10 * kMicrosecond, s.lease}};
    for (std::size_t i = 0; i < provNodes; ++i)
        for (std::size_t j = i + 1; j < provNodes; ++j)
            l.push_back({"p" + std::to_string(i) + std::to_string(j), 3 + i, 3 + j, LinkKind::Intra, s.provBw,
                         static_cast<Nanos>(10 + i + j) * kMicrosecond, s.lease});
    return Network(d, n, l);
}

Flow makeFlow(const Network& net, BitsPerSec r, Bits b, double v, const std::string& sink = "P1",
              Nanos deadline = kMillisecond)
{
    Flow f;
    f.id = "f";
    f.meanRate = r;
    f.maxBurst = b;
    f.source = 0;
    f.sink = net.nodeIndex(sink);
    f.deadline = deadline;
    f.weight = v;
    return f;
}

const QuotaMenu kTable2Menu{{5 * kMbps, 10 * kMbps, 100 * kMbps}};

// Direct transcription of the exponential price, independent of the library.
double oraclePhi(double vMin, double vMax, double eps, double reservedRate, double bw)
{
    return (vMin - eps) * std::pow((vMax - eps) / (vMin - eps), reservedRate / bw);
}

struct WarningCapture {
    std::vector<std::string> messages;
    log::Sink previous;
    WarningCapture()
    {
        previous = log::setWarningSink([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture() { log::setWarningSink(previous); }
};

}  // namespace

TEST_CASE("combination counts")
{
    const Network chain = makeNet();
    PathCache pc(chain, 10);
    const Flow f = makeFlow(chain, 5 * kMbps, 12000, 10);
    CHECK(enumerateCombinations(f, chain, kTable2Menu, pc).size() == 9);
    CHECK(enumerateCombinations(f, chain, QuotaMenu{{kMbps}}, pc).size() == 1);

    const Network mesh = makeNet({.mesh = true});
    PathCache pm(mesh, 10);
    const Flow g = makeFlow(mesh, 5 * kMbps, 12000, 10, "P4");
    const auto combos = enumerateCombinations(g, mesh, kTable2Menu, pm);
    CHECK(pm.paths(g.source, g.sink).size() == 10);
    CHECK(combos.size() == 90);
    CHECK(enumerateCombinations(g, mesh, QuotaMenu{{kMbps}}, pm).size() == 10);
    // Ordering: path rank first, then quota indices with the last domain fastest.
    CHECK(combos[0].quotaIndex == std::vector<std::size_t>{0, 0});
    CHECK(combos[1].quotaIndex == std::vector<std::size_t>{0, 1});
    CHECK(combos[3].quotaIndex == std::vector<std::size_t>{1, 0});
    CHECK(combos[9].pathRank == 1);
    CHECK(combos[0].quotas.quota == std::vector<Bits>{10, 50});

    // Independent of the flow's generation profile.
    Flow h = g;
    h.gen = netmodel::GenProfile{300 * kMicrosecond, 12000};
    Flow k = g;
    k.gen = netmodel::GenProfile{500 * kMicrosecond, 12000};
    CHECK(enumerateCombinations(h, mesh, kTable2Menu, pm).size() == enumerateCombinations(k, mesh, kTable2Menu, pm).size());

    CHECK_THROWS_AS(enumerateCombinations(f, chain, QuotaMenu{{}}, pc), ValidationError);
    CHECK_THROWS_AS(enumerateCombinations(f, chain, QuotaMenu{{2, 1}}, pc), ValidationError);
}

TEST_CASE("feasibility filter")
{
    const Network net = makeNet();
    PathCache pc(net, 10);
    const Flow f = makeFlow(net, 5 * kMbps, 12000, 10);
    const auto all = enumerateCombinations(f, net, kTable2Menu, pc);

    Flow loose = f;
    loose.deadline = std::numeric_limits<Nanos>::max() / 4;
    std::size_t bounded = 0;
    for (const auto& c : all)
        if (bounds::tryEndToEndDelayBound(net, loose, c.path, c.quotas)) ++bounded;
    CHECK(filterFeasible(loose, net, all, {}).size() == bounded);

    Flow zero = f;
    zero.deadline = 0;
    CHECK(filterFeasible(zero, net, all, {}).empty());

    // At 1 ms only 100 Mb/s in both domains survives: 5 and 10 Mb/s at the
    // source already need over a millisecond to drain a 12000-bit burst.
    const auto ok = filterFeasible(f, net, all, {});
    REQUIRE(ok.size() == 1);
    CHECK(ok[0].quotaIndex == std::vector<std::size_t>{2, 2});
    REQUIRE(ok[0].bound);
    CHECK(ok[0].bound->total <= f.deadline);
    CHECK(bounds::shaperDelay(net, f, all[0].path, 0, all[0].quotas) > kMillisecond);
}

TEST_CASE("link price endpoints and shape")
{
    const Network net = makeNet();
    LinkLedger ledger(net);
    const PricingConfig p{10.0, 100.0};
    const LinkIndex u01 = 0;
    CHECK(priceLink(net, u01, ledger, p) == doctest::Approx(2.5));

    // Half of 1 Gb/s on u01: 1000 bits per 2 us slot.
    ledger.commit({{u01, 1000, 2 * kMicrosecond}});
    CHECK(ledger.reservedBitsPerSlot(u01) == 1000);
    CHECK(ledger.reservedRate(u01) == doctest::Approx(500e6));
    CHECK(priceLink(net, u01, ledger, p) == doctest::Approx(2.5 * std::sqrt(37.0)));
    CHECK(priceLink(net, u01, ledger, p) == doctest::Approx(15.207).epsilon(1e-4));

    ledger.commit({{u01, 1000, 2 * kMicrosecond}});
    CHECK(priceLink(net, u01, ledger, p) == doctest::Approx(92.5));
    CHECK(ledger.fits({{u01, 0, 2 * kMicrosecond}}));
    CHECK_FALSE(ledger.fits({{u01, 1, 2 * kMicrosecond}}));
    CHECK_THROWS_AS(ledger.commit({{u01, 1, 2 * kMicrosecond}}), InvariantViolation);
}

TEST_CASE("price is strictly increasing in reservation")
{
    const Network net = makeNet();
    const PricingConfig p{7.575, 33.33};
    double last = -1.0;
    LinkLedger ledger(net);
    // 1000 steps of 1 bit per 2 us slot on a 2000-bit-per-slot link.
    for (int i = 0; i <= 1000; ++i) {
        const double phi = priceLink(net, 0, ledger, p);
        CHECK(phi > last);
        CHECK(phi == doctest::Approx(oraclePhi(p.vMin, p.vMax, 7.5, ledger.reservedRate(0), 1e9)));
        last = phi;
        if (i < 1000) ledger.commit({{0, 1, 2 * kMicrosecond}});
    }
    CHECK(last == doctest::Approx(oraclePhi(p.vMin, p.vMax, 7.5, 0.5e9, 1e9)));
}

TEST_CASE("combination price")
{
    const Network net = makeNet({.lease = 0.0});
    LinkLedger ledger(net);
    const PricingConfig p{2.5, 10.0};

    ResourceCombination empty;
    CHECK(priceCombination(net, empty, ledger, p, true) == 0.0);

    // One link at 10 Mb/s with phi = 2.5 per Mb/s.
    ResourceCombination one;
    one.path = netmodel::decompose(net, {0, 1});
    one.quotas.quota = {bounds::quotaBits(10 * kMbps, 2 * kMicrosecond)};
    CHECK(priceCombination(net, one, ledger, p, true) == doctest::Approx(25.0));

    ResourceCombination two = one;
    two.path = netmodel::decompose(net, {0, 1, 2});
    CHECK(priceCombination(net, two, ledger, p, true) == doctest::Approx(50.0));

    // The cross link is priced at the quota of the domain it enters.
    ResourceCombination cross;
    cross.path = netmodel::decompose(net, {2, 3, 4});
    cross.quotas.quota = {bounds::quotaBits(10 * kMbps, 2 * kMicrosecond), bounds::quotaBits(100 * kMbps, 10 * kMicrosecond)};
    CHECK(priceCombination(net, cross, ledger, p, true) == doctest::Approx(2.5 * 200));
    CHECK(priceCombination(net, cross, ledger, p, false) == doctest::Approx(2.5 * 100));
    CHECK(touchedLinks(net, cross, true).size() == 2);
    CHECK(touchedLinks(net, cross, false).size() == 1);
}

TEST_CASE("value-density bounds")
{
    Network net = makeNet();
    Flow a = makeFlow(net, 5 * kMbps, 100, 10);
    const auto single = deriveValueDensityBounds({a});
    CHECK(single.vMin == doctest::Approx(2.0));
    CHECK(single.vMax == doctest::Approx(2.0));
    CHECK(single.source == PricingConfig::Source::FromTrace);

    Flow lo = makeFlow(net, 7'500'000, 100, 1);
    Flow hi = makeFlow(net, 3 * kMbps, 100, 100);
    const auto table = deriveValueDensityBounds({lo, hi});
    CHECK(table.vMin == doctest::Approx(0.13333).epsilon(1e-4));
    CHECK(table.vMax == doctest::Approx(33.3333).epsilon(1e-4));

    WarningCapture cap;
    const auto clamped = deriveValueDensityBounds({lo, hi}, 7.5);
    CHECK(clamped.vMin == doctest::Approx(7.575));
    CHECK(clamped.vMax == doctest::Approx(33.3333).epsilon(1e-4));
    CHECK(cap.messages.size() == 1);

    const auto raised = validatePricing({1.0, 2.0}, 10.0);
    CHECK(raised.vMin == doctest::Approx(10.1));
    CHECK(raised.vMax > raised.vMin);
    CHECK(cap.messages.size() == 3);

    CHECK_THROWS_AS(deriveValueDensityBounds({}), ValidationError);
    CHECK_THROWS_AS(AuctionScheduler(net, {}, PricingConfig{1.0, 2.0}), ValidationError);
}

TEST_CASE("admission outcomes")
{
    SUBCASE("no feasible combination")
    {
        const Network net = makeNet();
        AuctionScheduler s(net, {}, {7.6, 40.0});
        const auto d = s.admit(makeFlow(net, 5 * kMbps, 12000, 100, "P1", 100 * kMicrosecond));
        CHECK_FALSE(d.admitted);
        CHECK(d.reason == RejectReason::NoFeasibleCombination);
        CHECK(s.ledger().empty());
    }
    SUBCASE("price exceeds value")
    {
        const Network net = makeNet();
        AuctionScheduler s(net, {}, {7.6, 40.0});
        // 100 Mb/s on four links at 0.1 per Mb/s costs 40.
        const auto d = s.admit(makeFlow(net, 5 * kMbps, 12000, 39.9));
        CHECK_FALSE(d.admitted);
        CHECK(d.reason == RejectReason::PriceExceedsValue);
        CHECK(d.price == doctest::Approx(40.0));
        CHECK(s.ledger().empty());
        CHECK(s.admit(makeFlow(net, 5 * kMbps, 12000, 40.0)).admitted);
    }
    SUBCASE("capacity exhausted")
    {
        // Prices stay tiny, so only the capacity check can refuse.
        const Network net = makeNet({.lease = 0.0, .crossBw = 200 * kMbps});
        AuctionScheduler s(net, {}, {0.001, 0.002});
        CHECK(s.admit(makeFlow(net, 5 * kMbps, 12000, 100)).admitted);
        CHECK(s.admit(makeFlow(net, 5 * kMbps, 12000, 100)).admitted);
        const auto d = s.admit(makeFlow(net, 5 * kMbps, 12000, 100));
        CHECK(d.reason == RejectReason::CapacityExhausted);
        CHECK(s.ledger().reservedRate(2) == doctest::Approx(200e6));
    }
}

TEST_CASE("fresh admission picks the exhaustive minimum price")
{
    const Network net = makeNet({.mesh = true});
    const PricingConfig p{7.6, 40.0};
    AuctionScheduler s(net, {}, p);
    const Flow f = makeFlow(net, kMbps, 1000, 100, "P4");
    const auto d = s.admit(f);
    REQUIRE(d.admitted);

    // Exhaustive search with the price transcribed from its definition.
    PathCache pc(net, 10);
    double best = std::numeric_limits<double>::infinity();
    std::size_t feasible = 0;
    for (const auto& path : pc.paths(f.source, f.sink)) {
        for (auto qu : kTable2Menu.rates) {
            for (auto qp : kTable2Menu.rates) {
                const bounds::ShaperAssignment a{{bounds::quotaBits(qu, 2 * kMicrosecond), bounds::quotaBits(qp, 10 * kMicrosecond)}};
                if (!bounds::checkDeadline(f, bounds::tryEndToEndDelayBound(net, f, path, a))) continue;
                ++feasible;
                const double links = static_cast<double>(path.segments[0].hops());
                const double provLinks = static_cast<double>(path.segments[1].hops()) + 1;  // plus the cross link
                const double phi0 = oraclePhi(p.vMin, p.vMax, 7.5, 0, 1);
                best = std::min(best, (links * toMbps(qu) + provLinks * toMbps(qp)) * phi0);
            }
        }
    }
    CHECK(feasible > 6);
    CHECK(d.price == doctest::Approx(best));
    CHECK(d.chosen->quotaIndex == std::vector<std::size_t>{0, 0});
    CHECK(d.chosen->pathRank == 0);

    // Exactly the chosen path's links carry reservations.
    std::set<LinkIndex> onPath;
    for (auto l : d.chosen->path.allLinks()) onPath.insert(l);
    for (std::size_t l = 0; l < net.links().size(); ++l)
        CHECK((s.ledger().reservedPerWindow(l) > 0) == (onPath.count(l) == 1));
    CHECK(s.ledger().reservedRate(0) == doctest::Approx(5e6));
}

TEST_CASE("trace scheduling and objective")
{
    const Network net = makeNet({.mesh = true});
    SchedulerConfig cfg;
    CHECK(scheduleTrace({}, net, cfg, {7.6, 40.0}).decisions.empty());
    CHECK(scheduleTrace({}, net, cfg, {7.6, 40.0}).ledger.empty());

    const Network roomy = makeNet({.lease = 0.0, .userBw = 1000 * kGbps, .crossBw = 1000 * kGbps, .provBw = 1000 * kGbps});
    const auto one = scheduleTrace({makeFlow(roomy, 5 * kMbps, 12000, 10)}, roomy, cfg, {0.001, 0.002});
    CHECK(one.admitted() == 1);
    CHECK(one.objective == doctest::Approx(10.0));

    std::mt19937_64 rng(5);
    std::vector<Flow> flows;
    for (int i = 0; i < 120; ++i) {
        Flow f = makeFlow(net, (1 + static_cast<int>(rng() % 8)) * kMbps, 2000 + static_cast<Bits>(rng() % 10000),
                          1 + static_cast<double>(rng() % 100), i % 2 ? "P4" : "P2");
        f.id = "f" + std::to_string(i);
        flows.push_back(f);
    }
    const auto pricing = deriveValueDensityBounds(flows, net.maxLeasePrice());
    AuctionScheduler s(net, cfg, pricing);
    for (const auto& f : flows) {
        const auto d = s.admit(f);
        CHECK_NOTHROW(s.ledger().checkInvariant());
        if (d.admitted) CHECK(d.chosen->bound->total <= f.deadline);
    }
    const auto r1 = scheduleTrace(flows, net, cfg, pricing);
    const auto r2 = scheduleTrace(flows, net, cfg, pricing);
    REQUIRE(r1.decisions.size() == r2.decisions.size());
    for (std::size_t i = 0; i < r1.decisions.size(); ++i) {
        CHECK(r1.decisions[i].admitted == r2.decisions[i].admitted);
        CHECK(r1.decisions[i].price == r2.decisions[i].price);
    }
    CHECK(r1.objective == doctest::Approx(r1.decisions.back().objectiveRunning));
}

TEST_CASE("objective value")
{
    const Network net = makeNet();
    LinkLedger ledger(net);
    CHECK(objectiveValue({}, ledger, net) == 0.0);

    // 1 Mb/s reserved in total on links priced at 7.5.
    ledger.commit({{0, 2, 2 * kMicrosecond}});
    AdmissionDecision d;
    d.admitted = true;
    d.weight = 10;
    CHECK(objectiveValue({d}, ledger, net) == doctest::Approx(2.5));
    d.admitted = false;
    CHECK_THROWS_AS(objectiveValue({d}, ledger, net), InvariantViolation);
}

TEST_CASE("greedy baseline")
{
    const Network roomy = makeNet({.userBw = 1000 * kGbps, .crossBw = 1000 * kGbps, .provBw = 1000 * kGbps});
    std::vector<Flow> flows(20, makeFlow(roomy, 5 * kMbps, 12000, 1));
    CHECK(greedyBaseline(flows, roomy, {}).admitted() == 20);

    const Network tiny = makeNet({.userBw = 1, .crossBw = 1, .provBw = 1});
    const auto none = greedyBaseline(flows, tiny, {});
    CHECK(none.admitted() == 0);
    CHECK(none.ledger.empty());
}

TEST_CASE("auction beats greedy on an adversarial trace")
{
    // The 200 Mb/s cross link holds two 100 Mb/s flows. Cheap flows arrive first.
    const Network net = makeNet({.lease = 0.05, .crossBw = 200 * kMbps});
    std::vector<Flow> flows;
    for (int i = 0; i < 6; ++i) flows.push_back(makeFlow(net, 5 * kMbps, 12000, 1.0));
    for (int i = 0; i < 2; ++i) flows.push_back(makeFlow(net, 5 * kMbps, 12000, 100.0));
    for (std::size_t i = 0; i < flows.size(); ++i) flows[i].id = "f" + std::to_string(i);
    const auto pricing = deriveValueDensityBounds(flows, net.maxLeasePrice());
    const auto auction = scheduleTrace(flows, net, {}, pricing);
    const auto greedy = greedyBaseline(flows, net, {});
    CHECK(greedy.admitted() == 2);
    CHECK(greedy.decisions[0].admitted);
    CHECK(auction.decisions[6].admitted);
    CHECK(auction.objective > greedy.objective);
}
