#include "detnet/scheduler.hpp"

#include "detnet/log.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace detnet::scheduler {

void QuotaMenu::validate() const
{
    if (rates.empty()) throw ValidationError("quota menu is empty");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (rates[i] <= 0) throw ValidationError("quota rates must be positive");
        if (i > 0 && rates[i] <= rates[i - 1]) throw ValidationError("quota rates must be strictly increasing");
    }
}

std::vector<LinkReservation> touchedLinks(const Network& net, const ResourceCombination& c, bool crossLinks)
{
    std::vector<LinkReservation> out;
    const auto& p = c.path;
    for (std::size_t k = 0; k < p.domainCount(); ++k) {
        const Nanos slot = net.domain(p.segments[k].domain).slot;
        const Bits q = c.quotas.quota.at(k);
        if (crossLinks && k > 0) out.push_back({p.crossLinks[k - 1], q, slot});
        for (auto l : p.segments[k].links) out.push_back({l, q, slot});
    }
    return out;
}

BitsPerSec ResourceCombination::totalReservedRate(const Network& net, bool crossLinks) const
{
    BitsPerSec total = 0;
    for (const auto& r : touchedLinks(net, *this, crossLinks)) total += r.rate();
    return total;
}

// --- ledger ----------------------------------------------------------------

LinkLedger::LinkLedger(const Network& net) : net_(&net)
{
    for (const auto& d : net.domains()) window_ = std::lcm(window_, d.slot);
    reserved_.assign(net.links().size(), 0);
    for (const auto& l : net.links()) capacity_.push_back(bitsSentFloor(l.bandwidth, window_));
}

namespace {

Bits perWindow(const LinkReservation& r, Nanos window)
{
    if (r.slot <= 0 || window % r.slot != 0) throw ValidationError("slot length does not divide the ledger window");
    return r.quota * (window / r.slot);
}

}  // namespace

bool LinkLedger::fits(const std::vector<LinkReservation>& rs) const
{
    std::map<LinkIndex, Bits> add;
    for (const auto& r : rs) add[r.link] += perWindow(r, window_);
    for (const auto& [l, bits] : add)
        if (reserved_.at(l) + bits > capacity_.at(l)) return false;
    return true;
}

void LinkLedger::commit(const std::vector<LinkReservation>& rs)
{
    for (const auto& r : rs) reserved_.at(r.link) += perWindow(r, window_);
    checkInvariant();
}

Bits LinkLedger::reservedBitsPerSlot(LinkIndex l, std::optional<Nanos> slot) const
{
    Nanos s = 0;
    if (slot) {
        s = *slot;
    } else {
        // Intra links use their domain; cross links use the domain at endpoint b.
        s = net_->domainOf(net_->link(l).b).slot;
    }
    return reserved_.at(l) / (window_ / s);
}

double LinkLedger::reservedRate(LinkIndex l) const
{
    return static_cast<double>(reserved_.at(l)) * static_cast<double>(kNanosPerSecond) / static_cast<double>(window_);
}

bool LinkLedger::empty() const
{
    return std::all_of(reserved_.begin(), reserved_.end(), [](Bits b) { return b == 0; });
}

void LinkLedger::checkInvariant() const
{
    for (std::size_t l = 0; l < reserved_.size(); ++l) {
        if (reserved_[l] < 0 || reserved_[l] > capacity_[l]) {
            std::ostringstream os;
            os << "link " << net_->link(l).id << " reserved " << reserved_[l] << " of " << capacity_[l]
               << " bits per " << window_ << " ns window";
            throw InvariantViolation(os.str());
        }
    }
}

// --- pricing ---------------------------------------------------------------

PricingConfig validatePricing(PricingConfig cfg, double maxLeasePrice)
{
    constexpr double eta = 0.01;
    if (!std::isfinite(cfg.vMin) || !std::isfinite(cfg.vMax)) throw ValidationError("value-density bounds must be finite");
    if (cfg.vMin <= maxLeasePrice) {
        const double clamped = maxLeasePrice > 0 ? maxLeasePrice * (1 + eta) : eta;
        std::ostringstream os;
        os << "vMin " << cfg.vMin << " does not exceed the largest lease price " << maxLeasePrice << "; clamped to "
           << clamped;
        log::warn(os.str());
        cfg.vMin = clamped;
    }
    if (cfg.vMax < cfg.vMin) {
        const double raised = cfg.vMin * (1 + eta);
        std::ostringstream os;
        os << "vMax " << cfg.vMax << " is below vMin " << cfg.vMin << "; raised to " << raised;
        log::warn(os.str());
        cfg.vMax = raised;
    }
    return cfg;
}

PricingConfig deriveValueDensityBounds(const std::vector<Flow>& flows, double maxLeasePrice)
{
    if (flows.empty()) throw ValidationError("cannot derive value-density bounds from an empty trace");
    PricingConfig cfg;
    cfg.source = PricingConfig::Source::FromTrace;
    cfg.vMin = std::numeric_limits<double>::infinity();
    cfg.vMax = 0.0;
    for (const auto& f : flows) {
        const double density = f.weight / toMbps(static_cast<double>(f.meanRate));
        cfg.vMin = std::min(cfg.vMin, density);
        cfg.vMax = std::max(cfg.vMax, density);
    }
    return validatePricing(cfg, maxLeasePrice);
}

double priceLink(const Network& net, LinkIndex l, const LinkLedger& ledger, const PricingConfig& pricing)
{
    const auto& link = net.link(l);
    const double lo = pricing.vMin - link.leasePrice;
    const double hi = pricing.vMax - link.leasePrice;
    const double utilization = ledger.reservedRate(l) / static_cast<double>(link.bandwidth);
    return lo * std::pow(hi / lo, utilization);
}

double priceCombination(const Network& net, const ResourceCombination& c, const LinkLedger& ledger,
                        const PricingConfig& pricing, bool crossLinks)
{
    double total = 0.0;
    for (const auto& r : touchedLinks(net, c, crossLinks))
        total += toMbps(static_cast<double>(r.rate())) * priceLink(net, r.link, ledger, pricing);
    return total;
}

// --- combinations ----------------------------------------------------------

std::vector<ResourceCombination> enumerateCombinations(const Flow& flow, const Network& net, const QuotaMenu& menu,
                                                       PathCache& paths)
{
    menu.validate();
    std::vector<ResourceCombination> out;
    const auto& ps = paths.paths(flow.source, flow.sink);
    for (std::size_t rank = 0; rank < ps.size(); ++rank) {
        const auto& p = ps[rank];
        const std::size_t K = p.domainCount();
        std::vector<std::size_t> idx(K, 0);
        while (true) {
            ResourceCombination c;
            c.pathRank = rank;
            c.path = p;
            c.quotaIndex = idx;
            for (std::size_t k = 0; k < K; ++k)
                c.quotas.quota.push_back(bounds::quotaBits(menu.rates[idx[k]], net.domain(p.segments[k].domain).slot));
            out.push_back(std::move(c));
            // Odometer over quota indices, last domain fastest.
            std::size_t k = K;
            while (k > 0 && ++idx[k - 1] == menu.m()) idx[--k] = 0;
            if (k == 0) break;
        }
    }
    return out;
}

std::vector<ResourceCombination> filterFeasible(const Flow& flow, const Network& net,
                                                std::vector<ResourceCombination> combos, const bounds::Options& opt)
{
    std::vector<ResourceCombination> out;
    for (auto& c : combos) {
        if (std::any_of(c.quotas.quota.begin(), c.quotas.quota.end(), [](Bits q) { return q <= 0; })) continue;
        c.bound = bounds::tryEndToEndDelayBound(net, flow, c.path, c.quotas, opt);
        if (bounds::checkDeadline(flow, c.bound)) out.push_back(std::move(c));
    }
    return out;
}

std::string reasonName(RejectReason r)
{
    switch (r) {
    case RejectReason::None: return "";
    case RejectReason::NoFeasibleCombination: return "no-feasible-combination";
    case RejectReason::PriceExceedsValue: return "price-exceeds-value";
    case RejectReason::CapacityExhausted: return "capacity-exhausted";
    }
    return "";
}

double objectiveValue(const std::vector<AdmissionDecision>& decisions, const LinkLedger& ledger, const Network& net)
{
    double value = 0.0;
    bool any = false;
    for (const auto& d : decisions) {
        if (!d.admitted) continue;
        value += d.weight;
        any = true;
    }
    if (!any && !ledger.empty()) throw InvariantViolation("ledger holds reservations but no flow was admitted");
    for (std::size_t l = 0; l < ledger.linkCount(); ++l)
        value -= net.link(l).leasePrice * toMbps(ledger.reservedRate(l));
    return value;
}

// --- schedulers ------------------------------------------------------------

namespace {

// Index of the smallest (key, reserved rate) pair; earlier entries win ties.
template <typename Key>
std::size_t argmin(const std::vector<ResourceCombination>& cs, const Network& net, bool cross, Key key)
{
    std::size_t best = 0;
    double bestKey = key(cs[0]);
    BitsPerSec bestRate = cs[0].totalReservedRate(net, cross);
    for (std::size_t i = 1; i < cs.size(); ++i) {
        const double k = key(cs[i]);
        const BitsPerSec r = cs[i].totalReservedRate(net, cross);
        if (k < bestKey || (k == bestKey && r < bestRate)) {
            best = i;
            bestKey = k;
            bestRate = r;
        }
    }
    return best;
}

}  // namespace

AuctionScheduler::AuctionScheduler(const Network& net, SchedulerConfig config, PricingConfig pricing)
    : net_(&net), config_(std::move(config)), paths_(net, config_.maxPaths), ledger_(net)
{
    config_.menu.validate();
    const double maxLease = net.maxLeasePrice();
    if (pricing.vMin <= maxLease || pricing.vMax < pricing.vMin)
        throw ValidationError("pricing config is not validated: need vMax >= vMin > max lease price");
    pricing_ = pricing;
}

AdmissionDecision AuctionScheduler::admit(const Flow& flow)
{
    AdmissionDecision d;
    d.flowId = flow.id;
    d.weight = flow.weight;
    auto feasible = filterFeasible(flow, *net_, enumerateCombinations(flow, *net_, config_.menu, paths_), config_.bound);
    if (feasible.empty()) {
        d.reason = RejectReason::NoFeasibleCombination;
        return d;
    }
    for (auto& c : feasible) c.price = priceCombination(*net_, c, ledger_, pricing_, config_.crossLinkAccounting);
    const std::size_t i = argmin(feasible, *net_, config_.crossLinkAccounting,
                                 [](const ResourceCombination& c) { return c.price; });
    d.chosen = feasible[i];
    d.price = feasible[i].price;
    const auto touched = touchedLinks(*net_, feasible[i], config_.crossLinkAccounting);
    if (d.price > flow.weight) {
        d.reason = RejectReason::PriceExceedsValue;
    } else if (!ledger_.fits(touched)) {
        d.reason = RejectReason::CapacityExhausted;
    } else {
        ledger_.commit(touched);
        d.admitted = true;
    }
    return d;
}

GreedyScheduler::GreedyScheduler(const Network& net, SchedulerConfig config)
    : net_(&net), config_(std::move(config)), paths_(net, config_.maxPaths), ledger_(net)
{
    config_.menu.validate();
}

AdmissionDecision GreedyScheduler::admit(const Flow& flow)
{
    AdmissionDecision d;
    d.flowId = flow.id;
    d.weight = flow.weight;
    auto feasible = filterFeasible(flow, *net_, enumerateCombinations(flow, *net_, config_.menu, paths_), config_.bound);
    if (feasible.empty()) {
        d.reason = RejectReason::NoFeasibleCombination;
        return d;
    }
    std::vector<ResourceCombination> fitting;
    for (auto& c : feasible) {
        if (!ledger_.fits(touchedLinks(*net_, c, config_.crossLinkAccounting))) continue;
        double lease = 0.0;
        for (const auto& r : touchedLinks(*net_, c, config_.crossLinkAccounting))
            lease += net_->link(r.link).leasePrice * toMbps(static_cast<double>(r.rate()));
        c.price = lease;
        fitting.push_back(std::move(c));
    }
    if (fitting.empty()) {
        d.reason = RejectReason::CapacityExhausted;
        return d;
    }
    const std::size_t i = argmin(fitting, *net_, config_.crossLinkAccounting,
                                 [](const ResourceCombination& c) { return c.price; });
    d.chosen = fitting[i];
    d.price = fitting[i].price;
    ledger_.commit(touchedLinks(*net_, fitting[i], config_.crossLinkAccounting));
    d.admitted = true;
    return d;
}

std::size_t ScheduleResult::admitted() const
{
    return static_cast<std::size_t>(
        std::count_if(decisions.begin(), decisions.end(), [](const AdmissionDecision& d) { return d.admitted; }));
}

namespace {

template <typename Sched>
ScheduleResult run(Sched& s, const std::vector<Flow>& flows, const Network& net)
{
    ScheduleResult out;
    double weight = 0.0;
    for (const auto& f : flows) {
        auto d = s.admit(f);
        if (d.admitted) weight += d.weight;
        double lease = 0.0;
        for (std::size_t l = 0; l < s.ledger().linkCount(); ++l)
            lease += net.link(l).leasePrice * toMbps(s.ledger().reservedRate(l));
        d.objectiveRunning = weight - lease;
        out.decisions.push_back(std::move(d));
    }
    out.ledger = s.ledger();
    out.objective = objectiveValue(out.decisions, out.ledger, net);
    return out;
}

}  // namespace

ScheduleResult scheduleTrace(const std::vector<Flow>& flows, const Network& net, const SchedulerConfig& config,
                             const PricingConfig& pricing)
{
    AuctionScheduler s(net, config, pricing);
    return run(s, flows, net);
}

ScheduleResult greedyBaseline(const std::vector<Flow>& flows, const Network& net, const SchedulerConfig& config)
{
    GreedyScheduler s(net, config);
    return run(s, flows, net);
}

}  // namespace detnet::scheduler
