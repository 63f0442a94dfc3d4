#pragma once

// Online admission control: exponential link pricing over a per-link
// reservation ledger, plus a lease-cost greedy baseline.

#include "detnet/bounds.hpp"
#include "detnet/netmodel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace detnet::scheduler {

using netmodel::Flow;
using netmodel::LinkIndex;
using netmodel::Network;
using netmodel::PathCache;
using netmodel::PathDecomposition;

/// Allowed quota rates B^1 < ... < B^m, shared by every domain.
struct QuotaMenu {
    std::vector<BitsPerSec> rates;

    std::size_t m() const { return rates.size(); }
    void validate() const;
};

struct ResourceCombination {
    std::size_t pathRank = 0;
    PathDecomposition path;
    std::vector<std::size_t> quotaIndex;  // into QuotaMenu::rates, per domain
    bounds::ShaperAssignment quotas;      // bits per slot, per domain
    std::optional<bounds::DelayBreakdown> bound;
    double price = 0.0;

    /// Sum over touched links of the quota rate, bits/s.
    BitsPerSec totalReservedRate(const Network& net, bool crossLinks) const;
};

/// One link reservation implied by a combination: `quota` bits in every slot of length `slot`.
struct LinkReservation {
    LinkIndex link;
    Bits quota;
    Nanos slot;

    BitsPerSec rate() const { return bounds::quotaRate(quota, slot); }
};

/// Intra links of every segment with that segment's quota and, when crossLinks
/// is set, each cross link with the quota of the domain it enters.
std::vector<LinkReservation> touchedLinks(const Network& net, const ResourceCombination& c, bool crossLinks);

/// Per-link reservation state. Reservations made in different slot lengths are
/// kept exactly by counting bits over a window equal to the lcm of all slot lengths.
class LinkLedger {
public:
    LinkLedger() = default;
    explicit LinkLedger(const Network& net);

    Nanos window() const { return window_; }
    bool fits(const std::vector<LinkReservation>& r) const;
    void commit(const std::vector<LinkReservation>& r);  // throws InvariantViolation past capacity

    /// Reserved bits per slot of length `slot` (the link's own domain slot by default).
    Bits reservedBitsPerSlot(LinkIndex l, std::optional<Nanos> slot = std::nullopt) const;
    double reservedRate(LinkIndex l) const;  // bits/s
    Bits capacityPerWindow(LinkIndex l) const { return capacity_.at(l); }
    Bits reservedPerWindow(LinkIndex l) const { return reserved_.at(l); }
    bool empty() const;
    std::size_t linkCount() const { return reserved_.size(); }
    /// Throws InvariantViolation if any link exceeds its capacity.
    void checkInvariant() const;

private:
    const Network* net_ = nullptr;
    Nanos window_ = 1;
    std::vector<Bits> reserved_;
    std::vector<Bits> capacity_;
};

struct PricingConfig {
    enum class Source { FromTrace, Explicit };
    double vMin = 1.0;  // value per Mb/s
    double vMax = 1.0;
    Source source = Source::Explicit;
};

/// Enforces vMin > max lease price (clamped to 1.01x) and vMax >= vMin, warning on each adjustment.
PricingConfig validatePricing(PricingConfig cfg, double maxLeasePrice);

/// vMin/vMax = min/max of v_i / r_i with r in Mb/s, then validated against maxLeasePrice.
PricingConfig deriveValueDensityBounds(const std::vector<Flow>& flows, double maxLeasePrice = 0.0);

/// Exponential price per Mb/s of reservation on link l at the ledger's current load.
double priceLink(const Network& net, LinkIndex l, const LinkLedger& ledger, const PricingConfig& pricing);

double priceCombination(const Network& net, const ResourceCombination& c, const LinkLedger& ledger,
                        const PricingConfig& pricing, bool crossLinks);

struct SchedulerConfig {
    QuotaMenu menu{{5 * kMbps, 10 * kMbps, 100 * kMbps}};
    std::size_t maxPaths = 10;
    bool crossLinkAccounting = true;
    bounds::Options bound{};
};

/// Cartesian product of paths and per-domain quota choices, in (path rank, quota index) order.
std::vector<ResourceCombination> enumerateCombinations(const Flow& flow, const Network& net, const QuotaMenu& menu,
                                                       PathCache& paths);

/// Keeps combinations whose bound meets the deadline, attaching the bound.
std::vector<ResourceCombination> filterFeasible(const Flow& flow, const Network& net,
                                                std::vector<ResourceCombination> combos, const bounds::Options& opt);

enum class RejectReason { None, NoFeasibleCombination, PriceExceedsValue, CapacityExhausted };
std::string reasonName(RejectReason r);

struct AdmissionDecision {
    std::string flowId;
    double weight = 0.0;
    bool admitted = false;
    RejectReason reason = RejectReason::None;
    std::optional<ResourceCombination> chosen;  // the argmin, also kept on rejection when one existed
    double price = 0.0;
    double objectiveRunning = 0.0;
};

/// Lease-cost objective: admitted weight minus sum of lease price times reserved Mb/s.
double objectiveValue(const std::vector<AdmissionDecision>& decisions, const LinkLedger& ledger, const Network& net);

class AuctionScheduler {
public:
    AuctionScheduler(const Network& net, SchedulerConfig config, PricingConfig pricing);

    AdmissionDecision admit(const Flow& flow);
    const LinkLedger& ledger() const { return ledger_; }
    const PricingConfig& pricing() const { return pricing_; }
    const SchedulerConfig& config() const { return config_; }

private:
    const Network* net_;
    SchedulerConfig config_;
    PricingConfig pricing_;
    PathCache paths_;
    LinkLedger ledger_;
};

class GreedyScheduler {
public:
    GreedyScheduler(const Network& net, SchedulerConfig config);

    AdmissionDecision admit(const Flow& flow);
    const LinkLedger& ledger() const { return ledger_; }

private:
    const Network* net_;
    SchedulerConfig config_;
    PathCache paths_;
    LinkLedger ledger_;
};

struct ScheduleResult {
    std::vector<AdmissionDecision> decisions;
    LinkLedger ledger;
    double objective = 0.0;
    std::size_t admitted() const;
};

ScheduleResult scheduleTrace(const std::vector<Flow>& flows, const Network& net, const SchedulerConfig& config,
                             const PricingConfig& pricing);
ScheduleResult greedyBaseline(const std::vector<Flow>& flows, const Network& net, const SchedulerConfig& config);

}  // namespace detnet::scheduler
