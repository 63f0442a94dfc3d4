#include "detnet/bounds.hpp"

#include <numeric>

namespace detnet::bounds {

using netmodel::DomainSide;

Bits quotaBits(BitsPerSec rate, Nanos slot)
{
    if (rate < 0 || slot <= 0) throw ValidationError("quota needs a nonnegative rate and a positive slot");
    return bitsSentFloor(rate, slot);
}

BitsPerSec quotaRate(Bits quota, Nanos slot)
{
    if (quota < 0 || slot <= 0) throw ValidationError("quota needs nonnegative bits and a positive slot");
    return static_cast<BitsPerSec>(static_cast<__int128>(quota) * kNanosPerSecond / slot);
}

BitsPerSec ShaperAssignment::quotaRate(std::size_t k, const Domain& d) const
{
    return bounds::quotaRate(quota.at(k), d.slot);
}

Nanos DelayBreakdown::sumOfParts() const
{
    const Nanos s = std::accumulate(shaper.begin(), shaper.end(), Nanos{0});
    const Nanos t = std::accumulate(trans.begin(), trans.end(), Nanos{0});
    return s + t + std::accumulate(crossPropagation.begin(), crossPropagation.end(), Nanos{0});
}

Nanos userSideTransDelay(const Segment& seg, const Domain& d)
{
    if (d.side != DomainSide::User) throw ValidationError("user-side delay requested for provider domain " + d.id);
    return static_cast<Nanos>(seg.hops() + 1) * d.slot;
}

Nanos networkSideTransDelay(const Network& net, const Segment& seg, const Domain& d)
{
    if (d.side != DomainSide::Provider) throw ValidationError("provider-side delay requested for user domain " + d.id);
    Nanos total = d.slot;
    for (auto l : seg.links) total += net.link(l).propagation + 2 * d.slot;
    return total;
}

Nanos transDelay(const Network& net, const Segment& seg)
{
    const Domain& d = net.domain(seg.domain);
    return d.side == DomainSide::User ? userSideTransDelay(seg, d) : networkSideTransDelay(net, seg, d);
}

curves::RateLatency shaperServiceCurve(Bits quota, const Domain& d)
{
    if (quota <= 0) throw ValidationError("shaper quota must be positive");
    return {quotaRate(quota, d.slot), 2 * d.slot};
}

namespace {

void requireAssignment(const PathDecomposition& path, const ShaperAssignment& a, std::size_t k)
{
    if (k >= path.domainCount()) throw ValidationError("domain position outside the path");
    if (a.quota.size() < path.domainCount()) throw ValidationError("assignment does not cover every domain");
}

}  // namespace

curves::Curve edgeArrivalCurve(const Network& net, const Flow& flow, const PathDecomposition& path, std::size_t k,
                               const ShaperAssignment& assignment)
{
    requireAssignment(path, assignment, k);
    if (k == 0) return curves::TokenBucket{flow.meanRate, flow.maxBurst};
    const Domain& up = net.domain(path.segments[k - 1].domain);
    const Bits prev = assignment.quota[k - 1];
    if (prev <= 0) throw ValidationError("upstream quota is missing");
    const auto& cross = net.link(path.crossLinks[k - 1]);
    return curves::RateCappedStaircase{{prev, up.slot, up.slot}, cross.bandwidth};
}

Nanos shaperDelay(const Network& net, const Flow& flow, const PathDecomposition& path, std::size_t k,
                  const ShaperAssignment& assignment, const Options& opt)
{
    requireAssignment(path, assignment, k);
    const Domain& d = net.domain(path.segments[k].domain);
    const auto beta = shaperServiceCurve(assignment.quota[k], d);
    const auto alpha = edgeArrivalCurve(net, flow, path, k, assignment);
    if (opt.method == Method::Grid) return curves::horizontalDeviation(alpha, beta, opt.grid);
    if (const auto* tb = alpha.as<curves::TokenBucket>()) return curves::analytic::horizontalDeviation(*tb, beta);
    return curves::analytic::horizontalDeviation(*alpha.as<curves::RateCappedStaircase>(), beta, opt.searchHorizon);
}

DelayBreakdown endToEndDelayBound(const Network& net, const Flow& flow, const PathDecomposition& path,
                                  const ShaperAssignment& assignment, const Options& opt)
{
    DelayBreakdown out;
    for (std::size_t k = 0; k < path.domainCount(); ++k) {
        out.shaper.push_back(shaperDelay(net, flow, path, k, assignment, opt));
        out.trans.push_back(transDelay(net, path.segments[k]));
        if (k > 0) out.crossPropagation.push_back(net.link(path.crossLinks[k - 1]).propagation);
    }
    out.total = out.sumOfParts();
    return out;
}

std::optional<DelayBreakdown> tryEndToEndDelayBound(const Network& net, const Flow& flow, const PathDecomposition& path,
                                                    const ShaperAssignment& assignment, const Options& opt)
{
    try {
        return endToEndDelayBound(net, flow, path, assignment, opt);
    } catch (const UnboundedDelay&) {
        return std::nullopt;
    }
}

bool checkDeadline(const Flow& flow, const DelayBreakdown& breakdown) { return breakdown.total <= flow.deadline; }

bool checkDeadline(const Flow& flow, const std::optional<DelayBreakdown>& breakdown)
{
    return breakdown && checkDeadline(flow, *breakdown);
}

}  // namespace detnet::bounds
