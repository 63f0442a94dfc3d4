#pragma once

// End-to-end delay bounds for a flow on a multi-domain path with a discrete
// shaper at every domain ingress. Domain positions k are zero-based here:
// k = 0 is the source domain, whose shaper sees the flow's token bucket.

#include "detnet/curves.hpp"
#include "detnet/netmodel.hpp"

#include <optional>
#include <vector>

namespace detnet::bounds {

using netmodel::Domain;
using netmodel::Flow;
using netmodel::Network;
using netmodel::PathDecomposition;
using netmodel::Segment;

/// Per-slot quota b_{i,n} for every domain on the path, in path order.
struct ShaperAssignment {
    std::vector<Bits> quota;

    /// floor(b * 1e9 / tau) in bits/s.
    BitsPerSec quotaRate(std::size_t k, const Domain& d) const;
};

/// Bits per slot granted by a reserved rate: floor(rate * tau).
Bits quotaBits(BitsPerSec rate, Nanos slot);
BitsPerSec quotaRate(Bits quota, Nanos slot);

struct DelayBreakdown {
    std::vector<Nanos> shaper;            // per domain
    std::vector<Nanos> trans;             // per domain
    std::vector<Nanos> crossPropagation;  // per cross link, crossPropagation[k-1] enters domain k
    Nanos total = 0;

    Nanos sumOfParts() const;
};

Nanos userSideTransDelay(const Segment& seg, const Domain& d);
Nanos networkSideTransDelay(const Network& net, const Segment& seg, const Domain& d);
/// Dispatches on the domain's side.
Nanos transDelay(const Network& net, const Segment& seg);

curves::RateLatency shaperServiceCurve(Bits quota, const Domain& d);

/// Arrival curve seen by the shaper of domain k.
curves::Curve edgeArrivalCurve(const Network& net, const Flow& flow, const PathDecomposition& path, std::size_t k,
                               const ShaperAssignment& assignment);

enum class Method {
    Analytic,  // closed forms, exact to the nanosecond
    Grid       // sampled min-plus on the supplied grid
};

struct Options {
    Method method = Method::Analytic;
    curves::GridConfig grid{};
    // How far the analytic staircase search may scan before giving up.
    Nanos searchHorizon = 100 * kMillisecond;
};

/// Throws UnboundedDelay when the quota cannot keep up with the arrivals.
Nanos shaperDelay(const Network& net, const Flow& flow, const PathDecomposition& path, std::size_t k,
                  const ShaperAssignment& assignment, const Options& opt = {});

DelayBreakdown endToEndDelayBound(const Network& net, const Flow& flow, const PathDecomposition& path,
                                  const ShaperAssignment& assignment, const Options& opt = {});

/// Same as endToEndDelayBound but returns nullopt instead of throwing UnboundedDelay.
std::optional<DelayBreakdown> tryEndToEndDelayBound(const Network& net, const Flow& flow, const PathDecomposition& path,
                                                    const ShaperAssignment& assignment, const Options& opt = {});

bool checkDeadline(const Flow& flow, const DelayBreakdown& breakdown);
bool checkDeadline(const Flow& flow, const std::optional<DelayBreakdown>& breakdown);

}  // namespace detnet::bounds
