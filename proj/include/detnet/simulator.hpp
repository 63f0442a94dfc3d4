#pragma once

// Discrete-event data plane: edge discrete shapers, CQF in user domains,
// cycle-tagged SDF in the provider domain, and a best-effort FIFO mode.

#include "detnet/bounds.hpp"
#include "detnet/netmodel.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace detnet::simulator {

using netmodel::Flow;
using netmodel::LinkIndex;
using netmodel::Network;
using netmodel::NodeIndex;
using netmodel::PathDecomposition;

using SlotIndex = std::int64_t;

/// A slotted clock: slot s covers [phase + s*length, phase + (s+1)*length).
struct SlotClock {
    Nanos length = 1;
    Nanos phase = 0;

    SlotIndex at(Nanos t) const { return floorDiv(t - phase, length); }
    Nanos start(SlotIndex s) const { return phase + s * length; }
    Nanos end(SlotIndex s) const { return start(s + 1); }
};

/// Edge discrete shaper with M cyclic queues and per-flow per-slot quotas.
/// Counters are keyed by absolute slot, so a queue's counters start fresh
/// each time it comes round again.
class ShaperPort {
public:
    ShaperPort(SlotClock clock, std::size_t queues);

    struct Placement {
        bool accepted = false;
        SlotIndex slot = 0;       // absolute transmitting slot
        std::size_t offset = 0;   // slots ahead of the transmitting one, 1..M-1
        std::size_t queue = 0;    // slot mod M
        Bits overshoot = 0;       // bits beyond the quota after admitting this packet
    };

    void setQuota(std::size_t flow, Bits quota);
    Bits quota(std::size_t flow) const;
    /// Adds `bits` of already-queued traffic for `flow` at `offset` slots ahead of now.
    void preload(std::size_t flow, std::size_t offset, Bits bits, Nanos now);
    /// Scans queues +1..+M-1 and takes the first whose used counter is below the quota.
    Placement enqueue(std::size_t flow, Bits size, Nanos now);
    Bits used(std::size_t flow, SlotIndex slot) const;
    const SlotClock& clock() const { return clock_; }
    std::size_t queues() const { return queues_; }
    /// Transmitting queue index at time t.
    std::size_t transmitting(Nanos t) const;

private:
    void prune(SlotIndex current);

    SlotClock clock_;
    std::size_t queues_;
    std::map<std::size_t, Bits> quota_;
    std::map<std::pair<SlotIndex, std::size_t>, Bits> used_;
};

/// CQF: a packet received in slot c leaves in slot c+1. Returns the departure slot.
SlotIndex forwardCQF(const SlotClock& clock, Nanos arrival);
/// SDF: a packet leaves in the slot after the one containing its cycle reference,
/// the latest time its upstream slot could have delivered it.
SlotIndex forwardSDF(const SlotClock& clock, Nanos cycleRef);

/// Drop-tail FIFO served at a fixed rate.
class FifoPort {
public:
    FifoPort() = default;
    FifoPort(BitsPerSec rate, std::size_t capacityPackets) : rate_(rate), capacity_(capacityPackets) {}

    /// Departure time (end of serialization), or nullopt when the buffer is full.
    std::optional<Nanos> transmit(Nanos arrival, Bits size);
    std::size_t backlog(Nanos now);

private:
    BitsPerSec rate_ = 1;
    std::size_t capacity_ = 0;
    Nanos busyUntil_ = 0;
    std::deque<Nanos> departures_;
};

enum class Mode { Deterministic, BestEffort };

struct BackgroundConfig {
    double load = 0.0;            // target utilization of each port carrying admitted flows
    std::size_t burstPackets = 16;
    Bits packetSize = 12000;
    double burstRateFactor = 10.0;  // arrival rate during a burst, as a multiple of the link rate
};

struct SimConfig {
    Mode mode = Mode::Deterministic;
    Nanos duration = 100 * kMillisecond;  // packets are generated in [0, duration)
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> phaseSeed;  // clock phases; defaults to seed
    std::size_t shaperQueues = 10;
    std::size_t bufferPackets = 4096;
    BackgroundConfig background;
    bool keepRecords = false;
    std::optional<std::size_t> recordFlow;  // with keepRecords, only this flow's packets
};

/// A flow the data plane carries, with the reservation that admitted it.
struct AdmittedFlow {
    Flow flow;
    PathDecomposition path;
    bounds::ShaperAssignment quotas;
    Nanos bound = 0;
};

struct DomainStamp {
    Nanos ingress = 0;   // arrival at the domain's first node
    Nanos release = 0;   // start of the shaper's transmitting slot
    Nanos egress = 0;    // departure onto the next cross link, or delivery
};

struct PacketRecord {
    std::size_t flow = 0;
    std::uint64_t seq = 0;
    Bits size = 0;
    Nanos createdAt = 0;
    Nanos deliveredAt = 0;
    std::vector<DomainStamp> domains;
};

struct FlowStats {
    std::string id;
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    Nanos maxDelay = 0;
    Nanos minDelay = 0;
    double meanDelay = 0.0;
    Nanos bound = 0;
    std::uint64_t violations = 0;       // delivered later than the bound
    std::uint64_t drops = 0;
    std::uint64_t shaperOverflows = 0;
    Bits maxOvershoot = 0;
    double meanCrossDomainDelay = 0.0;  // shaper wait plus cross-link time, summed over boundaries
    Nanos maxSegmentExcess = 0;         // largest measured minus bound per domain segment, if positive

    Nanos jitter() const { return delivered ? maxDelay - minDelay : 0; }
};

struct SimStats {
    std::vector<FlowStats> flows;
    std::uint64_t events = 0;
    std::uint64_t slotOverruns = 0;  // slots asked to carry more than rate * length
    std::uint64_t backgroundPackets = 0;
    std::uint64_t backgroundDrops = 0;
    Nanos backgroundMaxDelay = 0;
    double meanUtilization = 0.0;  // over ports carrying admitted flows
    double maxUtilization = 0.0;
    std::vector<PacketRecord> records;

    std::uint64_t totalViolations() const;
    std::uint64_t totalShaperOverflows() const;
    std::uint64_t totalDrops() const;
    Nanos maxDelay() const;
    Nanos maxJitter() const;
};

SimStats runSimulation(const Network& net, const std::vector<AdmittedFlow>& flows, const SimConfig& config);

}  // namespace detnet::simulator
