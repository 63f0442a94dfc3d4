#include "detnet/simulator.hpp"

#include <algorithm>
#include <queue>
#include <random>

namespace detnet::simulator {

using netmodel::DomainSide;

// --- shaper ----------------------------------------------------------------

ShaperPort::ShaperPort(SlotClock clock, std::size_t queues) : clock_(clock), queues_(queues)
{
    if (clock.length <= 0) throw ValidationError("shaper slot length must be positive");
    if (queues < 2) throw ValidationError("a shaper needs at least two queues");
}

void ShaperPort::setQuota(std::size_t flow, Bits quota)
{
    if (quota <= 0) throw ValidationError("shaper quota must be positive");
    quota_[flow] = quota;
}

Bits ShaperPort::quota(std::size_t flow) const
{
    auto it = quota_.find(flow);
    if (it == quota_.end()) throw ValidationError("flow has no quota on this shaper");
    return it->second;
}

void ShaperPort::preload(std::size_t flow, std::size_t offset, Bits bits, Nanos now)
{
    if (offset < 1 || offset >= queues_) throw ValidationError("preload offset outside 1..M-1");
    used_[{clock_.at(now) + static_cast<SlotIndex>(offset), flow}] += bits;
}

Bits ShaperPort::used(std::size_t flow, SlotIndex slot) const
{
    auto it = used_.find({slot, flow});
    return it == used_.end() ? 0 : it->second;
}

std::size_t ShaperPort::transmitting(Nanos t) const
{
    const SlotIndex s = clock_.at(t);
    return static_cast<std::size_t>(((s % static_cast<SlotIndex>(queues_)) + static_cast<SlotIndex>(queues_)) %
                                    static_cast<SlotIndex>(queues_));
}

void ShaperPort::prune(SlotIndex current)
{
    while (!used_.empty() && used_.begin()->first.first <= current) used_.erase(used_.begin());
}

ShaperPort::Placement ShaperPort::enqueue(std::size_t flow, Bits size, Nanos now)
{
    const Bits q = quota(flow);
    const SlotIndex c = clock_.at(now);
    prune(c);
    Placement p;
    for (std::size_t j = 1; j < queues_; ++j) {
        Bits& u = used_[{c + static_cast<SlotIndex>(j), flow}];
        if (u < q) {
            u += size;
            p.accepted = true;
            p.slot = c + static_cast<SlotIndex>(j);
            p.offset = j;
            const SlotIndex M = static_cast<SlotIndex>(queues_);
            p.queue = static_cast<std::size_t>(((p.slot % M) + M) % M);
            p.overshoot = std::max<Bits>(0, u - q);
            return p;
        }
    }
    return p;
}

SlotIndex forwardCQF(const SlotClock& clock, Nanos arrival) { return clock.at(arrival) + 1; }

SlotIndex forwardSDF(const SlotClock& clock, Nanos cycleRef) { return clock.at(cycleRef) + 1; }

// --- FIFO ------------------------------------------------------------------

std::size_t FifoPort::backlog(Nanos now)
{
    while (!departures_.empty() && departures_.front() <= now) departures_.pop_front();
    return departures_.size();
}

std::optional<Nanos> FifoPort::transmit(Nanos arrival, Bits size)
{
    if (backlog(arrival) >= capacity_) return std::nullopt;
    const Nanos startAt = std::max(arrival, busyUntil_);
    const Nanos done = startAt + static_cast<Nanos>((static_cast<__int128>(size) * kNanosPerSecond + rate_ - 1) / rate_);
    busyUntil_ = done;
    departures_.push_back(done);
    return done;
}

// --- stats -----------------------------------------------------------------

std::uint64_t SimStats::totalViolations() const
{
    std::uint64_t n = 0;
    for (const auto& f : flows) n += f.violations;
    return n;
}

std::uint64_t SimStats::totalShaperOverflows() const
{
    std::uint64_t n = 0;
    for (const auto& f : flows) n += f.shaperOverflows;
    return n;
}

std::uint64_t SimStats::totalDrops() const
{
    std::uint64_t n = 0;
    for (const auto& f : flows) n += f.drops;
    return n;
}

Nanos SimStats::maxDelay() const
{
    Nanos m = 0;
    for (const auto& f : flows) m = std::max(m, f.maxDelay);
    return m;
}

Nanos SimStats::maxJitter() const
{
    Nanos m = 0;
    for (const auto& f : flows) m = std::max(m, f.jitter());
    return m;
}

// --- engine ----------------------------------------------------------------

namespace {

struct Port {
    NodeIndex from = 0;
    LinkIndex link = 0;
    SlotClock clock;
    BitsPerSec bandwidth = 1;
    Bits slotCapacity = 0;
    std::map<SlotIndex, Bits> slotBits;
    FifoPort fifo;        // best-effort mode: everything; deterministic mode: background only
    Bits carried = 0;
    double flowRate = 0;  // offered by admitted flows, bits/s
    double reservedRate = 0;
    std::optional<ShaperPort> shaper;

    // Background on/off source.
    std::mt19937_64 rng;
    double bgRate = 0;
    std::size_t burstLeft = 0;
};

struct Packet {
    std::size_t flow = 0;
    std::uint64_t seq = 0;
    Bits size = 0;
    Nanos createdAt = 0;
    std::size_t pos = 0;   // index into path.nodes
    std::size_t k = 0;     // domain position
    Nanos cycleRef = 0;
    std::vector<DomainStamp> stamps;
};

enum class Kind : std::uint8_t { Generate, Arrive, Background };

struct Event {
    Nanos time;
    std::uint64_t seq;
    Kind kind;
    std::size_t id;

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct FlowAccum {
    __int128 delaySum = 0;
    __int128 crossSum = 0;
    std::uint64_t nextSeq = 0;
};

class Engine {
public:
    Engine(const Network& net, const std::vector<AdmittedFlow>& flows, const SimConfig& cfg)
        : net_(net), flows_(flows), cfg_(cfg), acc_(flows.size())
    {
        if (cfg.duration <= 0) throw ValidationError("simulation duration must be positive");
        if (cfg.shaperQueues < 2) throw ValidationError("shaper needs at least two queues");
        if (cfg.background.load < 0 || cfg.background.load >= 1) throw ValidationError("background load must be in [0, 1)");
        drawPhases();
        for (std::size_t f = 0; f < flows.size(); ++f) setupFlow(f);
        setupBackground();
    }

    SimStats run()
    {
        while (!events_.empty()) {
            const Event e = events_.top();
            events_.pop();
            ++stats_.events;
            switch (e.kind) {
            case Kind::Generate: generate(e.id, e.time); break;
            case Kind::Arrive: arrive(e.id, e.time); break;
            case Kind::Background: background(e.id, e.time); break;
            }
        }
        finish();
        return std::move(stats_);
    }

private:
    void schedule(Nanos t, Kind kind, std::size_t id) { events_.push({t, nextEvent_++, kind, id}); }

    void drawPhases()
    {
        std::mt19937_64 rng(cfg_.phaseSeed.value_or(cfg_.seed));
        // One phase per user domain; one per node in provider domains.
        domainPhase_.resize(net_.domains().size());
        for (std::size_t d = 0; d < net_.domains().size(); ++d)
            domainPhase_[d] = std::uniform_int_distribution<Nanos>(0, net_.domain(d).slot - 1)(rng);
        nodePhase_.resize(net_.nodes().size());
        for (std::size_t n = 0; n < net_.nodes().size(); ++n) {
            const auto& d = net_.domainOf(n);
            nodePhase_[n] = d.side == DomainSide::User
                                ? domainPhase_[net_.node(n).domain]
                                : std::uniform_int_distribution<Nanos>(0, d.slot - 1)(rng);
        }
    }

    SlotClock clockOf(NodeIndex n) const { return {net_.domainOf(n).slot, nodePhase_[n]}; }

    std::size_t portIndex(NodeIndex from, LinkIndex link)
    {
        auto key = std::make_pair(from, link);
        auto it = portIds_.find(key);
        if (it != portIds_.end()) return it->second;
        Port p;
        p.from = from;
        p.link = link;
        p.clock = clockOf(from);
        p.bandwidth = net_.link(link).bandwidth;
        p.slotCapacity = bitsSentFloor(p.bandwidth, p.clock.length);
        p.fifo = FifoPort(p.bandwidth, cfg_.bufferPackets);
        ports_.push_back(std::move(p));
        portIds_.emplace(key, ports_.size() - 1);
        return ports_.size() - 1;
    }

    void setupFlow(std::size_t f)
    {
        const auto& af = flows_[f];
        const auto& nodes = af.path.nodes;
        if (nodes.size() < 2) throw ValidationError("flow " + af.flow.id + " has no path");
        if (af.quotas.quota.size() != af.path.domainCount())
            throw ValidationError("flow " + af.flow.id + " lacks a quota for every domain");
        FlowStats fs;
        fs.id = af.flow.id;
        fs.bound = af.bound;
        stats_.flows.push_back(fs);

        std::size_t k = 0;
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            const auto link = net_.linkBetween(nodes[i], nodes[i + 1]);
            if (!link) throw ValidationError("flow " + af.flow.id + " path is disconnected");
            const bool ingress = i == 0 || net_.node(nodes[i - 1]).domain != net_.node(nodes[i]).domain;
            if (i > 0 && ingress) ++k;
            Port& port = ports_[portIndex(nodes[i], *link)];
            if (af.flow.gen)
                port.flowRate += static_cast<double>(af.flow.gen->packetSize) * 1e9 /
                                 static_cast<double>(af.flow.gen->period);
            port.reservedRate += static_cast<double>(bounds::quotaRate(af.quotas.quota[k], port.clock.length));
            if (ingress && cfg_.mode == Mode::Deterministic) {
                if (!port.shaper) port.shaper.emplace(port.clock, cfg_.shaperQueues);
                port.shaper->setQuota(f, af.quotas.quota[k]);
            }
        }
        if (af.flow.gen) {
            std::seed_seq seq{cfg_.seed, static_cast<std::uint64_t>(f), std::uint64_t{0x5eed}};
            std::mt19937_64 rng(seq);
            const Nanos first = std::uniform_int_distribution<Nanos>(0, af.flow.gen->period - 1)(rng);
            if (first < cfg_.duration) schedule(first, Kind::Generate, f);
        }
    }

    void setupBackground()
    {
        const auto& bg = cfg_.background;
        for (std::size_t i = 0; i < ports_.size(); ++i) {
            Port& p = ports_[i];
            std::seed_seq seq{cfg_.seed, static_cast<std::uint64_t>(i), std::uint64_t{0xb6}};
            p.rng.seed(seq);
            if (cfg_.mode == Mode::Deterministic) {
                // Background rides below the reserved slices at the residual rate.
                const double residual = std::max(static_cast<double>(p.bandwidth) - p.reservedRate,
                                                 static_cast<double>(p.bandwidth) / 100.0);
                p.fifo = FifoPort(static_cast<BitsPerSec>(residual), cfg_.bufferPackets);
            }
            if (bg.load <= 0) continue;
            p.bgRate = std::max(0.0, bg.load * static_cast<double>(p.bandwidth) - p.flowRate);
            if (p.bgRate <= 0) continue;
            const Nanos start = std::uniform_int_distribution<Nanos>(0, offMean(p))(p.rng);
            if (start < cfg_.duration) {
                p.burstLeft = bg.burstPackets;
                schedule(start, Kind::Background, i);
            }
        }
    }

    Nanos onDuration(const Port& p) const
    {
        const auto& bg = cfg_.background;
        return static_cast<Nanos>(static_cast<double>(bg.burstPackets * bg.packetSize) * 1e9 /
                                  (bg.burstRateFactor * static_cast<double>(p.bandwidth)));
    }

    Nanos offMean(const Port& p) const
    {
        const auto& bg = cfg_.background;
        const double cycle = static_cast<double>(bg.burstPackets * bg.packetSize) * 1e9 / p.bgRate;
        return std::max<Nanos>(1, static_cast<Nanos>(cycle) - onDuration(p));
    }

    void background(std::size_t i, Nanos t)
    {
        Port& p = ports_[i];
        const auto& bg = cfg_.background;
        ++stats_.backgroundPackets;
        if (auto done = p.fifo.transmit(t, bg.packetSize)) {
            p.carried += bg.packetSize;
            stats_.backgroundMaxDelay = std::max(stats_.backgroundMaxDelay, *done - t);
        } else {
            ++stats_.backgroundDrops;
        }
        Nanos next;
        if (--p.burstLeft > 0) {
            next = t + std::max<Nanos>(1, onDuration(p) / static_cast<Nanos>(bg.burstPackets));
        } else {
            std::exponential_distribution<double> off(1.0 / static_cast<double>(offMean(p)));
            next = t + 1 + static_cast<Nanos>(off(p.rng));
            p.burstLeft = bg.burstPackets;
        }
        if (next < cfg_.duration) schedule(next, Kind::Background, i);
    }

    std::size_t allocPacket()
    {
        if (!free_.empty()) {
            const std::size_t id = free_.back();
            free_.pop_back();
            return id;
        }
        packets_.emplace_back();
        return packets_.size() - 1;
    }

    void generate(std::size_t f, Nanos t)
    {
        const auto& af = flows_[f];
        const std::size_t id = allocPacket();
        Packet& p = packets_[id];
        p.flow = f;
        p.seq = acc_[f].nextSeq++;
        p.size = af.flow.gen->packetSize;
        p.createdAt = t;
        p.pos = 0;
        p.k = 0;
        p.cycleRef = t;
        p.stamps.assign(af.path.domainCount(), DomainStamp{});
        ++stats_.flows[f].generated;
        const Nanos next = t + af.flow.gen->period;
        if (next < cfg_.duration) schedule(next, Kind::Generate, f);
        arrive(id, t);
    }

    void drop(std::size_t id)
    {
        ++stats_.flows[packets_[id].flow].drops;
        free_.push_back(id);
    }

    void arrive(std::size_t id, Nanos t)
    {
        Packet& p = packets_[id];
        const auto& af = flows_[p.flow];
        const auto& nodes = af.path.nodes;
        const NodeIndex v = nodes[p.pos];
        const bool ingress = p.pos == 0 || net_.node(nodes[p.pos - 1]).domain != net_.node(v).domain;
        if (ingress) {
            if (p.pos > 0) ++p.k;
            p.stamps[p.k].ingress = t;
            p.stamps[p.k].release = t;
        }
        if (p.pos + 1 == nodes.size()) {
            deliver(id, t);
            return;
        }
        const LinkIndex link = *net_.linkBetween(v, nodes[p.pos + 1]);
        Port& port = ports_[portIndex(v, link)];
        Nanos depart = 0;
        if (cfg_.mode == Mode::BestEffort) {
            auto done = port.fifo.transmit(t, p.size);
            if (!done) {
                drop(id);
                return;
            }
            depart = *done;
        } else {
            SlotIndex s = 0;
            if (ingress) {
                const auto placed = port.shaper->enqueue(p.flow, p.size, t);
                if (!placed.accepted) {
                    ++stats_.flows[p.flow].shaperOverflows;
                    drop(id);
                    return;
                }
                s = placed.slot;
                p.stamps[p.k].release = port.clock.start(s);
                auto& fs = stats_.flows[p.flow];
                fs.maxOvershoot = std::max(fs.maxOvershoot, placed.overshoot);
            } else if (net_.domainOf(v).side == DomainSide::User) {
                s = forwardCQF(port.clock, t);
            } else {
                s = forwardSDF(port.clock, p.cycleRef);
            }
            depart = transmitInSlot(port, s, p.size, t);
            p.cycleRef = port.clock.end(s) - 1 + net_.link(link).propagation;
        }
        port.carried += p.size;
        if (net_.node(nodes[p.pos + 1]).domain != net_.node(v).domain) p.stamps[p.k].egress = depart;
        ++p.pos;
        schedule(depart + net_.link(link).propagation, Kind::Arrive, id);
    }

    // Idealized slot service: every packet assigned to a slot leaves within it,
    // in assignment order, at the link rate but never past the slot's last ns.
    Nanos transmitInSlot(Port& port, SlotIndex s, Bits size, Nanos now)
    {
        const SlotIndex current = port.clock.at(now);
        while (!port.slotBits.empty() && port.slotBits.begin()->first < current) port.slotBits.erase(port.slotBits.begin());
        Bits& cum = port.slotBits[s];
        const bool wasWithin = cum <= port.slotCapacity;
        cum += size;
        if (wasWithin && cum > port.slotCapacity) ++stats_.slotOverruns;
        const Nanos serial =
            static_cast<Nanos>((static_cast<__int128>(cum) * kNanosPerSecond + port.bandwidth - 1) / port.bandwidth);
        return port.clock.start(s) + std::min(serial, port.clock.length - 1);
    }

    void deliver(std::size_t id, Nanos t)
    {
        Packet& p = packets_[id];
        const auto& af = flows_[p.flow];
        auto& fs = stats_.flows[p.flow];
        auto& acc = acc_[p.flow];
        p.stamps[p.k].egress = t;
        const Nanos delay = t - p.createdAt;
        if (fs.delivered == 0 || delay < fs.minDelay) fs.minDelay = delay;
        fs.maxDelay = std::max(fs.maxDelay, delay);
        ++fs.delivered;
        acc.delaySum += delay;
        if (cfg_.mode == Mode::Deterministic) {
            if (delay > af.bound) ++fs.violations;
            for (std::size_t k = 0; k < p.stamps.size(); ++k) {
                const Nanos measured = p.stamps[k].egress - p.stamps[k].release;
                const Nanos allowed = bounds::transDelay(net_, af.path.segments[k]);
                fs.maxSegmentExcess = std::max(fs.maxSegmentExcess, measured - allowed);
            }
        }
        Nanos cross = 0;
        for (std::size_t k = 1; k < p.stamps.size(); ++k) cross += p.stamps[k].release - p.stamps[k - 1].egress;
        acc.crossSum += cross;
        if (cfg_.keepRecords && (!cfg_.recordFlow || *cfg_.recordFlow == p.flow))
            stats_.records.push_back({p.flow, p.seq, p.size, p.createdAt, t, p.stamps});
        free_.push_back(id);
    }

    void finish()
    {
        for (std::size_t f = 0; f < stats_.flows.size(); ++f) {
            auto& fs = stats_.flows[f];
            if (fs.delivered == 0) continue;
            fs.meanDelay = static_cast<double>(acc_[f].delaySum) / static_cast<double>(fs.delivered);
            fs.meanCrossDomainDelay = static_cast<double>(acc_[f].crossSum) / static_cast<double>(fs.delivered);
        }
        double sum = 0;
        std::size_t n = 0;
        for (const auto& p : ports_) {
            const double u = static_cast<double>(p.carried) * 1e9 /
                             (static_cast<double>(p.bandwidth) * static_cast<double>(cfg_.duration));
            sum += u;
            ++n;
            stats_.maxUtilization = std::max(stats_.maxUtilization, u);
        }
        stats_.meanUtilization = n ? sum / static_cast<double>(n) : 0.0;
    }

    const Network& net_;
    const std::vector<AdmittedFlow>& flows_;
    SimConfig cfg_;
    std::vector<FlowAccum> acc_;
    std::vector<Nanos> domainPhase_;
    std::vector<Nanos> nodePhase_;
    std::vector<Port> ports_;
    std::map<std::pair<NodeIndex, LinkIndex>, std::size_t> portIds_;
    std::vector<Packet> packets_;
    std::vector<std::size_t> free_;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
    std::uint64_t nextEvent_ = 0;
    SimStats stats_;
};

}  // namespace

SimStats runSimulation(const Network& net, const std::vector<AdmittedFlow>& flows, const SimConfig& config)
{
    Engine e(net, flows, config);
    return e.run();
}

}  // namespace detnet::simulator
