#include "detnet/curves.hpp"

#include <algorithm>
#include <string>

namespace detnet::curves {

void GridConfig::validate() const
{
    if (gridStep < 1) throw ValidationError("grid step must be at least 1 ns");
    if (horizon <= 0 || horizon % gridStep != 0)
        throw ValidationError("grid horizon must be a positive multiple of the grid step");
}

Curve::Curve(TokenBucket c) : rep_(c)
{
    if (c.rate < 0 || c.burst < 0) throw ValidationError("token bucket parameters must be nonnegative");
}

Curve::Curve(RateLatency c) : rep_(c)
{
    if (c.rate < 0 || c.latency < 0) throw ValidationError("rate-latency parameters must be nonnegative");
}

Curve::Curve(Staircase c) : rep_(c)
{
    if (c.step < 0 || c.interval <= 0 || c.offset < 0) throw ValidationError("invalid staircase");
}

Curve::Curve(RateCappedStaircase c) : rep_(c)
{
    if (c.stair.step < 0 || c.stair.interval <= 0 || c.stair.offset < 0 || c.lineRate < 0)
        throw ValidationError("invalid rate-capped staircase");
}

Curve::Curve(PointwiseMin c) : rep_(std::move(c))
{
    if (std::get<PointwiseMin>(rep_).members.empty()) throw ValidationError("pointwise minimum of nothing");
}

Curve::Curve(Sampled c) : rep_(std::move(c))
{
    const auto& s = std::get<Sampled>(rep_);
    GridConfig{s.gridStep, s.horizon}.validate();
    if (s.values.size() != static_cast<std::size_t>(s.horizon / s.gridStep) + 1)
        throw ValidationError("sampled curve has the wrong number of points");
    if (!s.values.empty() && s.values.front() < 0) throw ValidationError("sampled curve is negative");
    if (!std::is_sorted(s.values.begin(), s.values.end()))
        throw ValidationError("sampled curve is not nondecreasing");
}

namespace {

Bits staircaseAt(const Staircase& s, Nanos t)
{
    if (t <= 0) return 0;
    __int128 v = static_cast<__int128>(s.step) * ceilDiv(t + s.offset, s.interval);
    return v >= kInfiniteBits ? kInfiniteBits : static_cast<Bits>(v);
}

Bits rateCappedStaircaseAt(const RateCappedStaircase& c, Nanos t)
{
    if (t <= 0) return 0;
    const auto& s = c.stair;
    // Plateau m covers (m*tau - o, (m+1)*tau - o] at level step*(m+1).
    const std::int64_t m0 = s.offset / s.interval;
    const std::int64_t mc = ceilDiv(t + s.offset, s.interval) - 1;
    Bits best = staircaseAt(s, t);
    if (c.lineRate == kUnlimitedRate) return best;
    best = std::min(best, bitsSentCeil(c.lineRate, t));
    auto completed = [&](std::int64_t m) {
        const Nanos right = (m + 1) * s.interval - s.offset;
        return saturatingAdd(s.step * (m + 1), bitsSentCeil(c.lineRate, t - right));
    };
    if (mc - 1 >= m0) {
        best = std::min(best, completed(m0));
        best = std::min(best, completed(mc - 1));
    }
    return best;
}

Bits sampledAt(const Sampled& s, Nanos t)
{
    if (t < 0 || t > s.horizon)
        throw OutOfRange("t = " + std::to_string(t) + " ns is outside the sampled horizon");
    return s.values[static_cast<std::size_t>(ceilDiv(t, s.gridStep))];
}

}  // namespace

Bits evaluate(const Curve& c, Nanos t)
{
    if (t < 0) throw OutOfRange("negative time");
    return std::visit(
        [t](const auto& rep) -> Bits {
            using T = std::decay_t<decltype(rep)>;
            if constexpr (std::is_same_v<T, TokenBucket>) {
                if (t == 0) return 0;
                return saturatingAdd(bitsSentCeil(rep.rate, t), rep.burst);
            } else if constexpr (std::is_same_v<T, RateLatency>) {
                if (t <= rep.latency) return 0;
                return bitsSentFloor(rep.rate, t - rep.latency);
            } else if constexpr (std::is_same_v<T, Staircase>) {
                return staircaseAt(rep, t);
            } else if constexpr (std::is_same_v<T, RateCappedStaircase>) {
                return rateCappedStaircaseAt(rep, t);
            } else if constexpr (std::is_same_v<T, PointwiseMin>) {
                Bits best = kInfiniteBits;
                for (const auto& m : rep.members) best = std::min(best, evaluate(m, t));
                return best;
            } else {
                return sampledAt(rep, t);
            }
        },
        c.representation());
}

Bits Curve::operator()(Nanos t) const { return evaluate(*this, t); }

namespace {

void requireGrid(const Curve& c, const GridConfig& grid)
{
    if (const auto* s = c.as<Sampled>()) {
        if (s->gridStep != grid.gridStep || s->horizon < grid.horizon)
            throw ValidationError("sampled curve does not match the analysis grid");
    }
}

std::vector<Bits> sampleValues(const Curve& c, const GridConfig& grid)
{
    std::vector<Bits> v(grid.points());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = evaluate(c, static_cast<Nanos>(k) * grid.gridStep);
    return v;
}

}  // namespace

Curve sample(const Curve& c, const GridConfig& grid)
{
    grid.validate();
    requireGrid(c, grid);
    return Sampled{grid.gridStep, grid.horizon, sampleValues(c, grid)};
}

Curve minPlusConvolve(const Curve& f, const Curve& g, const GridConfig& grid)
{
    grid.validate();
    requireGrid(f, grid);
    requireGrid(g, grid);
    const auto fv = sampleValues(f, grid);
    const auto gv = sampleValues(g, grid);
    std::vector<Bits> out(fv.size(), kInfiniteBits);
    for (std::size_t t = 0; t < out.size(); ++t) {
        Bits best = kInfiniteBits;
        for (std::size_t s = 0; s <= t; ++s) best = std::min(best, saturatingAdd(fv[s], gv[t - s]));
        out[t] = best;
    }
    return Sampled{grid.gridStep, grid.horizon, std::move(out)};
}

Nanos horizontalDeviation(const Curve& alpha, const Curve& beta, const GridConfig& grid)
{
    grid.validate();
    requireGrid(alpha, grid);
    requireGrid(beta, grid);
    const auto av = sampleValues(alpha, grid);

    Nanos probeLimit = 2 * grid.horizon;
    if (const auto* s = beta.as<Sampled>()) probeLimit = s->horizon;
    const auto maxIndex = static_cast<std::size_t>(probeLimit / grid.gridStep);

    std::vector<Bits> bv;
    auto betaAt = [&](std::size_t k) {
        while (bv.size() <= k) bv.push_back(evaluate(beta, static_cast<Nanos>(bv.size()) * grid.gridStep));
        return bv[k];
    };

    // Both curves are nondecreasing, so the catch-up index only moves forward.
    std::size_t u = 0;
    Nanos worst = 0;
    for (std::size_t k = 0; k < av.size(); ++k) {
        u = std::max(u, k);
        while (betaAt(u) < av[k]) {
            if (++u > maxIndex)
                throw UnboundedDelay("service curve never catches the arrival curve within the horizon");
        }
        worst = std::max(worst, static_cast<Nanos>(u - k) * grid.gridStep);
    }
    return worst;
}

Bits verticalDeviation(const Curve& alpha, const Curve& beta, const GridConfig& grid)
{
    const auto conv = minPlusConvolve(alpha, beta, grid);
    const auto& cv = conv.as<Sampled>()->values;
    const auto av = sampleValues(alpha, grid);
    Bits worst = 0;
    for (std::size_t k = 0; k < av.size(); ++k) worst = std::max(worst, av[k] - cv[k]);
    return worst;
}

namespace analytic {

Bits tokenBucketThroughRateLatency(const TokenBucket& tb, const RateLatency& rl, Nanos t)
{
    if (t <= rl.latency) return 0;
    const Nanos u = t - rl.latency;
    return std::min(bitsSentFloor(rl.rate, u), saturatingAdd(bitsSentCeil(tb.rate, u), tb.burst));
}

Nanos horizontalDeviation(const TokenBucket& alpha, const RateLatency& beta)
{
    if (alpha.rate == 0 && alpha.burst == 0) return 0;
    if (beta.rate == kUnlimitedRate) return beta.latency;
    if (beta.rate == 0 || alpha.rate > beta.rate)
        throw UnboundedDelay("service rate is below the sustained arrival rate");
    const __int128 num = static_cast<__int128>(alpha.burst) * kNanosPerSecond;
    return beta.latency + static_cast<Nanos>((num + beta.rate - 1) / beta.rate);
}

Nanos horizontalDeviation(const RateCappedStaircase& alpha, const RateLatency& beta, Nanos horizon)
{
    const auto& s = alpha.stair;
    if (s.step == 0) return 0;
    const BitsPerSec R = beta.rate;
    const BitsPerSec W = alpha.lineRate;
    const bool unlimitedLine = (W == kUnlimitedRate);
    if (R == kUnlimitedRate) return beta.latency;
    if (R == 0) throw UnboundedDelay("zero service rate");

    // Sustained rate min(W, step/interval) must not exceed R.
    const __int128 stairRateNum = static_cast<__int128>(s.step) * kNanosPerSecond;  // over interval
    const bool stairTooFast = stairRateNum > static_cast<__int128>(R) * s.interval;
    if (stairTooFast && (unlimitedLine || W > R))
        throw UnboundedDelay("shaped arrival rate exceeds the service rate");
    if (!unlimitedLine && W <= R) return beta.latency;

    // Exact rational search: every time value is scaled by D = R * W (or R alone
    // for an unlimited line). The sup of alpha(t)/R - t sits at plateau starts.
    const __int128 D = unlimitedLine ? static_cast<__int128>(R) : static_cast<__int128>(R) * W;
    auto scaledTime = [&](Nanos t) { return static_cast<__int128>(t) * D; };
    auto lineTime = [&](Bits bits) -> __int128 {  // bits / W, scaled
        if (unlimitedLine) return 0;
        return static_cast<__int128>(bits) * kNanosPerSecond * R;
    };
    auto serviceTime = [&](Bits bits) -> __int128 {  // bits / R, scaled
        return static_cast<__int128>(bits) * kNanosPerSecond * (unlimitedLine ? 1 : W);
    };

    const std::int64_t m0 = s.offset / s.interval;
    auto left = [&](std::int64_t m) { return std::max<Nanos>(0, m * s.interval - s.offset); };
    auto right = [&](std::int64_t m) { return (m + 1) * s.interval - s.offset; };
    auto level = [&](std::int64_t m) { return s.step * (m + 1); };
    const bool decaying = !stairTooFast;  // step/R <= interval

    __int128 best = 0;
    for (std::int64_t j = m0; left(j) <= horizon; ++j) {
        const Bits v = level(j);
        __int128 start = std::max(scaledTime(left(j)), lineTime(v));
        __int128 periodic = -1;
        if (j > m0) {
            start = std::max(start, scaledTime(right(m0)) + lineTime(v - level(m0)));
            periodic = scaledTime(right(j - 1)) + lineTime(s.step);
            start = std::max(start, periodic);
        }
        if (start <= scaledTime(right(j))) best = std::max(best, serviceTime(v) - start);
        if (j > m0 + 1 && decaying && start == periodic) break;
    }
    return beta.latency + static_cast<Nanos>((best + D - 1) / D);
}

Bits verticalDeviation(const TokenBucket& alpha, const RateLatency& beta)
{
    if (beta.rate != kUnlimitedRate && alpha.rate > beta.rate)
        throw UnboundedDelay("backlog grows without bound");
    return saturatingAdd(alpha.burst, bitsSentCeil(alpha.rate, beta.latency));
}

}  // namespace analytic

}  // namespace detnet::curves
