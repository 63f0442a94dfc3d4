#pragma once

// Min-plus network-calculus kernel over integer time (ns) and data (bits).
//
// Curves are cumulative, wide-sense increasing and pass through the origin.
// Every closed-form representation can be evaluated anywhere on t >= 0; a
// Sampled curve only on its own grid window. The grid operations in this
// header are exact brute-force routines and double as the oracle for the
// closed-form shortcuts in `curves::analytic`.

#include "detnet/units.hpp"

#include <variant>
#include <vector>

namespace detnet::curves {

struct GridConfig {
    Nanos gridStep = kMicrosecond;
    Nanos horizon = 4 * kMillisecond;

    std::size_t points() const { return static_cast<std::size_t>(horizon / gridStep) + 1; }
    void validate() const;
    bool operator==(const GridConfig&) const = default;
};

/// r*t + b for t > 0. TokenBucket(0, kInfiniteBits) is the min-plus identity.
struct TokenBucket {
    BitsPerSec rate = 0;
    Bits burst = 0;
};

/// R * max(0, t - T). Rate products round down.
struct RateLatency {
    BitsPerSec rate = 0;
    Nanos latency = 0;
};

/// step * ceil((t + offset) / interval) for t > 0.
struct Staircase {
    Bits step = 0;
    Nanos interval = 1;
    Nanos offset = 0;
};

/// Staircase min-plus convolved with the line lineRate * t. This is the output
/// envelope of a slotted shaper seen through a link of finite rate.
/// lineRate == kUnlimitedRate leaves the staircase untouched.
struct RateCappedStaircase {
    Staircase stair;
    BitsPerSec lineRate = kUnlimitedRate;
};

struct Sampled {
    Nanos gridStep = 1;
    Nanos horizon = 0;
    std::vector<Bits> values;
};

class Curve;

struct PointwiseMin {
    std::vector<Curve> members;
};

class Curve {
public:
    using Representation =
        std::variant<TokenBucket, RateLatency, Staircase, RateCappedStaircase, PointwiseMin, Sampled>;

    Curve(TokenBucket c);
    Curve(RateLatency c);
    Curve(Staircase c);
    Curve(RateCappedStaircase c);
    Curve(PointwiseMin c);
    Curve(Sampled c);

    const Representation& representation() const { return rep_; }

    template <typename T>
    const T* as() const { return std::get_if<T>(&rep_); }

    bool isSampled() const { return as<Sampled>() != nullptr; }

    /// c(t). Throws OutOfRange for a Sampled curve outside [0, horizon].
    Bits operator()(Nanos t) const;

    /// The zero-delay element: 0 at t = 0, +infinity after.
    static Curve identity() { return TokenBucket{0, kInfiniteBits}; }
    /// The rate line r*t, rounded up.
    static Curve line(BitsPerSec rate) { return TokenBucket{rate, 0}; }
    static Curve zero() { return RateLatency{0, 0}; }

private:
    Representation rep_;
};

Bits evaluate(const Curve& c, Nanos t);

/// values[k] = c(k * gridStep), k = 0 .. horizon / gridStep.
Curve sample(const Curve& c, const GridConfig& grid);

/// Brute-force (f ⊗ g)(t) = min_{0 <= s <= t, s on grid} f(s) + g(t - s). O(T^2).
/// Throws ValidationError when a Sampled operand lives on a different grid.
Curve minPlusConvolve(const Curve& f, const Curve& g, const GridConfig& grid);

/// max_t min{d >= 0 : alpha(t) <= beta(t + d)}, with t and d on the grid (d is
/// rounded up to a whole grid step). beta may be probed up to twice the horizon
/// when it has a closed form. Throws UnboundedDelay when beta never catches up.
Nanos horizontalDeviation(const Curve& alpha, const Curve& beta, const GridConfig& grid);

/// max_t alpha(t) - (alpha ⊗ beta)(t) on the grid: the backlog-style reading.
Bits verticalDeviation(const Curve& alpha, const Curve& beta, const GridConfig& grid);

/// Closed-form shortcuts, each checked against the grid routines above.
namespace analytic {

/// (TokenBucket ⊗ RateLatency)(t): 0 up to T, then min(R(t-T), r(t-T) + b).
Bits tokenBucketThroughRateLatency(const TokenBucket& tb, const RateLatency& rl, Nanos t);

/// T + b/R for R >= r, rounded up to the next ns. Throws UnboundedDelay if r > R.
Nanos horizontalDeviation(const TokenBucket& alpha, const RateLatency& beta);

/// Horizontal deviation of a rate-capped staircase against a rate-latency curve,
/// searched over t in (0, horizon].
Nanos horizontalDeviation(const RateCappedStaircase& alpha, const RateLatency& beta, Nanos horizon);

/// b + r*T for R >= r. Throws UnboundedDelay if r > R.
Bits verticalDeviation(const TokenBucket& alpha, const RateLatency& beta);

}  // namespace analytic

}  // namespace detnet::curves
