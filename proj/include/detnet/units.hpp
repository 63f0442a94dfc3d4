#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace detnet {

// Time is integer nanoseconds, data is integer bits, rates are bits per second.
using Nanos = std::int64_t;
using Bits = std::int64_t;
using BitsPerSec = std::int64_t;

inline constexpr Nanos kNanosPerSecond = 1'000'000'000;
inline constexpr Nanos kMicrosecond = 1'000;
inline constexpr Nanos kMillisecond = 1'000'000;
inline constexpr BitsPerSec kMbps = 1'000'000;
inline constexpr BitsPerSec kGbps = 1'000'000'000;

// Saturation value standing in for +infinity in curve arithmetic.
inline constexpr Bits kInfiniteBits = std::numeric_limits<Bits>::max() / 4;
inline constexpr BitsPerSec kUnlimitedRate = std::numeric_limits<BitsPerSec>::max();

inline Bits saturatingAdd(Bits a, Bits b)
{
    if (a >= kInfiniteBits || b >= kInfiniteBits) return kInfiniteBits;
    Bits s = a + b;
    return s >= kInfiniteBits ? kInfiniteBits : s;
}

// rate * t / 1e9, rounded up (arrival-side products).
inline Bits bitsSentCeil(BitsPerSec rate, Nanos t)
{
    if (rate == kUnlimitedRate) return t > 0 ? kInfiniteBits : 0;
    __int128 num = static_cast<__int128>(rate) * t;
    __int128 q = (num + kNanosPerSecond - 1) / kNanosPerSecond;
    return q >= kInfiniteBits ? kInfiniteBits : static_cast<Bits>(q);
}

// rate * t / 1e9, rounded down (service-side products).
inline Bits bitsSentFloor(BitsPerSec rate, Nanos t)
{
    if (rate == kUnlimitedRate) return t > 0 ? kInfiniteBits : 0;
    __int128 q = static_cast<__int128>(rate) * t / kNanosPerSecond;
    return q >= kInfiniteBits ? kInfiniteBits : static_cast<Bits>(q);
}

inline std::int64_t ceilDiv(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) == (b < 0))) ? q + 1 : q;
}

inline std::int64_t floorDiv(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

inline double toMbps(double bitsPerSec) { return bitsPerSec / static_cast<double>(kMbps); }

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A configuration or document failed validation.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Service never catches up with arrivals: the reservation cannot bound delay.
class UnboundedDelay : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

// A safety invariant (link capacity, bound soundness) failed at run time.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

}  // namespace detnet
