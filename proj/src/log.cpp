#include "detnet/log.hpp"

#include <iostream>
#include <mutex>

namespace detnet::log {

namespace {

std::mutex mu;

Sink& current()
{
    static Sink sink = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
    return sink;
}

}  // namespace

Sink setWarningSink(Sink sink)
{
    std::lock_guard lock(mu);
    std::swap(current(), sink);
    return sink;
}

void warn(const std::string& message)
{
    std::lock_guard lock(mu);
    if (current()) current()(message);
}

}  // namespace detnet::log
