#pragma once

#include <functional>
#include <string>

namespace detnet::log {

using Sink = std::function<void(const std::string&)>;

/// Replaces the warning sink and returns the previous one. The default writes to stderr.
Sink setWarningSink(Sink sink);
void warn(const std::string& message);

}  // namespace detnet::log
