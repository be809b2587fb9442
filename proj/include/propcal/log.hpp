#pragma once

#include <functional>
#include <string>

namespace propcal {

/// Informational messages (warnings, approximation notices). The default sink
/// writes to std::clog; tests and the CLI replace it.
using NoticeSink = std::function<void(const std::string&)>;

void set_notice_sink(NoticeSink sink);
void notice(const std::string& message);

}  // namespace propcal
