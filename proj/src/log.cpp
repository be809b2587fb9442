#include "propcal/log.hpp"

#include <iostream>
#include <mutex>

namespace propcal {

namespace {
std::mutex sink_mutex;
NoticeSink& sink() {
    static NoticeSink s = [](const std::string& m) { std::clog << "propcal: " << m << '\n'; };
    return s;
}
}  // namespace

void set_notice_sink(NoticeSink s) {
    std::lock_guard lock(sink_mutex);
    sink() = std::move(s);
}

void notice(const std::string& message) {
    std::lock_guard lock(sink_mutex);
    if (sink()) sink()(message);
}

}  // namespace propcal
