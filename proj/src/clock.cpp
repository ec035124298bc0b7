#include "troika/clock.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>

namespace troika {

std::string Clock::iso_timestamp() const {
    // Simulated runs stamp events relative to the Unix epoch so replay logs
    // are deterministic; real runs stamp actual UTC time.
    double seconds = now();
    std::time_t whole = static_cast<std::time_t>(std::floor(seconds));
    std::tm tm_utc{};
    gmtime_r(&whole, &tm_utc);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm_utc.tm_year + 1900,
                  tm_utc.tm_mon + 1, tm_utc.tm_mday, tm_utc.tm_hour, tm_utc.tm_min,
                  tm_utc.tm_sec);
    return buf;
}

double SystemClock::now() const {
    auto tp = std::chrono::system_clock::now().time_since_epoch();
    return std::chrono::duration<double>(tp).count();
}

void SimulatedClock::advance(double seconds) {
    if (seconds > 0) now_ += seconds;
}

std::unique_ptr<Clock> make_clock(bool simulated, double start_seconds) {
    if (simulated) return std::make_unique<SimulatedClock>(start_seconds);
    return std::make_unique<SystemClock>();
}

} // namespace troika
