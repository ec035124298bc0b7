#pragma once

#include <memory>
#include <string>

namespace troika {

/// Time source for dispatch accounting and event timestamps. The simulated
/// variant lets replays and simulations run in milliseconds while still
/// exercising budget and grace arithmetic.
class Clock {
public:
    virtual ~Clock() = default;

    /// Seconds since the clock's epoch. Monotonic within a run.
    virtual double now() const = 0;

    /// Advance simulated time. No-op on the real clock.
    virtual void advance(double /*seconds*/) {}

    virtual bool simulated() const = 0;

    /// ISO-8601 UTC timestamp for event-log lines.
    std::string iso_timestamp() const;
};

class SystemClock final : public Clock {
public:
    double now() const override;
    bool simulated() const override { return false; }
};

class SimulatedClock final : public Clock {
public:
    explicit SimulatedClock(double start_seconds = 0.0) : now_(start_seconds) {}
    double now() const override { return now_; }
    void advance(double seconds) override;
    bool simulated() const override { return true; }

private:
    double now_;
};

std::unique_ptr<Clock> make_clock(bool simulated, double start_seconds = 0.0);

} // namespace troika
