#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>

namespace agri {

/// UTC seconds since the Unix epoch.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerHour = 3600;
inline constexpr Timestamp kSecondsPerDay = 86400;

/// "YYYY-MM-DD" for the UTC day containing ts.
std::string format_date(Timestamp ts);
/// Midnight UTC of a "YYYY-MM-DD" date. Throws std::invalid_argument on bad input.
Timestamp parse_date(std::string_view date);
/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(Timestamp ts);

/// Minutes after local midnight for a "HH:MM" string. Throws std::invalid_argument.
int parse_time_of_day(std::string_view hhmm);

/// Wall clock and sleeper used for retry backoff and time budgets. The
/// virtual implementation lets tests inject delays without waiting.
class TimeSource {
  public:
    virtual ~TimeSource() = default;
    /// Monotonic seconds.
    [[nodiscard]] virtual double now() const = 0;
    virtual void sleep(double seconds) = 0;
};

class RealTimeSource final : public TimeSource {
  public:
    [[nodiscard]] double now() const override {
        using namespace std::chrono;
        return duration<double>(steady_clock::now().time_since_epoch()).count();
    }
    void sleep(double seconds) override;
};

class VirtualTimeSource final : public TimeSource {
  public:
    explicit VirtualTimeSource(double start = 0.0) : now_(start) {}
    [[nodiscard]] double now() const override {
        std::lock_guard lock(mu_);
        return now_;
    }
    void sleep(double seconds) override { advance(seconds); }
    void advance(double seconds) {
        std::lock_guard lock(mu_);
        now_ += seconds;
    }

  private:
    mutable std::mutex mu_;
    double now_;
};

} // namespace agri
