#include "agri/timeutil.hpp"

#include <charconv>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace agri {

namespace {

using namespace std::chrono;

int parse_int(std::string_view s, std::string_view whole) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument(fmt::format("malformed time value '{}'", whole));
    }
    return value;
}

} // namespace

std::string format_date(Timestamp ts) {
    auto days = floor<std::chrono::days>(sys_seconds{seconds{ts}});
    year_month_day ymd{days};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

Timestamp parse_date(std::string_view date) {
    if (date.size() != 10 || date[4] != '-' || date[7] != '-') {
        throw std::invalid_argument(fmt::format("malformed date '{}'", date));
    }
    year_month_day ymd{year{parse_int(date.substr(0, 4), date)},
                       month{static_cast<unsigned>(parse_int(date.substr(5, 2), date))},
                       day{static_cast<unsigned>(parse_int(date.substr(8, 2), date))}};
    if (!ymd.ok()) {
        throw std::invalid_argument(fmt::format("invalid calendar date '{}'", date));
    }
    return sys_days{ymd}.time_since_epoch().count() * kSecondsPerDay;
}

std::string format_iso8601(Timestamp ts) {
    auto day_start = floor<std::chrono::days>(sys_seconds{seconds{ts}});
    auto rem = ts - duration_cast<seconds>(day_start.time_since_epoch()).count();
    return fmt::format("{}T{:02d}:{:02d}:{:02d}Z", format_date(ts), rem / 3600, (rem / 60) % 60, rem % 60);
}

int parse_time_of_day(std::string_view hhmm) {
    if (hhmm.size() != 5 || hhmm[2] != ':') {
        throw std::invalid_argument(fmt::format("malformed time of day '{}'", hhmm));
    }
    int h = parse_int(hhmm.substr(0, 2), hhmm);
    int m = parse_int(hhmm.substr(3, 2), hhmm);
    if (h < 0 || h > 23 || m < 0 || m > 59) {
        throw std::invalid_argument(fmt::format("time of day out of range '{}'", hhmm));
    }
    return h * 60 + m;
}

void RealTimeSource::sleep(double seconds) {
    if (seconds > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
}

} // namespace agri
