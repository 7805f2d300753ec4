#pragma once

#include <cstdint>
#include <string>

namespace aircast {

// "2024-06-03T14:00:00Z" -> unix seconds; UTC only
std::int64_t parse_iso8601(const std::string& text);
std::string format_iso8601(std::int64_t unix_seconds);

// hour of day including the minute/second fraction, in [0, 24)
double hour_of_day(std::int64_t unix_seconds);
// 0 = Monday ... 6 = Sunday
int day_of_week(std::int64_t unix_seconds);

}  // namespace aircast
