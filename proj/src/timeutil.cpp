#include "aircast/timeutil.hpp"

#include <cstdio>
#include <ctime>

#include "aircast/errors.hpp"

namespace aircast {

std::int64_t parse_iso8601(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char zone = '\0';
    const int n = std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &s, &zone);
    if (n < 6 || (n == 7 && zone != 'Z')) {
        throw ParseError("timestamp '" + text + "' is not ISO-8601 UTC (YYYY-MM-DDTHH:MM:SSZ)");
    }
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = s;
    const time_t t = timegm(&tm);
    if (t == static_cast<time_t>(-1)) {
        throw ParseError("timestamp '" + text + "' out of range");
    }
    return static_cast<std::int64_t>(t);
}

std::string format_iso8601(std::int64_t unix_seconds) {
    const time_t t = static_cast<time_t>(unix_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

double hour_of_day(std::int64_t unix_seconds) {
    std::int64_t sec = unix_seconds % 86400;
    if (sec < 0) sec += 86400;
    return static_cast<double>(sec) / 3600.0;
}

int day_of_week(std::int64_t unix_seconds) {
    std::int64_t days = unix_seconds / 86400;
    if (unix_seconds % 86400 < 0) --days;
    // epoch day zero was a Thursday
    return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

}  // namespace aircast
