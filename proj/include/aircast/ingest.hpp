#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aircast/records.hpp"

namespace aircast::ingest {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
    GeoPoint(double lat_deg, double lon_deg);
};

// great-circle distance in metres
double haversine_m(const GeoPoint& a, const GeoPoint& b);

// One environmental observation. Air-quality fetches fill the pollutant
// block, weather fetches the weather block; a merged stream may carry both.
struct EnvSample {
    std::int64_t timestamp = 0;
    double lat = 0.0;
    double lon = 0.0;

    std::optional<double> co, no, no2, o3, so2, pm2_5, pm10, nh3;
    std::optional<double> temp, feels_like, pressure, humidity, dew_point, clouds, wind_speed,
        wind_deg, wind_gust;  // temperatures already in degC
};

struct TimeRange {
    std::int64_t start = 0;  // unix seconds, inclusive
    std::int64_t end = 0;
};

struct RetryPolicy {
    std::size_t max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};  // doubles per attempt
};

struct ApiConfig {
    std::string base_url = "http://api.openweathermap.org";
    std::string api_key_env = "OPENWEATHER_API_KEY";  // key never lives in config files
    std::chrono::milliseconds timeout{5000};
    RetryPolicy retry;
    std::filesystem::path fixture_dir;  // non-empty switches to offline fixtures
    std::size_t requests_per_minute = 60;
};

// payload parsers, shared by live and fixture mode
std::vector<EnvSample> parse_air_pollution_payload(const std::string& json_text,
                                                   const GeoPoint& point);
std::vector<EnvSample> parse_weather_payload(const std::string& json_text,
                                             const GeoPoint& point);

class EnvClient {
public:
    explicit EnvClient(ApiConfig config);

    bool fixture_mode() const { return !config_.fixture_dir.empty(); }

    std::vector<EnvSample> fetch_air_quality(const GeoPoint& point, const TimeRange& range);
    std::vector<EnvSample> fetch_weather(const GeoPoint& point, const TimeRange& range);

    // "<kind>/lat51.5000_lon-0.1200_start...._end....json" under the fixture root
    static std::string fixture_name(const std::string& kind, const GeoPoint& point,
                                    const TimeRange& range);

private:
    std::string fetch_payload(const std::string& kind, const std::string& api_path,
                              const GeoPoint& point, const TimeRange& range);
    void rate_limit();

    ApiConfig config_;
    std::string api_key_;
    std::chrono::steady_clock::time_point last_request_;
    bool any_request_ = false;
};

struct JoinStats {
    std::size_t matched = 0;
    std::size_t unmatched = 0;
};

// Each record takes the fields of the sample closest in time among samples
// within max_distance_m and max_dt_seconds; ties resolve to the earlier
// sample. Records with no candidate are flagged, never dropped.
JoinStats geo_temporal_join(std::vector<RawRecord>& records,
                            const std::vector<EnvSample>& samples,
                            double max_distance_m = 200.0, std::int64_t max_dt_seconds = 1800);

void write_env_csv(const std::filesystem::path& path, const std::vector<EnvSample>& samples);

}  // namespace aircast::ingest
