#include "aircast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "aircast/csv.hpp"
#include "aircast/errors.hpp"
#include "aircast/timeutil.hpp"

namespace aircast::ingest {

using json = nlohmann::json;

GeoPoint::GeoPoint(double lat_deg, double lon_deg) : lat(lat_deg), lon(lon_deg) {
    if (lat < -90.0 || lat > 90.0) {
        throw ValidationError("latitude " + std::to_string(lat) + " outside [-90, 90]");
    }
    if (lon < -180.0 || lon > 180.0) {
        throw ValidationError("longitude " + std::to_string(lon) + " outside [-180, 180]");
    }
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
    constexpr double kEarthRadiusM = 6371000.0;
    const double phi1 = a.lat * M_PI / 180.0;
    const double phi2 = b.lat * M_PI / 180.0;
    const double dphi = (b.lat - a.lat) * M_PI / 180.0;
    const double dlam = (b.lon - a.lon) * M_PI / 180.0;
    const double s = std::sin(dphi / 2.0) * std::sin(dphi / 2.0) +
                     std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2.0) *
                         std::sin(dlam / 2.0);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

// ---------------------------------------------------------------------------
// payload parsing
// ---------------------------------------------------------------------------

namespace {

double require_number(const json& obj, const char* field, const char* context) {
    if (!obj.contains(field)) {
        throw ParseError(std::string(context) + ": missing field '" + field + "'");
    }
    const json& v = obj.at(field);
    if (!v.is_number()) {
        throw ParseError(std::string(context) + ": field '" + field + "' is not a number");
    }
    return v.get<double>();
}

double require_concentration(const json& obj, const char* field, const char* context) {
    const double v = require_number(obj, field, context);
    if (v < 0.0) {
        throw ValidationError(std::string(context) + ": field '" + field +
                              "' has negative concentration " + std::to_string(v));
    }
    return v;
}

json parse_payload_json(const std::string& text, const char* context) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string(context) + ": malformed JSON: " + e.what());
    }
}

constexpr double kKelvinOffset = 273.15;

}  // namespace

std::vector<EnvSample> parse_air_pollution_payload(const std::string& json_text,
                                                   const GeoPoint& point) {
    const json doc = parse_payload_json(json_text, "air_pollution payload");
    if (!doc.contains("list") || !doc.at("list").is_array()) {
        throw ParseError("air_pollution payload: missing field 'list'");
    }
    std::vector<EnvSample> samples;
    for (const json& entry : doc.at("list")) {
        EnvSample s;
        s.timestamp = static_cast<std::int64_t>(require_number(entry, "dt", "air_pollution entry"));
        s.lat = point.lat;
        s.lon = point.lon;
        if (!entry.contains("components") || !entry.at("components").is_object() ||
            entry.at("components").empty()) {
            throw ParseError("air_pollution entry: missing field 'components'");
        }
        const json& c = entry.at("components");
        s.co = require_concentration(c, "co", "air_pollution components");
        s.no = require_concentration(c, "no", "air_pollution components");
        s.no2 = require_concentration(c, "no2", "air_pollution components");
        s.o3 = require_concentration(c, "o3", "air_pollution components");
        s.so2 = require_concentration(c, "so2", "air_pollution components");
        s.pm2_5 = require_concentration(c, "pm2_5", "air_pollution components");
        s.pm10 = require_concentration(c, "pm10", "air_pollution components");
        s.nh3 = require_concentration(c, "nh3", "air_pollution components");
        samples.push_back(std::move(s));
    }
    std::sort(samples.begin(), samples.end(),
              [](const EnvSample& a, const EnvSample& b) { return a.timestamp < b.timestamp; });
    return samples;
}

std::vector<EnvSample> parse_weather_payload(const std::string& json_text,
                                             const GeoPoint& point) {
    const json doc = parse_payload_json(json_text, "weather payload");
    if (!doc.contains("data") || !doc.at("data").is_array()) {
        throw ParseError("weather payload: missing field 'data'");
    }
    std::vector<EnvSample> samples;
    for (const json& entry : doc.at("data")) {
        EnvSample s;
        s.timestamp = static_cast<std::int64_t>(require_number(entry, "dt", "weather entry"));
        s.lat = point.lat;
        s.lon = point.lon;
        // provider temperatures are Kelvin; everything downstream runs in degC
        s.temp = require_number(entry, "temp", "weather entry") - kKelvinOffset;
        s.feels_like = require_number(entry, "feels_like", "weather entry") - kKelvinOffset;
        s.pressure = require_number(entry, "pressure", "weather entry");
        const double humidity = require_number(entry, "humidity", "weather entry");
        if (humidity < 0.0 || humidity > 100.0) {
            throw ValidationError("weather entry: field 'humidity' value " +
                                  std::to_string(humidity) + " outside [0, 100]");
        }
        s.humidity = humidity;
        s.dew_point = require_number(entry, "dew_point", "weather entry") - kKelvinOffset;
        s.clouds = require_number(entry, "clouds", "weather entry");
        s.wind_speed = require_number(entry, "wind_speed", "weather entry");
        s.wind_deg = require_number(entry, "wind_deg", "weather entry");
        if (entry.contains("wind_gust")) {
            s.wind_gust = require_number(entry, "wind_gust", "weather entry");
        }
        samples.push_back(std::move(s));
    }
    std::sort(samples.begin(), samples.end(),
              [](const EnvSample& a, const EnvSample& b) { return a.timestamp < b.timestamp; });
    return samples;
}

// ---------------------------------------------------------------------------
// client
// ---------------------------------------------------------------------------

EnvClient::EnvClient(ApiConfig config) : config_(std::move(config)) {
    if (config_.requests_per_minute < 1) {
        throw ConfigError("ingest: requests_per_minute must be >= 1");
    }
    if (!fixture_mode()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key) {
            throw CredentialError("ingest: environment variable " + config_.api_key_env +
                                  " is not set");
        }
        api_key_ = key;
    }
}

std::string EnvClient::fixture_name(const std::string& kind, const GeoPoint& point,
                                    const TimeRange& range) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s/lat%.4f_lon%.4f_start%lld_end%lld.json", kind.c_str(),
                  point.lat, point.lon, static_cast<long long>(range.start),
                  static_cast<long long>(range.end));
    return buf;
}

void EnvClient::rate_limit() {
    const auto min_interval =
        std::chrono::milliseconds(60000 / config_.requests_per_minute);
    const auto now = std::chrono::steady_clock::now();
    if (any_request_ && now - last_request_ < min_interval) {
        std::this_thread::sleep_for(min_interval - (now - last_request_));
    }
    last_request_ = std::chrono::steady_clock::now();
    any_request_ = true;
}

std::string EnvClient::fetch_payload(const std::string& kind, const std::string& api_path,
                                     const GeoPoint& point, const TimeRange& range) {
    if (range.end < range.start) {
        throw ValidationError("ingest: time range end precedes start");
    }
    if (fixture_mode()) {
        const auto path = config_.fixture_dir / fixture_name(kind, point, range);
        std::ifstream in(path);
        if (!in) throw IoError("ingest: missing fixture " + path.string());
        std::stringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }

    char query[256];
    std::snprintf(query, sizeof(query), "%s?lat=%.4f&lon=%.4f&start=%lld&end=%lld&appid=%s",
                  api_path.c_str(), point.lat, point.lon, static_cast<long long>(range.start),
                  static_cast<long long>(range.end), api_key_.c_str());

    std::string last_error;
    for (std::size_t attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(config_.retry.initial_backoff * (1u << (attempt - 1)));
        }
        rate_limit();
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        auto res = client.Get(query);
        if (!res) {
            last_error = "transport failure (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 200) return res->body;
        if (res->status == 401 || res->status == 403) {
            throw CredentialError("ingest: authentication rejected with HTTP " +
                                  std::to_string(res->status));
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;  // transient
        }
        throw TransportError("ingest: HTTP " + std::to_string(res->status) + " from " +
                             api_path);
    }
    throw TransportError("ingest: giving up after " + std::to_string(config_.retry.max_attempts) +
                         " attempts: " + last_error);
}

std::vector<EnvSample> EnvClient::fetch_air_quality(const GeoPoint& point,
                                                    const TimeRange& range) {
    const std::string payload =
        fetch_payload("air_pollution", "/data/2.5/air_pollution/history", point, range);
    return parse_air_pollution_payload(payload, point);
}

std::vector<EnvSample> EnvClient::fetch_weather(const GeoPoint& point, const TimeRange& range) {
    const std::string payload =
        fetch_payload("weather", "/data/3.0/onecall/timemachine", point, range);
    return parse_weather_payload(payload, point);
}

// ---------------------------------------------------------------------------
// geo-temporal join
// ---------------------------------------------------------------------------

JoinStats geo_temporal_join(std::vector<RawRecord>& records,
                            const std::vector<EnvSample>& samples, double max_distance_m,
                            std::int64_t max_dt_seconds) {
    std::vector<const EnvSample*> sorted;
    sorted.reserve(samples.size());
    for (const EnvSample& s : samples) sorted.push_back(&s);
    std::stable_sort(sorted.begin(), sorted.end(), [](const EnvSample* a, const EnvSample* b) {
        return a->timestamp < b->timestamp;
    });

    JoinStats stats;
    for (RawRecord& rec : records) {
        const GeoPoint rec_point(rec.lat, rec.lon);
        const EnvSample* best = nullptr;
        std::int64_t best_dt = 0;
        for (const EnvSample* s : sorted) {
            const std::int64_t dt = std::llabs(s->timestamp - rec.timestamp);
            if (dt > max_dt_seconds) continue;
            if (haversine_m(rec_point, GeoPoint(s->lat, s->lon)) > max_distance_m) continue;
            // strict comparison keeps the earlier sample on a tie
            if (!best || dt < best_dt) {
                best = s;
                best_dt = dt;
            }
        }
        if (!best) {
            rec.env_matched = false;
            ++stats.unmatched;
            continue;
        }
        ++stats.matched;
        auto put = [](std::optional<double>& dst, const std::optional<double>& src) {
            if (src) dst = *src;
        };
        put(rec.co, best->co);
        put(rec.no, best->no);
        put(rec.no2, best->no2);
        put(rec.o3, best->o3);
        put(rec.so2, best->so2);
        put(rec.pm2_5, best->pm2_5);
        put(rec.pm10, best->pm10);
        put(rec.nh3, best->nh3);
        put(rec.temp, best->temp);
        put(rec.feels_like, best->feels_like);
        put(rec.pressure, best->pressure);
        put(rec.humidity_api, best->humidity);
        put(rec.dew_point, best->dew_point);
        put(rec.clouds, best->clouds);
        put(rec.wind_speed, best->wind_speed);
        put(rec.wind_deg, best->wind_deg);
        put(rec.wind_gust, best->wind_gust);
    }
    return stats;
}

void write_env_csv(const std::filesystem::path& path, const std::vector<EnvSample>& samples) {
    const std::vector<std::string> header = {
        "timestamp", "lat",       "lon",       "co",         "no",       "no2",
        "o3",        "so2",       "pm2_5",     "pm10",       "nh3",      "temp",
        "feels_like", "pressure", "humidity",  "dew_point",  "clouds",   "wind_speed",
        "wind_deg",  "wind_gust"};
    std::vector<std::vector<std::string>> rows;
    rows.reserve(samples.size());
    auto cell = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const EnvSample& s : samples) {
        rows.push_back({format_iso8601(s.timestamp), format_double(s.lat), format_double(s.lon),
                        cell(s.co), cell(s.no), cell(s.no2), cell(s.o3), cell(s.so2),
                        cell(s.pm2_5), cell(s.pm10), cell(s.nh3), cell(s.temp),
                        cell(s.feels_like), cell(s.pressure), cell(s.humidity),
                        cell(s.dew_point), cell(s.clouds), cell(s.wind_speed), cell(s.wind_deg),
                        cell(s.wind_gust)});
    }
    write_csv(path, header, rows);
}

}  // namespace aircast::ingest
