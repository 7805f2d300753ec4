#include "aircast/schema.hpp"

#include <unordered_set>

#include "aircast/errors.hpp"

namespace aircast {

std::string period_name(Period p) {
    return p == Period::P1Summer ? "P1_summer" : "P2_winter";
}

Period parse_period(const std::string& name) {
    if (name == "P1_summer") return Period::P1Summer;
    if (name == "P2_winter") return Period::P2Winter;
    throw ParseError("unknown period '" + name + "' (expected P1_summer or P2_winter)");
}

FeatureSchema::FeatureSchema() {
    features_ = {
        {"br_avg", "breaths/min", "wearable"},
        {"br_std", "breaths/min", "wearable"},
        {"activity_level", "0-10", "wearable"},
        {"step_count", "steps/min", "wearable"},
        {"heart_rt", "beats/min", "derived"},
        {"temperature", "degC", "local_sensor"},
        {"humidity", "%", "local_sensor"},
        {"pm2_5_local", "ug/m3", "local_sensor"},
        {"co", "ug/m3", "air_api"},
        {"no", "ug/m3", "air_api"},
        {"no2", "ug/m3", "air_api"},
        {"o3", "ug/m3", "air_api"},
        {"so2", "ug/m3", "air_api"},
        {"pm2_5", "ug/m3", "air_api"},
        {"pm10", "ug/m3", "air_api"},
        {"nh3", "ug/m3", "air_api"},
        {"temp", "degC", "weather_api"},
        {"feels_like", "degC", "weather_api"},
        {"pressure", "hPa", "weather_api"},
        {"humidity_api", "%", "weather_api"},
        {"dew_point", "degC", "weather_api"},
        {"clouds", "%", "weather_api"},
        {"wind_speed", "m/s", "weather_api"},
        {"wind_deg", "deg", "weather_api"},
        {"wind_gust", "m/s", "weather_api"},
        {"hour_sin", "", "cyclical"},
        {"hour_cos", "", "cyclical"},
        {"dow_sin", "", "cyclical"},
        {"dow_cos", "", "cyclical"},
    };
    if (features_.size() != kCount) {
        throw ValidationError("feature schema must list exactly " + std::to_string(kCount) +
                              " features, got " + std::to_string(features_.size()));
    }
    std::unordered_set<std::string> seen;
    for (const auto& f : features_) {
        if (!seen.insert(f.name).second) {
            throw ValidationError("duplicate feature name '" + f.name + "' in schema");
        }
    }
    for (const char* name : {"br_avg", "br_std", "activity_level", "step_count", "heart_rt"}) {
        physiological_.push_back(index_of(name));
    }
    for (const char* name : {"pm2_5", "pm10", "no2", "o3", "co"}) {
        scenario_.push_back(index_of(name));
    }
}

const FeatureSchema& FeatureSchema::instance() {
    static FeatureSchema schema;
    return schema;
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].name == name) return i;
    }
    throw ValidationError("unknown feature '" + std::string(name) + "'");
}

bool FeatureSchema::contains(std::string_view name) const {
    for (const auto& f : features_) {
        if (f.name == name) return true;
    }
    return false;
}

}  // namespace aircast
