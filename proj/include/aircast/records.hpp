#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aircast/schema.hpp"

namespace aircast {

// One timestamped participant observation plus the environmental fields
// that may arrive later from the API join. Env fields are optional until
// interpolation/fill has run.
struct RawRecord {
    std::string participant_id;
    Period period = Period::P1Summer;
    std::int64_t timestamp = 0;  // unix seconds UTC
    double lat = 0.0;
    double lon = 0.0;

    double br_avg = 0.0;
    double br_std = 0.0;
    double activity_level = 0.0;
    double step_count = 0.0;
    double temperature = 0.0;
    double humidity = 0.0;
    double pm2_5_local = 0.0;

    std::optional<double> co, no, no2, o3, so2, pm2_5, pm10, nh3;
    std::optional<double> temp, feels_like, pressure, humidity_api, dew_point, clouds,
        wind_speed, wind_deg, wind_gust;

    bool env_matched = true;  // cleared by the geo-temporal join when no sample qualifies
};

struct OptionalEnvField {
    const char* name;
    std::optional<double> RawRecord::* member;
};

// the 17 optional environmental columns, in schema order
const std::vector<OptionalEnvField>& optional_env_fields();

// stable ordering: participant, period, then time
void sort_records(std::vector<RawRecord>& records);

// contiguous [begin, end) ranges of equal (participant, period); input must be sorted
struct RecordGroup {
    std::string participant;
    Period period;
    std::size_t begin;
    std::size_t end;
};
std::vector<RecordGroup> group_records(const std::vector<RawRecord>& records);

std::vector<RawRecord> read_records_csv(const std::filesystem::path& path);
void write_records_csv(const std::filesystem::path& path, const std::vector<RawRecord>& records);

}  // namespace aircast
