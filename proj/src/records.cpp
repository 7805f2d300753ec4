#include "aircast/records.hpp"

#include <algorithm>
#include <tuple>

#include "aircast/csv.hpp"
#include "aircast/errors.hpp"
#include "aircast/timeutil.hpp"

namespace aircast {

const std::vector<OptionalEnvField>& optional_env_fields() {
    static const std::vector<OptionalEnvField> fields = {
        {"co", &RawRecord::co},
        {"no", &RawRecord::no},
        {"no2", &RawRecord::no2},
        {"o3", &RawRecord::o3},
        {"so2", &RawRecord::so2},
        {"pm2_5", &RawRecord::pm2_5},
        {"pm10", &RawRecord::pm10},
        {"nh3", &RawRecord::nh3},
        {"temp", &RawRecord::temp},
        {"feels_like", &RawRecord::feels_like},
        {"pressure", &RawRecord::pressure},
        {"humidity_api", &RawRecord::humidity_api},
        {"dew_point", &RawRecord::dew_point},
        {"clouds", &RawRecord::clouds},
        {"wind_speed", &RawRecord::wind_speed},
        {"wind_deg", &RawRecord::wind_deg},
        {"wind_gust", &RawRecord::wind_gust},
    };
    return fields;
}

void sort_records(std::vector<RawRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const RawRecord& a, const RawRecord& b) {
        return std::tie(a.participant_id, a.period, a.timestamp) <
               std::tie(b.participant_id, b.period, b.timestamp);
    });
}

std::vector<RecordGroup> group_records(const std::vector<RawRecord>& records) {
    std::vector<RecordGroup> groups;
    std::size_t i = 0;
    while (i < records.size()) {
        std::size_t j = i;
        while (j < records.size() && records[j].participant_id == records[i].participant_id &&
               records[j].period == records[i].period) {
            ++j;
        }
        groups.push_back({records[i].participant_id, records[i].period, i, j});
        i = j;
    }
    return groups;
}

namespace {

const std::vector<std::string>& record_header() {
    static std::vector<std::string> header = [] {
        std::vector<std::string> h = {"participant_id", "period",         "timestamp",
                                      "lat",            "lon",            "br_avg",
                                      "br_std",         "activity_level", "step_count",
                                      "temperature",    "humidity",       "pm2_5_local"};
        for (const auto& f : optional_env_fields()) h.push_back(f.name);
        return h;
    }();
    return header;
}

}  // namespace

std::vector<RawRecord> read_records_csv(const std::filesystem::path& path) {
    CsvTable table = CsvTable::read_file(path);
    for (const auto& name : record_header()) {
        if (!table.has_col(name)) {
            throw ParseError("records file " + path.string() + ": missing column '" + name + "'");
        }
    }
    auto idx = [&](const char* name) { return table.col(name); };
    const std::size_t c_pid = idx("participant_id"), c_period = idx("period"),
                      c_ts = idx("timestamp"), c_lat = idx("lat"), c_lon = idx("lon"),
                      c_br = idx("br_avg"), c_brs = idx("br_std"), c_act = idx("activity_level"),
                      c_steps = idx("step_count"), c_temp = idx("temperature"),
                      c_hum = idx("humidity"), c_pml = idx("pm2_5_local");

    std::vector<RawRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        RawRecord rec;
        rec.participant_id = row[c_pid];
        rec.period = parse_period(row[c_period]);
        rec.timestamp = parse_iso8601(row[c_ts]);
        rec.lat = parse_double_field(row[c_lat], "lat", r);
        rec.lon = parse_double_field(row[c_lon], "lon", r);
        rec.br_avg = parse_double_field(row[c_br], "br_avg", r);
        rec.br_std = parse_double_field(row[c_brs], "br_std", r);
        rec.activity_level = parse_double_field(row[c_act], "activity_level", r);
        rec.step_count = parse_double_field(row[c_steps], "step_count", r);
        rec.temperature = parse_double_field(row[c_temp], "temperature", r);
        rec.humidity = parse_double_field(row[c_hum], "humidity", r);
        rec.pm2_5_local = parse_double_field(row[c_pml], "pm2_5_local", r);
        for (const auto& f : optional_env_fields()) {
            const std::string& cell = row[table.col(f.name)];
            if (!cell.empty()) rec.*f.member = parse_double_field(cell, f.name, r);
        }
        records.push_back(std::move(rec));
    }
    sort_records(records);
    return records;
}

void write_records_csv(const std::filesystem::path& path, const std::vector<RawRecord>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size());
    for (const RawRecord& rec : records) {
        std::vector<std::string> row = {rec.participant_id,
                                        period_name(rec.period),
                                        format_iso8601(rec.timestamp),
                                        format_double(rec.lat),
                                        format_double(rec.lon),
                                        format_double(rec.br_avg),
                                        format_double(rec.br_std),
                                        format_double(rec.activity_level),
                                        format_double(rec.step_count),
                                        format_double(rec.temperature),
                                        format_double(rec.humidity),
                                        format_double(rec.pm2_5_local)};
        for (const auto& f : optional_env_fields()) {
            const auto& v = rec.*f.member;
            row.push_back(v ? format_double(*v) : std::string());
        }
        rows.push_back(std::move(row));
    }
    write_csv(path, record_header(), rows);
}

}  // namespace aircast
