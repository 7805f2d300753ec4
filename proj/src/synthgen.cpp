#include "aircast/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "aircast/errors.hpp"
#include "aircast/hash.hpp"
#include "aircast/timeutil.hpp"

namespace aircast::synth {

using json = nlohmann::json;

namespace {

constexpr double kPmMin = 0.5, kPmMax = 500.0;

double bump(double h, double centre, double width) {
    const double d = (h - centre) / width;
    return std::exp(-d * d);
}

// morning/evening traffic profile
double rush(double h) { return bump(h, 8.5, 2.2) + 0.9 * bump(h, 18.0, 2.8); }

std::string participant_id_for(std::size_t index) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "P%02zu", index + 1);
    return buf;
}

void validate(const GeneratorConfig& c) {
    if (c.n_participants < 1 || c.n_participants > 99) {
        throw ValidationError("generator: n_participants must be in [1, 99]");
    }
    if (c.days_per_period < 1) throw ValidationError("generator: days_per_period must be >= 1");
    if (c.sample_interval_minutes < 1) {
        throw ValidationError("generator: sample_interval_minutes must be >= 1");
    }
    if (c.baseline_br < 8.0 || c.baseline_br > 30.0) {
        throw ValidationError("generator: baseline_br outside the plausible 8-30 range");
    }
    if (c.pm_ref <= 0.0 || c.pm_floor <= 0.0) {
        throw ValidationError("generator: pm_ref and pm_floor must be > 0");
    }
    if (c.pollution_sensitivity < 0.0 || c.activity_sensitivity < 0.0) {
        throw ValidationError("generator: sensitivities must be >= 0");
    }
    // the response must stay inside the wearable's range across the pm span
    const double base_hi = c.baseline_br * (1.0 + c.participant_baseline_jitter);
    const double span = std::log2(kPmMax / c.pm_ref) * std::log1p(c.pollution_sensitivity);
    const double worst =
        base_hi * std::exp(std::max(span, 0.0)) * (1.0 + c.activity_sensitivity);
    if (worst > 30.0 || c.baseline_br * (1.0 - c.participant_baseline_jitter) *
                                std::exp(std::min(-span, 0.0)) < 8.0) {
        throw ValidationError("generator: configured response leaves the 8-30 br range");
    }
}

struct SpikeEvent {
    double start_hour;  // hours since period start
    double magnitude;
    double decay_hours;
};

}  // namespace

double participant_baseline(const GeneratorConfig& config, const std::string& participant_id) {
    Rng rng(Rng::derive(config.seed, fnv1a64("baseline|" + participant_id)));
    return config.baseline_br *
           (1.0 + rng.uniform(-config.participant_baseline_jitter,
                              config.participant_baseline_jitter));
}

double response_br(const GeneratorConfig& config, double baseline, double pm2_5,
                   double activity) {
    const double exposure = std::max(pm2_5, config.pm_floor);
    const double doublings = std::log2(exposure / config.pm_ref);
    return baseline * std::pow(1.0 + config.pollution_sensitivity, doublings) *
           (1.0 + config.activity_sensitivity * activity / 10.0);
}

Cohort generate_cohort(const GeneratorConfig& config) {
    validate(config);
    Cohort cohort;
    cohort.truth.config = config;

    std::vector<Period> periods = {Period::P1Summer};
    if (config.include_winter) periods.push_back(Period::P2Winter);

    const std::int64_t step = static_cast<std::int64_t>(config.sample_interval_minutes) * 60;
    const std::size_t samples_per_period =
        config.days_per_period * 24 * 60 / config.sample_interval_minutes;

    for (std::size_t p = 0; p < config.n_participants; ++p) {
        const std::string pid = participant_id_for(p);
        const double baseline = participant_baseline(config, pid);

        Rng statics(Rng::derive(config.seed, fnv1a64("static|" + pid)));
        const double lat = config.home_lat + statics.uniform(-0.0008, 0.0008);
        const double lon = config.home_lon + statics.uniform(-0.0008, 0.0008);
        const double pm_factor = 1.0 + statics.uniform(-0.15, 0.15);
        const double act_phase = statics.uniform(-0.7, 0.7);
        const double city_pm = 18.0 * pm_factor;

        for (Period period : periods) {
            const bool winter = period == Period::P2Winter;
            const std::int64_t t0 = parse_iso8601(winter ? config.start_date_winter
                                                         : config.start_date_summer);
            Rng rng(Rng::derive(config.seed,
                                fnv1a64("series|" + pid + "|" + period_name(period))));

            // pollution episodes for the whole period
            std::vector<SpikeEvent> spikes;
            for (std::size_t d = 0; d < config.days_per_period; ++d) {
                if (rng.uniform() < config.spike_rate_per_day) {
                    SpikeEvent ev;
                    ev.start_hour = static_cast<double>(d) * 24.0 + rng.uniform(5.0, 22.0);
                    ev.magnitude = 25.0 + 45.0 * (-std::log(1.0 - rng.uniform()));
                    ev.decay_hours = rng.uniform(1.5, 4.0);
                    spikes.push_back(ev);
                }
            }

            for (std::size_t i = 0; i < samples_per_period; ++i) {
                const std::int64_t ts = t0 + static_cast<std::int64_t>(i) * step;
                const double h = hour_of_day(ts);
                const double elapsed_h =
                    static_cast<double>(i) * config.sample_interval_minutes / 60.0;
                const double day = elapsed_h / 24.0;
                const bool weekend = day_of_week(ts) >= 5;

                double pm = city_pm * (1.0 + config.pollution_diurnal_amplitude * rush(h) *
                                                 (weekend ? 0.55 : 1.0));
                for (const SpikeEvent& ev : spikes) {
                    const double dt = elapsed_h - ev.start_hour;
                    if (dt >= 0.0) pm += ev.magnitude * std::exp(-dt / ev.decay_hours);
                }
                pm = std::clamp(pm + rng.normal(0.0, config.noise_pm), kPmMin, kPmMax);

                double act = config.activity_peak *
                             (0.9 * bump(h, 8.0 + act_phase, 1.3) +
                              0.6 * bump(h, 12.7 + act_phase, 1.8) +
                              bump(h, 18.2 + act_phase, 1.7)) *
                             (weekend ? 0.75 : 1.0);
                act = std::clamp(act + rng.normal(0.0, config.noise_activity), 0.0, 10.0);

                const double br_true = response_br(config, baseline, pm, act);
                const double br_obs =
                    std::clamp(br_true + rng.normal(0.0, config.noise_br), 8.0, 30.0);

                RawRecord rec;
                rec.participant_id = pid;
                rec.period = period;
                rec.timestamp = ts;
                rec.lat = lat;
                rec.lon = lon;
                rec.br_avg = br_obs;
                rec.br_std = std::clamp(0.55 + 0.05 * act + rng.normal(0.0, 0.05), 0.0, 5.0);
                rec.activity_level = act;
                rec.step_count = std::clamp(11.0 * act + rng.normal(0.0, config.noise_steps),
                                            0.0, 120.0);

                double temp_local = (winter ? 5.0 : 15.0) + 5.5 * std::sin(2.0 * M_PI * (h - 8.5) / 24.0) +
                                    2.5 * std::sin(2.0 * M_PI * day / 9.0) +
                                    rng.normal(0.0, config.noise_weather);
                if (rng.uniform() < config.temperature_glitch_rate) {
                    temp_local += 15.0;  // sensor trapped against the body
                }
                rec.temperature = std::clamp(temp_local, -5.0, 40.0);

                const double humidity =
                    std::clamp(62.0 - 18.0 * std::sin(2.0 * M_PI * (h - 8.5) / 24.0) +
                                   rng.normal(0.0, 2.5),
                               0.0, 100.0);
                rec.humidity = humidity;
                // indoor background channel, deliberately decoupled from the
                // ambient driver so a scenario cannot leak through it
                rec.pm2_5_local = std::clamp(7.0 + 2.5 * std::sin(2.0 * M_PI * (h - 21.0) / 24.0) +
                                                 rng.normal(0.0, 0.8),
                                             kPmMin, kPmMax);

                rec.pm2_5 = pm;
                rec.pm10 = std::clamp(1.55 * pm + rng.normal(0.0, 2.0), kPmMin, kPmMax);
                rec.no2 = std::max(0.5, 28.0 * (1.0 + 0.5 * rush(h)) * pm_factor +
                                            rng.normal(0.0, 2.0));
                rec.o3 = std::max(0.5, 45.0 * (1.0 + 0.6 * std::sin(2.0 * M_PI * (h - 9.0) / 24.0)) +
                                           rng.normal(0.0, 2.5));
                rec.co = std::max(10.0, 280.0 * (1.0 + 0.4 * rush(h)) + rng.normal(0.0, 12.0));
                rec.so2 = std::max(0.2, 7.0 + 1.5 * std::sin(2.0 * M_PI * (h - 12.0) / 24.0) +
                                            rng.normal(0.0, 0.6));
                rec.no = std::max(0.2, 12.0 * (1.0 + 0.8 * rush(h)) + rng.normal(0.0, 1.2));
                rec.nh3 = std::max(0.2, 4.5 + rng.normal(0.0, 0.4));

                const double temp_api = temp_local + rng.normal(0.0, 0.3);
                const double wind = std::clamp(3.2 + 1.6 * std::sin(2.0 * M_PI * (h - 11.0) / 24.0) +
                                                   rng.normal(0.0, 0.5),
                                               0.0, 30.0);
                rec.temp = temp_api;
                rec.feels_like = temp_api - 1.2 - 0.25 * wind + rng.normal(0.0, 0.2);
                rec.pressure = 1012.0 + 6.0 * std::sin(2.0 * M_PI * day / 9.0) +
                               rng.normal(0.0, 1.0);
                rec.humidity_api = std::clamp(humidity + rng.normal(0.0, 1.5), 0.0, 100.0);
                rec.dew_point = temp_api - (100.0 - humidity) / 5.0;
                rec.clouds = std::clamp(45.0 + 28.0 * std::sin(2.0 * M_PI * day / 5.3) +
                                            rng.normal(0.0, 4.0),
                                        0.0, 100.0);
                rec.wind_speed = wind;
                rec.wind_deg = std::fmod(195.0 + 70.0 * std::sin(2.0 * M_PI * day / 11.0) +
                                             rng.normal(0.0, 8.0) + 720.0,
                                         360.0);
                rec.wind_gust = 1.5 * wind + std::abs(rng.normal(0.0, 0.6));

                cohort.records.push_back(std::move(rec));
                cohort.truth.rows.push_back({pid, period, ts, br_true, 4.0 * br_true});
            }
        }
    }
    sort_records(cohort.records);
    std::sort(cohort.truth.rows.begin(), cohort.truth.rows.end(),
              [](const GroundTruthRow& a, const GroundTruthRow& b) {
                  return std::tie(a.participant_id, a.period, a.timestamp) <
                         std::tie(b.participant_id, b.period, b.timestamp);
              });
    return cohort;
}

std::vector<GroundTruthRow> response_oracle(const dataprep::FeatureFrame& frame,
                                            const GeneratorConfig& config) {
    const auto& schema = FeatureSchema::instance();
    const std::size_t pm = schema.index_of("pm2_5");
    const std::size_t act = schema.index_of("activity_level");
    std::vector<GroundTruthRow> rows;
    rows.reserve(frame.rows());
    std::string cached_pid;
    double baseline = 0.0;
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        const auto& meta = frame.meta(r);
        if (meta.participant != cached_pid) {
            cached_pid = meta.participant;
            baseline = participant_baseline(config, cached_pid);
        }
        const double br = response_br(config, baseline, frame.at(r, pm), frame.at(r, act));
        rows.push_back({meta.participant, meta.period, meta.timestamp, br, 4.0 * br});
    }
    return rows;
}

// --------------------------------------------------------------------------
// ground-truth sidecar
// --------------------------------------------------------------------------

namespace {

json config_to_json(const GeneratorConfig& c) {
    return json{{"seed", c.seed},
                {"n_participants", c.n_participants},
                {"days_per_period", c.days_per_period},
                {"sample_interval_minutes", c.sample_interval_minutes},
                {"include_winter", c.include_winter},
                {"baseline_br", c.baseline_br},
                {"participant_baseline_jitter", c.participant_baseline_jitter},
                {"pollution_sensitivity", c.pollution_sensitivity},
                {"activity_sensitivity", c.activity_sensitivity},
                {"pm_ref", c.pm_ref},
                {"pm_floor", c.pm_floor},
                {"pollution_diurnal_amplitude", c.pollution_diurnal_amplitude},
                {"activity_peak", c.activity_peak},
                {"spike_rate_per_day", c.spike_rate_per_day},
                {"temperature_glitch_rate", c.temperature_glitch_rate},
                {"noise_br", c.noise_br},
                {"noise_activity", c.noise_activity},
                {"noise_steps", c.noise_steps},
                {"noise_pm", c.noise_pm},
                {"noise_weather", c.noise_weather},
                {"home_lat", c.home_lat},
                {"home_lon", c.home_lon},
                {"start_date_summer", c.start_date_summer},
                {"start_date_winter", c.start_date_winter}};
}

GeneratorConfig config_from_json(const json& j) {
    GeneratorConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.n_participants = j.at("n_participants").get<std::size_t>();
    c.days_per_period = j.at("days_per_period").get<std::size_t>();
    c.sample_interval_minutes = j.at("sample_interval_minutes").get<std::size_t>();
    c.include_winter = j.at("include_winter").get<bool>();
    c.baseline_br = j.at("baseline_br").get<double>();
    c.participant_baseline_jitter = j.at("participant_baseline_jitter").get<double>();
    c.pollution_sensitivity = j.at("pollution_sensitivity").get<double>();
    c.activity_sensitivity = j.at("activity_sensitivity").get<double>();
    c.pm_ref = j.at("pm_ref").get<double>();
    c.pm_floor = j.at("pm_floor").get<double>();
    c.pollution_diurnal_amplitude = j.at("pollution_diurnal_amplitude").get<double>();
    c.activity_peak = j.at("activity_peak").get<double>();
    c.spike_rate_per_day = j.at("spike_rate_per_day").get<double>();
    c.temperature_glitch_rate = j.at("temperature_glitch_rate").get<double>();
    c.noise_br = j.at("noise_br").get<double>();
    c.noise_activity = j.at("noise_activity").get<double>();
    c.noise_steps = j.at("noise_steps").get<double>();
    c.noise_weather = j.at("noise_weather").get<double>();
    c.noise_pm = j.at("noise_pm").get<double>();
    c.home_lat = j.at("home_lat").get<double>();
    c.home_lon = j.at("home_lon").get<double>();
    c.start_date_summer = j.at("start_date_summer").get<std::string>();
    c.start_date_winter = j.at("start_date_winter").get<std::string>();
    return c;
}

}  // namespace

void GroundTruth::save(const std::filesystem::path& path) const {
    json doc;
    doc["config"] = config_to_json(config);
    json rows_json = json::array();
    for (const GroundTruthRow& row : rows) {
        rows_json.push_back({{"participant_id", row.participant_id},
                             {"period", period_name(row.period)},
                             {"timestamp", format_iso8601(row.timestamp)},
                             {"br_true", row.br_true},
                             {"hr_true", row.hr_true}});
    }
    doc["rows"] = std::move(rows_json);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write ground truth file " + path.string());
    out << doc.dump(2) << '\n';
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ground truth file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("ground truth file " + path.string() + ": " + e.what());
    }
    GroundTruth gt;
    gt.config = config_from_json(doc.at("config"));
    for (const json& row : doc.at("rows")) {
        gt.rows.push_back({row.at("participant_id").get<std::string>(),
                           parse_period(row.at("period").get<std::string>()),
                           parse_iso8601(row.at("timestamp").get<std::string>()),
                           row.at("br_true").get<double>(), row.at("hr_true").get<double>()});
    }
    return gt;
}

void config_to_json_file(const GeneratorConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write generator config " + path.string());
    out << config_to_json(config).dump(2) << '\n';
}

}  // namespace aircast::synth
