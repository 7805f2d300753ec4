#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aircast/dataprep.hpp"
#include "aircast/records.hpp"

namespace aircast::synth {

// Cohort generator with a known analytic breathing-rate response:
//   br(pm, act) = baseline_i * (1 + s_p)^log2(max(pm, floor)/ref) * (1 + s_a * act / 10)
// so a doubling of pm2_5 multiplies br by exactly (1 + s_p), which makes
// planted exposure scenarios recoverable in closed form.
struct GeneratorConfig {
    std::uint64_t seed = 42;
    std::size_t n_participants = 5;
    std::size_t days_per_period = 14;
    std::size_t sample_interval_minutes = 60;
    bool include_winter = false;

    double baseline_br = 16.0;               // breaths/min
    double participant_baseline_jitter = 0.04;
    double pollution_sensitivity = 0.035;    // fractional br change per pm2_5 doubling
    double activity_sensitivity = 0.05;      // fractional br change at activity 10
    double pm_ref = 20.0;                    // ug/m3
    double pm_floor = 1.0;

    double pollution_diurnal_amplitude = 0.9;
    double activity_peak = 4.5;
    double spike_rate_per_day = 0.7;         // pollution episode frequency
    double temperature_glitch_rate = 0.004;  // trapped-sensor artifacts

    double noise_br = 0.25;
    double noise_activity = 0.25;
    double noise_steps = 3.0;
    double noise_pm = 1.5;
    double noise_weather = 0.4;

    double home_lat = 51.5074;
    double home_lon = -0.1278;
    std::string start_date_summer = "2024-06-03T00:00:00Z";
    std::string start_date_winter = "2024-01-08T00:00:00Z";
};

struct GroundTruthRow {
    std::string participant_id;
    Period period = Period::P1Summer;
    std::int64_t timestamp = 0;
    double br_true = 0.0;
    double hr_true = 0.0;  // 4 * br_true exactly
};

struct GroundTruth {
    GeneratorConfig config;
    std::vector<GroundTruthRow> rows;

    void save(const std::filesystem::path& path) const;
    static GroundTruth load(const std::filesystem::path& path);
};

struct Cohort {
    std::vector<RawRecord> records;
    GroundTruth truth;
};

Cohort generate_cohort(const GeneratorConfig& config);

// noise-free participant baseline, stable across generator and oracle
double participant_baseline(const GeneratorConfig& config, const std::string& participant_id);

// the analytic response itself
double response_br(const GeneratorConfig& config, double baseline, double pm2_5,
                   double activity);

// recomputes br*/hr* for every row of a feature frame from its pm2_5 and
// activity_level columns; exact, no noise
std::vector<GroundTruthRow> response_oracle(const dataprep::FeatureFrame& frame,
                                            const GeneratorConfig& config);

void config_to_json_file(const GeneratorConfig& config, const std::filesystem::path& path);

}  // namespace aircast::synth
