#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aircast/records.hpp"
#include "aircast/schema.hpp"
#include "aircast/tensor.hpp"

namespace aircast::dataprep {

inline constexpr double kTemperatureMin = -5.0;
inline constexpr double kTemperatureMax = 35.0;
inline constexpr double kBreathingRateFloor = 8.0;

// ---------------------------------------------------------------------------
// feature frame: rows of the 29-column schema with provenance
// ---------------------------------------------------------------------------

struct FrameMeta {
    std::string participant;
    Period period = Period::P1Summer;
    std::int64_t timestamp = 0;
};

struct GroupRange {
    std::string participant;
    Period period;
    std::size_t begin;
    std::size_t end;
};

class FeatureFrame {
public:
    std::size_t rows() const { return meta_.size(); }
    double at(std::size_t row, std::size_t feature) const;
    double& at(std::size_t row, std::size_t feature);
    const FrameMeta& meta(std::size_t row) const { return meta_.at(row); }

    void append(FrameMeta meta, const std::array<double, FeatureSchema::kCount>& values);

    // contiguous (participant, period) ranges; rows must have been appended sorted
    std::vector<GroupRange> groups() const;

    void to_csv(const std::filesystem::path& path) const;
    static FeatureFrame from_csv(const std::filesystem::path& path);

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

private:
    std::vector<FrameMeta> meta_;
    std::vector<double> values_;  // rows x 29, row-major
};

// ---------------------------------------------------------------------------
// cleaning
// ---------------------------------------------------------------------------

// clamps to [-5, 35] degC; returns how many rows were modified
std::size_t clean_temperature(std::vector<RawRecord>& records);

// replaces br_avg < 8 with the in-range median of its (participant, period)
// group; returns replaced count; a group with no in-range values is unusable
std::size_t clean_breathing_rate(std::vector<RawRecord>& records);

struct TimedValue {
    std::int64_t timestamp;
    double value;
};

struct TimedSample {
    std::int64_t timestamp;
    std::optional<double> value;  // empty slot = missing observation
};

// resamples an hourly series onto a fixed grid (default one minute) spanning
// the slot range: linear interpolation between observed neighbours, the mean
// of the observed values over leading/trailing gaps; a group with no
// observations at all is an error
std::vector<TimedValue> interpolate_pollution(const std::vector<TimedSample>& hourly,
                                              std::int64_t step_seconds = 60);

// fills every missing optional env field per (participant, period) group:
// linear interpolation between observed neighbours, group mean at the edges;
// a field with no observations in a group is an error
void fill_missing_env(std::vector<RawRecord>& records);

// ---------------------------------------------------------------------------
// feature engineering
// ---------------------------------------------------------------------------

// builds the 29-column frame from cleaned, filled records; heart_rt and the
// cyclical columns are left zero until the ops below run
FeatureFrame assemble_frame(const std::vector<RawRecord>& records);

// hour-of-day and day-of-week as (sin, cos) pairs
void encode_cyclical(FeatureFrame& frame);

// heart_rt = 4 * br_avg * (1 + u), u uniform in +-noise_fraction, seeded per group
void derive_heart_rate(FeatureFrame& frame, double noise_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// scaling
// ---------------------------------------------------------------------------

struct ScalerParams {
    struct MinMax {
        double min = 0.0;
        double max = 1.0;
        bool degenerate = false;  // max == min on the fitted split
    };
    std::array<MinMax, FeatureSchema::kCount> features{};
    std::string fitted_on;

    double transform_value(std::size_t feature, double x) const;
    double inverse_value(std::size_t feature, double x) const;

    void save(const std::filesystem::path& path) const;
    static ScalerParams load(const std::filesystem::path& path);
};

ScalerParams fit_scaler(const FeatureFrame& train, std::string fitted_on = "train");
FeatureFrame transform(const FeatureFrame& frame, const ScalerParams& params);
FeatureFrame inverse_transform(const FeatureFrame& frame, const ScalerParams& params);

// ---------------------------------------------------------------------------
// splits and windows
// ---------------------------------------------------------------------------

struct SplitFrames {
    FeatureFrame train;
    FeatureFrame validation;
    FeatureFrame test;
};

// chronological per-group split with cumulative-floor boundaries, so
// 10 rows at 70/15/15 gives 7/1/2
SplitFrames split(const FeatureFrame& frame, double train_frac, double val_frac,
                  double test_frac);

struct WindowProvenance {
    std::string participant;
    Period period;
    std::int64_t start_timestamp = 0;
};

struct WindowTensor {
    num::Tensor data;  // [samples, ntimes, features]
    std::vector<WindowProvenance> provenance;

    std::size_t samples() const { return provenance.size(); }
    std::size_t ntimes() const { return data.defined() ? data.dim(1) : 0; }
    std::size_t features() const { return data.defined() ? data.dim(2) : 0; }
};

// sliding windows per group; stride = ntimes - overlap; groups shorter than
// ntimes are skipped with a warning
WindowTensor build_windows(const FeatureFrame& frame, std::size_t ntimes = 8,
                           std::size_t overlap = 7, std::vector<std::string>* warnings = nullptr);

// inverse of stride-1 windowing over a single group: average every window
// covering each time level
std::vector<double> overlap_average(const WindowTensor& windows);

}  // namespace aircast::dataprep
