#include "aircast/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "aircast/csv.hpp"
#include "aircast/errors.hpp"
#include "aircast/hash.hpp"
#include "aircast/timeutil.hpp"

namespace aircast::dataprep {

using json = nlohmann::json;

namespace {
const FeatureSchema& schema() { return FeatureSchema::instance(); }
constexpr std::size_t kF = FeatureSchema::kCount;
}  // namespace

// ---------------------------------------------------------------------------
// FeatureFrame
// ---------------------------------------------------------------------------

double FeatureFrame::at(std::size_t row, std::size_t feature) const {
    return values_.at(row * kF + feature);
}

double& FeatureFrame::at(std::size_t row, std::size_t feature) {
    return values_.at(row * kF + feature);
}

void FeatureFrame::append(FrameMeta meta, const std::array<double, kF>& values) {
    meta_.push_back(std::move(meta));
    values_.insert(values_.end(), values.begin(), values.end());
}

std::vector<GroupRange> FeatureFrame::groups() const {
    std::vector<GroupRange> out;
    std::size_t i = 0;
    while (i < meta_.size()) {
        std::size_t j = i;
        while (j < meta_.size() && meta_[j].participant == meta_[i].participant &&
               meta_[j].period == meta_[i].period) {
            ++j;
        }
        out.push_back({meta_[i].participant, meta_[i].period, i, j});
        i = j;
    }
    return out;
}

void FeatureFrame::to_csv(const std::filesystem::path& path) const {
    std::vector<std::string> header = {"participant_id", "period", "timestamp"};
    for (const auto& f : schema().features()) header.push_back(f.name);
    std::vector<std::vector<std::string>> rows;
    rows.reserve(meta_.size());
    for (std::size_t r = 0; r < meta_.size(); ++r) {
        std::vector<std::string> row = {meta_[r].participant, period_name(meta_[r].period),
                                        format_iso8601(meta_[r].timestamp)};
        for (std::size_t f = 0; f < kF; ++f) row.push_back(format_double(at(r, f)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

FeatureFrame FeatureFrame::from_csv(const std::filesystem::path& path) {
    CsvTable table = CsvTable::read_file(path);
    std::vector<std::size_t> cols;
    cols.reserve(kF);
    for (const auto& f : schema().features()) {
        if (!table.has_col(f.name)) {
            throw ParseError("feature file " + path.string() + ": missing column '" + f.name +
                             "'");
        }
        cols.push_back(table.col(f.name));
    }
    const std::size_t c_pid = table.col("participant_id");
    const std::size_t c_period = table.col("period");
    const std::size_t c_ts = table.col("timestamp");

    FeatureFrame frame;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        FrameMeta meta{row[c_pid], parse_period(row[c_period]), parse_iso8601(row[c_ts])};
        std::array<double, kF> vals{};
        for (std::size_t f = 0; f < kF; ++f) {
            vals[f] = parse_double_field(row[cols[f]], schema().at(f).name, r);
        }
        frame.append(std::move(meta), vals);
    }
    return frame;
}

// ---------------------------------------------------------------------------
// cleaning
// ---------------------------------------------------------------------------

std::size_t clean_temperature(std::vector<RawRecord>& records) {
    std::size_t modified = 0;
    for (RawRecord& rec : records) {
        const double clamped = std::clamp(rec.temperature, kTemperatureMin, kTemperatureMax);
        if (clamped != rec.temperature) {
            rec.temperature = clamped;
            ++modified;
        }
    }
    return modified;
}

namespace {

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::size_t clean_breathing_rate(std::vector<RawRecord>& records) {
    std::size_t replaced = 0;
    for (const RecordGroup& g : group_records(records)) {
        std::vector<double> in_range;
        bool any_low = false;
        for (std::size_t i = g.begin; i < g.end; ++i) {
            if (records[i].br_avg < kBreathingRateFloor) {
                any_low = true;
            } else {
                in_range.push_back(records[i].br_avg);
            }
        }
        if (!any_low) continue;
        if (in_range.empty()) {
            throw ValidationError("group " + g.participant + "/" + period_name(g.period) +
                                  " has no plausible breathing-rate values");
        }
        const double m = median(std::move(in_range));
        for (std::size_t i = g.begin; i < g.end; ++i) {
            if (records[i].br_avg < kBreathingRateFloor) {
                records[i].br_avg = m;
                ++replaced;
            }
        }
    }
    return replaced;
}

std::vector<TimedValue> interpolate_pollution(const std::vector<TimedSample>& hourly,
                                              std::int64_t step_seconds) {
    if (hourly.empty()) throw ValidationError("interpolate_pollution: empty group");
    if (step_seconds < 1) throw ValidationError("interpolate_pollution: step must be >= 1 s");
    std::vector<TimedValue> observed;
    double sum = 0.0;
    for (const TimedSample& s : hourly) {
        if (s.value) {
            observed.push_back({s.timestamp, *s.value});
            sum += *s.value;
        }
    }
    if (observed.empty()) {
        throw ValidationError("interpolate_pollution: no observed values in group");
    }
    const double mean = sum / static_cast<double>(observed.size());

    std::vector<TimedValue> out;
    std::size_t seg = 0;
    for (std::int64_t t = hourly.front().timestamp; t <= hourly.back().timestamp;
         t += step_seconds) {
        if (t < observed.front().timestamp || t > observed.back().timestamp) {
            out.push_back({t, mean});
            continue;
        }
        if (observed.size() == 1) {
            out.push_back({t, observed.front().value});
            continue;
        }
        while (seg + 2 < observed.size() && observed[seg + 1].timestamp <= t) ++seg;
        const auto& a = observed[seg];
        const auto& b = observed[seg + 1];
        const double w = static_cast<double>(t - a.timestamp) /
                         static_cast<double>(b.timestamp - a.timestamp);
        out.push_back({t, a.value + w * (b.value - a.value)});
    }
    return out;
}

void fill_missing_env(std::vector<RawRecord>& records) {
    for (const RecordGroup& g : group_records(records)) {
        for (const auto& field : optional_env_fields()) {
            std::vector<std::size_t> observed;
            double sum = 0.0;
            for (std::size_t i = g.begin; i < g.end; ++i) {
                if (records[i].*field.member) {
                    observed.push_back(i);
                    sum += *(records[i].*field.member);
                }
            }
            if (observed.size() == g.end - g.begin) continue;
            if (observed.empty()) {
                throw ValidationError("group " + g.participant + "/" + period_name(g.period) +
                                      ": field '" + field.name + "' has no observations");
            }
            const double mean = sum / static_cast<double>(observed.size());
            for (std::size_t i = g.begin; i < g.end; ++i) {
                if (records[i].*field.member) continue;
                const std::int64_t t = records[i].timestamp;
                // neighbours on the observation grid
                auto it = std::lower_bound(observed.begin(), observed.end(), i);
                const bool has_next = it != observed.end();
                const bool has_prev = it != observed.begin();
                if (has_prev && has_next) {
                    const RawRecord& a = records[*(it - 1)];
                    const RawRecord& b = records[*it];
                    const double w = static_cast<double>(t - a.timestamp) /
                                     static_cast<double>(b.timestamp - a.timestamp);
                    records[i].*field.member =
                        *(a.*field.member) + w * (*(b.*field.member) - *(a.*field.member));
                } else {
                    records[i].*field.member = mean;  // leading or trailing gap
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// feature engineering
// ---------------------------------------------------------------------------

FeatureFrame assemble_frame(const std::vector<RawRecord>& records) {
    const auto& s = schema();
    FeatureFrame frame;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const RawRecord& rec = records[r];
        std::array<double, kF> vals{};
        vals[s.index_of("br_avg")] = rec.br_avg;
        vals[s.index_of("br_std")] = rec.br_std;
        vals[s.index_of("activity_level")] = rec.activity_level;
        vals[s.index_of("step_count")] = rec.step_count;
        vals[s.index_of("temperature")] = rec.temperature;
        vals[s.index_of("humidity")] = rec.humidity;
        vals[s.index_of("pm2_5_local")] = rec.pm2_5_local;
        for (const auto& field : optional_env_fields()) {
            const auto& v = rec.*field.member;
            if (!v) {
                throw ValidationError("record " + std::to_string(r) + " (" + rec.participant_id +
                                      "): field '" + field.name +
                                      "' still missing when assembling features");
            }
            vals[s.index_of(field.name)] = *v;
        }
        frame.append({rec.participant_id, rec.period, rec.timestamp}, vals);
    }
    return frame;
}

void encode_cyclical(FeatureFrame& frame) {
    const auto& s = schema();
    const std::size_t hs = s.index_of("hour_sin"), hc = s.index_of("hour_cos");
    const std::size_t ds = s.index_of("dow_sin"), dc = s.index_of("dow_cos");
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        const std::int64_t ts = frame.meta(r).timestamp;
        const double h = hour_of_day(ts);
        const double d = static_cast<double>(day_of_week(ts));
        frame.at(r, hs) = std::sin(2.0 * M_PI * h / 24.0);
        frame.at(r, hc) = std::cos(2.0 * M_PI * h / 24.0);
        frame.at(r, ds) = std::sin(2.0 * M_PI * d / 7.0);
        frame.at(r, dc) = std::cos(2.0 * M_PI * d / 7.0);
    }
}

void derive_heart_rate(FeatureFrame& frame, double noise_fraction, std::uint64_t seed) {
    const auto& s = schema();
    const std::size_t br = s.index_of("br_avg"), hr = s.index_of("heart_rt");
    for (const GroupRange& g : frame.groups()) {
        // substream keyed on the group so execution order cannot matter
        const std::uint64_t stream = fnv1a64(g.participant + "|" + period_name(g.period));
        Rng rng(Rng::derive(seed, stream));
        for (std::size_t r = g.begin; r < g.end; ++r) {
            const double u = rng.uniform(-noise_fraction, noise_fraction);
            frame.at(r, hr) = 4.0 * frame.at(r, br) * (1.0 + u);
        }
    }
}

// ---------------------------------------------------------------------------
// scaling
// ---------------------------------------------------------------------------

double ScalerParams::transform_value(std::size_t feature, double x) const {
    const MinMax& mm = features.at(feature);
    if (mm.degenerate) return 0.0;
    return (x - mm.min) / (mm.max - mm.min);
}

double ScalerParams::inverse_value(std::size_t feature, double x) const {
    const MinMax& mm = features.at(feature);
    if (mm.degenerate) return mm.min;
    return mm.min + x * (mm.max - mm.min);
}

void ScalerParams::save(const std::filesystem::path& path) const {
    json doc;
    doc["fitted_on"] = fitted_on;
    for (std::size_t f = 0; f < kF; ++f) {
        const auto& mm = features[f];
        doc[schema().at(f).name] = {
            {"min", mm.min}, {"max", mm.max}, {"degenerate", mm.degenerate}};
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scaler file " + path.string());
    out << doc.dump(2) << '\n';
}

ScalerParams ScalerParams::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scaler file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("scaler file " + path.string() + ": " + e.what());
    }
    ScalerParams params;
    if (doc.contains("fitted_on")) params.fitted_on = doc["fitted_on"].get<std::string>();
    for (std::size_t f = 0; f < kF; ++f) {
        const std::string& name = schema().at(f).name;
        if (!doc.contains(name)) {
            throw ParseError("scaler file " + path.string() + ": missing feature '" + name + "'");
        }
        const json& e = doc[name];
        ScalerParams::MinMax mm;
        mm.min = e.at("min").get<double>();
        mm.max = e.at("max").get<double>();
        mm.degenerate = e.value("degenerate", mm.max == mm.min);
        if (mm.max < mm.min) {
            throw ParseError("scaler file " + path.string() + ": feature '" + name +
                             "' has max < min");
        }
        params.features[f] = mm;
    }
    return params;
}

ScalerParams fit_scaler(const FeatureFrame& train, std::string fitted_on) {
    if (train.rows() == 0) throw ValidationError("fit_scaler: empty training frame");
    ScalerParams params;
    params.fitted_on = std::move(fitted_on);
    for (std::size_t f = 0; f < kF; ++f) {
        double lo = train.at(0, f), hi = train.at(0, f);
        for (std::size_t r = 1; r < train.rows(); ++r) {
            lo = std::min(lo, train.at(r, f));
            hi = std::max(hi, train.at(r, f));
        }
        params.features[f] = {lo, hi, lo == hi};
    }
    return params;
}

namespace {

FeatureFrame map_frame(const FeatureFrame& frame, const ScalerParams& params, bool inverse) {
    FeatureFrame out = frame;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t f = 0; f < kF; ++f) {
            out.at(r, f) = inverse ? params.inverse_value(f, frame.at(r, f))
                                   : params.transform_value(f, frame.at(r, f));
        }
    }
    return out;
}

}  // namespace

FeatureFrame transform(const FeatureFrame& frame, const ScalerParams& params) {
    return map_frame(frame, params, false);
}

FeatureFrame inverse_transform(const FeatureFrame& frame, const ScalerParams& params) {
    return map_frame(frame, params, true);
}

// ---------------------------------------------------------------------------
// splits and windows
// ---------------------------------------------------------------------------

SplitFrames split(const FeatureFrame& frame, double train_frac, double val_frac,
                  double test_frac) {
    if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
        std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw ValidationError("split: fractions must be non-negative and sum to 1");
    }
    SplitFrames out;
    for (const GroupRange& g : frame.groups()) {
        const std::size_t n = g.end - g.begin;
        const auto n_train = static_cast<std::size_t>(std::floor(n * train_frac));
        const auto n_train_val =
            static_cast<std::size_t>(std::floor(n * (train_frac + val_frac)));
        for (std::size_t r = g.begin; r < g.end; ++r) {
            std::array<double, kF> vals{};
            for (std::size_t f = 0; f < kF; ++f) vals[f] = frame.at(r, f);
            const std::size_t local = r - g.begin;
            FeatureFrame& dst = local < n_train         ? out.train
                                : local < n_train_val   ? out.validation
                                                        : out.test;
            dst.append(frame.meta(r), vals);
        }
    }
    if (train_frac > 0 && out.train.rows() == 0)
        throw ValidationError("split: training split is empty");
    if (val_frac > 0 && out.validation.rows() == 0)
        throw ValidationError("split: validation split is empty");
    if (test_frac > 0 && out.test.rows() == 0)
        throw ValidationError("split: test split is empty");
    return out;
}

WindowTensor build_windows(const FeatureFrame& frame, std::size_t ntimes, std::size_t overlap,
                           std::vector<std::string>* warnings) {
    if (ntimes == 0 || overlap >= ntimes) {
        throw ValidationError("build_windows: need 0 <= overlap < ntimes");
    }
    const std::size_t stride = ntimes - overlap;
    std::vector<double> data;
    std::vector<WindowProvenance> prov;
    for (const GroupRange& g : frame.groups()) {
        const std::size_t n = g.end - g.begin;
        if (n < ntimes) {
            if (warnings) {
                warnings->push_back("group " + g.participant + "/" + period_name(g.period) +
                                    " skipped: " + std::to_string(n) + " rows < window of " +
                                    std::to_string(ntimes));
            }
            continue;
        }
        for (std::size_t start = 0; start + ntimes <= n; start += stride) {
            const std::size_t row0 = g.begin + start;
            for (std::size_t i = 0; i < ntimes; ++i) {
                for (std::size_t f = 0; f < kF; ++f) data.push_back(frame.at(row0 + i, f));
            }
            prov.push_back({g.participant, g.period, frame.meta(row0).timestamp});
        }
    }
    WindowTensor out;
    out.data = num::Tensor({prov.size(), ntimes, kF}, std::move(data));
    out.provenance = std::move(prov);
    return out;
}

std::vector<double> overlap_average(const WindowTensor& windows) {
    const std::size_t n = windows.samples();
    if (n == 0) throw ValidationError("overlap_average: no windows");
    for (std::size_t i = 1; i < n; ++i) {
        if (windows.provenance[i].participant != windows.provenance[0].participant ||
            windows.provenance[i].period != windows.provenance[0].period) {
            throw ValidationError("overlap_average: windows span more than one group");
        }
    }
    const std::size_t nt = windows.ntimes(), nf = windows.features();
    const std::size_t total = n + nt - 1;  // stride-1 reconstruction length
    std::vector<double> acc(total * nf, 0.0);
    std::vector<double> count(total, 0.0);
    const double* d = windows.data.data();
    for (std::size_t w = 0; w < n; ++w) {
        for (std::size_t i = 0; i < nt; ++i) {
            const std::size_t t = w + i;
            count[t] += 1.0;
            for (std::size_t f = 0; f < nf; ++f) {
                acc[t * nf + f] += d[(w * nt + i) * nf + f];
            }
        }
    }
    for (std::size_t t = 0; t < total; ++t) {
        for (std::size_t f = 0; f < nf; ++f) acc[t * nf + f] /= count[t];
    }
    return acc;
}

}  // namespace aircast::dataprep
