#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "aircast/dataprep.hpp"
#include "aircast/timeutil.hpp"

using namespace aircast;
using namespace aircast::dataprep;

namespace {

RawRecord make_record(const std::string& pid, Period period, std::int64_t ts, double br = 14.0) {
    RawRecord r;
    r.participant_id = pid;
    r.period = period;
    r.timestamp = ts;
    r.lat = 51.5;
    r.lon = -0.12;
    r.br_avg = br;
    r.br_std = 1.0;
    r.activity_level = 2.0;
    r.step_count = 10.0;
    r.temperature = 20.0;
    r.humidity = 60.0;
    r.pm2_5_local = 9.0;
    for (const auto& f : optional_env_fields()) r.*f.member = 1.0;
    return r;
}

FeatureFrame frame_of_length(std::size_t n, const std::string& pid = "P01",
                             Period period = Period::P1Summer) {
    std::vector<RawRecord> recs;
    const std::int64_t t0 = parse_iso8601("2024-06-03T00:00:00Z");
    for (std::size_t i = 0; i < n; ++i) {
        RawRecord r = make_record(pid, period, t0 + static_cast<std::int64_t>(i) * 3600);
        r.br_avg = 12.0 + std::sin(0.1 * static_cast<double>(i));
        r.pm2_5 = 10.0 + static_cast<double>(i % 7);
        recs.push_back(r);
    }
    return assemble_frame(recs);
}

}  // namespace

TEST_CASE("clean_temperature clamps to regional bounds") {
    auto t0 = parse_iso8601("2024-01-10T12:00:00Z");
    std::vector<RawRecord> recs = {make_record("P01", Period::P2Winter, t0),
                                   make_record("P01", Period::P2Winter, t0 + 3600),
                                   make_record("P01", Period::P2Winter, t0 + 7200)};
    recs[0].temperature = 40.0;   // implausible winter reading
    recs[1].temperature = 20.0;
    recs[2].temperature = -12.0;
    const std::size_t modified = clean_temperature(recs);
    CHECK(modified == 2);
    CHECK(recs[0].temperature == 35.0);
    CHECK(recs[1].temperature == 20.0);
    CHECK(recs[2].temperature == -5.0);

    // idempotent
    CHECK(clean_temperature(recs) == 0);
}

TEST_CASE("clean_breathing_rate replaces with the group median") {
    auto t0 = parse_iso8601("2024-06-03T00:00:00Z");
    std::vector<RawRecord> recs;
    const double values[] = {10.0, 12.0, 14.0, 5.0};
    for (int i = 0; i < 4; ++i) {
        recs.push_back(make_record("P01", Period::P1Summer, t0 + i * 3600, values[i]));
    }
    const std::size_t replaced = clean_breathing_rate(recs);
    CHECK(replaced == 1);
    CHECK(recs[3].br_avg == 12.0);  // median of {10, 12, 14}

    // idempotent: second pass changes nothing
    CHECK(clean_breathing_rate(recs) == 0);
}

TEST_CASE("clean_breathing_rate leaves values at the threshold alone") {
    auto t0 = parse_iso8601("2024-06-03T00:00:00Z");
    std::vector<RawRecord> recs = {make_record("P01", Period::P1Summer, t0, 8.0),
                                   make_record("P01", Period::P1Summer, t0 + 3600, 9.0)};
    CHECK(clean_breathing_rate(recs) == 0);
    CHECK(recs[0].br_avg == 8.0);
}

TEST_CASE("clean_breathing_rate fails on a group with no plausible values") {
    auto t0 = parse_iso8601("2024-06-03T00:00:00Z");
    std::vector<RawRecord> recs = {make_record("P01", Period::P1Summer, t0, 5.0),
                                   make_record("P01", Period::P1Summer, t0 + 3600, 6.0)};
    CHECK_THROWS_AS(clean_breathing_rate(recs), ValidationError);
}

TEST_CASE("breathing-rate cleaning matches a brute-force oracle") {
    Rng rng(123);
    auto t0 = parse_iso8601("2024-06-03T00:00:00Z");
    std::vector<RawRecord> recs;
    std::vector<double> raw;
    for (int i = 0; i < 50; ++i) {
        const double br = rng.uniform(4.0, 28.0);
        raw.push_back(br);
        recs.push_back(make_record("P01", Period::P1Summer, t0 + i * 3600, br));
    }
    clean_breathing_rate(recs);

    // oracle: scalar loops, independent median
    std::vector<double> in_range;
    for (double v : raw) {
        if (v >= 8.0) in_range.push_back(v);
    }
    std::sort(in_range.begin(), in_range.end());
    const std::size_t n = in_range.size();
    const double med =
        n % 2 ? in_range[n / 2] : 0.5 * (in_range[n / 2 - 1] + in_range[n / 2]);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        CHECK(recs[i].br_avg == (raw[i] < 8.0 ? med : raw[i]));
    }
}

TEST_CASE("interpolate_pollution midpoints, constants and gap fill") {
    const std::int64_t h9 = parse_iso8601("2024-06-03T09:00:00Z");
    SUBCASE("linear midpoint") {
        std::vector<TimedSample> hourly = {{h9, 10.0}, {h9 + 3600, 20.0}};
        auto out = interpolate_pollution(hourly);
        REQUIRE(out.size() == 61);
        CHECK(out[30].timestamp == h9 + 1800);
        CHECK(out[30].value == doctest::Approx(15.0));
        CHECK(out.front().value == 10.0);
        CHECK(out.back().value == 20.0);
    }
    SUBCASE("single value gives a constant series") {
        std::vector<TimedSample> hourly = {{h9, 7.5}};
        auto out = interpolate_pollution(hourly);
        REQUIRE(out.size() == 1);
        CHECK(out[0].value == 7.5);
    }
    SUBCASE("leading missing hour takes the group mean") {
        std::vector<TimedSample> hourly = {{h9, std::nullopt}, {h9 + 3600, 10.0},
                                           {h9 + 7200, 14.0}};
        auto out = interpolate_pollution(hourly);
        CHECK(out.front().timestamp == h9);
        CHECK(out.front().value == doctest::Approx(12.0));  // mean of {10, 14}
    }
    SUBCASE("empty group is an error") {
        CHECK_THROWS_AS(interpolate_pollution({}), ValidationError);
        std::vector<TimedSample> all_missing = {{h9, std::nullopt}};
        CHECK_THROWS_AS(interpolate_pollution(all_missing), ValidationError);
    }
}

TEST_CASE("fill_missing_env interpolates and mean-fills per group") {
    auto t0 = parse_iso8601("2024-06-03T09:00:00Z");
    std::vector<RawRecord> recs;
    for (int i = 0; i < 4; ++i) recs.push_back(make_record("P01", Period::P1Summer, t0 + i * 3600));
    recs[0].pm2_5.reset();                 // leading gap
    recs[1].pm2_5 = 10.0;
    recs[2].pm2_5.reset();                 // interior gap
    recs[3].pm2_5 = 20.0;
    fill_missing_env(recs);
    CHECK(*recs[0].pm2_5 == doctest::Approx(15.0));  // mean of {10, 20}
    CHECK(*recs[2].pm2_5 == doctest::Approx(15.0));  // midpoint
}

TEST_CASE("scaler follows the min-max formula and round-trips") {
    const auto& schema = FeatureSchema::instance();
    const std::size_t pm = schema.index_of("pm2_5");

    FeatureFrame frame = frame_of_length(10);
    // force the documented dynamic range on the pm2_5 channel
    frame.at(0, pm) = 0.0;
    frame.at(1, pm) = 500.0;
    ScalerParams params = fit_scaler(frame);
    CHECK(params.transform_value(pm, 250.0) == doctest::Approx(0.5));
    CHECK(params.transform_value(pm, 600.0) == doctest::Approx(1.2));  // unclipped

    FeatureFrame scaled = transform(frame, params);
    FeatureFrame restored = inverse_transform(scaled, params);
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        for (std::size_t f = 0; f < FeatureSchema::kCount; ++f) {
            CHECK(std::abs(restored.at(r, f) - frame.at(r, f)) < 1e-12);
        }
    }

    // every training value lands inside [0, 1]
    for (std::size_t r = 0; r < scaled.rows(); ++r) {
        for (std::size_t f = 0; f < FeatureSchema::kCount; ++f) {
            CHECK(scaled.at(r, f) >= -1e-12);
            CHECK(scaled.at(r, f) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("constant feature scales to zero and carries the degenerate flag") {
    FeatureFrame frame = frame_of_length(5);
    const std::size_t so2 = FeatureSchema::instance().index_of("so2");
    for (std::size_t r = 0; r < frame.rows(); ++r) frame.at(r, so2) = 3.0;
    ScalerParams params = fit_scaler(frame);
    CHECK(params.features[so2].degenerate);
    CHECK(params.transform_value(so2, 3.0) == 0.0);
    CHECK(params.inverse_value(so2, 0.0) == 3.0);
}

TEST_CASE("scaler params depend only on the training split") {
    FeatureFrame train = frame_of_length(20);
    ScalerParams a = fit_scaler(train);
    ScalerParams b = fit_scaler(train);  // validation/test never enter the fit
    for (std::size_t f = 0; f < FeatureSchema::kCount; ++f) {
        CHECK(a.features[f].min == b.features[f].min);
        CHECK(a.features[f].max == b.features[f].max);
    }
}

TEST_CASE("scaler json round trip") {
    FeatureFrame frame = frame_of_length(8);
    ScalerParams params = fit_scaler(frame, "train");
    const auto path = std::filesystem::temp_directory_path() / "aircast_scaler_test.json";
    params.save(path);
    ScalerParams loaded = ScalerParams::load(path);
    CHECK(loaded.fitted_on == "train");
    for (std::size_t f = 0; f < FeatureSchema::kCount; ++f) {
        CHECK(loaded.features[f].min == params.features[f].min);
        CHECK(loaded.features[f].max == params.features[f].max);
        CHECK(loaded.features[f].degenerate == params.features[f].degenerate);
    }
    std::filesystem::remove(path);
}

TEST_CASE("cyclical encoding hits the documented phase points") {
    const auto& schema = FeatureSchema::instance();
    std::vector<RawRecord> recs = {
        make_record("P01", Period::P1Summer, parse_iso8601("2024-06-03T06:00:00Z")),
        make_record("P01", Period::P1Summer, parse_iso8601("2024-06-03T23:00:00Z")),
        make_record("P02", Period::P1Summer, parse_iso8601("2024-06-04T00:00:00Z")),
        make_record("P03", Period::P1Summer, parse_iso8601("2024-06-05T00:00:00Z"))};
    FeatureFrame frame = assemble_frame(recs);
    encode_cyclical(frame);

    const std::size_t hs = schema.index_of("hour_sin"), hc = schema.index_of("hour_cos");
    CHECK(frame.at(0, hs) == doctest::Approx(1.0));  // 06:00 is a quarter cycle
    CHECK(frame.at(0, hc) == doctest::Approx(0.0).epsilon(1e-9));

    // hour 24 wraps onto hour 0 of the next day
    std::vector<RawRecord> wrap = {
        make_record("P01", Period::P1Summer, parse_iso8601("2024-06-03T00:00:00Z")),
        make_record("P01", Period::P1Summer, parse_iso8601("2024-06-04T00:00:00Z"))};
    FeatureFrame wrap_frame = assemble_frame(wrap);
    encode_cyclical(wrap_frame);
    CHECK(wrap_frame.at(0, hs) == doctest::Approx(wrap_frame.at(1, hs)));
    CHECK(wrap_frame.at(0, hc) == doctest::Approx(wrap_frame.at(1, hc)));

    for (std::size_t r = 0; r < frame.rows(); ++r) {
        const double s = frame.at(r, hs), c = frame.at(r, hc);
        CHECK(s * s + c * c == doctest::Approx(1.0));
        const double ds = frame.at(r, schema.index_of("dow_sin"));
        const double dc = frame.at(r, schema.index_of("dow_cos"));
        CHECK(ds * ds + dc * dc == doctest::Approx(1.0));
    }
}

TEST_CASE("derived heart rate respects the quotient and noise band") {
    const auto& schema = FeatureSchema::instance();
    const std::size_t br = schema.index_of("br_avg"), hr = schema.index_of("heart_rt");

    FeatureFrame frame = frame_of_length(50);
    for (std::size_t r = 0; r < frame.rows(); ++r) frame.at(r, br) = 15.0;

    SUBCASE("zero noise gives exactly four times the breathing rate") {
        derive_heart_rate(frame, 0.0, 7);
        for (std::size_t r = 0; r < frame.rows(); ++r) CHECK(frame.at(r, hr) == 60.0);
    }

    SUBCASE("ten percent noise keeps the quotient in [3.6, 4.4]") {
        derive_heart_rate(frame, 0.10, 7);
        for (std::size_t r = 0; r < frame.rows(); ++r) {
            CHECK(frame.at(r, hr) >= 54.0);
            CHECK(frame.at(r, hr) <= 66.0);
            const double ratio = frame.at(r, hr) / frame.at(r, br);
            CHECK(ratio >= 3.6);
            CHECK(ratio <= 4.4);
        }
    }

    SUBCASE("same seed reproduces the same noise stream") {
        FeatureFrame a = frame, b = frame;
        derive_heart_rate(a, 0.10, 7);
        derive_heart_rate(b, 0.10, 7);
        for (std::size_t r = 0; r < a.rows(); ++r) CHECK(a.at(r, hr) == b.at(r, hr));
    }
}

TEST_CASE("windowing produces the documented tensor shapes") {
    FeatureFrame frame = frame_of_length(100);
    WindowTensor w = build_windows(frame);
    CHECK(w.data.shape() == num::Shape{93, 8, 29});

    FeatureFrame tiny = frame_of_length(8);
    WindowTensor single = build_windows(tiny);
    CHECK(single.data.shape() == num::Shape{1, 8, 29});

    // adjacent windows share rows 2..8 of the earlier one
    for (std::size_t f = 0; f < 29; ++f) {
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(w.data[(0 * 8 + i + 1) * 29 + f] == w.data[(1 * 8 + i) * 29 + f]);
        }
    }
}

TEST_CASE("short groups are skipped with a warning") {
    FeatureFrame frame = frame_of_length(5);
    std::vector<std::string> warnings;
    WindowTensor w = build_windows(frame, 8, 7, &warnings);
    CHECK(w.samples() == 0);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("P01") != std::string::npos);
}

TEST_CASE("windows never span group boundaries") {
    FeatureFrame a = frame_of_length(12, "P01");
    FeatureFrame b = frame_of_length(12, "P02");
    FeatureFrame both = a;
    for (std::size_t r = 0; r < b.rows(); ++r) {
        std::array<double, 29> vals{};
        for (std::size_t f = 0; f < 29; ++f) vals[f] = b.at(r, f);
        both.append(b.meta(r), vals);
    }
    WindowTensor w = build_windows(both);
    CHECK(w.samples() == 2 * (12 - 8 + 1));
    for (const auto& p : w.provenance) {
        CHECK((p.participant == "P01" || p.participant == "P02"));
    }
}

TEST_CASE("overlap averaging reconstructs the source series exactly") {
    FeatureFrame frame = frame_of_length(40);
    WindowTensor w = build_windows(frame);
    std::vector<double> rebuilt = overlap_average(w);
    REQUIRE(rebuilt.size() == frame.values().size());
    for (std::size_t i = 0; i < rebuilt.size(); ++i) {
        CHECK(std::abs(rebuilt[i] - frame.values()[i]) < 1e-12);
    }
}

TEST_CASE("chronological splits use cumulative floors") {
    SUBCASE("100 rows at 80/20") {
        FeatureFrame frame = frame_of_length(100);
        SplitFrames s = split(frame, 0.8, 0.0, 0.2);
        CHECK(s.train.rows() == 80);
        CHECK(s.validation.rows() == 0);
        CHECK(s.test.rows() == 20);
        // chronology: every train timestamp precedes every test timestamp
        CHECK(s.train.meta(79).timestamp < s.test.meta(0).timestamp);
    }
    SUBCASE("10 rows at 70/15/15 gives 7/1/2") {
        FeatureFrame frame = frame_of_length(10);
        SplitFrames s = split(frame, 0.70, 0.15, 0.15);
        CHECK(s.train.rows() == 7);
        CHECK(s.validation.rows() == 1);
        CHECK(s.test.rows() == 2);
    }
    SUBCASE("splits partition the rows") {
        FeatureFrame frame = frame_of_length(33);
        SplitFrames s = split(frame, 0.70, 0.15, 0.15);
        CHECK(s.train.rows() + s.validation.rows() + s.test.rows() == 33);
        std::vector<std::int64_t> seen;
        for (const FeatureFrame* f : {&s.train, &s.validation, &s.test}) {
            for (std::size_t r = 0; r < f->rows(); ++r) seen.push_back(f->meta(r).timestamp);
        }
        std::sort(seen.begin(), seen.end());
        CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    }
    SUBCASE("empty requested split is an error") {
        FeatureFrame frame = frame_of_length(2);
        CHECK_THROWS_AS(split(frame, 0.5, 0.3, 0.2), ValidationError);
    }
}

TEST_CASE("feature frame csv round trip") {
    FeatureFrame frame = frame_of_length(12);
    encode_cyclical(frame);
    derive_heart_rate(frame, 0.1, 3);
    const auto path = std::filesystem::temp_directory_path() / "aircast_frame_test.csv";
    frame.to_csv(path);
    FeatureFrame loaded = FeatureFrame::from_csv(path);
    REQUIRE(loaded.rows() == frame.rows());
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        CHECK(loaded.meta(r).timestamp == frame.meta(r).timestamp);
        for (std::size_t f = 0; f < 29; ++f) CHECK(loaded.at(r, f) == frame.at(r, f));
    }
    std::filesystem::remove(path);
}
