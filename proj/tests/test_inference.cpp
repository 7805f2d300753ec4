#include <doctest.h>

#include <cmath>

#include "aircast/inference.hpp"
#include "aircast/synthgen.hpp"
#include "helpers.hpp"

using namespace aircast;
using namespace aircast::infer;
using model::AaeParams;
using model::HyperParams;
using num::Tensor;

namespace {

HyperParams tiny_hp(std::uint64_t seed = 5) {
    HyperParams hp;
    hp.latent_dim = 8;
    hp.conv1_channels = 2;
    hp.conv2_channels = 3;
    hp.lstm_hidden = 4;
    hp.disc_hidden1 = 8;
    hp.disc_hidden2 = 4;
    hp.seed = seed;
    return hp;
}

}  // namespace

TEST_CASE("a constant fixed point converges immediately") {
    // the all-zero model reproduces the constant 0.5 series exactly
    AaeParams zero = AaeParams::zeros_like(tiny_hp());
    Tensor known = Tensor::full({1, 7, 29}, 0.5);
    std::vector<double> guess(29, 0.5);
    InpaintConfig config;
    InpaintResult r = inpaint_step(zero, known, guess, config);
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    for (double v : r.level) CHECK(v == 0.5);
    CHECK(r.final_delta == 0.0);
}

TEST_CASE("clamped channels are bit-exact prescriptions") {
    AaeParams params = AaeParams::init(tiny_hp(3));
    Rng rng(4);
    Tensor known = Tensor::uniform({1, 7, 29}, rng, 0.2, 0.8);
    std::vector<double> guess(29);
    for (auto& v : guess) v = rng.uniform(0.2, 0.8);

    InpaintConfig config;
    config.clamp_mask.assign(29, false);
    config.clamp_mask[7] = true;
    config.clamp_mask[13] = true;
    config.clamp_mask[28] = true;
    InpaintResult r = inpaint_step(params, known, guess, config);
    CHECK(r.level[7] == guess[7]);
    CHECK(r.level[13] == guess[13]);
    CHECK(r.level[28] == guess[28]);
    CHECK(r.iterations >= 1);
    CHECK(r.final_delta >= 0.0);
}

TEST_CASE("batched inpainting matches the documented window layout") {
    AaeParams params = AaeParams::init(tiny_hp(9));
    Rng rng(6);
    const std::size_t n = 5;
    Tensor known = Tensor::uniform({n, 7, 29}, rng, 0.2, 0.8);
    std::vector<std::vector<double>> guesses(n, std::vector<double>(29, 0.5));
    InpaintConfig config;
    auto results = inpaint_many(params, known, guesses, config);
    REQUIRE(results.size() == n);
    for (const auto& r : results) {
        CHECK(r.level.size() == 29);
        CHECK(r.iterations >= 1);
        CHECK(r.iterations <= config.max_iterations);
    }
}

TEST_CASE("forecast base case equals one inpainting step") {
    AaeParams params = AaeParams::init(tiny_hp(13));
    Rng rng(8);
    Tensor series = Tensor::uniform({8, 29}, rng, 0.2, 0.8);

    ForecastConfig config;
    config.inpaint.guess_noise_std = 0.0;  // make the guess reproducible by hand
    ForecastResult f = forecast(params, series, 1, config);
    REQUIRE(f.horizon == 1);

    Tensor known({1, 7, 29},
                 std::vector<double>(series.data_vec().begin(),
                                     series.data_vec().begin() + 7 * 29));
    std::vector<double> guess(series.data_vec().begin() + 6 * 29,
                              series.data_vec().begin() + 7 * 29);
    InpaintResult step = inpaint_step(params, known, guess, config.inpaint);
    for (std::size_t fidx = 0; fidx < 29; ++fidx) {
        CHECK(f.predicted_scaled[fidx] == step.level[fidx]);
    }
}

TEST_CASE("teacher forcing on a constant series reproduces the truth exactly") {
    AaeParams zero = AaeParams::zeros_like(tiny_hp());
    Tensor series = Tensor::full({15, 29}, 0.5);
    ForecastConfig config;
    config.teacher_forcing = true;
    config.inpaint.guess_noise_std = 0.0;
    ForecastResult f = forecast(zero, series, 8, config);
    for (std::size_t i = 0; i < f.predicted_scaled.size(); ++i) {
        CHECK(f.predicted_scaled[i] == 0.5);
        CHECK(f.actual_scaled[i] == 0.5);
    }
}

TEST_CASE("forecast rejects bad horizons and short series") {
    AaeParams params = AaeParams::init(tiny_hp());
    Tensor series = Tensor::full({10, 29}, 0.5);
    CHECK_THROWS_AS(forecast(params, series, 0, {}), ValidationError);
    CHECK_THROWS_AS(forecast(params, series, 5, {}), ValidationError);  // 7 + 5 > 10
}

TEST_CASE("forecast is deterministic for a fixed seed") {
    AaeParams params = AaeParams::init(tiny_hp(17));
    Rng rng(12);
    Tensor series = Tensor::uniform({20, 29}, rng, 0.2, 0.8);
    ForecastConfig config;
    config.inpaint.seed = 77;
    ForecastResult a = forecast(params, series, 10, config);
    ForecastResult b = forecast(params, series, 10, config);
    CHECK(a.predicted_scaled == b.predicted_scaled);
}

TEST_CASE("identity scenario yields exactly zero deltas") {
    synth::GeneratorConfig cfg;
    cfg.seed = 31;
    cfg.n_participants = 1;
    cfg.days_per_period = 1;
    synth::Cohort cohort = synth::generate_cohort(cfg);
    dataprep::FeatureFrame frame = dataprep::assemble_frame(cohort.records);
    dataprep::encode_cyclical(frame);
    dataprep::derive_heart_rate(frame, 0.10, 31);
    dataprep::ScalerParams scaler = dataprep::fit_scaler(frame);

    AaeParams params = AaeParams::init(tiny_hp(19));
    ScenarioConfig identity = ScenarioConfig::uniform(1.0);
    ForecastConfig fc;
    fc.inpaint.max_iterations = 3;
    ScenarioReport report = simulate_scenario(params, frame, scaler, identity, fc);
    CHECK(report.br_delta_pct == 0.0);
    CHECK(report.hr_delta_pct == 0.0);
    CHECK(report.n_windows == frame.rows() - 7);
    CHECK(report.factors.size() == 5);
    CHECK(report.factors.at("pm2_5") == 1.0);
}

TEST_CASE("scenario validation") {
    AaeParams params = AaeParams::init(tiny_hp());
    dataprep::FeatureFrame frame;
    dataprep::ScalerParams scaler;
    ScenarioConfig bad = ScenarioConfig::uniform(-2.0);
    CHECK_THROWS_AS(simulate_scenario(params, frame, scaler, bad, {}), ValidationError);

    ScenarioConfig unknown;
    unknown.factors["plutonium"] = 2.0;
    CHECK_THROWS_AS(simulate_scenario(params, frame, scaler, unknown, {}), ValidationError);
}

TEST_CASE("evaluation hits the textbook anchor points") {
    std::vector<double> actual = {1.0, 2.0, 3.0, 4.0};
    SUBCASE("perfect prediction") {
        EvalResult r = evaluate(actual, actual);
        CHECK(r.mse == 0.0);
        REQUIRE(r.r2_standard.has_value());
        CHECK(*r.r2_standard == 1.0);
    }
    SUBCASE("predicting the mean scores zero") {
        std::vector<double> mean_pred(4, 2.5);
        EvalResult r = evaluate(mean_pred, actual);
        REQUIRE(r.r2_standard.has_value());
        CHECK(*r.r2_standard == doctest::Approx(0.0));
    }
    SUBCASE("zero-variance truth leaves r2 undefined, not NaN") {
        std::vector<double> flat(4, 1.0);
        std::vector<double> pred(4, 1.0);
        EvalResult r = evaluate(pred, flat);
        CHECK(!r.r2_standard.has_value());
        CHECK(!r.r2_listing.has_value());
        CHECK(r.mse == 0.0);
    }
}

TEST_CASE("both r2 variants match a scalar-loop oracle") {
    Rng rng(41);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> pred(20), truth(20);
        for (auto& v : pred) v = rng.uniform(-2.0, 2.0);
        for (auto& v : truth) v = rng.uniform(-2.0, 2.0);
        EvalResult r = evaluate(pred, truth);

        // oracle: plain loops, independent accumulation order
        double mse_res = 0.0;
        for (std::size_t i = 0; i < 20; ++i) {
            mse_res += (pred[i] - truth[i]) * (pred[i] - truth[i]) / 20.0;
        }
        double pm = 0.0;
        for (double v : pred) pm += v / 20.0;
        double mse_tot = 0.0;
        for (double v : truth) mse_tot += (pm - v) * (pm - v) / 20.0;
        const double r2_listing = 1.0 - mse_res / mse_tot;

        double tm = 0.0;
        for (double v : truth) tm += v / 20.0;
        double ss_tot = 0.0, ss_res = 0.0;
        for (std::size_t i = 0; i < 20; ++i) {
            ss_tot += (truth[i] - tm) * (truth[i] - tm);
            ss_res += (pred[i] - truth[i]) * (pred[i] - truth[i]);
        }
        const double r2_standard = 1.0 - ss_res / ss_tot;

        CHECK(std::abs(r.mse - mse_res) < 1e-12);
        REQUIRE(r.r2_listing.has_value());
        REQUIRE(r.r2_standard.has_value());
        CHECK(std::abs(*r.r2_listing - r2_listing) < 1e-12);
        CHECK(std::abs(*r.r2_standard - r2_standard) < 1e-12);
    }
}

TEST_CASE("r2 variants agree when the prediction mean matches the truth mean") {
    // symmetric prediction errors around a shared mean
    std::vector<double> truth = {1.0, 2.0, 3.0, 4.0};
    std::vector<double> pred = {1.5, 1.5, 3.5, 3.5};  // both means are 2.5
    EvalResult r = evaluate(pred, truth);
    REQUIRE(r.r2_listing.has_value());
    REQUIRE(r.r2_standard.has_value());
    CHECK(*r.r2_listing == doctest::Approx(*r.r2_standard));
}

TEST_CASE("per-feature errors are tracked separately") {
    std::vector<double> pred = {1.0, 5.0, 1.0, 5.0};   // two rows, two features
    std::vector<double> truth = {1.0, 4.0, 1.0, 4.0};
    EvalResult r = evaluate_matrix(pred, truth, 2);
    REQUIRE(r.per_feature_mse.size() == 2);
    CHECK(r.per_feature_mse[0] == 0.0);
    CHECK(r.per_feature_mse[1] == doctest::Approx(1.0));
    CHECK(r.mse == doctest::Approx(0.5));
}

TEST_CASE("evaluation rejects mismatched series") {
    CHECK_THROWS_AS(evaluate({1.0, 2.0}, {1.0}), DimensionError);
    CHECK_THROWS_AS(evaluate({}, {}), ValidationError);
    CHECK_THROWS_AS(evaluate_matrix({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 2), DimensionError);
}

TEST_CASE("exogenous clamp mask covers everything but the wearable channels") {
    auto mask = exogenous_clamp_mask();
    const auto& schema = FeatureSchema::instance();
    REQUIRE(mask.size() == FeatureSchema::kCount);
    CHECK_FALSE(mask[schema.index_of("br_avg")]);
    CHECK_FALSE(mask[schema.index_of("heart_rt")]);
    CHECK_FALSE(mask[schema.index_of("activity_level")]);
    CHECK(mask[schema.index_of("pm2_5")]);
    CHECK(mask[schema.index_of("temp")]);
    CHECK(mask[schema.index_of("hour_sin")]);
}
