#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aircast/aae.hpp"
#include "aircast/dataprep.hpp"

namespace aircast::infer {

struct InpaintConfig {
    std::size_t max_iterations = 20;
    double tolerance = 1e-4;       // L2 change of the inpainted level
    double guess_noise_std = 0.01; // perturbation of the previous-value guess
    std::uint64_t seed = 0;
    std::vector<bool> clamp_mask;  // per feature, true = held at the prescribed value
};

struct InpaintResult {
    std::vector<double> level;
    std::size_t iterations = 0;
    double final_delta = 0.0;
    bool converged = false;
};

// every channel that does not come from the wearable: pollution, weather,
// local sensor, cyclical encodings
std::vector<bool> exogenous_clamp_mask();

// Iteratively refine the unknown eighth level: assemble [known7, guess],
// pass it through the autoencoder, adopt the reconstructed level, re-apply
// the clamped channels, repeat until the change drops below tolerance.
InpaintResult inpaint_step(const model::AaeParams& params, const num::Tensor& known7,
                           std::vector<double> guess, const InpaintConfig& config);

// same semantics across a batch of independent windows
std::vector<InpaintResult> inpaint_many(const model::AaeParams& params, const num::Tensor& known,
                                        std::vector<std::vector<double>> guesses,
                                        const InpaintConfig& config);

struct ForecastConfig {
    InpaintConfig inpaint;
    bool teacher_forcing = false;  // condition on observed rather than predicted levels
};

struct StepStats {
    std::size_t iterations = 0;
    double final_delta = 0.0;
    bool converged = false;
};

struct ForecastResult {
    std::size_t horizon = 0;
    std::size_t n_features = 0;
    std::vector<double> predicted_scaled;  // [horizon, features] row-major
    std::vector<double> actual_scaled;     // the matching ground-truth rows
    std::vector<StepStats> steps;

    double value(std::size_t step, std::size_t feature) const {
        return predicted_scaled[step * n_features + feature];
    }
};

// Sliding autoregression over one contiguous scaled series [T, features]:
// each new level is inpainted from the previous seven (observed or predicted),
// with clamped channels pinned to their known values at the new level.
ForecastResult forecast(const model::AaeParams& params, const num::Tensor& series,
                        std::size_t horizon, const ForecastConfig& config);

struct ScenarioConfig {
    std::map<std::string, double> factors;  // feature name -> multiplicative factor
    bool clamp_pollutants = true;

    // the default pollutant set at one shared factor
    static ScenarioConfig uniform(double factor);
};

struct ScenarioReport {
    std::map<std::string, double> factors;
    double br_delta_pct = 0.0;
    double hr_delta_pct = 0.0;
    std::size_t n_windows = 0;
};

// Forecast a baseline branch and a branch with pollutant channels scaled over
// the whole conditioning history, sharing seeds, and report the mean percent
// change of breathing and heart rate on inverse-scaled values.
ScenarioReport simulate_scenario(const model::AaeParams& params,
                                 const dataprep::FeatureFrame& baseline_unscaled,
                                 const dataprep::ScalerParams& scaler,
                                 const ScenarioConfig& scenario, const ForecastConfig& config);

void write_scenario_json(const ScenarioReport& report, const std::filesystem::path& path);

struct EvalResult {
    double mse = 0.0;
    std::optional<double> r2_listing;   // denominator built from the prediction mean
    std::optional<double> r2_standard;  // denominator built from the truth mean
    std::vector<double> per_feature_mse;
};

EvalResult evaluate(const std::vector<double>& predicted, const std::vector<double>& actual);
EvalResult evaluate_matrix(const std::vector<double>& predicted,
                           const std::vector<double>& actual, std::size_t n_features);

void write_eval_json(const EvalResult& result, const std::filesystem::path& path);

}  // namespace aircast::infer
