#include "aircast/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "aircast/errors.hpp"

namespace aircast::infer {

using json = nlohmann::json;
using model::AaeParams;
using num::Tape;
using num::Tensor;

std::vector<bool> exogenous_clamp_mask() {
    const auto& schema = FeatureSchema::instance();
    std::vector<bool> mask(FeatureSchema::kCount, true);
    for (std::size_t f : schema.physiological_indices()) mask[f] = false;
    return mask;
}

namespace {

void check_clamp_mask(const std::vector<bool>& mask, std::size_t nf) {
    if (!mask.empty() && mask.size() != nf) {
        throw ValidationError("clamp mask has " + std::to_string(mask.size()) +
                              " entries, expected " + std::to_string(nf));
    }
}

}  // namespace

std::vector<InpaintResult> inpaint_many(const AaeParams& params, const Tensor& known,
                                        std::vector<std::vector<double>> guesses,
                                        const InpaintConfig& config) {
    const auto& hp = params.hp();
    const std::size_t nf = hp.n_features;
    const std::size_t ctx = hp.ntimes - 1;
    if (known.rank() != 3 || known.dim(1) != ctx || known.dim(2) != nf) {
        throw DimensionError("inpaint: known context must be [n, " + std::to_string(ctx) + ", " +
                             std::to_string(nf) + "], got " + num::shape_str(known.shape()));
    }
    const std::size_t n = known.dim(0);
    if (guesses.size() != n) {
        throw ValidationError("inpaint: " + std::to_string(guesses.size()) + " guesses for " +
                              std::to_string(n) + " windows");
    }
    for (const auto& g : guesses) {
        if (g.size() != nf) throw DimensionError("inpaint: guess has wrong feature width");
    }
    if (config.max_iterations < 1) throw ValidationError("inpaint: max_iterations must be >= 1");
    if (config.tolerance <= 0.0) throw ValidationError("inpaint: tolerance must be > 0");
    check_clamp_mask(config.clamp_mask, nf);

    // the guess carries the prescribed values for clamped channels
    const std::vector<std::vector<double>> prescribed = guesses;

    std::vector<InpaintResult> results(n);
    for (std::size_t i = 0; i < n; ++i) results[i].level = guesses[i];

    std::vector<bool> active(n, true);
    std::size_t n_active = n;
    std::vector<double> window((hp.ntimes) * nf);

    for (std::size_t iter = 1; iter <= config.max_iterations && n_active > 0; ++iter) {
        // assemble one batch out of the still-iterating windows
        std::vector<std::size_t> idx;
        idx.reserve(n_active);
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i]) idx.push_back(i);
        }
        std::vector<double> batch(idx.size() * hp.ntimes * nf);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::size_t i = idx[k];
            double* dst = batch.data() + k * hp.ntimes * nf;
            const double* ctx_src = known.data() + i * ctx * nf;
            std::copy(ctx_src, ctx_src + ctx * nf, dst);
            std::copy(results[i].level.begin(), results[i].level.end(), dst + ctx * nf);
        }
        Tensor x({idx.size(), hp.ntimes, nf}, std::move(batch));
        Tape tape(false);
        Tensor out = model::decode(tape, params, model::encode(tape, params, x));
        if (!out.all_finite()) {
            throw NumericError("inpaint: non-finite reconstruction at iteration " +
                               std::to_string(iter));
        }

        for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::size_t i = idx[k];
            const double* level = out.data() + (k * hp.ntimes + ctx) * nf;
            double delta_sq = 0.0;
            for (std::size_t f = 0; f < nf; ++f) {
                double v = level[f];
                if (!config.clamp_mask.empty() && config.clamp_mask[f]) {
                    v = prescribed[i][f];
                }
                const double d = v - results[i].level[f];
                delta_sq += d * d;
                results[i].level[f] = v;
            }
            results[i].iterations = iter;
            results[i].final_delta = std::sqrt(delta_sq);
            if (results[i].final_delta < config.tolerance) {
                results[i].converged = true;
                active[i] = false;
                --n_active;
            }
        }
    }
    return results;
}

InpaintResult inpaint_step(const AaeParams& params, const Tensor& known7,
                           std::vector<double> guess, const InpaintConfig& config) {
    const auto& hp = params.hp();
    Tensor known = known7;
    if (known.rank() == 2) {
        known = Tensor({1, known7.dim(0), known7.dim(1)}, known7.data_vec());
    }
    if (known.dim(0) != 1) {
        throw DimensionError("inpaint_step: expected a single window, got " +
                             num::shape_str(known7.shape()));
    }
    (void)hp;
    return inpaint_many(params, known, {std::move(guess)}, config).front();
}

ForecastResult forecast(const AaeParams& params, const Tensor& series, std::size_t horizon,
                        const ForecastConfig& config) {
    const auto& hp = params.hp();
    const std::size_t nf = hp.n_features;
    const std::size_t ctx = hp.ntimes - 1;
    if (horizon < 1) throw ValidationError("forecast: horizon must be >= 1");
    if (series.rank() != 2 || series.dim(1) != nf) {
        throw DimensionError("forecast: series must be [T, " + std::to_string(nf) + "], got " +
                             num::shape_str(series.shape()));
    }
    const std::size_t total = series.dim(0);
    if (total < ctx + horizon) {
        throw ValidationError("forecast: series of " + std::to_string(total) +
                              " levels cannot support horizon " + std::to_string(horizon));
    }
    check_clamp_mask(config.inpaint.clamp_mask, nf);

    // conditioning state: observed levels, overwritten by predictions unless
    // teacher forcing is on
    std::vector<double> state = series.data_vec();
    Rng noise_rng(Rng::derive(config.inpaint.seed, 0x677565737345ULL));

    ForecastResult result;
    result.horizon = horizon;
    result.n_features = nf;
    result.predicted_scaled.resize(horizon * nf);
    result.actual_scaled.resize(horizon * nf);
    result.steps.resize(horizon);

    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t target = ctx + h;
        Tensor known({1, ctx, nf},
                     std::vector<double>(state.begin() + static_cast<std::ptrdiff_t>(h * nf),
                                         state.begin() +
                                             static_cast<std::ptrdiff_t>((h + ctx) * nf)));
        // previous level plus noise, with known channels pinned
        std::vector<double> guess(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            guess[f] = state[(target - 1) * nf + f] +
                       noise_rng.normal(0.0, config.inpaint.guess_noise_std);
            if (!config.inpaint.clamp_mask.empty() && config.inpaint.clamp_mask[f]) {
                guess[f] = series[target * nf + f];
            }
        }
        InpaintResult step = inpaint_many(params, known, {std::move(guess)}, config.inpaint)[0];

        for (std::size_t f = 0; f < nf; ++f) {
            result.predicted_scaled[h * nf + f] = step.level[f];
            result.actual_scaled[h * nf + f] = series[target * nf + f];
        }
        result.steps[h] = {step.iterations, step.final_delta, step.converged};
        if (!config.teacher_forcing) {
            std::copy(step.level.begin(), step.level.end(), state.begin() + target * nf);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// scenario simulation
// ---------------------------------------------------------------------------

ScenarioConfig ScenarioConfig::uniform(double factor) {
    ScenarioConfig config;
    const auto& schema = FeatureSchema::instance();
    for (std::size_t f : schema.scenario_pollutant_indices()) {
        config.factors[schema.at(f).name] = factor;
    }
    return config;
}

ScenarioReport simulate_scenario(const AaeParams& params,
                                 const dataprep::FeatureFrame& baseline_unscaled,
                                 const dataprep::ScalerParams& scaler,
                                 const ScenarioConfig& scenario, const ForecastConfig& config) {
    const auto& schema = FeatureSchema::instance();
    for (const auto& [name, factor] : scenario.factors) {
        schema.index_of(name);  // throws on unknown features
        if (factor <= 0.0) {
            throw ValidationError("scenario factor for '" + name + "' must be > 0");
        }
    }

    dataprep::FeatureFrame perturbed = baseline_unscaled;
    for (const auto& [name, factor] : scenario.factors) {
        const std::size_t f = schema.index_of(name);
        for (std::size_t r = 0; r < perturbed.rows(); ++r) perturbed.at(r, f) *= factor;
    }

    // shared clamp mask: exogenous channels pinned, pollutants included unless
    // disabled
    ForecastConfig branch_config = config;
    if (branch_config.inpaint.clamp_mask.empty()) {
        branch_config.inpaint.clamp_mask = exogenous_clamp_mask();
    }
    if (!scenario.clamp_pollutants) {
        for (std::size_t f : schema.scenario_pollutant_indices()) {
            branch_config.inpaint.clamp_mask[f] = false;
        }
    }

    dataprep::FeatureFrame base_scaled = dataprep::transform(baseline_unscaled, scaler);
    dataprep::FeatureFrame pert_scaled = dataprep::transform(perturbed, scaler);

    const std::size_t br = schema.index_of("br_avg");
    const std::size_t hr = schema.index_of("heart_rt");
    const std::size_t nf = FeatureSchema::kCount;
    const std::size_t ctx = params.hp().ntimes - 1;

    double br_delta_acc = 0.0, hr_delta_acc = 0.0;
    std::size_t n_levels = 0;

    for (const dataprep::GroupRange& g : base_scaled.groups()) {
        const std::size_t rows = g.end - g.begin;
        if (rows < ctx + 1) continue;
        const std::size_t horizon = rows - ctx;

        auto slice_group = [&](const dataprep::FeatureFrame& frame) {
            std::vector<double> data(rows * nf);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t f = 0; f < nf; ++f) data[r * nf + f] = frame.at(g.begin + r, f);
            }
            return Tensor({rows, nf}, std::move(data));
        };

        ForecastResult base = forecast(params, slice_group(base_scaled), horizon, branch_config);
        ForecastResult pert = forecast(params, slice_group(pert_scaled), horizon, branch_config);

        for (std::size_t h = 0; h < horizon; ++h) {
            const double br_base = scaler.inverse_value(br, base.value(h, br));
            const double br_pert = scaler.inverse_value(br, pert.value(h, br));
            const double hr_base = scaler.inverse_value(hr, base.value(h, hr));
            const double hr_pert = scaler.inverse_value(hr, pert.value(h, hr));
            br_delta_acc += 100.0 * (br_pert - br_base) / br_base;
            hr_delta_acc += 100.0 * (hr_pert - hr_base) / hr_base;
            ++n_levels;
        }
    }
    if (n_levels == 0) {
        throw ValidationError("scenario simulation found no group long enough to forecast");
    }

    ScenarioReport report;
    report.factors = scenario.factors;
    report.br_delta_pct = br_delta_acc / static_cast<double>(n_levels);
    report.hr_delta_pct = hr_delta_acc / static_cast<double>(n_levels);
    report.n_windows = n_levels;
    return report;
}

void write_scenario_json(const ScenarioReport& report, const std::filesystem::path& path) {
    json doc;
    doc["pollutant_factors"] = report.factors;
    doc["br_delta_pct"] = report.br_delta_pct;
    doc["hr_delta_pct"] = report.hr_delta_pct;
    doc["n_windows"] = report.n_windows;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scenario report " + path.string());
    out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

EvalResult evaluate(const std::vector<double>& predicted, const std::vector<double>& actual) {
    return evaluate_matrix(predicted, actual, 1);
}

EvalResult evaluate_matrix(const std::vector<double>& predicted,
                           const std::vector<double>& actual, std::size_t n_features) {
    if (predicted.size() != actual.size()) {
        throw DimensionError("evaluate: predicted has " + std::to_string(predicted.size()) +
                             " values, actual has " + std::to_string(actual.size()));
    }
    if (predicted.empty()) throw ValidationError("evaluate: empty series");
    if (n_features == 0 || predicted.size() % n_features != 0) {
        throw DimensionError("evaluate: series length is not a multiple of the feature count");
    }
    const std::size_t n = predicted.size();

    EvalResult result;
    double sse = 0.0, pred_mean = 0.0, actual_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = predicted[i] - actual[i];
        sse += d * d;
        pred_mean += predicted[i];
        actual_mean += actual[i];
    }
    pred_mean /= static_cast<double>(n);
    actual_mean /= static_cast<double>(n);
    result.mse = sse / static_cast<double>(n);

    // denominator with the prediction mean standing in for every value
    double tot_listing = 0.0, tot_standard = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dl = pred_mean - actual[i];
        tot_listing += dl * dl;
        const double ds = actual[i] - actual_mean;
        tot_standard += ds * ds;
    }
    if (tot_listing > 0.0) {
        result.r2_listing = 1.0 - sse / tot_listing;
    }
    if (tot_standard > 0.0) {
        result.r2_standard = 1.0 - sse / tot_standard;
    }

    result.per_feature_mse.assign(n_features, 0.0);
    const std::size_t rows = n / n_features;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t f = 0; f < n_features; ++f) {
            const double d = predicted[i * n_features + f] - actual[i * n_features + f];
            result.per_feature_mse[f] += d * d;
        }
    }
    for (double& v : result.per_feature_mse) v /= static_cast<double>(rows);
    return result;
}

void write_eval_json(const EvalResult& result, const std::filesystem::path& path) {
    json doc;
    doc["mse"] = result.mse;
    doc["r2_listing"] = result.r2_listing ? json(*result.r2_listing) : json(nullptr);
    doc["r2_standard"] = result.r2_standard ? json(*result.r2_standard) : json(nullptr);
    doc["per_feature_mse"] = result.per_feature_mse;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write evaluation report " + path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace aircast::infer
