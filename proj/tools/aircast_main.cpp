// aircast: train and interrogate adversarial-autoencoder forecasters for
// wearable physiology under air-pollution exposure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aircast/csv.hpp"
#include "aircast/dataprep.hpp"
#include "aircast/errors.hpp"
#include "aircast/hash.hpp"
#include "aircast/inference.hpp"
#include "aircast/ingest.hpp"
#include "aircast/runconfig.hpp"
#include "aircast/synthgen.hpp"
#include "aircast/timeutil.hpp"
#include "aircast/training.hpp"

namespace fs = std::filesystem;
using aircast::cli::Manifest;
using aircast::cli::RunConfig;
using json = nlohmann::json;

namespace {

bool verbose(const RunConfig& cfg) { return cfg.log_level != "quiet"; }

void say(const RunConfig& cfg, const std::string& line) {
    if (verbose(cfg)) std::printf("%s\n", line.c_str());
}

fs::path ensure_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw aircast::IoError("cannot create output directory " + dir.string());
    }
    // confirm writability up front
    const fs::path probe = dir / ".aircast_probe";
    std::ofstream test(probe);
    if (!test) throw aircast::IoError("output directory " + dir.string() + " is not writable");
    test.close();
    fs::remove(probe, ec);
    return dir;
}

fs::path require_file(const std::string& path, const char* what) {
    if (path.empty()) {
        throw aircast::ConfigError(std::string("missing required path for ") + what);
    }
    fs::path p(path);
    if (!fs::is_regular_file(p)) {
        throw aircast::IoError(std::string(what) + " file not found: " + p.string());
    }
    return p;
}

aircast::model::HyperParams hyper_params(const RunConfig& cfg) {
    aircast::model::HyperParams hp;
    hp.latent_dim = cfg.latent_dim;
    hp.lambda_adv = cfg.lambda_adv;
    hp.adv_sign_convention = aircast::model::parse_adv_sign_convention(cfg.adv_sign_convention);
    hp.seed = cfg.seed;
    return hp;
}

aircast::infer::ForecastConfig forecast_config(const RunConfig& cfg) {
    aircast::infer::ForecastConfig fc;
    fc.inpaint.max_iterations = cfg.inpaint_iterations;
    fc.inpaint.tolerance = cfg.inpaint_tolerance;
    fc.inpaint.guess_noise_std = cfg.guess_noise_std;
    fc.inpaint.seed = cfg.seed;
    fc.teacher_forcing = cfg.teacher_forcing;
    if (!cfg.full_inpaint) fc.inpaint.clamp_mask = aircast::infer::exogenous_clamp_mask();
    return fc;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg) {
    const fs::path out = ensure_out_dir(cfg);
    aircast::synth::GeneratorConfig gen;
    gen.seed = cfg.seed;
    gen.n_participants = cfg.participants;
    gen.days_per_period = cfg.days;
    gen.sample_interval_minutes = cfg.interval_minutes;
    gen.include_winter = cfg.include_winter;
    gen.baseline_br = cfg.baseline_br;
    gen.pollution_sensitivity = cfg.pollution_sensitivity;
    gen.activity_sensitivity = cfg.activity_sensitivity;
    gen.home_lat = cfg.lat;
    gen.home_lon = cfg.lon;

    aircast::synth::Cohort cohort = aircast::synth::generate_cohort(gen);
    aircast::write_records_csv(out / "cohort.csv", cohort.records);
    cohort.truth.save(out / "ground_truth.json");

    double br_lo = 1e9, br_hi = -1e9;
    for (const auto& r : cohort.records) {
        br_lo = std::min(br_lo, r.br_avg);
        br_hi = std::max(br_hi, r.br_avg);
    }
    say(cfg, "generated " + std::to_string(cohort.records.size()) + " records for " +
                 std::to_string(gen.n_participants) + " participants (br " +
                 aircast::format_double(br_lo) + ".." + aircast::format_double(br_hi) + ")");

    aircast::cli::write_manifest({"gen-data", cfg, {}, {"cohort.csv", "ground_truth.json"}}, out);
    return 0;
}

int cmd_prep(const RunConfig& cfg) {
    const fs::path data = require_file(cfg.data_csv, "input data CSV");
    const fs::path out = ensure_out_dir(cfg);

    auto records = aircast::read_records_csv(data);
    const std::size_t temp_fixed = aircast::dataprep::clean_temperature(records);
    const std::size_t br_fixed = aircast::dataprep::clean_breathing_rate(records);
    aircast::dataprep::fill_missing_env(records);

    auto frame = aircast::dataprep::assemble_frame(records);
    aircast::dataprep::encode_cyclical(frame);
    aircast::dataprep::derive_heart_rate(frame, cfg.hr_noise, cfg.seed);

    auto splits = aircast::dataprep::split(frame, cfg.train_frac, cfg.val_frac, cfg.test_frac);
    auto scaler = aircast::dataprep::fit_scaler(splits.train, "train");
    scaler.save(out / "scaler.json");

    json report;
    report["rows"] = frame.rows();
    report["temperature_clamped"] = temp_fixed;
    report["breathing_rate_replaced"] = br_fixed;
    std::vector<std::string> outputs = {"scaler.json", "prep_report.json"};

    const std::pair<const char*, const aircast::dataprep::FeatureFrame*> parts[] = {
        {"train", &splits.train}, {"val", &splits.validation}, {"test", &splits.test}};
    for (const auto& [name, part] : parts) {
        if (part->rows() == 0) continue;
        auto scaled = aircast::dataprep::transform(*part, scaler);
        const std::string file = std::string(name) + ".csv";
        scaled.to_csv(out / file);
        outputs.push_back(file);
        std::vector<std::string> warnings;
        auto windows = aircast::dataprep::build_windows(scaled, 8, 7, &warnings);
        report[name] = {{"rows", part->rows()},
                        {"windows", {windows.samples(), windows.ntimes(), windows.features()}}};
        say(cfg, std::string(name) + ": " + std::to_string(part->rows()) + " rows, windows [" +
                     std::to_string(windows.samples()) + ", " +
                     std::to_string(windows.ntimes()) + ", " +
                     std::to_string(windows.features()) + "]");
        for (const auto& w : warnings) say(cfg, "warning: " + w);
    }
    std::ofstream(out / "prep_report.json") << report.dump(2) << '\n';

    aircast::cli::write_manifest({"prep", cfg, {data}, outputs}, out);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    const fs::path train_csv = require_file(cfg.features_dir + "/train.csv", "training features");
    const fs::path val_csv = require_file(cfg.features_dir + "/val.csv", "validation features");
    const fs::path out = ensure_out_dir(cfg);

    aircast::train::Dataset dataset{aircast::dataprep::FeatureFrame::from_csv(train_csv),
                                    aircast::dataprep::FeatureFrame::from_csv(val_csv)};

    aircast::train::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.rollout_depth = cfg.rollout_depth;
    tc.rollout_start_epoch = cfg.rollout_start_epoch;
    tc.rollout_samples_per_batch = cfg.rollout_samples;
    tc.rollout_weight = cfg.rollout_weight;
    tc.encdec_opt.learning_rate = cfg.learning_rate;
    tc.disc_opt.learning_rate = cfg.disc_learning_rate;
    tc.seed = cfg.seed;
    tc.checkpoint_path = (out / "checkpoint.aae").string();

    auto [params, report] = aircast::train::train(dataset, hyper_params(cfg), tc);
    aircast::train::write_report_json(report, out / "train_report.json");
    aircast::train::write_report_csv(report, out / "train_report.csv");

    for (const auto& e : report.epochs) {
        say(cfg, "epoch " + std::to_string(e.epoch) + ": recon " +
                     aircast::format_double(e.recon) + ", adv " +
                     aircast::format_double(e.adversarial) + ", rollout " +
                     aircast::format_double(e.rollout) + ", val " +
                     aircast::format_double(e.val_mse));
    }
    say(cfg, "best epoch " + std::to_string(report.best_epoch) + " with validation mse " +
                 aircast::format_double(report.final_val_mse) + " (" +
                 aircast::format_double(report.wall_seconds) + " s)");

    aircast::cli::write_manifest({"train", cfg, {train_csv, val_csv},
                                  {"checkpoint.aae", "train_report.json", "train_report.csv"}},
                                 out);
    return 0;
}

int cmd_finetune(const RunConfig& cfg, bool epochs_set, bool lr_set) {
    const fs::path ckpt = require_file(cfg.checkpoint, "pretrained checkpoint");
    const fs::path train_csv =
        require_file(cfg.features_dir + "/train.csv", "personal training features");
    // the held-out 20% doubles as the validation series
    fs::path val_csv(cfg.features_dir + "/val.csv");
    if (!fs::is_regular_file(val_csv)) {
        val_csv = require_file(cfg.features_dir + "/test.csv", "personal held-out features");
    }
    const fs::path out = ensure_out_dir(cfg);

    auto pretrained = aircast::train::load_checkpoint(ckpt);
    aircast::train::Dataset personal{aircast::dataprep::FeatureFrame::from_csv(train_csv),
                                     aircast::dataprep::FeatureFrame::from_csv(val_csv)};

    aircast::train::TrainConfig tc = aircast::train::default_fine_tune_config();
    if (epochs_set) tc.epochs = cfg.epochs;
    if (lr_set) {
        tc.encdec_opt.learning_rate = cfg.learning_rate;
        tc.disc_opt.learning_rate = cfg.learning_rate;
    }
    tc.batch_size = cfg.batch_size;
    tc.seed = cfg.seed;
    if (!cfg.freeze_mask.empty()) tc.freeze_mask = cfg.freeze_mask;
    tc.checkpoint_path = (out / "checkpoint.aae").string();

    auto [adapted, report] = aircast::train::fine_tune(pretrained, personal, tc);
    aircast::train::write_report_json(report, out / "train_report.json");
    aircast::train::write_report_csv(report, out / "train_report.csv");
    say(cfg, "fine-tuned " + std::to_string(report.epochs.size()) + " epochs; held-out mse " +
                 aircast::format_double(report.final_val_mse));

    aircast::cli::write_manifest({"finetune", cfg, {ckpt, train_csv, val_csv},
                                  {"checkpoint.aae", "train_report.json", "train_report.csv"}},
                                 out);
    return 0;
}

int cmd_predict(const RunConfig& cfg) {
    const fs::path ckpt = require_file(cfg.checkpoint, "checkpoint");
    const fs::path test_csv = require_file(cfg.features_dir + "/test.csv", "test features");
    const fs::path scaler_path = require_file(cfg.scaler, "scaler parameters");
    const fs::path out = ensure_out_dir(cfg);

    auto params = aircast::train::load_checkpoint(ckpt);
    auto frame = aircast::dataprep::FeatureFrame::from_csv(test_csv);
    auto scaler = aircast::dataprep::ScalerParams::load(scaler_path);
    const auto fc = forecast_config(cfg);
    const auto& schema = aircast::FeatureSchema::instance();
    const std::size_t nf = aircast::FeatureSchema::kCount;
    const std::size_t ctx = params.hp().ntimes - 1;

    std::vector<std::vector<std::string>> rows;
    std::vector<double> all_pred, all_actual;
    std::size_t converged = 0, steps_total = 0;

    for (const auto& g : frame.groups()) {
        const std::size_t rows_in_group = g.end - g.begin;
        if (rows_in_group < ctx + 1) continue;
        std::size_t horizon = rows_in_group - ctx;
        if (cfg.horizon > 0) horizon = std::min(horizon, cfg.horizon);

        std::vector<double> series(rows_in_group * nf);
        for (std::size_t r = 0; r < rows_in_group; ++r) {
            for (std::size_t f = 0; f < nf; ++f) series[r * nf + f] = frame.at(g.begin + r, f);
        }
        auto result = aircast::infer::forecast(
            params, aircast::num::Tensor({rows_in_group, nf}, std::move(series)), horizon, fc);

        for (std::size_t h = 0; h < horizon; ++h) {
            const auto& meta = frame.meta(g.begin + ctx + h);
            for (std::size_t f = 0; f < nf; ++f) {
                const double ps = result.predicted_scaled[h * nf + f];
                const double as = result.actual_scaled[h * nf + f];
                rows.push_back({meta.participant, aircast::period_name(meta.period),
                                aircast::format_iso8601(meta.timestamp), schema.at(f).name,
                                aircast::format_double(scaler.inverse_value(f, as)),
                                aircast::format_double(scaler.inverse_value(f, ps)),
                                aircast::format_double(as), aircast::format_double(ps)});
            }
            all_pred.insert(all_pred.end(), result.predicted_scaled.begin() + h * nf,
                            result.predicted_scaled.begin() + (h + 1) * nf);
            all_actual.insert(all_actual.end(), result.actual_scaled.begin() + h * nf,
                              result.actual_scaled.begin() + (h + 1) * nf);
        }
        for (const auto& s : result.steps) {
            ++steps_total;
            if (s.converged) ++converged;
        }
    }
    if (all_pred.empty()) throw aircast::ValidationError("no group is long enough to forecast");

    aircast::write_csv(out / "predictions.csv",
                       {"participant_id", "period", "timestamp", "feature", "actual",
                        "predicted", "actual_scaled", "predicted_scaled"},
                       rows);

    auto eval = aircast::infer::evaluate_matrix(all_pred, all_actual, nf);
    double physio_mse = 0.0;
    for (std::size_t f : schema.physiological_indices()) physio_mse += eval.per_feature_mse[f];
    physio_mse /= static_cast<double>(schema.physiological_indices().size());

    json doc;
    doc["mse"] = eval.mse;
    doc["physio_mse"] = physio_mse;
    doc["br_mse"] = eval.per_feature_mse[schema.index_of("br_avg")];
    doc["r2_listing"] = eval.r2_listing ? json(*eval.r2_listing) : json(nullptr);
    doc["r2_standard"] = eval.r2_standard ? json(*eval.r2_standard) : json(nullptr);
    doc["converged_steps"] = converged;
    doc["total_steps"] = steps_total;
    json per_feature = json::object();
    for (std::size_t f = 0; f < nf; ++f) per_feature[schema.at(f).name] = eval.per_feature_mse[f];
    doc["per_feature_mse"] = std::move(per_feature);
    std::ofstream(out / "eval.json") << doc.dump(2) << '\n';

    say(cfg, "forecast " + std::to_string(steps_total) + " levels, physio mse " +
                 aircast::format_double(physio_mse) + ", converged " +
                 std::to_string(converged) + "/" + std::to_string(steps_total));

    aircast::cli::write_manifest(
        {"predict", cfg, {ckpt, test_csv, scaler_path}, {"predictions.csv", "eval.json"}}, out);
    return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::vector<std::string>& factor_overrides) {
    const fs::path ckpt = require_file(cfg.checkpoint, "checkpoint");
    const fs::path test_csv = require_file(cfg.features_dir + "/test.csv", "test features");
    const fs::path scaler_path = require_file(cfg.scaler, "scaler parameters");
    const fs::path out = ensure_out_dir(cfg);

    auto params = aircast::train::load_checkpoint(ckpt);
    auto scaled = aircast::dataprep::FeatureFrame::from_csv(test_csv);
    auto scaler = aircast::dataprep::ScalerParams::load(scaler_path);
    auto baseline = aircast::dataprep::inverse_transform(scaled, scaler);

    auto scenario = aircast::infer::ScenarioConfig::uniform(cfg.factor);
    scenario.clamp_pollutants = cfg.clamp_pollutants;
    for (const std::string& assignment : factor_overrides) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) {
            throw aircast::ConfigError("expected NAME=FACTOR, got '" + assignment + "'");
        }
        scenario.factors[assignment.substr(0, eq)] =
            aircast::parse_double_field(assignment.substr(eq + 1), "factor", 0);
    }

    auto report = aircast::infer::simulate_scenario(params, baseline, scaler, scenario,
                                                    forecast_config(cfg));
    aircast::infer::write_scenario_json(report, out / "scenario.json");
    say(cfg, "br delta " + aircast::format_double(report.br_delta_pct) + "%, hr delta " +
                 aircast::format_double(report.hr_delta_pct) + "% over " +
                 std::to_string(report.n_windows) + " levels");

    aircast::cli::write_manifest(
        {"simulate", cfg, {ckpt, test_csv, scaler_path}, {"scenario.json"}}, out);
    return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
    const fs::path pred = require_file(cfg.pred_csv, "predictions frame");
    const fs::path actual = require_file(cfg.actual_csv, "actuals frame");
    const fs::path out = ensure_out_dir(cfg);

    auto pf = aircast::dataprep::FeatureFrame::from_csv(pred);
    auto af = aircast::dataprep::FeatureFrame::from_csv(actual);
    if (pf.rows() != af.rows()) {
        throw aircast::ValidationError("predicted and actual frames differ in length");
    }
    auto result = aircast::infer::evaluate_matrix(pf.values(), af.values(),
                                                  aircast::FeatureSchema::kCount);
    aircast::infer::write_eval_json(result, out / "eval.json");
    say(cfg, "mse " + aircast::format_double(result.mse) +
                 (result.r2_standard ? ", r2 " + aircast::format_double(*result.r2_standard)
                                     : std::string(", r2 undefined")));

    aircast::cli::write_manifest({"evaluate", cfg, {pred, actual}, {"eval.json"}}, out);
    return 0;
}

int cmd_ingest(const RunConfig& cfg) {
    const fs::path out = ensure_out_dir(cfg);
    if (cfg.start_time.empty() || cfg.end_time.empty()) {
        throw aircast::ConfigError("ingest needs --start and --end (ISO-8601 UTC)");
    }
    aircast::ingest::ApiConfig api;
    api.base_url = cfg.base_url;
    if (!cfg.fixtures_dir.empty()) {
        if (!fs::is_directory(cfg.fixtures_dir)) {
            throw aircast::IoError("fixture directory not found: " + cfg.fixtures_dir);
        }
        api.fixture_dir = cfg.fixtures_dir;
    }
    aircast::ingest::EnvClient client(api);
    const aircast::ingest::GeoPoint point(cfg.lat, cfg.lon);
    const aircast::ingest::TimeRange range{aircast::parse_iso8601(cfg.start_time),
                                           aircast::parse_iso8601(cfg.end_time)};

    auto air = client.fetch_air_quality(point, range);
    auto weather = client.fetch_weather(point, range);
    say(cfg, "fetched " + std::to_string(air.size()) + " air samples, " +
                 std::to_string(weather.size()) + " weather samples");

    std::vector<aircast::ingest::EnvSample> all = air;
    all.insert(all.end(), weather.begin(), weather.end());
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    aircast::ingest::write_env_csv(out / "env.csv", all);

    std::vector<std::string> outputs = {"env.csv"};
    std::vector<fs::path> inputs;
    if (!cfg.records_csv.empty()) {
        const fs::path rec_path = require_file(cfg.records_csv, "records CSV");
        inputs.push_back(rec_path);
        auto records = aircast::read_records_csv(rec_path);
        auto air_stats = aircast::ingest::geo_temporal_join(records, air);
        auto weather_stats = aircast::ingest::geo_temporal_join(records, weather);
        aircast::write_records_csv(out / "enriched.csv", records);
        outputs.push_back("enriched.csv");
        say(cfg, "join: air " + std::to_string(air_stats.matched) + "/" +
                     std::to_string(records.size()) + " matched, weather " +
                     std::to_string(weather_stats.matched) + "/" +
                     std::to_string(records.size()));
    }
    aircast::cli::write_manifest({"ingest", cfg, inputs, outputs}, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;

    // the config file applies first so explicit flags can override it
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg == "--config" && i + 1 < argc) {
                cfg.apply_file(argv[i + 1]);
            } else if (arg.rfind("--config=", 0) == 0) {
                cfg.apply_file(arg.substr(9));
            }
        }
    } catch (const aircast::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const aircast::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }

    CLI::App app{"adversarial-autoencoder pipeline for pollution-response forecasting"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override its values)");

    auto add_common = [&](CLI::App* sub) {
        // accepted here too; the pre-scan above already loaded the file
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", cfg.seed, "random seed");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--log-level", cfg.log_level, "info or quiet");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic cohort");
    add_common(gen);
    gen->add_option("--participants", cfg.participants);
    gen->add_option("--days", cfg.days);
    gen->add_option("--interval-minutes", cfg.interval_minutes);
    gen->add_flag("--include-winter", cfg.include_winter);
    gen->add_option("--baseline-br", cfg.baseline_br);
    gen->add_option("--pollution-sensitivity", cfg.pollution_sensitivity);
    gen->add_option("--activity-sensitivity", cfg.activity_sensitivity);
    gen->add_option("--lat", cfg.lat);
    gen->add_option("--lon", cfg.lon);

    CLI::App* prep = app.add_subcommand("prep", "clean, engineer, scale and split features");
    add_common(prep);
    prep->add_option("--data", cfg.data_csv, "raw cohort CSV");
    prep->add_option("--train-frac", cfg.train_frac);
    prep->add_option("--val-frac", cfg.val_frac);
    prep->add_option("--test-frac", cfg.test_frac);
    prep->add_option("--hr-noise", cfg.hr_noise);

    CLI::App* train_cmd = app.add_subcommand("train", "adversarial + rollout training");
    add_common(train_cmd);
    train_cmd->add_option("--features", cfg.features_dir, "directory with train.csv/val.csv");
    train_cmd->add_option("--epochs", cfg.epochs);
    train_cmd->add_option("--batch-size", cfg.batch_size);
    train_cmd->add_option("--latent-dim", cfg.latent_dim);
    train_cmd->add_option("--lambda-adv", cfg.lambda_adv);
    train_cmd->add_option("--adv-sign-convention", cfg.adv_sign_convention);
    train_cmd->add_option("--rollout-depth", cfg.rollout_depth);
    train_cmd->add_option("--rollout-start-epoch", cfg.rollout_start_epoch);
    train_cmd->add_option("--rollout-samples", cfg.rollout_samples);
    train_cmd->add_option("--rollout-weight", cfg.rollout_weight);
    train_cmd->add_option("--lr", cfg.learning_rate);
    train_cmd->add_option("--lr-disc", cfg.disc_learning_rate);

    CLI::App* finetune = app.add_subcommand("finetune", "adapt a checkpoint to personal data");
    add_common(finetune);
    finetune->add_option("--checkpoint", cfg.checkpoint, "pretrained checkpoint");
    finetune->add_option("--features", cfg.features_dir, "directory with train.csv/test.csv");
    auto* ft_epochs = finetune->add_option("--epochs", cfg.epochs);
    auto* ft_lr = finetune->add_option("--lr", cfg.learning_rate);
    finetune->add_option("--batch-size", cfg.batch_size);
    finetune->add_option("--freeze", cfg.freeze_mask, "layer groups to freeze")->delimiter(',');

    CLI::App* predict = app.add_subcommand("predict", "inpainting forecast over the test split");
    add_common(predict);
    predict->add_option("--checkpoint", cfg.checkpoint);
    predict->add_option("--features", cfg.features_dir, "directory with test.csv");
    predict->add_option("--scaler", cfg.scaler, "scaler.json from prep");
    predict->add_option("--horizon", cfg.horizon, "levels per group (0 = all)");
    predict->add_option("--inpaint-iterations", cfg.inpaint_iterations);
    predict->add_option("--inpaint-tolerance", cfg.inpaint_tolerance);
    predict->add_option("--guess-noise", cfg.guess_noise_std);
    predict->add_flag("--teacher-forcing", cfg.teacher_forcing);
    predict->add_flag("--full-inpaint", cfg.full_inpaint, "inpaint every channel");

    CLI::App* simulate = app.add_subcommand("simulate", "counterfactual pollution scenario");
    add_common(simulate);
    std::vector<std::string> factor_overrides;
    simulate->add_option("--checkpoint", cfg.checkpoint);
    simulate->add_option("--features", cfg.features_dir, "directory with test.csv");
    simulate->add_option("--scaler", cfg.scaler);
    simulate->add_option("--factor", cfg.factor, "uniform pollutant factor (2.0 = +100%)");
    simulate->add_option("--pollutant-factor", factor_overrides,
                         "per-pollutant override NAME=FACTOR");
    simulate->add_flag("!--no-clamp-pollutants", cfg.clamp_pollutants);
    simulate->add_option("--inpaint-iterations", cfg.inpaint_iterations);
    simulate->add_option("--inpaint-tolerance", cfg.inpaint_tolerance);
    simulate->add_option("--guess-noise", cfg.guess_noise_std);

    CLI::App* evaluate = app.add_subcommand("evaluate", "MSE and both R2 variants");
    add_common(evaluate);
    evaluate->add_option("--pred", cfg.pred_csv, "predicted feature frame CSV");
    evaluate->add_option("--actual", cfg.actual_csv, "actual feature frame CSV");

    CLI::App* ingest = app.add_subcommand("ingest", "fetch environmental data, optionally join");
    add_common(ingest);
    ingest->add_option("--fixtures", cfg.fixtures_dir, "offline fixture directory");
    ingest->add_option("--base-url", cfg.base_url);
    ingest->add_option("--lat", cfg.lat);
    ingest->add_option("--lon", cfg.lon);
    ingest->add_option("--start", cfg.start_time, "range start, ISO-8601 UTC");
    ingest->add_option("--end", cfg.end_time, "range end, ISO-8601 UTC");
    ingest->add_option("--records", cfg.records_csv, "records CSV to enrich via the join");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(cfg);
        if (prep->parsed()) return cmd_prep(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (finetune->parsed()) {
            return cmd_finetune(cfg, ft_epochs->count() > 0, ft_lr->count() > 0);
        }
        if (predict->parsed()) return cmd_predict(cfg);
        if (simulate->parsed()) return cmd_simulate(cfg, factor_overrides);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (ingest->parsed()) return cmd_ingest(cfg);
    } catch (const aircast::NumericError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    } catch (const aircast::CredentialError& e) {
        std::fprintf(stderr, "credential error: %s\n", e.what());
        return 2;
    } catch (const aircast::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const aircast::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const aircast::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
