#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace aircast::cli {

inline constexpr const char* kVersion = "0.1.0";

// Flat, typed key/value configuration shared by every subcommand. A JSON
// config file assigns these keys; command-line flags override file values.
// Unknown keys in the file are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string log_level = "info";

    // paths
    std::string data_csv;
    std::string features_dir;
    std::string checkpoint;
    std::string scaler;
    std::string records_csv;
    std::string pred_csv;
    std::string actual_csv;
    std::string fixtures_dir;

    // synthetic cohort
    std::size_t participants = 5;
    std::size_t days = 14;
    std::size_t interval_minutes = 60;
    bool include_winter = false;
    double baseline_br = 16.0;
    double pollution_sensitivity = 0.035;
    double activity_sensitivity = 0.05;

    // preprocessing
    double train_frac = 0.70;
    double val_frac = 0.15;
    double test_frac = 0.15;
    double hr_noise = 0.10;

    // model and training
    std::size_t latent_dim = 1000;
    double lambda_adv = 1.0;
    std::string adv_sign_convention = "standard";
    std::size_t epochs = 40;
    std::size_t batch_size = 64;
    std::size_t rollout_depth = 3;
    std::size_t rollout_start_epoch = 5;
    std::size_t rollout_samples = 8;
    double rollout_weight = 1.0;
    double learning_rate = 1e-3;
    double disc_learning_rate = 1e-3;
    std::vector<std::string> freeze_mask;  // finetune; empty = decoder-tail default

    // inference
    std::size_t horizon = 0;  // 0 = as far as the series allows
    std::size_t inpaint_iterations = 20;
    double inpaint_tolerance = 1e-4;
    double guess_noise_std = 0.01;
    bool teacher_forcing = false;
    bool full_inpaint = false;  // disable the exogenous clamp

    // scenario
    double factor = 1.0;
    bool clamp_pollutants = true;

    // ingestion
    double lat = 51.5;
    double lon = -0.12;
    std::string start_time;  // ISO-8601
    std::string end_time;
    std::string base_url = "http://api.openweathermap.org";

    // loads a flat JSON object; unknown keys or wrong types are ConfigErrors
    void apply_file(const std::filesystem::path& path);

    // full resolved view, used for manifests and hashing
    std::string to_json_string() const;
};

struct Manifest {
    std::string command;
    RunConfig config;
    std::vector<std::filesystem::path> inputs;   // digested
    std::vector<std::string> outputs;            // file names produced
};

// out_dir/manifest.json with config hash, seed, versions and input digests
void write_manifest(const Manifest& manifest, const std::filesystem::path& out_dir);

}  // namespace aircast::cli
