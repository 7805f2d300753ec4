#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aircast/aae.hpp"
#include "aircast/adam.hpp"
#include "aircast/dataprep.hpp"

namespace aircast::train {

struct TrainConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 64;

    std::size_t rollout_depth = 3;
    std::size_t rollout_start_epoch = 5;  // 1-based; 0 or depth 0 disables rollout
    std::size_t rollout_samples_per_batch = 8;
    double rollout_weight = 1.0;

    num::AdamConfig encdec_opt{};  // lr 1e-3 defaults
    num::AdamConfig disc_opt{};

    std::uint64_t seed = 0;
    std::string checkpoint_path;            // best-validation checkpoint, empty = don't save
    std::vector<std::string> freeze_mask;   // layer-group names kept fixed
};

// freeze everything except the decoder's last two layers, lr 1e-4, short run
TrainConfig default_fine_tune_config();

struct EpochLosses {
    std::size_t epoch = 0;  // 1-based
    double recon = 0.0;
    double adversarial = 0.0;
    double rollout = 0.0;
    double total = 0.0;
    double val_mse = 0.0;
};

struct TrainReport {
    std::vector<EpochLosses> epochs;
    double wall_seconds = 0.0;   // not serialized; runs must replay byte-identically
    double final_val_mse = 0.0;  // of the best epoch
    std::size_t best_epoch = 0;
};

void write_report_json(const TrainReport& report, const std::filesystem::path& path);
void write_report_csv(const TrainReport& report, const std::filesystem::path& path);

// scaled feature frames; validation drives checkpoint selection
struct Dataset {
    dataprep::FeatureFrame train;
    dataprep::FeatureFrame validation;
};

// Contiguous training slices that extend a window by `depth` extra levels,
// the raw material for rollout loss.
class RolloutPool {
public:
    static RolloutPool build(const dataprep::FeatureFrame& frame, std::size_t ntimes,
                             std::size_t depth);
    bool empty() const { return starts_.empty(); }
    std::size_t slice_length() const { return ntimes_ + depth_; }
    // [count, ntimes + depth, features]
    num::Tensor sample(std::size_t count, Rng& rng) const;

private:
    std::size_t ntimes_ = 0, depth_ = 0, features_ = 0;
    std::vector<std::vector<double>> groups_;           // row-major per group
    std::vector<std::pair<std::size_t, std::size_t>> starts_;  // (group, first row)
};

// Multi-step prediction loss: starting from the real first window of each
// slice, autoregressively inpaint the next `depth` levels (one network pass
// per level, gradients flowing through the chain) and average the MSE against
// the ground-truth levels.
num::Tensor rollout_loss(num::Tape& tape, const model::AaeParams& params,
                         const num::Tensor& series, std::size_t depth);

// mean reconstruction error over a window set, forward passes only
double reconstruction_mse(const model::AaeParams& params, const dataprep::WindowTensor& windows,
                          std::size_t batch_size = 64);

// One adversarial training pass per batch: encoder/decoder step on
// L_rec + lambda * generator term (+ rollout), then a discriminator step on
// the adversarial loss with the batch's latent codes held fixed.
class Trainer {
public:
    Trainer(model::AaeParams& params, const TrainConfig& config);

    EpochLosses run_epoch(const dataprep::WindowTensor& windows, const RolloutPool* rollout,
                          std::size_t epoch_index);

    const std::vector<std::string>& frozen_groups() const { return frozen_; }

private:
    model::AaeParams& params_;
    TrainConfig config_;
    std::vector<std::string> frozen_;
    std::vector<num::Tensor> trainable_encdec_;
    std::vector<num::Tensor> trainable_disc_;
    std::unique_ptr<num::Adam> opt_encdec_;
    std::unique_ptr<num::Adam> opt_disc_;
    Rng prior_rng_;
    Rng rollout_rng_;
};

std::pair<model::AaeParams, TrainReport> train(const Dataset& dataset,
                                               const model::HyperParams& hp,
                                               const TrainConfig& config);

// clone the pretrained weights, freeze all but the configured groups
// (default: dec_tconv1 and dec_tconv2) and adapt on the personal dataset
std::pair<model::AaeParams, TrainReport> fine_tune(const model::AaeParams& pretrained,
                                                   const Dataset& personal,
                                                   TrainConfig config);

// single binary container: magic, length-prefixed JSON header, then raw
// little-endian float64 payloads in header order
void save_checkpoint(const model::AaeParams& params, const std::filesystem::path& path,
                     const std::string& metadata_json = "{}");
model::AaeParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_header_json(const std::filesystem::path& path);

}  // namespace aircast::train
