#include "aircast/training.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "aircast/csv.hpp"
#include "aircast/errors.hpp"

namespace aircast::train {

using json = nlohmann::json;
using model::AaeParams;
using model::HyperParams;
using num::Tape;
using num::Tensor;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

TrainConfig default_fine_tune_config() {
    TrainConfig config;
    config.epochs = 15;
    config.rollout_depth = 0;  // adaptation trains reconstruction only
    config.encdec_opt.learning_rate = 1e-4;
    config.disc_opt.learning_rate = 1e-4;
    const auto& groups = AaeParams::group_names();
    for (const std::string& g : groups) {
        if (g != "dec_tconv1" && g != "dec_tconv2") config.freeze_mask.push_back(g);
    }
    return config;
}

// ---------------------------------------------------------------------------
// rollout machinery
// ---------------------------------------------------------------------------

RolloutPool RolloutPool::build(const dataprep::FeatureFrame& frame, std::size_t ntimes,
                               std::size_t depth) {
    RolloutPool pool;
    pool.ntimes_ = ntimes;
    pool.depth_ = depth;
    pool.features_ = FeatureSchema::kCount;
    if (depth == 0) return pool;
    const std::size_t need = ntimes + depth;
    for (const dataprep::GroupRange& g : frame.groups()) {
        const std::size_t n = g.end - g.begin;
        if (n < need) continue;
        std::vector<double> values(n * pool.features_);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t f = 0; f < pool.features_; ++f) {
                values[r * pool.features_ + f] = frame.at(g.begin + r, f);
            }
        }
        const std::size_t group_index = pool.groups_.size();
        pool.groups_.push_back(std::move(values));
        for (std::size_t start = 0; start + need <= n; ++start) {
            pool.starts_.emplace_back(group_index, start);
        }
    }
    return pool;
}

Tensor RolloutPool::sample(std::size_t count, Rng& rng) const {
    if (starts_.empty()) throw ValidationError("rollout pool is empty");
    const std::size_t len = slice_length();
    std::vector<double> data(count * len * features_);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& [g, start] =
            starts_[static_cast<std::size_t>(rng.uniform() * static_cast<double>(starts_.size()))];
        const double* src = groups_[g].data() + start * features_;
        std::copy(src, src + len * features_, data.data() + i * len * features_);
    }
    return Tensor({count, len, features_}, std::move(data));
}

Tensor rollout_loss(Tape& tape, const AaeParams& params, const Tensor& series,
                    std::size_t depth) {
    const std::size_t nt = params.hp().ntimes;
    if (depth < 1) throw ValidationError("rollout_loss: depth must be >= 1");
    if (series.rank() != 3 || series.dim(1) < nt + depth) {
        throw ValidationError("rollout_loss: series " + num::shape_str(series.shape()) +
                              " must provide at least " + std::to_string(nt + depth) +
                              " time levels");
    }
    const std::size_t batch = series.dim(0);
    const std::size_t nf = series.dim(2);

    std::vector<Tensor> levels;
    levels.reserve(nt + depth);
    for (std::size_t i = 0; i < nt; ++i) levels.push_back(num::slice(tape, series, 1, i, 1));

    Tensor acc;
    for (std::size_t j = 1; j <= depth; ++j) {
        // seven known levels plus the previous level standing in as the guess
        std::vector<Tensor> parts;
        parts.reserve(nt);
        for (std::size_t i = j; i + 1 < j + nt; ++i) parts.push_back(levels[i]);
        parts.push_back(levels[j + nt - 2]);
        Tensor window = num::concat(tape, parts, 1);
        window = num::reshape(tape, window, {batch, nt, nf});
        Tensor out = model::decode(tape, params, model::encode(tape, params, window));
        Tensor predicted = num::slice(tape, out, 1, nt - 1, 1);
        levels.push_back(predicted);
        Tensor truth = num::slice(tape, series, 1, nt - 1 + j, 1);
        Tensor step_loss = num::mse_loss(tape, predicted, truth);
        acc = acc.defined() ? num::add(tape, acc, step_loss) : step_loss;
    }
    return num::scale(tape, acc, 1.0 / static_cast<double>(depth));
}

// ---------------------------------------------------------------------------
// evaluation helpers
// ---------------------------------------------------------------------------

namespace {

Tensor gather_windows(const dataprep::WindowTensor& windows, const std::vector<std::size_t>& order,
                      std::size_t from, std::size_t to) {
    const std::size_t nt = windows.ntimes(), nf = windows.features();
    const std::size_t span = nt * nf;
    std::vector<double> data((to - from) * span);
    for (std::size_t i = from; i < to; ++i) {
        const double* src = windows.data.data() + order[i] * span;
        std::copy(src, src + span, data.data() + (i - from) * span);
    }
    return Tensor({to - from, nt, nf}, std::move(data));
}

void zero_grads(const std::vector<Tensor>& tensors) {
    for (const Tensor& t : tensors) {
        Tensor mutable_t = t;
        mutable_t.zero_grad();
    }
}

}  // namespace

double reconstruction_mse(const AaeParams& params, const dataprep::WindowTensor& windows,
                          std::size_t batch_size) {
    if (windows.samples() == 0) throw ValidationError("reconstruction_mse: no windows");
    std::vector<std::size_t> order(windows.samples());
    std::iota(order.begin(), order.end(), 0);
    double sse = 0.0;
    std::size_t count = 0;
    for (std::size_t from = 0; from < order.size(); from += batch_size) {
        const std::size_t to = std::min(order.size(), from + batch_size);
        Tensor x = gather_windows(windows, order, from, to);
        Tape tape(false);
        Tensor xr = model::decode(tape, params, model::encode(tape, params, x));
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = xr[i] - x[i];
            sse += d * d;
        }
        count += x.size();
    }
    return sse / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(AaeParams& params, const TrainConfig& config)
    : params_(params),
      config_(config),
      prior_rng_(Rng::derive(config.seed, 0x7072696f72ULL)),
      rollout_rng_(Rng::derive(config.seed, 0x726f6c6cULL)) {
    const auto& groups = AaeParams::group_names();
    std::set<std::string> known(groups.begin(), groups.end());
    std::set<std::string> frozen;
    for (const std::string& g : config.freeze_mask) {
        if (!known.count(g)) throw ConfigError("freeze mask names unknown layer group '" + g + "'");
        frozen.insert(g);
    }
    if (frozen.size() == known.size()) {
        throw ConfigError("freeze mask covers every layer group; nothing left to train");
    }
    frozen_.assign(frozen.begin(), frozen.end());

    for (const auto& [name, tensor] : params.tensors()) {
        const std::string group = name.substr(0, name.find('.'));
        Tensor t = tensor;
        if (frozen.count(group)) {
            t.set_requires_grad(false);
            continue;
        }
        t.set_requires_grad(true);
        if (group.rfind("disc_", 0) == 0) {
            trainable_disc_.push_back(t);
        } else {
            trainable_encdec_.push_back(t);
        }
    }
    if (trainable_encdec_.empty()) {
        throw ConfigError("freeze mask leaves no encoder/decoder parameters trainable");
    }
    opt_encdec_ = std::make_unique<num::Adam>(trainable_encdec_, config.encdec_opt);
    if (!trainable_disc_.empty()) {
        opt_disc_ = std::make_unique<num::Adam>(trainable_disc_, config.disc_opt);
    }
}

EpochLosses Trainer::run_epoch(const dataprep::WindowTensor& windows, const RolloutPool* rollout,
                               std::size_t epoch_index) {
    if (windows.samples() == 0) throw ValidationError("train_epoch: no training windows");
    const double lambda = params_.hp().lambda_adv;
    const bool adversarial_on = lambda > 0.0 && opt_disc_ != nullptr;
    const bool rollout_on = rollout != nullptr && !rollout->empty() &&
                            config_.rollout_depth > 0 && config_.rollout_weight > 0.0 &&
                            config_.rollout_start_epoch > 0 &&
                            epoch_index >= config_.rollout_start_epoch &&
                            config_.rollout_samples_per_batch > 0;

    std::vector<std::size_t> order(windows.samples());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(Rng::derive(config_.seed, 0x65706f63680000ULL + epoch_index));
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j =
            static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i));
        std::swap(order[i - 1], order[j]);
    }

    EpochLosses losses;
    losses.epoch = epoch_index;
    double recon_acc = 0.0, adv_acc = 0.0, roll_acc = 0.0;
    std::size_t n_samples = 0, n_batches = 0, roll_batches = 0;

    for (std::size_t from = 0; from < order.size(); from += config_.batch_size) {
        const std::size_t to = std::min(order.size(), from + config_.batch_size);
        const std::size_t b = to - from;
        Tensor x = gather_windows(windows, order, from, to);

        // encoder/decoder step
        Tape tape;
        Tensor z = model::encode(tape, params_, x);
        Tensor xr = model::decode(tape, params_, z);
        Tensor l_rec = num::mse_loss(tape, xr, x);
        Tensor l_total = l_rec;
        if (adversarial_on) {
            Tensor d_enc = model::discriminate(tape, params_, z);
            Tensor l_gen = model::generator_adversarial_loss(tape, params_, d_enc);
            l_total = num::add(tape, l_total, num::scale(tape, l_gen, lambda));
        }
        if (rollout_on) {
            Tensor slices = rollout->sample(config_.rollout_samples_per_batch, rollout_rng_);
            Tensor l_roll = rollout_loss(tape, params_, slices, config_.rollout_depth);
            l_total = num::add(tape, l_total, num::scale(tape, l_roll, config_.rollout_weight));
            roll_acc += l_roll.item();
            ++roll_batches;
        }
        if (!std::isfinite(l_total.item())) {
            throw NumericError("NaN training loss in epoch " + std::to_string(epoch_index) +
                               ", batch " + std::to_string(n_batches + 1));
        }
        zero_grads(trainable_encdec_);
        zero_grads(trainable_disc_);
        tape.backward(l_total);
        opt_encdec_->step();

        // discriminator step on the same latent codes, detached
        if (adversarial_on) {
            Tape disc_tape;
            Tensor z_fixed = z.detach();
            Tensor z_prior = model::sample_prior(b, params_.hp().latent_dim, prior_rng_);
            Tensor d_enc = model::discriminate(disc_tape, params_, z_fixed);
            Tensor d_prior = model::discriminate(disc_tape, params_, z_prior);
            Tensor l_adv = model::discriminator_loss(disc_tape, params_, d_prior, d_enc);
            if (!std::isfinite(l_adv.item())) {
                throw NumericError("NaN adversarial loss in epoch " + std::to_string(epoch_index) +
                                   ", batch " + std::to_string(n_batches + 1));
            }
            zero_grads(trainable_disc_);
            disc_tape.backward(l_adv);
            opt_disc_->step();
            adv_acc += l_adv.item() * static_cast<double>(b);
        }

        recon_acc += l_rec.item() * static_cast<double>(b);
        n_samples += b;
        ++n_batches;
    }

    losses.recon = recon_acc / static_cast<double>(n_samples);
    losses.adversarial = adversarial_on ? adv_acc / static_cast<double>(n_samples) : 0.0;
    losses.rollout = roll_batches ? roll_acc / static_cast<double>(roll_batches) : 0.0;
    losses.total = losses.recon + lambda * losses.adversarial +
                   config_.rollout_weight * losses.rollout;
    return losses;
}

// ---------------------------------------------------------------------------
// full runs
// ---------------------------------------------------------------------------

namespace {

std::pair<AaeParams, TrainReport> run_training(AaeParams params, const Dataset& dataset,
                                               const TrainConfig& config) {
    const HyperParams& hp = params.hp();
    if (config.epochs < 1) throw ConfigError("training needs epochs >= 1");
    if (config.batch_size < 1) throw ConfigError("training needs batch_size >= 1");

    auto train_windows = dataprep::build_windows(dataset.train, hp.ntimes, hp.ntimes - 1);
    if (train_windows.samples() == 0) {
        throw ValidationError("training frame yields no windows");
    }
    auto val_windows = dataprep::build_windows(dataset.validation, hp.ntimes, hp.ntimes - 1);
    if (val_windows.samples() == 0) {
        throw ValidationError("validation frame yields no windows");
    }

    RolloutPool rollout =
        RolloutPool::build(dataset.train, hp.ntimes, config.rollout_depth);

    Trainer trainer(params, config);
    TrainReport report;
    const auto t_start = std::chrono::steady_clock::now();

    AaeParams best = params.clone();
    double best_val = std::numeric_limits<double>::infinity();
    double initial_total = 0.0;
    std::size_t diverged_epochs = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        EpochLosses losses = trainer.run_epoch(train_windows, &rollout, epoch);
        losses.val_mse = reconstruction_mse(params, val_windows, config.batch_size);
        report.epochs.push_back(losses);

        if (epoch == 1) initial_total = losses.total;
        if (losses.total > 10.0 * initial_total) {
            if (++diverged_epochs >= 3) {
                throw NumericError("training diverged: loss above 10x the initial value for 3 "
                                   "consecutive epochs");
            }
        } else {
            diverged_epochs = 0;
        }

        if (losses.val_mse < best_val) {
            best_val = losses.val_mse;
            best = params.clone();
            report.best_epoch = epoch;
        }
    }

    report.final_val_mse = best_val;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    if (!config.checkpoint_path.empty()) {
        json meta{{"training_seed", config.seed},
                  {"epochs", config.epochs},
                  {"best_epoch", report.best_epoch},
                  {"final_val_mse", report.final_val_mse}};
        save_checkpoint(best, config.checkpoint_path, meta.dump());
    }
    return {std::move(best), std::move(report)};
}

}  // namespace

std::pair<AaeParams, TrainReport> train(const Dataset& dataset, const HyperParams& hp,
                                        const TrainConfig& config) {
    return run_training(AaeParams::init(hp), dataset, config);
}

std::pair<AaeParams, TrainReport> fine_tune(const AaeParams& pretrained, const Dataset& personal,
                                            TrainConfig config) {
    if (config.freeze_mask.empty()) {
        config.freeze_mask = default_fine_tune_config().freeze_mask;
    }
    AaeParams params = pretrained.clone();

    // snapshot the frozen groups so the freezing contract is enforceable
    std::vector<std::pair<std::string, std::vector<double>>> snapshot;
    for (const std::string& g : config.freeze_mask) {
        for (const Tensor& t : params.group(g)) {
            snapshot.emplace_back(g, t.data_vec());
        }
    }

    auto result = run_training(std::move(params), personal, config);

    std::size_t k = 0;
    for (const std::string& g : config.freeze_mask) {
        for (const Tensor& t : result.first.group(g)) {
            if (t.data_vec() != snapshot[k].second) {
                throw NumericError("frozen layer group '" + g + "' changed during fine-tuning");
            }
            ++k;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', 'A', 'E', 'C', 'H', 'K', 'P', 'T'};

json hp_to_json(const HyperParams& hp) {
    return json{{"ntimes", hp.ntimes},
                {"n_features", hp.n_features},
                {"latent_dim", hp.latent_dim},
                {"conv1_channels", hp.conv1_channels},
                {"conv2_channels", hp.conv2_channels},
                {"lstm_hidden", hp.lstm_hidden},
                {"disc_hidden1", hp.disc_hidden1},
                {"disc_hidden2", hp.disc_hidden2},
                {"lambda_adv", hp.lambda_adv},
                {"adv_sign_convention", model::adv_sign_convention_name(hp.adv_sign_convention)},
                {"seed", hp.seed}};
}

HyperParams hp_from_json(const json& j) {
    HyperParams hp;
    hp.ntimes = j.at("ntimes").get<std::size_t>();
    hp.n_features = j.at("n_features").get<std::size_t>();
    hp.latent_dim = j.at("latent_dim").get<std::size_t>();
    hp.conv1_channels = j.at("conv1_channels").get<std::size_t>();
    hp.conv2_channels = j.at("conv2_channels").get<std::size_t>();
    hp.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    hp.disc_hidden1 = j.at("disc_hidden1").get<std::size_t>();
    hp.disc_hidden2 = j.at("disc_hidden2").get<std::size_t>();
    hp.lambda_adv = j.at("lambda_adv").get<double>();
    hp.adv_sign_convention =
        model::parse_adv_sign_convention(j.at("adv_sign_convention").get<std::string>());
    hp.seed = j.at("seed").get<std::uint64_t>();
    return hp;
}

}  // namespace

void save_checkpoint(const AaeParams& params, const std::filesystem::path& path,
                     const std::string& metadata_json) {
    json meta;
    try {
        meta = json::parse(metadata_json);
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }
    json header;
    header["schema_version"] = AaeParams::kSchemaVersion;
    header["dtype"] = "float64-le";
    header["hyperparams"] = hp_to_json(params.hp());
    header["metadata"] = meta;
    json tensors = json::array();
    for (const auto& [name, t] : params.tensors()) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}});
    }
    header["tensors"] = std::move(tensors);
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = header_str.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : params.tensors()) {
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw IoError("error while writing checkpoint " + path.string());
}

std::string checkpoint_header_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError(path.string() + " is not an AAE checkpoint");
    }
    std::uint64_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (1ULL << 30)) {
        throw ParseError("checkpoint " + path.string() + " has a corrupt header length");
    }
    std::string header(len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(len))) {
        throw ParseError("checkpoint " + path.string() + " is truncated in the header");
    }
    return header;
}

AaeParams load_checkpoint(const std::filesystem::path& path) {
    const std::string header_str = checkpoint_header_json(path);
    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw ParseError("checkpoint " + path.string() + ": bad header JSON: " + e.what());
    }
    const auto version = header.at("schema_version").get<std::uint32_t>();
    if (version != AaeParams::kSchemaVersion) {
        throw VersionError("checkpoint " + path.string() + " uses schema version " +
                           std::to_string(version) + ", this build reads " +
                           std::to_string(AaeParams::kSchemaVersion));
    }
    if (header.at("dtype").get<std::string>() != "float64-le") {
        throw ParseError("checkpoint " + path.string() + " has an unsupported dtype");
    }
    AaeParams params = AaeParams::zeros_like(hp_from_json(header.at("hyperparams")));

    const json& tensor_list = header.at("tensors");
    if (tensor_list.size() != params.tensors().size()) {
        throw ParseError("checkpoint " + path.string() + " lists " +
                         std::to_string(tensor_list.size()) + " tensors, expected " +
                         std::to_string(params.tensors().size()));
    }

    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(sizeof(kMagic) + sizeof(std::uint64_t) +
                                         header_str.size()));
    for (std::size_t i = 0; i < tensor_list.size(); ++i) {
        const std::string name = tensor_list[i].at("name").get<std::string>();
        const auto shape = tensor_list[i].at("shape").get<num::Shape>();
        Tensor& dst = params.at(name);
        if (dst.shape() != shape) {
            throw ParseError("checkpoint " + path.string() + ": tensor '" + name +
                             "' has shape " + num::shape_str(shape) + ", expected " +
                             num::shape_str(dst.shape()));
        }
        if (!in.read(reinterpret_cast<char*>(dst.data()),
                     static_cast<std::streamsize>(dst.size() * sizeof(double)))) {
            throw ParseError("checkpoint " + path.string() + " is truncated in tensor '" + name +
                             "'");
        }
    }
    char extra;
    if (in.read(&extra, 1)) {
        throw ParseError("checkpoint " + path.string() + " has trailing bytes");
    }
    return params;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

void write_report_json(const TrainReport& report, const std::filesystem::path& path) {
    json doc;
    doc["final_val_mse"] = report.final_val_mse;
    doc["best_epoch"] = report.best_epoch;
    json epochs = json::array();
    for (const EpochLosses& e : report.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"recon", e.recon},
                          {"adversarial", e.adversarial},
                          {"rollout", e.rollout},
                          {"total", e.total},
                          {"val_mse", e.val_mse}});
    }
    doc["epochs"] = std::move(epochs);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report " + path.string());
    out << doc.dump(2) << '\n';
}

void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> rows;
    for (const EpochLosses& e : report.epochs) {
        rows.push_back({std::to_string(e.epoch), format_double(e.recon),
                        format_double(e.adversarial), format_double(e.rollout),
                        format_double(e.total), format_double(e.val_mse)});
    }
    write_csv(path, {"epoch", "recon", "adversarial", "rollout", "total", "val_mse"}, rows);
}

}  // namespace aircast::train
