#include "aircast/runconfig.hpp"

#include <fstream>
#include <functional>

#include <json.hpp>

#include "aircast/errors.hpp"
#include "aircast/hash.hpp"
#include "aircast/training.hpp"

namespace aircast::cli {

using json = nlohmann::json;

namespace {

struct KeySpec {
    const char* name;
    std::function<void(RunConfig&, const json&)> set;
    std::function<json(const RunConfig&)> get;
};

template <typename T>
T typed(const json& v, const char* key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

const std::vector<KeySpec>& key_specs() {
#define AIRCAST_KEY(field, type)                                            \
    KeySpec {                                                               \
        #field, [](RunConfig& c, const json& v) { c.field = typed<type>(v, #field); }, \
            [](const RunConfig& c) { return json(c.field); }                \
    }
    static const std::vector<KeySpec> specs = {
        AIRCAST_KEY(seed, std::uint64_t),
        AIRCAST_KEY(out_dir, std::string),
        AIRCAST_KEY(log_level, std::string),
        AIRCAST_KEY(data_csv, std::string),
        AIRCAST_KEY(features_dir, std::string),
        AIRCAST_KEY(checkpoint, std::string),
        AIRCAST_KEY(scaler, std::string),
        AIRCAST_KEY(records_csv, std::string),
        AIRCAST_KEY(pred_csv, std::string),
        AIRCAST_KEY(actual_csv, std::string),
        AIRCAST_KEY(fixtures_dir, std::string),
        AIRCAST_KEY(participants, std::size_t),
        AIRCAST_KEY(days, std::size_t),
        AIRCAST_KEY(interval_minutes, std::size_t),
        AIRCAST_KEY(include_winter, bool),
        AIRCAST_KEY(baseline_br, double),
        AIRCAST_KEY(pollution_sensitivity, double),
        AIRCAST_KEY(activity_sensitivity, double),
        AIRCAST_KEY(train_frac, double),
        AIRCAST_KEY(val_frac, double),
        AIRCAST_KEY(test_frac, double),
        AIRCAST_KEY(hr_noise, double),
        AIRCAST_KEY(latent_dim, std::size_t),
        AIRCAST_KEY(lambda_adv, double),
        AIRCAST_KEY(adv_sign_convention, std::string),
        AIRCAST_KEY(epochs, std::size_t),
        AIRCAST_KEY(batch_size, std::size_t),
        AIRCAST_KEY(rollout_depth, std::size_t),
        AIRCAST_KEY(rollout_start_epoch, std::size_t),
        AIRCAST_KEY(rollout_samples, std::size_t),
        AIRCAST_KEY(rollout_weight, double),
        AIRCAST_KEY(learning_rate, double),
        AIRCAST_KEY(disc_learning_rate, double),
        AIRCAST_KEY(freeze_mask, std::vector<std::string>),
        AIRCAST_KEY(horizon, std::size_t),
        AIRCAST_KEY(inpaint_iterations, std::size_t),
        AIRCAST_KEY(inpaint_tolerance, double),
        AIRCAST_KEY(guess_noise_std, double),
        AIRCAST_KEY(teacher_forcing, bool),
        AIRCAST_KEY(full_inpaint, bool),
        AIRCAST_KEY(factor, double),
        AIRCAST_KEY(clamp_pollutants, bool),
        AIRCAST_KEY(lat, double),
        AIRCAST_KEY(lon, double),
        AIRCAST_KEY(start_time, std::string),
        AIRCAST_KEY(end_time, std::string),
        AIRCAST_KEY(base_url, std::string),
    };
#undef AIRCAST_KEY
    return specs;
}

}  // namespace

void RunConfig::apply_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config file " + path.string() + " must hold a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        bool known = false;
        for (const KeySpec& spec : key_specs()) {
            if (key == spec.name) {
                spec.set(*this, value);
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("config file " + path.string() + ": unknown key '" + key + "'");
        }
    }
}

std::string RunConfig::to_json_string() const {
    json doc;
    for (const KeySpec& spec : key_specs()) doc[spec.name] = spec.get(*this);
    return doc.dump(2);
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& out_dir) {
    json doc;
    doc["command"] = manifest.command;
    doc["config"] = json::parse(manifest.config.to_json_string());
    doc["config_hash"] = hex64(fnv1a64(manifest.config.to_json_string()));
    doc["seed"] = manifest.config.seed;
    doc["versions"] = {{"aircast", kVersion},
                       {"checkpoint_schema", model::AaeParams::kSchemaVersion},
                       {"manifest_schema", 1}};
    json inputs = json::object();
    for (const auto& path : manifest.inputs) {
        inputs[path.string()] = hex64(fnv1a64_file(path));
    }
    doc["inputs"] = std::move(inputs);
    doc["outputs"] = manifest.outputs;

    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + out_dir.string());
    out << doc.dump(2) << '\n';
}

}  // namespace aircast::cli
