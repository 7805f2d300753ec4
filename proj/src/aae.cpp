#include "aircast/aae.hpp"

#include <cmath>

#include "aircast/errors.hpp"

namespace aircast::model {

using num::Tape;
using num::Tensor;

std::string adv_sign_convention_name(AdvSignConvention c) {
    return c == AdvSignConvention::Standard ? "standard" : "paper_eq2";
}

AdvSignConvention parse_adv_sign_convention(const std::string& name) {
    if (name == "standard") return AdvSignConvention::Standard;
    if (name == "paper_eq2") return AdvSignConvention::PaperEq2;
    throw ConfigError("unknown adv_sign_convention '" + name +
                      "' (expected standard or paper_eq2)");
}

const std::vector<std::string>& AaeParams::group_names() {
    static const std::vector<std::string> names = {
        "enc_conv1", "enc_conv2", "enc_lstm", "enc_fc",   "dec_fc",
        "dec_tconv1", "dec_tconv2", "disc_fc1", "disc_fc2", "disc_fc3"};
    return names;
}

void AaeParams::push(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    tensors_.emplace_back(name, std::move(t));
}

void AaeParams::build(const HyperParams& hp, bool zero_init) {
    hp_ = hp;
    if (hp.latent_dim < 1) throw ValidationError("aae: latent_dim must be >= 1");
    if (hp.lambda_adv < 0.0) throw ValidationError("aae: lambda_adv must be >= 0");
    Rng rng(hp.seed);
    auto weight = [&](num::Shape shape, std::size_t fan_in) {
        if (zero_init) return Tensor::zeros(shape);
        const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
        return Tensor::uniform(std::move(shape), rng, -bound, bound);
    };
    const std::size_t c1 = hp.conv1_channels, c2 = hp.conv2_channels;
    const std::size_t in = hp.lstm_input(), hid = hp.lstm_hidden, lat = hp.latent_dim;

    push("enc_conv1.weight", weight({c1, 1, 3, 3}, 9));
    push("enc_conv1.bias", Tensor::zeros({c1}));
    push("enc_conv2.weight", weight({c2, c1, 3, 3}, c1 * 9));
    push("enc_conv2.bias", Tensor::zeros({c2}));
    for (const char* gate : {"i", "o", "f", "c"}) {
        const std::string g = gate;
        push("enc_lstm.w_" + g, weight({in, hid}, in));
        push("enc_lstm.u_" + g, weight({hid, hid}, hid));
        push("enc_lstm.b_" + g, Tensor::zeros({hid}));
    }
    push("enc_fc.weight", weight({hid, lat}, hid));
    push("enc_fc.bias", Tensor::zeros({lat}));

    push("dec_fc.weight", weight({lat, hp.conv_flat()}, lat));
    push("dec_fc.bias", Tensor::zeros({hp.conv_flat()}));
    push("dec_tconv1.weight", weight({c2, c1, 3, 3}, c2 * 9));
    push("dec_tconv1.bias", Tensor::zeros({c1}));
    push("dec_tconv2.weight", weight({c1, 1, 3, 3}, c1 * 9));
    push("dec_tconv2.bias", Tensor::zeros({1}));

    push("disc_fc1.weight", weight({lat, hp.disc_hidden1}, lat));
    push("disc_fc1.bias", Tensor::zeros({hp.disc_hidden1}));
    push("disc_fc2.weight", weight({hp.disc_hidden1, hp.disc_hidden2}, hp.disc_hidden1));
    push("disc_fc2.bias", Tensor::zeros({hp.disc_hidden2}));
    push("disc_fc3.weight", weight({hp.disc_hidden2, 1}, hp.disc_hidden2));
    push("disc_fc3.bias", Tensor::zeros({1}));
}

AaeParams AaeParams::init(const HyperParams& hp) {
    AaeParams p;
    p.build(hp, false);
    return p;
}

AaeParams AaeParams::zeros_like(const HyperParams& hp) {
    AaeParams p;
    p.build(hp, true);
    return p;
}

Tensor& AaeParams::at(std::string_view name) {
    for (auto& [n, t] : tensors_) {
        if (n == name) return t;
    }
    throw ValidationError("aae: no tensor named '" + std::string(name) + "'");
}

const Tensor& AaeParams::at(std::string_view name) const {
    for (const auto& [n, t] : tensors_) {
        if (n == name) return t;
    }
    throw ValidationError("aae: no tensor named '" + std::string(name) + "'");
}

std::vector<Tensor> AaeParams::group(std::string_view group_name) const {
    std::vector<Tensor> out;
    const std::string prefix = std::string(group_name) + ".";
    for (const auto& [n, t] : tensors_) {
        if (n.rfind(prefix, 0) == 0) out.push_back(t);
    }
    if (out.empty()) {
        throw ValidationError("aae: no layer group named '" + std::string(group_name) + "'");
    }
    return out;
}

std::vector<Tensor> AaeParams::all_tensors() const {
    std::vector<Tensor> out;
    for (const auto& [n, t] : tensors_) out.push_back(t);
    return out;
}

std::vector<Tensor> AaeParams::encoder_decoder_tensors() const {
    std::vector<Tensor> out;
    for (const auto& [n, t] : tensors_) {
        if (n.rfind("disc_", 0) != 0) out.push_back(t);
    }
    return out;
}

std::vector<Tensor> AaeParams::discriminator_tensors() const {
    std::vector<Tensor> out;
    for (const auto& [n, t] : tensors_) {
        if (n.rfind("disc_", 0) == 0) out.push_back(t);
    }
    return out;
}

AaeParams AaeParams::clone() const {
    AaeParams out;
    out.hp_ = hp_;
    out.tensors_.reserve(tensors_.size());
    for (const auto& [n, t] : tensors_) out.tensors_.emplace_back(n, t.clone());
    return out;
}

num::LstmWeights AaeParams::lstm_weights() const {
    num::LstmWeights w;
    w.w_i = at("enc_lstm.w_i");
    w.u_i = at("enc_lstm.u_i");
    w.b_i = at("enc_lstm.b_i");
    w.w_o = at("enc_lstm.w_o");
    w.u_o = at("enc_lstm.u_o");
    w.b_o = at("enc_lstm.b_o");
    w.w_f = at("enc_lstm.w_f");
    w.u_f = at("enc_lstm.u_f");
    w.b_f = at("enc_lstm.b_f");
    w.w_c = at("enc_lstm.w_c");
    w.u_c = at("enc_lstm.u_c");
    w.b_c = at("enc_lstm.b_c");
    return w;
}

namespace {

Tensor dense(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    return num::add_bias(tape, num::matmul(tape, x, w), b);
}

}  // namespace

Tensor encode(Tape& tape, const AaeParams& params, const Tensor& x) {
    const HyperParams& hp = params.hp();
    if (x.rank() != 3 || x.dim(1) != hp.ntimes || x.dim(2) != hp.n_features) {
        throw DimensionError("encode: expected [batch, " + std::to_string(hp.ntimes) + ", " +
                             std::to_string(hp.n_features) + "], got " + num::shape_str(x.shape()));
    }
    const std::size_t batch = x.dim(0);
    Tensor h = num::reshape(tape, x, {batch, 1, hp.ntimes, hp.n_features});
    h = num::relu(tape, num::conv2d(tape, h, params.at("enc_conv1.weight"), 1, 1,
                                    params.at("enc_conv1.bias")));
    h = num::relu(tape, num::conv2d(tape, h, params.at("enc_conv2.weight"), 1, 1,
                                    params.at("enc_conv2.bias")));

    // walk the preserved time axis as an 8-step sequence
    num::LstmWeights lstm = params.lstm_weights();
    num::LstmState state{Tensor::zeros({batch, hp.lstm_hidden}),
                         Tensor::zeros({batch, hp.lstm_hidden})};
    for (std::size_t t = 0; t < hp.ntimes; ++t) {
        Tensor step = num::slice(tape, h, 2, t, 1);
        step = num::reshape(tape, step, {batch, hp.lstm_input()});
        state = num::lstm_cell(tape, step, state, lstm);
    }
    return dense(tape, state.h, params.at("enc_fc.weight"), params.at("enc_fc.bias"));
}

Tensor decode(Tape& tape, const AaeParams& params, const Tensor& z) {
    const HyperParams& hp = params.hp();
    if (z.rank() != 2 || z.dim(1) != hp.latent_dim) {
        throw DimensionError("decode: expected [batch, " + std::to_string(hp.latent_dim) +
                             "], got " + num::shape_str(z.shape()));
    }
    const std::size_t batch = z.dim(0);
    Tensor h = dense(tape, z, params.at("dec_fc.weight"), params.at("dec_fc.bias"));
    h = num::reshape(tape, h, {batch, hp.conv2_channels, hp.ntimes, hp.n_features});
    h = num::relu(tape, num::conv2d_transpose(tape, h, params.at("dec_tconv1.weight"), 1, 1,
                                              params.at("dec_tconv1.bias")));
    h = num::tanh(tape, num::conv2d_transpose(tape, h, params.at("dec_tconv2.weight"), 1, 1,
                                              params.at("dec_tconv2.bias")));
    // map the tanh range onto the min-max-scaled data range
    h = num::affine(tape, h, 0.5, 0.5);
    return num::reshape(tape, h, {batch, hp.ntimes, hp.n_features});
}

Tensor discriminate(Tape& tape, const AaeParams& params, const Tensor& z) {
    const HyperParams& hp = params.hp();
    if (z.rank() != 2 || z.dim(1) != hp.latent_dim) {
        throw DimensionError("discriminate: expected [batch, " + std::to_string(hp.latent_dim) +
                             "], got " + num::shape_str(z.shape()));
    }
    Tensor h = num::relu(tape, dense(tape, z, params.at("disc_fc1.weight"),
                                     params.at("disc_fc1.bias")));
    h = num::relu(tape, dense(tape, h, params.at("disc_fc2.weight"), params.at("disc_fc2.bias")));
    return num::sigmoid(tape,
                        dense(tape, h, params.at("disc_fc3.weight"), params.at("disc_fc3.bias")));
}

Tensor sample_prior(std::size_t batch, std::size_t latent_dim, Rng& rng) {
    if (batch < 1) throw ValidationError("sample_prior: batch must be >= 1");
    return Tensor::normal({batch, latent_dim}, rng);
}

Tensor discriminator_loss(Tape& tape, const AaeParams& params, const Tensor& d_prior,
                          const Tensor& d_encoded) {
    if (params.hp().adv_sign_convention == AdvSignConvention::Standard) {
        return num::adversarial_loss(tape, d_prior, d_encoded);
    }
    return num::adversarial_loss(tape, d_encoded, d_prior);
}

Tensor generator_adversarial_loss(Tape& tape, const AaeParams& params, const Tensor& d_encoded) {
    if (params.hp().adv_sign_convention == AdvSignConvention::Standard) {
        // encoder wants its samples judged as prior-like
        return num::neg_mean_log(tape, d_encoded);
    }
    return num::neg_mean_log1m(tape, d_encoded);
}

Tensor total_loss(Tape& tape, const Tensor& x, const Tensor& x_hat, const Tensor& d_real,
                  const Tensor& d_fake, double lambda_adv) {
    Tensor rec = num::mse_loss(tape, x_hat, x);
    Tensor adv = num::adversarial_loss(tape, d_real, d_fake);
    return num::add(tape, rec, num::scale(tape, adv, lambda_adv));
}

}  // namespace aircast::model
