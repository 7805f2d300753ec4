#include <doctest.h>

#include <cmath>

#include "aircast/aae.hpp"
#include "helpers.hpp"

using namespace aircast;
using namespace aircast::model;
using num::Shape;
using num::Tape;
using num::Tensor;
using testutil::max_grad_rel_err;
using testutil::rand_tensor;

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

TEST_CASE("encode produces the latent width and decode mirrors the window") {
    HyperParams hp = tiny_hp();
    AaeParams params = AaeParams::init(hp);
    Rng rng(1);
    Tensor x = rand_tensor({3, hp.ntimes, hp.n_features}, rng, 0.0, 1.0, false);
    Tape tape(false);
    Tensor z = encode(tape, params, x);
    CHECK(z.shape() == Shape{3, hp.latent_dim});
    Tensor xr = decode(tape, params, z);
    CHECK(xr.shape() == x.shape());
    // tanh then affine keeps every output strictly inside (0, 1)
    for (std::size_t i = 0; i < xr.size(); ++i) {
        CHECK(xr[i] > 0.0);
        CHECK(xr[i] < 1.0);
    }
}

TEST_CASE("zero weights give a zero latent and a chance discriminator") {
    HyperParams hp = tiny_hp();
    AaeParams params = AaeParams::zeros_like(hp);
    Tape tape(false);
    Tensor x = Tensor::zeros({2, hp.ntimes, hp.n_features});
    Tensor z = encode(tape, params, x);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

    Rng rng(2);
    Tensor any_z = rand_tensor({4, hp.latent_dim}, rng, -2, 2, false);
    Tensor d = discriminate(tape, params, any_z);
    CHECK(d.shape() == Shape{4, 1});
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == 0.5);
}

TEST_CASE("discriminator output stays in (0,1) and chance level costs 2 ln 2") {
    HyperParams hp = tiny_hp(11);
    AaeParams params = AaeParams::init(hp);
    Rng rng(3);
    Tape tape(false);
    Tensor z = sample_prior(16, hp.latent_dim, rng);
    Tensor d = discriminate(tape, params, z);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(d[i] > 0.0);
        CHECK(d[i] < 1.0);
    }

    // untrained discriminator on prior vs encoder samples sits near chance
    Tensor x = rand_tensor({16, hp.ntimes, hp.n_features}, rng, 0.0, 1.0, false);
    Tensor d_fake = discriminate(tape, params, encode(tape, params, x));
    Tensor loss = discriminator_loss(tape, params, d, d_fake);
    CHECK(std::abs(loss.item() - 2.0 * std::log(2.0)) < 0.25);

    // exactly 2 ln 2 when the discriminator is exactly at chance
    AaeParams zero = AaeParams::zeros_like(hp);
    Tensor dz_real = discriminate(tape, zero, z);
    Tensor dz_fake = discriminate(tape, zero, z);
    CHECK(discriminator_loss(tape, zero, dz_real, dz_fake).item() ==
          doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("prior sampling is seeded and standard normal") {
    Rng a(99), b(99);
    Tensor za = sample_prior(8, 16, a);
    Tensor zb = sample_prior(8, 16, b);
    CHECK(za.data_vec() == zb.data_vec());

    // 1e5 draws per coordinate
    Rng rng(123);
    const std::size_t n = 100000, dim = 4;
    Tensor z = sample_prior(n, dim, rng);
    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += z[i * dim + j];
        mean /= static_cast<double>(n);
        CHECK(std::abs(mean) < 0.02);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = z[i * dim + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n - 1);
        CHECK(var == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("total loss is the documented weighted sum") {
    Tape tape(false);
    // pick x, x_hat with mse exactly 0.5 and a chance discriminator
    Tensor x({1, 2, 1}, {0.0, 0.0});
    Tensor x_hat({1, 2, 1}, {std::sqrt(0.5), std::sqrt(0.5)});
    Tensor d_real({1, 1}, {0.5});
    Tensor d_fake({1, 1}, {0.5});
    const double adv = 2.0 * std::log(2.0);
    CHECK(total_loss(tape, x, x_hat, d_real, d_fake, 1.0).item() ==
          doctest::Approx(0.5 + adv));
    CHECK(total_loss(tape, x, x_hat, d_real, d_fake, 0.0).item() == doctest::Approx(0.5));

    // perfect reconstruction and chance discriminator
    CHECK(total_loss(tape, x, x, d_real, d_fake, 1.0).item() == doctest::Approx(adv));
}

TEST_CASE("encoder gradient with respect to the input matches finite differences") {
    HyperParams hp = tiny_hp(21);
    AaeParams params = AaeParams::init(hp);
    Rng rng(4);
    Tensor x = rand_tensor({1, hp.ntimes, hp.n_features}, rng, 0.1, 0.9, true);
    Tensor w = rand_tensor({1, hp.latent_dim}, rng, -1, 1, false);
    auto loss = [&](Tape& t) { return num::mse_loss(t, encode(t, params, x), w); };
    CHECK(max_grad_rel_err(loss, {x}) < 1e-4);
}

TEST_CASE("full autoencoder gradient reaches the input") {
    HyperParams hp = tiny_hp(31);
    AaeParams params = AaeParams::init(hp);
    Rng rng(6);
    Tensor x = rand_tensor({1, hp.ntimes, hp.n_features}, rng, 0.2, 0.8, true);
    Tensor target = x.detach().clone();  // fixed target, independent of perturbations
    auto loss = [&](Tape& t) {
        Tensor z = encode(t, params, x);
        Tensor xr = decode(t, params, z);
        return num::mse_loss(t, xr, target);
    };
    CHECK(max_grad_rel_err(loss, {x}) < 1e-4);
}

TEST_CASE("forward passes are deterministic") {
    HyperParams hp = tiny_hp(41);
    AaeParams params = AaeParams::init(hp);
    Rng rng(7);
    Tensor x = rand_tensor({2, hp.ntimes, hp.n_features}, rng, 0.0, 1.0, false);
    Tape tape(false);
    Tensor z1 = encode(tape, params, x);
    Tensor z2 = encode(tape, params, x);
    CHECK(z1.data_vec() == z2.data_vec());
    CHECK(decode(tape, params, z1).data_vec() == decode(tape, params, z2).data_vec());
}

TEST_CASE("seeded init is reproducible and shape-consistent") {
    HyperParams hp = tiny_hp(77);
    AaeParams a = AaeParams::init(hp);
    AaeParams b = AaeParams::init(hp);
    REQUIRE(a.tensors().size() == b.tensors().size());
    for (std::size_t i = 0; i < a.tensors().size(); ++i) {
        CHECK(a.tensors()[i].first == b.tensors()[i].first);
        CHECK(a.tensors()[i].second.data_vec() == b.tensors()[i].second.data_vec());
    }
    // latent width ties encoder, decoder and discriminator together
    CHECK(a.at("enc_fc.weight").dim(1) == hp.latent_dim);
    CHECK(a.at("dec_fc.weight").dim(0) == hp.latent_dim);
    CHECK(a.at("disc_fc1.weight").dim(0) == hp.latent_dim);

    // ten layer groups, every tensor reachable through its group
    std::size_t counted = 0;
    for (const auto& g : AaeParams::group_names()) counted += a.group(g).size();
    CHECK(counted == a.tensors().size());
}

TEST_CASE("dimension errors name the offending shape") {
    HyperParams hp = tiny_hp();
    AaeParams params = AaeParams::init(hp);
    Tape tape(false);
    CHECK_THROWS_AS(encode(tape, params, Tensor::zeros({2, 5, hp.n_features})),
                    DimensionError);
    CHECK_THROWS_AS(decode(tape, params, Tensor::zeros({2, hp.latent_dim + 1})),
                    DimensionError);
    CHECK_THROWS_AS(discriminate(tape, params, Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("sign convention flips which side counts as real") {
    HyperParams hp = tiny_hp();
    hp.adv_sign_convention = AdvSignConvention::Standard;
    AaeParams std_params = AaeParams::init(hp);
    hp.adv_sign_convention = AdvSignConvention::PaperEq2;
    AaeParams paper_params = AaeParams::init(hp);

    Tape tape(false);
    Tensor d_prior({2, 1}, {0.9, 0.8});
    Tensor d_enc({2, 1}, {0.2, 0.3});
    const double std_loss = discriminator_loss(tape, std_params, d_prior, d_enc).item();
    const double paper_loss = discriminator_loss(tape, paper_params, d_prior, d_enc).item();
    // standard: prior under log D. paper: encoder under log D.
    CHECK(std_loss ==
          doctest::Approx(-(std::log(0.9) + std::log(0.8)) / 2.0 -
                          (std::log(0.8) + std::log(0.7)) / 2.0));
    CHECK(paper_loss ==
          doctest::Approx(-(std::log(0.2) + std::log(0.3)) / 2.0 -
                          (std::log(0.1) + std::log(0.2)) / 2.0));
    CHECK(parse_adv_sign_convention("standard") == AdvSignConvention::Standard);
    CHECK(parse_adv_sign_convention("paper_eq2") == AdvSignConvention::PaperEq2);
    CHECK_THROWS_AS(parse_adv_sign_convention("bogus"), ConfigError);
}
