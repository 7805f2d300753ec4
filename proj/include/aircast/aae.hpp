#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "aircast/ops.hpp"
#include "aircast/tensor.hpp"

namespace aircast::model {

// Which side of the discriminator sees the prior as "real". Standard puts
// prior samples under log D; the alternative mirrors the published loss with
// encoder samples under log D instead.
enum class AdvSignConvention { Standard, PaperEq2 };

std::string adv_sign_convention_name(AdvSignConvention c);
AdvSignConvention parse_adv_sign_convention(const std::string& name);

struct HyperParams {
    std::size_t ntimes = 8;
    std::size_t n_features = 29;
    std::size_t latent_dim = 1000;
    std::size_t conv1_channels = 16;
    std::size_t conv2_channels = 32;
    std::size_t lstm_hidden = 256;
    std::size_t disc_hidden1 = 512;
    std::size_t disc_hidden2 = 256;
    double lambda_adv = 1.0;
    AdvSignConvention adv_sign_convention = AdvSignConvention::Standard;
    std::uint64_t seed = 0;

    std::size_t conv_flat() const { return conv2_channels * ntimes * n_features; }
    std::size_t lstm_input() const { return conv2_channels * n_features; }
};

// All learnable weights, addressable by "<group>.<tensor>" names. The ten
// layer groups are fixed; freezing masks refer to the group names.
class AaeParams {
public:
    static constexpr std::uint32_t kSchemaVersion = 1;

    static AaeParams init(const HyperParams& hp);             // seeded from hp.seed
    static AaeParams zeros_like(const HyperParams& hp);       // all-zero weights

    const HyperParams& hp() const { return hp_; }

    static const std::vector<std::string>& group_names();

    num::Tensor& at(std::string_view name);
    const num::Tensor& at(std::string_view name) const;

    const std::vector<std::pair<std::string, num::Tensor>>& tensors() const { return tensors_; }

    std::vector<num::Tensor> group(std::string_view group_name) const;
    std::vector<num::Tensor> all_tensors() const;
    std::vector<num::Tensor> encoder_decoder_tensors() const;
    std::vector<num::Tensor> discriminator_tensors() const;

    // deep copy: training mutates tensors in place
    AaeParams clone() const;

    num::LstmWeights lstm_weights() const;

private:
    AaeParams() = default;
    void build(const HyperParams& hp, bool zero_init);
    void push(const std::string& name, num::Tensor t);

    HyperParams hp_;
    std::vector<std::pair<std::string, num::Tensor>> tensors_;
};

// x: [batch, ntimes, n_features] -> z: [batch, latent_dim]
num::Tensor encode(num::Tape& tape, const AaeParams& params, const num::Tensor& x);

// z: [batch, latent_dim] -> x_hat: [batch, ntimes, n_features], values in (0, 1)
num::Tensor decode(num::Tape& tape, const AaeParams& params, const num::Tensor& z);

// z -> probability [batch, 1]
num::Tensor discriminate(num::Tape& tape, const AaeParams& params, const num::Tensor& z);

// i.i.d. standard normal latent batch
num::Tensor sample_prior(std::size_t batch, std::size_t latent_dim, Rng& rng);

// discriminator objective under the configured convention
num::Tensor discriminator_loss(num::Tape& tape, const AaeParams& params,
                               const num::Tensor& d_prior, const num::Tensor& d_encoded);

// non-saturating generator term for the encoder update
num::Tensor generator_adversarial_loss(num::Tape& tape, const AaeParams& params,
                                       const num::Tensor& d_encoded);

// L_rec + lambda * L_adv from raw ingredients
num::Tensor total_loss(num::Tape& tape, const num::Tensor& x, const num::Tensor& x_hat,
                       const num::Tensor& d_real, const num::Tensor& d_fake, double lambda_adv);

}  // namespace aircast::model
