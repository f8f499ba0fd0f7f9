#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lwal/autodiff.hpp"
#include "lwal/tensor.hpp"

namespace lwal {

struct EncoderConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_layers; // empty = single linear map
    std::size_t latent_dim = 0;
    double head_l2 = 0.1;
    std::uint64_t init_seed = 0;

    void validate() const;
};

// MLP parameters: weights[i] is fan_in x fan_out, biases[i] has fan_out
// entries. ReLU between layers, no activation after the last layer so the
// latent space stays unconstrained.
struct EncoderParams {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
    double head_l2 = 0.1; // not persisted in checkpoints

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const;
    std::size_t latent_dim() const;
    bool all_finite() const;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from the seeded generator,
// biases zero. Same config and seed give bitwise-identical parameters.
EncoderParams init_encoder(const EncoderConfig& cfg);

// Value-only forward pass (no gradient bookkeeping).
Tensor encoder_forward(const EncoderParams& params, const Tensor& x);

// Tape-resident view of the parameters for one training step.
struct EncoderVars {
    std::vector<Var> weights;
    std::vector<Var> biases;
};

EncoderVars params_to_tape(Tape& tape, const EncoderParams& params);
Var encoder_forward(Tape& tape, const EncoderVars& vars, Var x);

// head_l2 * sum of squared final-layer weights; hidden layers and biases
// are excluded.
double l2_penalty(const EncoderParams& params);
Var l2_penalty(Tape& tape, const EncoderVars& vars, double head_l2);

// Flat binary checkpoint: magic "ALBL", format version u32, layer count u32,
// then per layer rows u32, cols u32, row-major f64 weights, f64 bias vector
// (all little-endian).
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path, double head_l2 = 0.1);

} // namespace lwal
