#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lwal/autodiff.hpp"
#include "lwal/encoder.hpp"
#include "lwal/tensor.hpp"
#include "lwal/trainer.hpp"

namespace testutil {

inline lwal::Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                                  double lo = -1.0, double hi = 1.0) {
    lwal::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        t[i] = dist(rng);
    }
    return t;
}

// Fixed 6-sample, 3-class toy problem with a 4 -> [5] -> 6 encoder, used by
// the composed-loss gradient checks and the step-replay oracles.
struct ToySetup {
    lwal::EncoderParams params;
    lwal::Tensor x;
    std::vector<int> labels;
    lwal::LabelTable table;
    double lambda = 10.0;
};

inline ToySetup make_toy_setup(std::uint64_t seed = 99) {
    ToySetup setup;
    lwal::EncoderConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden_layers = {5};
    cfg.latent_dim = 6;
    cfg.head_l2 = 0.1;
    cfg.init_seed = seed;
    setup.params = lwal::init_encoder(cfg);

    std::mt19937_64 rng(seed + 1);
    setup.x = random_tensor({6, 4}, rng, -1.5, 1.5);
    setup.labels = {0, 1, 2, 0, 1, 2};
    setup.table = lwal::LabelTable::random_init(3, 6, seed + 2);
    return setup;
}

// Composed adaptive-label loss (cross entropy on distance softmax + lambda *
// repel + head l2) with parameter tensor `index` replaced by `x_var`.
// Tensor order: w0, b0, w1, b1, ...
inline lwal::Var toy_loss(lwal::Tape& tape, const ToySetup& setup, int index,
                          lwal::Var x_var) {
    lwal::EncoderVars vars;
    int slot = 0;
    for (std::size_t l = 0; l < setup.params.num_layers(); ++l) {
        vars.weights.push_back(slot == index ? x_var
                                             : tape.leaf(setup.params.weights[l]));
        ++slot;
        vars.biases.push_back(slot == index ? x_var : tape.leaf(setup.params.biases[l]));
        ++slot;
    }
    lwal::Var z = lwal::encoder_forward(tape, vars, tape.leaf(setup.x));
    lwal::Var dist = tape.row_l2_distance(z, tape.leaf(setup.table.vectors()));
    lwal::Var probs = tape.row_softmax(tape.scale(dist, -1.0));
    lwal::Var loss = tape.nll_mean(probs, setup.labels);
    if (setup.lambda > 0.0) {
        loss = tape.add(loss, tape.scale(tape.repel_sum(z, setup.labels), setup.lambda));
    }
    loss = tape.add(loss, lwal::l2_penalty(tape, vars, setup.params.head_l2));
    return loss;
}

// Smallest |pre-activation| of the hidden layer; gradient checks need this
// to stay clear of the relu kink.
inline double min_abs_preactivation(const ToySetup& setup) {
    const lwal::Tensor& w0 = setup.params.weights[0];
    const lwal::Tensor& b0 = setup.params.biases[0];
    double best = 1e300;
    for (std::size_t i = 0; i < setup.x.rows(); ++i) {
        for (std::size_t j = 0; j < w0.cols(); ++j) {
            double v = b0[j];
            for (std::size_t k = 0; k < w0.rows(); ++k) {
                v += setup.x.at(i, k) * w0.at(k, j);
            }
            best = std::min(best, std::abs(v));
        }
    }
    return best;
}

} // namespace testutil
