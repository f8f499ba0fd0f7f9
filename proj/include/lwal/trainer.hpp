#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lwal/encoder.hpp"
#include "lwal/optimizer.hpp"
#include "lwal/tensor.hpp"

namespace lwal {

// Learned label vectors, one row per class. Rows start as seeded random
// unit vectors and are later overwritten by batch centroids; the gradient
// never flows into them.
class LabelTable {
  public:
    LabelTable() = default;

    // N random unit vectors, redrawn until the minimum pairwise distance
    // exceeds 1e-3.
    static LabelTable random_init(std::size_t num_classes, std::size_t latent_dim,
                                  std::uint64_t seed);

    std::size_t num_classes() const { return vectors_.numel() == 0 ? 0 : vectors_.rows(); }
    std::size_t latent_dim() const { return vectors_.numel() == 0 ? 0 : vectors_.cols(); }

    const Tensor& vectors() const { return vectors_; }
    std::span<const double> vec(std::size_t c) const { return vectors_.row_span(c); }

    void set_row(std::size_t c, std::span<const double> centroid);
    bool refreshed(std::size_t c) const { return refreshed_[c]; }
    bool any_refreshed() const;

  private:
    Tensor vectors_; // N x d
    std::vector<bool> refreshed_;
};

struct TrainConfig {
    long update_frequency = 1; // k >= 1
    long warmup_steps = 0;     // w >= 0
    double repel_weight = 0.0; // lambda; 10 when the repel variant is enabled
    long epochs = 10;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 12;

    void validate() const;
};

struct Batch {
    Tensor x; // m x input_dim
    std::vector<int> labels;
};

struct StepLog {
    long step = 0;
    long epoch = 0;
    double loss_cls = 0.0;   // cross-entropy part (one-hot or adaptive-label)
    double loss_repel = 0.0; // unweighted repel sum (0 when not computed)
    double loss_l2 = 0.0;
    bool refreshed = false;
    std::size_t repel_skipped_rows = 0;
    double wall_ms = 0.0;

    double total(double repel_weight) const {
        return loss_cls + repel_weight * loss_repel + loss_l2;
    }
};

struct TrainerState {
    EncoderParams params;
    std::optional<LabelTable> table; // present for the adaptive-label trainer
    long step = 0;
    long epoch = 0; // set by the caller's epoch loop, copied into StepLogs
    AdamOptimizer adam;
};

TrainerState make_lwal_trainer(EncoderParams params, LabelTable table, const TrainConfig& cfg);
TrainerState make_std_trainer(EncoderParams params, std::size_t num_classes,
                              const TrainConfig& cfg);

// Arithmetic mean of the encodings of each class present in the batch,
// ascending by class id; absent classes are omitted.
std::vector<std::pair<int, std::vector<double>>> compute_centroids(const Tensor& z,
                                                                   std::span<const int> labels,
                                                                   std::size_t num_classes);

// softmax over negative distances to the label vectors; rows sum to 1.
Tensor lwal_probabilities(const Tensor& z, const LabelTable& table);

// Mean over samples of -log P[i, label_i].
double lwal_loss(const Tensor& probs, std::span<const int> labels);

// Sum of cosine similarities over unordered cross-class encoding pairs.
// Near-zero rows are skipped; the skip count is reported via *skipped_rows.
double repel_loss(const Tensor& z, std::span<const int> labels,
                  std::size_t* skipped_rows = nullptr);

// True on the steps (1-based) where the label table is refreshed: the first
// step after warmup and every k-th step thereafter.
bool is_refresh_step(long step, long update_frequency, long warmup_steps);

// Closed-form number of refresh steps among steps 1..total_steps.
long expected_refresh_count(long total_steps, long update_frequency, long warmup_steps);

// One adaptive-label step: forward, optional centroid refresh (gradient
// stopped through the table), cross-entropy on distance softmax, optional
// repel term on refresh steps, head l2 penalty, one Adam update of theta.
StepLog lwal_train_step(TrainerState& state, const Batch& batch, const TrainConfig& cfg);

// One-hot baseline step: softmax cross-entropy on the latent outputs
// (latent_dim must equal the class count) plus the head l2 penalty.
StepLog std_train_step(TrainerState& state, const Batch& batch, const TrainConfig& cfg);

// Nearest label vector by Euclidean distance; ties go to the smaller class.
std::vector<int> predict(const EncoderParams& params, const LabelTable& table, const Tensor& x);

// Baseline prediction: arg max logit per row.
std::vector<int> predict_std(const EncoderParams& params, const Tensor& x);

} // namespace lwal
