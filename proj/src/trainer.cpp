#include "lwal/trainer.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "lwal/autodiff.hpp"
#include "lwal/errors.hpp"

namespace lwal {

namespace {

double sq_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

void check_labels(std::span<const int> labels, std::size_t num_classes) {
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
            throw DomainError("label out of range");
        }
    }
}

AdamOptimizer make_adam(const TrainConfig& cfg) {
    return AdamOptimizer(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
}

// Runs backward and applies one Adam update to the encoder parameters.
void apply_update(TrainerState& state, Tape& tape, const EncoderVars& vars, Var loss) {
    tape.backward(loss);
    std::vector<Tensor*> params;
    std::vector<const Tensor*> grads;
    for (std::size_t l = 0; l < state.params.num_layers(); ++l) {
        params.push_back(&state.params.weights[l]);
        grads.push_back(&tape.grad(vars.weights[l]));
        params.push_back(&state.params.biases[l]);
        grads.push_back(&tape.grad(vars.biases[l]));
    }
    state.adam.step(params, grads);
}

} // namespace

void TrainConfig::validate() const {
    if (update_frequency < 1) {
        throw ConfigError("update frequency k must be >= 1");
    }
    if (warmup_steps < 0) {
        throw ConfigError("warmup steps w must be >= 0");
    }
    if (repel_weight < 0.0) {
        throw ConfigError("repel weight must be >= 0");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch size must be >= 1");
    }
    if (learning_rate <= 0.0) {
        throw ConfigError("learning rate must be positive");
    }
}

LabelTable LabelTable::random_init(std::size_t num_classes, std::size_t latent_dim,
                                   std::uint64_t seed) {
    if (num_classes == 0 || latent_dim == 0) {
        throw ConfigError("label table dimensions must be positive");
    }
    constexpr double kMinDistance = 1e-3;
    constexpr int kMaxRedraws = 1000;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LabelTable table;
    table.vectors_ = Tensor({num_classes, latent_dim});
    table.refreshed_.assign(num_classes, false);

    for (std::size_t c = 0; c < num_classes; ++c) {
        int attempts = 0;
        while (true) {
            if (++attempts > kMaxRedraws) {
                throw ConfigError("cannot place distinct label vectors; latent dim too small");
            }
            std::vector<double> v(latent_dim);
            double norm_sq = 0.0;
            for (double& x : v) {
                x = gauss(rng);
                norm_sq += x * x;
            }
            const double norm = std::sqrt(norm_sq);
            if (norm < 1e-8) continue;
            for (double& x : v) x /= norm;

            bool distinct = true;
            for (std::size_t prev = 0; prev < c; ++prev) {
                if (std::sqrt(sq_distance(v, table.vec(prev))) <= kMinDistance) {
                    distinct = false;
                    break;
                }
            }
            if (distinct) {
                for (std::size_t k = 0; k < latent_dim; ++k) {
                    table.vectors_[c * latent_dim + k] = v[k];
                }
                break;
            }
        }
    }
    return table;
}

void LabelTable::set_row(std::size_t c, std::span<const double> centroid) {
    if (c >= num_classes()) {
        throw DomainError("label table row out of range");
    }
    if (centroid.size() != latent_dim()) {
        throw ShapeError("centroid dimension does not match label table");
    }
    const std::size_t d = latent_dim();
    for (std::size_t k = 0; k < d; ++k) {
        if (!std::isfinite(centroid[k])) {
            throw NumericError("non-finite centroid");
        }
        vectors_[c * d + k] = centroid[k];
    }
    refreshed_[c] = true;
}

bool LabelTable::any_refreshed() const {
    for (bool r : refreshed_) {
        if (r) return true;
    }
    return false;
}

TrainerState make_lwal_trainer(EncoderParams params, LabelTable table, const TrainConfig& cfg) {
    cfg.validate();
    if (params.latent_dim() != table.latent_dim()) {
        throw ConfigError("encoder latent dim does not match label table");
    }
    if (params.latent_dim() < table.num_classes()) {
        throw ConfigError("latent dim must be at least the class count");
    }
    TrainerState state;
    state.params = std::move(params);
    state.table = std::move(table);
    state.adam = make_adam(cfg);
    return state;
}

TrainerState make_std_trainer(EncoderParams params, std::size_t num_classes,
                              const TrainConfig& cfg) {
    cfg.validate();
    if (params.latent_dim() != num_classes) {
        throw ConfigError("one-hot baseline requires latent_dim == class count");
    }
    TrainerState state;
    state.params = std::move(params);
    state.adam = make_adam(cfg);
    return state;
}

std::vector<std::pair<int, std::vector<double>>> compute_centroids(const Tensor& z,
                                                                   std::span<const int> labels,
                                                                   std::size_t num_classes) {
    if (z.ndim() != 2) {
        throw ShapeError("compute_centroids: encodings must be a matrix");
    }
    const std::size_t m = z.rows(), d = z.cols();
    if (labels.size() != m || m == 0) {
        throw ShapeError("compute_centroids: one label per encoding row required");
    }
    check_labels(labels, num_classes);

    std::vector<std::vector<double>> sums(num_classes);
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t i = 0; i < m; ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        if (sums[c].empty()) {
            sums[c].assign(d, 0.0);
        }
        const double* row = z.data().data() + i * d;
        for (std::size_t k = 0; k < d; ++k) {
            sums[c][k] += row[k];
        }
        ++counts[c];
    }
    std::vector<std::pair<int, std::vector<double>>> out;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) continue;
        for (double& x : sums[c]) {
            x /= static_cast<double>(counts[c]);
        }
        out.emplace_back(static_cast<int>(c), std::move(sums[c]));
    }
    return out;
}

Tensor lwal_probabilities(const Tensor& z, const LabelTable& table) {
    if (table.num_classes() == 0) {
        throw UsageError("label table is empty");
    }
    Tape tape;
    Var zv = tape.leaf(z);
    Var cv = tape.leaf(table.vectors());
    Var p = tape.row_softmax(tape.scale(tape.row_l2_distance(zv, cv), -1.0));
    return tape.value(p);
}

double lwal_loss(const Tensor& probs, std::span<const int> labels) {
    Tape tape;
    Var pv = tape.leaf(probs);
    Var loss = tape.nll_mean(pv, std::vector<int>(labels.begin(), labels.end()));
    return tape.value(loss)[0];
}

double repel_loss(const Tensor& z, std::span<const int> labels, std::size_t* skipped_rows) {
    Tape tape;
    Var zv = tape.leaf(z);
    Var loss = tape.repel_sum(zv, std::vector<int>(labels.begin(), labels.end()), skipped_rows);
    return tape.value(loss)[0];
}

bool is_refresh_step(long step, long update_frequency, long warmup_steps) {
    if (step <= warmup_steps) {
        return false;
    }
    return (step - warmup_steps - 1) % update_frequency == 0;
}

long expected_refresh_count(long total_steps, long update_frequency, long warmup_steps) {
    const long eligible = total_steps - warmup_steps;
    if (eligible <= 0) {
        return 0;
    }
    return (eligible + update_frequency - 1) / update_frequency;
}

StepLog lwal_train_step(TrainerState& state, const Batch& batch, const TrainConfig& cfg) {
    if (!state.table.has_value()) {
        throw UsageError("lwal_train_step: trainer has no label table");
    }
    const auto t0 = std::chrono::steady_clock::now();
    LabelTable& table = *state.table;
    check_labels(batch.labels, table.num_classes());

    StepLog log;
    log.step = ++state.step;
    log.epoch = state.epoch;
    log.refreshed = is_refresh_step(log.step, cfg.update_frequency, cfg.warmup_steps);

    Tape tape;
    EncoderVars vars = params_to_tape(tape, state.params);
    Var z = encoder_forward(tape, vars, tape.leaf(batch.x));

    if (log.refreshed) {
        // Refresh is plain assignment; no gradient flows into the table.
        auto centroids = compute_centroids(tape.value(z), batch.labels, table.num_classes());
        for (const auto& [cls, centroid] : centroids) {
            table.set_row(static_cast<std::size_t>(cls), centroid);
        }
    }

    Var dist = tape.row_l2_distance(z, tape.leaf(table.vectors()));
    Var probs = tape.row_softmax(tape.scale(dist, -1.0));
    Var loss = tape.nll_mean(probs, batch.labels);
    log.loss_cls = tape.value(loss)[0];

    if (log.refreshed && cfg.repel_weight > 0.0) {
        Var rep = tape.repel_sum(z, batch.labels, &log.repel_skipped_rows);
        log.loss_repel = tape.value(rep)[0];
        loss = tape.add(loss, tape.scale(rep, cfg.repel_weight));
    }
    if (state.params.head_l2 > 0.0) {
        Var l2 = l2_penalty(tape, vars, state.params.head_l2);
        log.loss_l2 = tape.value(l2)[0];
        loss = tape.add(loss, l2);
    }

    apply_update(state, tape, vars, loss);

    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    return log;
}

StepLog std_train_step(TrainerState& state, const Batch& batch, const TrainConfig& cfg) {
    (void)cfg; // schedule knobs are adaptive-label only
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t num_classes = state.params.latent_dim();
    check_labels(batch.labels, num_classes);

    StepLog log;
    log.step = ++state.step;
    log.epoch = state.epoch;

    Tape tape;
    EncoderVars vars = params_to_tape(tape, state.params);
    Var logits = encoder_forward(tape, vars, tape.leaf(batch.x));
    Var probs = tape.row_softmax(logits);
    Var loss = tape.nll_mean(probs, batch.labels);
    log.loss_cls = tape.value(loss)[0];

    if (state.params.head_l2 > 0.0) {
        Var l2 = l2_penalty(tape, vars, state.params.head_l2);
        log.loss_l2 = tape.value(l2)[0];
        loss = tape.add(loss, l2);
    }

    apply_update(state, tape, vars, loss);

    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    return log;
}

std::vector<int> predict(const EncoderParams& params, const LabelTable& table, const Tensor& x) {
    if (table.num_classes() == 0) {
        throw UsageError("predict: label table is empty");
    }
    const Tensor z = encoder_forward(params, x);
    const std::size_t m = z.rows(), n = table.num_classes();
    std::vector<int> out(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        double best = sq_distance(z.row_span(i), table.vec(0));
        std::size_t best_c = 0;
        for (std::size_t c = 1; c < n; ++c) {
            const double d = sq_distance(z.row_span(i), table.vec(c));
            if (d < best) {
                best = d;
                best_c = c;
            }
        }
        out[i] = static_cast<int>(best_c);
    }
    return out;
}

std::vector<int> predict_std(const EncoderParams& params, const Tensor& x) {
    const Tensor z = encoder_forward(params, x);
    const std::size_t m = z.rows(), n = z.cols();
    std::vector<int> out(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        double best = z[i * n];
        std::size_t best_c = 0;
        for (std::size_t c = 1; c < n; ++c) {
            if (z[i * n + c] > best) {
                best = z[i * n + c];
                best_c = c;
            }
        }
        out[i] = static_cast<int>(best_c);
    }
    return out;
}

} // namespace lwal
