#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lwal/data.hpp"
#include "lwal/label_analysis.hpp"
#include "lwal/tensor.hpp"
#include "lwal/trainer.hpp"

namespace lwal {

enum class Method { Std, Lwal, LwalRpl };

std::string method_name(Method m);
Method parse_method(const std::string& name);

// One experiment: a dataset, one method, a list of seeds. Parsed from a
// key = value config file (see parse_run_config).
struct RunConfig {
    std::string dataset_kind; // "synth" | "csv" | "idx"
    std::vector<std::string> dataset_paths;
    Method method = Method::Lwal;
    std::size_t dim_multiplier = 10; // forced to 1 for the one-hot baseline
    TrainConfig train;
    std::vector<std::uint64_t> seeds{12, 123, 1234};
    std::string hierarchy_path; // optional
    std::string out_dir;
    double test_fraction = 0.2;
    double head_l2 = 0.1;

    void validate() const;
};

RunConfig parse_run_config(const std::string& path);

struct EpochRecord {
    long epoch = 0;         // 1-based
    double train_loss = 0.0; // mean total step loss within the epoch
    double test_acc = 0.0;
    double wall_ms = 0.0; // cumulative training time
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    double best_acc = 0.0;
    long best_epoch = 0; // first epoch attaining best_acc
    double auac = 0.0;
    Tensor label_snapshot; // N x d label vectors at the end of training
    std::vector<std::string> class_names;
    std::optional<double> correlation; // set when a hierarchy was supplied
};

// Trains every seed, writes metrics.jsonl, run.json, per-seed checkpoints,
// label snapshots and (given a hierarchy) score and Newick files under
// cfg.out_dir, and returns the records.
std::vector<RunRecord> run(const RunConfig& cfg);

// Mean of the per-epoch test accuracies.
double auac(const RunRecord& record);

// Percent of epochs saved before first reaching the reference's best test
// accuracy, rounded to the nearest integer; nullopt when never reached.
std::optional<int> time_reduction(const RunRecord& method_record,
                                  const RunRecord& reference_record);

// Aggregates every run.json found one level below runs_dir into a report
// (mean +- spread per method; spread is the max absolute deviation).
// Returns the report text, and writes it to out_path when non-empty.
std::string write_report(const std::string& runs_dir, const std::string& out_path);

// Label snapshot CSV: header "class,v0,..,v<d-1>", one row per class.
void save_label_snapshot(const Tensor& vectors, const std::vector<std::string>& class_names,
                         const std::string& path);
std::pair<Tensor, std::vector<std::string>> load_label_snapshot(const std::string& path);

// "correlation_score=<float>" plus one tau_b line per mapped class.
std::string format_score_report(const Tensor& label_vectors,
                                const std::vector<std::string>& class_names,
                                const HierarchyTree& tree);

// Score restricted to classes that map to hierarchy leaves.
double hierarchy_correlation(const Tensor& label_vectors,
                             const std::vector<std::string>& class_names,
                             const HierarchyTree& tree);

} // namespace lwal
