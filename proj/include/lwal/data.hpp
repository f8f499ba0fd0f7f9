#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lwal/hierarchy.hpp"
#include "lwal/tensor.hpp"
#include "lwal/trainer.hpp"

namespace lwal {

struct Dataset {
    Tensor features; // m x input_dim
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::size_t input_dim() const { return features.numel() == 0 ? 0 : features.cols(); }
    std::size_t num_classes() const { return class_names.size(); }
    void validate() const;
};

// Synthetic hierarchical Gaussian mixture: a full B-ary tree of depth D
// plants one class per leaf. The root mean sits at the origin; children of a
// node at depth L are offset by rho^L * 10*sigma along seeded random unit
// directions, so offsets shrink by rho per level. Samples are isotropic
// Gaussian around the class means (sigma == 0 yields the means exactly).
struct SynthSpec {
    std::size_t depth = 3;     // D
    std::size_t branching = 2; // B; classes N = B^D
    std::size_t ambient_dim = 16;
    double sigma = 0.5;
    double rho = 0.4;
    std::size_t samples_per_class = 200;
    std::uint64_t seed = 7;

    std::size_t num_classes() const;
    void validate() const;

    // key = value text file, same syntax as run configs.
    static SynthSpec load(const std::string& path);
    void save(const std::string& path) const;
};

struct SynthResult {
    Dataset data;
    HierarchyTree tree;
    Tensor class_means; // N x ambient_dim, the planted ground truth
};

// IDX image/label pair (big-endian magic 0x803 / 0x801); pixels scaled to
// [0,1] as value/255, images flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CSV with a header row; the label column's distinct values, sorted
// lexicographically, define class indices. All other columns are features.
Dataset load_csv(const std::string& path, const std::string& label_column);

// Writes the label column first, then features f0..f{d-1}, with full
// precision so a load round-trips bit-exactly.
void save_csv(const Dataset& ds, const std::string& path,
              const std::string& label_column = "label");

SynthResult gen_synthetic(const SynthSpec& spec);

// Seeded shuffle, then a stratified split: the global test count
// round(fraction * m) is apportioned per class by largest remainder, so
// class proportions hold within one sample.
std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed);

// Per-epoch seeded shuffle (seed xor epoch); every sample appears exactly
// once per epoch and the final short batch is kept.
class BatchIterator {
  public:
    BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t seed, long epoch);

    bool next(Batch& out);

  private:
    const Dataset* ds_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

} // namespace lwal
