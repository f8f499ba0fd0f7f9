#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

#include "lwal/data.hpp"
#include "lwal/errors.hpp"
#include "lwal/label_analysis.hpp"

using lwal::Dataset;
using lwal::SynthSpec;
using lwal::Tensor;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
    return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

void append(std::vector<unsigned char>& out, const std::vector<unsigned char>& more) {
    out.insert(out.end(), more.begin(), more.end());
}

} // namespace

TEST_CASE("load_idx parses a crafted fixture exactly") {
    std::vector<unsigned char> imgs;
    append(imgs, be32(0x00000803));
    append(imgs, be32(2)); // count
    append(imgs, be32(2)); // rows
    append(imgs, be32(2)); // cols
    append(imgs, {0, 1, 2, 3, 255, 128, 64, 32});
    std::vector<unsigned char> lbls;
    append(lbls, be32(0x00000801));
    append(lbls, be32(2));
    append(lbls, {1, 0});

    TempFile fi("fixture_images.idx"), fl("fixture_labels.idx");
    write_bytes(fi.path, imgs);
    write_bytes(fl.path, lbls);

    const Dataset ds = lwal::load_idx(fi.path, fl.path);
    CHECK(ds.size() == 2);
    CHECK(ds.input_dim() == 4);
    CHECK(ds.features[0] == 0.0);
    CHECK(ds.features[1] == 1.0 / 255.0);
    CHECK(ds.features[2] == 2.0 / 255.0);
    CHECK(ds.features[3] == 3.0 / 255.0);
    CHECK(ds.features[4] == 1.0);
    CHECK(ds.features[5] == 128.0 / 255.0);
    CHECK(ds.labels == std::vector<int>{1, 0});
    CHECK(ds.class_names == std::vector<std::string>{"0", "1"});
}

TEST_CASE("load_idx rejects malformed files") {
    std::vector<unsigned char> good_labels;
    append(good_labels, be32(0x00000801));
    append(good_labels, be32(1));
    append(good_labels, {0});
    TempFile fl("fixture_labels2.idx");
    write_bytes(fl.path, good_labels);

    // wrong magic on the images file
    std::vector<unsigned char> bad;
    append(bad, be32(0x00000802));
    append(bad, be32(1));
    append(bad, be32(1));
    append(bad, be32(1));
    append(bad, {7});
    TempFile fb("fixture_bad.idx");
    write_bytes(fb.path, bad);
    CHECK_THROWS_AS(lwal::load_idx(fb.path, fl.path), lwal::DataError);

    // truncated payload
    std::vector<unsigned char> trunc;
    append(trunc, be32(0x00000803));
    append(trunc, be32(2));
    append(trunc, be32(2));
    append(trunc, be32(2));
    append(trunc, {0, 1, 2}); // 8 expected
    TempFile ft("fixture_trunc.idx");
    write_bytes(ft.path, trunc);
    CHECK_THROWS_AS(lwal::load_idx(ft.path, fl.path), lwal::DataError);

    // image/label count mismatch
    std::vector<unsigned char> imgs;
    append(imgs, be32(0x00000803));
    append(imgs, be32(2));
    append(imgs, be32(1));
    append(imgs, be32(1));
    append(imgs, {5, 6});
    TempFile fi("fixture_imgs2.idx");
    write_bytes(fi.path, imgs);
    CHECK_THROWS_AS(lwal::load_idx(fi.path, fl.path), lwal::DataError);

    // labels with a bad magic
    std::vector<unsigned char> badl;
    append(badl, be32(0x00000803));
    append(badl, be32(2));
    append(badl, {1, 0});
    TempFile fbl("fixture_badlabels.idx");
    write_bytes(fbl.path, badl);
    std::vector<unsigned char> imgs2;
    append(imgs2, be32(0x00000803));
    append(imgs2, be32(2));
    append(imgs2, be32(1));
    append(imgs2, be32(1));
    append(imgs2, {5, 6});
    TempFile fi2("fixture_imgs3.idx");
    write_bytes(fi2.path, imgs2);
    CHECK_THROWS_AS(lwal::load_idx(fi2.path, fbl.path), lwal::DataError);
}

TEST_CASE("load_csv maps labels lexicographically") {
    TempFile f("fixture.csv");
    {
        std::ofstream os(f.path);
        os << "f0,label,f1\n";
        os << "0.5,a,1.5\n";
        os << "2.5,b,3.5\n";
        os << "4.5,a,5.5\n";
    }
    const Dataset ds = lwal::load_csv(f.path, "label");
    CHECK(ds.size() == 3);
    CHECK(ds.num_classes() == 2);
    CHECK(ds.class_names == std::vector<std::string>{"a", "b"});
    CHECK(ds.labels == std::vector<int>{0, 1, 0});
    CHECK(ds.features.at(0, 0) == 0.5);
    CHECK(ds.features.at(0, 1) == 1.5);
    CHECK(ds.features.at(2, 1) == 5.5);

    CHECK_THROWS_AS(lwal::load_csv(f.path, "target"), lwal::ConfigError);

    TempFile empty("fixture_empty.csv");
    { std::ofstream os(empty.path); }
    CHECK_THROWS_AS(lwal::load_csv(empty.path, "label"), lwal::DataError);

    TempFile badcell("fixture_badcell.csv");
    {
        std::ofstream os(badcell.path);
        os << "f0,label\n";
        os << "abc,a\n";
    }
    CHECK_THROWS_AS(lwal::load_csv(badcell.path, "label"), lwal::DataError);
}

TEST_CASE("csv save/load round trip is bit-exact") {
    std::mt19937_64 rng(3);
    Dataset ds;
    ds.features = testutil::random_tensor({100, 5}, rng, -1e3, 1e3);
    std::uniform_int_distribution<int> cls(0, 2);
    for (int i = 0; i < 100; ++i) ds.labels.push_back(cls(rng));
    ds.class_names = {"alpha", "beta", "gamma"};
    ds.provenance = "test";

    TempFile f("fixture_roundtrip.csv");
    lwal::save_csv(ds, f.path);
    const Dataset back = lwal::load_csv(f.path, "label");
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
    CHECK(back.class_names == ds.class_names);
}

TEST_CASE("gen_synthetic degenerate cases") {
    SynthSpec spec;
    spec.depth = 1;
    spec.branching = 2;
    spec.ambient_dim = 4;
    spec.sigma = 0.0;
    spec.samples_per_class = 3;
    spec.seed = 5;
    const lwal::SynthResult r = lwal::gen_synthetic(spec);
    CHECK(r.data.num_classes() == 2);
    CHECK(r.data.size() == 6);
    // sigma 0: every sample equals its class mean
    for (std::size_t i = 0; i < 6; ++i) {
        const std::size_t c = static_cast<std::size_t>(r.data.labels[i]);
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(r.data.features.at(i, k) == r.class_means.at(c, k));
        }
    }
    // two leaves under the root: tree distance 2
    const Tensor td = lwal::tree_distances(r.tree, r.data.class_names);
    CHECK(td.at(0, 1) == 2.0);
}

TEST_CASE("gen_synthetic is bitwise deterministic") {
    SynthSpec spec;
    spec.seed = 11;
    spec.samples_per_class = 10;
    const lwal::SynthResult a = lwal::gen_synthetic(spec);
    const lwal::SynthResult b = lwal::gen_synthetic(spec);
    CHECK(a.data.features == b.data.features);
    CHECK(a.data.labels == b.data.labels);
    CHECK(a.class_means == b.class_means);
}

TEST_CASE("gen_synthetic offsets shrink by rho per level") {
    SynthSpec spec;
    spec.depth = 2;
    spec.branching = 2;
    spec.ambient_dim = 12;
    spec.sigma = 0.5;
    spec.rho = 0.4;
    spec.samples_per_class = 2;
    spec.seed = 17;
    const lwal::SynthResult r = lwal::gen_synthetic(spec);
    // first-generation offsets have norm 10*sigma, second-generation rho*10*sigma;
    // sibling leaves differ by two second-generation offsets only
    const double base = 10.0 * spec.sigma;
    double sib = 0.0;
    for (std::size_t k = 0; k < 12; ++k) {
        const double diff = r.class_means.at(0, k) - r.class_means.at(1, k);
        sib += diff * diff;
    }
    // |a - b| <= |a| + |b| with |a| = |b| = rho * base
    CHECK(std::sqrt(sib) <= 2.0 * spec.rho * base + 1e-9);
    CHECK(std::sqrt(sib) > 0.0);
}

// The planted geometry orders mean distances exactly as the tree does, but
// the reference rows carry tied entries (siblings vs cousins), which caps
// the tau-b of any tie-free learned geometry at sqrt(2/3) ~= 0.81650 for a
// depth-3 binary tree. The true means sit at that ceiling.
TEST_CASE("gen_synthetic true means recover the planted hierarchy") {
    SynthSpec spec; // D=3, B=2, rho=0.4, sigma=0.5 defaults
    spec.samples_per_class = 2;
    spec.seed = 7;
    const lwal::SynthResult r = lwal::gen_synthetic(spec);
    REQUIRE(r.data.num_classes() == 8);

    const Tensor learned = lwal::label_distances(r.class_means);
    const Tensor reference = lwal::tree_distances(r.tree, r.data.class_names);
    const double score = lwal::correlation_score(learned, reference);
    CHECK(score == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(score <= std::sqrt(2.0 / 3.0) + 1e-12);
}

TEST_CASE("split is stratified and deterministic") {
    std::mt19937_64 rng(4);
    Dataset ds;
    ds.features = testutil::random_tensor({10, 2}, rng);
    ds.labels = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    ds.class_names = {"a", "b"};

    const auto [train, test] = lwal::split(ds, 0.5, 99);
    CHECK(train.size() == 5);
    CHECK(test.size() == 5);
    // per-class balance within one sample
    for (int c = 0; c < 2; ++c) {
        long train_c = std::count(train.labels.begin(), train.labels.end(), c);
        long test_c = std::count(test.labels.begin(), test.labels.end(), c);
        CHECK(std::abs(train_c - test_c) <= 1);
        CHECK(train_c >= 1);
    }

    const auto [train2, test2] = lwal::split(ds, 0.5, 99);
    CHECK(train2.features == train.features);
    CHECK(test2.labels == test.labels);

    // union of the splits is the original multiset of rows
    std::multiset<std::vector<double>> all_rows, split_rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        all_rows.insert({ds.features.at(i, 0), ds.features.at(i, 1),
                         static_cast<double>(ds.labels[i])});
    }
    for (const Dataset* part : {&train, &test}) {
        for (std::size_t i = 0; i < part->size(); ++i) {
            split_rows.insert({part->features.at(i, 0), part->features.at(i, 1),
                               static_cast<double>(part->labels[i])});
        }
    }
    CHECK(all_rows == split_rows);

    Dataset tiny;
    tiny.features = testutil::random_tensor({3, 2}, rng);
    tiny.labels = {0, 0, 1};
    tiny.class_names = {"a", "b"};
    CHECK_THROWS_AS(lwal::split(tiny, 0.5, 1), lwal::DataError);
    CHECK_THROWS_AS(lwal::split(ds, 0.0, 1), lwal::ConfigError);
    CHECK_THROWS_AS(lwal::split(ds, 1.0, 1), lwal::ConfigError);
}

TEST_CASE("batches cover each epoch exactly once") {
    std::mt19937_64 rng(5);
    Dataset ds;
    ds.features = testutil::random_tensor({11, 3}, rng);
    ds.labels.assign(11, 0);
    ds.labels[3] = 1;
    ds.class_names = {"a", "b"};

    // batch_size >= m: one batch with every row
    lwal::BatchIterator big(ds, 64, 7, 1);
    lwal::Batch batch;
    REQUIRE(big.next(batch));
    CHECK(batch.x.rows() == 11);
    CHECK_FALSE(big.next(batch));

    // an epoch's batches form a permutation of the dataset
    std::multiset<double> seen, expected;
    for (std::size_t i = 0; i < 11; ++i) expected.insert(ds.features.at(i, 0));
    lwal::BatchIterator it(ds, 4, 7, 2);
    std::vector<std::size_t> batch_sizes;
    while (it.next(batch)) {
        batch_sizes.push_back(batch.x.rows());
        for (std::size_t i = 0; i < batch.x.rows(); ++i) seen.insert(batch.x.at(i, 0));
    }
    CHECK(batch_sizes == std::vector<std::size_t>{4, 4, 3}); // short final batch kept
    CHECK(seen == expected);

    // same (seed, epoch) gives the identical sequence
    lwal::BatchIterator a(ds, 4, 7, 2), b(ds, 4, 7, 2);
    lwal::Batch ba, bb;
    while (a.next(ba)) {
        REQUIRE(b.next(bb));
        CHECK(ba.x == bb.x);
        CHECK(ba.labels == bb.labels);
    }

    // different epochs reshuffle
    lwal::BatchIterator c(ds, 11, 7, 3);
    lwal::Batch bc;
    REQUIRE(c.next(bc));
    bool differs = false;
    for (std::size_t i = 0; i < 11 && !differs; ++i) {
        if (bc.x.at(i, 0) != batch.x.at(i, 0)) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("synth spec file round trip") {
    SynthSpec spec;
    spec.depth = 2;
    spec.branching = 3;
    spec.ambient_dim = 9;
    spec.sigma = 0.25;
    spec.rho = 0.6;
    spec.samples_per_class = 40;
    spec.seed = 123;

    TempFile f("fixture_spec.txt");
    spec.save(f.path);
    const SynthSpec back = SynthSpec::load(f.path);
    CHECK(back.depth == spec.depth);
    CHECK(back.branching == spec.branching);
    CHECK(back.ambient_dim == spec.ambient_dim);
    CHECK(back.sigma == spec.sigma);
    CHECK(back.rho == spec.rho);
    CHECK(back.samples_per_class == spec.samples_per_class);
    CHECK(back.seed == spec.seed);

    TempFile bad("fixture_spec_bad.txt");
    {
        std::ofstream os(bad.path);
        os << "depth = 2\nbogus_key = 1\n";
    }
    CHECK_THROWS_AS(SynthSpec::load(bad.path), lwal::ConfigError);
}

// Real MNIST files are optional; the loader test runs only when present.
TEST_CASE("load_idx on real MNIST when available") {
    const char* dir = std::getenv("LWAL_MNIST_DIR");
    std::vector<std::string> candidates;
    if (dir != nullptr) candidates.push_back(dir);
    candidates.push_back("data/mnist");
    std::string found;
    for (const std::string& c : candidates) {
        if (std::filesystem::exists(std::filesystem::path(c) / "t10k-images-idx3-ubyte")) {
            found = c;
            break;
        }
    }
    if (found.empty()) {
        return; // not an error: dataset files are optional
    }
    const Dataset ds = lwal::load_idx(
        (std::filesystem::path(found) / "t10k-images-idx3-ubyte").string(),
        (std::filesystem::path(found) / "t10k-labels-idx1-ubyte").string());
    CHECK(ds.size() == 10000);
    CHECK(ds.input_dim() == 784);
    CHECK(ds.num_classes() == 10);
}
