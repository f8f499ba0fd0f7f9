#include "lwal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "lwal/errors.hpp"

namespace lwal {

namespace {

std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) {
        throw DataError("truncated IDX header: " + path);
    }
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

double parse_double(const std::string& s, std::size_t lineno, std::size_t col) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw DataError("non-numeric feature cell '" + s + "' at line " + std::to_string(lineno) +
                        ", column " + std::to_string(col + 1));
    }
    return v;
}

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    while (true) {
        std::vector<double> v(dim);
        double norm_sq = 0.0;
        for (double& x : v) {
            x = gauss(rng);
            norm_sq += x * x;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm > 1e-8) {
            for (double& x : v) x /= norm;
            return v;
        }
    }
}

} // namespace

void Dataset::validate() const {
    if (labels.empty()) {
        throw DataError("dataset is empty");
    }
    if (features.ndim() != 2 || features.rows() != labels.size()) {
        throw DataError("dataset features/labels size mismatch");
    }
    if (!features.all_finite()) {
        throw DataError("dataset contains non-finite features");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= class_names.size()) {
            throw DataError("dataset label out of range");
        }
    }
}

std::size_t SynthSpec::num_classes() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < depth; ++i) {
        n *= branching;
    }
    return n;
}

void SynthSpec::validate() const {
    if (depth == 0 || branching < 2) {
        throw ConfigError("synthetic spec needs depth >= 1 and branching >= 2");
    }
    if (ambient_dim == 0 || samples_per_class == 0) {
        throw ConfigError("synthetic spec dimensions must be positive");
    }
    if (!(rho > 0.0 && rho < 1.0)) {
        throw ConfigError("synthetic spec needs rho in (0,1)");
    }
    if (sigma < 0.0) {
        throw ConfigError("synthetic spec needs sigma >= 0");
    }
    if (num_classes() > 4096) {
        throw ConfigError("synthetic spec would create too many classes");
    }
}

SynthSpec SynthSpec::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open synthetic spec: " + path);
    }
    SynthSpec spec;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string stripped = strip(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("synthetic spec line " + std::to_string(lineno) +
                              " is not 'key = value'");
        }
        const std::string key = strip(stripped.substr(0, eq));
        const std::string value = strip(stripped.substr(eq + 1));
        try {
            if (key == "depth") {
                spec.depth = std::stoul(value);
            } else if (key == "branching") {
                spec.branching = std::stoul(value);
            } else if (key == "ambient_dim") {
                spec.ambient_dim = std::stoul(value);
            } else if (key == "sigma") {
                spec.sigma = std::stod(value);
            } else if (key == "rho") {
                spec.rho = std::stod(value);
            } else if (key == "samples_per_class") {
                spec.samples_per_class = std::stoul(value);
            } else if (key == "seed") {
                spec.seed = std::stoull(value);
            } else {
                throw ConfigError("unknown synthetic spec key '" + key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad value for synthetic spec key '" + key + "'");
        }
    }
    spec.validate();
    return spec;
}

void SynthSpec::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot write synthetic spec: " + path);
    }
    os << "depth = " << depth << '\n';
    os << "branching = " << branching << '\n';
    os << "ambient_dim = " << ambient_dim << '\n';
    os << "sigma = " << format_full(sigma) << '\n';
    os << "rho = " << format_full(rho) << '\n';
    os << "samples_per_class = " << samples_per_class << '\n';
    os << "seed = " << seed << '\n';
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) {
        throw DataError("cannot open IDX images file: " + images_path);
    }
    if (read_be_u32(imgs, images_path) != 0x00000803u) {
        throw DataError("bad IDX images magic: " + images_path);
    }
    const std::uint32_t count = read_be_u32(imgs, images_path);
    const std::uint32_t rows = read_be_u32(imgs, images_path);
    const std::uint32_t cols = read_be_u32(imgs, images_path);
    if (count == 0 || rows == 0 || cols == 0) {
        throw DataError("IDX images file has a zero dimension: " + images_path);
    }
    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> raw(static_cast<std::size_t>(count) * dim);
    imgs.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(imgs.gcount()) != raw.size()) {
        throw DataError("truncated IDX images payload: " + images_path);
    }

    std::ifstream lbls(labels_path, std::ios::binary);
    if (!lbls) {
        throw DataError("cannot open IDX labels file: " + labels_path);
    }
    if (read_be_u32(lbls, labels_path) != 0x00000801u) {
        throw DataError("bad IDX labels magic: " + labels_path);
    }
    const std::uint32_t label_count = read_be_u32(lbls, labels_path);
    if (label_count != count) {
        throw DataError("IDX image/label counts differ (" + std::to_string(count) + " vs " +
                        std::to_string(label_count) + ")");
    }
    std::vector<unsigned char> raw_labels(label_count);
    lbls.read(reinterpret_cast<char*>(raw_labels.data()),
              static_cast<std::streamsize>(raw_labels.size()));
    if (static_cast<std::size_t>(lbls.gcount()) != raw_labels.size()) {
        throw DataError("truncated IDX labels payload: " + labels_path);
    }

    Dataset ds;
    ds.features = Tensor({count, dim});
    for (std::size_t i = 0; i < raw.size(); ++i) {
        ds.features[i] = static_cast<double>(raw[i]) / 255.0;
    }
    int max_label = 0;
    ds.labels.resize(label_count);
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        ds.labels[i] = static_cast<int>(raw_labels[i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    for (int c = 0; c <= max_label; ++c) {
        ds.class_names.push_back(std::to_string(c));
    }
    ds.provenance = "idx:" + images_path;
    ds.validate();
    return ds;
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open CSV file: " + path);
    }
    std::string line;
    if (!std::getline(is, line)) {
        throw DataError("CSV file is empty: " + path);
    }
    const std::vector<std::string> header = split_csv_line(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) {
            label_idx = i;
            break;
        }
    }
    if (label_idx == header.size()) {
        throw ConfigError("CSV has no label column '" + label_column + "': " + path);
    }

    std::vector<std::vector<double>> feature_rows;
    std::vector<std::string> raw_labels;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("CSV line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        }
        std::vector<double> row;
        row.reserve(header.size() - 1);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_idx) continue;
            row.push_back(parse_double(cells[i], lineno, i));
        }
        feature_rows.push_back(std::move(row));
        raw_labels.push_back(cells[label_idx]);
    }
    if (feature_rows.empty()) {
        throw DataError("CSV has no data rows: " + path);
    }

    std::vector<std::string> names = raw_labels;
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < names.size(); ++i) {
        index[names[i]] = static_cast<int>(i);
    }

    Dataset ds;
    const std::size_t dim = feature_rows.front().size();
    if (dim == 0) {
        throw DataError("CSV has no feature columns: " + path);
    }
    ds.features = Tensor({feature_rows.size(), dim});
    for (std::size_t i = 0; i < feature_rows.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            ds.features[i * dim + j] = feature_rows[i][j];
        }
    }
    for (const std::string& s : raw_labels) {
        ds.labels.push_back(index.at(s));
    }
    ds.class_names = std::move(names);
    ds.provenance = "csv:" + path;
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path, const std::string& label_column) {
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot write CSV file: " + path);
    }
    const std::size_t dim = ds.input_dim();
    os << label_column;
    for (std::size_t j = 0; j < dim; ++j) {
        os << ",f" << j;
    }
    os << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.class_names[static_cast<std::size_t>(ds.labels[i])];
        for (std::size_t j = 0; j < dim; ++j) {
            os << ',' << format_full(ds.features[i * dim + j]);
        }
        os << '\n';
    }
    if (!os) {
        throw DataError("failed writing CSV file: " + path);
    }
}

SynthResult gen_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const std::size_t num_classes = spec.num_classes();
    const double base_scale = 10.0 * spec.sigma;

    // Means level by level; node order within a level follows parent order,
    // so leaf i is class i in left-to-right tree order.
    std::vector<std::vector<double>> level_means;
    level_means.push_back(std::vector<double>(spec.ambient_dim, 0.0)); // root
    std::vector<std::pair<std::string, std::string>> edges;
    std::vector<std::string> level_names{"root"};

    for (std::size_t level = 0; level < spec.depth; ++level) {
        const double offset_scale =
            std::pow(spec.rho, static_cast<double>(level)) * base_scale;
        std::vector<std::vector<double>> next_means;
        std::vector<std::string> next_names;
        const bool leaf_level = (level + 1 == spec.depth);
        for (std::size_t p = 0; p < level_means.size(); ++p) {
            for (std::size_t b = 0; b < spec.branching; ++b) {
                const std::vector<double> dir = random_unit_vector(rng, spec.ambient_dim);
                std::vector<double> mean(spec.ambient_dim);
                for (std::size_t k = 0; k < spec.ambient_dim; ++k) {
                    mean[k] = level_means[p][k] + offset_scale * dir[k];
                }
                const std::size_t idx = next_means.size();
                std::string name;
                if (leaf_level) {
                    name = "class_" + std::to_string(idx);
                } else {
                    name = "g" + std::to_string(level + 1) + "_" + std::to_string(idx);
                }
                edges.emplace_back(level_names[p], name);
                next_means.push_back(std::move(mean));
                next_names.push_back(std::move(name));
            }
        }
        level_means = std::move(next_means);
        level_names = std::move(next_names);
    }

    SynthResult result;
    result.tree = HierarchyTree::from_edges(edges);
    result.class_means = Tensor({num_classes, spec.ambient_dim});
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t k = 0; k < spec.ambient_dim; ++k) {
            result.class_means[c * spec.ambient_dim + k] = level_means[c][k];
        }
    }

    const std::size_t total = num_classes * spec.samples_per_class;
    result.data.features = Tensor({total, spec.ambient_dim});
    result.data.labels.resize(total);
    result.data.class_names = level_names;
    result.data.provenance = "synth:seed=" + std::to_string(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::size_t row = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
            for (std::size_t k = 0; k < spec.ambient_dim; ++k) {
                const double noise = spec.sigma == 0.0 ? 0.0 : spec.sigma * gauss(rng);
                result.data.features[row * spec.ambient_dim + k] =
                    result.class_means[c * spec.ambient_dim + k] + noise;
            }
            result.data.labels[row] = static_cast<int>(c);
        }
    }
    result.data.validate();
    return result;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    ds.validate();
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test fraction must lie in (0,1)");
    }
    const std::size_t m = ds.size();
    const std::size_t n_classes = ds.num_classes();

    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < m; ++i) {
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (by_class[c].size() < 2) {
            throw DataError("class '" + ds.class_names[c] + "' has fewer than 2 samples");
        }
    }

    std::mt19937_64 rng(seed);
    for (auto& idx : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
    }

    // Apportion the global test count by largest remainder so that class
    // proportions hold within one sample.
    const auto target_total =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m)));
    std::vector<std::size_t> take(n_classes);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        const double exact = test_fraction * static_cast<double>(by_class[c].size());
        take[c] = static_cast<std::size_t>(exact);
        take[c] = std::min(take[c], by_class[c].size() - 1);
        assigned += take[c];
        remainders.emplace_back(exact - static_cast<double>(take[c]), c);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [rem, c] : remainders) {
        if (assigned >= target_total) break;
        if (take[c] + 1 < by_class[c].size()) { // keep at least one train sample
            ++take[c];
            ++assigned;
        }
    }

    std::vector<std::size_t> test_rows, train_rows;
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t k = 0; k < by_class[c].size(); ++k) {
            (k < take[c] ? test_rows : train_rows).push_back(by_class[c][k]);
        }
    }

    const auto subset = [&ds](const std::vector<std::size_t>& rows, const char* tag) {
        Dataset out;
        const std::size_t dim = ds.input_dim();
        out.features = Tensor({rows.size(), dim});
        out.labels.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                out.features[i * dim + j] = ds.features[rows[i] * dim + j];
            }
            out.labels.push_back(ds.labels[rows[i]]);
        }
        out.class_names = ds.class_names;
        out.provenance = ds.provenance + ":" + tag;
        return out;
    };
    return {subset(train_rows, "train"), subset(test_rows, "test")};
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                             long epoch)
    : ds_(&ds), batch_size_(batch_size) {
    if (batch_size_ == 0) {
        throw ConfigError("batch size must be >= 1");
    }
    order_.resize(ds.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(epoch));
    std::shuffle(order_.begin(), order_.end(), rng);
}

bool BatchIterator::next(Batch& out) {
    if (pos_ >= order_.size()) {
        return false;
    }
    const std::size_t count = std::min(batch_size_, order_.size() - pos_);
    const std::size_t dim = ds_->input_dim();
    out.x = Tensor({count, dim});
    out.labels.assign(count, 0);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order_[pos_ + i];
        for (std::size_t j = 0; j < dim; ++j) {
            out.x[i * dim + j] = ds_->features[src * dim + j];
        }
        out.labels[i] = ds_->labels[src];
    }
    pos_ += count;
    return true;
}

} // namespace lwal
