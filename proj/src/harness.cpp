#include "lwal/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"

#include "lwal/errors.hpp"

namespace lwal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(strip(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(strip(cur));
    return parts;
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Hidden widths follow the input scale: image-sized inputs get the wider
// network, small feature vectors the narrow one.
std::vector<std::size_t> hidden_layers_for(std::size_t input_dim) {
    if (input_dim > 100) {
        return {256};
    }
    return {64};
}

std::pair<double, double> mean_spread(const std::vector<double>& xs) {
    if (xs.empty()) {
        return {0.0, 0.0};
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double spread = 0.0;
    for (double x : xs) spread = std::max(spread, std::abs(x - mean));
    return {mean, spread};
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == truth[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Indices of class names that map to hierarchy leaves, in class order.
std::vector<std::size_t> mapped_classes(const std::vector<std::string>& class_names,
                                        const HierarchyTree& tree) {
    std::vector<std::size_t> mapped;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        const int id = tree.find(class_names[c]);
        if (id != -1 && tree.is_leaf(id)) {
            mapped.push_back(c);
        }
    }
    return mapped;
}

Tensor select_rows(const Tensor& m, const std::vector<std::size_t>& rows) {
    const std::size_t d = m.cols();
    Tensor out({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out[i * d + j] = m[rows[i] * d + j];
        }
    }
    return out;
}

} // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::Std: return "std";
        case Method::Lwal: return "lwal";
        case Method::LwalRpl: return "lwal_rpl";
    }
    throw UsageError("unknown method");
}

Method parse_method(const std::string& name) {
    if (name == "std") return Method::Std;
    if (name == "lwal") return Method::Lwal;
    if (name == "lwal_rpl") return Method::LwalRpl;
    throw ConfigError("unknown method '" + name + "' (expected std, lwal or lwal_rpl)");
}

void RunConfig::validate() const {
    if (dataset_kind != "synth" && dataset_kind != "csv" && dataset_kind != "idx") {
        throw ConfigError("dataset.kind must be synth, csv or idx");
    }
    if (dataset_kind == "idx") {
        if (dataset_paths.size() != 2) {
            throw ConfigError("idx datasets need two paths (images, labels)");
        }
    } else if (dataset_paths.size() != 1) {
        throw ConfigError("dataset needs exactly one path");
    }
    if (seeds.empty()) {
        throw ConfigError("at least one seed required");
    }
    if (out_dir.empty()) {
        throw ConfigError("out_dir is required");
    }
    if (dim_multiplier == 0) {
        throw ConfigError("dim_multiplier must be >= 1");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test fraction must lie in (0,1)");
    }
    train.validate();
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot open config file: " + path);
    }
    RunConfig cfg;
    cfg.train.repel_weight = -1.0; // sentinel: resolved after parsing
    bool method_seen = false;
    double head_l2 = 0.1;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = strip(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value'");
        }
        const std::string key = strip(stripped.substr(0, eq));
        const std::string value = strip(stripped.substr(eq + 1));
        try {
            if (key == "dataset.kind") {
                cfg.dataset_kind = value;
            } else if (key == "dataset.path") {
                cfg.dataset_paths.push_back(value);
            } else if (key == "dataset.paths") {
                for (const std::string& p : split_on(value, ',')) {
                    cfg.dataset_paths.push_back(p);
                }
            } else if (key == "method") {
                cfg.method = parse_method(value);
                method_seen = true;
            } else if (key == "epochs") {
                cfg.train.epochs = std::stol(value);
            } else if (key == "batch_size") {
                cfg.train.batch_size = std::stoul(value);
            } else if (key == "learning_rate") {
                cfg.train.learning_rate = std::stod(value);
            } else if (key == "k") {
                cfg.train.update_frequency = std::stol(value);
            } else if (key == "w") {
                cfg.train.warmup_steps = std::stol(value);
            } else if (key == "lambda") {
                cfg.train.repel_weight = std::stod(value);
            } else if (key == "dim_multiplier") {
                cfg.dim_multiplier = std::stoul(value);
            } else if (key == "head_l2") {
                head_l2 = std::stod(value);
            } else if (key == "seeds") {
                cfg.seeds.clear();
                for (const std::string& s : split_on(value, ',')) {
                    cfg.seeds.push_back(std::stoull(s));
                }
            } else if (key == "hierarchy") {
                cfg.hierarchy_path = value;
            } else if (key == "out_dir") {
                cfg.out_dir = value;
            } else {
                throw ConfigError("unknown config key '" + key + "' at line " +
                                  std::to_string(lineno));
            }
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad value for config key '" + key + "' at line " +
                              std::to_string(lineno));
        }
    }
    if (!method_seen) {
        throw ConfigError("config is missing 'method'");
    }
    if (cfg.train.repel_weight < 0.0) {
        cfg.train.repel_weight = cfg.method == Method::LwalRpl ? 10.0 : 0.0;
    }
    if (cfg.method == Method::Std) {
        cfg.dim_multiplier = 1;
    }
    cfg.test_fraction = 0.2;
    cfg.head_l2 = head_l2;
    cfg.validate();
    return cfg;
}

double auac(const RunRecord& record) {
    if (record.epochs.empty()) {
        throw UsageError("auac: record has no epochs");
    }
    double s = 0.0;
    for (const EpochRecord& e : record.epochs) {
        s += e.test_acc;
    }
    return s / static_cast<double>(record.epochs.size());
}

std::optional<int> time_reduction(const RunRecord& method_record,
                                  const RunRecord& reference_record) {
    if (method_record.epochs.size() != reference_record.epochs.size()) {
        throw UsageError("time_reduction: records have different epoch counts");
    }
    const double target = reference_record.best_acc;
    const long total = static_cast<long>(method_record.epochs.size());
    for (const EpochRecord& e : method_record.epochs) {
        if (e.test_acc >= target) {
            const double pct =
                100.0 * static_cast<double>(total - e.epoch) / static_cast<double>(total);
            return static_cast<int>(std::llround(pct));
        }
    }
    return std::nullopt;
}

void save_label_snapshot(const Tensor& vectors, const std::vector<std::string>& class_names,
                         const std::string& path) {
    if (vectors.ndim() != 2 || vectors.rows() != class_names.size()) {
        throw ShapeError("label snapshot: one name per row required");
    }
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot write label snapshot: " + path);
    }
    const std::size_t d = vectors.cols();
    os << "class";
    for (std::size_t j = 0; j < d; ++j) {
        os << ",v" << j;
    }
    os << '\n';
    for (std::size_t c = 0; c < vectors.rows(); ++c) {
        os << class_names[c];
        for (std::size_t j = 0; j < d; ++j) {
            os << ',' << format_g17(vectors[c * d + j]);
        }
        os << '\n';
    }
}

std::pair<Tensor, std::vector<std::string>> load_label_snapshot(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open label snapshot: " + path);
    }
    std::string line;
    if (!std::getline(is, line)) {
        throw DataError("label snapshot is empty: " + path);
    }
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_on(line, ',');
        if (cells.size() < 2) {
            throw DataError("label snapshot line " + std::to_string(lineno) + " too short");
        }
        names.push_back(cells[0]);
        std::vector<double> row;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                row.push_back(std::stod(cells[i]));
            } catch (const std::exception&) {
                throw DataError("bad number in label snapshot line " + std::to_string(lineno));
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw DataError("label snapshot has no rows: " + path);
    }
    const std::size_t d = rows.front().size();
    Tensor t({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d) {
            throw DataError("label snapshot has ragged rows: " + path);
        }
        for (std::size_t j = 0; j < d; ++j) {
            t[i * d + j] = rows[i][j];
        }
    }
    return {std::move(t), std::move(names)};
}

double hierarchy_correlation(const Tensor& label_vectors,
                             const std::vector<std::string>& class_names,
                             const HierarchyTree& tree) {
    const std::vector<std::size_t> mapped = mapped_classes(class_names, tree);
    if (mapped.empty()) {
        throw DataError("no dataset class maps to a hierarchy leaf");
    }
    std::vector<std::string> mapped_names;
    for (std::size_t c : mapped) {
        mapped_names.push_back(class_names[c]);
    }
    const Tensor learned = label_distances(select_rows(label_vectors, mapped));
    const Tensor reference = tree_distances(tree, mapped_names);
    return correlation_score(learned, reference);
}

std::string format_score_report(const Tensor& label_vectors,
                                const std::vector<std::string>& class_names,
                                const HierarchyTree& tree) {
    const std::vector<std::size_t> mapped = mapped_classes(class_names, tree);
    if (mapped.empty()) {
        throw DataError("no dataset class maps to a hierarchy leaf");
    }
    std::vector<std::string> mapped_names;
    for (std::size_t c : mapped) {
        mapped_names.push_back(class_names[c]);
    }
    const Tensor learned = label_distances(select_rows(label_vectors, mapped));
    const Tensor reference = tree_distances(tree, mapped_names);
    const std::vector<double> taus = per_class_tau(learned, reference);
    double score = 0.0;
    for (double t : taus) score += t;
    score /= static_cast<double>(taus.size());

    std::ostringstream os;
    os << "correlation_score=" << format_g17(score) << '\n';
    for (std::size_t i = 0; i < taus.size(); ++i) {
        os << "tau_b[" << mapped_names[i] << "]=" << format_g17(taus[i]) << '\n';
    }
    return os.str();
}

namespace {

struct SeedRun {
    RunRecord record;
    EncoderParams final_params;
};

SeedRun train_one_seed(const RunConfig& cfg, const Dataset& train_ds, const Dataset& test_ds,
                       std::uint64_t seed) {
    const std::size_t num_classes = train_ds.num_classes();
    std::mt19937_64 master(seed);
    const std::uint64_t init_seed = master();
    const std::uint64_t table_seed = master();
    const std::uint64_t batch_seed = master();

    const std::size_t latent =
        cfg.method == Method::Std ? num_classes : cfg.dim_multiplier * num_classes;

    EncoderConfig ecfg;
    ecfg.input_dim = train_ds.input_dim();
    ecfg.hidden_layers = hidden_layers_for(ecfg.input_dim);
    ecfg.latent_dim = latent;
    ecfg.head_l2 = cfg.head_l2;
    ecfg.init_seed = init_seed;

    TrainConfig tc = cfg.train;
    tc.seed = seed;
    if (cfg.method != Method::LwalRpl) {
        tc.repel_weight = 0.0;
    }

    TrainerState state =
        cfg.method == Method::Std
            ? make_std_trainer(init_encoder(ecfg), num_classes, tc)
            : make_lwal_trainer(init_encoder(ecfg),
                                LabelTable::random_init(num_classes, latent, table_seed), tc);

    RunRecord rec;
    rec.seed = seed;
    rec.class_names = train_ds.class_names;

    double cum_ms = 0.0;
    for (long epoch = 1; epoch <= tc.epochs; ++epoch) {
        state.epoch = epoch;
        BatchIterator batches(train_ds, tc.batch_size, batch_seed, epoch);
        Batch batch;
        double loss_sum = 0.0;
        long steps = 0;
        while (batches.next(batch)) {
            const StepLog log = cfg.method == Method::Std ? std_train_step(state, batch, tc)
                                                          : lwal_train_step(state, batch, tc);
            loss_sum += log.total(tc.repel_weight);
            cum_ms += log.wall_ms;
            ++steps;
        }
        const std::vector<int> preds =
            cfg.method == Method::Std ? predict_std(state.params, test_ds.features)
                                      : predict(state.params, *state.table, test_ds.features);
        EpochRecord er;
        er.epoch = epoch;
        er.train_loss = loss_sum / static_cast<double>(steps);
        er.test_acc = accuracy(preds, test_ds.labels);
        er.wall_ms = cum_ms;
        rec.epochs.push_back(er);
    }

    rec.best_acc = 0.0;
    rec.best_epoch = 1;
    for (const EpochRecord& e : rec.epochs) {
        if (e.test_acc > rec.best_acc) {
            rec.best_acc = e.test_acc;
            rec.best_epoch = e.epoch;
        }
    }
    rec.auac = auac(rec);

    if (cfg.method == Method::Std) {
        // One-hot baseline: label vectors are the class centroids of the
        // final train-set encodings.
        const Tensor z = encoder_forward(state.params, train_ds.features);
        const auto centroids = compute_centroids(z, train_ds.labels, num_classes);
        Tensor snapshot({num_classes, state.params.latent_dim()});
        for (const auto& [cls, centroid] : centroids) {
            for (std::size_t k = 0; k < centroid.size(); ++k) {
                snapshot[static_cast<std::size_t>(cls) * centroid.size() + k] = centroid[k];
            }
        }
        rec.label_snapshot = std::move(snapshot);
    } else {
        rec.label_snapshot = state.table->vectors();
    }

    return SeedRun{std::move(rec), std::move(state.params)};
}

Dataset build_dataset(const RunConfig& cfg, std::optional<HierarchyTree>& tree_out) {
    if (cfg.dataset_kind == "synth") {
        const SynthSpec spec = SynthSpec::load(cfg.dataset_paths[0]);
        SynthResult result = gen_synthetic(spec);
        if (cfg.hierarchy_path.empty()) {
            tree_out = std::move(result.tree);
        }
        return std::move(result.data);
    }
    if (cfg.dataset_kind == "csv") {
        return load_csv(cfg.dataset_paths[0], "label");
    }
    return load_idx(cfg.dataset_paths[0], cfg.dataset_paths[1]);
}

} // namespace

std::vector<RunRecord> run(const RunConfig& cfg) {
    cfg.validate();
    std::optional<HierarchyTree> tree;
    Dataset ds = build_dataset(cfg, tree);
    if (!cfg.hierarchy_path.empty()) {
        tree = HierarchyTree::load_tsv(cfg.hierarchy_path);
    }

    fs::create_directories(cfg.out_dir);
    std::ofstream metrics(fs::path(cfg.out_dir) / "metrics.jsonl");
    if (!metrics) {
        throw DataError("cannot write metrics stream in " + cfg.out_dir);
    }

    std::vector<RunRecord> records;
    json jrecords = json::array();
    for (const std::uint64_t seed : cfg.seeds) {
        auto [train_ds, test_ds] = split(ds, cfg.test_fraction, seed);
        SeedRun seed_run = train_one_seed(cfg, train_ds, test_ds, seed);
        RunRecord& rec = seed_run.record;

        const std::string tag = "seed" + std::to_string(seed);
        const std::string checkpoint_file = "checkpoint_" + tag + ".albl";
        const std::string labels_file = "labels_" + tag + ".csv";
        save_checkpoint(seed_run.final_params, (fs::path(cfg.out_dir) / checkpoint_file).string());
        save_label_snapshot(rec.label_snapshot, rec.class_names,
                            (fs::path(cfg.out_dir) / labels_file).string());

        std::string newick_file, scores_file;
        if (tree.has_value()) {
            rec.correlation = hierarchy_correlation(rec.label_snapshot, rec.class_names, *tree);
            scores_file = "scores_" + tag + ".txt";
            std::ofstream ss(fs::path(cfg.out_dir) / scores_file);
            ss << format_score_report(rec.label_snapshot, rec.class_names, *tree);

            newick_file = "dendro_" + tag + ".nwk";
            const Dendrogram dendro =
                average_linkage(label_distances(rec.label_snapshot), rec.class_names);
            std::ofstream ns(fs::path(cfg.out_dir) / newick_file);
            ns << export_newick(dendro) << '\n';
        }

        for (const EpochRecord& e : rec.epochs) {
            json line;
            line["seed"] = seed;
            line["epoch"] = e.epoch;
            line["train_loss"] = e.train_loss;
            line["test_acc"] = e.test_acc;
            line["wall_ms"] = e.wall_ms;
            metrics << line.dump() << '\n';
        }

        json jrec;
        jrec["seed"] = seed;
        jrec["best_acc"] = rec.best_acc;
        jrec["best_epoch"] = rec.best_epoch;
        jrec["auac"] = rec.auac;
        if (rec.correlation.has_value()) {
            jrec["correlation"] = *rec.correlation;
        }
        json curve = json::array();
        for (const EpochRecord& e : rec.epochs) {
            curve.push_back({{"epoch", e.epoch},
                             {"train_loss", e.train_loss},
                             {"test_acc", e.test_acc},
                             {"wall_ms", e.wall_ms}});
        }
        jrec["curve"] = std::move(curve);
        jrec["checkpoint_file"] = checkpoint_file;
        jrec["labels_file"] = labels_file;
        if (!newick_file.empty()) {
            jrec["newick_file"] = newick_file;
            jrec["scores_file"] = scores_file;
        }
        jrecords.push_back(std::move(jrec));

        records.push_back(std::move(rec));
    }

    json jrun;
    jrun["method"] = method_name(cfg.method);
    jrun["epochs"] = cfg.train.epochs;
    jrun["dataset_kind"] = cfg.dataset_kind;
    jrun["class_names"] = ds.class_names;
    jrun["dim_multiplier"] = cfg.dim_multiplier;
    jrun["records"] = std::move(jrecords);
    std::ofstream runfile(fs::path(cfg.out_dir) / "run.json");
    runfile << jrun.dump(2) << '\n';

    return records;
}

namespace {

struct LoadedRun {
    std::string method;
    long epochs = 0;
    std::vector<RunRecord> records;
};

LoadedRun load_run_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open " + path.string());
    }
    json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw DataError("bad run.json at " + path.string() + ": " + e.what());
    }
    LoadedRun run;
    run.method = j.at("method").get<std::string>();
    run.epochs = j.at("epochs").get<long>();
    for (const json& jrec : j.at("records")) {
        RunRecord rec;
        rec.seed = jrec.at("seed").get<std::uint64_t>();
        rec.best_acc = jrec.at("best_acc").get<double>();
        rec.best_epoch = jrec.at("best_epoch").get<long>();
        rec.auac = jrec.at("auac").get<double>();
        if (jrec.contains("correlation")) {
            rec.correlation = jrec.at("correlation").get<double>();
        }
        for (const json& je : jrec.at("curve")) {
            EpochRecord er;
            er.epoch = je.at("epoch").get<long>();
            er.train_loss = je.at("train_loss").get<double>();
            er.test_acc = je.at("test_acc").get<double>();
            er.wall_ms = je.at("wall_ms").get<double>();
            rec.epochs.push_back(er);
        }
        run.records.push_back(std::move(rec));
    }
    return run;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

} // namespace

std::string write_report(const std::string& runs_dir, const std::string& out_path) {
    std::vector<LoadedRun> runs;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "run.json")) {
            dirs.push_back(entry.path());
        }
    }
    if (fs::exists(fs::path(runs_dir) / "run.json")) {
        dirs.push_back(fs::path(runs_dir));
    }
    std::sort(dirs.begin(), dirs.end());
    for (const fs::path& dir : dirs) {
        runs.push_back(load_run_json(dir / "run.json"));
    }
    if (runs.empty()) {
        throw DataError("no run.json found under " + runs_dir);
    }
    // Reference first, then the adaptive variants.
    std::stable_sort(runs.begin(), runs.end(), [](const LoadedRun& a, const LoadedRun& b) {
        const auto rank = [](const std::string& m) { return m == "std" ? 0 : 1; };
        return rank(a.method) < rank(b.method);
    });

    const LoadedRun* reference = nullptr;
    for (const LoadedRun& r : runs) {
        if (r.method == "std") {
            reference = &r;
            break;
        }
    }

    std::ostringstream os;
    json jreport;
    jreport["runs_dir"] = runs_dir;
    jreport["methods"] = json::array();
    os << "# experiment report\n";
    os << "runs: " << runs_dir << "\n";
    os << "reference: " << (reference ? "std" : "(none)") << "\n";
    for (const LoadedRun& r : runs) {
        std::vector<double> best, aucs, corrs;
        std::vector<std::uint64_t> seeds;
        for (const RunRecord& rec : r.records) {
            best.push_back(rec.best_acc);
            aucs.push_back(rec.auac);
            if (rec.correlation.has_value()) {
                corrs.push_back(*rec.correlation);
            }
            seeds.push_back(rec.seed);
        }
        const auto [bm, bs] = mean_spread(best);
        const auto [am, as] = mean_spread(aucs);

        os << "\nmethod=" << r.method << "\n";
        os << "  seeds:";
        for (std::uint64_t s : seeds) os << ' ' << s;
        os << "\n";
        os << "  best_acc: " << fmt(bm) << " +- " << fmt(bs) << "\n";
        os << "  auac: " << fmt(am) << " +- " << fmt(as) << "\n";

        json jm;
        jm["method"] = r.method;
        jm["best_acc_mean"] = bm;
        jm["best_acc_spread"] = bs;
        jm["auac_mean"] = am;
        jm["auac_spread"] = as;

        std::vector<double> reductions;
        std::size_t paired = 0;
        if (reference != nullptr) {
            for (const RunRecord& rec : r.records) {
                const RunRecord* ref_rec = nullptr;
                for (const RunRecord& cand : reference->records) {
                    if (cand.seed == rec.seed) {
                        ref_rec = &cand;
                        break;
                    }
                }
                if (ref_rec == nullptr) continue;
                ++paired;
                const auto red = time_reduction(rec, *ref_rec);
                if (red.has_value()) {
                    reductions.push_back(static_cast<double>(*red));
                }
            }
        }
        if (reference == nullptr || paired == 0) {
            os << "  time_reduction_vs_std_pct: - (no reference)\n";
            jm["time_reduction_pct"] = nullptr;
        } else if (reductions.empty()) {
            os << "  time_reduction_vs_std_pct: - (reached 0/" << paired << ")\n";
            jm["time_reduction_pct"] = nullptr;
            jm["time_reduction_reached"] = 0;
        } else {
            const auto [rm, rs] = mean_spread(reductions);
            os << "  time_reduction_vs_std_pct: " << fmt(rm, 1) << " +- " << fmt(rs, 1)
               << " (reached " << reductions.size() << "/" << paired << ")"
               << (r.method == "std" ? " [self-reference]" : "") << "\n";
            jm["time_reduction_pct_mean"] = rm;
            jm["time_reduction_pct_spread"] = rs;
            jm["time_reduction_reached"] = reductions.size();
        }

        if (!corrs.empty()) {
            const auto [cm, cs] = mean_spread(corrs);
            os << "  correlation_score: " << fmt(cm) << " +- " << fmt(cs) << "\n";
            jm["correlation_mean"] = cm;
            jm["correlation_spread"] = cs;
        }
        jreport["methods"].push_back(std::move(jm));
    }

    const std::string text = os.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) {
            throw DataError("cannot write report: " + out_path);
        }
        out << text;
        const fs::path jpath = fs::path(out_path).replace_extension(".json");
        std::ofstream jout(jpath);
        jout << jreport.dump(2) << '\n';
    }
    return text;
}

} // namespace lwal
