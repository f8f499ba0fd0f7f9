// Command-line front-end: synthetic data generation, training runs,
// label-structure evaluation and report aggregation.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "lwal/data.hpp"
#include "lwal/errors.hpp"
#include "lwal/harness.hpp"
#include "lwal/label_analysis.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_gen_synth(const std::string& spec_path, const std::string& out_dir) {
    const lwal::SynthSpec spec = lwal::SynthSpec::load(spec_path);
    const lwal::SynthResult result = lwal::gen_synthetic(spec);
    fs::create_directories(out_dir);
    lwal::save_csv(result.data, (fs::path(out_dir) / "features.csv").string());
    result.tree.save_tsv((fs::path(out_dir) / "hierarchy.tsv").string());
    spec.save((fs::path(out_dir) / "spec_echo.txt").string());
    std::cout << "generated " << result.data.size() << " samples, "
              << result.data.num_classes() << " classes -> " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path) {
    const lwal::RunConfig cfg = lwal::parse_run_config(config_path);
    const auto records = lwal::run(cfg);
    for (const lwal::RunRecord& rec : records) {
        std::cout << "seed " << rec.seed << ": best_acc=" << rec.best_acc
                  << " (epoch " << rec.best_epoch << "), auac=" << rec.auac;
        if (rec.correlation.has_value()) {
            std::cout << ", correlation_score=" << *rec.correlation;
        }
        std::cout << "\n";
    }
    std::cout << "outputs in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_eval_labels(const std::string& checkpoint_path, const std::string& hierarchy_path,
                    const std::string& newick_out) {
    const auto [vectors, names] = lwal::load_label_snapshot(checkpoint_path);
    const lwal::HierarchyTree tree = lwal::HierarchyTree::load_tsv(hierarchy_path);
    std::cout << lwal::format_score_report(vectors, names, tree);
    if (!newick_out.empty()) {
        const lwal::Dendrogram dendro =
            lwal::average_linkage(lwal::label_distances(vectors), names);
        std::ofstream os(newick_out);
        if (!os) {
            throw lwal::DataError("cannot write Newick file: " + newick_out);
        }
        os << lwal::export_newick(dendro) << '\n';
    }
    return 0;
}

int cmd_report(const std::string& runs_dir, std::string out_path) {
    if (out_path.empty()) {
        out_path = (fs::path(runs_dir) / "report.txt").string();
    }
    std::cout << lwal::write_report(runs_dir, out_path);
    std::cout << "\nreport written to " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive label learning experiments"};
    app.require_subcommand(1);

    std::string spec_path, gen_out_dir;
    CLI::App* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
    gen->add_option("--spec", spec_path, "Synthetic spec file (key = value)")->required();
    gen->add_option("--out", gen_out_dir, "Output directory")->required();

    std::string config_path;
    CLI::App* train = app.add_subcommand("train", "Run a training experiment");
    train->add_option("--config", config_path, "Run config file (key = value)")->required();

    std::string checkpoint_path, hierarchy_path, newick_out;
    CLI::App* eval = app.add_subcommand("eval-labels", "Score a label snapshot");
    eval->add_option("--checkpoint", checkpoint_path, "Label snapshot CSV from train")
        ->required();
    eval->add_option("--hierarchy", hierarchy_path, "Hierarchy TSV (parent<TAB>child)")
        ->required();
    eval->add_option("--newick-out", newick_out, "Optional dendrogram output path");

    std::string runs_dir, report_out;
    CLI::App* report = app.add_subcommand("report", "Aggregate run directories");
    report->add_option("--runs", runs_dir, "Directory holding run output directories")
        ->required();
    report->add_option("--out", report_out, "Report path (default <runs>/report.txt)");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_synth(spec_path, gen_out_dir);
        if (train->parsed()) return cmd_train(config_path);
        if (eval->parsed()) return cmd_eval_labels(checkpoint_path, hierarchy_path, newick_out);
        if (report->parsed()) return cmd_report(runs_dir, report_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help
        }
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const lwal::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const lwal::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const lwal::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const lwal::DomainError& e) {
        // domain breakdowns at run time (underflowed probabilities, NaN
        // inputs) are numeric failures from the caller's point of view
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
