#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "baed/pipeline.hpp"

namespace {

void apply_overrides(baed::ExperimentConfig& cfg, const std::vector<uint64_t>& seeds,
                     const std::string& mode, int jobs) {
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!mode.empty()) cfg.mode = baed::run_mode_from_string(mode);
    if (jobs > 0) cfg.jobs = jobs;
    cfg.validate();
}

void print_summary(const baed::RunReport& report, const std::string& out_dir) {
    std::printf("mode=%s config=%s seeds=%zu%s\n", baed::to_string(report.mode).c_str(),
                report.config_hash.c_str(), report.seeds.size(),
                report.partial ? " (partial: some seeds failed)" : "");
    for (const auto& s : report.seeds) {
        if (s.failed) {
            std::printf("  seed %llu: FAILED: %s\n", static_cast<unsigned long long>(s.seed),
                        s.error.c_str());
            continue;
        }
        std::printf("  seed %llu: accuracy=%.4f", static_cast<unsigned long long>(s.seed),
                    s.accuracy);
        if (s.mean_faithfulness) std::printf(" faithfulness=%.4f", *s.mean_faithfulness);
        if (s.coverage) std::printf(" coverage=%.4f", *s.coverage);
        std::printf(" bp_iters=%d%s train_epochs=%d\n", s.bp_iterations,
                    s.bp_converged ? "(conv)" : "", s.train_epochs);
    }
    std::printf("aggregate: accuracy=%.4f +- %.4f", report.accuracy_mean, report.accuracy_std);
    if (report.faithfulness_mean) {
        std::printf(" faithfulness=%.4f +- %.4f", *report.faithfulness_mean,
                    *report.faithfulness_std);
    }
    if (report.coverage_mean) {
        std::printf(" coverage=%.4f +- %.4f", *report.coverage_mean, *report.coverage_std);
    }
    std::printf("\nreport: %s/runs/%s/report.json\n", out_dir.c_str(), report.config_hash.c_str());
}

int run_command(const std::string& config_path, const std::vector<uint64_t>& seeds,
                const std::string& mode, const std::string& out_dir, int jobs, bool dump_subgraphs) {
    baed::ExperimentConfig cfg = baed::ExperimentConfig::from_file(config_path);
    apply_overrides(cfg, seeds, mode, jobs);
    baed::RunReport report = baed::run_experiment(cfg, out_dir);
    print_summary(report, out_dir);
    if (dump_subgraphs) {
        for (const auto& s : report.seeds) {
            std::string path = out_dir + "/runs/" + report.config_hash + "/" +
                               std::to_string(s.seed) + "/subgraphs.txt";
            std::ifstream in(path);
            if (!in) continue;
            std::printf("--- seed %llu subgraphs (%s) ---\n",
                        static_cast<unsigned long long>(s.seed), path.c_str());
            std::cout << in.rdbuf();
        }
    }
    return report.partial ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"belief-propagation label augmentation with explanatory-subgraph prediction"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string mode;
    std::string axis;
    std::vector<uint64_t> seeds;
    std::vector<double> values;
    int jobs = 0;

    auto add_common = [&](CLI::App* sub, bool need_config = true) {
        auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
        if (need_config) opt->required();
        sub->add_option("--seed", seeds, "seed list override")->delimiter(',');
        sub->add_option("--out", out_dir, "output directory (default: out)");
        sub->add_option("--jobs", jobs, "parallel seed jobs");
    };

    CLI::App* run = app.add_subcommand("run", "run the full pipeline");
    add_common(run);
    run->add_option("--mode", mode,
                    "full|ablation1|ablation2|ablation3|random_walk_baseline (default from config)");

    CLI::App* ablate = app.add_subcommand("ablate", "run an ablation variant");
    add_common(ablate);
    ablate->add_option("--mode", mode, "ablation1|ablation2|ablation3")->required();

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a sensitivity sweep");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--axis", axis, "ratio|n_nodes|epsilon")->required();
    sweep_cmd->add_option("--values", values, "axis values")->delimiter(',')->required();

    CLI::App* explain = app.add_subcommand("explain", "run and dump per-target subgraphs");
    add_common(explain);
    explain->add_option("--mode", mode, "full|random_walk_baseline");

    CLI::App* validate = app.add_subcommand("validate", "check a config and its dataset");
    add_common(validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) {
            return run_command(config_path, seeds, mode, out_dir, jobs, false);
        }
        if (ablate->parsed()) {
            baed::RunMode m = baed::run_mode_from_string(mode);
            if (m != baed::RunMode::ablation1 && m != baed::RunMode::ablation2 &&
                m != baed::RunMode::ablation3) {
                throw baed::ValidationError("ablate: mode must be ablation1/2/3");
            }
            return run_command(config_path, seeds, mode, out_dir, jobs, false);
        }
        if (explain->parsed()) {
            return run_command(config_path, seeds, mode, out_dir, jobs, true);
        }
        if (sweep_cmd->parsed()) {
            baed::ExperimentConfig cfg = baed::ExperimentConfig::from_file(config_path);
            apply_overrides(cfg, seeds, mode, jobs);
            baed::SweepAxis sweep_axis = baed::sweep_axis_from_string(axis);
            baed::SweepResult result = baed::sweep(cfg, sweep_axis, values, out_dir);
            for (const auto& w : result.warnings) {
                std::fprintf(stderr, "warning: %s\n", w.c_str());
            }
            bool partial = false;
            for (const auto& r : result.reports) {
                print_summary(r, out_dir);
                partial = partial || r.partial;
            }
            std::printf("sweep csv: %s/sweep.csv\n", out_dir.c_str());
            return partial ? 2 : 0;
        }
        if (validate->parsed()) {
            baed::ExperimentConfig cfg = baed::ExperimentConfig::from_file(config_path);
            apply_overrides(cfg, seeds, mode, jobs);
            baed::Graph graph;
            if (cfg.dataset.sbm) {
                const auto& p = *cfg.dataset.sbm;
                graph = baed::generate_sbm(p.n, p.class_count, p.p_in, p.p_out, p.feature_dim,
                                           p.seed.value_or(1));
            } else {
                baed::LoadStats stats;
                graph = baed::load_graph(cfg.dataset.files->edge_path,
                                         cfg.dataset.files->label_path,
                                         cfg.dataset.files->feature_path,
                                         cfg.dataset.files->class_count, &stats);
                if (stats.dropped_self_loops || stats.dropped_duplicate_edges) {
                    std::printf("dropped %d self-loops, %d duplicate edges\n",
                                stats.dropped_self_loops, stats.dropped_duplicate_edges);
                }
            }
            graph.validate();
            baed::Split split = baed::make_split(graph, cfg.ratio, cfg.target_cap, cfg.seeds[0]);
            if (!split.stratified) {
                std::printf("warning: too few labels for stratified sampling, fell back to uniform\n");
            }
            std::printf("config ok: hash=%s\n", cfg.hash().c_str());
            std::printf("graph: n=%d edges=%d classes=%d avg_degree=%.2f\n", graph.node_count,
                        graph.edge_count(), graph.class_count, graph.average_degree());
            std::printf("split: labeled=%zu target=%zu (ratio=%g, cap=%d)\n", split.labeled.size(),
                        split.target.size(), cfg.ratio, cfg.target_cap);
            return 0;
        }
    } catch (const baed::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
    return 0;
}
