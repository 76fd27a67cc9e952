#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "baed/bp.hpp"
#include "baed/explain.hpp"
#include "baed/gnn.hpp"
#include "baed/graph.hpp"
#include "baed/priors.hpp"

namespace baed {

struct SbmParams {
    int n = 0;
    int class_count = 0;
    double p_in = 0.0;
    double p_out = 0.0;
    int feature_dim = 0;
    std::optional<uint64_t> seed;  // absent: derived from the run seed
};

struct FileDataset {
    std::string edge_path;
    std::string label_path;
    std::string feature_path;  // empty: feature-free
    int class_count = 0;
};

struct DatasetConfig {
    std::optional<SbmParams> sbm;
    std::optional<FileDataset> files;
};

struct ExplainerConfig {
    SaliencyMethod method = SaliencyMethod::ig;
    int n_nodes = 5;
    int ig_steps = 32;
    FaithfulnessMode faithfulness_mode = FaithfulnessMode::symmetric;
    double faithfulness_smoothing = 1e-6;
};

struct PriorConfig {
    double l2 = 1e-3;
    double blend = 0.0;
    PriorMode mode = PriorMode::logistic;
    UnlabeledInit unlabeled_init = UnlabeledInit::uniform;
    int max_iters = 5000;
    double onehot_smoothing = 0.01;
};

enum class RunMode { full, ablation1, ablation2, ablation3, random_walk_baseline };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

struct ExperimentConfig {
    DatasetConfig dataset;
    double ratio = 0.01;
    int target_cap = 200;
    BpConfig bp;
    TrainConfig train;
    ExplainerConfig explainer;
    PriorConfig prior;
    std::vector<uint64_t> seeds = {1};
    RunMode mode = RunMode::full;
    int jobs = 1;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
    // FNV-1a over the canonical JSON dump; names the run directory
    std::string hash() const;
    void validate() const;
};

struct SeedReport {
    uint64_t seed = 0;
    bool failed = false;
    std::string error;

    double accuracy = 0.0;
    std::optional<double> mean_faithfulness;
    std::optional<double> coverage;
    int bp_iterations = 0;
    bool bp_converged = false;
    int bp_numeric_resets = 0;
    int train_epochs = 0;
    int target_count = 0;
    int labeled_count = 0;
    double avg_degree = 0.0;

    std::map<std::string, double> timings;  // stage -> seconds (excluded from body)
    int cache_hits = 0;

    nlohmann::json body() const;
};

struct RunReport {
    std::string config_hash;
    nlohmann::json config_echo;
    RunMode mode = RunMode::full;
    std::vector<SeedReport> seeds;
    bool partial = false;  // some seed failed

    // mean and sample standard deviation over successful seeds
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    std::optional<double> faithfulness_mean, faithfulness_std;
    std::optional<double> coverage_mean, coverage_std;

    // include_timings = false yields the deterministic body
    nlohmann::json to_json(bool include_timings = true) const;
};

// Drops every timing/cache field, leaving the deterministic body.
nlohmann::json strip_timings(nlohmann::json report);

// Full pipeline per seed: split -> priors -> BP -> auxiliary GNN -> per-target
// saliency/subgraph/prediction/faithfulness -> aggregate. Stage artifacts land
// under out_dir/runs/<config-hash>/<seed>/ and reusable ones under
// out_dir/cache/.
RunReport run_experiment(const ExperimentConfig& config, const std::string& out_dir);

RunReport run_baed(const ExperimentConfig& config, const std::string& out_dir);
RunReport run_ablation(const ExperimentConfig& config, const std::string& out_dir);

enum class SweepAxis { ratio, n_nodes, epsilon };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& s);

// One full run per value with shared seeds; writes the combined CSV
// "axis_value,seed,accuracy,faithfulness,coverage" to out_dir/sweep.csv.
// Invalid values are skipped with a recorded warning.
struct SweepResult {
    std::vector<RunReport> reports;
    std::vector<std::string> warnings;
};
SweepResult sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values,
                  const std::string& out_dir);

// Fraction of predictions whose label matches the ground truth.
double evaluate_accuracy(const std::vector<Prediction>& predictions,
                         const std::map<int, int>& truth);

}  // namespace baed
