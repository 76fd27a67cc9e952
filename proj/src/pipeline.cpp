#include "baed/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "baed/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace baed {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class StageTimer {
public:
    explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}
    template <typename F>
    auto time(const std::string& stage, F&& fn) {
        auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            sink_[stage] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        } else {
            auto out = fn();
            sink_[stage] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return out;
        }
    }

private:
    std::map<std::string, double>& sink_;
};

void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

std::string method_to_string(SaliencyMethod m) { return m == SaliencyMethod::sm ? "sm" : "ig"; }
SaliencyMethod method_from_string(const std::string& s) {
    if (s == "sm") return SaliencyMethod::sm;
    if (s == "ig") return SaliencyMethod::ig;
    throw ValidationError("unknown saliency method '" + s + "'");
}

std::string fmode_to_string(FaithfulnessMode m) {
    return m == FaithfulnessMode::one_sided ? "one_sided" : "symmetric";
}
FaithfulnessMode fmode_from_string(const std::string& s) {
    if (s == "one_sided") return FaithfulnessMode::one_sided;
    if (s == "symmetric") return FaithfulnessMode::symmetric;
    throw ValidationError("unknown faithfulness mode '" + s + "'");
}

std::string prior_mode_to_string(PriorMode m) {
    return m == PriorMode::logistic ? "logistic" : "hinge";
}
PriorMode prior_mode_from_string(const std::string& s) {
    if (s == "logistic") return PriorMode::logistic;
    if (s == "hinge") return PriorMode::hinge;
    throw ValidationError("unknown prior mode '" + s + "'");
}

std::string unlabeled_to_string(UnlabeledInit u) {
    return u == UnlabeledInit::uniform ? "uniform" : "gaussian";
}
UnlabeledInit unlabeled_from_string(const std::string& s) {
    if (s == "uniform") return UnlabeledInit::uniform;
    if (s == "gaussian") return UnlabeledInit::gaussian;
    throw ValidationError("unknown unlabeled init '" + s + "'");
}

}  // namespace

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::full: return "full";
        case RunMode::ablation1: return "ablation1";
        case RunMode::ablation2: return "ablation2";
        case RunMode::ablation3: return "ablation3";
        case RunMode::random_walk_baseline: return "random_walk_baseline";
    }
    return "full";
}

RunMode run_mode_from_string(const std::string& s) {
    if (s == "full") return RunMode::full;
    if (s == "ablation1") return RunMode::ablation1;
    if (s == "ablation2") return RunMode::ablation2;
    if (s == "ablation3") return RunMode::ablation3;
    if (s == "random_walk_baseline") return RunMode::random_walk_baseline;
    throw ValidationError("unknown mode '" + s + "'");
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::ratio: return "ratio";
        case SweepAxis::n_nodes: return "n_nodes";
        case SweepAxis::epsilon: return "epsilon";
    }
    return "ratio";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "ratio") return SweepAxis::ratio;
    if (s == "n_nodes") return SweepAxis::n_nodes;
    if (s == "epsilon") return SweepAxis::epsilon;
    throw ValidationError("unknown sweep axis '" + s + "'");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    return from_json(j);
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    if (!j.contains("dataset")) throw ValidationError("config: missing dataset");
    const json& ds = j.at("dataset");
    if (ds.contains("sbm") == ds.contains("files")) {
        throw ValidationError("config: dataset needs exactly one of 'sbm' or 'files'");
    }
    if (ds.contains("sbm")) {
        const json& s = ds.at("sbm");
        SbmParams p;
        p.n = s.at("n").get<int>();
        p.class_count = s.at("class_count").get<int>();
        p.p_in = s.at("p_in").get<double>();
        p.p_out = s.at("p_out").get<double>();
        p.feature_dim = s.value("feature_dim", 16);
        if (s.contains("seed")) p.seed = s.at("seed").get<uint64_t>();
        cfg.dataset.sbm = p;
    } else {
        const json& f = ds.at("files");
        FileDataset d;
        d.edge_path = f.at("edges").get<std::string>();
        d.label_path = f.at("labels").get<std::string>();
        d.feature_path = f.value("features", std::string());
        d.class_count = f.at("class_count").get<int>();
        cfg.dataset.files = d;
    }
    cfg.ratio = j.value("ratio", 0.01);
    cfg.target_cap = j.value("target_cap", 200);
    if (j.contains("bp")) {
        const json& b = j.at("bp");
        cfg.bp.eta = b.value("eta", 1e-3);
        cfg.bp.max_iters = b.value("max_iters", 20);
        cfg.bp.epsilon = b.value("epsilon", 0.9);
        cfg.bp.damping = b.value("damping", 0.0);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        cfg.train.learning_rate = t.value("learning_rate", 0.1);
        cfg.train.max_epochs = t.value("max_epochs", 2000);
        cfg.train.patience = t.value("patience", 1000);
        cfg.train.hidden_dim = t.value("hidden_dim", 32);
        cfg.train.layers = t.value("layers", 2);
    }
    if (j.contains("explainer")) {
        const json& e = j.at("explainer");
        cfg.explainer.method = method_from_string(e.value("method", std::string("ig")));
        cfg.explainer.n_nodes = e.value("n_nodes", 5);
        cfg.explainer.ig_steps = e.value("ig_steps", 32);
        cfg.explainer.faithfulness_mode =
            fmode_from_string(e.value("faithfulness_mode", std::string("symmetric")));
        cfg.explainer.faithfulness_smoothing = e.value("faithfulness_smoothing", 1e-6);
    }
    if (j.contains("prior")) {
        const json& p = j.at("prior");
        cfg.prior.l2 = p.value("l2", 1e-3);
        cfg.prior.blend = p.value("blend", 0.0);
        cfg.prior.mode = prior_mode_from_string(p.value("mode", std::string("logistic")));
        cfg.prior.unlabeled_init =
            unlabeled_from_string(p.value("unlabeled_init", std::string("uniform")));
        cfg.prior.max_iters = p.value("max_iters", 5000);
        cfg.prior.onehot_smoothing = p.value("onehot_smoothing", 0.01);
    }
    if (j.contains("seeds")) {
        cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    }
    cfg.mode = run_mode_from_string(j.value("mode", std::string("full")));
    cfg.jobs = j.value("jobs", 1);
    cfg.validate();
    return cfg;
}

json ExperimentConfig::to_json() const {
    json j;
    if (dataset.sbm) {
        json s;
        s["n"] = dataset.sbm->n;
        s["class_count"] = dataset.sbm->class_count;
        s["p_in"] = dataset.sbm->p_in;
        s["p_out"] = dataset.sbm->p_out;
        s["feature_dim"] = dataset.sbm->feature_dim;
        if (dataset.sbm->seed) s["seed"] = *dataset.sbm->seed;
        j["dataset"]["sbm"] = s;
    } else if (dataset.files) {
        json f;
        f["edges"] = dataset.files->edge_path;
        f["labels"] = dataset.files->label_path;
        if (!dataset.files->feature_path.empty()) f["features"] = dataset.files->feature_path;
        f["class_count"] = dataset.files->class_count;
        j["dataset"]["files"] = f;
    }
    j["ratio"] = ratio;
    j["target_cap"] = target_cap;
    j["bp"] = {{"eta", bp.eta},
               {"max_iters", bp.max_iters},
               {"epsilon", bp.epsilon},
               {"damping", bp.damping}};
    j["train"] = {{"learning_rate", train.learning_rate},
                  {"max_epochs", train.max_epochs},
                  {"patience", train.patience},
                  {"hidden_dim", train.hidden_dim},
                  {"layers", train.layers}};
    j["explainer"] = {{"method", method_to_string(explainer.method)},
                      {"n_nodes", explainer.n_nodes},
                      {"ig_steps", explainer.ig_steps},
                      {"faithfulness_mode", fmode_to_string(explainer.faithfulness_mode)},
                      {"faithfulness_smoothing", explainer.faithfulness_smoothing}};
    j["prior"] = {{"l2", prior.l2},
                  {"blend", prior.blend},
                  {"mode", prior_mode_to_string(prior.mode)},
                  {"unlabeled_init", unlabeled_to_string(prior.unlabeled_init)},
                  {"max_iters", prior.max_iters},
                  {"onehot_smoothing", prior.onehot_smoothing}};
    j["seeds"] = seeds;
    j["mode"] = to_string(mode);
    j["jobs"] = jobs;
    return j;
}

void ExperimentConfig::validate() const {
    if (static_cast<bool>(dataset.sbm) == static_cast<bool>(dataset.files)) {
        throw ValidationError("config: dataset needs exactly one of 'sbm' or 'files'");
    }
    if (seeds.empty()) throw ValidationError("config: seeds must be non-empty");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("config: ratio outside (0,1)");
    if (target_cap < 0) throw ValidationError("config: target_cap < 0");
    if (!(bp.epsilon > 0.0 && bp.epsilon <= 1.0)) {
        throw ValidationError("config: bp.epsilon outside (0,1]");
    }
    if (!(bp.eta > 0.0)) throw ValidationError("config: bp.eta must be > 0");
    if (bp.max_iters < 1) throw ValidationError("config: bp.max_iters < 1");
    if (explainer.n_nodes < 1) throw ValidationError("config: explainer.n_nodes < 1");
    if (explainer.ig_steps < 1) throw ValidationError("config: explainer.ig_steps < 1");
    if (!(train.learning_rate > 0.0)) throw ValidationError("config: train.learning_rate <= 0");
    if (train.layers < 1 || train.hidden_dim < 1) {
        throw ValidationError("config: train dims must be >= 1");
    }
    if (prior.blend < 0.0 || prior.blend > 1.0) {
        throw ValidationError("config: prior.blend outside [0,1]");
    }
    if (jobs < 1) throw ValidationError("config: jobs < 1");
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a(to_json().dump())); }

json SeedReport::body() const {
    json j;
    j["seed"] = seed;
    j["failed"] = failed;
    if (failed) {
        j["error"] = error;
        return j;
    }
    j["accuracy"] = accuracy;
    j["faithfulness"] = mean_faithfulness ? json(*mean_faithfulness) : json(nullptr);
    j["coverage"] = coverage ? json(*coverage) : json(nullptr);
    j["bp_iterations"] = bp_iterations;
    j["bp_converged"] = bp_converged;
    j["bp_numeric_resets"] = bp_numeric_resets;
    j["train_epochs"] = train_epochs;
    j["targets"] = target_count;
    j["labeled"] = labeled_count;
    j["avg_degree"] = avg_degree;
    return j;
}

namespace {

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
    int count = 0;
};

Aggregate aggregate(const std::vector<double>& values) {
    Aggregate a;
    a.count = static_cast<int>(values.size());
    if (values.empty()) return a;
    for (double v : values) a.mean += v;
    a.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return a;
}

}  // namespace

json RunReport::to_json(bool include_timings) const {
    json j;
    j["schema_version"] = 1;
    j["config_hash"] = config_hash;
    j["config"] = config_echo;
    j["mode"] = to_string(mode);
    j["partial"] = partial;
    json seed_arr = json::array();
    for (const auto& s : seeds) {
        json e = s.body();
        if (include_timings) {
            e["timings"] = s.timings;
            e["cache_hits"] = s.cache_hits;
        }
        seed_arr.push_back(std::move(e));
    }
    j["seeds"] = std::move(seed_arr);
    json agg;
    agg["accuracy"] = {{"mean", accuracy_mean}, {"std", accuracy_std}};
    agg["faithfulness"] =
        faithfulness_mean ? json{{"mean", *faithfulness_mean}, {"std", *faithfulness_std}}
                          : json(nullptr);
    agg["coverage"] = coverage_mean ? json{{"mean", *coverage_mean}, {"std", *coverage_std}}
                                    : json(nullptr);
    j["aggregate"] = std::move(agg);
    return j;
}

json strip_timings(json report) {
    if (report.contains("seeds")) {
        for (auto& seed : report["seeds"]) {
            seed.erase("timings");
            seed.erase("cache_hits");
        }
    }
    return report;
}

namespace {

// Everything the post-training stages need, produced once per seed.
struct SeedContext {
    Graph graph;
    Split split;
    PriorField priors;
    BpResult bp;            // unused for ablation3
    GnnModel model;         // unused for ablation1
    std::vector<double> loss_trace;
    int train_epochs = 0;
};

struct StageKeys {
    std::string priors;
    std::string bp;
    std::string model;
};

StageKeys stage_keys(const ExperimentConfig& cfg, uint64_t seed) {
    json base;
    base["dataset"] = cfg.to_json().at("dataset");
    base["ratio"] = cfg.ratio;
    base["target_cap"] = cfg.target_cap;
    base["prior"] = cfg.to_json().at("prior");
    base["seed"] = seed;
    StageKeys keys;
    keys.priors = hex64(fnv1a(base.dump()));
    base["bp"] = cfg.to_json().at("bp");
    keys.bp = hex64(fnv1a(base.dump()));
    json model_key = base;
    if (cfg.mode == RunMode::ablation3) {
        model_key.erase("bp");  // ablation3 trains on the raw graph, no BP stage
        model_key["targets"] = "labels";
    } else {
        model_key["targets"] = "posteriors";
    }
    model_key["train"] = {{"learning_rate", cfg.train.learning_rate},
                          {"max_epochs", cfg.train.max_epochs},
                          {"patience", cfg.train.patience},
                          {"hidden_dim", cfg.train.hidden_dim},
                          {"layers", cfg.train.layers}};
    keys.model = hex64(fnv1a(model_key.dump()));
    return keys;
}

Graph build_dataset(const ExperimentConfig& cfg, uint64_t seed) {
    if (cfg.dataset.sbm) {
        const SbmParams& p = *cfg.dataset.sbm;
        uint64_t graph_seed = p.seed ? *p.seed : rng::mix(seed, rng::Stream::graph);
        return generate_sbm(p.n, p.class_count, p.p_in, p.p_out, p.feature_dim, graph_seed);
    }
    const FileDataset& f = *cfg.dataset.files;
    return load_graph(f.edge_path, f.label_path, f.feature_path, f.class_count);
}

bool labeled_features_available(const Graph& graph, const Split& split) {
    for (int node : split.labeled) {
        if (!graph.features.count(node)) return false;
    }
    return !split.labeled.empty();
}

json bp_to_json(const BpResult& bp) {
    json j;
    j["iterations"] = bp.iterations_run;
    j["converged"] = bp.converged;
    j["numeric_resets"] = bp.numeric_resets;
    j["amplitude_trace"] = bp.amplitude_trace;
    json post = json::array();
    for (const auto& p : bp.posteriors) post.push_back(p.values());
    j["posteriors"] = std::move(post);
    return j;
}

BpResult bp_from_json(const json& j) {
    BpResult bp;
    bp.iterations_run = j.at("iterations").get<int>();
    bp.converged = j.at("converged").get<bool>();
    bp.numeric_resets = j.at("numeric_resets").get<int>();
    bp.amplitude_trace = j.at("amplitude_trace").get<std::vector<double>>();
    for (const auto& row : j.at("posteriors")) {
        bp.posteriors.push_back(ProbVector(row.get<std::vector<double>>()));
    }
    return bp;
}

SeedContext prepare_seed(const ExperimentConfig& cfg, uint64_t seed, const fs::path& cache_dir,
                         StageTimer& timer, int& cache_hits) {
    SeedContext ctx;
    StageKeys keys = stage_keys(cfg, seed);

    ctx.graph = timer.time("dataset", [&] { return build_dataset(cfg, seed); });
    ctx.split = timer.time("split", [&] {
        return make_split(ctx.graph, cfg.ratio, cfg.target_cap, rng::mix(seed, rng::Stream::split));
    });

    fs::path prior_path = cache_dir / ("priors-" + keys.priors + ".txt");
    ctx.priors = timer.time("priors", [&] {
        if (fs::exists(prior_path)) {
            ++cache_hits;
            return read_prior_field(prior_path.string());
        }
        PriorOptions opts;
        opts.blend = cfg.prior.blend;
        opts.onehot_smoothing = cfg.prior.onehot_smoothing;
        opts.unlabeled_init = cfg.prior.unlabeled_init;
        opts.gaussian_seed = rng::mix(seed, rng::Stream::prior);
        PriorField field;
        if (labeled_features_available(ctx.graph, ctx.split)) {
            PriorEstimator est =
                fit_prior_estimator(ctx.graph, ctx.split, cfg.prior.l2, cfg.prior.max_iters,
                                    rng::mix(seed, rng::Stream::prior), cfg.prior.mode);
            field = init_priors(ctx.graph, ctx.split, &est, opts);
        } else {
            field = init_priors(ctx.graph, ctx.split, nullptr, opts);
        }
        fs::path tmp = prior_path;
        tmp += ".tmp";
        write_prior_field(field, tmp.string());
        fs::rename(tmp, prior_path);
        return field;
    });

    if (cfg.mode != RunMode::ablation3) {
        fs::path bp_path = cache_dir / ("bp-" + keys.bp + ".json");
        ctx.bp = timer.time("bp", [&] {
            if (fs::exists(bp_path)) {
                ++cache_hits;
                std::ifstream in(bp_path);
                json j;
                in >> j;
                return bp_from_json(j);
            }
            BpResult bp = run_bp(ctx.graph, ctx.priors, cfg.bp);
            atomic_write(bp_path, bp_to_json(bp).dump());
            return bp;
        });
    }

    const bool needs_model = cfg.mode != RunMode::ablation1;
    if (needs_model) {
        fs::path model_path = cache_dir / ("model-" + keys.model + ".ckpt");
        fs::path trace_path = cache_dir / ("train-" + keys.model + ".json");
        timer.time("train", [&] {
            if (fs::exists(model_path) && fs::exists(trace_path)) {
                ++cache_hits;
                ctx.model = load_model(model_path.string());
                std::ifstream in(trace_path);
                json j;
                in >> j;
                ctx.loss_trace = j.at("loss_trace").get<std::vector<double>>();
                ctx.train_epochs = j.at("epochs").get<int>();
                return;
            }
            TrainConfig tc = cfg.train;
            tc.seed = rng::mix(seed, rng::Stream::train);
            GnnModel model = init_model(ctx.graph.class_count, tc);
            EdgeWeightedView view = EdgeWeightedView::full(ctx.graph);

            std::vector<ProbVector> targets;
            std::vector<int> nodes;
            if (cfg.mode == RunMode::ablation3) {
                // raw-graph supervision: one-hot labels of the labeled split
                targets.assign(static_cast<size_t>(ctx.graph.node_count),
                               ProbVector::uniform(ctx.graph.class_count));
                for (int node : ctx.split.labeled) {
                    targets[static_cast<size_t>(node)] =
                        ProbVector::one_hot(ctx.graph.class_count, ctx.graph.labels.at(node));
                    nodes.push_back(node);
                }
            } else {
                targets = ctx.bp.posteriors;
                nodes.resize(static_cast<size_t>(ctx.graph.node_count));
                for (int i = 0; i < ctx.graph.node_count; ++i) nodes[static_cast<size_t>(i)] = i;
            }
            TrainResult tr = train(std::move(model), view, ctx.priors, targets, nodes, tc);
            ctx.model = std::move(tr.model);
            ctx.loss_trace = std::move(tr.loss_trace);
            ctx.train_epochs = tr.epochs;

            fs::path tmp = model_path;
            tmp += ".tmp";
            save_model(ctx.model, tmp.string());
            fs::rename(tmp, model_path);
            json j;
            j["loss_trace"] = ctx.loss_trace;
            j["epochs"] = ctx.train_epochs;
            atomic_write(trace_path, j.dump());
        });
    }
    return ctx;
}

SeedReport run_seed(const ExperimentConfig& cfg, uint64_t seed, const fs::path& out_root) {
    SeedReport report;
    report.seed = seed;
    StageTimer timer(report.timings);
    auto seed_start = std::chrono::steady_clock::now();

    fs::path run_dir = out_root / "runs" / cfg.hash() / std::to_string(seed);
    fs::path cache_dir = out_root / "cache";
    fs::create_directories(run_dir);
    fs::create_directories(cache_dir);

    try {
        SeedContext ctx = prepare_seed(cfg, seed, cache_dir, timer, report.cache_hits);
        const Graph& graph = ctx.graph;
        const Split& split = ctx.split;

        report.labeled_count = static_cast<int>(split.labeled.size());
        report.target_count = static_cast<int>(split.target.size());
        report.avg_degree = graph.average_degree();
        if (cfg.mode != RunMode::ablation3) {
            report.bp_iterations = ctx.bp.iterations_run;
            report.bp_converged = ctx.bp.converged;
            report.bp_numeric_resets = ctx.bp.numeric_resets;
        }
        report.train_epochs = ctx.train_epochs;

        write_prior_field(ctx.priors, (run_dir / "priors.txt").string());
        if (cfg.mode != RunMode::ablation3) {
            PriorField post;
            post.class_count = graph.class_count;
            post.priors = ctx.bp.posteriors;
            write_prior_field(post, (run_dir / "posteriors.txt").string());
            write_amplitude_trace(ctx.bp.amplitude_trace, (run_dir / "bp_trace.csv").string());
        }
        if (cfg.mode != RunMode::ablation1) {
            save_model(ctx.model, (run_dir / "model.ckpt").string());
            write_loss_trace(ctx.loss_trace, (run_dir / "loss_trace.csv").string());
        }

        std::vector<Prediction> predictions;
        std::vector<ExplanatorySubgraph> subgraphs;
        std::vector<double> faith_values;

        if (cfg.mode == RunMode::ablation1) {
            timer.time("predict", [&] {
                for (int t : split.target) {
                    predictions.push_back(
                        make_prediction(t, ctx.bp.posteriors[static_cast<size_t>(t)]));
                }
            });
        } else if (cfg.mode == RunMode::ablation2 || cfg.mode == RunMode::ablation3) {
            timer.time("predict", [&] {
                EdgeWeightedView view = EdgeWeightedView::full(graph);
                std::vector<Prediction> all = forward(ctx.model, view, ctx.priors);
                for (int t : split.target) {
                    predictions.push_back(all[static_cast<size_t>(t)]);
                }
            });
        } else {
            // full / random_walk_baseline: per-target subgraph prediction
            EdgeWeightedView view = EdgeWeightedView::full(graph);
            SaliencyEngine engine(ctx.model, view, ctx.priors);
            timer.time("explain", [&] {
                for (int t : split.target) {
                    if (cfg.mode == RunMode::full) {
                        SaliencyMap map =
                            engine.saliency(t, ctx.bp.posteriors[static_cast<size_t>(t)],
                                            cfg.explainer.method, cfg.explainer.ig_steps);
                        subgraphs.push_back(extract_subgraph(graph, map, cfg.explainer.n_nodes));
                    } else {
                        uint64_t walk_seed = rng::mix(rng::mix(seed, rng::Stream::walk),
                                                      static_cast<uint64_t>(t));
                        subgraphs.push_back(
                            random_walk_subgraph(graph, t, cfg.explainer.n_nodes, walk_seed));
                    }
                }
            });
            timer.time("predict", [&] {
                for (const auto& sub : subgraphs) {
                    Prediction pred = predict_on_subgraph(graph, sub, ctx.priors, cfg.bp);
                    faith_values.push_back(
                        faithfulness(ctx.bp.posteriors[static_cast<size_t>(sub.target)],
                                     pred.distribution, cfg.explainer.faithfulness_mode,
                                     cfg.explainer.faithfulness_smoothing));
                    predictions.push_back(std::move(pred));
                }
            });
            write_subgraph_dump(graph, subgraphs, (run_dir / "subgraphs.txt").string());
        }

        report.accuracy = evaluate_accuracy(predictions, graph.labels);
        if (!faith_values.empty()) {
            double sum = 0.0;
            for (double f : faith_values) sum += f;
            report.mean_faithfulness = sum / static_cast<double>(faith_values.size());
        }
        if (!subgraphs.empty()) {
            report.coverage = label_coverage(subgraphs, split);
        }

        // per-target metrics
        {
            std::ofstream metrics(run_dir / "metrics.csv");
            metrics << "target,prediction,truth,faithfulness,coverage_flag,subgraph_size\n";
            for (size_t idx = 0; idx < predictions.size(); ++idx) {
                const Prediction& p = predictions[idx];
                metrics << p.node << ',' << p.label << ',' << graph.labels.at(p.node) << ',';
                if (idx < faith_values.size()) metrics << format_double(faith_values[idx]);
                metrics << ',';
                if (idx < subgraphs.size()) {
                    bool flag = false;
                    for (int v : subgraphs[idx].nodes) flag = flag || split.contains_labeled(v);
                    metrics << (flag ? 1 : 0) << ',' << subgraphs[idx].nodes.size();
                } else {
                    metrics << ',';
                }
                metrics << '\n';
            }
        }
    } catch (const std::exception& e) {
        report.failed = true;
        report.error = e.what();
    }

    report.timings["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - seed_start).count();
    json seed_json = report.body();
    seed_json["timings"] = report.timings;
    seed_json["cache_hits"] = report.cache_hits;
    atomic_write(run_dir / "report.json", seed_json.dump(2));
    return report;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    RunReport report;
    report.config_hash = config.hash();
    report.config_echo = config.to_json();
    report.mode = config.mode;

    fs::path out_root(out_dir);
    fs::create_directories(out_root);

    const int jobs = std::max(1, config.jobs);
    report.seeds.resize(config.seeds.size());
    if (jobs == 1) {
        for (size_t i = 0; i < config.seeds.size(); ++i) {
            report.seeds[i] = run_seed(config, config.seeds[i], out_root);
        }
    } else {
        for (size_t base = 0; base < config.seeds.size(); base += static_cast<size_t>(jobs)) {
            std::vector<std::future<SeedReport>> wave;
            for (size_t i = base; i < std::min(config.seeds.size(), base + static_cast<size_t>(jobs)); ++i) {
                wave.push_back(std::async(std::launch::async, [&config, &out_root, i] {
                    return run_seed(config, config.seeds[i], out_root);
                }));
            }
            for (size_t i = 0; i < wave.size(); ++i) {
                report.seeds[base + i] = wave[i].get();
            }
        }
    }

    std::vector<double> acc, faith, cover;
    for (const auto& s : report.seeds) {
        if (s.failed) {
            report.partial = true;
            continue;
        }
        acc.push_back(s.accuracy);
        if (s.mean_faithfulness) faith.push_back(*s.mean_faithfulness);
        if (s.coverage) cover.push_back(*s.coverage);
    }
    Aggregate a = aggregate(acc);
    report.accuracy_mean = a.mean;
    report.accuracy_std = a.stddev;
    if (!faith.empty()) {
        Aggregate f = aggregate(faith);
        report.faithfulness_mean = f.mean;
        report.faithfulness_std = f.stddev;
    }
    if (!cover.empty()) {
        Aggregate c = aggregate(cover);
        report.coverage_mean = c.mean;
        report.coverage_std = c.stddev;
    }

    atomic_write(out_root / "runs" / report.config_hash / "report.json",
                 report.to_json(true).dump(2));
    return report;
}

RunReport run_baed(const ExperimentConfig& config, const std::string& out_dir) {
    if (config.mode != RunMode::full) {
        throw ValidationError("run_baed: mode must be 'full'");
    }
    return run_experiment(config, out_dir);
}

RunReport run_ablation(const ExperimentConfig& config, const std::string& out_dir) {
    if (config.mode != RunMode::ablation1 && config.mode != RunMode::ablation2 &&
        config.mode != RunMode::ablation3) {
        throw ValidationError("run_ablation: mode must be one of ablation1/2/3");
    }
    return run_experiment(config, out_dir);
}

SweepResult sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values,
                  const std::string& out_dir) {
    if (values.empty()) {
        throw ValidationError("sweep: values must be non-empty");
    }
    SweepResult result;
    fs::path out_root(out_dir);
    fs::create_directories(out_root);
    std::ostringstream csv;
    csv << "axis_value,seed,accuracy,faithfulness,coverage\n";

    for (double value : values) {
        ExperimentConfig point = config;
        bool valid = true;
        switch (axis) {
            case SweepAxis::ratio:
                if (value > 0.0 && value < 1.0) {
                    point.ratio = value;
                } else {
                    valid = false;
                }
                break;
            case SweepAxis::n_nodes:
                if (value >= 1.0 && value == std::floor(value)) {
                    point.explainer.n_nodes = static_cast<int>(value);
                } else {
                    valid = false;
                }
                break;
            case SweepAxis::epsilon:
                if (value > 0.0 && value <= 1.0) {
                    point.bp.epsilon = value;
                } else {
                    valid = false;
                }
                break;
        }
        if (!valid) {
            result.warnings.push_back("skipped invalid " + to_string(axis) + " value " +
                                      format_double(value));
            continue;
        }
        RunReport report = run_experiment(point, out_dir);
        for (const auto& s : report.seeds) {
            if (s.failed) continue;
            csv << format_double(value) << ',' << s.seed << ',' << format_double(s.accuracy) << ',';
            if (s.mean_faithfulness) csv << format_double(*s.mean_faithfulness);
            csv << ',';
            if (s.coverage) csv << format_double(*s.coverage);
            csv << '\n';
        }
        result.reports.push_back(std::move(report));
    }
    atomic_write(out_root / "sweep.csv", csv.str());
    return result;
}

double evaluate_accuracy(const std::vector<Prediction>& predictions,
                         const std::map<int, int>& truth) {
    if (predictions.empty()) {
        throw ValidationError("evaluate_accuracy: no predictions");
    }
    int correct = 0;
    for (const auto& p : predictions) {
        auto it = truth.find(p.node);
        if (it == truth.end()) {
            throw ValidationError("evaluate_accuracy: no ground truth for node " +
                                  std::to_string(p.node));
        }
        if (it->second == p.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace baed
