#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "baed/bp.hpp"
#include "baed/explain.hpp"
#include "baed/gnn.hpp"
#include "baed/graph.hpp"
#include "baed/pipeline.hpp"
#include "baed/priors.hpp"
#include "baed/prob.hpp"

namespace py = pybind11;
using namespace baed;

PYBIND11_MODULE(_baed, m) {
    m.doc() = "Belief-propagation label augmentation, auxiliary GNN training, and "
              "explanatory-subgraph prediction for few-shot node classification.";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    py::class_<ProbVector>(m, "ProbVector")
        .def(py::init<std::vector<double>>())
        .def_static("uniform", &ProbVector::uniform)
        .def_static("one_hot", &ProbVector::one_hot, py::arg("class_count"), py::arg("cls"),
                    py::arg("smoothing") = 0.0)
        .def_static("from_unnormalized", &ProbVector::from_unnormalized)
        .def("argmax", &ProbVector::argmax)
        .def("__len__", &ProbVector::size)
        .def("__getitem__", [](const ProbVector& p, int c) {
            if (c < 0 || c >= p.size()) throw py::index_error();
            return p(c);
        })
        .def_property_readonly("values", &ProbVector::values)
        .def("__repr__", [](const ProbVector& p) {
            std::string s = "ProbVector([";
            for (int c = 0; c < p.size(); ++c) s += (c ? ", " : "") + std::to_string(p(c));
            return s + "])";
        });
    py::implicitly_convertible<std::vector<double>, ProbVector>();

    py::class_<Prediction>(m, "Prediction")
        .def_readonly("node", &Prediction::node)
        .def_readonly("distribution", &Prediction::distribution)
        .def_readonly("label", &Prediction::label);

    py::class_<Graph>(m, "Graph")
        .def_readonly("node_count", &Graph::node_count)
        .def_readonly("class_count", &Graph::class_count)
        .def_readonly("edges", &Graph::edges)
        .def_readonly("labels", &Graph::labels)
        .def_readonly("features", &Graph::features)
        .def_property_readonly("edge_count", &Graph::edge_count)
        .def("degree", &Graph::degree)
        .def("average_degree", &Graph::average_degree)
        .def("edge_id", &Graph::edge_id)
        .def("validate", &Graph::validate)
        .def("neighbors",
             [](const Graph& g, int v) { return g.adjacency.at(static_cast<size_t>(v)); });

    py::class_<LoadStats>(m, "LoadStats")
        .def_readonly("dropped_self_loops", &LoadStats::dropped_self_loops)
        .def_readonly("dropped_duplicate_edges", &LoadStats::dropped_duplicate_edges)
        .def_readonly("id_map", &LoadStats::id_map);

    py::class_<Split>(m, "Split")
        .def_readonly("labeled", &Split::labeled)
        .def_readonly("target", &Split::target)
        .def_readonly("ratio", &Split::ratio)
        .def_readonly("stratified", &Split::stratified);

    m.def("load_graph",
          [](const std::string& edges, const std::string& labels, const std::string& features,
             int class_count) {
              LoadStats stats;
              Graph g = load_graph(edges, labels, features, class_count, &stats);
              return py::make_tuple(std::move(g), std::move(stats));
          },
          py::arg("edge_path"), py::arg("label_path"), py::arg("feature_path") = std::string(),
          py::arg("class_count") = 2);
    m.def("write_graph", &write_graph, py::arg("graph"), py::arg("edge_path"),
          py::arg("label_path"), py::arg("feature_path") = std::string());
    m.def("generate_sbm", &generate_sbm, py::arg("n"), py::arg("class_count"), py::arg("p_in"),
          py::arg("p_out"), py::arg("feature_dim") = 16, py::arg("seed") = 0);
    m.def("make_split", &make_split, py::arg("graph"), py::arg("ratio"), py::arg("target_cap"),
          py::arg("seed"));

    py::enum_<PriorMode>(m, "PriorMode")
        .value("logistic", PriorMode::logistic)
        .value("hinge", PriorMode::hinge);
    py::enum_<UnlabeledInit>(m, "UnlabeledInit")
        .value("uniform", UnlabeledInit::uniform)
        .value("gaussian", UnlabeledInit::gaussian);

    py::class_<PriorField>(m, "PriorField")
        .def_readonly("class_count", &PriorField::class_count)
        .def_readonly("priors", &PriorField::priors)
        .def_property_readonly("node_count", &PriorField::node_count);

    py::class_<PriorEstimator>(m, "PriorEstimator")
        .def_readonly("class_count", &PriorEstimator::class_count)
        .def_readonly("feature_dim", &PriorEstimator::feature_dim)
        .def_readonly("trained", &PriorEstimator::trained)
        .def_readonly("iterations", &PriorEstimator::iterations)
        .def_readonly("absent_classes", &PriorEstimator::absent_classes)
        .def("predict", &PriorEstimator::predict);

    m.def("fit_prior_estimator", &fit_prior_estimator, py::arg("graph"), py::arg("split"),
          py::arg("l2") = 1e-3, py::arg("max_iters") = 5000, py::arg("seed") = 0,
          py::arg("mode") = PriorMode::logistic);
    m.def("init_priors",
          [](const Graph& graph, const Split& split, const PriorEstimator* estimator, double blend,
             UnlabeledInit unlabeled_init, uint64_t gaussian_seed, double onehot_smoothing) {
              PriorOptions opts;
              opts.blend = blend;
              opts.unlabeled_init = unlabeled_init;
              opts.gaussian_seed = gaussian_seed;
              opts.onehot_smoothing = onehot_smoothing;
              return init_priors(graph, split, estimator, opts);
          },
          py::arg("graph"), py::arg("split"), py::arg("estimator") = nullptr,
          py::arg("blend") = 0.0, py::arg("unlabeled_init") = UnlabeledInit::uniform,
          py::arg("gaussian_seed") = 0, py::arg("onehot_smoothing") = 0.01);
    m.def("write_prior_field", &write_prior_field);
    m.def("read_prior_field", &read_prior_field);

    py::class_<CompatibilityMatrix>(m, "CompatibilityMatrix")
        .def_readonly("epsilon", &CompatibilityMatrix::epsilon)
        .def_readonly("class_count", &CompatibilityMatrix::class_count)
        .def("entry", &CompatibilityMatrix::entry);
    m.def("build_compatibility", &build_compatibility, py::arg("epsilon"), py::arg("class_count"));

    py::class_<BpConfig>(m, "BpConfig")
        .def(py::init([](double eta, int max_iters, double epsilon, double damping) {
                 BpConfig c;
                 c.eta = eta;
                 c.max_iters = max_iters;
                 c.epsilon = epsilon;
                 c.damping = damping;
                 return c;
             }),
             py::arg("eta") = 1e-3, py::arg("max_iters") = 20, py::arg("epsilon") = 0.9,
             py::arg("damping") = 0.0)
        .def_readwrite("eta", &BpConfig::eta)
        .def_readwrite("max_iters", &BpConfig::max_iters)
        .def_readwrite("epsilon", &BpConfig::epsilon)
        .def_readwrite("damping", &BpConfig::damping);

    py::class_<BpResult>(m, "BpResult")
        .def_readonly("posteriors", &BpResult::posteriors)
        .def_readonly("iterations_run", &BpResult::iterations_run)
        .def_readonly("converged", &BpResult::converged)
        .def_readonly("amplitude_trace", &BpResult::amplitude_trace)
        .def_readonly("numeric_resets", &BpResult::numeric_resets);

    m.def("run_bp", &run_bp, py::arg("graph"), py::arg("priors"), py::arg("config") = BpConfig{});
    m.def("predict_on_subgraph", &predict_on_subgraph, py::arg("graph"), py::arg("subgraph"),
          py::arg("priors"), py::arg("config") = BpConfig{});

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](double lr, int max_epochs, int patience, int hidden_dim, int layers,
                         uint64_t seed) {
                 TrainConfig c;
                 c.learning_rate = lr;
                 c.max_epochs = max_epochs;
                 c.patience = patience;
                 c.hidden_dim = hidden_dim;
                 c.layers = layers;
                 c.seed = seed;
                 return c;
             }),
             py::arg("learning_rate") = 0.1, py::arg("max_epochs") = 2000,
             py::arg("patience") = 1000, py::arg("hidden_dim") = 32, py::arg("layers") = 2,
             py::arg("seed") = 0)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
        .def_readwrite("layers", &TrainConfig::layers)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<GnnModel>(m, "GnnModel")
        .def_readonly("class_count", &GnnModel::class_count)
        .def_readonly("hidden_dim", &GnnModel::hidden_dim)
        .def_readonly("layers", &GnnModel::layers)
        .def("parameter_count", &GnnModel::parameter_count);

    py::class_<EdgeWeightedView>(m, "EdgeWeightedView")
        .def_static("full", &EdgeWeightedView::full, py::keep_alive<0, 1>())
        .def("scaled", &EdgeWeightedView::scaled, py::keep_alive<0, 1>())
        .def_readwrite("edge_weights", &EdgeWeightedView::edge_weights);

    m.def("init_model", &init_model, py::arg("class_count"), py::arg("config"));
    m.def("gnn_forward", &forward, py::arg("model"), py::arg("view"), py::arg("priors"));
    m.def("gnn_loss", &loss, py::arg("predictions"), py::arg("targets"), py::arg("nodes"));
    m.def("gnn_train",
          [](const GnnModel& model, const EdgeWeightedView& view, const PriorField& priors,
             const std::vector<ProbVector>& targets, const std::vector<int>& nodes,
             const TrainConfig& config) {
              TrainResult r = train(model, view, priors, targets, nodes, config);
              return py::make_tuple(std::move(r.model), std::move(r.loss_trace), r.epochs);
          },
          py::arg("model"), py::arg("view"), py::arg("priors"), py::arg("targets"),
          py::arg("nodes"), py::arg("config"));
    m.def("edge_gradients", &edge_gradients, py::arg("model"), py::arg("view"), py::arg("priors"),
          py::arg("target"), py::arg("target_posterior"));
    m.def("save_model", &save_model);
    m.def("load_model", &load_model);

    py::enum_<SaliencyMethod>(m, "SaliencyMethod")
        .value("sm", SaliencyMethod::sm)
        .value("ig", SaliencyMethod::ig);
    py::enum_<FaithfulnessMode>(m, "FaithfulnessMode")
        .value("one_sided", FaithfulnessMode::one_sided)
        .value("symmetric", FaithfulnessMode::symmetric);

    py::class_<SaliencyMap>(m, "SaliencyMap")
        .def_readonly("target", &SaliencyMap::target)
        .def_readonly("method", &SaliencyMap::method)
        .def_readonly("scores", &SaliencyMap::scores);

    py::class_<SelectedEdge>(m, "SelectedEdge")
        .def_readonly("edge_id", &SelectedEdge::edge_id)
        .def_readonly("rank", &SelectedEdge::rank)
        .def_readonly("score", &SelectedEdge::score);

    py::class_<ExplanatorySubgraph>(m, "ExplanatorySubgraph")
        .def_readonly("target", &ExplanatorySubgraph::target)
        .def_readonly("nodes", &ExplanatorySubgraph::nodes)
        .def_readonly("selected_edges", &ExplanatorySubgraph::selected_edges)
        .def_readonly("induced_edges", &ExplanatorySubgraph::induced_edges)
        .def("contains", &ExplanatorySubgraph::contains);

    m.def("build_saliency", &build_saliency, py::arg("model"), py::arg("view"), py::arg("priors"),
          py::arg("target"), py::arg("posterior"), py::arg("method") = SaliencyMethod::ig,
          py::arg("ig_steps") = 32);
    m.def("integrated_gradients_signed", &integrated_gradients_signed, py::arg("model"),
          py::arg("view"), py::arg("priors"), py::arg("target"), py::arg("posterior"),
          py::arg("ig_steps") = 32);
    m.def("extract_subgraph", &extract_subgraph, py::arg("graph"), py::arg("saliency"),
          py::arg("n_nodes"));
    m.def("faithfulness", &faithfulness, py::arg("dist_full"), py::arg("dist_sub"),
          py::arg("mode") = FaithfulnessMode::symmetric, py::arg("smoothing") = 1e-6);
    m.def("label_coverage", &label_coverage, py::arg("subgraphs"), py::arg("split"));
    m.def("random_walk_subgraph", &random_walk_subgraph, py::arg("graph"), py::arg("target"),
          py::arg("n_nodes"), py::arg("seed"));

    m.def("evaluate_accuracy", &evaluate_accuracy, py::arg("predictions"), py::arg("truth"));

    // pipeline entry points exchange JSON strings to stay schema-stable
    m.def("run_experiment_json",
          [](const std::string& config_json, const std::string& out_dir) {
              ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
              RunReport report = run_experiment(cfg, out_dir);
              return report.to_json(true).dump();
          },
          py::arg("config_json"), py::arg("out_dir"));
    m.def("sweep_json",
          [](const std::string& config_json, const std::string& axis,
             const std::vector<double>& values, const std::string& out_dir) {
              ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
              SweepResult result = sweep(cfg, sweep_axis_from_string(axis), values, out_dir);
              nlohmann::json j;
              j["warnings"] = result.warnings;
              j["reports"] = nlohmann::json::array();
              for (const auto& r : result.reports) j["reports"].push_back(r.to_json(true));
              return j.dump();
          },
          py::arg("config_json"), py::arg("axis"), py::arg("values"), py::arg("out_dir"));
    m.def("strip_timings_json", [](const std::string& report_json) {
        return strip_timings(nlohmann::json::parse(report_json)).dump();
    });
    m.def("config_hash", [](const std::string& config_json) {
        return ExperimentConfig::from_json(nlohmann::json::parse(config_json)).hash();
    });
}
