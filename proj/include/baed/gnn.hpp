#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "baed/graph.hpp"
#include "baed/priors.hpp"
#include "baed/prob.hpp"

namespace baed {

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

// Continuous relaxation of the adjacency: one weight in [0,1] per observed
// edge, fixed self-weight 1 per node. Weight 0 is edge absence under the
// weighted mean.
struct EdgeWeightedView {
    const Graph* base = nullptr;
    std::vector<double> edge_weights;  // per base edge id

    static EdgeWeightedView full(const Graph& graph);  // all observed weights 1
    EdgeWeightedView scaled(double s) const;
};

// SAGE-style network over prior vectors: h^0 = prior, then K mean-aggregation
// layers, then a one-hidden-layer MLP head with softmax. Input and output
// width both equal the class count, so the parameter count is independent of
// the raw feature dimension.
struct GnnModel {
    int class_count = 0;
    int hidden_dim = 0;
    int layers = 0;                     // K
    std::vector<Matrix> sage_weights;   // W^k: dim(k) x dim(k-1), no bias
    Matrix mlp_w1;                      // hidden x dim(K)
    std::vector<double> mlp_b1;
    Matrix mlp_w2;                      // class_count x hidden
    std::vector<double> mlp_b2;
    bool linear_activations = false;    // test hook: identity instead of ReLU

    int dim(int k) const { return k == 0 ? class_count : hidden_dim; }
    int64_t parameter_count() const;
};

struct TrainConfig {
    double learning_rate = 0.1;
    int max_epochs = 2000;
    int patience = 1000;  // epochs without a new best loss before stopping
    int hidden_dim = 32;
    int layers = 2;
    uint64_t seed = 0;
};

// Glorot-uniform weights in [-s, s], s = sqrt(6/(fan_in+fan_out)); zero biases.
GnnModel init_model(int class_count, const TrainConfig& config);

// Per-layer activations kept for backprop; one forward pass covers every node.
struct ForwardCache {
    std::vector<double> inv_denom;        // 1 / (1 + sum_j a_ij), per node
    std::vector<Matrix> wmean;            // layer k: n x dim(k-1)
    std::vector<Matrix> pre;              // layer k: n x dim(k)
    std::vector<Matrix> h;                // h[0] = priors, h[k] post-activation
    Matrix z1pre, z1;                     // MLP hidden
    Matrix logits, probs;                 // n x class_count
};

ForwardCache forward_cached(const GnnModel& model, const EdgeWeightedView& view,
                            const PriorField& priors);
std::vector<Prediction> forward(const GnnModel& model, const EdgeWeightedView& view,
                                const PriorField& priors);

// Mean over `nodes` of -sum_c target(c) * log(max(pred(c), 1e-12)); targets are
// soft distributions.
double loss(const std::vector<Prediction>& predictions, const std::vector<ProbVector>& targets,
            const std::vector<int>& nodes);

struct GnnGradients {
    std::vector<Matrix> sage_weights;
    Matrix mlp_w1;
    std::vector<double> mlp_b1;
    Matrix mlp_w2;
    std::vector<double> mlp_b2;
};

// Mean-loss gradients over `nodes` for every trainable parameter.
GnnGradients parameter_gradients(const GnnModel& model, const EdgeWeightedView& view,
                                 const ForwardCache& cache, const std::vector<ProbVector>& targets,
                                 const std::vector<int>& nodes);

struct TrainResult {
    GnnModel model;
    std::vector<double> loss_trace;  // loss at the start of each epoch
    int epochs = 0;
};

// Full-batch gradient descent on the cross-entropy to `targets` over `nodes`,
// early-stopped after `patience` epochs without improvement.
TrainResult train(GnnModel model, const EdgeWeightedView& view, const PriorField& priors,
                  const std::vector<ProbVector>& targets, const std::vector<int>& nodes,
                  const TrainConfig& config);

// Signed gradient of the single-target cross-entropy (against the target's BP
// posterior) with respect to every edge weight, evaluated at the view's
// weights. Edges beyond the K-hop receptive field come back exactly 0.
std::vector<double> edge_gradients(const GnnModel& model, const EdgeWeightedView& view,
                                   const PriorField& priors, int target,
                                   const ProbVector& target_posterior);

// Same, reusing a forward cache shared across targets.
std::vector<double> edge_gradients_cached(const GnnModel& model, const EdgeWeightedView& view,
                                          const ForwardCache& cache, int target,
                                          const ProbVector& target_posterior);

// Versioned text checkpoint (dims header + matrices); round-trips bit-exactly.
void save_model(const GnnModel& model, const std::string& path);
GnnModel load_model(const std::string& path);

// "epoch,loss" CSV
void write_loss_trace(const std::vector<double>& trace, const std::string& path);

}  // namespace baed
