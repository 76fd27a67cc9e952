#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "baed/graph.hpp"
#include "baed/prob.hpp"

namespace baed {

// One prior per node, defined for every node before BP starts.
struct PriorField {
    int class_count = 0;
    std::vector<ProbVector> priors;  // indexed by node id

    int node_count() const { return static_cast<int>(priors.size()); }
};

enum class PriorMode {
    logistic,  // multinomial logistic regression, probabilities are native
    hinge,     // multiclass hinge margins pushed through a softmax
};

// Linear multiclass classifier fitted on the labeled nodes only.
struct PriorEstimator {
    int class_count = 0;
    int feature_dim = 0;
    std::vector<std::vector<double>> weights;  // class_count x feature_dim
    std::vector<double> bias;                  // class_count
    double l2 = 0.0;
    PriorMode mode = PriorMode::logistic;
    bool trained = false;
    int iterations = 0;
    std::vector<int> absent_classes;  // classes with no labeled example

    // softmax(W x + b); valid ProbVector for any finite input
    ProbVector predict(const std::vector<double>& x) const;
};

// Full-batch gradient descent, fixed step from a curvature bound, stops at
// gradient norm <= 1e-8 or max_iters. Deterministic.
PriorEstimator fit_prior_estimator(const Graph& graph, const Split& split, double l2,
                                   int max_iters, uint64_t seed,
                                   PriorMode mode = PriorMode::logistic);

enum class UnlabeledInit {
    uniform,   // 1/|C| everywhere
    gaussian,  // |N(0,1)| draws renormalized, seeded
};

struct PriorOptions {
    double blend = 0.0;               // lambda*onehot + (1-lambda)*estimate on labeled nodes
    double onehot_smoothing = 0.01;   // feature-free fallback smoothing
    UnlabeledInit unlabeled_init = UnlabeledInit::uniform;
    uint64_t gaussian_seed = 0;
};

// Labeled nodes get estimator probabilities (optionally blended toward the
// one-hot label); unlabeled nodes get the uniform vector. Passing a null
// estimator selects the feature-free fallback (smoothed one-hot labels).
PriorField init_priors(const Graph& graph, const Split& split, const PriorEstimator* estimator,
                       const PriorOptions& options = {});

// "node_id p0 p1 ... p|C|-1" lines; round-trips doubles exactly.
void write_prior_field(const PriorField& field, const std::string& path);
PriorField read_prior_field(const std::string& path);

}  // namespace baed
