// Test-only oracles and instance generators. Everything here stays
// independent of the implementation paths it checks: marginals come from
// exhaustive enumeration of the joint, gradients from central differences.
#pragma once

#include <cmath>
#include <vector>

#include "baed/graph.hpp"
#include "baed/priors.hpp"
#include "baed/rng.hpp"

namespace baed::testing {

// Exhaustive marginals of the pairwise joint: P(assignment) proportional to
// prod_i phi_i(c_i) * prod_(i,j) psi(c_i, c_j).
inline std::vector<std::vector<double>> brute_force_marginals(const Graph& graph,
                                                              const PriorField& priors,
                                                              double epsilon) {
    const int n = graph.node_count;
    const int C = graph.class_count;
    const double off = (1.0 - epsilon) / (C - 1);
    std::vector<std::vector<double>> marginals(static_cast<size_t>(n),
                                               std::vector<double>(static_cast<size_t>(C), 0.0));
    std::vector<int> assign(static_cast<size_t>(n), 0);
    double total = 0.0;

    // depth-first over assignments with an incremental weight product
    auto recurse = [&](auto&& self, int node, double weight) -> void {
        if (node == n) {
            total += weight;
            for (int i = 0; i < n; ++i) {
                marginals[static_cast<size_t>(i)][static_cast<size_t>(assign[static_cast<size_t>(i)])] += weight;
            }
            return;
        }
        for (int c = 0; c < C; ++c) {
            assign[static_cast<size_t>(node)] = c;
            double w = weight * priors.priors[static_cast<size_t>(node)](c);
            if (w == 0.0) continue;
            for (int j : graph.adjacency[static_cast<size_t>(node)]) {
                if (j < node) {
                    w *= (assign[static_cast<size_t>(j)] == c) ? epsilon : off;
                }
            }
            if (w == 0.0) continue;
            self(self, node + 1, w);
        }
    };
    recurse(recurse, 0, 1.0);

    for (auto& row : marginals) {
        for (double& v : row) v /= total;
    }
    return marginals;
}

// Uniformly random tree: node i attaches to a uniform earlier node.
inline Graph random_tree(int n, int class_count, rng::Engine& engine) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i < n; ++i) {
        edges.emplace_back(engine.next_int(i), i);
    }
    std::map<int, int> labels;
    for (int i = 0; i < n; ++i) labels[i] = i % class_count;
    return make_graph(n, class_count, std::move(edges), std::move(labels));
}

// Erdos-Renyi-ish random graph, possibly cyclic.
inline Graph random_graph(int n, int class_count, double p, rng::Engine& engine) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (engine.next_double() < p) edges.emplace_back(i, j);
        }
    }
    std::map<int, int> labels;
    for (int i = 0; i < n; ++i) labels[i] = i % class_count;
    return make_graph(n, class_count, std::move(edges), std::move(labels));
}

inline ProbVector random_simplex(int class_count, rng::Engine& engine) {
    std::vector<double> v(static_cast<size_t>(class_count));
    for (double& x : v) {
        double u = engine.next_double();
        while (u <= 0.0) u = engine.next_double();
        x = -std::log(u);
    }
    return ProbVector::from_unnormalized(v);
}

inline PriorField random_priors(const Graph& graph, rng::Engine& engine) {
    PriorField field;
    field.class_count = graph.class_count;
    for (int i = 0; i < graph.node_count; ++i) {
        field.priors.push_back(random_simplex(graph.class_count, engine));
    }
    return field;
}

inline PriorField uniform_priors(const Graph& graph) {
    PriorField field;
    field.class_count = graph.class_count;
    field.priors.assign(static_cast<size_t>(graph.node_count),
                        ProbVector::uniform(graph.class_count));
    return field;
}

// |a - b| <= max(abs_floor, rtol * max(|a|, |b|))
inline bool close_rel(double a, double b, double rtol = 1e-4, double abs_floor = 1e-8) {
    double diff = std::fabs(a - b);
    double scale = std::max(std::fabs(a), std::fabs(b));
    return diff <= std::max(abs_floor, rtol * scale);
}

}  // namespace baed::testing
