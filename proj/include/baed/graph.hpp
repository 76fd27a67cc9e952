#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "baed/prob.hpp"

namespace baed {

// Immutable undirected graph. In the feature-agnostic setting only labeled
// nodes carry feature vectors; unlabeled nodes contribute structure only.
struct Graph {
    int node_count = 0;
    int class_count = 0;
    std::vector<std::pair<int, int>> edges;        // u < v, lexicographically sorted
    std::vector<std::vector<int>> adjacency;       // sorted neighbor lists
    std::vector<std::vector<int>> adj_edge_ids;    // edge id per adjacency slot
    std::map<int, int> labels;                     // node -> class
    std::map<int, std::vector<double>> features;   // node -> feature vector

    int edge_count() const { return static_cast<int>(edges.size()); }
    int degree(int v) const { return static_cast<int>(adjacency[static_cast<size_t>(v)].size()); }
    double average_degree() const;
    // -1 when (u,v) is not an edge
    int edge_id(int u, int v) const;

    // Checks every structural invariant; throws ValidationError.
    void validate() const;
};

// Builds adjacency from an edge list; sorts and checks invariants.
Graph make_graph(int node_count, int class_count, std::vector<std::pair<int, int>> edges,
                 std::map<int, int> labels, std::map<int, std::vector<double>> features = {});

struct LoadStats {
    int dropped_self_loops = 0;
    int dropped_duplicate_edges = 0;
    std::vector<int> id_map;  // dense id -> original id
};

// Text loaders: edge file is "src dst" per line, label file "node class",
// feature file "node f1 ... fd". '#' starts a comment line. Node ids are
// densified to 0..n-1; the id map lands in stats.
Graph load_graph(const std::string& edge_path, const std::string& label_path,
                 const std::string& feature_path, int class_count, LoadStats* stats = nullptr);

// Emits the same formats bit-exactly (nodes ascending, edges with src < dst).
void write_graph(const Graph& graph, const std::string& edge_path, const std::string& label_path,
                 const std::string& feature_path);

// Planted-partition graph with balanced classes (class = node id mod class_count)
// and Gaussian features centered on a per-class mean (3 sigma separation).
// feature_dim = 0 skips features. Deterministic given seed.
Graph generate_sbm(int n, int class_count, double p_in, double p_out, int feature_dim,
                   uint64_t seed);

// Few-shot split: V_labeled / V_target, disjoint.
struct Split {
    std::vector<int> labeled;  // sorted
    std::vector<int> target;   // sorted
    double ratio = 0.0;
    bool stratified = true;  // false when ratio*n < class_count forced the fallback

    bool contains_labeled(int v) const;
    bool contains_target(int v) const;
};

// Samples round(ratio*n) labeled nodes stratified by class where possible and
// min(target_cap, remaining) target nodes uniformly. Deterministic given seed.
Split make_split(const Graph& graph, double ratio, int target_cap, uint64_t seed);

}  // namespace baed
