#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "baed/gnn.hpp"
#include "baed/graph.hpp"
#include "baed/prob.hpp"

namespace baed {

enum class SaliencyMethod { sm, ig };

// Per-edge importance of the target's prediction. Scores are nonnegative;
// edges beyond the GNN receptive field of the target score 0.
struct SaliencyMap {
    int target = -1;
    SaliencyMethod method = SaliencyMethod::sm;
    std::vector<double> scores;  // per base edge id
};

// sm: |d loss / d a_e| at the observed weights.
// ig: |a_e * mean over s=1..ig_steps of the gradient at (s/ig_steps)*a|
//     (straight-line path from the all-zero baseline, right Riemann sum).
SaliencyMap build_saliency(const GnnModel& model, const EdgeWeightedView& view,
                           const PriorField& priors, int target, const ProbVector& posterior,
                           SaliencyMethod method, int ig_steps = 32);

// Signed path-integrated attributions (before the |.|); exposed so the
// completeness identity sum(attr) = loss(a) - loss(0) can be checked.
std::vector<double> integrated_gradients_signed(const GnnModel& model,
                                                const EdgeWeightedView& view,
                                                const PriorField& priors, int target,
                                                const ProbVector& posterior, int ig_steps);

struct SelectedEdge {
    int edge_id = -1;
    int rank = 0;  // 1-based selection order
    double score = 0.0;
};

// Connected subgraph grown greedily around the target along the
// highest-saliency frontier edges.
struct ExplanatorySubgraph {
    int target = -1;
    std::vector<int> nodes;                   // selection order, nodes[0] = target
    std::vector<SelectedEdge> selected_edges;
    std::vector<int> induced_edges;           // every base edge inside `nodes`

    bool contains(int v) const;
};

// Greedy frontier growth: repeatedly add the outside endpoint of the
// highest-score frontier edge; stop at n_nodes or when no positive-score
// frontier edge remains. Ties: higher score, then smaller outside node id,
// then smaller edge id.
ExplanatorySubgraph extract_subgraph(const Graph& graph, const SaliencyMap& saliency, int n_nodes);

enum class FaithfulnessMode { one_sided, symmetric };

// KL divergence between the whole-graph and subgraph prediction distributions
// after both are mixed with uniform by `smoothing` and renormalized. Lower is
// more faithful; 0 iff the inputs coincide after smoothing.
double faithfulness(const ProbVector& dist_full, const ProbVector& dist_sub,
                    FaithfulnessMode mode = FaithfulnessMode::symmetric, double smoothing = 1e-6);

// Fraction of subgraphs whose node set intersects split.labeled.
double label_coverage(const std::vector<ExplanatorySubgraph>& subgraphs, const Split& split);

// Uniform random walk from the target collecting distinct nodes until n_nodes
// are found or a step budget of 50*n_nodes expires. Deterministic given seed.
ExplanatorySubgraph random_walk_subgraph(const Graph& graph, int target, int n_nodes,
                                         uint64_t seed);

// Caches one forward pass per path scale so per-target saliency across an
// evaluation set reuses them.
class SaliencyEngine {
public:
    SaliencyEngine(const GnnModel& model, const EdgeWeightedView& view, const PriorField& priors);

    SaliencyMap saliency(int target, const ProbVector& posterior, SaliencyMethod method,
                         int ig_steps);
    std::vector<double> ig_signed(int target, const ProbVector& posterior, int ig_steps);

private:
    struct ScaleEntry {
        double scale;
        EdgeWeightedView view;
        ForwardCache cache;
    };
    const ScaleEntry& entry_at(double scale);

    const GnnModel& model_;
    const EdgeWeightedView& view_;
    const PriorField& priors_;
    std::vector<ScaleEntry> entries_;
};

// Text dump, one block per subgraph: target line, nodes in selection order,
// then "edge rank score" lines.
void write_subgraph_dump(const Graph& graph, const std::vector<ExplanatorySubgraph>& subgraphs,
                         const std::string& path);

}  // namespace baed
