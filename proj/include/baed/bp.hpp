#pragma once

#include <string>
#include <vector>

#include "baed/graph.hpp"
#include "baed/priors.hpp"
#include "baed/prob.hpp"

namespace baed {

struct ExplanatorySubgraph;  // explain.hpp

// Pairwise potential: epsilon on the diagonal, (1-epsilon)/(|C|-1) off it.
// Every row sums to 1.
struct CompatibilityMatrix {
    double epsilon = 0.0;
    int class_count = 0;
    double off_diagonal = 0.0;

    double entry(int ci, int cj) const { return ci == cj ? epsilon : off_diagonal; }
};

CompatibilityMatrix build_compatibility(double epsilon, int class_count);

enum class Schedule { flooding };

struct BpConfig {
    double eta = 1e-3;       // stopping threshold on mean Manhattan amplitude
    int max_iters = 20;
    double epsilon = 0.9;    // same-class potential
    double damping = 0.0;    // 0 = plain flooding
    Schedule schedule = Schedule::flooding;
};

// One message per directed edge (2|R| total). Directed edge ids: undirected
// edge e=(u,v) with u<v owns 2e (u->v) and 2e+1 (v->u).
class MessageStore {
public:
    MessageStore(const Graph& graph);

    int iteration() const { return iteration_; }
    int numeric_resets() const { return numeric_resets_; }
    int directed_count() const { return directed_count_; }
    ProbVector message(const Graph& graph, int from, int to) const;

    // flat storage, values[dir_edge * class_count + c]
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    int class_count() const { return class_count_; }

    void bump_iteration() { ++iteration_; }
    void record_reset() { ++numeric_resets_; }

private:
    int class_count_ = 0;
    int directed_count_ = 0;
    int iteration_ = 0;
    int numeric_resets_ = 0;
    std::vector<double> values_;
};

struct BpResult {
    std::vector<ProbVector> posteriors;  // indexed by node id
    int iterations_run = 0;
    bool converged = false;
    std::vector<double> amplitude_trace;  // one entry per iteration
    int numeric_resets = 0;
};

// Synchronous flooding update of all 2|R| messages from iteration-t values.
// Returns the mean Manhattan amplitude over directed messages.
double update_messages(const Graph& graph, const PriorField& priors,
                       const CompatibilityMatrix& compat, MessageStore& store,
                       double damping = 0.0);

// Iterates updates until amplitude < eta or max_iters, then computes
// posteriors b_i ∝ φ_i * prod of incoming messages.
BpResult run_bp(const Graph& graph, const PriorField& priors, const BpConfig& config);

// Runs BP restricted to the subgraph's induced edges and returns the target's
// posterior distribution with its argmax class.
Prediction predict_on_subgraph(const Graph& base, const ExplanatorySubgraph& subgraph,
                               const PriorField& priors, const BpConfig& config);

// "iteration,amplitude" CSV
void write_amplitude_trace(const std::vector<double>& trace, const std::string& path);

}  // namespace baed
