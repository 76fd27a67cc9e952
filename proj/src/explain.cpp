#include "baed/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "baed/rng.hpp"

namespace baed {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void finish_induced_edges(const Graph& graph, ExplanatorySubgraph& sub) {
    std::set<int> members(sub.nodes.begin(), sub.nodes.end());
    for (int v : sub.nodes) {
        const auto& nbrs = graph.adjacency[static_cast<size_t>(v)];
        const auto& eids = graph.adj_edge_ids[static_cast<size_t>(v)];
        for (size_t t = 0; t < nbrs.size(); ++t) {
            if (v < nbrs[t] && members.count(nbrs[t])) {
                sub.induced_edges.push_back(eids[t]);
            }
        }
    }
    std::sort(sub.induced_edges.begin(), sub.induced_edges.end());
}

}  // namespace

bool ExplanatorySubgraph::contains(int v) const {
    return std::find(nodes.begin(), nodes.end(), v) != nodes.end();
}

SaliencyEngine::SaliencyEngine(const GnnModel& model, const EdgeWeightedView& view,
                               const PriorField& priors)
    : model_(model), view_(view), priors_(priors) {}

const SaliencyEngine::ScaleEntry& SaliencyEngine::entry_at(double scale) {
    for (const auto& entry : entries_) {
        if (entry.scale == scale) return entry;
    }
    ScaleEntry entry;
    entry.scale = scale;
    entry.view = scale == 1.0 ? view_ : view_.scaled(scale);
    entry.cache = forward_cached(model_, entry.view, priors_);
    entries_.push_back(std::move(entry));
    return entries_.back();
}

std::vector<double> SaliencyEngine::ig_signed(int target, const ProbVector& posterior,
                                              int ig_steps) {
    if (ig_steps < 1) {
        throw ValidationError("ig requires ig_steps >= 1");
    }
    std::vector<double> mean_grad(view_.edge_weights.size(), 0.0);
    for (int s = 1; s <= ig_steps; ++s) {
        const ScaleEntry& entry = entry_at(static_cast<double>(s) / ig_steps);
        std::vector<double> g =
            edge_gradients_cached(model_, entry.view, entry.cache, target, posterior);
        for (size_t e = 0; e < g.size(); ++e) mean_grad[e] += g[e];
    }
    for (size_t e = 0; e < mean_grad.size(); ++e) {
        mean_grad[e] = view_.edge_weights[e] * mean_grad[e] / ig_steps;
    }
    return mean_grad;
}

SaliencyMap SaliencyEngine::saliency(int target, const ProbVector& posterior,
                                     SaliencyMethod method, int ig_steps) {
    SaliencyMap map;
    map.target = target;
    map.method = method;
    if (method == SaliencyMethod::sm) {
        const ScaleEntry& entry = entry_at(1.0);
        map.scores = edge_gradients_cached(model_, entry.view, entry.cache, target, posterior);
        for (double& s : map.scores) s = std::fabs(s);
    } else {
        map.scores = ig_signed(target, posterior, ig_steps);
        for (double& s : map.scores) s = std::fabs(s);
    }
    return map;
}

SaliencyMap build_saliency(const GnnModel& model, const EdgeWeightedView& view,
                           const PriorField& priors, int target, const ProbVector& posterior,
                           SaliencyMethod method, int ig_steps) {
    SaliencyEngine engine(model, view, priors);
    return engine.saliency(target, posterior, method, ig_steps);
}

std::vector<double> integrated_gradients_signed(const GnnModel& model,
                                                const EdgeWeightedView& view,
                                                const PriorField& priors, int target,
                                                const ProbVector& posterior, int ig_steps) {
    SaliencyEngine engine(model, view, priors);
    return engine.ig_signed(target, posterior, ig_steps);
}

ExplanatorySubgraph extract_subgraph(const Graph& graph, const SaliencyMap& saliency,
                                     int n_nodes) {
    if (n_nodes < 1) {
        throw ValidationError("extract_subgraph: n_nodes must be >= 1");
    }
    if (saliency.target < 0 || saliency.target >= graph.node_count) {
        throw ValidationError("extract_subgraph: target outside graph");
    }
    ExplanatorySubgraph sub;
    sub.target = saliency.target;
    sub.nodes.push_back(saliency.target);

    std::vector<char> in_set(static_cast<size_t>(graph.node_count), 0);
    in_set[static_cast<size_t>(saliency.target)] = 1;

    while (static_cast<int>(sub.nodes.size()) < n_nodes) {
        int best_edge = -1;
        int best_outside = -1;
        double best_score = 0.0;  // frontier edges must score strictly above 0
        for (int v : sub.nodes) {
            const auto& nbrs = graph.adjacency[static_cast<size_t>(v)];
            const auto& eids = graph.adj_edge_ids[static_cast<size_t>(v)];
            for (size_t t = 0; t < nbrs.size(); ++t) {
                int u = nbrs[t];
                if (in_set[static_cast<size_t>(u)]) continue;
                double score = saliency.scores[static_cast<size_t>(eids[t])];
                if (score <= 0.0) continue;
                bool better = score > best_score ||
                              (score == best_score &&
                               (u < best_outside || (u == best_outside && eids[t] < best_edge)));
                if (best_edge < 0 || better) {
                    best_edge = eids[t];
                    best_outside = u;
                    best_score = score;
                }
            }
        }
        if (best_edge < 0) break;
        in_set[static_cast<size_t>(best_outside)] = 1;
        sub.nodes.push_back(best_outside);
        sub.selected_edges.push_back(
            {best_edge, static_cast<int>(sub.selected_edges.size()) + 1, best_score});
    }
    finish_induced_edges(graph, sub);
    return sub;
}

double faithfulness(const ProbVector& dist_full, const ProbVector& dist_sub,
                    FaithfulnessMode mode, double smoothing) {
    if (dist_full.size() != dist_sub.size()) {
        throw ValidationError("faithfulness: size mismatch");
    }
    if (smoothing < 0.0 || smoothing > 1.0) {
        throw ValidationError("faithfulness: smoothing outside [0,1]");
    }
    const int C = dist_full.size();
    std::vector<double> p(static_cast<size_t>(C)), q(static_cast<size_t>(C));
    double psum = 0.0, qsum = 0.0;
    for (int c = 0; c < C; ++c) {
        p[static_cast<size_t>(c)] = (1.0 - smoothing) * dist_full(c) + smoothing / C;
        q[static_cast<size_t>(c)] = (1.0 - smoothing) * dist_sub(c) + smoothing / C;
        psum += p[static_cast<size_t>(c)];
        qsum += q[static_cast<size_t>(c)];
    }
    for (int c = 0; c < C; ++c) {
        p[static_cast<size_t>(c)] /= psum;
        q[static_cast<size_t>(c)] /= qsum;
    }
    auto kl = [C](const std::vector<double>& a, const std::vector<double>& b) {
        double total = 0.0;
        for (int c = 0; c < C; ++c) {
            double av = a[static_cast<size_t>(c)];
            if (av <= 0.0) continue;  // 0 log 0 = 0
            total += av * std::log(av / b[static_cast<size_t>(c)]);
        }
        return total;
    };
    if (mode == FaithfulnessMode::one_sided) {
        return kl(p, q);
    }
    return kl(p, q) + kl(q, p);
}

double label_coverage(const std::vector<ExplanatorySubgraph>& subgraphs, const Split& split) {
    if (subgraphs.empty()) {
        throw ValidationError("label_coverage: empty subgraph list");
    }
    int covered = 0;
    for (const auto& sub : subgraphs) {
        for (int v : sub.nodes) {
            if (split.contains_labeled(v)) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(subgraphs.size());
}

ExplanatorySubgraph random_walk_subgraph(const Graph& graph, int target, int n_nodes,
                                         uint64_t seed) {
    if (n_nodes < 1) {
        throw ValidationError("random_walk_subgraph: n_nodes must be >= 1");
    }
    ExplanatorySubgraph sub;
    sub.target = target;
    sub.nodes.push_back(target);

    std::vector<char> visited(static_cast<size_t>(graph.node_count), 0);
    visited[static_cast<size_t>(target)] = 1;

    rng::Engine engine(seed);
    int current = target;
    const long budget = 50L * n_nodes;
    for (long step = 0; step < budget && static_cast<int>(sub.nodes.size()) < n_nodes; ++step) {
        const auto& nbrs = graph.adjacency[static_cast<size_t>(current)];
        if (nbrs.empty()) break;
        size_t pick = static_cast<size_t>(engine.next_int(static_cast<int>(nbrs.size())));
        int next = nbrs[pick];
        if (!visited[static_cast<size_t>(next)]) {
            visited[static_cast<size_t>(next)] = 1;
            sub.nodes.push_back(next);
            sub.selected_edges.push_back(
                {graph.adj_edge_ids[static_cast<size_t>(current)][pick],
                 static_cast<int>(sub.selected_edges.size()) + 1, 0.0});
        }
        current = next;
    }
    finish_induced_edges(graph, sub);
    return sub;
}

void write_subgraph_dump(const Graph& graph, const std::vector<ExplanatorySubgraph>& subgraphs,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    for (const auto& sub : subgraphs) {
        out << "target " << sub.target << '\n';
        out << "nodes";
        for (int v : sub.nodes) out << ' ' << v;
        out << '\n';
        for (const auto& sel : sub.selected_edges) {
            auto [u, v] = graph.edges[static_cast<size_t>(sel.edge_id)];
            out << "edge " << u << '-' << v << ' ' << sel.rank << ' ' << format_double(sel.score)
                << '\n';
        }
        out << '\n';
    }
}

}  // namespace baed
