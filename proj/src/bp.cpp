#include "baed/bp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "baed/explain.hpp"

namespace baed {

namespace {

constexpr double kFloor = 1e-300;
constexpr int kLogSpaceDegree = 51;  // log-space neighbor products from this degree up

// directed edge id for (from -> to) on undirected edge e with u < v
inline int directed_id(const Graph& graph, int edge, int from) {
    return 2 * edge + (graph.edges[static_cast<size_t>(edge)].first == from ? 0 : 1);
}

}  // namespace

CompatibilityMatrix build_compatibility(double epsilon, int class_count) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) {
        throw ValidationError("build_compatibility: epsilon outside (0,1]");
    }
    if (class_count < 2) {
        throw ValidationError("build_compatibility: class_count < 2");
    }
    CompatibilityMatrix compat;
    compat.epsilon = epsilon;
    compat.class_count = class_count;
    compat.off_diagonal = (1.0 - epsilon) / (class_count - 1);
    return compat;
}

MessageStore::MessageStore(const Graph& graph)
    : class_count_(graph.class_count), directed_count_(2 * graph.edge_count()) {
    values_.assign(static_cast<size_t>(directed_count_) * class_count_, 1.0 / class_count_);
}

ProbVector MessageStore::message(const Graph& graph, int from, int to) const {
    int edge = graph.edge_id(from, to);
    if (edge < 0) {
        throw ValidationError("MessageStore::message: no such edge");
    }
    int dir = directed_id(graph, edge, from);
    std::vector<double> v(values_.begin() + static_cast<size_t>(dir) * class_count_,
                          values_.begin() + static_cast<size_t>(dir + 1) * class_count_);
    return ProbVector(std::move(v));
}

namespace {

// For node j, writes the per-class incoming-message product excluding each
// neighbor into excl (deg x C, row per adjacency slot). Rows that underflow to
// all-zeros stay zero; the caller resets those messages.
void exclusive_products(const Graph& graph, const MessageStore& store, int j,
                        std::vector<double>& excl, std::vector<double>& scratch) {
    const int C = store.class_count();
    const auto& nbrs = graph.adjacency[static_cast<size_t>(j)];
    const auto& eids = graph.adj_edge_ids[static_cast<size_t>(j)];
    const int deg = static_cast<int>(nbrs.size());
    const auto& values = store.values();
    excl.assign(static_cast<size_t>(deg) * C, 1.0);

    if (deg < kLogSpaceDegree) {
        // prefix/suffix products, no division
        scratch.assign(static_cast<size_t>(deg + 1) * C, 1.0);  // suffix
        for (int k = deg - 1; k >= 0; --k) {
            int dir = directed_id(graph, eids[static_cast<size_t>(k)], nbrs[static_cast<size_t>(k)]);
            const double* m = &values[static_cast<size_t>(dir) * C];
            for (int c = 0; c < C; ++c) {
                scratch[static_cast<size_t>(k) * C + c] =
                    scratch[static_cast<size_t>(k + 1) * C + c] * m[c];
            }
        }
        std::vector<double> prefix(static_cast<size_t>(C), 1.0);
        for (int k = 0; k < deg; ++k) {
            for (int c = 0; c < C; ++c) {
                excl[static_cast<size_t>(k) * C + c] =
                    prefix[static_cast<size_t>(c)] * scratch[static_cast<size_t>(k + 1) * C + c];
            }
            int dir = directed_id(graph, eids[static_cast<size_t>(k)], nbrs[static_cast<size_t>(k)]);
            const double* m = &values[static_cast<size_t>(dir) * C];
            for (int c = 0; c < C; ++c) prefix[static_cast<size_t>(c)] *= m[c];
        }
    } else {
        // log-space: total sum minus own term, shifted by the row max
        std::vector<double> log_sum(static_cast<size_t>(C), 0.0);
        scratch.assign(static_cast<size_t>(deg) * C, 0.0);
        for (int k = 0; k < deg; ++k) {
            int dir = directed_id(graph, eids[static_cast<size_t>(k)], nbrs[static_cast<size_t>(k)]);
            const double* m = &values[static_cast<size_t>(dir) * C];
            for (int c = 0; c < C; ++c) {
                double lg = std::log(std::max(m[c], kFloor));
                scratch[static_cast<size_t>(k) * C + c] = lg;
                log_sum[static_cast<size_t>(c)] += lg;
            }
        }
        for (int k = 0; k < deg; ++k) {
            double mx = -1e308;
            for (int c = 0; c < C; ++c) {
                mx = std::max(mx, log_sum[static_cast<size_t>(c)] -
                                      scratch[static_cast<size_t>(k) * C + c]);
            }
            for (int c = 0; c < C; ++c) {
                excl[static_cast<size_t>(k) * C + c] = std::exp(
                    log_sum[static_cast<size_t>(c)] - scratch[static_cast<size_t>(k) * C + c] - mx);
            }
        }
    }
}

}  // namespace

double update_messages(const Graph& graph, const PriorField& priors,
                       const CompatibilityMatrix& compat, MessageStore& store, double damping) {
    const int C = store.class_count();
    if (priors.node_count() != graph.node_count) {
        throw ValidationError("update_messages: priors do not cover every node");
    }
    if (compat.class_count != C) {
        throw ValidationError("update_messages: compatibility class count mismatch");
    }
    const auto& old_values = store.values();
    std::vector<double> next(old_values.size());
    std::vector<double> excl, scratch;
    std::vector<double> w(static_cast<size_t>(C));

    // message j -> i reads j's prior and j's incoming messages except i's
    for (int j = 0; j < graph.node_count; ++j) {
        const auto& nbrs = graph.adjacency[static_cast<size_t>(j)];
        if (nbrs.empty()) continue;
        const auto& eids = graph.adj_edge_ids[static_cast<size_t>(j)];
        const ProbVector& phi = priors.priors[static_cast<size_t>(j)];
        exclusive_products(graph, store, j, excl, scratch);

        for (size_t k = 0; k < nbrs.size(); ++k) {
            int out_dir = directed_id(graph, eids[k], j);  // j -> i
            double* dst = &next[static_cast<size_t>(out_dir) * C];

            double wsum = 0.0;
            for (int c = 0; c < C; ++c) {
                w[static_cast<size_t>(c)] = phi(c) * excl[k * static_cast<size_t>(C) + static_cast<size_t>(c)];
                wsum += w[static_cast<size_t>(c)];
            }
            if (!(wsum > 0.0) || !std::isfinite(wsum)) {
                for (int c = 0; c < C; ++c) dst[c] = 1.0 / C;
                store.record_reset();
                continue;
            }
            // row-structured psi: sum_cj psi(ci,cj) w(cj) = offd*sum + (eps-offd)*w(ci)
            double norm = 0.0;
            for (int c = 0; c < C; ++c) {
                double v = compat.off_diagonal * wsum +
                           (compat.epsilon - compat.off_diagonal) * w[static_cast<size_t>(c)];
                dst[c] = std::max(v, kFloor);
                norm += dst[c];
            }
            for (int c = 0; c < C; ++c) dst[c] /= norm;
            if (damping > 0.0) {
                const double* old_m = &old_values[static_cast<size_t>(out_dir) * C];
                double dnorm = 0.0;
                for (int c = 0; c < C; ++c) {
                    dst[c] = (1.0 - damping) * dst[c] + damping * old_m[c];
                    dnorm += dst[c];
                }
                for (int c = 0; c < C; ++c) dst[c] /= dnorm;
            }
        }
    }

    double amplitude = 0.0;
    if (store.directed_count() > 0) {
        for (size_t idx = 0; idx < next.size(); ++idx) {
            amplitude += std::fabs(next[idx] - old_values[idx]);
        }
        amplitude /= static_cast<double>(store.directed_count());
    }
    store.values() = std::move(next);
    store.bump_iteration();
    return amplitude;
}

namespace {

std::vector<ProbVector> compute_posteriors(const Graph& graph, const PriorField& priors,
                                           MessageStore& store) {
    const int C = store.class_count();
    std::vector<ProbVector> posteriors;
    posteriors.reserve(static_cast<size_t>(graph.node_count));
    std::vector<double> excl, scratch;

    for (int i = 0; i < graph.node_count; ++i) {
        const ProbVector& phi = priors.priors[static_cast<size_t>(i)];
        const auto& nbrs = graph.adjacency[static_cast<size_t>(i)];
        if (nbrs.empty()) {
            posteriors.push_back(phi);  // empty neighbor product, b = phi exactly
            continue;
        }
        const auto& eids = graph.adj_edge_ids[static_cast<size_t>(i)];
        const auto& values = store.values();
        std::vector<double> w(static_cast<size_t>(C));
        const int deg = static_cast<int>(nbrs.size());
        if (deg < kLogSpaceDegree) {
            for (int c = 0; c < C; ++c) w[static_cast<size_t>(c)] = phi(c);
            for (int k = 0; k < deg; ++k) {
                int dir = directed_id(graph, eids[static_cast<size_t>(k)], nbrs[static_cast<size_t>(k)]);
                const double* m = &values[static_cast<size_t>(dir) * C];
                for (int c = 0; c < C; ++c) w[static_cast<size_t>(c)] *= m[c];
            }
        } else {
            std::vector<double> lg(static_cast<size_t>(C), 0.0);
            bool has_mass = false;
            for (int c = 0; c < C; ++c) {
                if (phi(c) > 0.0) {
                    lg[static_cast<size_t>(c)] = std::log(phi(c));
                    has_mass = true;
                } else {
                    lg[static_cast<size_t>(c)] = -1e308;
                }
            }
            for (int k = 0; k < deg; ++k) {
                int dir = directed_id(graph, eids[static_cast<size_t>(k)], nbrs[static_cast<size_t>(k)]);
                const double* m = &values[static_cast<size_t>(dir) * C];
                for (int c = 0; c < C; ++c) {
                    lg[static_cast<size_t>(c)] += std::log(std::max(m[c], kFloor));
                }
            }
            double mx = *std::max_element(lg.begin(), lg.end());
            for (int c = 0; c < C; ++c) {
                w[static_cast<size_t>(c)] = has_mass ? std::exp(lg[static_cast<size_t>(c)] - mx) : 0.0;
            }
        }
        double sum = 0.0;
        for (double v : w) sum += v;
        if (!(sum > 0.0) || !std::isfinite(sum)) {
            posteriors.push_back(phi);
            store.record_reset();
            continue;
        }
        for (double& v : w) v /= sum;
        posteriors.push_back(ProbVector::from_unnormalized(w));
    }
    return posteriors;
}

}  // namespace

BpResult run_bp(const Graph& graph, const PriorField& priors, const BpConfig& config) {
    if (!(config.eta > 0.0)) {
        throw ValidationError("run_bp: eta must be > 0");
    }
    if (config.max_iters < 1) {
        throw ValidationError("run_bp: max_iters must be >= 1");
    }
    CompatibilityMatrix compat = build_compatibility(config.epsilon, graph.class_count);
    MessageStore store(graph);

    BpResult result;
    for (int t = 0; t < config.max_iters; ++t) {
        double amplitude = update_messages(graph, priors, compat, store, config.damping);
        result.amplitude_trace.push_back(amplitude);
        if (amplitude < config.eta) {
            result.converged = true;
            break;
        }
    }
    result.iterations_run = static_cast<int>(result.amplitude_trace.size());
    result.posteriors = compute_posteriors(graph, priors, store);
    result.numeric_resets = store.numeric_resets();
    return result;
}

Prediction predict_on_subgraph(const Graph& base, const ExplanatorySubgraph& subgraph,
                               const PriorField& priors, const BpConfig& config) {
    if (subgraph.nodes.empty() || subgraph.nodes.front() != subgraph.target) {
        throw ValidationError("predict_on_subgraph: subgraph must start at its target");
    }
    std::map<int, int> remap;
    for (size_t k = 0; k < subgraph.nodes.size(); ++k) {
        remap[subgraph.nodes[k]] = static_cast<int>(k);
    }
    std::vector<std::pair<int, int>> edges;
    for (int eid : subgraph.induced_edges) {
        auto [u, v] = base.edges[static_cast<size_t>(eid)];
        edges.emplace_back(remap.at(u), remap.at(v));
    }
    Graph induced = make_graph(static_cast<int>(subgraph.nodes.size()), base.class_count,
                               std::move(edges), {});
    PriorField sub_priors;
    sub_priors.class_count = priors.class_count;
    for (int node : subgraph.nodes) {
        sub_priors.priors.push_back(priors.priors.at(static_cast<size_t>(node)));
    }
    BpResult bp = run_bp(induced, sub_priors, config);
    return make_prediction(subgraph.target, bp.posteriors.front());
}

void write_amplitude_trace(const std::vector<double>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "iteration,amplitude\n";
    char buf[40];
    for (size_t t = 0; t < trace.size(); ++t) {
        std::snprintf(buf, sizeof(buf), "%.17g", trace[t]);
        out << (t + 1) << ',' << buf << '\n';
    }
}

}  // namespace baed
