#include "baed/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "baed/rng.hpp"

namespace baed {

namespace {

constexpr double kLogClamp = 1e-12;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double act(double x, bool linear) { return linear ? x : (x > 0.0 ? x : 0.0); }
inline double act_grad(double pre, bool linear) { return linear ? 1.0 : (pre > 0.0 ? 1.0 : 0.0); }

}  // namespace

EdgeWeightedView EdgeWeightedView::full(const Graph& graph) {
    EdgeWeightedView view;
    view.base = &graph;
    view.edge_weights.assign(graph.edges.size(), 1.0);
    return view;
}

EdgeWeightedView EdgeWeightedView::scaled(double s) const {
    EdgeWeightedView view;
    view.base = base;
    view.edge_weights.resize(edge_weights.size());
    for (size_t e = 0; e < edge_weights.size(); ++e) {
        view.edge_weights[e] = s * edge_weights[e];
    }
    return view;
}

int64_t GnnModel::parameter_count() const {
    int64_t count = 0;
    for (const auto& w : sage_weights) {
        count += static_cast<int64_t>(w.rows) * w.cols;
    }
    count += static_cast<int64_t>(mlp_w1.rows) * mlp_w1.cols + static_cast<int64_t>(mlp_b1.size());
    count += static_cast<int64_t>(mlp_w2.rows) * mlp_w2.cols + static_cast<int64_t>(mlp_b2.size());
    return count;
}

GnnModel init_model(int class_count, const TrainConfig& config) {
    if (class_count < 2 || config.hidden_dim < 1 || config.layers < 1) {
        throw ValidationError("init_model: bad dimensions");
    }
    GnnModel model;
    model.class_count = class_count;
    model.hidden_dim = config.hidden_dim;
    model.layers = config.layers;

    rng::Engine engine(config.seed);
    auto glorot = [&engine](Matrix& m) {
        double s = std::sqrt(6.0 / (m.rows + m.cols));
        for (double& v : m.a) v = (2.0 * engine.next_double() - 1.0) * s;
    };

    for (int k = 1; k <= config.layers; ++k) {
        Matrix w(model.dim(k), model.dim(k - 1));
        glorot(w);
        model.sage_weights.push_back(std::move(w));
    }
    model.mlp_w1 = Matrix(config.hidden_dim, model.dim(config.layers));
    glorot(model.mlp_w1);
    model.mlp_b1.assign(static_cast<size_t>(config.hidden_dim), 0.0);
    model.mlp_w2 = Matrix(class_count, config.hidden_dim);
    glorot(model.mlp_w2);
    model.mlp_b2.assign(static_cast<size_t>(class_count), 0.0);
    return model;
}

ForwardCache forward_cached(const GnnModel& model, const EdgeWeightedView& view,
                            const PriorField& priors) {
    const Graph& graph = *view.base;
    const int n = graph.node_count;
    const int C = model.class_count;
    const int K = model.layers;
    if (priors.class_count != C) {
        throw ValidationError("forward: prior class count does not match the model");
    }
    if (priors.node_count() != n) {
        throw ValidationError("forward: priors do not cover every node");
    }

    ForwardCache cache;
    cache.inv_denom.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double denom = 1.0;  // fixed self-weight
        const auto& eids = graph.adj_edge_ids[static_cast<size_t>(i)];
        for (int eid : eids) denom += view.edge_weights[static_cast<size_t>(eid)];
        cache.inv_denom[static_cast<size_t>(i)] = 1.0 / denom;
    }

    cache.wmean.resize(static_cast<size_t>(K + 1));
    cache.pre.resize(static_cast<size_t>(K + 1));
    cache.h.resize(static_cast<size_t>(K + 1));
    cache.h[0] = Matrix(n, C);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < C; ++c) {
            cache.h[0](i, c) = priors.priors[static_cast<size_t>(i)](c);
        }
    }

    for (int k = 1; k <= K; ++k) {
        const Matrix& hin = cache.h[static_cast<size_t>(k - 1)];
        const int din = model.dim(k - 1);
        const int dout = model.dim(k);
        Matrix wm(n, din);
        for (int i = 0; i < n; ++i) {
            const auto& nbrs = graph.adjacency[static_cast<size_t>(i)];
            const auto& eids = graph.adj_edge_ids[static_cast<size_t>(i)];
            for (int d = 0; d < din; ++d) wm(i, d) = hin(i, d);
            for (size_t t = 0; t < nbrs.size(); ++t) {
                double a = view.edge_weights[static_cast<size_t>(eids[t])];
                if (a == 0.0) continue;
                for (int d = 0; d < din; ++d) wm(i, d) += a * hin(nbrs[t], d);
            }
            double inv = cache.inv_denom[static_cast<size_t>(i)];
            for (int d = 0; d < din; ++d) wm(i, d) *= inv;
        }
        const Matrix& W = model.sage_weights[static_cast<size_t>(k - 1)];
        Matrix pre(n, dout);
        Matrix h(n, dout);
        for (int i = 0; i < n; ++i) {
            for (int r = 0; r < dout; ++r) {
                double s = 0.0;
                for (int d = 0; d < din; ++d) s += W(r, d) * wm(i, d);
                pre(i, r) = s;
                h(i, r) = act(s, model.linear_activations);
            }
        }
        cache.wmean[static_cast<size_t>(k)] = std::move(wm);
        cache.pre[static_cast<size_t>(k)] = std::move(pre);
        cache.h[static_cast<size_t>(k)] = std::move(h);
    }

    const Matrix& hK = cache.h[static_cast<size_t>(K)];
    const int dK = model.dim(K);
    const int H = model.hidden_dim;
    cache.z1pre = Matrix(n, H);
    cache.z1 = Matrix(n, H);
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < H; ++r) {
            double s = model.mlp_b1[static_cast<size_t>(r)];
            for (int d = 0; d < dK; ++d) s += model.mlp_w1(r, d) * hK(i, d);
            cache.z1pre(i, r) = s;
            cache.z1(i, r) = act(s, model.linear_activations);
        }
    }
    cache.logits = Matrix(n, C);
    cache.probs = Matrix(n, C);
    for (int i = 0; i < n; ++i) {
        double mx = -1e308;
        for (int c = 0; c < C; ++c) {
            double s = model.mlp_b2[static_cast<size_t>(c)];
            for (int r = 0; r < H; ++r) s += model.mlp_w2(c, r) * cache.z1(i, r);
            cache.logits(i, c) = s;
            mx = std::max(mx, s);
        }
        double sum = 0.0;
        for (int c = 0; c < C; ++c) {
            double e = std::exp(cache.logits(i, c) - mx);
            cache.probs(i, c) = e;
            sum += e;
        }
        for (int c = 0; c < C; ++c) cache.probs(i, c) /= sum;
    }
    return cache;
}

std::vector<Prediction> forward(const GnnModel& model, const EdgeWeightedView& view,
                                const PriorField& priors) {
    ForwardCache cache = forward_cached(model, view, priors);
    const int n = view.base->node_count;
    std::vector<Prediction> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<double> p(static_cast<size_t>(model.class_count));
        for (int c = 0; c < model.class_count; ++c) p[static_cast<size_t>(c)] = cache.probs(i, c);
        out.push_back(make_prediction(i, ProbVector::from_unnormalized(p)));
    }
    return out;
}

double loss(const std::vector<Prediction>& predictions, const std::vector<ProbVector>& targets,
            const std::vector<int>& nodes) {
    if (nodes.empty()) {
        throw ValidationError("loss: empty node set");
    }
    double total = 0.0;
    for (int node : nodes) {
        const Prediction& pred = predictions.at(static_cast<size_t>(node));
        const ProbVector& t = targets.at(static_cast<size_t>(node));
        for (int c = 0; c < t.size(); ++c) {
            total -= t(c) * std::log(std::max(pred.distribution(c), kLogClamp));
        }
    }
    return total / static_cast<double>(nodes.size());
}

namespace {

struct BackwardScratch {
    std::vector<Matrix> dh;  // layer k: n x dim(k)
    std::vector<double> du;
    std::vector<double> dwm;
    std::vector<double> dz1;
};

// Cross-entropy seed at one node: d loss / d logits, respecting the log clamp.
void seed_dlogits(const GnnModel& model, const ForwardCache& cache, int node,
                  const ProbVector& target, double scale, std::vector<double>& dlogits) {
    const int C = model.class_count;
    std::vector<double> dp(static_cast<size_t>(C), 0.0);
    for (int c = 0; c < C; ++c) {
        double p = cache.probs(node, c);
        if (p > kLogClamp) {
            dp[static_cast<size_t>(c)] = -scale * target(c) / p;
        }
    }
    double dot = 0.0;
    for (int c = 0; c < C; ++c) dot += dp[static_cast<size_t>(c)] * cache.probs(node, c);
    dlogits.assign(static_cast<size_t>(C), 0.0);
    for (int c = 0; c < C; ++c) {
        dlogits[static_cast<size_t>(c)] = cache.probs(node, c) * (dp[static_cast<size_t>(c)] - dot);
    }
}

// MLP head backward at one node; accumulates parameter grads when given and
// returns d loss / d h^K for the node.
void mlp_backward(const GnnModel& model, const ForwardCache& cache, int node,
                  const std::vector<double>& dlogits, GnnGradients* grads,
                  std::vector<double>& dhK) {
    const int C = model.class_count;
    const int H = model.hidden_dim;
    const int dK = model.dim(model.layers);
    std::vector<double> dz1(static_cast<size_t>(H), 0.0);
    for (int c = 0; c < C; ++c) {
        double g = dlogits[static_cast<size_t>(c)];
        if (g == 0.0) continue;
        if (grads) {
            grads->mlp_b2[static_cast<size_t>(c)] += g;
            for (int r = 0; r < H; ++r) grads->mlp_w2(c, r) += g * cache.z1(node, r);
        }
        for (int r = 0; r < H; ++r) dz1[static_cast<size_t>(r)] += model.mlp_w2(c, r) * g;
    }
    dhK.assign(static_cast<size_t>(dK), 0.0);
    for (int r = 0; r < H; ++r) {
        double g = dz1[static_cast<size_t>(r)] * act_grad(cache.z1pre(node, r), model.linear_activations);
        if (g == 0.0) continue;
        if (grads) {
            grads->mlp_b1[static_cast<size_t>(r)] += g;
            for (int d = 0; d < dK; ++d) grads->mlp_w1(r, d) += g * cache.h[static_cast<size_t>(model.layers)](node, d);
        }
        for (int d = 0; d < dK; ++d) dhK[static_cast<size_t>(d)] += model.mlp_w1(r, d) * g;
    }
}

GnnGradients zero_gradients(const GnnModel& model) {
    GnnGradients g;
    for (const auto& w : model.sage_weights) g.sage_weights.emplace_back(w.rows, w.cols);
    g.mlp_w1 = Matrix(model.mlp_w1.rows, model.mlp_w1.cols);
    g.mlp_b1.assign(model.mlp_b1.size(), 0.0);
    g.mlp_w2 = Matrix(model.mlp_w2.rows, model.mlp_w2.cols);
    g.mlp_b2.assign(model.mlp_b2.size(), 0.0);
    return g;
}

// Backward through SAGE layer k over `active` nodes: consumes dh[k], adds to
// dh[k-1], accumulates dW^k and (optionally) per-edge gradients.
void sage_layer_backward(const GnnModel& model, const EdgeWeightedView& view,
                         const ForwardCache& cache, int k, const std::vector<int>& active,
                         std::vector<Matrix>& dh, GnnGradients* grads,
                         std::vector<double>* edge_grads) {
    const Graph& graph = *view.base;
    const Matrix& W = model.sage_weights[static_cast<size_t>(k - 1)];
    const Matrix& pre = cache.pre[static_cast<size_t>(k)];
    const Matrix& wm = cache.wmean[static_cast<size_t>(k)];
    const Matrix& hin = cache.h[static_cast<size_t>(k - 1)];
    const int din = model.dim(k - 1);
    const int dout = model.dim(k);

    std::vector<double> du(static_cast<size_t>(dout));
    std::vector<double> dwm(static_cast<size_t>(din));

    for (int i : active) {
        bool any = false;
        for (int r = 0; r < dout; ++r) {
            double g = dh[static_cast<size_t>(k)](i, r) * act_grad(pre(i, r), model.linear_activations);
            du[static_cast<size_t>(r)] = g;
            any = any || g != 0.0;
        }
        if (!any) continue;
        if (grads) {
            Matrix& dW = grads->sage_weights[static_cast<size_t>(k - 1)];
            for (int r = 0; r < dout; ++r) {
                double g = du[static_cast<size_t>(r)];
                if (g == 0.0) continue;
                for (int d = 0; d < din; ++d) dW(r, d) += g * wm(i, d);
            }
        }
        for (int d = 0; d < din; ++d) {
            double s = 0.0;
            for (int r = 0; r < dout; ++r) s += W(r, d) * du[static_cast<size_t>(r)];
            dwm[static_cast<size_t>(d)] = s;
        }
        const double inv = cache.inv_denom[static_cast<size_t>(i)];
        for (int d = 0; d < din; ++d) {
            dh[static_cast<size_t>(k - 1)](i, d) += dwm[static_cast<size_t>(d)] * inv;
        }
        const auto& nbrs = graph.adjacency[static_cast<size_t>(i)];
        const auto& eids = graph.adj_edge_ids[static_cast<size_t>(i)];
        for (size_t t = 0; t < nbrs.size(); ++t) {
            int j = nbrs[t];
            int eid = eids[t];
            double a = view.edge_weights[static_cast<size_t>(eid)];
            if (a != 0.0) {
                for (int d = 0; d < din; ++d) {
                    dh[static_cast<size_t>(k - 1)](j, d) += a * inv * dwm[static_cast<size_t>(d)];
                }
            }
            if (edge_grads) {
                // d wmean_i / d a_ij = (h_j - wmean_i) / denom_i
                double s = 0.0;
                for (int d = 0; d < din; ++d) {
                    s += dwm[static_cast<size_t>(d)] * (hin(j, d) - wm(i, d));
                }
                (*edge_grads)[static_cast<size_t>(eid)] += s * inv;
            }
        }
    }
}

std::vector<int> expand_frontier(const Graph& graph, const std::vector<int>& active,
                                 std::vector<char>& mark) {
    std::vector<int> next = active;
    for (int i : active) {
        for (int j : graph.adjacency[static_cast<size_t>(i)]) {
            if (!mark[static_cast<size_t>(j)]) {
                mark[static_cast<size_t>(j)] = 1;
                next.push_back(j);
            }
        }
    }
    std::sort(next.begin(), next.end());
    return next;
}

}  // namespace

GnnGradients parameter_gradients(const GnnModel& model, const EdgeWeightedView& view,
                                 const ForwardCache& cache, const std::vector<ProbVector>& targets,
                                 const std::vector<int>& nodes) {
    if (nodes.empty()) {
        throw ValidationError("parameter_gradients: empty node set");
    }
    const Graph& graph = *view.base;
    const int n = graph.node_count;
    const int K = model.layers;
    GnnGradients grads = zero_gradients(model);

    std::vector<Matrix> dh(static_cast<size_t>(K + 1));
    for (int k = 0; k <= K; ++k) dh[static_cast<size_t>(k)] = Matrix(n, model.dim(k));

    const double scale = 1.0 / static_cast<double>(nodes.size());
    std::vector<double> dlogits, dhK;
    for (int node : nodes) {
        seed_dlogits(model, cache, node, targets.at(static_cast<size_t>(node)), scale, dlogits);
        mlp_backward(model, cache, node, dlogits, &grads, dhK);
        for (int d = 0; d < model.dim(K); ++d) {
            dh[static_cast<size_t>(K)](node, d) += dhK[static_cast<size_t>(d)];
        }
    }

    std::vector<int> all(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    for (int k = K; k >= 1; --k) {
        sage_layer_backward(model, view, cache, k, all, dh, &grads, nullptr);
    }
    return grads;
}

TrainResult train(GnnModel model, const EdgeWeightedView& view, const PriorField& priors,
                  const std::vector<ProbVector>& targets, const std::vector<int>& nodes,
                  const TrainConfig& config) {
    if (config.learning_rate <= 0.0) {
        throw ValidationError("train: learning_rate must be > 0");
    }
    if (config.patience > config.max_epochs && config.max_epochs > 0) {
        // patience beyond the epoch budget simply never fires
    }
    TrainResult result;
    double best = 1e308;
    int since_best = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        ForwardCache cache = forward_cached(model, view, priors);
        double epoch_loss = 0.0;
        for (int node : nodes) {
            const ProbVector& t = targets.at(static_cast<size_t>(node));
            for (int c = 0; c < model.class_count; ++c) {
                epoch_loss -= t(c) * std::log(std::max(cache.probs(node, c), kLogClamp));
            }
        }
        epoch_loss /= static_cast<double>(nodes.size());
        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error("train: loss diverged (non-finite); lower the learning rate");
        }
        result.loss_trace.push_back(epoch_loss);
        if (epoch_loss < best) {
            best = epoch_loss;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }

        GnnGradients grads = parameter_gradients(model, view, cache, targets, nodes);
        const double lr = config.learning_rate;
        for (int k = 0; k < model.layers; ++k) {
            auto& W = model.sage_weights[static_cast<size_t>(k)].a;
            const auto& G = grads.sage_weights[static_cast<size_t>(k)].a;
            for (size_t idx = 0; idx < W.size(); ++idx) W[idx] -= lr * G[idx];
        }
        for (size_t idx = 0; idx < model.mlp_w1.a.size(); ++idx) model.mlp_w1.a[idx] -= lr * grads.mlp_w1.a[idx];
        for (size_t idx = 0; idx < model.mlp_b1.size(); ++idx) model.mlp_b1[idx] -= lr * grads.mlp_b1[idx];
        for (size_t idx = 0; idx < model.mlp_w2.a.size(); ++idx) model.mlp_w2.a[idx] -= lr * grads.mlp_w2.a[idx];
        for (size_t idx = 0; idx < model.mlp_b2.size(); ++idx) model.mlp_b2[idx] -= lr * grads.mlp_b2[idx];
    }

    result.epochs = static_cast<int>(result.loss_trace.size());
    result.model = std::move(model);
    return result;
}

std::vector<double> edge_gradients_cached(const GnnModel& model, const EdgeWeightedView& view,
                                          const ForwardCache& cache, int target,
                                          const ProbVector& target_posterior) {
    const Graph& graph = *view.base;
    const int n = graph.node_count;
    const int K = model.layers;
    if (target < 0 || target >= n) {
        throw ValidationError("edge_gradients: target out of range");
    }

    std::vector<double> edge_grads(graph.edges.size(), 0.0);
    std::vector<Matrix> dh(static_cast<size_t>(K + 1));
    for (int k = 0; k <= K; ++k) dh[static_cast<size_t>(k)] = Matrix(n, model.dim(k));

    std::vector<double> dlogits, dhK;
    seed_dlogits(model, cache, target, target_posterior, 1.0, dlogits);
    mlp_backward(model, cache, target, dlogits, nullptr, dhK);
    for (int d = 0; d < model.dim(K); ++d) {
        dh[static_cast<size_t>(K)](target, d) = dhK[static_cast<size_t>(d)];
    }

    // the gradient footprint grows one hop per layer
    std::vector<char> mark(static_cast<size_t>(n), 0);
    mark[static_cast<size_t>(target)] = 1;
    std::vector<int> active = {target};
    for (int k = K; k >= 1; --k) {
        sage_layer_backward(model, view, cache, k, active, dh, nullptr, &edge_grads);
        if (k > 1) active = expand_frontier(graph, active, mark);
    }
    return edge_grads;
}

std::vector<double> edge_gradients(const GnnModel& model, const EdgeWeightedView& view,
                                   const PriorField& priors, int target,
                                   const ProbVector& target_posterior) {
    ForwardCache cache = forward_cached(model, view, priors);
    return edge_gradients_cached(model, view, cache, target, target_posterior);
}

void save_model(const GnnModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "gnn-checkpoint 1\n";
    out << model.class_count << ' ' << model.hidden_dim << ' ' << model.layers << ' '
        << (model.linear_activations ? 1 : 0) << '\n';
    auto dump = [&out](const Matrix& m, const char* tag) {
        out << tag << ' ' << m.rows << ' ' << m.cols << '\n';
        for (int r = 0; r < m.rows; ++r) {
            for (int c = 0; c < m.cols; ++c) {
                out << (c ? " " : "") << format_double(m(r, c));
            }
            out << '\n';
        }
    };
    auto dump_vec = [&out](const std::vector<double>& v, const char* tag) {
        out << tag << ' ' << v.size() << '\n';
        for (size_t i = 0; i < v.size(); ++i) {
            out << (i ? " " : "") << format_double(v[i]);
        }
        out << '\n';
    };
    for (int k = 0; k < model.layers; ++k) {
        dump(model.sage_weights[static_cast<size_t>(k)], "sage");
    }
    dump(model.mlp_w1, "mlp_w1");
    dump_vec(model.mlp_b1, "mlp_b1");
    dump(model.mlp_w2, "mlp_w2");
    dump_vec(model.mlp_b2, "mlp_b2");
}

GnnModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "gnn-checkpoint" || version != 1) {
        throw ParseError(path + ": not a v1 gnn checkpoint");
    }
    GnnModel model;
    int linear = 0;
    in >> model.class_count >> model.hidden_dim >> model.layers >> linear;
    model.linear_activations = linear != 0;
    auto read_matrix = [&in, &path](const std::string& expect) {
        std::string tag;
        int rows = 0, cols = 0;
        if (!(in >> tag >> rows >> cols) || tag != expect) {
            throw ParseError(path + ": expected matrix tag " + expect);
        }
        Matrix m(rows, cols);
        for (double& v : m.a) {
            if (!(in >> v)) throw ParseError(path + ": truncated matrix " + expect);
        }
        return m;
    };
    auto read_vec = [&in, &path](const std::string& expect) {
        std::string tag;
        size_t len = 0;
        if (!(in >> tag >> len) || tag != expect) {
            throw ParseError(path + ": expected vector tag " + expect);
        }
        std::vector<double> v(len);
        for (double& x : v) {
            if (!(in >> x)) throw ParseError(path + ": truncated vector " + expect);
        }
        return v;
    };
    for (int k = 0; k < model.layers; ++k) {
        model.sage_weights.push_back(read_matrix("sage"));
    }
    model.mlp_w1 = read_matrix("mlp_w1");
    model.mlp_b1 = read_vec("mlp_b1");
    model.mlp_w2 = read_matrix("mlp_w2");
    model.mlp_b2 = read_vec("mlp_b2");
    return model;
}

void write_loss_trace(const std::vector<double>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "epoch,loss\n";
    for (size_t e = 0; e < trace.size(); ++e) {
        out << e << ',' << format_double(trace[e]) << '\n';
    }
}

}  // namespace baed
