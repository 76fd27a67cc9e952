#include "baed/priors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "baed/rng.hpp"

namespace baed {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> softmax(const std::vector<double>& scores) {
    double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (size_t c = 0; c < scores.size(); ++c) {
        out[c] = std::exp(scores[c] - mx);
        sum += out[c];
    }
    for (double& v : out) v /= sum;
    return out;
}

}  // namespace

ProbVector PriorEstimator::predict(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != feature_dim) {
        throw ValidationError("PriorEstimator::predict: feature dimension mismatch");
    }
    std::vector<double> scores(static_cast<size_t>(class_count));
    for (int c = 0; c < class_count; ++c) {
        double s = bias[static_cast<size_t>(c)];
        const auto& w = weights[static_cast<size_t>(c)];
        for (int d = 0; d < feature_dim; ++d) {
            s += w[static_cast<size_t>(d)] * x[static_cast<size_t>(d)];
        }
        scores[static_cast<size_t>(c)] = s;
    }
    return ProbVector(softmax(scores));
}

PriorEstimator fit_prior_estimator(const Graph& graph, const Split& split, double l2,
                                   int max_iters, uint64_t seed, PriorMode mode) {
    (void)seed;  // zero init keeps the fit deterministic without it
    if (l2 < 0.0) {
        throw ValidationError("fit_prior_estimator: l2 < 0");
    }
    struct Sample {
        const std::vector<double>* x;
        int y;
    };
    std::vector<Sample> samples;
    std::set<int> classes_seen;
    int dim = -1;
    for (int node : split.labeled) {
        auto fit = graph.features.find(node);
        auto lit = graph.labels.find(node);
        if (fit == graph.features.end() || lit == graph.labels.end()) {
            throw ValidationError("fit_prior_estimator: labeled node " + std::to_string(node) +
                                  " lacks feature or label");
        }
        if (dim < 0) dim = static_cast<int>(fit->second.size());
        samples.push_back({&fit->second, lit->second});
        classes_seen.insert(lit->second);
    }
    if (classes_seen.size() < 2) {
        throw ValidationError("fit_prior_estimator: fewer than 2 distinct classes in the split");
    }

    const int C = graph.class_count;
    const int D = dim;
    const size_t m = samples.size();

    PriorEstimator est;
    est.class_count = C;
    est.feature_dim = D;
    est.l2 = l2;
    est.mode = mode;
    est.weights.assign(static_cast<size_t>(C), std::vector<double>(static_cast<size_t>(D), 0.0));
    est.bias.assign(static_cast<size_t>(C), 0.0);
    for (int c = 0; c < C; ++c) {
        if (!classes_seen.count(c)) est.absent_classes.push_back(c);
    }

    // fixed step from the curvature bound of the softmax loss
    double mean_sq = 0.0;
    for (const auto& s : samples) {
        double n2 = 1.0;  // bias column
        for (double v : *s.x) n2 += v * v;
        mean_sq += n2;
    }
    mean_sq /= static_cast<double>(m);
    const double step = 1.0 / (0.5 * mean_sq + l2 + 1e-12);

    std::vector<std::vector<double>> gw(static_cast<size_t>(C),
                                        std::vector<double>(static_cast<size_t>(D)));
    std::vector<double> gb(static_cast<size_t>(C));
    std::vector<double> scores(static_cast<size_t>(C));

    for (int iter = 0; iter < max_iters; ++iter) {
        for (auto& row : gw) std::fill(row.begin(), row.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);

        for (const auto& s : samples) {
            for (int c = 0; c < C; ++c) {
                double sc = est.bias[static_cast<size_t>(c)];
                const auto& w = est.weights[static_cast<size_t>(c)];
                for (int d = 0; d < D; ++d) sc += w[static_cast<size_t>(d)] * (*s.x)[static_cast<size_t>(d)];
                scores[static_cast<size_t>(c)] = sc;
            }
            if (mode == PriorMode::logistic) {
                auto p = softmax(scores);
                for (int c = 0; c < C; ++c) {
                    double g = p[static_cast<size_t>(c)] - (c == s.y ? 1.0 : 0.0);
                    gb[static_cast<size_t>(c)] += g;
                    auto& row = gw[static_cast<size_t>(c)];
                    for (int d = 0; d < D; ++d) row[static_cast<size_t>(d)] += g * (*s.x)[static_cast<size_t>(d)];
                }
            } else {
                // Crammer-Singer hinge subgradient
                int rival = -1;
                double best = -1e300;
                for (int c = 0; c < C; ++c) {
                    if (c == s.y) continue;
                    if (scores[static_cast<size_t>(c)] > best) {
                        best = scores[static_cast<size_t>(c)];
                        rival = c;
                    }
                }
                if (1.0 + best - scores[static_cast<size_t>(s.y)] > 0.0) {
                    gb[static_cast<size_t>(rival)] += 1.0;
                    gb[static_cast<size_t>(s.y)] -= 1.0;
                    auto& rrow = gw[static_cast<size_t>(rival)];
                    auto& yrow = gw[static_cast<size_t>(s.y)];
                    for (int d = 0; d < D; ++d) {
                        rrow[static_cast<size_t>(d)] += (*s.x)[static_cast<size_t>(d)];
                        yrow[static_cast<size_t>(d)] -= (*s.x)[static_cast<size_t>(d)];
                    }
                }
            }
        }

        double grad_norm_sq = 0.0;
        for (int c = 0; c < C; ++c) {
            gb[static_cast<size_t>(c)] /= static_cast<double>(m);
            grad_norm_sq += gb[static_cast<size_t>(c)] * gb[static_cast<size_t>(c)];
            auto& row = gw[static_cast<size_t>(c)];
            const auto& w = est.weights[static_cast<size_t>(c)];
            for (int d = 0; d < D; ++d) {
                row[static_cast<size_t>(d)] =
                    row[static_cast<size_t>(d)] / static_cast<double>(m) + l2 * w[static_cast<size_t>(d)];
                grad_norm_sq += row[static_cast<size_t>(d)] * row[static_cast<size_t>(d)];
            }
        }

        est.iterations = iter + 1;
        if (std::sqrt(grad_norm_sq) <= 1e-8) break;

        for (int c = 0; c < C; ++c) {
            est.bias[static_cast<size_t>(c)] -= step * gb[static_cast<size_t>(c)];
            auto& w = est.weights[static_cast<size_t>(c)];
            const auto& row = gw[static_cast<size_t>(c)];
            for (int d = 0; d < D; ++d) {
                w[static_cast<size_t>(d)] -= step * row[static_cast<size_t>(d)];
            }
        }
    }

    est.trained = true;
    return est;
}

PriorField init_priors(const Graph& graph, const Split& split, const PriorEstimator* estimator,
                       const PriorOptions& options) {
    if (estimator && !estimator->trained) {
        throw ValidationError("init_priors: estimator not trained");
    }
    if (options.blend < 0.0 || options.blend > 1.0) {
        throw ValidationError("init_priors: blend outside [0,1]");
    }
    const int C = graph.class_count;
    PriorField field;
    field.class_count = C;
    field.priors.reserve(static_cast<size_t>(graph.node_count));

    rng::Engine gaussian(options.gaussian_seed);
    for (int node = 0; node < graph.node_count; ++node) {
        if (split.contains_labeled(node)) {
            int cls = graph.labels.at(node);
            ProbVector base;
            if (estimator) {
                base = estimator->predict(graph.features.at(node));
            } else {
                base = ProbVector::one_hot(C, cls, options.onehot_smoothing);
            }
            if (options.blend > 0.0) {
                base = blend(ProbVector::one_hot(C, cls), base, options.blend);
            }
            field.priors.push_back(std::move(base));
        } else if (options.unlabeled_init == UnlabeledInit::uniform) {
            field.priors.push_back(ProbVector::uniform(C));
        } else {
            std::vector<double> v(static_cast<size_t>(C));
            for (int c = 0; c < C; ++c) v[static_cast<size_t>(c)] = std::fabs(gaussian.next_normal());
            field.priors.push_back(ProbVector::from_unnormalized(v));
        }
    }
    return field;
}

void write_prior_field(const PriorField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    for (size_t node = 0; node < field.priors.size(); ++node) {
        out << node;
        for (int c = 0; c < field.class_count; ++c) {
            out << ' ' << format_double(field.priors[node](c));
        }
        out << '\n';
    }
}

PriorField read_prior_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    PriorField field;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        long long node;
        if (!(ss >> node) || node != static_cast<long long>(field.priors.size())) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": unexpected node id");
        }
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        if (field.class_count == 0) {
            field.class_count = static_cast<int>(v.size());
        } else if (static_cast<int>(v.size()) != field.class_count) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": class count changed");
        }
        field.priors.push_back(ProbVector(std::move(v)));
    }
    return field;
}

}  // namespace baed
