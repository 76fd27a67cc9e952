#include "baed/prob.hpp"

#include <cmath>
#include <string>

namespace baed {

namespace {
constexpr double kSimplexTol = 1e-9;
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw ValidationError("ProbVector: empty");
    }
    double sum = 0.0;
    for (double v : values_) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("ProbVector: entry " + std::to_string(v) + " not a probability");
        }
        sum += v;
    }
    if (std::fabs(sum - 1.0) > kSimplexTol) {
        throw ValidationError("ProbVector: entries sum to " + std::to_string(sum));
    }
}

ProbVector ProbVector::uniform(int class_count) {
    if (class_count < 1) {
        throw ValidationError("ProbVector::uniform: class_count < 1");
    }
    ProbVector p;
    p.values_.assign(static_cast<size_t>(class_count), 1.0 / class_count);
    return p;
}

ProbVector ProbVector::one_hot(int class_count, int cls, double smoothing) {
    if (cls < 0 || cls >= class_count) {
        throw ValidationError("ProbVector::one_hot: class out of range");
    }
    if (smoothing < 0.0 || smoothing > 1.0) {
        throw ValidationError("ProbVector::one_hot: smoothing outside [0,1]");
    }
    ProbVector p;
    p.values_.assign(static_cast<size_t>(class_count), smoothing / class_count);
    p.values_[static_cast<size_t>(cls)] += 1.0 - smoothing;
    return p;
}

ProbVector ProbVector::from_unnormalized(const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ValidationError("ProbVector::from_unnormalized: negative or non-finite weight");
        }
        sum += w;
    }
    if (sum <= 0.0) {
        throw ValidationError("ProbVector::from_unnormalized: all-zero weights");
    }
    ProbVector p;
    p.values_.resize(weights.size());
    for (size_t i = 0; i < weights.size(); ++i) {
        p.values_[i] = weights[i] / sum;
    }
    return p;
}

int ProbVector::argmax() const {
    int best = 0;
    for (int c = 1; c < size(); ++c) {
        if (values_[static_cast<size_t>(c)] > values_[static_cast<size_t>(best)]) {
            best = c;
        }
    }
    return best;
}

ProbVector blend(const ProbVector& a, const ProbVector& b, double lambda) {
    if (a.size() != b.size()) {
        throw ValidationError("blend: size mismatch");
    }
    std::vector<double> v(static_cast<size_t>(a.size()));
    for (int c = 0; c < a.size(); ++c) {
        v[static_cast<size_t>(c)] = lambda * a(c) + (1.0 - lambda) * b(c);
    }
    return ProbVector::from_unnormalized(v);
}

Prediction make_prediction(int node, ProbVector distribution) {
    Prediction p;
    p.node = node;
    p.label = distribution.argmax();
    p.distribution = std::move(distribution);
    return p;
}

}  // namespace baed
