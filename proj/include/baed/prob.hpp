#pragma once

#include <stdexcept>
#include <vector>

namespace baed {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};

// Probability distribution over classes: the shared currency of priors,
// posteriors, messages and predictions. Entries are nonnegative and sum
// to 1 within 1e-9.
class ProbVector {
public:
    ProbVector() = default;
    explicit ProbVector(std::vector<double> values);

    static ProbVector uniform(int class_count);
    // (1-smoothing)*onehot + smoothing*uniform
    static ProbVector one_hot(int class_count, int cls, double smoothing = 0.0);
    // Rescales nonnegative weights onto the simplex; throws on an all-zero input.
    static ProbVector from_unnormalized(const std::vector<double>& weights);

    double operator()(int c) const { return values_[static_cast<size_t>(c)]; }
    int size() const { return static_cast<int>(values_.size()); }
    // Smallest index wins ties.
    int argmax() const;
    const std::vector<double>& values() const { return values_; }

    bool operator==(const ProbVector& other) const { return values_ == other.values_; }

private:
    std::vector<double> values_;
};

// lambda*a + (1-lambda)*b
ProbVector blend(const ProbVector& a, const ProbVector& b, double lambda);

struct Prediction {
    int node = -1;
    ProbVector distribution;
    int label = -1;  // argmax of distribution, smallest index on ties
};

Prediction make_prediction(int node, ProbVector distribution);

}  // namespace baed
