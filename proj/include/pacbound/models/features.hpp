#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pacbound/core/errors.hpp"
#include "pacbound/models/stochastic.hpp"

namespace pacbound {

struct GFeatureVector {
    double l1 = 0.0;
    double l2 = 0.0;
    double likelihood = 0.0;
    double log_likelihood = 0.0;
    double entropy = 0.0;
    double path_norm = 0.0;

    static constexpr std::size_t kCount = 6;

    Tensor row() const {
        return Tensor::row({l1, l2, likelihood, log_likelihood, entropy, path_norm});
    }

    void validate() const {
        for (double v : {l1, l2, likelihood, log_likelihood, entropy, path_norm})
            if (!std::isfinite(v)) throw DegenerateInputError("feature vector has a non-finite entry");
        if (entropy < 0.0) throw DegenerateInputError("predictive entropy cannot be negative");
    }
};

namespace detail {

inline double binary_entropy_nats(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
    return h;
}

constexpr double kProbFloor = 1e-12;

inline void check_training_set(const Tensor& X, const std::vector<int>& y) {
    if (X.rank() != 2 || X.rows() == 0) throw DegenerateInputError("training set must be nonempty");
    if (y.size() != X.rows()) throw DegenerateInputError("label count does not match row count");
}

inline void fill_predictive_features(GFeatureVector& g, const Tensor& probs,
                                     const std::vector<int>& y) {
    double sum_log = 0.0;
    double sum_h = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p1 = probs[i];
        const double p_true = y[i] == 1 ? p1 : 1.0 - p1;
        sum_log += std::log(std::max(p_true, kProbFloor));
        sum_h += binary_entropy_nats(p1);
    }
    const double n = static_cast<double>(probs.size());
    g.log_likelihood = sum_log / n;
    g.likelihood = std::exp(g.log_likelihood);
    g.entropy = sum_h / n;
}

}  // namespace detail

// Weight features come from the noise-free network at the latent origin;
// likelihood, log-likelihood, and entropy from Monte Carlo predictive
// probabilities on the training set.
inline GFeatureVector extract_g_features(const StochasticClassifier& f1, const Tensor& X,
                                         const std::vector<int>& y, std::size_t n_mc, Rng& rng) {
    f1.validate();
    detail::check_training_set(X, y);
    GFeatureVector g;
    const WeightFeatures wf = weight_features(f1.representative());
    g.l1 = wf.l1;
    g.l2 = wf.l2;
    g.path_norm = wf.path_norm;
    detail::fill_predictive_features(g, predict_prob_batch(f1, X, n_mc, rng), y);
    g.validate();
    return g;
}

inline GFeatureVector extract_g_features(const DeterministicClassifier& f0, const Tensor& X,
                                         const std::vector<int>& y) {
    detail::check_training_set(X, y);
    GFeatureVector g;
    const WeightFeatures wf = weight_features(f0.params);
    g.l1 = wf.l1;
    g.l2 = wf.l2;
    g.path_norm = wf.path_norm;
    detail::fill_predictive_features(g, f0.prob_batch(X), y);
    g.validate();
    return g;
}

}  // namespace pacbound
