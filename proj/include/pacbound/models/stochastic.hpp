#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacbound/core/errors.hpp"
#include "pacbound/core/rng.hpp"
#include "pacbound/tensor/mlp.hpp"
#include "pacbound/tensor/tape.hpp"

namespace pacbound {

// What the g networks consume: the 6 summary features, or the raw flattened
// base-network weight vector.
enum class GInputMode { Features, RawTheta };

inline std::string to_string(GInputMode m) {
    return m == GInputMode::Features ? "features" : "raw-theta";
}

inline GInputMode g_input_from_string(const std::string& s) {
    if (s == "features") return GInputMode::Features;
    if (s == "raw-theta") return GInputMode::RawTheta;
    throw ConfigError("unknown g input mode: " + s);
}

struct DeterministicClassifier {
    MlpParams params;

    double prob(const Tensor& x) const { return mlp_forward(params, x)[0]; }
    Tensor prob_batch(const Tensor& X) const { return mlp_forward(params, X); }
    int label(const Tensor& x) const { return prob(x) >= 0.5 ? 1 : 0; }

    double logit(const Tensor& x) const {
        MlpParams raw = params;
        raw.spec.output = OutputLayer::Identity;
        return mlp_forward(raw, x)[0];
    }
};

// Base-network weights are produced by a hypernetwork applied to a standard
// normal latent, plus isotropic noise of scale sigma.
struct StochasticClassifier {
    MlpSpec base;
    MlpParams hyper;
    double sigma = 0.1;

    std::size_t latent_dim() const { return hyper.spec.in_dim(); }

    void validate() const {
        base.validate();
        hyper.spec.validate();
        if (hyper.spec.out_dim() != base.param_count())
            throw ConfigError("hypernet output " + std::to_string(hyper.spec.out_dim()) +
                              " does not match base parameter count " +
                              std::to_string(base.param_count()));
        if (hyper.spec.output != OutputLayer::Identity)
            throw ConfigError("hypernet must have an identity output layer");
        if (sigma < 0.0) throw ConfigError("noise scale must be nonnegative");
    }

    // Linear hypernet by default; pass hidden sizes for a deeper one.
    static StochasticClassifier init(MlpSpec base_spec, std::size_t d, double sigma, Rng& rng,
                                     const std::vector<std::size_t>& hyper_hidden = {},
                                     double gain = 1.0) {
        MlpSpec hs;
        hs.layer_sizes.push_back(d);
        for (auto h : hyper_hidden) hs.layer_sizes.push_back(h);
        hs.layer_sizes.push_back(base_spec.param_count());
        hs.output = OutputLayer::Identity;
        StochasticClassifier f{std::move(base_spec), MlpParams::random(hs, rng, gain), sigma};
        f.validate();
        return f;
    }

    // The noise-free network at the latent origin, used as the deterministic
    // representative for weight-based features.
    MlpParams representative() const {
        Tensor z({latent_dim()});
        Tensor flat = mlp_forward(hyper, z);
        return MlpParams::unflatten(base, std::vector<double>(flat.data().begin(), flat.data().end()));
    }
};

struct HyperModel {
    MlpSpec base;
    MlpSpec hyper1;
    MlpParams hyper2;
    double sigma1 = 0.1;
    double sigma2 = 0.1;

    std::size_t latent_dim2() const { return hyper2.spec.in_dim(); }

    void validate() const {
        base.validate();
        hyper1.validate();
        hyper2.spec.validate();
        if (hyper1.out_dim() != base.param_count())
            throw ConfigError("level-1 hypernet output does not match base parameter count");
        if (hyper1.output != OutputLayer::Identity || hyper2.spec.output != OutputLayer::Identity)
            throw ConfigError("hypernets must have identity output layers");
        if (hyper2.spec.out_dim() != hyper1.param_count())
            throw ConfigError("level-2 hypernet output does not match level-1 parameter count");
        if (sigma1 < 0.0 || sigma2 < 0.0) throw ConfigError("noise scales must be nonnegative");
    }

    static HyperModel init(MlpSpec base_spec, std::size_t d, double sigma, Rng& rng,
                           double gain = 1.0) {
        MlpSpec h1;
        h1.layer_sizes = {d, base_spec.param_count()};
        h1.output = OutputLayer::Identity;
        MlpSpec h2;
        h2.layer_sizes = {d, h1.param_count()};
        h2.output = OutputLayer::Identity;
        HyperModel f{std::move(base_spec), std::move(h1), MlpParams::random(h2, rng, gain),
                     sigma, sigma};
        f.validate();
        return f;
    }
};

// Diagonal Gaussian over the flattened base-network weights.
struct GaussianClassifier {
    MlpSpec base;
    std::vector<double> mean;
    std::vector<double> std_dev;

    void validate() const {
        base.validate();
        if (mean.size() != base.param_count() || std_dev.size() != base.param_count())
            throw ConfigError("gaussian parameter vectors must match the base parameter count");
        for (double s : std_dev)
            if (!(s > 0.0)) throw ConfigError("gaussian stds must be positive");
    }

    static GaussianClassifier standard(MlpSpec base_spec) {
        const std::size_t p = base_spec.param_count();
        return {std::move(base_spec), std::vector<double>(p, 0.0), std::vector<double>(p, 1.0)};
    }

    static GaussianClassifier at(const MlpParams& center, double s) {
        auto flat = center.flatten();
        return {center.spec, flat, std::vector<double>(flat.size(), s)};
    }
};

struct LatentDraw {
    Tensor z;    // [1,d]
    Tensor eps;  // [p], unit scale
};

inline LatentDraw draw_latent(std::size_t d, std::size_t p, Rng& rng) {
    Tensor z({1, d});
    for (std::size_t i = 0; i < d; ++i) z[i] = rng.gaussian();
    Tensor eps({p});
    for (std::size_t i = 0; i < p; ++i) eps[i] = rng.gaussian();
    return {std::move(z), std::move(eps)};
}

inline DeterministicClassifier realize(const StochasticClassifier& f1, const Tensor& z,
                                       const Tensor& eps) {
    Tensor flat = mlp_forward(f1.hyper, z.rank() == 2 ? Tensor({z.size()}, z.data()) : z);
    std::vector<double> theta(flat.data().begin(), flat.data().end());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += f1.sigma * eps[i];
    return {MlpParams::unflatten(f1.base, theta)};
}

inline DeterministicClassifier sample_classifier(const StochasticClassifier& f1, Rng& rng) {
    f1.validate();
    auto nd = draw_latent(f1.latent_dim(), f1.base.param_count(), rng);
    return realize(f1, nd.z, nd.eps);
}

inline DeterministicClassifier sample_gaussian(const GaussianClassifier& g, Rng& rng) {
    g.validate();
    std::vector<double> theta(g.mean.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        theta[i] = g.mean[i] + g.std_dev[i] * rng.gaussian();
    return {MlpParams::unflatten(g.base, theta)};
}

inline StochasticClassifier sample_hyper(const HyperModel& f2, Rng& rng) {
    f2.validate();
    Tensor z({f2.latent_dim2()});
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.gaussian();
    Tensor flat = mlp_forward(f2.hyper2, z);
    std::vector<double> theta1(flat.data().begin(), flat.data().end());
    for (std::size_t i = 0; i < theta1.size(); ++i) theta1[i] += f2.sigma2 * rng.gaussian();
    return {f2.base, MlpParams::unflatten(f2.hyper1, theta1), f2.sigma1};
}

inline double predict_prob(const StochasticClassifier& f1, const Tensor& x, std::size_t n_mc,
                           Rng& rng) {
    if (n_mc < 1) throw ConfigError("n_mc must be at least 1");
    double acc = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) acc += sample_classifier(f1, rng).prob(x);
    return acc / static_cast<double>(n_mc);
}

// Batched variant: one weight draw classifies every row, repeated n_mc times.
inline Tensor predict_prob_batch(const StochasticClassifier& f1, const Tensor& X, std::size_t n_mc,
                                 Rng& rng) {
    if (n_mc < 1) throw ConfigError("n_mc must be at least 1");
    Tensor acc({X.rows()});
    for (std::size_t i = 0; i < n_mc; ++i) {
        Tensor p = sample_classifier(f1, rng).prob_batch(X);
        for (std::size_t r = 0; r < acc.size(); ++r) acc[r] += p[r];
    }
    for (std::size_t r = 0; r < acc.size(); ++r) acc[r] /= static_cast<double>(n_mc);
    return acc;
}

inline double conditional_loglik(const StochasticClassifier& f1, const Tensor& x, int y,
                                 const Tensor& gamma, Rng& rng) {
    f1.validate();
    if (gamma.size() != f1.latent_dim())
        throw DegenerateInputError("latent point dimension mismatch");
    Tensor eps({f1.base.param_count()});
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.gaussian();
    const double l = realize(f1, gamma, eps).logit(x);
    return y == 1 ? -detail::stable_softplus(-l) : -detail::stable_softplus(l);
}

inline double gaussian_kl(const GaussianClassifier& q, const GaussianClassifier& p) {
    q.validate();
    p.validate();
    if (q.mean.size() != p.mean.size())
        throw DegenerateInputError("gaussian dimension mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < q.mean.size(); ++i) {
        const double vq = q.std_dev[i] * q.std_dev[i];
        const double vp = p.std_dev[i] * p.std_dev[i];
        const double dm = q.mean[i] - p.mean[i];
        kl += std::log(p.std_dev[i] / q.std_dev[i]) + (vq + dm * dm) / (2.0 * vp) - 0.5;
    }
    return kl;
}

// Taped base-weight realization: hypernet forward at a fixed latent draw plus
// the fixed scaled noise, differentiable in the flat hypernet parameters.
inline Var theta0_on_tape(Tape& tape, const MlpSpec& hyper_spec, Var theta1,
                          const LatentDraw& nd, double sigma) {
    Var h = mlp_forward_tape(tape, hyper_spec, theta1, tape.input(nd.z));
    Var flat = tape.flatten(h);
    if (sigma > 0.0) {
        Tensor scaled({nd.eps.size()});
        for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = sigma * nd.eps[i];
        flat = tape.add(flat, tape.input(scaled));
    }
    return flat;
}

inline Var base_logits_on_tape(Tape& tape, const MlpSpec& base, Var theta0, const Tensor& X) {
    MlpSpec raw = base;
    raw.output = OutputLayer::Identity;
    return mlp_forward_tape(tape, raw, theta0, tape.input(X));
}

inline nlohmann::json spec_to_json(const MlpSpec& s) {
    nlohmann::json j;
    j["layer_sizes"] = s.layer_sizes;
    j["activation"] = to_string(s.hidden);
    j["output"] = to_string(s.output);
    return j;
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
    MlpSpec s;
    s.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    s.hidden = activation_from_string(j.at("activation").get<std::string>());
    if (j.contains("output")) s.output = output_from_string(j.at("output").get<std::string>());
    s.validate();
    return s;
}

inline nlohmann::json model_to_json(const StochasticClassifier& f1) {
    nlohmann::json j = mlp_to_json(f1.hyper);
    j["kind"] = "f1";
    j["d"] = f1.latent_dim();
    j["sigma"] = f1.sigma;
    j["base_spec"] = spec_to_json(f1.base);
    return j;
}

inline nlohmann::json model_to_json(const HyperModel& f2) {
    nlohmann::json j = mlp_to_json(f2.hyper2);
    j["kind"] = "f2";
    j["d"] = f2.latent_dim2();
    j["sigma"] = f2.sigma1;
    j["sigma2"] = f2.sigma2;
    j["base_spec"] = spec_to_json(f2.base);
    j["hyper1_spec"] = spec_to_json(f2.hyper1);
    return j;
}

inline nlohmann::json model_to_json(const GaussianClassifier& g) {
    nlohmann::json j;
    j["kind"] = "gaussian";
    j["base_spec"] = spec_to_json(g.base);
    j["mean"] = g.mean;
    j["std"] = g.std_dev;
    return j;
}

namespace detail {
inline void require_kind(const nlohmann::json& j, const std::string& kind) {
    if (!j.contains("kind") || j.at("kind").get<std::string>() != kind)
        throw ConfigError("checkpoint kind is not '" + kind + "'");
}
}  // namespace detail

inline StochasticClassifier f1_from_json(const nlohmann::json& j) {
    detail::require_kind(j, "f1");
    StochasticClassifier f{spec_from_json(j.at("base_spec")), mlp_from_json(j),
                           j.at("sigma").get<double>()};
    f.validate();
    return f;
}

inline HyperModel f2_from_json(const nlohmann::json& j) {
    detail::require_kind(j, "f2");
    HyperModel f{spec_from_json(j.at("base_spec")), spec_from_json(j.at("hyper1_spec")),
                 mlp_from_json(j), j.at("sigma").get<double>(), j.at("sigma2").get<double>()};
    f.validate();
    return f;
}

inline GaussianClassifier gaussian_from_json(const nlohmann::json& j) {
    detail::require_kind(j, "gaussian");
    GaussianClassifier g{spec_from_json(j.at("base_spec")),
                         j.at("mean").get<std::vector<double>>(),
                         j.at("std").get<std::vector<double>>()};
    g.validate();
    return g;
}

}  // namespace pacbound
