#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacbound/core/rng.hpp"
#include "pacbound/tensor/tape.hpp"
#include "pacbound/tensor/tensor.hpp"

namespace pacbound {

enum class Activation { Tanh, ReLU, Identity };
enum class OutputLayer { Sigmoid, Identity };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::ReLU: return "relu";
        case Activation::Identity: return "identity";
    }
    return "tanh";
}

inline std::string to_string(OutputLayer o) {
    return o == OutputLayer::Sigmoid ? "sigmoid" : "identity";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::ReLU;
    if (s == "identity") return Activation::Identity;
    throw DegenerateInputError("unknown activation '" + s + "'");
}

inline OutputLayer output_from_string(const std::string& s) {
    if (s == "sigmoid") return OutputLayer::Sigmoid;
    if (s == "identity") return OutputLayer::Identity;
    throw DegenerateInputError("unknown output layer '" + s + "'");
}

struct MlpSpec {
    std::vector<std::size_t> layer_sizes;  // input, hidden..., output
    Activation hidden = Activation::Tanh;
    OutputLayer output = OutputLayer::Sigmoid;

    std::size_t layers() const { return layer_sizes.size() - 1; }
    std::size_t in_dim() const { return layer_sizes.front(); }
    std::size_t out_dim() const { return layer_sizes.back(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
            n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
        return n;
    }

    void validate() const {
        if (layer_sizes.size() < 2) throw DegenerateInputError("network needs >= 2 layers");
        for (std::size_t d : layer_sizes)
            if (d == 0) throw DegenerateInputError("layer sizes must be positive");
    }

    bool operator==(const MlpSpec&) const = default;
};

// Weights are [out,in] row-major; flat layout is per layer: weights then bias.
struct MlpParams {
    MlpSpec spec;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;

    static MlpParams zeros(const MlpSpec& spec) {
        spec.validate();
        MlpParams p;
        p.spec = spec;
        for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
            p.weights.emplace_back(
                std::vector<std::size_t>{spec.layer_sizes[l + 1], spec.layer_sizes[l]});
            p.biases.emplace_back(std::vector<std::size_t>{spec.layer_sizes[l + 1]});
        }
        return p;
    }

    // Gaussian fan-in scaled init; biases start at zero.
    static MlpParams random(const MlpSpec& spec, Rng& rng, double gain = 1.0) {
        MlpParams p = zeros(spec);
        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            const double s = gain / std::sqrt(static_cast<double>(spec.layer_sizes[l]));
            for (std::size_t i = 0; i < p.weights[l].size(); ++i)
                p.weights[l][i] = s * rng.gaussian();
        }
        return p;
    }

    std::size_t param_count() const { return spec.param_count(); }

    std::vector<double> flatten() const {
        std::vector<double> flat;
        flat.reserve(param_count());
        for (std::size_t l = 0; l < weights.size(); ++l) {
            flat.insert(flat.end(), weights[l].data().begin(), weights[l].data().end());
            flat.insert(flat.end(), biases[l].data().begin(), biases[l].data().end());
        }
        return flat;
    }

    static MlpParams unflatten(const MlpSpec& spec, const std::vector<double>& flat) {
        if (flat.size() != spec.param_count())
            throw DegenerateInputError("flat parameter length does not match the architecture");
        MlpParams p = zeros(spec);
        std::size_t off = 0;
        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            for (std::size_t i = 0; i < p.weights[l].size(); ++i) p.weights[l][i] = flat[off++];
            for (std::size_t i = 0; i < p.biases[l].size(); ++i) p.biases[l][i] = flat[off++];
        }
        return p;
    }
};

namespace detail {

inline double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::Identity: return x;
    }
    return x;
}

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double stable_softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

}  // namespace detail

// Plain forward pass, x is [n,in] (or [in] for a single example).
inline Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
    p.spec.validate();
    Tensor h = x.rank() == 1 ? Tensor({1, x.size()}, x.data()) : x;
    const bool single = x.rank() == 1;
    if (h.cols() != p.spec.in_dim())
        throw DegenerateInputError("input width " + std::to_string(h.cols()) +
                                   " does not match network input " +
                                   std::to_string(p.spec.in_dim()));
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const Tensor& W = p.weights[l];
        const Tensor& b = p.biases[l];
        Tensor next({h.rows(), W.rows()});
        for (std::size_t i = 0; i < h.rows(); ++i)
            for (std::size_t o = 0; o < W.rows(); ++o) {
                double acc = b[o];
                for (std::size_t j = 0; j < W.cols(); ++j) acc += W.at(o, j) * h.at(i, j);
                next.at(i, o) = acc;
            }
        const bool last = l + 1 == p.weights.size();
        for (std::size_t i = 0; i < next.size(); ++i) {
            if (!last)
                next[i] = detail::apply_activation(p.spec.hidden, next[i]);
            else if (p.spec.output == OutputLayer::Sigmoid)
                next[i] = detail::stable_sigmoid(next[i]);
        }
        h = std::move(next);
    }
    return single ? Tensor({h.size()}, h.data()) : h;
}

// Taped forward pass with the whole parameter vector as one differentiable
// variable, so the parameters may themselves be another network's output.
// x is [n,in]; the result is [n,out].
inline Var mlp_forward_tape(Tape& tape, const MlpSpec& spec, Var flat_params, Var x) {
    spec.validate();
    if (tape.value(flat_params).size() != spec.param_count())
        throw DegenerateInputError("flat parameter length does not match the architecture");
    if (tape.value(x).rank() != 2 || tape.value(x).cols() != spec.in_dim())
        throw DegenerateInputError("taped input must be [n," + std::to_string(spec.in_dim()) + "]");
    Var flat = tape.value(flat_params).rank() == 1 ? flat_params : tape.flatten(flat_params);
    Var h = x;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
        Var W = tape.reshape(tape.slice(flat, off, out * in), {out, in});
        off += out * in;
        Var b = tape.slice(flat, off, out);
        off += out;
        h = tape.add_row(tape.matmul_nt(h, W), b);
        const bool last = l + 2 == spec.layer_sizes.size();
        if (!last) {
            switch (spec.hidden) {
                case Activation::Tanh: h = tape.tanh(h); break;
                case Activation::ReLU: h = tape.relu(h); break;
                case Activation::Identity: break;
            }
        } else if (spec.output == OutputLayer::Sigmoid) {
            h = tape.sigmoid(h);
        }
    }
    return h;
}

struct WeightFeatures {
    double l1 = 0.0;
    double l2 = 0.0;
    double path_norm = 0.0;
};

// l1/l2 run over weights and biases; the path norm multiplies squared
// weights along every input-output path and excludes biases.
inline WeightFeatures weight_features(const MlpParams& p) {
    WeightFeatures f;
    double sq = 0.0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        for (double w : p.weights[l].data()) {
            f.l1 += std::abs(w);
            sq += w * w;
        }
        for (double b : p.biases[l].data()) {
            f.l1 += std::abs(b);
            sq += b * b;
        }
    }
    f.l2 = std::sqrt(sq);

    std::vector<double> path(p.spec.in_dim(), 1.0);
    for (const Tensor& W : p.weights) {
        std::vector<double> next(W.rows(), 0.0);
        for (std::size_t o = 0; o < W.rows(); ++o)
            for (std::size_t j = 0; j < W.cols(); ++j)
                next[o] += W.at(o, j) * W.at(o, j) * path[j];
        path = std::move(next);
    }
    double total = 0.0;
    for (double v : path) total += v;
    f.path_norm = std::sqrt(total);
    return f;
}

inline nlohmann::json mlp_to_json(const MlpParams& p) {
    nlohmann::json j;
    j["layer_sizes"] = p.spec.layer_sizes;
    j["activation"] = to_string(p.spec.hidden);
    j["output"] = to_string(p.spec.output);
    j["weights"] = nlohmann::json::array();
    j["biases"] = nlohmann::json::array();
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        j["weights"].push_back(p.weights[l].data());
        j["biases"].push_back(p.biases[l].data());
    }
    return j;
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
    MlpSpec spec;
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    spec.hidden = activation_from_string(j.at("activation").get<std::string>());
    if (j.contains("output")) spec.output = output_from_string(j.at("output").get<std::string>());
    spec.validate();
    MlpParams p = MlpParams::zeros(spec);
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    if (jw.size() != p.weights.size() || jb.size() != p.biases.size())
        throw DegenerateInputError("checkpoint layer count does not match layer_sizes");
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        auto w = jw[l].get<std::vector<double>>();
        auto b = jb[l].get<std::vector<double>>();
        if (w.size() != p.weights[l].size() || b.size() != p.biases[l].size())
            throw DegenerateInputError("checkpoint layer shape mismatch at layer " +
                                       std::to_string(l));
        p.weights[l] = Tensor(p.weights[l].shape(), std::move(w));
        p.biases[l] = Tensor(p.biases[l].shape(), std::move(b));
    }
    return p;
}

}  // namespace pacbound
