#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacbound/core/errors.hpp"

namespace pacbound {

// The meta-level constants appear in two variants in the source material;
// they differ by log(2M) inside the per-task log. AppendixB is the default.
enum class MetaConstants { AppendixB, MainText };

inline std::string to_string(MetaConstants m) {
    return m == MetaConstants::AppendixB ? "appendix-b" : "main-text";
}

inline MetaConstants meta_constants_from_string(const std::string& s) {
    if (s == "appendix-b") return MetaConstants::AppendixB;
    if (s == "main-text") return MetaConstants::MainText;
    throw ConfigError("unknown meta constants variant: " + s);
}

struct BoundConfig {
    double lambda = 10.0;
    double delta = 0.05;
    std::size_t n = 1;        // training sample count
    double tau = 0.0;         // generalization threshold
    double beta = 1.0;        // privacy temperature
    std::size_t n_aux = 20;   // auxiliary dataset count
    std::size_t m = 0;        // task count, 0 when not meta
    MetaConstants meta = MetaConstants::AppendixB;

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
        if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
        if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0,1]");
        if (n < 1) throw ConfigError("sample count must be at least 1");
        if (beta < 0.0) throw ConfigError("privacy temperature must be nonnegative");
    }

    void require_meta() const {
        validate();
        if (m < 2) throw ConfigError("meta-level constants need at least 2 tasks");
    }

    double confidence_term() const { return std::log(1.0 / delta) / lambda; }
    double concentration_term() const { return lambda / static_cast<double>(n); }

    // Per-task constants for the meta bounds; n_t is that task's sample count.
    double meta_a(std::size_t n_t) const {
        require_meta();
        const double mn = static_cast<double>(m) * static_cast<double>(n_t);
        if (meta == MetaConstants::MainText) return std::log(2.0 * mn / delta);
        return std::log(2.0 * mn * 2.0 * static_cast<double>(m) / delta);
    }
    double meta_b(std::size_t n_t) const {
        if (n_t < 2) throw ConfigError("per-task sample count must be at least 2");
        return 2.0 * (static_cast<double>(n_t) - 1.0);
    }
    double meta_c() const {
        require_meta();
        return std::log(2.0 * static_cast<double>(m) / delta);
    }
    double meta_d() const {
        require_meta();
        return 2.0 * (static_cast<double>(m) - 1.0);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["lambda"] = lambda;
        j["delta"] = delta;
        j["n"] = n;
        j["tau"] = tau;
        j["beta"] = beta;
        j["n_aux"] = n_aux;
        j["m"] = m;
        j["meta_constants"] = to_string(meta);
        return j;
    }

    static BoundConfig from_json(const nlohmann::json& j) {
        BoundConfig c;
        if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
        if (j.contains("delta")) c.delta = j.at("delta").get<double>();
        if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
        if (j.contains("tau")) c.tau = j.at("tau").get<double>();
        if (j.contains("beta")) c.beta = j.at("beta").get<double>();
        if (j.contains("n_aux")) c.n_aux = j.at("n_aux").get<std::size_t>();
        if (j.contains("m")) c.m = j.at("m").get<std::size_t>();
        if (j.contains("meta_constants"))
            c.meta = meta_constants_from_string(j.at("meta_constants").get<std::string>());
        c.validate();
        return c;
    }
};

// Every bound evaluator returns one of these. The entries named in
// `contributions` sum to the total; other entries are informational.
struct BoundReport {
    std::string kind;
    double total = 0.0;
    std::map<std::string, double> terms;
    std::vector<std::string> contributions;
    BoundConfig config;
    std::vector<std::uint64_t> mc_seeds;

    double recombine() const {
        double acc = 0.0;
        for (const auto& name : contributions) {
            auto it = terms.find(name);
            if (it == terms.end())
                throw DegenerateInputError("report lists unknown contribution: " + name);
            acc += it->second;
        }
        return acc;
    }

    void check_decomposition(double tol = 1e-9) const {
        const double r = recombine();
        if (std::isinf(total) && std::isinf(r) && total > 0 && r > 0) return;
        if (!(std::abs(total - r) <= tol))
            throw DegenerateInputError("bound total does not match its term decomposition");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = kind;
        j["total"] = total;
        j["terms"] = terms;
        j["contributions"] = contributions;
        j["config"] = config.to_json();
        j["mc_seeds"] = mc_seeds;
        return j;
    }

    static BoundReport from_json(const nlohmann::json& j) {
        BoundReport r;
        r.kind = j.at("kind").get<std::string>();
        r.total = j.at("total").get<double>();
        r.terms = j.at("terms").get<std::map<std::string, double>>();
        r.contributions = j.at("contributions").get<std::vector<std::string>>();
        r.config = BoundConfig::from_json(j.at("config"));
        if (j.contains("mc_seeds")) r.mc_seeds = j.at("mc_seeds").get<std::vector<std::uint64_t>>();
        return r;
    }
};

}  // namespace pacbound
