#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pacbound/core/errors.hpp"
#include "pacbound/core/rng.hpp"

namespace pacbound {

inline constexpr double kMassTolerance = 1e-9;

// Finite normalized mass function over an enumerable value domain.
// Support order is first-insertion order and is part of the deterministic
// behaviour of every enumerator built on top of this type.
template <typename T>
class MassFunction {
public:
    MassFunction() = default;

    // Masses proportional to the given nonnegative weights.
    static MassFunction normalize(const std::vector<std::pair<T, double>>& weights) {
        double total = 0.0;
        for (const auto& [v, w] : weights) {
            if (w < 0.0 || !std::isfinite(w))
                throw DegenerateInputError("mass weight must be finite and nonnegative");
            total += w;
        }
        if (total <= 0.0) throw DegenerateInputError("all mass weights are zero");
        MassFunction p;
        for (const auto& [v, w] : weights) p.accumulate(v, w / total);
        p.check();
        return p;
    }

    // Masses already summing to 1 (within tolerance).
    static MassFunction from_masses(const std::vector<std::pair<T, double>>& masses) {
        MassFunction p;
        for (const auto& [v, m] : masses) {
            if (m < 0.0 || !std::isfinite(m))
                throw DegenerateInputError("mass must be finite and nonnegative");
            p.accumulate(v, m);
        }
        p.check();
        return p;
    }

    static MassFunction point(const T& v) { return from_masses({{v, 1.0}}); }

    static MassFunction uniform(const std::vector<T>& values) {
        std::vector<std::pair<T, double>> w;
        w.reserve(values.size());
        for (const auto& v : values) w.emplace_back(v, 1.0);
        return normalize(w);
    }

    std::size_t size() const { return support_.size(); }
    const std::vector<T>& support() const { return support_; }
    const std::vector<double>& masses() const { return mass_; }
    const T& value_at(std::size_t i) const { return support_[i]; }
    double mass_at(std::size_t i) const { return mass_[i]; }

    bool contains(const T& v) const { return index_.count(v) > 0; }

    double mass(const T& v) const {
        auto it = index_.find(v);
        return it == index_.end() ? 0.0 : mass_[it->second];
    }

    const T& sample(Rng& rng) const {
        double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < support_.size(); ++i) {
            acc += mass_[i];
            if (u < acc) return support_[i];
        }
        return support_.back();
    }

private:
    void accumulate(const T& v, double m) {
        auto it = index_.find(v);
        if (it == index_.end()) {
            index_.emplace(v, support_.size());
            support_.push_back(v);
            mass_.push_back(m);
        } else {
            mass_[it->second] += m;
        }
    }

    void check() const {
        if (support_.empty()) throw DegenerateInputError("empty mass function");
        double total = 0.0;
        for (double m : mass_) total += m;
        if (std::abs(total - 1.0) > kMassTolerance)
            throw DegenerateInputError("masses do not sum to 1");
    }

    std::vector<T> support_;
    std::vector<double> mass_;
    std::unordered_map<T, std::size_t> index_;
};

// KL(p || q) in nats. Terms with p=0 contribute 0; q=0 where p>0 yields the
// +inf sentinel so bound evaluators can report vacuous totals.
template <typename T>
double kl(const MassFunction<T>& p, const MassFunction<T>& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p.mass_at(i);
        if (pi <= 0.0) continue;
        const double qi = q.mass(p.value_at(i));
        if (qi <= 0.0) return std::numeric_limits<double>::infinity();
        acc += pi * std::log(pi / qi);
    }
    return acc;
}

// Shannon entropy in nats; 0*log 0 = 0.
template <typename T>
double entropy(const MassFunction<T>& p) {
    double acc = 0.0;
    for (double m : p.masses())
        if (m > 0.0) acc -= m * std::log(m);
    return acc;
}

// Total variation distance, support union handled implicitly.
template <typename T>
double tv_distance(const MassFunction<T>& p, const MassFunction<T>& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        acc += std::abs(p.mass_at(i) - q.mass(p.value_at(i)));
    for (std::size_t i = 0; i < q.size(); ++i)
        if (!p.contains(q.value_at(i))) acc += q.mass_at(i);
    return 0.5 * acc;
}

template <typename T>
bool approx_equal(const MassFunction<T>& p, const MassFunction<T>& q, double tol = kMassTolerance) {
    if (tv_distance(p, q) > tol) return false;
    return true;
}

}  // namespace pacbound
