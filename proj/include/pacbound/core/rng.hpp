#pragma once

#include <cmath>
#include <cstdint>

namespace pacbound {

// Splittable counter-based generator (splitmix64 core). All randomness in the
// library flows through this type so that runs are reproducible bit-for-bit
// from a single top-level seed, independent of platform library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ kGolden)) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix(state_);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Standard normal via Box-Muller (no cached spare; deterministic draw count).
    double gaussian() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Derive an independent stream without advancing this one.
    Rng split(std::uint64_t stream) const {
        Rng r(0);
        r.state_ = mix(mix(state_ ^ (stream + 1) * kGolden) + kGolden);
        return r;
    }

    std::uint64_t state() const { return state_; }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace pacbound
