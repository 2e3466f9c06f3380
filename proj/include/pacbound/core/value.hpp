#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace pacbound {

// Opaque comparable, hashable value for the finite stochastic calculus.
// Reals are snapped to 6 decimal digits so that equality and hashing are
// exact on the discrete representation.
class Value {
public:
    using Tuple = std::vector<Value>;

    Value() : rep_(std::int64_t{0}) {}

    static Value boolean(bool b) { return Value(Rep(b)); }
    static Value integer(std::int64_t i) { return Value(Rep(i)); }
    static Value real(double x) { return Value(Rep(snap(x))); }
    static Value symbol(std::string s) { return Value(Rep(std::move(s))); }
    static Value tuple(Tuple items) { return Value(Rep(std::move(items))); }

    bool is_bool() const { return std::holds_alternative<bool>(rep_); }
    bool is_int() const { return std::holds_alternative<std::int64_t>(rep_); }
    bool is_real() const { return std::holds_alternative<double>(rep_); }
    bool is_symbol() const { return std::holds_alternative<std::string>(rep_); }
    bool is_tuple() const { return std::holds_alternative<Tuple>(rep_); }

    bool as_bool() const { return std::get<bool>(rep_); }
    std::int64_t as_int() const { return std::get<std::int64_t>(rep_); }
    double as_real() const { return std::get<double>(rep_); }
    const std::string& as_symbol() const { return std::get<std::string>(rep_); }
    const Tuple& as_tuple() const { return std::get<Tuple>(rep_); }

    // Numeric view: ints promote to double.
    double numeric() const {
        if (is_int()) return static_cast<double>(as_int());
        return as_real();
    }

    bool operator==(const Value& o) const { return rep_ == o.rep_; }
    bool operator!=(const Value& o) const { return !(*this == o); }
    bool operator<(const Value& o) const { return rep_ < o.rep_; }

    std::size_t hash() const {
        std::size_t h = rep_.index() * 0x9e3779b97f4a7c15ULL;
        std::visit(
            [&h](const auto& v) {
                using V = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<V, Tuple>) {
                    for (const auto& item : v) h = combine(h, item.hash());
                } else if constexpr (std::is_same_v<V, std::string>) {
                    h = combine(h, std::hash<std::string>{}(v));
                } else if constexpr (std::is_same_v<V, double>) {
                    std::uint64_t bits;
                    static_assert(sizeof(bits) == sizeof(v));
                    std::memcpy(&bits, &v, sizeof(bits));
                    h = combine(h, std::hash<std::uint64_t>{}(bits));
                } else {
                    h = combine(h, std::hash<V>{}(v));
                }
            },
            rep_);
        return h;
    }

    std::string str() const {
        std::ostringstream os;
        std::visit(
            [&os](const auto& v) {
                using V = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<V, bool>) {
                    os << (v ? "true" : "false");
                } else if constexpr (std::is_same_v<V, Tuple>) {
                    os << "(";
                    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i].str();
                    os << ")";
                } else {
                    os << v;
                }
            },
            rep_);
        return os.str();
    }

private:
    using Rep = std::variant<bool, std::int64_t, double, std::string, Tuple>;

    explicit Value(Rep r) : rep_(std::move(r)) {}

    static double snap(double x) {
        double s = std::round(x * 1e6) / 1e6;
        if (s == 0.0) s = 0.0;  // normalize -0
        return s;
    }

    static std::size_t combine(std::size_t a, std::size_t b) {
        return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    }

    Rep rep_;
};

}  // namespace pacbound

template <>
struct std::hash<pacbound::Value> {
    std::size_t operator()(const pacbound::Value& v) const { return v.hash(); }
};
