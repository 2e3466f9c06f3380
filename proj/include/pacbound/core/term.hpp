#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pacbound/core/errors.hpp"
#include "pacbound/core/mass_function.hpp"
#include "pacbound/core/value.hpp"

namespace pacbound {

class Term;
using TermPtr = std::shared_ptr<const Term>;
using ValueDist = MassFunction<Value>;
using ValueDistPtr = std::shared_ptr<const ValueDist>;

struct PrimitiveFn {
    std::string name;
    std::function<Value(const std::vector<Value>&)> fn;
};

// Expression tree with leveled sampling statements. Immutable; reduction
// builds new trees. Sample nodes carry a sampling level (>= 1), the source
// distribution, and an optional memoization label. Nodes sharing a source
// and label form one memo group and receive a single shared draw per
// reduction step; distinct labels (or distinct sources) draw independently.
class Term {
public:
    enum class Kind { Constant, Variable, Lambda, Apply, Primitive, Sample };

    static TermPtr constant(Value v) {
        auto t = make(Kind::Constant);
        t->constant_ = std::move(v);
        return t;
    }

    static TermPtr variable(std::string name) {
        auto t = make(Kind::Variable);
        t->name_ = std::move(name);
        return t;
    }

    static TermPtr lambda(std::vector<std::string> params, TermPtr body) {
        auto t = make(Kind::Lambda);
        t->params_ = std::move(params);
        t->body_ = std::move(body);
        return t;
    }

    static TermPtr apply(TermPtr fn, std::vector<TermPtr> args) {
        auto t = make(Kind::Apply);
        t->body_ = std::move(fn);
        t->args_ = std::move(args);
        return t;
    }

    static TermPtr primitive(PrimitiveFn fn, std::vector<TermPtr> args) {
        auto t = make(Kind::Primitive);
        t->prim_ = std::move(fn);
        t->args_ = std::move(args);
        return t;
    }

    static TermPtr sample(ValueDistPtr source, int level = 1, std::string memo_label = {}) {
        if (level < 1) throw DegenerateInputError("sampling level must be >= 1");
        auto t = make(Kind::Sample);
        t->source_ = std::move(source);
        t->level_ = level;
        t->memo_label_ = std::move(memo_label);
        return t;
    }

    static TermPtr sample(const ValueDist& source, int level = 1, std::string memo_label = {}) {
        return sample(std::make_shared<const ValueDist>(source), level, std::move(memo_label));
    }

    Kind kind() const { return kind_; }
    const Value& constant() const { return constant_; }
    const std::string& var_name() const { return name_; }
    const std::vector<std::string>& params() const { return params_; }
    const TermPtr& body() const { return body_; }  // lambda body or apply fn
    const std::vector<TermPtr>& args() const { return args_; }
    const PrimitiveFn& prim() const { return prim_; }
    const ValueDistPtr& source() const { return source_; }
    int level() const { return level_; }
    const std::string& memo_label() const { return memo_label_; }
    int node_id() const { return node_id_; }

private:
    static std::shared_ptr<Term> make(Kind k) {
        auto t = std::make_shared<Term>(Private{});
        t->kind_ = k;
        return t;
    }

    struct Private {};

public:
    explicit Term(Private) : node_id_(next_id()) {}

private:
    static int next_id() {
        static std::atomic<int> counter{0};
        return counter.fetch_add(1);
    }

    Kind kind_ = Kind::Constant;
    Value constant_;
    std::string name_;
    std::vector<std::string> params_;
    TermPtr body_;
    std::vector<TermPtr> args_;
    PrimitiveFn prim_;
    ValueDistPtr source_;
    int level_ = 0;
    std::string memo_label_;
    int node_id_;
};

// A few standard primitives used by fixture programs.
namespace prims {

inline PrimitiveFn pair2() {
    return {"pair", [](const std::vector<Value>& a) { return Value::tuple({a[0], a[1]}); }};
}

inline PrimitiveFn tuple_n() {
    return {"tuple", [](const std::vector<Value>& a) { return Value::tuple(a); }};
}

inline PrimitiveFn add() {
    return {"add", [](const std::vector<Value>& a) { return Value::real(a[0].numeric() + a[1].numeric()); }};
}

inline PrimitiveFn mul() {
    return {"mul", [](const std::vector<Value>& a) { return Value::real(a[0].numeric() * a[1].numeric()); }};
}

inline PrimitiveFn eq() {
    return {"eq", [](const std::vector<Value>& a) { return Value::boolean(a[0] == a[1]); }};
}

// Strict select: select(c, a, b) = c ? a : b.
inline PrimitiveFn select() {
    return {"select", [](const std::vector<Value>& a) { return a[0].as_bool() ? a[1] : a[2]; }};
}

}  // namespace prims

}  // namespace pacbound
