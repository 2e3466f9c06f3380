#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pacbound/core/term.hpp"

namespace pacbound {

// Brute-force distribution oracle, implemented independently of thunk(): an
// eval-style reducer (instead of redex search) and a worklist that resolves
// one sample group at a time (instead of an odometer over all groups of a
// step). Exists so thunk and the Monte Carlo estimators can be checked
// against a second code path.
namespace oracle_detail {

inline TermPtr substitute(const TermPtr& t,
                          const std::unordered_map<std::string, TermPtr>& env) {
    if (env.empty()) return t;
    switch (t->kind()) {
        case Term::Kind::Constant:
        case Term::Kind::Sample:
            return t;
        case Term::Kind::Variable: {
            auto it = env.find(t->var_name());
            return it == env.end() ? t : it->second;
        }
        case Term::Kind::Lambda: {
            auto inner = env;
            for (const auto& p : t->params()) inner.erase(p);
            return Term::lambda(t->params(), substitute(t->body(), inner));
        }
        case Term::Kind::Apply: {
            std::vector<TermPtr> args;
            for (const auto& a : t->args()) args.push_back(substitute(a, env));
            return Term::apply(substitute(t->body(), env), std::move(args));
        }
        case Term::Kind::Primitive: {
            std::vector<TermPtr> args;
            for (const auto& a : t->args()) args.push_back(substitute(a, env));
            return Term::primitive(t->prim(), std::move(args));
        }
    }
    return t;
}

inline TermPtr eval(const TermPtr& t, long long& fuel) {
    if (--fuel <= 0) throw EnumerationLimitError("oracle evaluation fuel exhausted");
    switch (t->kind()) {
        case Term::Kind::Constant:
        case Term::Kind::Variable:
        case Term::Kind::Sample:
        case Term::Kind::Lambda:
            return t;
        case Term::Kind::Apply: {
            TermPtr fn = eval(t->body(), fuel);
            std::vector<TermPtr> args;
            for (const auto& a : t->args()) args.push_back(eval(a, fuel));
            if (fn->kind() == Term::Kind::Lambda) {
                if (fn->params().size() != args.size())
                    throw DegenerateInputError("application arity mismatch");
                std::unordered_map<std::string, TermPtr> env;
                for (std::size_t i = 0; i < args.size(); ++i)
                    env.emplace(fn->params()[i], args[i]);
                return eval(substitute(fn->body(), env), fuel);
            }
            if (fn->kind() == Term::Kind::Constant)
                throw DegenerateInputError("application of a non-function value");
            return Term::apply(fn, std::move(args));
        }
        case Term::Kind::Primitive: {
            std::vector<TermPtr> args;
            bool ready = true;
            for (const auto& a : t->args()) {
                args.push_back(eval(a, fuel));
                ready &= args.back()->kind() == Term::Kind::Constant;
            }
            if (!ready) return Term::primitive(t->prim(), std::move(args));
            std::vector<Value> vals;
            for (const auto& a : args) vals.push_back(a->constant());
            return Term::constant(t->prim().fn(vals));
        }
    }
    return t;
}

inline void find_samples(const TermPtr& t, std::vector<TermPtr>& out,
                         std::unordered_set<const Term*>& seen) {
    if (!seen.insert(t.get()).second) return;
    switch (t->kind()) {
        case Term::Kind::Sample: out.push_back(t); return;
        case Term::Kind::Lambda: find_samples(t->body(), out, seen); return;
        case Term::Kind::Apply:
            find_samples(t->body(), out, seen);
            for (const auto& a : t->args()) find_samples(a, out, seen);
            return;
        case Term::Kind::Primitive:
            for (const auto& a : t->args()) find_samples(a, out, seen);
            return;
        default: return;
    }
}

// Rewrites sample nodes: group members become the drawn constant, or when
// draw == nullptr every node drops one level.
inline TermPtr rewrite_samples(const TermPtr& t, const void* src, const std::string& label,
                               const Value* draw) {
    switch (t->kind()) {
        case Term::Kind::Constant:
        case Term::Kind::Variable:
            return t;
        case Term::Kind::Sample: {
            if (draw == nullptr)
                return Term::sample(t->source(), t->level() - 1, t->memo_label());
            if (t->level() == 1 && t->source().get() == src && t->memo_label() == label)
                return Term::constant(*draw);
            return t;
        }
        case Term::Kind::Lambda:
            return Term::lambda(t->params(), rewrite_samples(t->body(), src, label, draw));
        case Term::Kind::Apply: {
            std::vector<TermPtr> args;
            for (const auto& a : t->args()) args.push_back(rewrite_samples(a, src, label, draw));
            return Term::apply(rewrite_samples(t->body(), src, label, draw), std::move(args));
        }
        case Term::Kind::Primitive: {
            std::vector<TermPtr> args;
            for (const auto& a : t->args()) args.push_back(rewrite_samples(a, src, label, draw));
            return Term::primitive(t->prim(), std::move(args));
        }
    }
    return t;
}

}  // namespace oracle_detail

inline ValueDist exact_distribution_oracle(const TermPtr& root, long long cap = 1'000'000) {
    struct State {
        TermPtr term;
        double prob;
    };
    long long fuel = cap * 64;
    std::vector<State> work{{oracle_detail::eval(root, fuel), 1.0}};
    std::map<Value, double> acc;
    long long leaves = 0;
    while (!work.empty()) {
        State st = work.back();
        work.pop_back();
        std::vector<TermPtr> samples;
        std::unordered_set<const Term*> seen;
        oracle_detail::find_samples(st.term, samples, seen);
        if (samples.empty()) {
            if (st.term->kind() != Term::Kind::Constant)
                throw DegenerateInputError("program is stuck: reduction did not reach a value");
            if (++leaves > cap) throw EnumerationLimitError("oracle outcome cap exceeded");
            acc[st.term->constant()] += st.prob;
            continue;
        }
        TermPtr pick;
        for (const auto& s : samples)
            if (s->level() == 1) {
                pick = s;
                break;
            }
        if (!pick) {
            auto lowered = oracle_detail::rewrite_samples(st.term, nullptr, {}, nullptr);
            work.push_back({oracle_detail::eval(lowered, fuel), st.prob});
            continue;
        }
        for (std::size_t i = 0; i < pick->source()->size(); ++i) {
            const Value& v = pick->source()->value_at(i);
            const double m = pick->source()->mass_at(i);
            if (m <= 0.0) continue;
            auto replaced = oracle_detail::rewrite_samples(st.term, pick->source().get(),
                                                           pick->memo_label(), &v);
            work.push_back({oracle_detail::eval(replaced, fuel), st.prob * m});
        }
    }
    if (acc.empty()) throw DegenerateInputError("no outcomes with positive probability");
    std::vector<std::pair<Value, double>> masses;
    masses.reserve(acc.size());
    for (auto& [v, m] : acc) masses.emplace_back(v, m);
    return ValueDist::from_masses(masses);
}

}  // namespace pacbound
