#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pacbound/core/rng.hpp"
#include "pacbound/core/term.hpp"

namespace pacbound {

inline constexpr int kBetaBudget = 1 << 20;
inline constexpr int kMaxRunSteps = 64;
inline constexpr long long kEnumerationCap = 1'000'000;

// Sample nodes that share a source object and carry the same label form one
// memoization group: a reduction step assigns the whole group a single draw.
struct MemoKey {
    const void* source;
    std::string label;
    bool operator==(const MemoKey&) const = default;
};

struct MemoKeyHash {
    std::size_t operator()(const MemoKey& k) const {
        return std::hash<const void*>()(k.source) ^ (std::hash<std::string>()(k.label) << 1);
    }
};

struct DrawRecord {
    int node_id;  // smallest node id in the group, stable per program
    Value value;
};

namespace detail {

inline void collect_samples(const TermPtr& t, std::vector<TermPtr>& out,
                            std::unordered_set<const Term*>& seen) {
    if (!seen.insert(t.get()).second) return;
    switch (t->kind()) {
        case Term::Kind::Sample:
            out.push_back(t);
            return;
        case Term::Kind::Constant:
        case Term::Kind::Variable:
            return;
        case Term::Kind::Lambda:
            collect_samples(t->body(), out, seen);
            return;
        case Term::Kind::Apply:
            collect_samples(t->body(), out, seen);
            for (const auto& a : t->args()) collect_samples(a, out, seen);
            return;
        case Term::Kind::Primitive:
            for (const auto& a : t->args()) collect_samples(a, out, seen);
            return;
    }
}

inline void free_vars(const TermPtr& t, std::unordered_set<std::string> bound,
                      std::unordered_set<std::string>& out) {
    switch (t->kind()) {
        case Term::Kind::Constant:
        case Term::Kind::Sample:
            return;
        case Term::Kind::Variable:
            if (!bound.count(t->var_name())) out.insert(t->var_name());
            return;
        case Term::Kind::Lambda: {
            for (const auto& p : t->params()) bound.insert(p);
            free_vars(t->body(), std::move(bound), out);
            return;
        }
        case Term::Kind::Apply:
            free_vars(t->body(), bound, out);
            for (const auto& a : t->args()) free_vars(a, bound, out);
            return;
        case Term::Kind::Primitive:
            for (const auto& a : t->args()) free_vars(a, bound, out);
            return;
    }
}

using Env = std::unordered_map<std::string, TermPtr>;

inline TermPtr substitute(const TermPtr& t, const Env& env) {
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
            Env inner = env;
            for (const auto& p : t->params()) inner.erase(p);
            if (inner.empty()) return t;
            for (const auto& [name, repl] : inner) {
                std::unordered_set<std::string> fv;
                free_vars(repl, {}, fv);
                for (const auto& p : t->params())
                    if (fv.count(p))
                        throw DegenerateInputError(
                            "substitution would capture variable '" + p + "'; rename binders");
            }
            TermPtr body = substitute(t->body(), inner);
            return body == t->body() ? t : Term::lambda(t->params(), body);
        }
        case Term::Kind::Apply: {
            TermPtr fn = substitute(t->body(), env);
            std::vector<TermPtr> args = t->args();
            bool changed = fn != t->body();
            for (auto& a : args) {
                TermPtr next = substitute(a, env);
                changed |= next != a;
                a = next;
            }
            return changed ? Term::apply(fn, std::move(args)) : t;
        }
        case Term::Kind::Primitive: {
            std::vector<TermPtr> args = t->args();
            bool changed = false;
            for (auto& a : args) {
                TermPtr next = substitute(a, env);
                changed |= next != a;
                a = next;
            }
            return changed ? Term::primitive(t->prim(), std::move(args)) : t;
        }
    }
    return t;
}

inline std::optional<TermPtr> reduce_once(const TermPtr& t) {
    switch (t->kind()) {
        case Term::Kind::Constant:
        case Term::Kind::Variable:
        case Term::Kind::Sample:
        case Term::Kind::Lambda:
            return std::nullopt;
        case Term::Kind::Apply: {
            const TermPtr& fn = t->body();
            if (fn->kind() == Term::Kind::Lambda) {
                if (fn->params().size() != t->args().size())
                    throw DegenerateInputError("application arity mismatch: expected " +
                                               std::to_string(fn->params().size()) + ", got " +
                                               std::to_string(t->args().size()));
                Env env;
                for (std::size_t i = 0; i < t->args().size(); ++i)
                    env.emplace(fn->params()[i], t->args()[i]);
                return substitute(fn->body(), env);
            }
            if (auto r = reduce_once(fn)) return Term::apply(*r, t->args());
            for (std::size_t i = 0; i < t->args().size(); ++i) {
                if (auto r = reduce_once(t->args()[i])) {
                    std::vector<TermPtr> args = t->args();
                    args[i] = *r;
                    return Term::apply(fn, std::move(args));
                }
            }
            if (fn->kind() == Term::Kind::Constant)
                throw DegenerateInputError("application of a non-function value");
            return std::nullopt;
        }
        case Term::Kind::Primitive: {
            bool ready = true;
            for (const auto& a : t->args()) ready &= a->kind() == Term::Kind::Constant;
            if (ready) {
                std::vector<Value> vals;
                vals.reserve(t->args().size());
                for (const auto& a : t->args()) vals.push_back(a->constant());
                return Term::constant(t->prim().fn(vals));
            }
            for (std::size_t i = 0; i < t->args().size(); ++i) {
                if (auto r = reduce_once(t->args()[i])) {
                    std::vector<TermPtr> args = t->args();
                    args[i] = *r;
                    return Term::primitive(t->prim(), std::move(args));
                }
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

// Replaces each level-1 sample with its group's drawn constant and lowers
// every deeper sample by one level. Cache keeps shared subtrees shared.
inline TermPtr apply_draws(const TermPtr& t,
                           const std::unordered_map<MemoKey, Value, MemoKeyHash>& draws,
                           std::unordered_map<const Term*, TermPtr>& cache) {
    if (auto it = cache.find(t.get()); it != cache.end()) return it->second;
    TermPtr result;
    switch (t->kind()) {
        case Term::Kind::Constant:
        case Term::Kind::Variable:
            result = t;
            break;
        case Term::Kind::Sample: {
            if (t->level() == 1) {
                MemoKey key{t->source().get(), t->memo_label()};
                auto it = draws.find(key);
                if (it == draws.end())
                    throw DegenerateInputError("sample group missing a draw");
                result = Term::constant(it->second);
            } else {
                result = Term::sample(t->source(), t->level() - 1, t->memo_label());
            }
            break;
        }
        case Term::Kind::Lambda: {
            TermPtr body = apply_draws(t->body(), draws, cache);
            result = body == t->body() ? t : Term::lambda(t->params(), body);
            break;
        }
        case Term::Kind::Apply: {
            TermPtr fn = apply_draws(t->body(), draws, cache);
            std::vector<TermPtr> args = t->args();
            bool changed = fn != t->body();
            for (auto& a : args) {
                TermPtr next = apply_draws(a, draws, cache);
                changed |= next != a;
                a = next;
            }
            result = changed ? Term::apply(fn, std::move(args)) : t;
            break;
        }
        case Term::Kind::Primitive: {
            std::vector<TermPtr> args = t->args();
            bool changed = false;
            for (auto& a : args) {
                TermPtr next = apply_draws(a, draws, cache);
                changed |= next != a;
                a = next;
            }
            result = changed ? Term::primitive(t->prim(), std::move(args)) : t;
            break;
        }
    }
    cache.emplace(t.get(), result);
    return result;
}

struct SampleGroup {
    int rep_id;  // smallest node id among members
    MemoKey key;
    ValueDistPtr source;
};

// Level-1 groups in ascending representative id, so draw order is stable.
inline std::vector<SampleGroup> level_one_groups(const std::vector<TermPtr>& samples) {
    std::unordered_map<MemoKey, std::size_t, MemoKeyHash> index;
    std::vector<SampleGroup> groups;
    for (const auto& s : samples) {
        if (s->level() != 1) continue;
        MemoKey key{s->source().get(), s->memo_label()};
        auto [it, inserted] = index.try_emplace(key, groups.size());
        if (inserted)
            groups.push_back({s->node_id(), key, s->source()});
        else
            groups[it->second].rep_id = std::min(groups[it->second].rep_id, s->node_id());
    }
    std::sort(groups.begin(), groups.end(),
              [](const SampleGroup& a, const SampleGroup& b) { return a.rep_id < b.rep_id; });
    return groups;
}

}  // namespace detail

inline TermPtr beta_reduce(const TermPtr& t, int budget = kBetaBudget) {
    TermPtr cur = t;
    while (auto next = detail::reduce_once(cur)) {
        cur = *next;
        if (--budget <= 0) throw EnumerationLimitError("reduction step budget exceeded");
    }
    return cur;
}

inline bool has_samples(const TermPtr& t) {
    std::vector<TermPtr> samples;
    std::unordered_set<const Term*> seen;
    detail::collect_samples(t, samples, seen);
    return !samples.empty();
}

// One sampling step: draw every level-1 group, lower the rest, reduce.
inline TermPtr run_step(const TermPtr& t, Rng& rng, std::vector<DrawRecord>* trace = nullptr) {
    std::vector<TermPtr> samples;
    std::unordered_set<const Term*> seen;
    detail::collect_samples(t, samples, seen);
    if (samples.empty()) return beta_reduce(t);

    auto groups = detail::level_one_groups(samples);
    std::unordered_map<MemoKey, Value, MemoKeyHash> draws;
    for (const auto& g : groups) {
        Value v = g.source->sample(rng);
        if (trace) trace->push_back({g.rep_id, v});
        draws.emplace(g.key, std::move(v));
    }
    std::unordered_map<const Term*, TermPtr> cache;
    return beta_reduce(detail::apply_draws(t, draws, cache));
}

inline Value run(const TermPtr& t, Rng& rng, std::vector<DrawRecord>* trace = nullptr) {
    TermPtr cur = beta_reduce(t);
    int steps = 0;
    while (has_samples(cur)) {
        if (++steps > kMaxRunSteps) throw EnumerationLimitError("sampling step budget exceeded");
        cur = run_step(cur, rng, trace);
    }
    if (cur->kind() != Term::Kind::Constant)
        throw DegenerateInputError("program is stuck: reduction did not reach a value");
    return cur->constant();
}

inline Value run_with_seed(const TermPtr& t, std::uint64_t seed) {
    Rng rng(seed);
    return run(t, rng);
}

// Raises every sample statement's level, deferring the whole program by
// `delta` reduction steps.
inline TermPtr lift(const TermPtr& t, int delta = 1) {
    if (delta < 0) throw DegenerateInputError("lift delta must be >= 0");
    if (delta == 0) return t;
    struct Rec {
        int delta;
        std::unordered_map<const Term*, TermPtr> cache;
        TermPtr go(const TermPtr& t) {
            if (auto it = cache.find(t.get()); it != cache.end()) return it->second;
            TermPtr result;
            switch (t->kind()) {
                case Term::Kind::Constant:
                case Term::Kind::Variable:
                    result = t;
                    break;
                case Term::Kind::Sample:
                    result = Term::sample(t->source(), t->level() + delta, t->memo_label());
                    break;
                case Term::Kind::Lambda: {
                    TermPtr body = go(t->body());
                    result = body == t->body() ? t : Term::lambda(t->params(), body);
                    break;
                }
                case Term::Kind::Apply: {
                    TermPtr fn = go(t->body());
                    std::vector<TermPtr> args = t->args();
                    bool changed = fn != t->body();
                    for (auto& a : args) {
                        TermPtr next = go(a);
                        changed |= next != a;
                        a = next;
                    }
                    result = changed ? Term::apply(fn, std::move(args)) : t;
                    break;
                }
                case Term::Kind::Primitive: {
                    std::vector<TermPtr> args = t->args();
                    bool changed = false;
                    for (auto& a : args) {
                        TermPtr next = go(a);
                        changed |= next != a;
                        a = next;
                    }
                    result = changed ? Term::primitive(t->prim(), std::move(args)) : t;
                    break;
                }
            }
            cache.emplace(t.get(), result);
            return result;
        }
    };
    Rec rec{delta, {}};
    return rec.go(t);
}

struct ReductionOutcome {
    Value result;
    double probability;
    std::vector<DrawRecord> trace;
};

namespace detail {

template <typename Emit>
inline void enumerate_rec(const TermPtr& t, double prob, std::vector<DrawRecord>& trace,
                          long long& leaves, long long cap, int depth, Emit&& emit) {
    TermPtr cur = beta_reduce(t);
    std::vector<TermPtr> samples;
    std::unordered_set<const Term*> seen;
    collect_samples(cur, samples, seen);
    if (samples.empty()) {
        if (cur->kind() != Term::Kind::Constant)
            throw DegenerateInputError("program is stuck: reduction did not reach a value");
        if (++leaves > cap) throw EnumerationLimitError("outcome enumeration exceeded cap");
        emit(cur->constant(), prob, trace);
        return;
    }
    if (depth >= kMaxRunSteps) throw EnumerationLimitError("sampling step budget exceeded");

    auto groups = level_one_groups(samples);
    std::vector<std::size_t> idx(groups.size(), 0);
    while (true) {
        double p = prob;
        std::unordered_map<MemoKey, Value, MemoKeyHash> draws;
        std::size_t base = trace.size();
        for (std::size_t i = 0; i < groups.size(); ++i) {
            const ValueDist& d = *groups[i].source;
            draws.emplace(groups[i].key, d.support()[idx[i]]);
            trace.push_back({groups[i].rep_id, d.support()[idx[i]]});
            p *= d.masses()[idx[i]];
        }
        if (p > 0) {
            std::unordered_map<const Term*, TermPtr> cache;
            TermPtr next = apply_draws(cur, draws, cache);
            enumerate_rec(next, p, trace, leaves, cap, depth + 1, emit);
        }
        trace.resize(base);

        std::size_t j = 0;
        while (j < idx.size() && ++idx[j] == groups[j].source->size()) idx[j++] = 0;
        if (j == idx.size()) break;
    }
}

}  // namespace detail

// Every reachable (value, probability, draw sequence) triple, in the order
// the odometer over group supports visits them.
inline std::vector<ReductionOutcome> enumerate_outcomes(const TermPtr& t,
                                                        long long cap = kEnumerationCap) {
    std::vector<ReductionOutcome> out;
    std::vector<DrawRecord> trace;
    long long leaves = 0;
    detail::enumerate_rec(t, 1.0, trace, leaves, cap, 0,
                          [&](const Value& v, double p, const std::vector<DrawRecord>& tr) {
                              out.push_back({v, p, tr});
                          });
    return out;
}

// Exact outcome distribution of a program: the inverse of Term::sample, in
// that thunk(sample(d)) recovers d and sampling a thunked program matches
// running the original.
inline ValueDist thunk(const TermPtr& t, long long cap = kEnumerationCap) {
    std::map<Value, double> acc;
    std::vector<DrawRecord> trace;
    long long leaves = 0;
    detail::enumerate_rec(t, 1.0, trace, leaves, cap, 0,
                          [&](const Value& v, double p, const std::vector<DrawRecord>&) {
                              acc[v] += p;
                          });
    if (acc.empty()) throw DegenerateInputError("no outcomes with positive probability");
    std::vector<std::pair<Value, double>> masses;
    masses.reserve(acc.size());
    for (auto& [v, m] : acc) masses.emplace_back(v, m);
    return ValueDist::from_masses(masses);
}

}  // namespace pacbound
