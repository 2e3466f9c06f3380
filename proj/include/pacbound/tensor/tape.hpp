#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "pacbound/tensor/tensor.hpp"

namespace pacbound {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode differentiation tape over whole-tensor operations. Every op
// validates shapes and rejects non-finite results at record time, so a
// poisoned forward pass fails at the op that produced it rather than at the
// end of training.
class Tape {
public:
    Var input(Tensor t) { return record(std::move(t), {}, nullptr); }

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }
    const Tensor& grad(Var v) const {
        if (grads_.empty()) throw DegenerateInputError("backward() has not run");
        return grads_[check(v)];
    }
    std::size_t node_count() const { return nodes_.size(); }

    Var add(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require_same(ta, tb, "add");
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
        return record(std::move(out), {a, b}, [](Ctx c) {
            c.accumulate(0, c.gout);
            c.accumulate(1, c.gout);
        });
    }

    Var sub(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require_same(ta, tb, "sub");
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
        return record(std::move(out), {a, b}, [](Ctx c) {
            c.accumulate(0, c.gout);
            Tensor neg = c.gout;
            for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -neg[i];
            c.accumulate(1, neg);
        });
    }

    Var mul(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require_same(ta, tb, "mul");
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
        return record(std::move(out), {a, b}, [a, b](Ctx c) {
            const Tensor &va = c.tape->value(a), &vb = c.tape->value(b);
            Tensor ga = c.gout, gb = c.gout;
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] *= vb[i];
                gb[i] *= va[i];
            }
            c.accumulate(0, ga);
            c.accumulate(1, gb);
        });
    }

    Var neg(Var a) { return scale(a, -1.0); }

    Var scale(Var a, double k) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= k;
        return record(std::move(out), {a}, [k](Ctx c) {
            Tensor g = c.gout;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= k;
            c.accumulate(0, g);
        });
    }

    Var shift(Var a, double k) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += k;
        return record(std::move(out), {a}, [](Ctx c) { c.accumulate(0, c.gout); });
    }

    // a [n,k] times b [k,m]
    Var matmul(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
            throw DegenerateInputError("matmul shape mismatch " + ta.shape_str() + " " +
                                       tb.shape_str());
        const std::size_t n = ta.rows(), k = ta.cols(), m = tb.cols();
        Tensor out({n, m});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < k; ++l) {
                const double av = ta.at(i, l);
                if (av == 0.0) continue;
                for (std::size_t j = 0; j < m; ++j) out.at(i, j) += av * tb.at(l, j);
            }
        return record(std::move(out), {a, b}, [a, b, n, k, m](Ctx c) {
            const Tensor &va = c.tape->value(a), &vb = c.tape->value(b);
            Tensor ga({n, k}), gb({k, m});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    const double g = c.gout.at(i, j);
                    if (g == 0.0) continue;
                    for (std::size_t l = 0; l < k; ++l) {
                        ga.at(i, l) += g * vb.at(l, j);
                        gb.at(l, j) += g * va.at(i, l);
                    }
                }
            c.accumulate(0, ga);
            c.accumulate(1, gb);
        });
    }

    // a [n,k] times transpose(b) for b [m,k]
    Var matmul_nt(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols())
            throw DegenerateInputError("matmul_nt shape mismatch " + ta.shape_str() + " " +
                                       tb.shape_str());
        const std::size_t n = ta.rows(), k = ta.cols(), m = tb.rows();
        Tensor out({n, m});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double acc = 0.0;
                for (std::size_t l = 0; l < k; ++l) acc += ta.at(i, l) * tb.at(j, l);
                out.at(i, j) = acc;
            }
        return record(std::move(out), {a, b}, [a, b, n, k, m](Ctx c) {
            const Tensor &va = c.tape->value(a), &vb = c.tape->value(b);
            Tensor ga({n, k}), gb({m, k});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    const double g = c.gout.at(i, j);
                    if (g == 0.0) continue;
                    for (std::size_t l = 0; l < k; ++l) {
                        ga.at(i, l) += g * vb.at(j, l);
                        gb.at(j, l) += g * va.at(i, l);
                    }
                }
            c.accumulate(0, ga);
            c.accumulate(1, gb);
        });
    }

    // broadcast r [m] over the rows of a [n,m]
    Var add_row(Var a, Var r) {
        const Tensor &ta = value(a), &tr = value(r);
        if (ta.rank() != 2 || tr.rank() != 1 || ta.cols() != tr.size())
            throw DegenerateInputError("add_row shape mismatch");
        Tensor out = ta;
        for (std::size_t i = 0; i < ta.rows(); ++i)
            for (std::size_t j = 0; j < ta.cols(); ++j) out.at(i, j) += tr[j];
        return record(std::move(out), {a, r}, [a](Ctx c) {
            const Tensor& va = c.tape->value(a);
            c.accumulate(0, c.gout);
            Tensor gr({va.cols()});
            for (std::size_t i = 0; i < va.rows(); ++i)
                for (std::size_t j = 0; j < va.cols(); ++j) gr[j] += c.gout.at(i, j);
            c.accumulate(1, gr);
        });
    }

    Var tanh(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
        return record_unary_cached(std::move(out), a, [](double y, double) { return 1.0 - y * y; });
    }

    Var sigmoid(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
        return record_unary_cached(std::move(out), a, [](double y, double) { return y * (1.0 - y); });
    }

    Var relu(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
        return record_unary_cached(std::move(out), a,
                                   [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
    }

    Var log(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
        return record_unary_cached(std::move(out), a, [](double, double x) { return 1.0 / x; });
    }

    Var exp(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
        return record_unary_cached(std::move(out), a, [](double y, double) { return y; });
    }

    Var sqrt(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i]);
        return record_unary_cached(std::move(out), a,
                                   [](double y, double) { return 0.5 / y; });
    }

    Var square(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
        return record_unary_cached(std::move(out), a, [](double, double x) { return 2.0 * x; });
    }

    Var softplus(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_softplus(out[i]);
        return record_unary_cached(std::move(out), a,
                                   [](double, double x) { return stable_sigmoid(x); });
    }

    // max(x, floor); gradient is blocked below the floor
    Var clamp_min(Var a, double floor) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], floor);
        return record_unary_cached(std::move(out), a, [floor](double, double x) {
            return x > floor ? 1.0 : 0.0;
        });
    }

    Var sum(Var a) {
        double acc = 0.0;
        for (std::size_t i = 0; i < value(a).size(); ++i) acc += value(a)[i];
        return record(Tensor::scalar(acc), {a}, [a](Ctx c) {
            Tensor g = Tensor::zeros_like(c.tape->value(a));
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = c.gout[0];
            c.accumulate(0, g);
        });
    }

    Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(value(a).size())); }

    Var dot(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        if (ta.size() != tb.size())
            throw DegenerateInputError("dot length mismatch");
        double acc = 0.0;
        for (std::size_t i = 0; i < ta.size(); ++i) acc += ta[i] * tb[i];
        return record(Tensor::scalar(acc), {a, b}, [a, b](Ctx c) {
            const Tensor &va = c.tape->value(a), &vb = c.tape->value(b);
            Tensor ga = Tensor::zeros_like(va), gb = Tensor::zeros_like(vb);
            for (std::size_t i = 0; i < va.size(); ++i) {
                ga[i] = c.gout[0] * vb[i];
                gb[i] = c.gout[0] * va[i];
            }
            c.accumulate(0, ga);
            c.accumulate(1, gb);
        });
    }

    Var reshape(Var a, std::vector<std::size_t> shape) {
        Tensor out(shape, value(a).data());
        return record(std::move(out), {a}, [a](Ctx c) {
            Tensor g(c.tape->value(a).shape(), c.gout.data());
            c.accumulate(0, g);
        });
    }

    Var flatten(Var a) { return reshape(a, {value(a).size()}); }

    Var slice(Var a, std::size_t offset, std::size_t len) {
        const Tensor& ta = value(a);
        if (ta.rank() != 1 || offset + len > ta.size())
            throw DegenerateInputError("slice out of range");
        Tensor out({len});
        for (std::size_t i = 0; i < len; ++i) out[i] = ta[offset + i];
        return record(std::move(out), {a}, [a, offset, len](Ctx c) {
            Tensor g = Tensor::zeros_like(c.tape->value(a));
            for (std::size_t i = 0; i < len; ++i) g[offset + i] = c.gout[i];
            c.accumulate(0, g);
        });
    }

    Var stack(const std::vector<Var>& scalars) {
        if (scalars.empty()) throw DegenerateInputError("stack of nothing");
        Tensor out({scalars.size()});
        for (std::size_t i = 0; i < scalars.size(); ++i) out[i] = value(scalars[i]).scalar_value();
        return record(std::move(out), scalars, [](Ctx c) {
            for (std::size_t i = 0; i < c.input_count(); ++i)
                c.accumulate(i, Tensor::scalar(c.gout[i]));
        });
    }

    Var logsumexp(Var a) {
        const Tensor& ta = value(a);
        double m = ta[0];
        for (std::size_t i = 1; i < ta.size(); ++i) m = std::max(m, ta[i]);
        double acc = 0.0;
        for (std::size_t i = 0; i < ta.size(); ++i) acc += std::exp(ta[i] - m);
        return record(Tensor::scalar(m + std::log(acc)), {a}, [a](Ctx c) {
            const Tensor& va = c.tape->value(a);
            double mm = va[0];
            for (std::size_t i = 1; i < va.size(); ++i) mm = std::max(mm, va[i]);
            double z = 0.0;
            for (std::size_t i = 0; i < va.size(); ++i) z += std::exp(va[i] - mm);
            Tensor g = Tensor::zeros_like(va);
            for (std::size_t i = 0; i < va.size(); ++i)
                g[i] = c.gout[0] * std::exp(va[i] - mm) / z;
            c.accumulate(0, g);
        });
    }

    // elementwise softplus(l) - t*l, the stable negative Bernoulli
    // log-likelihood of targets t under logits l
    Var bce_with_logits(Var logits, const Tensor& targets) {
        const Tensor& tl = value(logits);
        require_same(tl, targets, "bce_with_logits");
        Tensor out = tl;
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = stable_softplus(tl[i]) - targets[i] * tl[i];
        Tensor tcopy = targets;
        return record(std::move(out), {logits}, [logits, tcopy](Ctx c) {
            const Tensor& vl = c.tape->value(logits);
            Tensor g = Tensor::zeros_like(vl);
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] = c.gout[i] * (stable_sigmoid(vl[i]) - tcopy[i]);
            c.accumulate(0, g);
        });
    }

    void backward(Var loss) {
        const Tensor& l = value(loss);
        if (!l.is_scalar()) throw DegenerateInputError("backward needs a scalar loss");
        grads_.clear();
        grads_.reserve(nodes_.size());
        for (const auto& n : nodes_) grads_.push_back(Tensor::zeros_like(n.value));
        grads_[loss.id][0] = 1.0;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            if (!nodes_[i].backward) continue;
            Ctx ctx{this, static_cast<std::size_t>(i)};
            nodes_[i].backward(ctx);
        }
    }

private:
    struct Node;

    struct Ctx {
        Tape* tape;
        std::size_t node;
        const Tensor& gout = tape->grads_[node];

        std::size_t input_count() const { return tape->nodes_[node].inputs.size(); }

        void accumulate(std::size_t input_slot, const Tensor& g) {
            Tensor& target = tape->grads_[tape->nodes_[node].inputs[input_slot].id];
            for (std::size_t i = 0; i < target.size(); ++i) target[i] += g[i];
        }
    };

    struct Node {
        Tensor value;
        std::vector<Var> inputs;
        std::function<void(Ctx)> backward;
    };

    Var record(Tensor value, std::vector<Var> inputs, std::function<void(Ctx)> backward) {
        if (!value.finite())
            throw PoisonedTapeError("non-finite value in forward pass at node " +
                                    std::to_string(nodes_.size()));
        for (Var v : inputs) check(v);
        nodes_.push_back({std::move(value), std::move(inputs), std::move(backward)});
        return {static_cast<int>(nodes_.size()) - 1};
    }

    template <typename DFn>
    Var record_unary_cached(Tensor out, Var a, DFn dfn) {
        return record(std::move(out), {a}, [a, dfn](Ctx c) {
            const Tensor& x = c.tape->value(a);
            const Tensor& y = c.tape->nodes_[c.node].value;
            Tensor g = Tensor::zeros_like(x);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = c.gout[i] * dfn(y[i], x[i]);
            c.accumulate(0, g);
        });
    }

    int check(Var v) const {
        if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
            throw DegenerateInputError("variable does not belong to this tape");
        return v.id;
    }

    static void require_same(const Tensor& a, const Tensor& b, const char* op) {
        if (!a.same_shape(b))
            throw DegenerateInputError(std::string(op) + " shape mismatch " + a.shape_str() +
                                       " vs " + b.shape_str());
    }

    static double stable_sigmoid(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    static double stable_softplus(double x) {
        if (x > 30.0) return x;
        if (x < -30.0) return std::exp(x);
        return std::log1p(std::exp(x));
    }

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

}  // namespace pacbound
