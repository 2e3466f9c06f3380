#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pacbound/core/errors.hpp"

namespace pacbound {

// Adaptive-moment gradient descent over a flat parameter vector.
struct OptimizerState {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

inline void optimizer_step(OptimizerState& st, std::vector<double>& params,
                           const std::vector<double>& grads) {
    if (params.size() != grads.size())
        throw DegenerateInputError("gradient length does not match parameters");
    if (st.m.empty()) {
        st.m.assign(params.size(), 0.0);
        st.v.assign(params.size(), 0.0);
    }
    if (st.m.size() != params.size())
        throw DegenerateInputError("optimizer state sized for a different parameter vector");
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i] * grads[i];
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

}  // namespace pacbound
