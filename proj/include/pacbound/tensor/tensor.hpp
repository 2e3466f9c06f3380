#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pacbound/core/errors.hpp"

namespace pacbound {

// Dense row-major tensor. Rank 1 for vectors and scalars (shape {1}),
// rank 2 for matrices.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_))
            throw DegenerateInputError("tensor data length does not match shape");
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor row(std::vector<double> v) {
        if (v.empty()) throw DegenerateInputError("empty tensor");
        const std::size_t n = v.size();
        return Tensor({n}, std::move(v));
    }
    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> data) {
        return Tensor({r, c}, std::move(data));
    }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }

    std::size_t rows() const { return require_rank2().shape_[0]; }
    std::size_t cols() const { return require_rank2().shape_[1]; }

    double& operator[](std::size_t i) { return data_[i]; }
    const double& operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * require_rank2().shape_[1] + c]; }
    const double& at(std::size_t r, std::size_t c) const {
        return data_[r * require_rank2().shape_[1] + c];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool is_scalar() const { return data_.size() == 1; }
    double scalar_value() const {
        if (!is_scalar()) throw DegenerateInputError("tensor is not a scalar");
        return data_[0];
    }

    bool finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            s += (i ? "x" : "") + std::to_string(shape_[i]);
        return s + "]";
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        if (shape.empty()) throw DegenerateInputError("tensor rank must be >= 1");
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw DegenerateInputError("tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }

    const Tensor& require_rank2() const {
        if (shape_.size() != 2) throw DegenerateInputError("operation needs a rank-2 tensor");
        return *this;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace pacbound
