#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace nesycl {

// Dense row-major tensor of 64-bit reals. `grad` is kept shape-congruent
// with `data` whenever requires_grad is set.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    Tensor() = default;

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        t.data.assign(count(shape), 0.0);
        t.shape = std::move(shape);
        return t;
    }

    static Tensor scalar(double v) {
        Tensor t = zeros({1});
        t.data[0] = v;
        return t;
    }

    static Tensor row(std::vector<double> values) {
        Tensor t;
        t.shape = {1, values.size()};
        t.data = std::move(values);
        return t;
    }

    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values) {
        if (count(shape) != values.size()) throw std::invalid_argument("tensor: shape/data size mismatch");
        Tensor t;
        t.shape = std::move(shape);
        t.data = std::move(values);
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }

    void set_requires_grad(bool on) {
        requires_grad = on;
        if (on)
            grad.assign(data.size(), 0.0);
        else
            grad.clear();
    }

    void zero_grad() {
        if (requires_grad) grad.assign(data.size(), 0.0);
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace nesycl
