#pragma once

#include <cstdint>
#include <vector>

#include "mothernets/errors.hpp"

namespace mothernets {

// Row-major dense tensor of rank 1-4.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape[i]; }
    int rank() const { return static_cast<int>(shape.size()); }

    double& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
    double operator()(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& operator()(int i, int j) {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    double operator()(int i, int j) const {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    double& operator()(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double operator()(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double& operator()(int i, int j, int k, int l) {
        return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    double operator()(int i, int j, int k, int l) const {
        return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::int64_t numel(const std::vector<int>& shape);

// Throws NonFiniteValue if any entry is NaN or infinite.
void check_finite(const Tensor& t, const char* where);

} // namespace mothernets
