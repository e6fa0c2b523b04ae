#include "mothernets/tensor.hpp"

#include <cmath>
#include <string>

namespace mothernets {

std::int64_t numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 1) throw ShapeMismatch("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    if (shape.empty() || shape.size() > 4)
        throw ShapeMismatch("tensor rank must be 1-4, got " + std::to_string(shape.size()));
    data.assign(static_cast<std::size_t>(numel(shape)), 0.0);
}

void check_finite(const Tensor& t, const char* where) {
    for (double v : t.data)
        if (!std::isfinite(v))
            throw NonFiniteValue(std::string("non-finite value in ") + where);
}

} // namespace mothernets
