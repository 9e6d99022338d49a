#include "skillrl/tensor.hpp"

#include <cmath>
#include <sstream>

#include "skillrl/errors.hpp"

namespace skillrl::ad {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(std::vector<int> s, std::vector<double> v, bool rg)
    : shape(std::move(s)), values(std::move(v)), requires_grad(rg) {
    if (shape.empty() || shape.size() > 2) {
        throw ShapeError("tensor: rank must be 1 or 2, got shape " + shape_str());
    }
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor: non-positive dimension in " + shape_str());
    }
    if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
        throw ShapeError("tensor: shape " + shape_str() + " does not match value count " +
                         std::to_string(values.size()));
    }
}

Tensor Tensor::zeros(std::vector<int> s, bool rg) {
    std::vector<double> v(static_cast<size_t>(shape_numel(s)), 0.0);
    return Tensor(std::move(s), std::move(v), rg);
}

Tensor Tensor::full(std::vector<int> s, double fill, bool rg) {
    std::vector<double> v(static_cast<size_t>(shape_numel(s)), fill);
    return Tensor(std::move(s), std::move(v), rg);
}

Tensor Tensor::scalar(double v, bool rg) { return Tensor({1}, {v}, rg); }

Tensor Tensor::row(std::vector<double> v, bool rg) {
    int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v), rg);
}

bool Tensor::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return ad::shape_str(shape); }

}  // namespace skillrl::ad
