#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace skillrl::ad {

// Dense row-major array of doubles, rank 1 or 2. All learned math in this
// repository runs at 64-bit precision.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> v, bool rg = false);

    static Tensor zeros(std::vector<int> s, bool rg = false);
    static Tensor full(std::vector<int> s, double v, bool rg = false);
    static Tensor scalar(double v, bool rg = false);
    static Tensor row(std::vector<double> v, bool rg = false);  // rank-1

    int64_t numel() const { return static_cast<int64_t>(values.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    // rank-1 tensors count as a single row
    int rows() const { return rank() == 2 ? shape[0] : 1; }
    int cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 1); }

    double& at(int r, int c) { return values[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;

    std::string shape_str() const;
};

std::string shape_str(const std::vector<int>& shape);
int64_t shape_numel(const std::vector<int>& shape);

}  // namespace skillrl::ad
