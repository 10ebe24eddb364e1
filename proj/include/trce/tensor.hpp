#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace trce {

// Dense row-major tensor of 64-bit floats. All arithmetic in this project
// runs in double precision with a fixed sequential reduction order, so
// identical inputs give bitwise-identical outputs.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> shape_, std::vector<double> data_);
    explicit Tensor(std::vector<int> shape_);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    static Tensor row(std::vector<double> values);  // shape [1, n]
    static Tensor identity(int n);

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int size(int dim) const { return shape[static_cast<std::size_t>(dim)]; }

    // 2-D accessors
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    Tensor reshaped(std::vector<int> new_shape) const;
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// C = A * B for 2-D tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// a + c * b, the workhorse of guidance arithmetic
Tensor add_scaled(const Tensor& a, const Tensor& b, double c);

double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double frob_norm(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

// Row-wise stable softmax over the last dimension.
Tensor softmax_lastdim(const Tensor& t);

void clamp_(Tensor& t, double lo, double hi);

}  // namespace trce
