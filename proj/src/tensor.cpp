#include "trce/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trce/errors.hpp"

namespace trce {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<int> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape_numel(shape) != data.size())
        throw InvalidArgument("tensor shape " + shape_str(shape) + " does not match buffer size " +
                              std::to_string(data.size()));
}

Tensor::Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
    data.assign(shape_numel(shape), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
    if (shape_numel(new_shape) != data.size())
        throw InvalidArgument("reshape " + shape_str(shape) + " -> " + shape_str(new_shape) +
                              " changes element count");
    return Tensor(std::move(new_shape), data);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw InvalidArgument("matmul shape mismatch " + shape_str(a.shape) + " x " +
                              shape_str(b.shape));
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    const double* pa = a.data.data();
    const double* pb = b.data.data();
    double* pc = c.data.data();
    for (int i = 0; i < m; ++i) {
        double* ci = pc + static_cast<std::size_t>(i) * n;
        const double* ai = pa + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = ai[kk];
            if (aik == 0.0) continue;
            const double* bk = pb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw InvalidArgument("transpose expects a matrix");
    Tensor t({a.cols(), a.rows()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw InvalidArgument(std::string(op) + " shape mismatch " + shape_str(a.shape) + " vs " +
                              shape_str(b.shape));
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Tensor scale(const Tensor& a, double c) {
    Tensor t = a;
    for (double& v : t.data) v *= c;
    return t;
}

Tensor add_scaled(const Tensor& a, const Tensor& b, double c) {
    require_same_shape(a, b, "add_scaled");
    Tensor t = a;
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] += c * b.data[i];
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data) s += v;
    return s;
}

double frob_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

Tensor softmax_lastdim(const Tensor& t) {
    if (t.rank() < 1 || t.numel() == 0)
        throw InvalidArgument("softmax_lastdim: empty tensor");
    const int d = t.shape.back();
    if (d < 1) throw InvalidArgument("softmax_lastdim: last dimension must be >= 1");
    Tensor out = t;
    const std::size_t rows = t.numel() / static_cast<std::size_t>(d);
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = out.data.data() + r * d;
        double mx = p[0];
        for (int i = 1; i < d; ++i) mx = std::max(mx, p[i]);
        double z = 0.0;
        for (int i = 0; i < d; ++i) {
            p[i] = std::exp(p[i] - mx);
            z += p[i];
        }
        for (int i = 0; i < d; ++i) p[i] /= z;
    }
    return out;
}

void clamp_(Tensor& t, double lo, double hi) {
    for (double& v : t.data) v = std::min(hi, std::max(lo, v));
}

}  // namespace trce
