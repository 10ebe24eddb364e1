#include "trce/tape.hpp"

#include <cmath>
#include <string>

#include "trce/errors.hpp"

namespace trce {

namespace {
constexpr double kNormEps = 1e-5;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

int Tape::push(Node n) {
    switch (n.op) {
        case Op::Leaf:
            n.needs_grad = true;
            break;
        case Op::Const:
            n.needs_grad = false;
            break;
        default: {
            bool g = false;
            if (n.a >= 0) g = g || nodes_[n.a].needs_grad;
            if (n.b >= 0) g = g || nodes_[n.b].needs_grad;
            if (n.c >= 0) g = g || nodes_[n.c].needs_grad;
            n.needs_grad = g;
        }
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(value);
    return push(std::move(n));
}

int Tape::constant(Tensor value) {
    Node n;
    n.op = Op::Const;
    n.val = std::move(value);
    return push(std::move(n));
}

Tensor Tape::compute(const Node& n) const {
    const auto val = [&](int id) -> const Tensor& { return nodes_[id].val; };
    switch (n.op) {
        case Op::Leaf:
        case Op::Const:
            return n.val;
        case Op::Matmul:
            return trce::matmul(val(n.a), val(n.b));
        case Op::Add:
            return trce::add(val(n.a), val(n.b));
        case Op::Sub:
            return trce::sub(val(n.a), val(n.b));
        case Op::Mul:
            return trce::mul(val(n.a), val(n.b));
        case Op::Scale:
            return trce::scale(val(n.a), n.p0);
        case Op::AddConst: {
            Tensor out = val(n.a);
            for (double& v : out.data) v += n.p0;
            return out;
        }
        case Op::AddBiasRows: {
            const Tensor& m = val(n.a);
            const Tensor& v = val(n.b);
            Tensor out = m;
            const int rows = m.rows(), cols = m.cols();
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) out.at(r, c) += v.data[r];
            return out;
        }
        case Op::AddBiasCols: {
            const Tensor& m = val(n.a);
            const Tensor& v = val(n.b);
            Tensor out = m;
            const int rows = m.rows(), cols = m.cols();
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) out.at(r, c) += v.data[c];
            return out;
        }
        case Op::Softmax:
            return trce::softmax_lastdim(val(n.a));
        case Op::Silu: {
            Tensor out = val(n.a);
            for (double& v : out.data) v *= sigmoid(v);
            return out;
        }
        case Op::GroupNorm: {
            const Tensor& x = val(n.a);
            const Tensor& gamma = val(n.b);
            const Tensor& beta = val(n.c);
            const int c = x.rows(), k = x.cols(), groups = n.i0;
            const int gc = c / groups;
            Tensor out = x;
            for (int g = 0; g < groups; ++g) {
                const int r0 = g * gc, r1 = r0 + gc;
                const double cnt = static_cast<double>(gc) * k;
                double mean = 0.0;
                for (int r = r0; r < r1; ++r)
                    for (int j = 0; j < k; ++j) mean += x.at(r, j);
                mean /= cnt;
                double var = 0.0;
                for (int r = r0; r < r1; ++r)
                    for (int j = 0; j < k; ++j) {
                        const double d = x.at(r, j) - mean;
                        var += d * d;
                    }
                var /= cnt;
                const double inv = 1.0 / std::sqrt(var + kNormEps);
                for (int r = r0; r < r1; ++r)
                    for (int j = 0; j < k; ++j)
                        out.at(r, j) = gamma.data[r] * ((x.at(r, j) - mean) * inv) + beta.data[r];
            }
            return out;
        }
        case Op::LayerNormRows: {
            const Tensor& x = val(n.a);
            const Tensor& gamma = val(n.b);
            const Tensor& beta = val(n.c);
            const int rows = x.rows(), d = x.cols();
            Tensor out = x;
            for (int r = 0; r < rows; ++r) {
                double mean = 0.0;
                for (int j = 0; j < d; ++j) mean += x.at(r, j);
                mean /= d;
                double var = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dv = x.at(r, j) - mean;
                    var += dv * dv;
                }
                var /= d;
                const double inv = 1.0 / std::sqrt(var + kNormEps);
                for (int j = 0; j < d; ++j)
                    out.at(r, j) = gamma.data[j] * ((x.at(r, j) - mean) * inv) + beta.data[j];
            }
            return out;
        }
        case Op::SumAll:
            return Tensor::scalar(trce::sum(val(n.a)));
        case Op::MeanAll:
            return Tensor::scalar(trce::sum(val(n.a)) / static_cast<double>(val(n.a).numel()));
        case Op::SumSquares:
            return Tensor::scalar(trce::dot(val(n.a), val(n.a)));
        case Op::MaxConst: {
            Tensor out = val(n.a);
            for (double& v : out.data) v = std::max(v, n.p0);
            return out;
        }
        case Op::Transpose:
            return trce::transpose(val(n.a));
        case Op::Reshape:
            return val(n.a).reshaped({n.ids.begin(), n.ids.end()});
        case Op::SliceCols: {
            const Tensor& x = val(n.a);
            Tensor out({x.rows(), n.i1 - n.i0});
            for (int r = 0; r < x.rows(); ++r)
                for (int c = n.i0; c < n.i1; ++c) out.at(r, c - n.i0) = x.at(r, c);
            return out;
        }
        case Op::ConcatCols: {
            const Tensor& x = val(n.a);
            const Tensor& y = val(n.b);
            Tensor out({x.rows(), x.cols() + y.cols()});
            for (int r = 0; r < x.rows(); ++r) {
                for (int c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(r, c);
                for (int c = 0; c < y.cols(); ++c) out.at(r, x.cols() + c) = y.at(r, c);
            }
            return out;
        }
        case Op::GatherRows: {
            const Tensor& t = val(n.a);
            Tensor out({static_cast<int>(n.ids.size()), t.cols()});
            for (std::size_t r = 0; r < n.ids.size(); ++r)
                for (int c = 0; c < t.cols(); ++c)
                    out.at(static_cast<int>(r), c) = t.at(n.ids[r], c);
            return out;
        }
        case Op::Unfold3x3: {
            const Tensor& x = val(n.a);
            const int c = n.i0, h = n.i1, w = n.i2, stride = n.i3;
            const int oh = (h - 1) / stride + 1, ow = (w - 1) / stride + 1;
            Tensor out({c * 9, oh * ow});
            for (int ch = 0; ch < c; ++ch)
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int row = ch * 9 + ky * 3 + kx;
                        for (int oy = 0; oy < oh; ++oy)
                            for (int ox = 0; ox < ow; ++ox) {
                                const int iy = oy * stride + ky - 1;
                                const int ix = ox * stride + kx - 1;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                out.at(row, oy * ow + ox) = x.at(ch, iy * w + ix);
                            }
                    }
            return out;
        }
        case Op::Upsample2x: {
            const Tensor& x = val(n.a);
            const int c = n.i0, h = n.i1, w = n.i2;
            Tensor out({c, 4 * h * w});
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) {
                        const double v = x.at(ch, y * w + xx);
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx)
                                out.at(ch, (2 * y + dy) * 2 * w + 2 * xx + dx) = v;
                    }
            return out;
        }
        case Op::ZeroCols: {
            Tensor out = val(n.a);
            for (int r = 0; r < out.rows(); ++r)
                for (int c = n.i0; c < n.i1; ++c) out.at(r, c) = 0.0;
            return out;
        }
    }
    throw Error("tape: unknown op");
}

#define TRCE_TAPE_BINOP(NAME, OPK)                    \
    int Tape::NAME(int a, int b) {                    \
        Node n;                                       \
        n.op = Op::OPK;                               \
        n.a = a;                                      \
        n.b = b;                                      \
        n.val = compute(n);                           \
        return push(std::move(n));                    \
    }

TRCE_TAPE_BINOP(matmul, Matmul)
TRCE_TAPE_BINOP(add, Add)
TRCE_TAPE_BINOP(sub, Sub)
TRCE_TAPE_BINOP(mul, Mul)
TRCE_TAPE_BINOP(add_bias_rows, AddBiasRows)
TRCE_TAPE_BINOP(add_bias_cols, AddBiasCols)
TRCE_TAPE_BINOP(concat_cols, ConcatCols)
#undef TRCE_TAPE_BINOP

int Tape::scale(int a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.p0 = c;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::add_const(int a, double c) {
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.p0 = c;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::softmax_lastdim(int a) {
    Node n;
    n.op = Op::Softmax;
    n.a = a;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::silu(int a) {
    Node n;
    n.op = Op::Silu;
    n.a = a;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::group_norm(int x, int gamma, int beta, int groups) {
    const Tensor& xv = nodes_[x].val;
    if (xv.rank() != 2 || xv.rows() % groups != 0)
        throw InvalidArgument("group_norm: channels " + std::to_string(xv.rows()) +
                              " not divisible by groups " + std::to_string(groups));
    Node n;
    n.op = Op::GroupNorm;
    n.a = x;
    n.b = gamma;
    n.c = beta;
    n.i0 = groups;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::layer_norm_rows(int x, int gamma, int beta) {
    Node n;
    n.op = Op::LayerNormRows;
    n.a = x;
    n.b = gamma;
    n.c = beta;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::sum_all(int a) {
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::mean_all(int a) {
    Node n;
    n.op = Op::MeanAll;
    n.a = a;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::sum_squares(int a) {
    Node n;
    n.op = Op::SumSquares;
    n.a = a;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::max_const(int a, double c) {
    Node n;
    n.op = Op::MaxConst;
    n.a = a;
    n.p0 = c;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::transpose(int a) {
    Node n;
    n.op = Op::Transpose;
    n.a = a;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::reshape(int a, std::vector<int> shape) {
    Node n;
    n.op = Op::Reshape;
    n.a = a;
    n.ids = std::move(shape);
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::slice_cols(int a, int c0, int c1) {
    Node n;
    n.op = Op::SliceCols;
    n.a = a;
    n.i0 = c0;
    n.i1 = c1;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::gather_rows(int table, std::vector<int> ids) {
    Node n;
    n.op = Op::GatherRows;
    n.a = table;
    n.ids = std::move(ids);
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::unfold3x3(int x, int c, int h, int w, int stride) {
    Node n;
    n.op = Op::Unfold3x3;
    n.a = x;
    n.i0 = c;
    n.i1 = h;
    n.i2 = w;
    n.i3 = stride;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::upsample2x(int x, int c, int h, int w) {
    Node n;
    n.op = Op::Upsample2x;
    n.a = x;
    n.i0 = c;
    n.i1 = h;
    n.i2 = w;
    n.val = compute(n);
    return push(std::move(n));
}

int Tape::zero_cols(int a, int c0, int c1) {
    Node n;
    n.op = Op::ZeroCols;
    n.a = a;
    n.i0 = c0;
    n.i1 = c1;
    n.val = compute(n);
    return push(std::move(n));
}

Tensor Tape::recompute(int id) const { return compute(nodes_[id]); }

bool Tape::has_grad(int id) const {
    return id >= 0 && id < size() && !grads_[id].data.empty();
}

const Tensor& Tape::grad(int id) const {
    if (!has_grad(id)) throw Error("tape: no gradient recorded for node " + std::to_string(id));
    return grads_[id];
}

void Tape::backward(int loss) {
    if (loss < 0 || loss >= size()) throw InvalidArgument("backward: invalid loss node");
    if (nodes_[loss].val.numel() != 1)
        throw InvalidArgument("backward: loss must be scalar, got shape " +
                              shape_str(nodes_[loss].val.shape));

    grads_.assign(nodes_.size(), Tensor{});
    grads_[loss] = Tensor(nodes_[loss].val.shape, {1.0});

    const auto accum = [&](int id, const Tensor& g) {
        if (id < 0 || !nodes_[id].needs_grad) return;
        if (grads_[id].data.empty())
            grads_[id] = g;
        else
            for (std::size_t i = 0; i < g.data.size(); ++i) grads_[id].data[i] += g.data[i];
    };

    for (int id = loss; id >= 0; --id) {
        if (grads_[id].data.empty() || !nodes_[id].needs_grad) continue;
        const Node& n = nodes_[id];
        const Tensor& g = grads_[id];
        switch (n.op) {
            case Op::Leaf:
            case Op::Const:
                break;
            case Op::Matmul: {
                if (nodes_[n.a].needs_grad)
                    accum(n.a, trce::matmul(g, trce::transpose(nodes_[n.b].val)));
                if (nodes_[n.b].needs_grad)
                    accum(n.b, trce::matmul(trce::transpose(nodes_[n.a].val), g));
                break;
            }
            case Op::Add:
                accum(n.a, g);
                accum(n.b, g);
                break;
            case Op::Sub: {
                accum(n.a, g);
                if (nodes_[n.b].needs_grad) accum(n.b, trce::scale(g, -1.0));
                break;
            }
            case Op::Mul: {
                if (nodes_[n.a].needs_grad) accum(n.a, trce::mul(g, nodes_[n.b].val));
                if (nodes_[n.b].needs_grad) accum(n.b, trce::mul(g, nodes_[n.a].val));
                break;
            }
            case Op::Scale:
                accum(n.a, trce::scale(g, n.p0));
                break;
            case Op::AddConst:
                accum(n.a, g);
                break;
            case Op::AddBiasRows: {
                accum(n.a, g);
                if (nodes_[n.b].needs_grad) {
                    Tensor gv(nodes_[n.b].val.shape);
                    for (int r = 0; r < g.rows(); ++r)
                        for (int c = 0; c < g.cols(); ++c) gv.data[r] += g.at(r, c);
                    accum(n.b, gv);
                }
                break;
            }
            case Op::AddBiasCols: {
                accum(n.a, g);
                if (nodes_[n.b].needs_grad) {
                    Tensor gv(nodes_[n.b].val.shape);
                    for (int r = 0; r < g.rows(); ++r)
                        for (int c = 0; c < g.cols(); ++c) gv.data[c] += g.at(r, c);
                    accum(n.b, gv);
                }
                break;
            }
            case Op::Softmax: {
                const Tensor& y = n.val;
                const int d = y.shape.back();
                const std::size_t rows = y.numel() / static_cast<std::size_t>(d);
                Tensor gx = y;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* yp = y.data.data() + r * d;
                    const double* gp = g.data.data() + r * d;
                    double dotv = 0.0;
                    for (int i = 0; i < d; ++i) dotv += yp[i] * gp[i];
                    double* o = gx.data.data() + r * d;
                    for (int i = 0; i < d; ++i) o[i] = yp[i] * (gp[i] - dotv);
                }
                accum(n.a, gx);
                break;
            }
            case Op::Silu: {
                const Tensor& x = nodes_[n.a].val;
                Tensor gx = g;
                for (std::size_t i = 0; i < gx.data.size(); ++i) {
                    const double s = sigmoid(x.data[i]);
                    gx.data[i] *= s * (1.0 + x.data[i] * (1.0 - s));
                }
                accum(n.a, gx);
                break;
            }
            case Op::GroupNorm: {
                const Tensor& x = nodes_[n.a].val;
                const Tensor& gamma = nodes_[n.b].val;
                const int c = x.rows(), k = x.cols(), groups = n.i0;
                const int gc = c / groups;
                Tensor gx(x.shape), ggamma(gamma.shape), gbeta(gamma.shape);
                for (int grp = 0; grp < groups; ++grp) {
                    const int r0 = grp * gc, r1 = r0 + gc;
                    const double cnt = static_cast<double>(gc) * k;
                    double mean = 0.0;
                    for (int r = r0; r < r1; ++r)
                        for (int j = 0; j < k; ++j) mean += x.at(r, j);
                    mean /= cnt;
                    double var = 0.0;
                    for (int r = r0; r < r1; ++r)
                        for (int j = 0; j < k; ++j) {
                            const double d = x.at(r, j) - mean;
                            var += d * d;
                        }
                    var /= cnt;
                    const double inv = 1.0 / std::sqrt(var + kNormEps);
                    double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat * xhat)
                    for (int r = r0; r < r1; ++r)
                        for (int j = 0; j < k; ++j) {
                            const double xh = (x.at(r, j) - mean) * inv;
                            const double dxh = g.at(r, j) * gamma.data[r];
                            m1 += dxh;
                            m2 += dxh * xh;
                            ggamma.data[r] += g.at(r, j) * xh;
                            gbeta.data[r] += g.at(r, j);
                        }
                    m1 /= cnt;
                    m2 /= cnt;
                    for (int r = r0; r < r1; ++r)
                        for (int j = 0; j < k; ++j) {
                            const double xh = (x.at(r, j) - mean) * inv;
                            const double dxh = g.at(r, j) * gamma.data[r];
                            gx.at(r, j) = inv * (dxh - m1 - xh * m2);
                        }
                }
                accum(n.a, gx);
                accum(n.b, ggamma);
                accum(n.c, gbeta);
                break;
            }
            case Op::LayerNormRows: {
                const Tensor& x = nodes_[n.a].val;
                const Tensor& gamma = nodes_[n.b].val;
                const int rows = x.rows(), d = x.cols();
                Tensor gx(x.shape), ggamma(gamma.shape), gbeta(gamma.shape);
                for (int r = 0; r < rows; ++r) {
                    double mean = 0.0;
                    for (int j = 0; j < d; ++j) mean += x.at(r, j);
                    mean /= d;
                    double var = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double dv = x.at(r, j) - mean;
                        var += dv * dv;
                    }
                    var /= d;
                    const double inv = 1.0 / std::sqrt(var + kNormEps);
                    double m1 = 0.0, m2 = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double xh = (x.at(r, j) - mean) * inv;
                        const double dxh = g.at(r, j) * gamma.data[j];
                        m1 += dxh;
                        m2 += dxh * xh;
                        ggamma.data[j] += g.at(r, j) * xh;
                        gbeta.data[j] += g.at(r, j);
                    }
                    m1 /= d;
                    m2 /= d;
                    for (int j = 0; j < d; ++j) {
                        const double xh = (x.at(r, j) - mean) * inv;
                        const double dxh = g.at(r, j) * gamma.data[j];
                        gx.at(r, j) = inv * (dxh - m1 - xh * m2);
                    }
                }
                accum(n.a, gx);
                accum(n.b, ggamma);
                accum(n.c, gbeta);
                break;
            }
            case Op::SumAll: {
                accum(n.a, Tensor::full(nodes_[n.a].val.shape, g.data[0]));
                break;
            }
            case Op::MeanAll: {
                const double s = g.data[0] / static_cast<double>(nodes_[n.a].val.numel());
                accum(n.a, Tensor::full(nodes_[n.a].val.shape, s));
                break;
            }
            case Op::SumSquares: {
                accum(n.a, trce::scale(nodes_[n.a].val, 2.0 * g.data[0]));
                break;
            }
            case Op::MaxConst: {
                const Tensor& x = nodes_[n.a].val;
                Tensor gx = g;
                for (std::size_t i = 0; i < gx.data.size(); ++i)
                    if (!(x.data[i] > n.p0)) gx.data[i] = 0.0;
                accum(n.a, gx);
                break;
            }
            case Op::Transpose:
                accum(n.a, trce::transpose(g));
                break;
            case Op::Reshape:
                accum(n.a, g.reshaped(nodes_[n.a].val.shape));
                break;
            case Op::SliceCols: {
                const Tensor& x = nodes_[n.a].val;
                Tensor gx(x.shape);
                for (int r = 0; r < x.rows(); ++r)
                    for (int c = n.i0; c < n.i1; ++c) gx.at(r, c) = g.at(r, c - n.i0);
                accum(n.a, gx);
                break;
            }
            case Op::ConcatCols: {
                const Tensor& x = nodes_[n.a].val;
                const Tensor& y = nodes_[n.b].val;
                if (nodes_[n.a].needs_grad) {
                    Tensor gx(x.shape);
                    for (int r = 0; r < x.rows(); ++r)
                        for (int c = 0; c < x.cols(); ++c) gx.at(r, c) = g.at(r, c);
                    accum(n.a, gx);
                }
                if (nodes_[n.b].needs_grad) {
                    Tensor gy(y.shape);
                    for (int r = 0; r < y.rows(); ++r)
                        for (int c = 0; c < y.cols(); ++c) gy.at(r, c) = g.at(r, x.cols() + c);
                    accum(n.b, gy);
                }
                break;
            }
            case Op::GatherRows: {
                const Tensor& t = nodes_[n.a].val;
                Tensor gt(t.shape);
                for (std::size_t r = 0; r < n.ids.size(); ++r)
                    for (int c = 0; c < t.cols(); ++c)
                        gt.at(n.ids[r], c) += g.at(static_cast<int>(r), c);
                accum(n.a, gt);
                break;
            }
            case Op::Unfold3x3: {
                const int c = n.i0, h = n.i1, w = n.i2, stride = n.i3;
                const int oh = (h - 1) / stride + 1, ow = (w - 1) / stride + 1;
                Tensor gx(nodes_[n.a].val.shape);
                for (int ch = 0; ch < c; ++ch)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int row = ch * 9 + ky * 3 + kx;
                            for (int oy = 0; oy < oh; ++oy)
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int iy = oy * stride + ky - 1;
                                    const int ix = ox * stride + kx - 1;
                                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                    gx.at(ch, iy * w + ix) += g.at(row, oy * ow + ox);
                                }
                        }
                accum(n.a, gx);
                break;
            }
            case Op::Upsample2x: {
                const int c = n.i0, h = n.i1, w = n.i2;
                Tensor gx(nodes_[n.a].val.shape);
                for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < h; ++y)
                        for (int xx = 0; xx < w; ++xx) {
                            double acc = 0.0;
                            for (int dy = 0; dy < 2; ++dy)
                                for (int dx = 0; dx < 2; ++dx)
                                    acc += g.at(ch, (2 * y + dy) * 2 * w + 2 * xx + dx);
                            gx.at(ch, y * w + xx) = acc;
                        }
                accum(n.a, gx);
                break;
            }
            case Op::ZeroCols: {
                Tensor gx = g;
                for (int r = 0; r < gx.rows(); ++r)
                    for (int c = n.i0; c < n.i1; ++c) gx.at(r, c) = 0.0;
                accum(n.a, gx);
                break;
            }
        }
    }
}

}  // namespace trce
