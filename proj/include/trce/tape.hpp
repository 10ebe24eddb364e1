#pragma once

#include <vector>

#include "trce/tensor.hpp"

namespace trce {

// Reverse-mode autodiff over the op set the toy models need. Ops are recorded
// in topological order as they are built; node values are stored, and
// backward() walks the record in reverse with a fixed accumulation order so
// gradients are deterministic.
class Tape {
public:
    enum class Op : unsigned char {
        Leaf,
        Const,
        Matmul,
        Add,
        Sub,
        Mul,
        Scale,
        AddConst,
        AddBiasRows,
        AddBiasCols,
        Softmax,
        Silu,
        GroupNorm,
        LayerNormRows,
        SumAll,
        MeanAll,
        SumSquares,
        MaxConst,
        Transpose,
        Reshape,
        SliceCols,
        ConcatCols,
        GatherRows,
        Unfold3x3,
        Upsample2x,
        ZeroCols,
    };

    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        Tensor val;
        Tensor aux;
        double p0 = 0.0;
        int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
        std::vector<int> ids;
        bool needs_grad = false;
    };

    int leaf(Tensor value);           // differentiable input
    int constant(Tensor value);       // non-differentiable input

    int matmul(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double c);
    int add_const(int a, double c);
    // mat [R,C] + vec [R], broadcast along columns (channel / conv bias)
    int add_bias_rows(int mat, int vec);
    // mat [R,C] + vec [C], broadcast along rows (linear layer bias)
    int add_bias_cols(int mat, int vec);
    int softmax_lastdim(int a);
    int silu(int a);
    // x [C,K] normalized per group of channels, then per-channel affine
    int group_norm(int x, int gamma, int beta, int groups);
    // x [R,D] normalized per row, affine over the last dim
    int layer_norm_rows(int x, int gamma, int beta);
    int sum_all(int a);
    int mean_all(int a);
    int sum_squares(int a);  // squared L2 norm as a scalar node
    int max_const(int a, double c);
    int transpose(int a);
    int reshape(int a, std::vector<int> shape);
    int slice_cols(int a, int c0, int c1);
    int concat_cols(int a, int b);
    int gather_rows(int table, std::vector<int> ids);
    // x viewed as [C,H,W]; zero padding 1, kernel 3x3, given stride
    int unfold3x3(int x, int c, int h, int w, int stride);
    // nearest-neighbor 2x upsample of x viewed as [C,H,W]
    int upsample2x(int x, int c, int h, int w);
    int zero_cols(int a, int c0, int c1);

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Accumulates gradients for every node on a differentiable path from the
    // scalar loss; leaves not reached keep an empty gradient.
    void backward(int loss);
    bool has_grad(int id) const;
    const Tensor& grad(int id) const;

    // Recomputes a non-leaf node's value from its recorded inputs; used to
    // verify that replaying the tape reproduces recorded values exactly.
    Tensor recompute(int id) const;

private:
    int push(Node n);
    Tensor compute(const Node& n) const;

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

}  // namespace trce
