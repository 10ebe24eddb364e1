#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "test_util.hpp"
#include "trce/adam.hpp"
#include "trce/errors.hpp"
#include "trce/linalg.hpp"
#include "trce/rng.hpp"
#include "trce/tape.hpp"
#include "trce/tensor.hpp"

using namespace trce;
using test::fd_gradient;
using test::random_spd;
using test::random_tensor;
using test::rel_error;

namespace {

// Long-double softmax, the high-precision reference for the row checks.
std::vector<double> softmax_ref(const std::vector<double>& row) {
    long double mx = row[0];
    for (double v : row) mx = std::max<long double>(mx, v);
    long double z = 0.0L;
    std::vector<long double> e(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
        e[i] = expl(static_cast<long double>(row[i]) - mx);
        z += e[i];
    }
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = static_cast<double>(e[i] / z);
    return out;
}

// Gauss-Jordan inverse with full pivoting in long double; test-only oracle.
std::vector<long double> gj_inverse(std::vector<long double> a, int n) {
    std::vector<long double> inv(n * n, 0.0L);
    for (int i = 0; i < n; ++i) inv[i * n + i] = 1.0L;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (fabsl(a[r * n + col]) > fabsl(a[piv * n + col])) piv = r;
        for (int j = 0; j < n; ++j) {
            std::swap(a[col * n + j], a[piv * n + j]);
            std::swap(inv[col * n + j], inv[piv * n + j]);
        }
        const long double d = a[col * n + col];
        for (int j = 0; j < n; ++j) {
            a[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const long double f = a[r * n + col];
            for (int j = 0; j < n; ++j) {
                a[r * n + j] -= f * a[col * n + j];
                inv[r * n + j] -= f * inv[col * n + j];
            }
        }
    }
    return inv;
}

// X = B * A^{-1} computed entirely in long double.
Tensor solve_right_oracle(const Tensor& a, const Tensor& b) {
    const int d = a.rows(), k = b.rows();
    std::vector<long double> al(d * d);
    for (int i = 0; i < d * d; ++i) al[i] = a.data[i];
    const auto inv = gj_inverse(al, d);
    Tensor x({k, d});
    for (int r = 0; r < k; ++r)
        for (int j = 0; j < d; ++j) {
            long double acc = 0.0L;
            for (int m = 0; m < d; ++m)
                acc += static_cast<long double>(b.at(r, m)) * inv[m * d + j];
            x.at(r, j) = static_cast<double>(acc);
        }
    return x;
}

}  // namespace

TEST_CASE("softmax symmetry and stability") {
    Tensor t = softmax_lastdim(Tensor::row({0.0, 0.0}));
    CHECK(t.data[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(t.data[1] == doctest::Approx(0.5).epsilon(1e-15));

    Tensor big = softmax_lastdim(Tensor::row({1000.0, 1000.0, 1000.0}));
    for (double v : big.data) {
        CHECK(std::isfinite(v));
        CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
}

TEST_CASE("softmax matches high-precision reference and rows sum to 1") {
    Rng rng(42);
    Tensor x = random_tensor({4, 8}, rng, 3.0);
    Tensor y = softmax_lastdim(x);
    for (int r = 0; r < 4; ++r) {
        std::vector<double> row(8), ref;
        for (int c = 0; c < 8; ++c) row[c] = x.at(r, c);
        ref = softmax_ref(row);
        double s = 0.0;
        for (int c = 0; c < 8; ++c) {
            CHECK(std::abs(y.at(r, c) - ref[c]) <= 1e-12);
            s += y.at(r, c);
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(softmax_lastdim(Tensor({0, 4})), InvalidArgument);
}

TEST_CASE("solve_right identity and diagonal") {
    Rng rng(7);
    Tensor b = random_tensor({2, 4}, rng);
    SolveResult r = solve_right(Tensor::identity(4), b);
    CHECK(max_abs_diff(r.x, b) <= 1e-14);
    CHECK_FALSE(r.ridge_applied);

    Tensor a({2, 2}, {2.0, 0.0, 0.0, 4.0});
    Tensor b2({1, 2}, {2.0, 4.0});
    SolveResult r2 = solve_right(a, b2);
    CHECK(r2.x.at(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r2.x.at(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("solve_right matches long-double oracle and residual bound holds") {
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 8;
        Tensor a = random_tensor({d, d}, rng);
        for (int i = 0; i < d; ++i) a.at(i, i) += 8.0;  // keep conditioning mild
        Tensor b = random_tensor({3, d}, rng);
        SolveResult r = solve_right(a, b);
        Tensor resid = sub(matmul(r.x, a), b);
        CHECK(frob_norm(resid) <= 1e-9 * frob_norm(b));
        Tensor ref = solve_right_oracle(a, b);
        CHECK(max_abs_diff(r.x, ref) <= 1e-9 * std::max(1.0, max_abs(ref)));
    }
}

TEST_CASE("solve_right singular handling") {
    Tensor zero({3, 3});
    Tensor b({1, 3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(solve_right(zero, b), SingularSystemError);
    try {
        solve_right(zero, b);
    } catch (const SingularSystemError& e) {
        CHECK(e.condition_estimate > 1e12);
    }

    // rank-deficient but fixable by the ridge fallback
    Tensor a({2, 2}, {1.0, 0.0, 0.0, 0.0});
    Tensor b2({1, 2}, {1.0, 0.0});
    SolveResult r = solve_right(a, b2);
    CHECK(r.ridge_applied);
    CHECK(r.x.all_finite());
    CHECK(r.x.at(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sym_psd_sqrt identity, diagonal, random PSD") {
    Tensor r = sym_psd_sqrt(Tensor::identity(3));
    CHECK(max_abs_diff(r, Tensor::identity(3)) <= 1e-12);

    Tensor d({2, 2}, {4.0, 0.0, 0.0, 9.0});
    Tensor rd = sym_psd_sqrt(d);
    CHECK(rd.at(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rd.at(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::abs(rd.at(0, 1)) <= 1e-12);

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor g = random_tensor({6, 6}, rng);
        Tensor s = matmul(transpose(g), g);
        Tensor root = sym_psd_sqrt(s);
        CHECK(frob_norm(sub(matmul(root, root), s)) <= 1e-8 * (1.0 + frob_norm(s)));
        // result symmetric with nonnegative spectrum
        CHECK(max_abs_diff(root, transpose(root)) <= 1e-10);
        Tensor vals, vecs;
        sym_eig(root, vals, vecs);
        for (double v : vals.data) CHECK(v >= -1e-9);
    }

    Tensor asym({2, 2}, {1.0, 0.5, -0.5, 1.0});
    CHECK_THROWS_AS(sym_psd_sqrt(asym), InvalidArgument);
}

namespace {

// Builds `loss = sum(op_output * weights)` and compares tape gradients of
// every leaf against central finite differences.
void gradcheck(const std::function<int(Tape&, const std::vector<int>&)>& build,
               std::vector<Tensor> leaves, double h = 1e-5, double tol = 1e-6) {
    Tape tape;
    std::vector<int> ids;
    for (const Tensor& t : leaves) ids.push_back(tape.leaf(t));
    const int out = build(tape, ids);
    Rng wrng(999);
    Tensor w = random_tensor(tape.value(out).shape, wrng);
    const int loss = tape.sum_all(tape.mul(out, tape.constant(w)));
    tape.backward(loss);

    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const auto f = [&](const std::vector<double>& x) {
            std::vector<Tensor> pert = leaves;
            pert[li].data = x;
            Tape t2;
            std::vector<int> ids2;
            for (const Tensor& t : pert) ids2.push_back(t2.leaf(t));
            const int out2 = build(t2, ids2);
            return dot(t2.value(out2), w);
        };
        const auto fd = fd_gradient(f, leaves[li].data, h);
        REQUIRE(tape.has_grad(ids[li]));
        CHECK(rel_error(tape.grad(ids[li]).data, fd) <= tol);
    }
}

}  // namespace

TEST_CASE("backward basics") {
    // x^2 at x = 3
    Tape tape;
    int x = tape.leaf(Tensor::scalar(3.0));
    int loss = tape.sum_all(tape.mul(x, x));
    tape.backward(loss);
    CHECK(tape.grad(x).data[0] == doctest::Approx(6.0).epsilon(1e-14));

    // non-scalar loss rejected
    Tape t2;
    int a = t2.leaf(Tensor::row({1.0, 2.0}));
    CHECK_THROWS_AS(t2.backward(a), InvalidArgument);
}

TEST_CASE("backward sum(A*B) matches finite differences") {
    Rng rng(11);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    Tape tape;
    int ia = tape.leaf(a), ib = tape.leaf(b);
    int loss = tape.sum_all(tape.matmul(ia, ib));
    tape.backward(loss);

    const auto fa = [&](const std::vector<double>& x) {
        Tensor ax = a;
        ax.data = x;
        return sum(matmul(ax, b));
    };
    CHECK(rel_error(tape.grad(ia).data, fd_gradient(fa, a.data, 1e-5)) <= 1e-7);
    const auto fb = [&](const std::vector<double>& x) {
        Tensor bx = b;
        bx.data = x;
        return sum(matmul(a, bx));
    };
    CHECK(rel_error(tape.grad(ib).data, fd_gradient(fb, b.data, 1e-5)) <= 1e-7);
}

TEST_CASE("hinge subgradient at the boundary is zero") {
    // max(a - b + margin, 0) with the argument exactly 0
    Tape tape;
    int a = tape.leaf(Tensor::scalar(1.0));
    int b = tape.leaf(Tensor::scalar(1.25));
    int arg = tape.add_const(tape.sub(a, b), 0.25);
    CHECK(tape.value(arg).data[0] == 0.0);
    int loss = tape.sum_all(tape.max_const(arg, 0.0));
    tape.backward(loss);
    CHECK(tape.grad(a).data[0] == 0.0);

    // one-sided check: moving left keeps the loss at 0, matching the choice
    Tape t2;
    int a2 = t2.leaf(Tensor::scalar(1.0 - 1e-6));
    int arg2 = t2.add_const(t2.sub(a2, t2.constant(Tensor::scalar(1.25))), 0.25);
    int loss2 = t2.sum_all(t2.max_const(arg2, 0.0));
    CHECK(t2.value(loss2).data[0] == 0.0);

    // active hinge (a = b, positive margin): gradient passes through
    Tape t3;
    int a3 = t3.leaf(Tensor::scalar(2.0));
    int b3 = t3.leaf(Tensor::scalar(2.0));
    int loss3 = t3.sum_all(t3.max_const(t3.add_const(t3.sub(a3, b3), 0.01), 0.0));
    t3.backward(loss3);
    CHECK(t3.grad(a3).data[0] == doctest::Approx(1.0));
    CHECK(t3.grad(b3).data[0] == doctest::Approx(-1.0));
}

TEST_CASE("gradient check for every registered op") {
    Rng rng(321);

    gradcheck([](Tape& t, const std::vector<int>& v) { return t.matmul(v[0], v[1]); },
              {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.add(v[0], v[1]); },
              {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.sub(v[0], v[1]); },
              {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.mul(v[0], v[1]); },
              {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.scale(v[0], -1.7); },
              {random_tensor({3, 3}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.add_const(v[0], 0.4); },
              {random_tensor({3, 3}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.add_bias_rows(v[0], v[1]); },
              {random_tensor({3, 5}, rng), random_tensor({3}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.add_bias_cols(v[0], v[1]); },
              {random_tensor({3, 5}, rng), random_tensor({5}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.softmax_lastdim(v[0]); },
              {random_tensor({4, 6}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.silu(v[0]); },
              {random_tensor({4, 4}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.group_norm(v[0], v[1], v[2], 2); },
              {random_tensor({4, 6}, rng), random_tensor({4}, rng), random_tensor({4}, rng)},
              1e-5, 2e-6);
    gradcheck(
        [](Tape& t, const std::vector<int>& v) { return t.layer_norm_rows(v[0], v[1], v[2]); },
        {random_tensor({3, 8}, rng), random_tensor({8}, rng), random_tensor({8}, rng)}, 1e-5,
        2e-6);
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.sum_all(v[0]); },
              {random_tensor({3, 4}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.mean_all(v[0]); },
              {random_tensor({3, 4}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.sum_squares(v[0]); },
              {random_tensor({3, 4}, rng)});
    // keep inputs away from the hinge kink
    {
        Tensor x = random_tensor({4, 4}, rng);
        for (double& v : x.data)
            if (std::abs(v) < 1e-3) v = 0.5;
        gradcheck([](Tape& t, const std::vector<int>& v) { return t.max_const(v[0], 0.0); }, {x});
    }
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.transpose(v[0]); },
              {random_tensor({3, 5}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.reshape(v[0], {2, 6}); },
              {random_tensor({3, 4}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.slice_cols(v[0], 1, 4); },
              {random_tensor({3, 5}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.concat_cols(v[0], v[1]); },
              {random_tensor({3, 2}, rng), random_tensor({3, 3}, rng)});
    gradcheck(
        [](Tape& t, const std::vector<int>& v) { return t.gather_rows(v[0], {2, 0, 2, 1}); },
        {random_tensor({3, 4}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.unfold3x3(v[0], 2, 4, 4, 1); },
              {random_tensor({2, 16}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.unfold3x3(v[0], 2, 4, 4, 2); },
              {random_tensor({2, 16}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.upsample2x(v[0], 2, 3, 3); },
              {random_tensor({2, 9}, rng)});
    gradcheck([](Tape& t, const std::vector<int>& v) { return t.zero_cols(v[0], 1, 3); },
              {random_tensor({3, 5}, rng)});
}

TEST_CASE("tape replay reproduces recorded values exactly") {
    Rng rng(77);
    Tape tape;
    int a = tape.leaf(random_tensor({4, 4}, rng));
    int b = tape.leaf(random_tensor({4, 4}, rng));
    int c = tape.silu(tape.matmul(a, b));
    int d = tape.softmax_lastdim(c);
    int loss = tape.sum_squares(d);
    for (int id = 0; id < tape.size(); ++id) {
        if (tape.node(id).op == Tape::Op::Leaf || tape.node(id).op == Tape::Op::Const) continue;
        Tensor re = tape.recompute(id);
        CHECK(re.data == tape.value(id).data);
    }
    // backward twice is bitwise identical
    tape.backward(loss);
    Tensor g1 = tape.grad(a);
    tape.backward(loss);
    CHECK(g1.data == tape.grad(a).data);
}

TEST_CASE("adam zero gradient and first step") {
    std::map<std::string, Tensor> params{{"w", Tensor::row({1.0, -2.0, 3.0})}};
    std::map<std::string, Tensor> grads{{"w", Tensor::zeros({1, 3})}};
    AdamState st;
    adam_step(params, grads, st, 0.1);
    CHECK(st.step == 1);
    CHECK(params["w"].data == std::vector<double>{1.0, -2.0, 3.0});

    // first step with a gradient moves by about -lr * sign(g)
    std::map<std::string, Tensor> p2{{"w", Tensor::row({0.0, 0.0})}};
    std::map<std::string, Tensor> g2{{"w", Tensor::row({0.5, -2.0})}};
    AdamState st2;
    adam_step(p2, g2, st2, 0.01);
    CHECK(p2["w"].data[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p2["w"].data[1] == doctest::Approx(0.01).epsilon(1e-6));

    std::map<std::string, Tensor> bad{{"w", Tensor::row({1.0, 1.0, 1.0})}};
    AdamState st3;
    CHECK_THROWS_AS(adam_step(bad, g2, st3, 0.01), InvalidArgument);
}

TEST_CASE("adam drives x^2 toward zero and matches the scalar recurrence") {
    // independent scalar recurrence as the oracle
    double xo = 1.0, mo = 0.0, vo = 0.0;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int k = 1; k <= 100; ++k) {
        const double g = 2.0 * xo;
        mo = b1 * mo + (1 - b1) * g;
        vo = b2 * vo + (1 - b2) * g * g;
        xo -= lr * (mo / (1 - std::pow(b1, k))) / (std::sqrt(vo / (1 - std::pow(b2, k))) + eps);
    }
    REQUIRE(std::abs(xo) < 0.05);

    std::map<std::string, Tensor> params{{"x", Tensor::scalar(1.0)}};
    AdamState st;
    for (int k = 0; k < 100; ++k) {
        std::map<std::string, Tensor> grads{{"x", Tensor::scalar(2.0 * params["x"].data[0])}};
        adam_step(params, grads, st, lr);
    }
    CHECK(std::abs(params["x"].data[0]) < 0.05);
    CHECK(params["x"].data[0] == doctest::Approx(xo).epsilon(1e-12));
    CHECK(st.step == 100);
}

TEST_CASE("matmul determinism") {
    Rng rng(1);
    Tensor a = random_tensor({16, 16}, rng);
    Tensor b = random_tensor({16, 16}, rng);
    Tensor c1 = matmul(a, b);
    Tensor c2 = matmul(a, b);
    CHECK(c1.data == c2.data);
}
