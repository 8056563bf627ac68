#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffgan/error.hpp"
#include "diffgan/tape.hpp"

using namespace diffgan;

namespace {

Tensor rand_tensor(uint64_t seed, uint64_t stream, const std::vector<int>& shape) {
    Rng rng(seed, stream);
    return Tensor::randn(rng, shape);
}

}  // namespace

TEST_CASE("matmul: hand arithmetic and identity") {
    Var a = make_param(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = make_param(Tensor({2, 1}, {1, 1}));
    Var c = matmul(a, b);
    CHECK(c->value[0] == 3);
    CHECK(c->value[1] == 7);

    Var eye = make_const(Tensor({2, 2}, {1, 0, 0, 1}));
    Var ai = matmul(a, eye);
    for (int64_t i = 0; i < 4; ++i) CHECK(ai->value[i] == a->value[i]);

    CHECK_THROWS_AS(matmul(a, make_const(Tensor({3, 1}))), DimError);
}

TEST_CASE("matmul gradient vs finite differences") {
    const Tensor b0 = rand_tensor(11, 1, {4, 2});
    auto f = [&](const Var& x) { return sum(matmul(x, make_const(b0))); };
    CHECK(grad_check(f, rand_tensor(11, 2, {3, 4}), 1e-5) < 1e-6);

    const Tensor a0 = rand_tensor(11, 3, {3, 4});
    auto g = [&](const Var& x) { return sum(matmul(make_const(a0), x)); };
    CHECK(grad_check(g, b0, 1e-5) < 1e-6);
}

TEST_CASE("conv2d: scalar kernel and all-ones case") {
    Var x = make_param(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
    Var k = make_param(Tensor({1, 1, 1, 1}, {2}));
    Var y = conv2d(x, k, 1, 0);
    CHECK(y->value.shape() == std::vector<int>{1, 1, 2, 2});
    CHECK(y->value[0] == 2);
    CHECK(y->value[1] == 4);
    CHECK(y->value[2] == 6);
    CHECK(y->value[3] == 8);

    Var ones_x = make_const(Tensor::ones({1, 1, 3, 3}));
    Var ones_k = make_const(Tensor::ones({1, 1, 2, 2}));
    Var z = conv2d(ones_x, ones_k, 1, 0);
    CHECK(z->value.shape() == std::vector<int>{1, 1, 2, 2});
    for (int64_t i = 0; i < 4; ++i) CHECK(z->value[i] == 4);

    CHECK_THROWS_AS(conv2d(make_const(Tensor::ones({1, 1, 2, 2})),
                           make_const(Tensor::ones({1, 1, 3, 3})), 1, 0),
                    DimError);
}

TEST_CASE("conv2d gradients vs finite differences (2x3x8x8, 4x3x3x3)") {
    const Tensor k0 = rand_tensor(21, 1, {4, 3, 3, 3});
    const Tensor x0 = rand_tensor(21, 2, {2, 3, 8, 8});
    auto fx = [&](const Var& v) { return sum(conv2d(v, make_const(k0), 1, 1)); };
    CHECK(grad_check(fx, x0, 1e-5) < 1e-5);
    auto fk = [&](const Var& v) { return sum(conv2d(make_const(x0), v, 2, 1)); };
    CHECK(grad_check(fk, k0, 1e-5) < 1e-5);
}

TEST_CASE("softplus values, saturation and derivative") {
    Var x = make_param(Tensor({1}, {0.0}));
    Var y = softplus(x);
    CHECK(y->value[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    backward(y);
    CHECK(x->grad[0] == doctest::Approx(0.5).epsilon(1e-12));

    Var big = make_const(Tensor({1}, {50.0}));
    CHECK(std::fabs(softplus(big)->value[0] - 50.0) < 1e-9);

    for (double p : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        auto f = [](const Var& v) { return sum(softplus(v)); };
        CHECK(grad_check(f, Tensor({1}, {p}), 1e-5) < 1e-8);
    }
}

TEST_CASE("reduce_mean: value and uniform backward") {
    Var x = make_param(Tensor({3}, {1, 2, 3}));
    Var m = reduce_mean(x);
    CHECK(m->value[0] == doctest::Approx(2.0));

    Var c = make_param(Tensor::full({5}, 3.25));
    CHECK(reduce_mean(c)->value[0] == doctest::Approx(3.25));

    Var x6 = make_param(Tensor::ones({6}));
    backward(reduce_mean(x6));
    for (int64_t i = 0; i < 6; ++i) CHECK(x6->grad[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("backward: sum of squares and unreachable leaf") {
    Var x = make_param(Tensor({2}, {1, 2}));
    Var y = sum(mul(x, x));
    backward(y);
    CHECK(x->grad[0] == doctest::Approx(2.0));
    CHECK(x->grad[1] == doctest::Approx(4.0));

    Var unused = make_param(Tensor::ones({3}));
    Var z = sum(x);
    backward(z);
    for (int64_t i = 0; i < 3; ++i) CHECK(unused->grad[i] == 0.0);

    CHECK_THROWS_AS(backward(x), ArgError);  // non-scalar root
}

TEST_CASE("backward accumulates until zero_grad") {
    Var x = make_param(Tensor({2}, {1, 1}));
    backward(sum(x));
    backward(sum(x));
    CHECK(x->grad[0] == doctest::Approx(2.0));
    zero_grad(x);
    CHECK(x->grad[0] == 0.0);
}

TEST_CASE("composed graph mean(softplus(W x)) matches finite differences") {
    const Tensor w0 = rand_tensor(31, 1, {5, 4});
    auto f = [&](const Var& x) { return reduce_mean(softplus(matmul(make_const(w0), x))); };
    CHECK(grad_check(f, rand_tensor(31, 2, {4, 2}), 1e-5) < 1e-6);
}

TEST_CASE("grad_check: exactness, tanh case, negative control") {
    auto fsum = [](const Var& v) { return sum(v); };
    CHECK(grad_check(fsum, rand_tensor(41, 1, {7}), 1e-5) < 1e-10);

    auto ftanh = [](const Var& v) { return reduce_mean(tanh_op(v)); };
    CHECK(grad_check(ftanh, rand_tensor(41, 2, {10}), 1e-5) < 1e-6);

    // Intentionally wrong backward rule; grad_check must flag it.
    auto broken = [](const Var& v) {
        Tensor out = v->value;
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] * out[i];
        auto node = std::make_shared<TapeVar>();
        node->grad = Tensor(out.shape());
        node->value = std::move(out);
        node->parents = {v};
        node->requires_grad = v->requires_grad;
        node->rule = "square_broken";
        node->backward_fn = [](TapeVar& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            for (int64_t i = 0; i < self.grad.numel(); ++i)
                p.grad[i] += self.grad[i] * p.value[i];  // missing factor 2
        };
        return sum(node);
    };
    CHECK(grad_check(broken, rand_tensor(41, 3, {6}), 1e-5) > 1e-2);

    CHECK_THROWS_AS(grad_check(fsum, Tensor::ones({2}), 1e-2), ArgError);
}

TEST_CASE("every differentiable op passes the finite-difference oracle") {
    // One representative random case per op; the acceptance suite sweeps
    // many more shapes and seeds.
    const double tol = 1e-5;
    const Tensor x22 = rand_tensor(51, 1, {2, 2});
    const Tensor x4 = rand_tensor(51, 2, {2, 3, 4, 4});

    auto other = make_const(rand_tensor(51, 3, {2, 2}));
    CHECK(grad_check([&](const Var& v) { return sum(add(v, other)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(sub(other, v)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(mul(v, other)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(mul(v, v)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(scale(v, -2.5)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(add_scalar(v, 3.0)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(tanh_op(v)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(sigmoid(v)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(leaky_relu(v, 0.2)); },
                     Tensor({4}, {-1.5, -0.3, 0.4, 2.0}), 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(softplus(v)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(sqrt_op(add_scalar(mul(v, v), 0.5))); }, x22,
                     1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(rsqrt_op(add_scalar(mul(v, v), 0.5))); }, x22,
                     1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(transpose2d(v)); }, x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(mul(reshape(v, {4, 1}), reshape(v, {4, 1}))); },
                     x22, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(upsample2x(v)); }, x4, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return reduce_mean(v); }, x4, 1e-5) < tol);

    auto cat_other = make_const(rand_tensor(51, 4, {2, 2, 4, 4}));
    CHECK(grad_check([&](const Var& v) { return sum(mul(concat(v, cat_other, 1),
                                                        concat(cat_other, v, 1))); },
                     x4, 1e-5) < tol);

    const Tensor bias = rand_tensor(51, 5, {3});
    CHECK(grad_check([&](const Var& v) { return sum(mul(bias_add(v, make_const(bias)),
                                                        bias_add(v, make_const(bias)))); },
                     rand_tensor(51, 6, {4, 3}), 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(bias_add(make_const(rand_tensor(51, 7, {4, 3})), v)); },
                     bias, 1e-5) < tol);
}

TEST_CASE("channel ops pass the finite-difference oracle") {
    const double tol = 1e-5;
    const Tensor x4 = rand_tensor(61, 1, {2, 3, 4, 4});
    const Tensor cb = rand_tensor(61, 2, {3});
    const Tensor sc = rand_tensor(61, 3, {2, 3});

    CHECK(grad_check([&](const Var& v) { return sum(mul(channel_bias(v, make_const(cb)),
                                                        channel_bias(v, make_const(cb)))); },
                     x4, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) {
              return sum(mul(channel_bias(make_const(x4), v), channel_bias(make_const(x4), v)));
          },
          cb, 1e-5) < tol);

    CHECK(grad_check([&](const Var& v) { return sum(mul(channel_scale(v, make_const(sc)), v)); },
                     x4, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(mul(channel_scale(make_const(x4), v),
                                                        channel_scale(make_const(x4), v))); },
                     sc, 1e-5) < tol);

    CHECK(grad_check([&](const Var& v) { return sum(mul(channel_scale_shared(v, make_const(cb)), v)); },
                     x4, 1e-5) < tol);
    CHECK(grad_check([&](const Var& v) { return sum(mul(channel_scale_shared(make_const(x4), v),
                                                        channel_scale_shared(make_const(x4), v))); },
                     cb, 1e-5) < tol);

    CHECK(grad_check([&](const Var& v) { return sum(mul(sample_scale(v, {0.5, -1.25}), v)); }, x4,
                     1e-5) < tol);

    CHECK(grad_check([&](const Var& v) { return sum(mul(minibatch_stddev(v, 2),
                                                        minibatch_stddev(v, 2))); },
                     rand_tensor(61, 4, {4, 2, 3, 3}), 1e-5) < 1e-4);
}

TEST_CASE("minibatch_stddev: identical images give a zero extra channel") {
    Tensor one = rand_tensor(71, 1, {1, 2, 3, 3});
    Tensor batch({4, 2, 3, 3});
    for (int n = 0; n < 4; ++n)
        std::copy_n(one.data(), 18, batch.data() + n * 18);
    Var y = minibatch_stddev(make_const(batch), 4);
    CHECK(y->value.shape() == std::vector<int>{4, 3, 3, 3});
    // zero variance: the appended statistic collapses to the eps guard
    for (int n = 0; n < 4; ++n)
        for (int k = 0; k < 9; ++k)
            CHECK(std::fabs(y->value[n * 27 + 18 + k]) < 1e-3);
}

TEST_CASE("ops are pure: inputs unmodified") {
    Tensor x0 = rand_tensor(81, 1, {2, 2});
    Var x = make_param(x0);
    Var y = mul(add(x, x), tanh_op(x));
    backward(sum(y));
    for (int64_t i = 0; i < 4; ++i) CHECK(x->value[i] == x0[i]);
}
