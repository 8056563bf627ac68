#include "diffgan/tape.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "diffgan/error.hpp"
#include "diffgan/kernels.hpp"

namespace diffgan {

namespace {

Var make_node(Tensor value, std::vector<Var> parents, const char* rule,
              std::function<void(TapeVar&)> backward_fn) {
    auto node = std::make_shared<TapeVar>();
    node->grad = Tensor(value.shape());
    node->value = std::move(value);
    node->rule = rule;
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    node->requires_grad = rg;
    node->parents = std::move(parents);
    if (rg) node->backward_fn = std::move(backward_fn);
    return node;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw DimError(std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " +
                       b->value.shape_str());
}

Var unary_map(const Var& a, const char* rule, double (*fwd)(double), double (*dfd)(double)) {
    Tensor out(a->value.shape());
    const double* x = a->value.data();
    double* y = out.data();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = fwd(x[i]);
    return make_node(std::move(out), {a}, rule, [dfd](TapeVar& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        const double* x = p.value.data();
        const double* g = self.grad.data();
        double* gx = p.grad.data();
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) gx[i] += g[i] * dfd(x[i]);
    });
}

double sigmoid_val(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Var make_param(Tensor value) {
    auto node = std::make_shared<TapeVar>();
    node->grad = Tensor(value.shape());
    node->value = std::move(value);
    node->requires_grad = true;
    return node;
}

Var make_const(Tensor value) {
    auto node = std::make_shared<TapeVar>();
    node->grad = Tensor(value.shape());
    node->value = std::move(value);
    node->requires_grad = false;
    return node;
}

void zero_grad(const Var& v) { v->grad.fill(0.0); }

void backward(const Var& root) {
    if (!root) throw ArgError("backward: null root");
    if (root->value.numel() != 1)
        throw ArgError("backward: root must be scalar, got shape " + root->value.shape_str());

    // Post-order DFS over parent edges; reversed, it yields every node
    // before any of its parents.
    std::vector<TapeVar*> order;
    std::unordered_set<TapeVar*> visited;
    std::vector<std::pair<TapeVar*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TapeVar* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TapeVar* node = *it;
        if (node->backward_fn && node->requires_grad) node->backward_fn(*node);
    }
}

// ---- elementwise / arithmetic ----

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] + b->value[i];
    return make_node(std::move(out), {a, b}, "add", [](TapeVar& self) {
        const int64_t n = self.grad.numel();
        for (int slot = 0; slot < 2; ++slot) {
            auto& p = *self.parents[slot];
            if (!p.requires_grad) continue;
            for (int64_t i = 0; i < n; ++i) p.grad[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] - b->value[i];
    return make_node(std::move(out), {a, b}, "sub", [](TapeVar& self) {
        const int64_t n = self.grad.numel();
        auto& a = *self.parents[0];
        auto& b = *self.parents[1];
        if (a.requires_grad)
            for (int64_t i = 0; i < n; ++i) a.grad[i] += self.grad[i];
        if (b.requires_grad)
            for (int64_t i = 0; i < n; ++i) b.grad[i] -= self.grad[i];
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] * b->value[i];
    return make_node(std::move(out), {a, b}, "mul", [](TapeVar& self) {
        const int64_t n = self.grad.numel();
        auto& a = *self.parents[0];
        auto& b = *self.parents[1];
        if (a.requires_grad)
            for (int64_t i = 0; i < n; ++i) a.grad[i] += self.grad[i] * b.value[i];
        if (b.requires_grad)
            for (int64_t i = 0; i < n; ++i) b.grad[i] += self.grad[i] * a.value[i];
    });
}

Var scale(const Var& a, double c) {
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = c * a->value[i];
    return make_node(std::move(out), {a}, "scale", [c](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) a.grad[i] += c * self.grad[i];
    });
}

Var add_scalar(const Var& a, double c) {
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] + c;
    return make_node(std::move(out), {a}, "add_scalar", [](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) a.grad[i] += self.grad[i];
    });
}

Var tanh_op(const Var& a) {
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = std::tanh(a->value[i]);
    return make_node(std::move(out), {a}, "tanh", [](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double y = self.value[i];
            a.grad[i] += self.grad[i] * (1.0 - y * y);
        }
    });
}

Var sigmoid(const Var& a) {
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = sigmoid_val(a->value[i]);
    return make_node(std::move(out), {a}, "sigmoid", [](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double y = self.value[i];
            a.grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double x = a->value[i];
        out[i] = x >= 0 ? x : slope * x;
    }
    return make_node(std::move(out), {a}, "leaky_relu", [slope](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i)
            a.grad[i] += self.grad[i] * (a.value[i] >= 0 ? 1.0 : slope);
    });
}

Var softplus(const Var& a) {
    // Overflow-safe: max(x,0) + log1p(exp(-|x|)); derivative is sigmoid.
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double x = a->value[i];
        out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
    }
    return make_node(std::move(out), {a}, "softplus", [](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) a.grad[i] += self.grad[i] * sigmoid_val(a.value[i]);
    });
}

Var sqrt_op(const Var& a) {
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double x = a->value[i];
        if (x <= 0.0) throw NumericError("sqrt: domain requires positive values");
        out[i] = std::sqrt(x);
    }
    return make_node(std::move(out), {a}, "sqrt", [](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) a.grad[i] += self.grad[i] * 0.5 / self.value[i];
    });
}

Var rsqrt_op(const Var& a) {
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double x = a->value[i];
        if (x <= 0.0) throw NumericError("rsqrt: domain requires positive values");
        out[i] = 1.0 / std::sqrt(x);
    }
    return make_node(std::move(out), {a}, "rsqrt", [](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double y = self.value[i];
            a.grad[i] += self.grad[i] * (-0.5) * y * y * y;
        }
    });
}

// ---- linear algebra / structure ----

Var matmul(const Var& a, const Var& b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
        throw DimError("matmul: incompatible shapes " + a->value.shape_str() + " and " +
                       b->value.shape_str());
    const int m = sa[0], k = sa[1], n = sb[1];
    Tensor out({m, n});
    kernels::mm_nn(a->value.data(), b->value.data(), out.data(), m, k, n, false);
    return make_node(std::move(out), {a, b}, "matmul", [m, k, n](TapeVar& self) {
        auto& a = *self.parents[0];
        auto& b = *self.parents[1];
        if (a.requires_grad)  // dA = dC * B^T
            kernels::mm_nt(self.grad.data(), b.value.data(), a.grad.data(), m, n, k, true);
        if (b.requires_grad)  // dB = A^T * dC
            kernels::mm_tn(a.value.data(), self.grad.data(), b.grad.data(), k, m, n, true);
    });
}

Var transpose2d(const Var& a) {
    const auto& s = a->value.shape();
    if (s.size() != 2) throw DimError("transpose2d expects a matrix, got " + a->value.shape_str());
    const int m = s[0], n = s[1];
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[size_t(j) * m + i] = a->value[size_t(i) * n + j];
    return make_node(std::move(out), {a}, "transpose2d", [m, n](TapeVar& self) {
        auto& a = *self.parents[0];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) a.grad[size_t(i) * n + j] += self.grad[size_t(j) * m + i];
    });
}

Var reshape(const Var& a, const std::vector<int>& shape) {
    if (checked_numel(shape) != a->value.numel())
        throw DimError("reshape: element count mismatch, " + a->value.shape_str() + " -> " +
                       shape_to_string(shape));
    Tensor out(shape, a->value.vec());
    return make_node(std::move(out), {a}, "reshape", [](TapeVar& self) {
        auto& a = *self.parents[0];
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) a.grad[i] += self.grad[i];
    });
}

Var concat(const Var& a, const Var& b, int axis) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    if (sa.size() != sb.size()) throw DimError("concat: rank mismatch");
    if (axis < 0 || axis >= static_cast<int>(sa.size())) throw ArgError("concat: bad axis");
    for (size_t i = 0; i < sa.size(); ++i)
        if (static_cast<int>(i) != axis && sa[i] != sb[i])
            throw DimError("concat: shape mismatch " + a->value.shape_str() + " vs " +
                           b->value.shape_str());
    std::vector<int> so = sa;
    so[axis] += sb[axis];

    // outer * (axis extent) * inner layout
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= sa[i];
    for (size_t i = axis + 1; i < sa.size(); ++i) inner *= sa[i];
    const int64_t block_a = sa[axis] * inner, block_b = sb[axis] * inner;

    Tensor out(so);
    for (int64_t o = 0; o < outer; ++o) {
        std::copy_n(a->value.data() + o * block_a, block_a, out.data() + o * (block_a + block_b));
        std::copy_n(b->value.data() + o * block_b, block_b,
                    out.data() + o * (block_a + block_b) + block_a);
    }
    return make_node(std::move(out), {a, b}, "concat", [outer, block_a, block_b](TapeVar& self) {
        auto& a = *self.parents[0];
        auto& b = *self.parents[1];
        for (int64_t o = 0; o < outer; ++o) {
            const double* g = self.grad.data() + o * (block_a + block_b);
            if (a.requires_grad) {
                double* ga = a.grad.data() + o * block_a;
                for (int64_t i = 0; i < block_a; ++i) ga[i] += g[i];
            }
            if (b.requires_grad) {
                double* gb = b.grad.data() + o * block_b;
                for (int64_t i = 0; i < block_b; ++i) gb[i] += g[block_a + i];
            }
        }
    });
}

Var conv2d(const Var& input, const Var& kernel, int stride, int pad) {
    Tensor out = kernels::conv2d_forward(input->value, kernel->value, stride, pad);
    return make_node(std::move(out), {input, kernel}, "conv2d", [stride, pad](TapeVar& self) {
        auto& x = *self.parents[0];
        auto& k = *self.parents[1];
        kernels::conv2d_backward(x.value, k.value, stride, pad, self.grad,
                                 x.requires_grad ? &x.grad : nullptr,
                                 k.requires_grad ? &k.grad : nullptr);
    });
}

Var upsample2x(const Var& a) {
    Tensor out = kernels::upsample2x_forward(a->value);
    return make_node(std::move(out), {a}, "upsample2x", [](TapeVar& self) {
        kernels::upsample2x_backward(self.grad, self.parents[0]->grad);
    });
}

// ---- reductions ----

Var sum(const Var& a) {
    double acc = 0.0;
    const int64_t n = a->value.numel();
    for (int64_t i = 0; i < n; ++i) acc += a->value[i];
    return make_node(Tensor::scalar(acc), {a}, "sum", [](TapeVar& self) {
        auto& a = *self.parents[0];
        const double g = self.grad[0];
        const int64_t n = a.grad.numel();
        for (int64_t i = 0; i < n; ++i) a.grad[i] += g;
    });
}

Var reduce_mean(const Var& a) {
    const int64_t n = a->value.numel();
    if (n == 0) throw ArgError("reduce_mean: empty tensor");
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += a->value[i];
    return make_node(Tensor::scalar(acc / double(n)), {a}, "reduce_mean", [n](TapeVar& self) {
        auto& a = *self.parents[0];
        const double g = self.grad[0] / double(n);
        for (int64_t i = 0; i < n; ++i) a.grad[i] += g;
    });
}

// ---- broadcast helpers ----

Var bias_add(const Var& x, const Var& b) {
    const auto& sx = x->value.shape();
    const auto& sb = b->value.shape();
    if (sx.size() != 2 || sb.size() != 1 || sb[0] != sx[1])
        throw DimError("bias_add: expected x [N,F] and b [F], got " + x->value.shape_str() +
                       " and " + b->value.shape_str());
    const int n = sx[0], f = sx[1];
    Tensor out(sx);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j)
            out[size_t(i) * f + j] = x->value[size_t(i) * f + j] + b->value[j];
    return make_node(std::move(out), {x, b}, "bias_add", [n, f](TapeVar& self) {
        auto& x = *self.parents[0];
        auto& b = *self.parents[1];
        const int64_t total = self.grad.numel();
        if (x.requires_grad)
            for (int64_t i = 0; i < total; ++i) x.grad[i] += self.grad[i];
        if (b.requires_grad)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < f; ++j) b.grad[j] += self.grad[size_t(i) * f + j];
    });
}

namespace {

// Shape helper for the [N,C,...] ops: hw = product of trailing spatial dims.
void channel_dims(const Tensor& t, const char* op, int& n, int& c, int64_t& hw) {
    const auto& s = t.shape();
    if (s.size() == 2) {
        n = s[0]; c = s[1]; hw = 1;
    } else if (s.size() == 4) {
        n = s[0]; c = s[1]; hw = int64_t(s[2]) * s[3];
    } else {
        throw DimError(std::string(op) + ": expected rank 2 or 4, got " + t.shape_str());
    }
}

}  // namespace

Var channel_bias(const Var& x, const Var& b) {
    int n, c;
    int64_t hw;
    channel_dims(x->value, "channel_bias", n, c, hw);
    if (b->value.ndim() != 1 || b->value.dim(0) != c)
        throw DimError("channel_bias: bias must be [C], got " + b->value.shape_str());
    Tensor out(x->value.shape());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            const double bv = b->value[j];
            const int64_t base = (int64_t(i) * c + j) * hw;
            for (int64_t k = 0; k < hw; ++k) out[base + k] = x->value[base + k] + bv;
        }
    return make_node(std::move(out), {x, b}, "channel_bias", [n, c, hw](TapeVar& self) {
        auto& x = *self.parents[0];
        auto& b = *self.parents[1];
        if (x.requires_grad) {
            const int64_t total = self.grad.numel();
            for (int64_t i = 0; i < total; ++i) x.grad[i] += self.grad[i];
        }
        if (b.requires_grad)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j) {
                    const int64_t base = (int64_t(i) * c + j) * hw;
                    double acc = 0.0;
                    for (int64_t k = 0; k < hw; ++k) acc += self.grad[base + k];
                    b.grad[j] += acc;
                }
    });
}

Var channel_scale(const Var& x, const Var& s) {
    int n, c;
    int64_t hw;
    channel_dims(x->value, "channel_scale", n, c, hw);
    const auto& ss = s->value.shape();
    if (ss.size() != 2 || ss[0] != n || ss[1] != c)
        throw DimError("channel_scale: scales must be [N,C], got " + s->value.shape_str());
    Tensor out(x->value.shape());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            const double sv = s->value[size_t(i) * c + j];
            const int64_t base = (int64_t(i) * c + j) * hw;
            for (int64_t k = 0; k < hw; ++k) out[base + k] = x->value[base + k] * sv;
        }
    return make_node(std::move(out), {x, s}, "channel_scale", [n, c, hw](TapeVar& self) {
        auto& x = *self.parents[0];
        auto& s = *self.parents[1];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                const int64_t base = (int64_t(i) * c + j) * hw;
                const double sv = s.value[size_t(i) * c + j];
                if (x.requires_grad)
                    for (int64_t k = 0; k < hw; ++k) x.grad[base + k] += self.grad[base + k] * sv;
                if (s.requires_grad) {
                    double acc = 0.0;
                    for (int64_t k = 0; k < hw; ++k) acc += self.grad[base + k] * x.value[base + k];
                    s.grad[size_t(i) * c + j] += acc;
                }
            }
    });
}

Var channel_scale_shared(const Var& x, const Var& s) {
    int n, c;
    int64_t hw;
    channel_dims(x->value, "channel_scale_shared", n, c, hw);
    if (s->value.ndim() != 1 || s->value.dim(0) != c)
        throw DimError("channel_scale_shared: scales must be [C], got " + s->value.shape_str());
    Tensor out(x->value.shape());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            const double sv = s->value[j];
            const int64_t base = (int64_t(i) * c + j) * hw;
            for (int64_t k = 0; k < hw; ++k) out[base + k] = x->value[base + k] * sv;
        }
    return make_node(std::move(out), {x, s}, "channel_scale_shared", [n, c, hw](TapeVar& self) {
        auto& x = *self.parents[0];
        auto& s = *self.parents[1];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                const int64_t base = (int64_t(i) * c + j) * hw;
                const double sv = s.value[j];
                if (x.requires_grad)
                    for (int64_t k = 0; k < hw; ++k) x.grad[base + k] += self.grad[base + k] * sv;
                if (s.requires_grad) {
                    double acc = 0.0;
                    for (int64_t k = 0; k < hw; ++k) acc += self.grad[base + k] * x.value[base + k];
                    s.grad[j] += acc;
                }
            }
    });
}

Var sample_scale(const Var& x, const std::vector<double>& coeffs) {
    const auto& s = x->value.shape();
    if (s.empty() || s[0] != static_cast<int>(coeffs.size()))
        throw DimError("sample_scale: coefficient count " + std::to_string(coeffs.size()) +
                       " does not match leading dimension of " + x->value.shape_str());
    const int n = s[0];
    const int64_t per = x->value.numel() / n;
    Tensor out(s);
    for (int i = 0; i < n; ++i) {
        const double cv = coeffs[static_cast<size_t>(i)];
        for (int64_t k = 0; k < per; ++k) out[i * per + k] = x->value[i * per + k] * cv;
    }
    return make_node(std::move(out), {x}, "sample_scale", [coeffs, n, per](TapeVar& self) {
        auto& x = *self.parents[0];
        for (int i = 0; i < n; ++i) {
            const double cv = coeffs[static_cast<size_t>(i)];
            for (int64_t k = 0; k < per; ++k) x.grad[i * per + k] += self.grad[i * per + k] * cv;
        }
    });
}

Var minibatch_stddev(const Var& x, int group_size) {
    const auto& s = x->value.shape();
    if (s.size() != 4) throw DimError("minibatch_stddev expects [N,C,H,W], got " + x->value.shape_str());
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    const int64_t chw = int64_t(c) * h * w;
    const int64_t hw = int64_t(h) * w;
    int g = std::min(group_size, n);
    if (g < 1) g = 1;
    while (n % g != 0) --g;
    const int n_groups = n / g;
    constexpr double kEps = 1e-8;

    // Per group and (c,h,w): mean and std over members; the appended channel
    // carries the std averaged over (c,h,w).
    Tensor mean({n_groups, c, h, w});
    Tensor stdev({n_groups, c, h, w});
    std::vector<double> group_stat(static_cast<size_t>(n_groups), 0.0);
    for (int grp = 0; grp < n_groups; ++grp) {
        for (int64_t k = 0; k < chw; ++k) {
            double m = 0.0;
            for (int i = 0; i < g; ++i) m += x->value[(int64_t(grp) * g + i) * chw + k];
            m /= g;
            double var = 0.0;
            for (int i = 0; i < g; ++i) {
                const double d = x->value[(int64_t(grp) * g + i) * chw + k] - m;
                var += d * d;
            }
            var /= g;
            mean[int64_t(grp) * chw + k] = m;
            const double sd = std::sqrt(var + kEps);
            stdev[int64_t(grp) * chw + k] = sd;
            group_stat[static_cast<size_t>(grp)] += sd;
        }
        group_stat[static_cast<size_t>(grp)] /= double(chw);
    }

    Tensor out({n, c + 1, h, w});
    for (int i = 0; i < n; ++i) {
        std::copy_n(x->value.data() + int64_t(i) * chw, chw, out.data() + int64_t(i) * (chw + hw));
        const double stat = group_stat[static_cast<size_t>(i / g)];
        double* extra = out.data() + int64_t(i) * (chw + hw) + chw;
        for (int64_t k = 0; k < hw; ++k) extra[k] = stat;
    }

    return make_node(std::move(out), {x}, "minibatch_stddev",
                     [n, c, h, w, g, chw, hw, mean, stdev](TapeVar& self) {
                         auto& x = *self.parents[0];
                         const int n_groups = n / g;
                         for (int grp = 0; grp < n_groups; ++grp) {
                             // Sum of incoming gradient over the appended channel of the group.
                             double gsum = 0.0;
                             for (int i = 0; i < g; ++i) {
                                 const double* extra =
                                     self.grad.data() + int64_t(grp * g + i) * (chw + hw) + chw;
                                 for (int64_t k = 0; k < hw; ++k) gsum += extra[k];
                             }
                             const double coef = gsum / (double(chw) * g);
                             for (int i = 0; i < g; ++i) {
                                 const int64_t xb = int64_t(grp * g + i) * chw;
                                 const double* gpass = self.grad.data() + int64_t(grp * g + i) * (chw + hw);
                                 for (int64_t k = 0; k < chw; ++k) {
                                     const double centered =
                                         x.value[xb + k] - mean[int64_t(grp) * chw + k];
                                     x.grad[xb + k] += gpass[k] +
                                                       coef * centered / stdev[int64_t(grp) * chw + k];
                                 }
                             }
                         }
                     });
}

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps) {
    if (eps < 1e-7 || eps > 1e-3) throw ArgError("grad_check: eps must lie in [1e-7, 1e-3]");
    Var xv = make_param(x);
    Var y = f(xv);
    if (y->value.numel() != 1) throw ArgError("grad_check: f must return a scalar");
    if (!y->value.all_finite()) throw NumericError("grad_check: non-finite function value");
    backward(y);
    const Tensor ad = xv->grad;

    auto eval = [&](const Tensor& pt) {
        Var v = make_const(pt);
        Var out = f(v);
        if (!out->value.all_finite()) throw NumericError("grad_check: non-finite function value");
        return out->value[0];
    };

    double max_rel = 0.0;
    Tensor pert = x;
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double orig = pert[i];
        pert[i] = orig + eps;
        const double fp = eval(pert);
        pert[i] = orig - eps;
        const double fm = eval(pert);
        pert[i] = orig;
        const double fd = (fp - fm) / (2.0 * eps);
        const double rel = std::fabs(ad[i] - fd) / std::max(1.0, std::fabs(fd));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace diffgan
