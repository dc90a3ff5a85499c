#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pointcaps/errors.hpp"
#include "pointcaps/rng.hpp"

// Dense tensor engine with reverse-mode differentiation.
//
// Design notes:
//  * A Tensor is a cheap handle onto a graph node. Nodes created by an
//    operation hold their parents and a backward rule; calling backward() on
//    a scalar output walks the recorded graph once in reverse topological
//    order and accumulates gradients into every reachable leaf that requires
//    them. Values are immutable after creation except for gradient buffers
//    and explicit leaf updates between steps (optimizers).
//  * Broadcasting rule: shapes are aligned at the trailing dimension, the
//    lower-rank operand is padded with leading 1s, and a dimension may differ
//    between operands only if one side is 1 (which is expanded). Examples:
//    [B,N,C]+[C], [B,q,c,z]*[B,q,c,1]. Nothing else broadcasts.
//  * Reductions with op=max route the gradient to the first occurrence of the
//    maximum along the axis.
//  * A graph is confined to one thread. Evaluating different graphs on
//    different threads over frozen leaf tensors is safe.

namespace pointcaps {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

namespace detail {

template <class S>
struct Node {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;  // sized iff requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;
    const char* op = "leaf";

    std::size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

// Row-major strides, with stride 0 on dimensions broadcast against `out`.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    std::size_t stride = 1;
    const std::size_t offset = out.size() - in.size();
    for (std::size_t i = in.size(); i-- > 0;) {
        if (in[i] == out[i + offset]) {
            strides[i + offset] = stride;
        } else {
            strides[i + offset] = 0;  // in[i] == 1, expanded
        }
        stride *= in[i];
    }
    return strides;
}

// Odometer over `out` coordinates yielding linear offsets into two operands.
template <class Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, Fn&& fn) {
    const std::size_t rank = out.size();
    const std::size_t total = shape_numel(out);
    std::vector<std::size_t> coord(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t lin = 0; lin < total; ++lin) {
        fn(lin, ia, ib);
        for (std::size_t d = rank; d-- > 0;) {
            ++coord[d];
            ia += sa[d];
            ib += sb[d];
            if (coord[d] < out[d]) break;
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
            coord[d] = 0;
        }
    }
}

}  // namespace detail

template <class S>
class Tensor {
  public:
    using Node = detail::Node<S>;

    Tensor() = default;

    static Tensor from(Shape shape, std::vector<S> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor: shape " + shape_str(shape) + " does not hold " +
                                 std::to_string(data.size()) + " values");
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        if (requires_grad) n->ensure_grad();
        return Tensor(std::move(n));
    }

    static Tensor full(Shape shape, S v, bool requires_grad = false) {
        std::vector<S> data(shape_numel(shape), v);
        return from(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), S(0), requires_grad);
    }

    static Tensor ones(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), S(1), requires_grad);
    }

    static Tensor scalar(S v) { return full({1}, v); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }
    std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }

    const std::vector<S>& data() const { return node_->value; }
    // Direct mutation is reserved for leaf updates between steps.
    std::vector<S>& raw_data() { return node_->value; }

    S item() const {
        if (size() != 1) throw UsageError("item: tensor has " + std::to_string(size()) + " elements");
        return node_->value[0];
    }

    S at(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != rank()) throw DimensionError("at: index rank mismatch");
        std::size_t off = 0, stride = 1;
        const auto& sh = shape();
        std::vector<std::size_t> v(idx);
        for (std::size_t d = sh.size(); d-- > 0;) {
            off += v[d] * stride;
            stride *= sh[d];
        }
        return node_->value[off];
    }

    bool requires_grad() const { return node_->requires_grad; }

    Tensor& set_requires_grad(bool rg) {
        if (!node_->parents.empty())
            throw UsageError("set_requires_grad: only leaf tensors may change grad mode");
        node_->requires_grad = rg;
        if (rg) node_->ensure_grad();
        return *this;
    }

    const std::vector<S>& grad() const {
        if (!node_->requires_grad) throw UsageError("grad: tensor does not require grad");
        return node_->grad;
    }

    std::vector<S>& raw_grad() { return node_->grad; }

    void zero_grad() {
        if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
    }

    // Reverse-mode sweep from a scalar output. Visits every recorded node
    // exactly once in reverse topological order.
    void backward() const {
        if (size() != 1) throw UsageError("backward: output must be scalar, got " + shape_str(shape()));
        if (!node_->requires_grad) throw UsageError("backward: output does not require grad");
        std::vector<Node*> order;
        topo_order(node_.get(), order);
        node_->grad.assign(1, S(1));
        for (std::size_t i = order.size(); i-- > 0;) {
            Node* n = order[i];
            if (n->backward && n->requires_grad) n->backward(*n);
        }
    }

    std::shared_ptr<Node> node() const { return node_; }
    static Tensor adopt(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }

  private:
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static void topo_order(Node* root, std::vector<Node*>& order) {
        // Iterative post-order DFS; parent visit order is fixed by recording
        // order, which makes the sweep deterministic.
        std::unordered_set<Node*> visited;
        std::vector<std::pair<Node*, std::size_t>> stack;
        stack.emplace_back(root, 0);
        visited.insert(root);
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->parents.size()) {
                Node* p = n->parents[next++].get();
                if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node> node_;
};

namespace detail {

template <class S>
Tensor<S> make_op(const char* name, Shape out_shape, std::vector<S> value,
                  std::vector<Tensor<S>> parents, std::function<void(Node<S>&)> backward) {
    auto n = std::make_shared<Node<S>>();
    n->shape = std::move(out_shape);
    n->value = std::move(value);
    n->op = name;
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    n->requires_grad = rg;
    if (rg) {
        n->ensure_grad();
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(backward);
    }
    return Tensor<S>::adopt(std::move(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise unary operations
// ---------------------------------------------------------------------------

namespace detail {

template <class S, class FwdFn, class BwdFn>
Tensor<S> unary_op(const char* name, const Tensor<S>& x, FwdFn fwd, BwdFn dfdx_from_xy) {
    const std::size_t n = x.size();
    std::vector<S> out(n);
    const S* xv = x.data().data();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(xv[i]);
    auto xnode = x.node();
    return make_op<S>(
        name, x.shape(), std::move(out), {x}, [xnode, dfdx_from_xy](Node<S>& self) {
            Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            const std::size_t n = self.numel();
            for (std::size_t i = 0; i < n; ++i)
                p->grad[i] += self.grad[i] * dfdx_from_xy(p->value[i], self.value[i]);
        });
}

}  // namespace detail

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
    return detail::unary_op<S>(
        "relu", x, [](S v) { return v > S(0) ? v : S(0); },
        [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    return detail::unary_op<S>(
        "sigmoid", x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
        [](S, S y) { return y * (S(1) - y); });
}

template <class S>
Tensor<S> square(const Tensor<S>& x) {
    return detail::unary_op<S>(
        "square", x, [](S v) { return v * v; }, [](S v, S) { return S(2) * v; });
}

// Derivative is 0.5/sqrt(x); callers must keep inputs strictly positive.
template <class S>
Tensor<S> sqrt_op(const Tensor<S>& x) {
    return detail::unary_op<S>(
        "sqrt", x, [](S v) { return std::sqrt(v); }, [](S, S y) { return S(0.5) / y; });
}

template <class S>
Tensor<S> exp_op(const Tensor<S>& x) {
    return detail::unary_op<S>(
        "exp", x, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}

// Callers must keep inputs strictly positive.
template <class S>
Tensor<S> log_op(const Tensor<S>& x) {
    return detail::unary_op<S>(
        "log", x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}

template <class S>
Tensor<S> neg(const Tensor<S>& x) {
    return detail::unary_op<S>(
        "neg", x, [](S v) { return -v; }, [](S, S) { return S(-1); });
}

template <class S>
Tensor<S> scale(const Tensor<S>& x, S k) {
    return detail::unary_op<S>(
        "scale", x, [k](S v) { return k * v; }, [k](S, S) { return k; });
}

template <class S>
Tensor<S> add_scalar(const Tensor<S>& x, S k) {
    return detail::unary_op<S>(
        "add_scalar", x, [k](S v) { return v + k; }, [](S, S) { return S(1); });
}

// ---------------------------------------------------------------------------
// Elementwise binary operations with broadcasting
// ---------------------------------------------------------------------------

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1)
            throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                                 shape_str(b) + " are not broadcast-compatible");
        out[i] = std::max(da, db);
    }
    return out;
}

template <class S, class FwdFn, class DaFn, class DbFn>
Tensor<S> binary_op(const char* name, const Tensor<S>& a, const Tensor<S>& b, FwdFn fwd,
                    DaFn dda, DbFn ddb) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
    const std::size_t total = shape_numel(out_shape);
    std::vector<S> out(total);
    const S* av = a.data().data();
    const S* bv = b.data().data();

    const bool same = a.shape() == b.shape();
    std::vector<std::size_t> sa, sb;
    if (same) {
        for (std::size_t i = 0; i < total; ++i) out[i] = fwd(av[i], bv[i]);
    } else {
        sa = broadcast_strides(a.shape(), out_shape);
        sb = broadcast_strides(b.shape(), out_shape);
        for_each_broadcast(out_shape, sa, sb,
                           [&](std::size_t lin, std::size_t ia, std::size_t ib) {
                               out[lin] = fwd(av[ia], bv[ib]);
                           });
    }

    auto anode = a.node();
    auto bnode = b.node();
    return make_op<S>(
        name, out_shape, std::move(out), {a, b},
        [anode, bnode, same, sa, sb, dda, ddb](Node<S>& self) {
            Node<S>* pa = anode.get();
            Node<S>* pb = bnode.get();
            const std::size_t total = self.numel();
            if (same) {
                for (std::size_t i = 0; i < total; ++i) {
                    const S g = self.grad[i];
                    if (pa->requires_grad) pa->grad[i] += g * dda(pa->value[i], pb->value[i], self.value[i]);
                    if (pb->requires_grad) pb->grad[i] += g * ddb(pa->value[i], pb->value[i], self.value[i]);
                }
            } else {
                for_each_broadcast(self.shape, sa, sb,
                                   [&](std::size_t lin, std::size_t ia, std::size_t ib) {
                                       const S g = self.grad[lin];
                                       if (pa->requires_grad)
                                           pa->grad[ia] += g * dda(pa->value[ia], pb->value[ib], self.value[lin]);
                                       if (pb->requires_grad)
                                           pb->grad[ib] += g * ddb(pa->value[ia], pb->value[ib], self.value[lin]);
                                   });
            }
        });
}

}  // namespace detail

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    return detail::binary_op<S>(
        "add", a, b, [](S x, S y) { return x + y; }, [](S, S, S) { return S(1); },
        [](S, S, S) { return S(1); });
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    return detail::binary_op<S>(
        "sub", a, b, [](S x, S y) { return x - y; }, [](S, S, S) { return S(1); },
        [](S, S, S) { return S(-1); });
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    return detail::binary_op<S>(
        "mul", a, b, [](S x, S y) { return x * y; }, [](S, S y, S) { return y; },
        [](S x, S, S) { return x; });
}

template <class S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) {
    return detail::binary_op<S>(
        "div", a, b, [](S x, S y) { return x / y; }, [](S, S y, S) { return S(1) / y; },
        [](S, S y, S out) { return -out / y; });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

namespace detail {

// C[m x n] += A[m x k] * B[k x n], ikj order.
template <class S>
void gemm_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const S* arow = a + i * k;
        S* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const S av = arow[l];
            if (av == S(0)) continue;
            const S* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// dA[m x k] += dC[m x n] * B^T, i.e. dA(i,l) += sum_j dC(i,j) B(l,j)
template <class S>
void gemm_acc_bt(const S* dc, const S* b, S* da, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const S* dcrow = dc + i * n;
        S* darow = da + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const S* brow = b + l * n;
            S acc = S(0);
            for (std::size_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
            darow[l] += acc;
        }
    }
}

// dB[k x n] += A^T * dC, i.e. dB(l,j) += sum_i A(i,l) dC(i,j)
template <class S>
void gemm_acc_at(const S* a, const S* dc, S* db, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const S* arow = a + i * k;
        const S* dcrow = dc + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const S av = arow[l];
            if (av == S(0)) continue;
            S* dbrow = db + l * n;
            for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
        }
    }
}

}  // namespace detail

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<S> out(m * n, S(0));
    detail::gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto anode = a.node();
    auto bnode = b.node();
    return detail::make_op<S>(
        "matmul", {m, n}, std::move(out), {a, b}, [anode, bnode, m, k, n](detail::Node<S>& self) {
            detail::Node<S>* pa = anode.get();
            detail::Node<S>* pb = bnode.get();
            if (pa->requires_grad)
                detail::gemm_acc_bt(self.grad.data(), pb->value.data(), pa->grad.data(), m, k, n);
            if (pb->requires_grad)
                detail::gemm_acc_at(pa->value.data(), self.grad.data(), pb->grad.data(), m, k, n);
        });
}

// Batched matmul: [B,m,k] x [B,k,n] -> [B,m,n].
template <class S>
Tensor<S> bmm(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
        a.shape()[2] != b.shape()[1])
        throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const std::size_t bs = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[2];
    std::vector<S> out(bs * m * n, S(0));
    for (std::size_t i = 0; i < bs; ++i)
        detail::gemm_acc(a.data().data() + i * m * k, b.data().data() + i * k * n,
                         out.data() + i * m * n, m, k, n);
    auto anode = a.node();
    auto bnode = b.node();
    return detail::make_op<S>(
        "bmm", {bs, m, n}, std::move(out), {a, b}, [anode, bnode, bs, m, k, n](detail::Node<S>& self) {
            detail::Node<S>* pa = anode.get();
            detail::Node<S>* pb = bnode.get();
            for (std::size_t i = 0; i < bs; ++i) {
                if (pa->requires_grad)
                    detail::gemm_acc_bt(self.grad.data() + i * m * n, pb->value.data() + i * k * n,
                                        pa->grad.data() + i * m * k, m, k, n);
                if (pb->requires_grad)
                    detail::gemm_acc_at(pa->value.data() + i * m * k, self.grad.data() + i * m * n,
                                        pb->grad.data() + i * k * n, m, k, n);
            }
        });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

enum class Reduce { max, sum, mean };

namespace detail {

struct AxisSplit {
    std::size_t pre, axis, post;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
    if (axis >= s.size())
        throw DimensionError("reduce: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(s));
    AxisSplit r{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) r.pre *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.post *= s[i];
    return r;
}

inline Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
    Shape out = s;
    if (keepdim) {
        out[axis] = 1;
    } else {
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    }
    return out;
}

}  // namespace detail

template <class S>
Tensor<S> reduce(Reduce op, const Tensor<S>& x, std::size_t axis, bool keepdim = false) {
    const auto sp = detail::split_axis(x.shape(), axis);
    if (sp.axis == 0) throw DomainError("reduce: empty axis extent in " + shape_str(x.shape()));
    const std::size_t lanes = sp.pre * sp.post;
    std::vector<S> out(lanes);
    std::vector<std::size_t> argmax;
    const S* xv = x.data().data();
    if (op == Reduce::max) argmax.resize(lanes);
    for (std::size_t p = 0; p < sp.pre; ++p) {
        for (std::size_t q = 0; q < sp.post; ++q) {
            const std::size_t base = p * sp.axis * sp.post + q;
            const std::size_t lane = p * sp.post + q;
            if (op == Reduce::max) {
                S best = xv[base];
                std::size_t besta = 0;
                for (std::size_t a = 1; a < sp.axis; ++a) {
                    const S v = xv[base + a * sp.post];
                    if (v > best) {  // ties keep the first index
                        best = v;
                        besta = a;
                    }
                }
                out[lane] = best;
                argmax[lane] = besta;
            } else {
                S acc = S(0);
                for (std::size_t a = 0; a < sp.axis; ++a) acc += xv[base + a * sp.post];
                out[lane] = op == Reduce::mean ? acc / S(sp.axis) : acc;
            }
        }
    }
    auto xnode = x.node();
    return detail::make_op<S>(
        op == Reduce::max   ? "reduce_max"
        : op == Reduce::sum ? "reduce_sum"
                            : "reduce_mean",
        detail::reduced_shape(x.shape(), axis, keepdim), std::move(out), {x},
        [xnode, sp, op, argmax](detail::Node<S>& self) {
            detail::Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            for (std::size_t pp = 0; pp < sp.pre; ++pp) {
                for (std::size_t q = 0; q < sp.post; ++q) {
                    const std::size_t base = pp * sp.axis * sp.post + q;
                    const std::size_t lane = pp * sp.post + q;
                    const S g = self.grad[lane];
                    if (op == Reduce::max) {
                        p->grad[base + argmax[lane] * sp.post] += g;
                    } else if (op == Reduce::sum) {
                        for (std::size_t a = 0; a < sp.axis; ++a) p->grad[base + a * sp.post] += g;
                    } else {
                        const S gm = g / S(sp.axis);
                        for (std::size_t a = 0; a < sp.axis; ++a) p->grad[base + a * sp.post] += gm;
                    }
                }
            }
        });
}

template <class S>
Tensor<S> reduce_max(const Tensor<S>& x, std::size_t axis, bool keepdim = false) {
    return reduce(Reduce::max, x, axis, keepdim);
}
template <class S>
Tensor<S> reduce_sum(const Tensor<S>& x, std::size_t axis, bool keepdim = false) {
    return reduce(Reduce::sum, x, axis, keepdim);
}
template <class S>
Tensor<S> reduce_mean(const Tensor<S>& x, std::size_t axis, bool keepdim = false) {
    return reduce(Reduce::mean, x, axis, keepdim);
}

template <class S>
Tensor<S> sum_all(const Tensor<S>& x) {
    return reduce_sum(reshape(x, {x.size()}), 0);
}

template <class S>
Tensor<S> mean_all(const Tensor<S>& x) {
    return reduce_mean(reshape(x, {x.size()}), 0);
}

// ---------------------------------------------------------------------------
// Softmax and L2 norm
// ---------------------------------------------------------------------------

// Numerically stable softmax along `axis` (max subtraction per lane).
template <class S>
Tensor<S> softmax(const Tensor<S>& x, std::size_t axis) {
    const auto sp = detail::split_axis(x.shape(), axis);
    const S* xv = x.data().data();
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::isnan(static_cast<double>(xv[i]))) throw NumericError("softmax: NaN input");
    std::vector<S> out(x.size());
    for (std::size_t p = 0; p < sp.pre; ++p) {
        for (std::size_t q = 0; q < sp.post; ++q) {
            const std::size_t base = p * sp.axis * sp.post + q;
            S mx = xv[base];
            for (std::size_t a = 1; a < sp.axis; ++a) mx = std::max(mx, xv[base + a * sp.post]);
            S denom = S(0);
            for (std::size_t a = 0; a < sp.axis; ++a) {
                const S e = std::exp(xv[base + a * sp.post] - mx);
                out[base + a * sp.post] = e;
                denom += e;
            }
            for (std::size_t a = 0; a < sp.axis; ++a) out[base + a * sp.post] /= denom;
        }
    }
    auto xnode = x.node();
    return detail::make_op<S>(
        "softmax", x.shape(), std::move(out), {x}, [xnode, sp](detail::Node<S>& self) {
            detail::Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            // dx = y * (dy - sum(dy * y)) per lane
            for (std::size_t pp = 0; pp < sp.pre; ++pp) {
                for (std::size_t q = 0; q < sp.post; ++q) {
                    const std::size_t base = pp * sp.axis * sp.post + q;
                    S dot = S(0);
                    for (std::size_t a = 0; a < sp.axis; ++a) {
                        const std::size_t i = base + a * sp.post;
                        dot += self.grad[i] * self.value[i];
                    }
                    for (std::size_t a = 0; a < sp.axis; ++a) {
                        const std::size_t i = base + a * sp.post;
                        p->grad[i] += self.value[i] * (self.grad[i] - dot);
                    }
                }
            }
        });
}

// sqrt(sum of squares + epsilon) along `axis`. The epsilon keeps the gradient
// finite at the origin.
template <class S>
Tensor<S> l2_norm(const Tensor<S>& x, std::size_t axis, S epsilon = S(1e-9), bool keepdim = false) {
    if (!(epsilon > S(0))) throw ArgumentError("l2_norm: epsilon must be positive");
    const auto sp = detail::split_axis(x.shape(), axis);
    const std::size_t lanes = sp.pre * sp.post;
    std::vector<S> out(lanes);
    const S* xv = x.data().data();
    for (std::size_t p = 0; p < sp.pre; ++p) {
        for (std::size_t q = 0; q < sp.post; ++q) {
            const std::size_t base = p * sp.axis * sp.post + q;
            S acc = epsilon;
            for (std::size_t a = 0; a < sp.axis; ++a) {
                const S v = xv[base + a * sp.post];
                acc += v * v;
            }
            out[p * sp.post + q] = std::sqrt(acc);
        }
    }
    auto xnode = x.node();
    return detail::make_op<S>(
        "l2_norm", detail::reduced_shape(x.shape(), axis, keepdim), std::move(out), {x},
        [xnode, sp](detail::Node<S>& self) {
            detail::Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            for (std::size_t pp = 0; pp < sp.pre; ++pp) {
                for (std::size_t q = 0; q < sp.post; ++q) {
                    const std::size_t base = pp * sp.axis * sp.post + q;
                    const std::size_t lane = pp * sp.post + q;
                    const S inv = self.grad[lane] / self.value[lane];
                    for (std::size_t a = 0; a < sp.axis; ++a) {
                        const std::size_t i = base + a * sp.post;
                        p->grad[i] += p->value[i] * inv;
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.size())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(new_shape));
    auto xnode = x.node();
    return detail::make_op<S>(
        "reshape", std::move(new_shape), std::vector<S>(x.data()), {x},
        [xnode](detail::Node<S>& self) {
            detail::Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            for (std::size_t i = 0; i < self.numel(); ++i) p->grad[i] += self.grad[i];
        });
}

// Swap the last two dimensions (rank >= 2).
template <class S>
Tensor<S> transpose_last2(const Tensor<S>& x) {
    if (x.rank() < 2) throw DimensionError("transpose: rank must be >= 2, got " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    const std::size_t r = out_shape.size();
    std::swap(out_shape[r - 1], out_shape[r - 2]);
    const std::size_t rows = x.shape()[r - 2], cols = x.shape()[r - 1];
    const std::size_t mats = x.size() / (rows * cols);
    std::vector<S> out(x.size());
    const S* xv = x.data().data();
    for (std::size_t m = 0; m < mats; ++m) {
        const std::size_t off = m * rows * cols;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) out[off + j * rows + i] = xv[off + i * cols + j];
    }
    auto xnode = x.node();
    return detail::make_op<S>(
        "transpose", std::move(out_shape), std::move(out), {x},
        [xnode, mats, rows, cols](detail::Node<S>& self) {
            detail::Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            for (std::size_t m = 0; m < mats; ++m) {
                const std::size_t off = m * rows * cols;
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        p->grad[off + i * cols + j] += self.grad[off + j * rows + i];
            }
        });
}

// Concatenate along the last axis; all other extents must match.
template <class S>
Tensor<S> concat_last(const std::vector<Tensor<S>>& parts) {
    if (parts.empty()) throw ArgumentError("concat: no operands");
    const Shape& ref = parts[0].shape();
    std::size_t total_last = 0;
    for (const auto& t : parts) {
        if (t.rank() != ref.size())
            throw DimensionError("concat: rank mismatch " + shape_str(t.shape()));
        for (std::size_t d = 0; d + 1 < ref.size(); ++d)
            if (t.shape()[d] != ref[d])
                throw DimensionError("concat: shapes " + shape_str(ref) + " and " +
                                     shape_str(t.shape()) + " differ before the last axis");
        total_last += t.shape().back();
    }
    Shape out_shape = ref;
    out_shape.back() = total_last;
    const std::size_t rows = shape_numel(out_shape) / total_last;
    std::vector<S> out(rows * total_last);
    std::size_t col_off = 0;
    for (const auto& t : parts) {
        const std::size_t w = t.shape().back();
        const S* tv = t.data().data();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(tv + r * w, tv + (r + 1) * w, out.begin() + static_cast<std::ptrdiff_t>(r * total_last + col_off));
        col_off += w;
    }
    std::vector<std::shared_ptr<detail::Node<S>>> pnodes;
    std::vector<std::size_t> widths;
    for (const auto& t : parts) {
        pnodes.push_back(t.node());
        widths.push_back(t.shape().back());
    }
    return detail::make_op<S>(
        "concat", std::move(out_shape), std::move(out), parts,
        [pnodes, widths, rows, total_last](detail::Node<S>& self) {
            std::size_t col_off = 0;
            for (std::size_t k = 0; k < pnodes.size(); ++k) {
                detail::Node<S>* p = pnodes[k].get();
                const std::size_t w = widths[k];
                if (p->requires_grad) {
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < w; ++j)
                            p->grad[r * w + j] += self.grad[r * total_last + col_off + j];
                }
                col_off += w;
            }
        });
}

// Materialize a broadcast: expand size-1 dimensions of x to `out_shape`.
template <class S>
Tensor<S> expand(const Tensor<S>& x, Shape out_shape) {
    const Shape bshape = detail::broadcast_shape(x.shape(), out_shape, "expand");
    if (bshape != out_shape)
        throw DimensionError("expand: cannot expand " + shape_str(x.shape()) + " to " +
                             shape_str(out_shape));
    const auto sx = detail::broadcast_strides(x.shape(), out_shape);
    const std::vector<std::size_t> zero(out_shape.size(), 0);
    std::vector<S> out(shape_numel(out_shape));
    const S* xv = x.data().data();
    detail::for_each_broadcast(out_shape, sx, zero, [&](std::size_t lin, std::size_t ix, std::size_t) {
        out[lin] = xv[ix];
    });
    auto xnode = x.node();
    return detail::make_op<S>(
        "expand", std::move(out_shape), std::move(out), {x},
        [xnode, sx, zero](detail::Node<S>& self) {
            detail::Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            detail::for_each_broadcast(self.shape, sx, zero,
                                       [&](std::size_t lin, std::size_t ix, std::size_t) {
                                           p->grad[ix] += self.grad[lin];
                                       });
        });
}

// Gather feature rows by index: x[B,N,C] with idx[B,N,K] -> [B,N,K,C].
// Indices are not differentiated; the backward pass scatter-adds into x.
template <class S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<std::size_t>& idx, std::size_t k) {
    if (x.rank() != 3) throw DimensionError("gather_rows: expected rank-3 input, got " + shape_str(x.shape()));
    const std::size_t B = x.shape()[0], N = x.shape()[1], C = x.shape()[2];
    if (idx.size() != B * N * k) throw DimensionError("gather_rows: index table size mismatch");
    std::vector<S> out(B * N * k * C);
    const S* xv = x.data().data();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t j = 0; j < k; ++j) {
                const std::size_t src = idx[(b * N + n) * k + j];
                const S* row = xv + (b * N + src) * C;
                S* dst = out.data() + ((b * N + n) * k + j) * C;
                std::copy(row, row + C, dst);
            }
    auto xnode = x.node();
    return detail::make_op<S>(
        "gather_rows", {B, N, k, C}, std::move(out), {x},
        [xnode, idx, B, N, k, C](detail::Node<S>& self) {
            detail::Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::size_t src = idx[(b * N + n) * k + j];
                        const S* g = self.grad.data() + ((b * N + n) * k + j) * C;
                        S* dst = p->grad.data() + (b * N + src) * C;
                        for (std::size_t c = 0; c < C; ++c) dst[c] += g[c];
                    }
        });
}

// ---------------------------------------------------------------------------
// Construction helpers
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> randn(Rng& rng, Shape shape, S std = S(1), bool requires_grad = false) {
    std::vector<S> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<S>(rng.normal()) * std;
    return Tensor<S>::from(std::move(shape), std::move(data), requires_grad);
}

template <class S>
Tensor<S> rand_uniform(Rng& rng, Shape shape, S lo, S hi, bool requires_grad = false) {
    std::vector<S> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<S>(rng.uniform(lo, hi));
    return Tensor<S>::from(std::move(shape), std::move(data), requires_grad);
}

template <class S>
bool all_finite(const Tensor<S>& t) {
    for (S v : t.data())
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

}  // namespace pointcaps
