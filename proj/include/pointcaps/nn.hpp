#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pointcaps/rng.hpp"
#include "pointcaps/tensor.hpp"

// Trainable-layer building blocks shared by the extractors and classifier
// heads. Parameters live in a ParamStore keyed by a stable path string; the
// store's insertion order fixes optimizer iteration and checkpoint layout.

namespace pointcaps {

template <class S>
class ParamStore {
  public:
    struct Entry {
        std::string name;
        Tensor<S> tensor;
        bool trainable;
    };

    Tensor<S> add_param(const std::string& name, Tensor<S> t) {
        t.set_requires_grad(true);
        insert(name, t, true);
        return t;
    }

    Tensor<S> add_buffer(const std::string& name, Tensor<S> t) {
        insert(name, t, false);
        return t;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<S> get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ArgumentError("parameter '" + name + "' not found");
        return entries_[it->second].tensor;
    }

    const std::vector<Entry>& entries() const { return entries_; }

    std::size_t trainable_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.trainable) n += e.tensor.size();
        return n;
    }

  private:
    void insert(const std::string& name, Tensor<S> t, bool trainable) {
        if (has(name)) throw ArgumentError("duplicate parameter path '" + name + "'");
        index_[name] = entries_.size();
        entries_.push_back(Entry{name, std::move(t), trainable});
    }

    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

// Gaussian init, std = scale / sqrt(fan_in).
template <class S>
Tensor<S> init_weight(Rng& rng, std::size_t fan_in, Shape shape, double scale = 1.0) {
    const S std = static_cast<S>(scale / std::sqrt(static_cast<double>(fan_in)));
    return randn<S>(rng, std::move(shape), std);
}

template <class S>
struct Linear {
    Tensor<S> w;  // in x out
    Tensor<S> b;  // out

    static Linear create(ParamStore<S>& store, const std::string& path, std::size_t in,
                         std::size_t out, Rng& rng, double scale = 1.0) {
        Linear l;
        l.w = store.add_param(path + ".w", init_weight<S>(rng, in, {in, out}, scale));
        l.b = store.add_param(path + ".b", Tensor<S>::zeros({out}));
        return l;
    }

    // Zero weights with a fixed bias; used for identity-initialized heads.
    static Linear create_const(ParamStore<S>& store, const std::string& path, std::size_t in,
                               std::vector<S> bias) {
        Linear l;
        const std::size_t out = bias.size();
        l.w = store.add_param(path + ".w", Tensor<S>::zeros({in, out}));
        l.b = store.add_param(path + ".b", Tensor<S>::from({out}, std::move(bias)));
        return l;
    }

    Tensor<S> apply(const Tensor<S>& x) const { return add(matmul(x, w), b); }
};

namespace detail {

// Fused normalization (x - mean) / sqrt(var + eps) over rows of a 2-D input,
// differentiating through the batch statistics.
template <class S>
Tensor<S> standardize_rows(const Tensor<S>& x, S eps) {
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    const S* xv = x.data().data();
    std::vector<S> out(rows * cols);
    std::vector<S> inv_sigma(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        S mean = 0;
        for (std::size_t r = 0; r < rows; ++r) mean += xv[r * cols + c];
        mean /= static_cast<S>(rows);
        S var = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            const S d = xv[r * cols + c] - mean;
            var += d * d;
        }
        var /= static_cast<S>(rows);
        const S is = S(1) / std::sqrt(var + eps);
        inv_sigma[c] = is;
        for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = (xv[r * cols + c] - mean) * is;
    }
    auto xnode = x.node();
    return make_op<S>(
        "standardize", x.shape(), std::move(out), {x},
        [xnode, rows, cols, inv_sigma](Node<S>& self) {
            Node<S>* p = xnode.get();
            if (!p->requires_grad) return;
            // dx = inv_sigma * (dy - mean(dy) - xhat * mean(dy * xhat))
            for (std::size_t c = 0; c < cols; ++c) {
                S gsum = 0, gxsum = 0;
                for (std::size_t r = 0; r < rows; ++r) {
                    const std::size_t i = r * cols + c;
                    gsum += self.grad[i];
                    gxsum += self.grad[i] * self.value[i];
                }
                gsum /= static_cast<S>(rows);
                gxsum /= static_cast<S>(rows);
                for (std::size_t r = 0; r < rows; ++r) {
                    const std::size_t i = r * cols + c;
                    p->grad[i] += inv_sigma[c] * (self.grad[i] - gsum - self.value[i] * gxsum);
                }
            }
        });
}

}  // namespace detail

// Batch normalization over the rows of a 2-D activation. Training mode uses
// batch statistics and refreshes the running averages (momentum 0.9); eval
// mode normalizes with the stored averages.
template <class S>
struct BatchNorm {
    Tensor<S> gamma, beta;
    Tensor<S> run_mean, run_var;  // buffers
    S momentum = S(0.9);
    S eps = S(1e-5);

    static BatchNorm create(ParamStore<S>& store, const std::string& path, std::size_t width) {
        BatchNorm bn;
        bn.gamma = store.add_param(path + ".gamma", Tensor<S>::ones({width}));
        bn.beta = store.add_param(path + ".beta", Tensor<S>::zeros({width}));
        bn.run_mean = store.add_buffer(path + ".run_mean", Tensor<S>::zeros({width}));
        bn.run_var = store.add_buffer(path + ".run_var", Tensor<S>::ones({width}));
        return bn;
    }

    Tensor<S> apply(const Tensor<S>& x, bool train) {
        if (x.rank() != 2 || x.shape()[1] != gamma.size())
            throw DimensionError("batchnorm: input " + shape_str(x.shape()) + " vs width " +
                                 std::to_string(gamma.size()));
        if (train) {
            update_running(x);
            return add(mul(detail::standardize_rows(x, eps), gamma), beta);
        }
        auto centered = sub(x, run_mean);
        auto sigma = sqrt_op(add_scalar(run_var, eps));
        return add(mul(div(centered, sigma), gamma), beta);
    }

  private:
    void update_running(const Tensor<S>& x) {
        const std::size_t rows = x.shape()[0], cols = x.shape()[1];
        const S* xv = x.data().data();
        auto& rm = run_mean.raw_data();
        auto& rv = run_var.raw_data();
        for (std::size_t c = 0; c < cols; ++c) {
            S mean = 0;
            for (std::size_t r = 0; r < rows; ++r) mean += xv[r * cols + c];
            mean /= static_cast<S>(rows);
            S var = 0;
            for (std::size_t r = 0; r < rows; ++r) {
                const S d = xv[r * cols + c] - mean;
                var += d * d;
            }
            var /= static_cast<S>(rows);
            rm[c] = momentum * rm[c] + (S(1) - momentum) * mean;
            rv[c] = momentum * rv[c] + (S(1) - momentum) * var;
        }
    }
};

// Inverted dropout; identity in eval mode.
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double rate, bool train, Rng& rng) {
    if (!train || rate == 0.0) return x;
    if (rate < 0.0 || rate >= 1.0) throw ArgumentError("dropout: rate must be in [0,1)");
    const S keep_inv = static_cast<S>(1.0 / (1.0 - rate));
    std::vector<S> mask(x.size());
    for (auto& m : mask) m = rng.uniform() >= rate ? keep_inv : S(0);
    return mul(x, Tensor<S>::from(x.shape(), std::move(mask)));
}

// Shared MLP: the same Linear(+BatchNorm)+ReLU stack applied to every row of
// a 2-D activation. Point extractors reshape B x N x C to (B*N) x C first.
template <class S>
struct SharedMlp {
    std::vector<Linear<S>> layers;
    std::vector<BatchNorm<S>> norms;

    static SharedMlp create(ParamStore<S>& store, const std::string& path, std::size_t in,
                            const std::vector<std::size_t>& widths, Rng& rng) {
        SharedMlp m;
        std::size_t cur = in;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            const std::string lp = path + ".l" + std::to_string(i);
            m.layers.push_back(Linear<S>::create(store, lp, cur, widths[i], rng));
            m.norms.push_back(BatchNorm<S>::create(store, lp + ".bn", widths[i]));
            cur = widths[i];
        }
        return m;
    }

    Tensor<S> apply(Tensor<S> x, bool train) {
        for (std::size_t i = 0; i < layers.size(); ++i)
            x = relu(norms[i].apply(layers[i].apply(x), train));
        return x;
    }

    std::size_t out_width() const { return layers.back().b.size(); }
};

}  // namespace pointcaps
