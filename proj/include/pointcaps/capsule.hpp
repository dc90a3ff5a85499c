#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pointcaps/nn.hpp"
#include "pointcaps/tensor.hpp"

// The capsule classifier head: ComposeCaps maps the aggregated feature
// vector to q primary capsules of dimension t, prediction matrices map each
// primary capsule to every class capsule, and routing-by-agreement couples
// them over r iterations. Class capsules have dimension z; the class whose
// capsule has the largest norm wins. Training combines a per-class margin
// loss with an alpha-weighted point reconstruction loss from a small decoder.
//
// No batch normalization is used anywhere in this head.

namespace pointcaps {

enum class SquashVariant {
    canonical,      // v = s * |s| / (1 + |s|^2), saturates toward unit norm
    paper_literal,  // v = s / (1 + |s|^2), kept for comparison runs
};

struct MarginConstants {
    double m_plus = 0.9;
    double m_minus = 0.1;
    double lambda = 0.5;
};

inline constexpr double kReconstructionAlpha = 0.0005;

// Squash along the last axis. The epsilon-guarded norm keeps the zero vector
// mapped to zero with a finite gradient.
template <class S>
Tensor<S> squash(const Tensor<S>& s, SquashVariant variant = SquashVariant::canonical) {
    const std::size_t axis = s.rank() - 1;
    auto n = l2_norm(s, axis, S(1e-9), true);
    auto denom = add_scalar(square(n), S(1));
    if (variant == SquashVariant::paper_literal) return div(s, denom);
    return mul(s, div(n, denom));
}

template <class S>
struct ComposeCapsParams {
    Tensor<S> w;  // m x (t*q)
    Tensor<S> b;  // t*q
    std::size_t q = 0, t = 0;
};

template <class S>
ComposeCapsParams<S> compose_create(ParamStore<S>& store, const std::string& path, std::size_t m,
                                    std::size_t q, std::size_t t, Rng& rng) {
    ComposeCapsParams<S> p;
    p.q = q;
    p.t = t;
    p.w = store.add_param(path + ".w", init_weight<S>(rng, m, {m, t * q}, 0.1));
    p.b = store.add_param(path + ".b", Tensor<S>::zeros({t * q}));
    return p;
}

// f: B x m -> primary capsule outputs B x q x t. The sigmoid activations are
// split row-major into q contiguous blocks of length t, then squashed.
template <class S>
Tensor<S> compose_caps(const Tensor<S>& f, const ComposeCapsParams<S>& p,
                       SquashVariant variant = SquashVariant::canonical) {
    if (f.rank() != 2 || f.shape()[1] != p.w.shape()[0])
        throw ConfigError("compose_caps: feature width " + shape_str(f.shape()) +
                          " does not match ComposeCaps input " + std::to_string(p.w.shape()[0]));
    auto activations = sigmoid(add(matmul(f, p.w), p.b));  // B x (t*q)
    auto caps = reshape(activations, {f.shape()[0], p.q, p.t});
    return squash(caps, variant);
}

// The no-ComposeCaps ablation: reshape the feature vector directly into
// m/t capsules of dimension t (no learned mapping), then squash.
template <class S>
Tensor<S> reshape_caps(const Tensor<S>& f, std::size_t t,
                       SquashVariant variant = SquashVariant::canonical) {
    if (f.rank() != 2) throw DimensionError("reshape_caps: expected B x m");
    const std::size_t m = f.shape()[1];
    if (m % t != 0)
        throw ConfigError("reshape_caps: feature width " + std::to_string(m) +
                          " is not divisible by capsule dimension " + std::to_string(t));
    return squash(reshape(f, {f.shape()[0], m / t, t}), variant);
}

// ---------------------------------------------------------------------------
// Prediction vectors
// ---------------------------------------------------------------------------

template <class S>
struct PredictParams {
    Tensor<S> w;  // q x c x z x t
};

template <class S>
PredictParams<S> predict_create(ParamStore<S>& store, const std::string& path, std::size_t q,
                                std::size_t c, std::size_t z, std::size_t t, Rng& rng) {
    PredictParams<S> p;
    p.w = store.add_param(path + ".w", init_weight<S>(rng, t, {q, c, z, t}, 0.1));
    return p;
}

// u: B x q x t -> uhat: B x q x c x z with uhat[b,i,j] = W[i,j] * u[b,i].
template <class S>
Tensor<S> predict_vectors(const Tensor<S>& u, const Tensor<S>& w) {
    if (u.rank() != 3 || w.rank() != 4 || u.shape()[1] != w.shape()[0] ||
        u.shape()[2] != w.shape()[3])
        throw DimensionError("predict_vectors: shapes " + shape_str(u.shape()) + " and " +
                             shape_str(w.shape()) + " are inconsistent");
    const std::size_t B = u.shape()[0], q = u.shape()[1], t = u.shape()[2];
    const std::size_t c = w.shape()[1], z = w.shape()[2];
    std::vector<S> out(B * q * c * z, S(0));
    const S* uv = u.data().data();
    const S* wv = w.data().data();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < q; ++i) {
            const S* urow = uv + (b * q + i) * t;
            for (std::size_t j = 0; j < c; ++j) {
                const S* wm = wv + ((i * c + j) * z) * t;
                S* orow = out.data() + ((b * q + i) * c + j) * z;
                for (std::size_t zz = 0; zz < z; ++zz) {
                    S acc = S(0);
                    const S* wrow = wm + zz * t;
                    for (std::size_t tt = 0; tt < t; ++tt) acc += wrow[tt] * urow[tt];
                    orow[zz] = acc;
                }
            }
        }
    auto unode = u.node();
    auto wnode = w.node();
    return detail::make_op<S>(
        "predict_vectors", {B, q, c, z}, std::move(out), {u, w},
        [unode, wnode, B, q, c, z, t](detail::Node<S>& self) {
            detail::Node<S>* pu = unode.get();
            detail::Node<S>* pw = wnode.get();
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t i = 0; i < q; ++i) {
                    const S* urow = pu->value.data() + (b * q + i) * t;
                    S* ugrad = pu->requires_grad ? pu->grad.data() + (b * q + i) * t : nullptr;
                    for (std::size_t j = 0; j < c; ++j) {
                        const S* wm = pw->value.data() + ((i * c + j) * z) * t;
                        S* wgrad = pw->requires_grad ? pw->grad.data() + ((i * c + j) * z) * t : nullptr;
                        const S* g = self.grad.data() + ((b * q + i) * c + j) * z;
                        for (std::size_t zz = 0; zz < z; ++zz) {
                            const S gz = g[zz];
                            if (gz == S(0)) continue;
                            for (std::size_t tt = 0; tt < t; ++tt) {
                                if (ugrad) ugrad[tt] += gz * wm[zz * t + tt];
                                if (wgrad) wgrad[zz * t + tt] += gz * urow[tt];
                            }
                        }
                    }
                }
        });
}

// ---------------------------------------------------------------------------
// Routing by agreement
// ---------------------------------------------------------------------------

// Per-iteration coupling snapshots (values only), for diagnostics and tests.
template <class S>
struct RoutingTrace {
    std::size_t q = 0, c = 0;
    std::vector<std::vector<S>> couplings;  // one B*q*c block per iteration
};

// uhat: B x q x c x z, routed for r iterations. Logits start at zero; every
// iteration computes couplings by softmax over the class axis, forms each
// class capsule as the coupling-weighted sum of predictions, squashes it,
// and reinforces logits by the prediction/output dot products. Gradients
// flow through the entire unrolled loop. The logit update of the final
// iteration cannot influence the returned capsules and is skipped.
template <class S>
Tensor<S> route(const Tensor<S>& uhat, std::size_t r, SquashVariant variant = SquashVariant::canonical,
                RoutingTrace<S>* trace = nullptr) {
    if (uhat.rank() != 4)
        throw DimensionError("route: expected B x q x c x z, got " + shape_str(uhat.shape()));
    if (r < 1) throw ArgumentError("route: iteration count must be >= 1");
    const std::size_t B = uhat.shape()[0], q = uhat.shape()[1], c = uhat.shape()[2],
                      z = uhat.shape()[3];
    if (trace) {
        trace->q = q;
        trace->c = c;
        trace->couplings.clear();
    }
    Tensor<S> logits = Tensor<S>::zeros({B, q, c});
    Tensor<S> v;
    for (std::size_t it = 0; it < r; ++it) {
        auto coupling = softmax(logits, 2);  // B x q x c, rows over c sum to 1
        if (trace) trace->couplings.push_back(coupling.data());
        auto weighted = mul(uhat, reshape(coupling, {B, q, c, std::size_t(1)}));
        auto s = reduce_sum(weighted, 1);  // B x c x z
        v = squash(s, variant);
        if (it + 1 < r) {
            auto agreement =
                reduce_sum(mul(uhat, reshape(v, {B, std::size_t(1), c, z})), 3);  // B x q x c
            logits = add(logits, agreement);
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Losses and prediction
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> one_hot(const std::vector<int>& labels, std::size_t classes) {
    std::vector<S> data(labels.size() * classes, S(0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw ArgumentError("label " + std::to_string(labels[i]) + " out of range [0," +
                                std::to_string(classes) + ")");
        data[i * classes + static_cast<std::size_t>(labels[i])] = S(1);
    }
    return Tensor<S>::from({labels.size(), classes}, std::move(data));
}

// Margin loss over class-capsule norms, summed over classes and averaged
// over the batch.
template <class S>
Tensor<S> margin_loss(const Tensor<S>& v, const std::vector<int>& labels,
                      MarginConstants mc = MarginConstants{}) {
    if (v.rank() != 3) throw DimensionError("margin_loss: expected B x c x z");
    const std::size_t c = v.shape()[1];
    if (labels.size() != v.shape()[0]) throw ArgumentError("margin_loss: label count mismatch");
    auto t = one_hot<S>(labels, c);
    auto norms = l2_norm(v, 2, S(1e-9));  // B x c
    auto pos = square(relu(add_scalar(neg(norms), static_cast<S>(mc.m_plus))));
    auto negv = square(relu(add_scalar(norms, static_cast<S>(-mc.m_minus))));
    auto per_class = add(mul(t, pos), scale(mul(add_scalar(neg(t), S(1)), negv),
                                            static_cast<S>(mc.lambda)));
    return reduce_mean(reduce_sum(per_class, 1), 0);
}

// Class = capsule with the largest norm; first index wins ties.
template <class S>
std::vector<int> classify(const Tensor<S>& v) {
    if (v.rank() != 3) throw DimensionError("classify: expected B x c x z");
    const std::size_t B = v.shape()[0], c = v.shape()[1], z = v.shape()[2];
    std::vector<int> out(B);
    const S* vv = v.data().data();
    for (std::size_t b = 0; b < B; ++b) {
        double best = -1;
        int best_j = 0;
        for (std::size_t j = 0; j < c; ++j) {
            double sq = 0;
            for (std::size_t k = 0; k < z; ++k) {
                const double e = static_cast<double>(vv[(b * c + j) * z + k]);
                sq += e * e;
            }
            if (sq > best) {
                best = sq;
                best_j = static_cast<int>(j);
            }
        }
        out[b] = best_j;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reconstruction decoder
// ---------------------------------------------------------------------------

template <class S>
struct DecoderParams {
    std::vector<Linear<S>> layers;
    std::size_t n_points = 0;
};

template <class S>
DecoderParams<S> decoder_create(ParamStore<S>& store, const std::string& path, std::size_t c,
                                std::size_t z, const std::vector<std::size_t>& hidden,
                                std::size_t n_points, Rng& rng) {
    DecoderParams<S> d;
    d.n_points = n_points;
    std::size_t cur = c * z;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        d.layers.push_back(Linear<S>::create(store, path + ".h" + std::to_string(i), cur,
                                             hidden[i], rng));
        cur = hidden[i];
    }
    d.layers.push_back(Linear<S>::create(store, path + ".out", cur, n_points * 3, rng));
    return d;
}

// Mask all but one capsule per sample (the target class in training, the
// argmax-norm class in eval), then decode to B x N x 3 points. Hidden layers
// use ReLU, the output layer is linear.
template <class S>
Tensor<S> decode(const Tensor<S>& v, const std::vector<int>& mask_labels, const DecoderParams<S>& d) {
    if (v.rank() != 3) throw DimensionError("decode: expected B x c x z");
    const std::size_t B = v.shape()[0], c = v.shape()[1], z = v.shape()[2];
    auto mask = reshape(one_hot<S>(mask_labels, c), {B, c, std::size_t(1)});
    auto x = reshape(mul(v, mask), {B, c * z});
    for (std::size_t i = 0; i + 1 < d.layers.size(); ++i) x = relu(d.layers[i].apply(x));
    x = d.layers.back().apply(x);
    return reshape(x, {B, d.n_points, 3});
}

// Index-paired squared reconstruction error, summed over points, averaged
// over the batch, scaled by alpha.
template <class S>
Tensor<S> reconstruction_loss(const Tensor<S>& x_rec, const Tensor<S>& x,
                              double alpha = kReconstructionAlpha) {
    if (x_rec.shape() != x.shape())
        throw DimensionError("reconstruction_loss: shapes " + shape_str(x_rec.shape()) + " and " +
                             shape_str(x.shape()) + " differ");
    const std::size_t B = x.shape()[0];
    auto sq = reshape(square(sub(x_rec, x)), {B, x.size() / B});
    return scale(reduce_mean(reduce_sum(sq, 1), 0), static_cast<S>(alpha));
}

// Symmetric Chamfer alternative for unordered sets, behind the same alpha.
template <class S>
Tensor<S> chamfer_loss(const Tensor<S>& x_rec, const Tensor<S>& x,
                       double alpha = kReconstructionAlpha) {
    if (x_rec.rank() != 3 || x.rank() != 3 || x_rec.shape()[0] != x.shape()[0] ||
        x_rec.shape()[2] != x.shape()[2])
        throw DimensionError("chamfer_loss: shapes " + shape_str(x_rec.shape()) + " and " +
                             shape_str(x.shape()) + " differ");
    const std::size_t B = x.shape()[0];
    auto cross = bmm(x_rec, transpose_last2(x));  // B x Nr x Nx
    auto a2 = reduce_sum(square(x_rec), 2, true);  // B x Nr x 1
    auto b2 = reshape(reduce_sum(square(x), 2), {B, std::size_t(1), x.shape()[1]});
    auto d2 = add(sub(a2, scale(cross, S(2))), b2);  // B x Nr x Nx
    auto min_over_x = neg(reduce_max(neg(d2), 2));   // B x Nr
    auto min_over_r = neg(reduce_max(neg(d2), 1));   // B x Nx
    auto per_sample = add(reduce_sum(min_over_x, 1), reduce_sum(min_over_r, 1));
    return scale(reduce_mean(per_sample, 0), static_cast<S>(alpha));
}

// ---------------------------------------------------------------------------
// Fully connected baseline classifier
// ---------------------------------------------------------------------------

template <class S>
struct FcBaseline {
    Linear<S> fc1, fc2, fc3;
    BatchNorm<S> bn1, bn2;
    double dropout_rate = 0.7;

    static FcBaseline create(ParamStore<S>& store, const std::string& path, std::size_t m,
                             std::size_t classes, Rng& rng, std::size_t h1 = 512,
                             std::size_t h2 = 256) {
        FcBaseline f;
        f.fc1 = Linear<S>::create(store, path + ".fc1", m, h1, rng);
        f.bn1 = BatchNorm<S>::create(store, path + ".fc1.bn", h1);
        f.fc2 = Linear<S>::create(store, path + ".fc2", h1, h2, rng);
        f.bn2 = BatchNorm<S>::create(store, path + ".fc2.bn", h2);
        f.fc3 = Linear<S>::create(store, path + ".fc3", h2, classes, rng);
        return f;
    }

    Tensor<S> apply(const Tensor<S>& f, bool train, Rng& rng) {
        auto h = dropout(relu(bn1.apply(fc1.apply(f), train)), dropout_rate, train, rng);
        h = dropout(relu(bn2.apply(fc2.apply(h), train)), dropout_rate, train, rng);
        return fc3.apply(h);
    }
};

// Softmax cross-entropy for the baseline, averaged over the batch.
template <class S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw DimensionError("cross_entropy: expected B x c logits");
    const std::size_t c = logits.shape()[1];
    auto shifted = sub(logits, reduce_max(logits, 1, true));
    auto log_probs = sub(shifted, log_op(reduce_sum(exp_op(shifted), 1, true)));
    auto t = one_hot<S>(labels, c);
    return neg(reduce_mean(reduce_sum(mul(t, log_probs), 1), 0));
}

template <class S>
std::vector<int> classify_logits(const Tensor<S>& logits) {
    const std::size_t B = logits.shape()[0], c = logits.shape()[1];
    std::vector<int> out(B);
    for (std::size_t b = 0; b < B; ++b) {
        S best = logits.data()[b * c];
        int bj = 0;
        for (std::size_t j = 1; j < c; ++j) {
            const S v = logits.data()[b * c + j];
            if (v > best) {
                best = v;
                bj = static_cast<int>(j);
            }
        }
        out[b] = bj;
    }
    return out;
}

}  // namespace pointcaps
