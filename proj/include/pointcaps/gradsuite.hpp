#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointcaps/gradcheck.hpp"
#include "pointcaps/model.hpp"

// Registered gradient-check suites: one randomized case per engine op, one
// per model block, and end-to-end cases through the full pipeline. All run
// at 64-bit. Case generators keep inputs away from non-differentiable points
// (relu kinks, max ties, small divisors) so central differences are valid.

namespace pointcaps {

enum class GradScope { ops, modules, full };

namespace gradgen {

using T = Tensor<double>;

// Weighted-sum probe: randomized weights catch element-permutation mistakes
// that a plain sum would miss. Weights derive from the seed alone so the
// probe is identical on every finite-difference re-evaluation.
inline T probe(const T& t, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(t.size());
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return sum_all(mul(t, T::from(t.shape(), std::move(w))));
}

// Standard normal values nudged away from zero (relu kink safety).
inline T randn_off_zero(Rng& rng, Shape shape) {
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) {
        v = rng.normal();
        if (std::fabs(v) < 0.1) v += v < 0 ? -0.2 : 0.2;
    }
    return T::from(std::move(shape), std::move(data));
}

// Values with pairwise gaps, safe for max reductions under finite differences.
inline T rand_spaced(Rng& rng, Shape shape) {
    const std::size_t n = shape_numel(shape);
    std::vector<double> data(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(order, rng);
    for (std::size_t i = 0; i < n; ++i) data[order[i]] = static_cast<double>(i) * 0.37 + rng.uniform(0.0, 0.05);
    return T::from(std::move(shape), std::move(data));
}

inline T rand_positive(Rng& rng, Shape shape, double lo = 0.3, double hi = 3.0) {
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = rng.uniform(lo, hi);
    return T::from(std::move(shape), std::move(data));
}

// Nudge every trainable parameter slightly, as one optimizer step would.
// Freshly built layers have exactly-zero biases, which can park hidden
// pre-activations exactly on a relu kink in tiny configurations; finite
// differences are undefined there.
inline void jitter_params(ParamStore<double>& store, Rng& rng, double amount = 0.05) {
    for (const auto& e : store.entries()) {
        if (!e.trainable) continue;
        Tensor<double> handle = e.tensor;
        for (auto& v : handle.raw_data()) v += rng.uniform(-amount, amount);
    }
}

template <class Builder>
GradCase make_case(std::string name, std::uint64_t seed, std::size_t n_seeds, Builder builder,
                   double tolerance = 1e-4) {
    GradCase c;
    c.name = std::move(name);
    c.tolerance = tolerance;
    c.run = [seed, n_seeds, builder]() {
        double worst = 0.0;
        for (std::size_t i = 0; i < n_seeds; ++i) {
            Rng rng = Rng(seed).fork(i + 1);
            worst = std::max(worst, builder(rng));
        }
        return worst;
    };
    return c;
}

}  // namespace gradgen

inline std::vector<GradCase> op_grad_cases(std::uint64_t seed, std::size_t n_seeds = 20) {
    using namespace gradgen;
    std::vector<GradCase> cases;

    cases.push_back(make_case("op.matmul", seed ^ 1, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {3, 4});
        auto b = randn<double>(rng, {4, 2});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(matmul(in[0], in[1]), pseed); },
                         {a, b})
            .worst;
    }));
    cases.push_back(make_case("op.bmm", seed ^ 2, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {2, 3, 4});
        auto b = randn<double>(rng, {2, 4, 2});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(bmm(in[0], in[1]), pseed); }, {a, b})
            .worst;
    }));
    cases.push_back(make_case("op.add_broadcast", seed ^ 3, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {2, 3, 4});
        auto b = randn<double>(rng, {4});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(add(in[0], in[1]), pseed); }, {a, b})
            .worst;
    }));
    cases.push_back(make_case("op.sub", seed ^ 4, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {3, 4});
        auto b = randn<double>(rng, {3, 4});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(sub(in[0], in[1]), pseed); }, {a, b})
            .worst;
    }));
    cases.push_back(make_case("op.mul_broadcast", seed ^ 5, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {2, 3, 2, 2});
        auto b = randn<double>(rng, {2, 3, 2, 1});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(mul(in[0], in[1]), pseed); }, {a, b})
            .worst;
    }));
    cases.push_back(make_case("op.div", seed ^ 6, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {3, 4});
        auto b = rand_positive(rng, {3, 4}, 0.5, 2.0);
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(div(in[0], in[1]), pseed); }, {a, b})
            .worst;
    }));
    cases.push_back(make_case("op.relu", seed ^ 7, n_seeds, [](Rng& rng) {
        auto a = randn_off_zero(rng, {4, 5});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(relu(in[0]), pseed); }, {a}).worst;
    }));
    cases.push_back(make_case("op.sigmoid", seed ^ 8, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {4, 5});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(sigmoid(in[0]), pseed); }, {a}).worst;
    }));
    cases.push_back(make_case("op.square", seed ^ 9, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {4, 5});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(square(in[0]), pseed); }, {a}).worst;
    }));
    cases.push_back(make_case("op.sqrt", seed ^ 10, n_seeds, [](Rng& rng) {
        auto a = rand_positive(rng, {4, 5});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(sqrt_op(in[0]), pseed); }, {a}).worst;
    }));
    cases.push_back(make_case("op.exp", seed ^ 11, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {4, 5});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(exp_op(in[0]), pseed); }, {a}).worst;
    }));
    cases.push_back(make_case("op.log", seed ^ 12, n_seeds, [](Rng& rng) {
        auto a = rand_positive(rng, {4, 5});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(log_op(in[0]), pseed); }, {a}).worst;
    }));
    cases.push_back(make_case("op.scale_shift", seed ^ 13, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {4, 5});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck(
                   [&](std::vector<T>& in) {
                       return probe(add_scalar(scale(neg(in[0]), 1.7), -0.3), pseed);
                   },
                   {a})
            .worst;
    }));
    cases.push_back(make_case("op.reduce_sum", seed ^ 14, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {3, 4, 2});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(reduce_sum(in[0], 1), pseed); }, {a})
            .worst;
    }));
    cases.push_back(make_case("op.reduce_mean", seed ^ 15, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {3, 4, 2});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(reduce_mean(in[0], 0), pseed); }, {a})
            .worst;
    }));
    cases.push_back(make_case("op.reduce_max", seed ^ 16, n_seeds, [](Rng& rng) {
        auto a = rand_spaced(rng, {3, 4, 2});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(reduce_max(in[0], 1), pseed); }, {a})
            .worst;
    }));
    cases.push_back(make_case("op.softmax", seed ^ 17, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {4, 5});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(softmax(in[0], 1), pseed); }, {a},
                         1e-5, 1e-5)
            .worst;
    }, 1e-5));
    cases.push_back(make_case("op.l2_norm", seed ^ 18, n_seeds, [](Rng& rng) {
        auto a = randn_off_zero(rng, {3, 4});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck(
                   [&](std::vector<T>& in) { return probe(l2_norm(in[0], 1, 1e-9, true), pseed); },
                   {a})
            .worst;
    }));
    cases.push_back(make_case("op.reshape_transpose", seed ^ 19, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {3, 4});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck(
                   [&](std::vector<T>& in) {
                       return probe(transpose_last2(reshape(in[0], {2, 6})), pseed);
                   },
                   {a})
            .worst;
    }));
    cases.push_back(make_case("op.concat", seed ^ 20, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {2, 3});
        auto b = randn<double>(rng, {2, 2});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck(
                   [&](std::vector<T>& in) { return probe(concat_last<double>({in[0], in[1]}), pseed); },
                   {a, b})
            .worst;
    }));
    cases.push_back(make_case("op.expand", seed ^ 21, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {2, 1, 3});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(expand(in[0], {2, 4, 3}), pseed); },
                         {a})
            .worst;
    }));
    cases.push_back(make_case("op.gather_rows", seed ^ 22, n_seeds, [](Rng& rng) {
        auto a = randn<double>(rng, {2, 4, 3});
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < 2 * 4 * 2; ++i) idx.push_back(rng.uniform_index(4));
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(gather_rows(in[0], idx, 2), pseed); },
                         {a})
            .worst;
    }));
    return cases;
}

namespace gradgen {

// Run gradcheck over a model-like forward: inputs are the data tensor plus
// every trainable parameter, so the oracle covers all of them.
template <class Fwd>
double check_with_params(const ParamStore<double>& store, T data, Fwd fwd) {
    std::vector<T> inputs{std::move(data)};
    for (const auto& e : store.entries())
        if (e.trainable) inputs.push_back(e.tensor);
    return gradcheck([&](std::vector<T>& in) { return fwd(in[0]); }, std::move(inputs)).worst;
}

}  // namespace gradgen

inline std::vector<GradCase> module_grad_cases(std::uint64_t seed) {
    using namespace gradgen;
    std::vector<GradCase> cases;

    cases.push_back(make_case("module.batchnorm_train", seed ^ 31, 5, [](Rng& rng) {
        ParamStore<double> store;
        auto bn = BatchNorm<double>::create(store, "bn", 3);
        auto x = randn<double>(rng, {5, 3});
        const std::uint64_t pseed = rng.next_u64();
        return check_with_params(store, x, [&](T& data) { return probe(bn.apply(data, true), pseed); });
    }));
    cases.push_back(make_case("module.shared_mlp", seed ^ 32, 5, [](Rng& rng) {
        ParamStore<double> store;
        auto mlp = SharedMlp<double>::create(store, "mlp", 3, {4, 5}, rng);
        auto x = randn<double>(rng, {6, 3});
        const std::uint64_t pseed = rng.next_u64();
        return check_with_params(store, x, [&](T& data) { return probe(mlp.apply(data, true), pseed); });
    }));
    cases.push_back(make_case("module.stn3", seed ^ 33, 3, [](Rng& rng) {
        ExtractorSpec spec;
        spec.stn_mlp = {4, 8};
        spec.stn_fc = 8;
        ParamStore<double> store;
        auto stn = Stn<double>::create(store, "stn", 3, spec, rng);
        auto x = randn<double>(rng, {1, 4, 3});
        const std::uint64_t pseed = rng.next_u64();
        return check_with_params(store, x, [&](T& data) { return probe(stn.apply(data, true), pseed); });
    }));
    cases.push_back(make_case("module.pointnet_extractor", seed ^ 34, 3, [](Rng& rng) {
        ExtractorSpec spec;
        spec.final_width = 6;
        spec.pn_mlp1 = {4, 4};
        spec.pn_mlp2 = {5};
        spec.stn_mlp = {4, 6};
        spec.stn_fc = 6;
        ParamStore<double> store;
        auto ex = PointNetExtractor<double>::create(store, "pn", spec, rng);
        auto x = randn<double>(rng, {1, 4, 3});
        const std::uint64_t pseed = rng.next_u64();
        return check_with_params(store, x, [&](T& data) { return probe(ex.apply(data, true), pseed); });
    }));
    cases.push_back(make_case("module.edgeconv_extractor", seed ^ 35, 3, [](Rng& rng) {
        ExtractorSpec spec;
        spec.kind = ExtractorKind::edgeconv;
        spec.final_width = 5;
        spec.ec_block1 = {4, 4};
        spec.ec_block2 = {6};
        spec.knn_k = 2;
        ParamStore<double> store;
        auto ex = EdgeConvExtractor<double>::create(store, "ec", spec, rng);
        auto x = randn<double>(rng, {1, 6, 3});
        const std::uint64_t pseed = rng.next_u64();
        return check_with_params(store, x, [&](T& data) { return probe(ex.apply(data, true), pseed); });
    }));
    cases.push_back(make_case("module.maxpool_aggregate", seed ^ 36, 5, [](Rng& rng) {
        auto x = rand_spaced(rng, {1, 5, 3});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(maxpool_aggregate(in[0]), pseed); },
                         {x})
            .worst;
    }));
    cases.push_back(make_case("module.vlad_aggregate", seed ^ 37, 3, [](Rng& rng) {
        ParamStore<double> store;
        auto vlad = vlad_create<double>(store, "vlad", 2, 3, rng);
        auto x = randn<double>(rng, {1, 4, 3});
        const std::uint64_t pseed = rng.next_u64();
        return check_with_params(store, x,
                                 [&](T& data) { return probe(vlad_aggregate(data, vlad), pseed); });
    }));
    cases.push_back(make_case("module.compose_caps", seed ^ 38, 5, [](Rng& rng) {
        ParamStore<double> store;
        auto cc = compose_create<double>(store, "cc", 6, 2, 3, rng);
        auto f = randn<double>(rng, {2, 6});
        const std::uint64_t pseed = rng.next_u64();
        return check_with_params(store, f,
                                 [&](T& data) { return probe(compose_caps(data, cc), pseed); });
    }));
    cases.push_back(make_case("module.squash", seed ^ 39, 10, [](Rng& rng) {
        auto s = randn_off_zero(rng, {3, 4});
        const std::uint64_t pseed = rng.next_u64();
        const double a = gradcheck([&](std::vector<T>& in) { return probe(squash(in[0]), pseed); },
                                   {s})
                             .worst;
        const double b =
            gradcheck([&](std::vector<T>& in) {
                          return probe(squash(in[0], SquashVariant::paper_literal), pseed);
                      },
                      {s})
                .worst;
        return std::max(a, b);
    }));
    cases.push_back(make_case("module.predict_vectors", seed ^ 40, 5, [](Rng& rng) {
        ParamStore<double> store;
        auto pp = predict_create<double>(store, "pred", 2, 2, 2, 3, rng);
        auto u = randn<double>(rng, {2, 2, 3});
        const std::uint64_t pseed = rng.next_u64();
        return check_with_params(store, u, [&](T& data) {
            return probe(predict_vectors(data, pp.w), pseed);
        });
    }));
    cases.push_back(make_case("module.route_r3", seed ^ 41, 5, [](Rng& rng) {
        auto uhat = randn<double>(rng, {1, 3, 2, 2});
        const std::uint64_t pseed = rng.next_u64();
        return gradcheck([&](std::vector<T>& in) { return probe(route(in[0], 3), pseed); }, {uhat})
            .worst;
    }));
    cases.push_back(make_case("module.margin_loss", seed ^ 42, 5, [](Rng& rng) {
        auto v = scale(randn<double>(rng, {2, 3, 2}), 0.3);
        const std::vector<int> labels{1, 0};
        return gradcheck([&](std::vector<T>& in) { return margin_loss(in[0], labels); }, {v}).worst;
    }));
    cases.push_back(make_case("module.decoder_recon", seed ^ 43, 3, [](Rng& rng) {
        ParamStore<double> store;
        auto dec = decoder_create<double>(store, "dec", 2, 2, {5, 6}, 4, rng);
        jitter_params(store, rng);
        auto v = randn<double>(rng, {1, 2, 2});
        auto target = randn<double>(rng, {1, 4, 3});
        const std::vector<int> labels{1};
        return check_with_params(store, v, [&](T& data) {
            return reconstruction_loss(decode(data, labels, dec), target);
        });
    }));
    cases.push_back(make_case("module.chamfer", seed ^ 44, 5, [](Rng& rng) {
        auto a = randn<double>(rng, {1, 4, 3});
        auto b = randn<double>(rng, {1, 4, 3});
        return gradcheck([&](std::vector<T>& in) { return chamfer_loss(in[0], in[1]); }, {a, b})
            .worst;
    }));
    cases.push_back(make_case("module.fc_baseline", seed ^ 45, 3, [](Rng& rng) {
        ParamStore<double> store;
        auto fc = FcBaseline<double>::create(store, "fc", 5, 3, rng, 6, 4);
        fc.dropout_rate = 0.0;  // finite differences need a deterministic forward
        auto f = randn<double>(rng, {3, 5});
        const std::vector<int> labels{0, 2, 1};
        Rng drop(0);
        return check_with_params(store, f, [&](T& data) {
            return cross_entropy(fc.apply(data, true, drop), labels);
        });
    }));
    return cases;
}

namespace gradgen {

inline ModelConfig tiny_model_config(std::size_t r) {
    ModelConfig cfg;
    cfg.extractor = ExtractorKind::pointnet;
    cfg.aggregator = AggregatorKind::maxpool;
    cfg.classifier = ClassifierKind::capsule;
    cfg.final_width = 6;
    cfg.pn_mlp1 = {4, 4};
    cfg.pn_mlp2 = {5};
    cfg.stn_mlp = {4, 6};
    cfg.stn_fc = 6;
    cfg.q = 3;
    cfg.t = 2;
    cfg.z = 2;
    cfg.r = r;
    cfg.decoder_widths = {5, 6};
    cfg.n_points = 4;
    cfg.knn_k = 2;
    cfg.seed = 11;
    return cfg;
}

// Three samples per batch so train-mode BatchNorm sees non-degenerate
// statistics in every layer, including the per-sample STN dense stage.
inline double check_full_model(ModelConfig cfg, std::size_t n_points, Rng& rng) {
    auto model = Model<double>::build(cfg, 2);
    jitter_params(model.params, rng);
    auto points = randn<double>(rng, {3, n_points, 3});
    Batch<double> batch;
    batch.labels = {1, 0, 1};
    std::vector<T> inputs{points};
    for (const auto& e : model.params.entries())
        if (e.trainable) inputs.push_back(e.tensor);
    Rng drop(0);
    return gradcheck(
               [&](std::vector<T>& in) {
                   batch.points = in[0];
                   return model.loss(batch, /*train=*/true, drop).total;
               },
               std::move(inputs))
        .worst;
}

}  // namespace gradgen

inline std::vector<GradCase> full_grad_cases(std::uint64_t seed) {
    using namespace gradgen;
    std::vector<GradCase> cases;
    cases.push_back(make_case("full.capsule_head", seed ^ 51, 3, [](Rng& rng) {
        // ComposeCaps -> predictions -> routing -> margin + reconstruction,
        // from a leaf feature vector (2 points, 2 classes, 4 primary caps)
        ParamStore<double> store;
        auto cc = compose_create<double>(store, "head.compose", 6, 4, 2, rng);
        auto pp = predict_create<double>(store, "head.predict", 4, 2, 2, 2, rng);
        auto dec = decoder_create<double>(store, "head.decoder", 2, 2, {5}, 2, rng);
        jitter_params(store, rng);
        auto f = randn<double>(rng, {1, 6});
        auto target = randn<double>(rng, {1, 2, 3});
        const std::vector<int> labels{0};
        return check_with_params(store, f, [&](T& data) {
            auto caps = route(predict_vectors(compose_caps(data, cc), pp.w), 2);
            return add(margin_loss(caps, labels), reconstruction_loss(decode(caps, labels, dec), target));
        });
    }));
    cases.push_back(make_case("full.model_r2", seed ^ 52, 2, [](Rng& rng) {
        return check_full_model(tiny_model_config(2), 4, rng);
    }));
    cases.push_back(make_case("full.model_r3", seed ^ 53, 2, [](Rng& rng) {
        return check_full_model(tiny_model_config(3), 4, rng);
    }));
    cases.push_back(make_case("full.model_edgeconv_netvlad", seed ^ 54, 1, [](Rng& rng) {
        auto cfg = tiny_model_config(2);
        cfg.extractor = ExtractorKind::edgeconv;
        cfg.aggregator = AggregatorKind::netvlad;
        cfg.ec_mlp1 = {4, 4};
        cfg.ec_mlp2 = {5};
        cfg.final_width = 4;
        cfg.vlad_clusters = 2;
        cfg.n_points = 6;
        cfg.knn_k = 2;
        return check_full_model(cfg, 6, rng);
    }));
    cases.push_back(make_case("full.model_no_composecaps", seed ^ 55, 1, [](Rng& rng) {
        auto cfg = tiny_model_config(2);
        cfg.compose_caps = false;  // feature length 6 reshapes to 3 capsules of dim 2
        return check_full_model(cfg, 4, rng);
    }));
    cases.push_back(make_case("full.model_fc_baseline", seed ^ 56, 1, [](Rng& rng) {
        auto cfg = tiny_model_config(2);
        cfg.classifier = ClassifierKind::fc;
        cfg.fc_hidden1 = 6;
        cfg.fc_hidden2 = 4;
        auto model = Model<double>::build(cfg, 2);
        model.set_fc_dropout(0.0);
        jitter_params(model.params, rng);
        auto points = randn<double>(rng, {3, 4, 3});
        Batch<double> batch;
        batch.labels = {1, 0, 1};
        std::vector<T> inputs{points};
        for (const auto& e : model.params.entries())
            if (e.trainable) inputs.push_back(e.tensor);
        Rng drop(0);
        return gradcheck(
                   [&](std::vector<T>& in) {
                       batch.points = in[0];
                       return model.loss(batch, true, drop).total;
                   },
                   std::move(inputs))
            .worst;
    }));
    return cases;
}

inline std::vector<GradCase> grad_cases(GradScope scope, std::uint64_t seed) {
    auto cases = op_grad_cases(seed);
    if (scope == GradScope::ops) return cases;
    auto modules = module_grad_cases(seed);
    cases.insert(cases.end(), modules.begin(), modules.end());
    if (scope == GradScope::modules) return cases;
    auto full = full_grad_cases(seed);
    cases.insert(cases.end(), full.begin(), full.end());
    return cases;
}

}  // namespace pointcaps
