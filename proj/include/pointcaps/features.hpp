#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "pointcaps/nn.hpp"
#include "pointcaps/tensor.hpp"

// Per-point feature extractors mapping B x N x 3 point sets to B x N x d'
// features: a PointNet-style shared-MLP pipeline with spatial transformers,
// and an EdgeConv pipeline over a k-NN graph of the input points.

namespace pointcaps {

enum class ExtractorKind { pointnet, edgeconv };

struct ExtractorSpec {
    ExtractorKind kind = ExtractorKind::pointnet;
    std::size_t final_width = 1024;  // 1024 for max-pool pipelines, 128 for NetVLAD
    bool use_stn = true;
    std::vector<std::size_t> pn_mlp1{64, 64};
    std::vector<std::size_t> pn_mlp2{64, 128};  // final_width is appended
    std::vector<std::size_t> ec_block1{64, 64, 64};
    std::vector<std::size_t> ec_block2{128};
    std::size_t knn_k = 20;
    std::vector<std::size_t> stn_mlp{64, 128};
    std::size_t stn_fc = 128;
};

namespace detail {

template <class S>
Tensor<S> to_rows(const Tensor<S>& x) {  // B x N x C -> (B*N) x C
    return reshape(x, {x.shape()[0] * x.shape()[1], x.shape()[2]});
}

template <class S>
Tensor<S> to_batch(const Tensor<S>& x, std::size_t b, std::size_t n) {
    return reshape(x, {b, n, x.shape()[1]});
}

}  // namespace detail

// Spatial transformer: a mini-network predicting one square `side x side`
// matrix per sample, applied on the right to every point/feature row. The
// output layer starts at exactly the identity (zero weights, identity bias).
template <class S>
struct Stn {
    std::size_t side = 3;
    SharedMlp<S> mlp;
    Linear<S> fc;
    BatchNorm<S> fc_bn;
    Linear<S> out;

    static Stn create(ParamStore<S>& store, const std::string& path, std::size_t side,
                      const ExtractorSpec& spec, Rng& rng) {
        Stn stn;
        stn.side = side;
        stn.mlp = SharedMlp<S>::create(store, path + ".mlp", side, spec.stn_mlp, rng);
        stn.fc = Linear<S>::create(store, path + ".fc", stn.mlp.out_width(), spec.stn_fc, rng);
        stn.fc_bn = BatchNorm<S>::create(store, path + ".fc.bn", spec.stn_fc);
        std::vector<S> identity(side * side, S(0));
        for (std::size_t i = 0; i < side; ++i) identity[i * side + i] = S(1);
        stn.out = Linear<S>::create_const(store, path + ".out", spec.stn_fc, std::move(identity));
        return stn;
    }

    // x: B x N x side -> B x side x side
    Tensor<S> predict(const Tensor<S>& x, bool train) {
        const std::size_t b = x.shape()[0], n = x.shape()[1];
        auto h = mlp.apply(detail::to_rows(x), train);
        auto pooled = reduce_max(detail::to_batch(h, b, n), 1);  // B x width
        auto g = relu(fc_bn.apply(fc.apply(pooled), train));
        return reshape(out.apply(g), {b, side, side});
    }

    Tensor<S> apply(const Tensor<S>& x, bool train) { return bmm(x, predict(x, train)); }
};

template <class S>
struct PointNetExtractor {
    ExtractorSpec spec;
    Stn<S> stn1, stn2;
    SharedMlp<S> mlp1, mlp2;

    static PointNetExtractor create(ParamStore<S>& store, const std::string& path,
                                    const ExtractorSpec& spec, Rng& rng) {
        PointNetExtractor e;
        e.spec = spec;
        if (spec.pn_mlp1.empty() || spec.pn_mlp2.empty())
            throw ConfigError("pointnet: mlp width lists must be non-empty");
        if (spec.use_stn) {
            e.stn1 = Stn<S>::create(store, path + ".stn1", 3, spec, rng);
            e.stn2 = Stn<S>::create(store, path + ".stn2", spec.pn_mlp1.back(), spec, rng);
        }
        e.mlp1 = SharedMlp<S>::create(store, path + ".mlp1", 3, spec.pn_mlp1, rng);
        auto widths2 = spec.pn_mlp2;
        widths2.push_back(spec.final_width);
        e.mlp2 = SharedMlp<S>::create(store, path + ".mlp2", spec.pn_mlp1.back(), widths2, rng);
        return e;
    }

    // B x N x 3 -> B x N x final_width
    Tensor<S> apply(Tensor<S> x, bool train) {
        const std::size_t b = x.shape()[0], n = x.shape()[1];
        if (x.shape()[2] != 3)
            throw DimensionError("pointnet: expected d=3 points, got " + shape_str(x.shape()));
        if (spec.use_stn) x = stn1.apply(x, train);
        auto h = mlp1.apply(detail::to_rows(x), train);
        auto hb = detail::to_batch(h, b, n);
        if (spec.use_stn) hb = stn2.apply(hb, train);
        auto out = mlp2.apply(detail::to_rows(hb), train);
        return detail::to_batch(out, b, n);
    }
};

// k nearest neighbors by Euclidean distance, self excluded, distance ties
// broken toward the lower index. Duplicate points are legal neighbors.
template <class S>
std::vector<std::size_t> knn_graph(const Tensor<S>& points, std::size_t k) {
    if (points.rank() != 3) throw DimensionError("knn: expected B x N x d points");
    const std::size_t b = points.shape()[0], n = points.shape()[1], d = points.shape()[2];
    if (k >= n)
        throw ArgumentError("knn: k=" + std::to_string(k) + " must be < N=" + std::to_string(n));
    std::vector<std::size_t> table(b * n * k);
    const S* pv = points.data().data();
    std::vector<std::pair<double, std::size_t>> cand(n - 1);
    for (std::size_t bi = 0; bi < b; ++bi) {
        const S* cloud = pv + bi * n * d;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t w = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                double dist = 0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff =
                        static_cast<double>(cloud[i * d + c]) - static_cast<double>(cloud[j * d + c]);
                    dist += diff * diff;
                }
                cand[w++] = {dist, j};
            }
            std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k),
                              cand.end());
            for (std::size_t j = 0; j < k; ++j) table[(bi * n + i) * k + j] = cand[j].second;
        }
    }
    return table;
}

template <class S>
struct EdgeConvExtractor {
    ExtractorSpec spec;
    SharedMlp<S> block1, block2, fuse;

    static EdgeConvExtractor create(ParamStore<S>& store, const std::string& path,
                                    const ExtractorSpec& spec, Rng& rng) {
        EdgeConvExtractor e;
        e.spec = spec;
        if (spec.ec_block1.empty() || spec.ec_block2.empty())
            throw ConfigError("edgeconv: block width lists must be non-empty");
        e.block1 = SharedMlp<S>::create(store, path + ".block1", 6, spec.ec_block1, rng);
        e.block2 = SharedMlp<S>::create(store, path + ".block2", 2 * spec.ec_block1.back(),
                                        spec.ec_block2, rng);
        e.fuse = SharedMlp<S>::create(store, path + ".fuse",
                                      spec.ec_block1.back() + spec.ec_block2.back(),
                                      {spec.final_width}, rng);
        return e;
    }

    // One EdgeConv block: per edge, shared MLP over concat(x_i, x_j - x_i),
    // then max over the k edges of each point.
    Tensor<S> edge_block(SharedMlp<S>& mlp, const Tensor<S>& x,
                         const std::vector<std::size_t>& knn, bool train) {
        const std::size_t b = x.shape()[0], n = x.shape()[1], c = x.shape()[2];
        const std::size_t k = knn.size() / (b * n);
        auto neighbors = gather_rows(x, knn, k);                   // B x N x k x C
        auto center = expand(reshape(x, {b, n, std::size_t(1), c}), {b, n, k, c});
        auto offsets = sub(neighbors, center);
        auto edge = concat_last<S>({center, offsets});             // B x N x k x 2C
        auto h = mlp.apply(reshape(edge, {b * n * k, 2 * c}), train);
        auto hb = reshape(h, {b, n, k, mlp.out_width()});
        return reduce_max(hb, 2);  // B x N x width
    }

    // B x N x 3 -> B x N x final_width; the k-NN graph is built once from the
    // input coordinates and reused by both blocks.
    Tensor<S> apply(const Tensor<S>& x, bool train) {
        const std::size_t b = x.shape()[0], n = x.shape()[1];
        const auto knn = knn_graph(x, spec.knn_k);
        auto f1 = edge_block(block1, x, knn, train);
        auto f2 = edge_block(block2, f1, knn, train);
        auto both = concat_last<S>({f1, f2});
        auto out = fuse.apply(detail::to_rows(both), train);
        return detail::to_batch(out, b, n);
    }
};

}  // namespace pointcaps
