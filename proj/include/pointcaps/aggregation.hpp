#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pointcaps/nn.hpp"
#include "pointcaps/tensor.hpp"

// Symmetric aggregation of per-point features into one permutation-invariant
// vector per sample: channel-wise max pooling, and NetVLAD (soft-assigned
// residuals against learned cluster centers with intra- then global L2
// normalization).

namespace pointcaps {

enum class AggregatorKind { maxpool, netvlad };

// B x N x d' -> B x d'
template <class S>
Tensor<S> maxpool_aggregate(const Tensor<S>& features) {
    if (features.rank() != 3)
        throw DimensionError("maxpool_aggregate: expected B x N x d', got " +
                             shape_str(features.shape()));
    return reduce_max(features, 1);
}

// ---------------------------------------------------------------------------
// k-means (Lloyd's, k-means++ seeding, fixed iteration count)
// ---------------------------------------------------------------------------

struct KMeansOptions {
    std::size_t iterations = 25;
};

// rows: flat row-major matrix of n x d observations. Returns K x d centers.
inline std::vector<double> kmeans(const std::vector<double>& rows, std::size_t n, std::size_t d,
                                  std::size_t k, std::uint64_t seed,
                                  KMeansOptions opt = KMeansOptions{}) {
    if (n == 0 || k == 0) throw InitError("kmeans: empty input or k == 0");
    // distinct-row count must reach k
    {
        std::set<std::vector<double>> uniq;
        for (std::size_t i = 0; i < n && uniq.size() < k; ++i)
            uniq.insert(std::vector<double>(rows.begin() + static_cast<std::ptrdiff_t>(i * d),
                                            rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
        if (uniq.size() < k)
            throw InitError("kmeans: k=" + std::to_string(k) + " exceeds " +
                            std::to_string(uniq.size()) + " distinct samples");
    }
    Rng rng(splitmix64(seed) ^ 0x63a105ULL);
    auto dist2 = [&](const double* a, const double* b) {
        double s = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const double diff = a[i] - b[i];
            s += diff * diff;
        }
        return s;
    };

    // k-means++ seeding
    std::vector<double> centers(k * d);
    std::vector<double> best(n, 0.0);
    {
        const std::size_t first = rng.uniform_index(n);
        std::copy_n(rows.data() + first * d, d, centers.data());
        for (std::size_t i = 0; i < n; ++i) best[i] = dist2(rows.data() + i * d, centers.data());
        for (std::size_t c = 1; c < k; ++c) {
            double total = 0;
            for (double v : best) total += v;
            std::size_t pick = 0;
            if (total > 0) {
                const double target = rng.uniform() * total;
                double acc = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += best[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = rng.uniform_index(n);
            }
            std::copy_n(rows.data() + pick * d, d, centers.data() + c * d);
            for (std::size_t i = 0; i < n; ++i)
                best[i] = std::min(best[i], dist2(rows.data() + i * d, centers.data() + c * d));
        }
    }

    // Lloyd iterations; an emptied cluster keeps its previous center.
    std::vector<std::size_t> assign(n);
    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < opt.iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double bd = dist2(rows.data() + i * d, centers.data());
            std::size_t bc = 0;
            for (std::size_t c = 1; c < k; ++c) {
                const double dd = dist2(rows.data() + i * d, centers.data() + c * d);
                if (dd < bd) {
                    bd = dd;
                    bc = c;
                }
            }
            assign[i] = bc;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::size_t i = 0; i < n; ++i) {
            counts[assign[i]]++;
            for (std::size_t j = 0; j < d; ++j) sums[assign[i] * d + j] += rows[i * d + j];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (std::size_t j = 0; j < d; ++j)
                    centers[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
    }
    return centers;
}

// ---------------------------------------------------------------------------
// NetVLAD
// ---------------------------------------------------------------------------

template <class S>
struct VladParams {
    Tensor<S> centers;   // K x d'
    Tensor<S> assign_w;  // d' x K
    Tensor<S> assign_b;  // K

    std::size_t clusters() const { return centers.shape()[0]; }
    std::size_t width() const { return centers.shape()[1]; }
};

template <class S>
VladParams<S> vlad_create(ParamStore<S>& store, const std::string& path, std::size_t k,
                          std::size_t width, Rng& rng) {
    VladParams<S> p;
    p.centers = store.add_param(path + ".centers", randn<S>(rng, {k, width}, S(0.1)));
    p.assign_w = store.add_param(path + ".assign_w", init_weight<S>(rng, width, {width, k}));
    p.assign_b = store.add_param(path + ".assign_b", Tensor<S>::zeros({k}));
    return p;
}

// Data-driven initialization: centers from k-means over a corpus of per-point
// features, soft-assignment parameters w_k = 2*alpha*c_k, b_k = -alpha*|c_k|^2
// with sharpness alpha = 10.
template <class S>
void vlad_init(VladParams<S>& params, const std::vector<double>& feature_rows, std::size_t n_rows,
               std::uint64_t seed) {
    const std::size_t k = params.clusters();
    const std::size_t d = params.width();
    if (feature_rows.size() != n_rows * d)
        throw DimensionError("vlad_init: corpus size mismatch");
    const auto centers = kmeans(feature_rows, n_rows, d, k, seed);
    const double alpha = 10.0;
    auto& cv = params.centers.raw_data();
    auto& wv = params.assign_w.raw_data();
    auto& bv = params.assign_b.raw_data();
    for (std::size_t c = 0; c < k; ++c) {
        double sq = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double cj = centers[c * d + j];
            cv[c * d + j] = static_cast<S>(cj);
            wv[j * k + c] = static_cast<S>(2.0 * alpha * cj);
            sq += cj * cj;
        }
        bv[c] = static_cast<S>(-alpha * sq);
    }
}

// B x N x d' -> B x (K*d'): V(k) = sum_i a_k(x_i) (x_i - c_k), intra-normalized
// per cluster row, then globally L2-normalized.
template <class S>
Tensor<S> vlad_aggregate(const Tensor<S>& features, const VladParams<S>& params) {
    if (features.rank() != 3)
        throw DimensionError("vlad_aggregate: expected B x N x d', got " +
                             shape_str(features.shape()));
    const std::size_t b = features.shape()[0], n = features.shape()[1], d = features.shape()[2];
    const std::size_t k = params.clusters();
    if (d != params.width())
        throw DimensionError("vlad_aggregate: feature width " + std::to_string(d) +
                             " vs cluster width " + std::to_string(params.width()));
    auto rows = reshape(features, {b * n, d});
    auto logits = add(matmul(rows, params.assign_w), params.assign_b);
    auto assign = reshape(softmax(logits, 1), {b, n, k});               // B x N x K
    auto weighted = bmm(transpose_last2(assign), features);             // B x K x d'
    auto mass = reshape(reduce_sum(assign, 1), {b, k, std::size_t(1)});  // B x K x 1
    auto vlad = sub(weighted, mul(mass, params.centers));               // B x K x d'
    auto intra = div(vlad, l2_norm(vlad, 2, S(1e-9), true));
    auto flat = reshape(intra, {b, k * d});
    return div(flat, l2_norm(flat, 1, S(1e-9), true));
}

}  // namespace pointcaps
