#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pointcaps/aggregation.hpp"
#include "pointcaps/capsule.hpp"
#include "pointcaps/config.hpp"
#include "pointcaps/dataset.hpp"
#include "pointcaps/features.hpp"
#include "pointcaps/serialize.hpp"

// Full classification pipeline assembled from a ModelConfig: feature
// extractor -> symmetric aggregator -> classifier (capsule head or the fully
// connected baseline). Parameter paths are stable strings, so checkpoints
// survive as long as the architecture (its config hash) matches.

namespace pointcaps {

template <class S>
struct ForwardOut {
    Tensor<S> feature;       // B x m aggregated feature vector
    Tensor<S> class_caps;    // B x c x z (capsule classifier only)
    Tensor<S> logits;        // B x c (fc classifier only)
};

template <class S>
struct LossOut {
    Tensor<S> total;
    double margin = 0.0;  // cross-entropy for the fc baseline
    double recon = 0.0;   // unweighted reconstruction term (alpha applied in total)
};

template <class S>
class Model {
  public:
    ModelConfig cfg;
    std::size_t classes = 0;
    ParamStore<S> params;

    static Model build(const ModelConfig& cfg, std::size_t classes) {
        validate_config(cfg);
        Model m;
        m.cfg = cfg;
        m.classes = classes;
        Rng rng = Rng(cfg.seed).fork(0x1217);
        const auto espec = cfg.extractor_spec();
        if (cfg.extractor == ExtractorKind::pointnet)
            m.pointnet_ = PointNetExtractor<S>::create(m.params, "extractor", espec, rng);
        else
            m.edgeconv_ = EdgeConvExtractor<S>::create(m.params, "extractor", espec, rng);
        if (cfg.aggregator == AggregatorKind::netvlad)
            m.vlad_ = vlad_create(m.params, "aggregator.vlad", cfg.vlad_clusters,
                                  espec.final_width, rng);
        const std::size_t feat = cfg.feature_len();
        if (cfg.classifier == ClassifierKind::capsule) {
            std::size_t q_eff = cfg.q;
            if (cfg.compose_caps) {
                m.compose_ = compose_create(m.params, "head.compose", feat, cfg.q, cfg.t, rng);
            } else {
                if (feat % cfg.t != 0)
                    throw ConfigError("compose_caps=false: feature length " + std::to_string(feat) +
                                      " not divisible by t=" + std::to_string(cfg.t));
                q_eff = feat / cfg.t;
            }
            m.q_effective_ = q_eff;
            m.predict_ = predict_create(m.params, "head.predict", q_eff, classes, cfg.z, cfg.t, rng);
            if (cfg.reconstruction_loss)
                m.decoder_ = decoder_create(m.params, "head.decoder", classes, cfg.z,
                                            cfg.decoder_widths, cfg.n_points, rng);
        } else {
            m.fc_ = FcBaseline<S>::create(m.params, "head.fc", feat, classes, rng, cfg.fc_hidden1,
                                          cfg.fc_hidden2);
        }
        return m;
    }

    // Per-point features B x N x d'.
    Tensor<S> point_features(const Tensor<S>& points, bool train) {
        if (pointnet_) return pointnet_->apply(points, train);
        return edgeconv_->apply(points, train);
    }

    // Permutation-invariant feature vector B x m.
    Tensor<S> aggregate(const Tensor<S>& per_point) {
        if (cfg.aggregator == AggregatorKind::netvlad) return vlad_aggregate(per_point, *vlad_);
        return maxpool_aggregate(per_point);
    }

    Tensor<S> feature_vector(const Tensor<S>& points, bool train) {
        return aggregate(point_features(points, train));
    }

    // Class capsules from an aggregated feature vector.
    Tensor<S> class_capsules(const Tensor<S>& f, RoutingTrace<S>* trace = nullptr) {
        auto u = cfg.compose_caps ? compose_caps(f, *compose_, cfg.squash_variant)
                                  : reshape_caps(f, cfg.t, cfg.squash_variant);
        auto uhat = predict_vectors(u, predict_->w);
        return route(uhat, cfg.r, cfg.squash_variant, trace);
    }

    ForwardOut<S> forward(const Tensor<S>& points, bool train, Rng& rng) {
        ForwardOut<S> out;
        out.feature = feature_vector(points, train);
        if (cfg.classifier == ClassifierKind::capsule)
            out.class_caps = class_capsules(out.feature);
        else
            out.logits = fc_->apply(out.feature, train, rng);
        return out;
    }

    LossOut<S> loss(const Batch<S>& batch, bool train, Rng& rng) {
        auto fwd = forward(batch.points, train, rng);
        LossOut<S> out;
        if (cfg.classifier == ClassifierKind::capsule) {
            auto margin = margin_loss(fwd.class_caps, batch.labels);
            out.margin = static_cast<double>(margin.item());
            if (cfg.reconstruction_loss) {
                // target-class mask during training, argmax mask at eval
                const auto mask = train ? batch.labels : classify(fwd.class_caps);
                auto rec_points = decode(fwd.class_caps, mask, *decoder_);
                auto rec = cfg.recon_pairing == ReconPairing::index
                               ? reconstruction_loss(rec_points, batch.points)
                               : chamfer_loss(rec_points, batch.points);
                out.recon = static_cast<double>(rec.item()) / kReconstructionAlpha;
                out.total = add(margin, rec);
            } else {
                out.total = margin;
            }
        } else {
            auto ce = cross_entropy(fwd.logits, batch.labels);
            out.margin = static_cast<double>(ce.item());
            out.total = ce;
        }
        return out;
    }

    std::vector<int> predict_labels(const Tensor<S>& points, Rng& rng) {
        auto fwd = forward(points, /*train=*/false, rng);
        if (cfg.classifier == ClassifierKind::capsule) return classify(fwd.class_caps);
        return classify_logits(fwd.logits);
    }

    // k-means initialization of the NetVLAD layer from extractor features of
    // the first few training batches. No-op for max pooling.
    void init_aggregator(const Dataset& ds) {
        if (cfg.aggregator != AggregatorKind::netvlad) return;
        BatchIterator<S> it(ds, cfg.batch_size, Rng(cfg.seed).fork(0x7e4d).next_u64());
        std::vector<double> corpus;
        std::size_t rows = 0;
        const std::size_t width = cfg.extractor_spec().final_width;
        for (std::size_t b = 0; b < cfg.vlad_init_batches; ++b) {
            auto batch = it.next();
            if (!batch) break;
            auto pf = point_features(batch->points, /*train=*/true);
            for (S v : pf.data()) corpus.push_back(static_cast<double>(v));
            rows += pf.size() / width;
        }
        if (rows == 0) throw InitError("vlad init: dataset yielded no batches");
        vlad_init(*vlad_, corpus, rows, Rng(cfg.seed).fork(0x56ad).next_u64());
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ck;
        ck.config_hash = config_hash(cfg);
        for (const auto& e : params.entries()) checkpoint_add(ck, e.name, e.tensor);
        return ck;
    }

    void load_checkpoint_state(const Checkpoint& ck) {
        if (ck.config_hash != config_hash(cfg))
            throw LoadError("checkpoint config hash mismatch: checkpoint was written by a "
                            "different architecture/configuration");
        for (const auto& e : params.entries()) {
            const CheckpointEntry* src = ck.find(e.name);
            if (!src) throw LoadError("checkpoint missing tensor '" + e.name + "'");
            if (src->shape != e.tensor.shape())
                throw LoadError("checkpoint tensor '" + e.name + "' has shape mismatch");
            Tensor<S> handle = e.tensor;  // shares the underlying node
            auto& dst = handle.raw_data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<S>(src->data[i]);
        }
    }

    std::size_t primary_capsules() const { return q_effective_; }

    // Gradient checks need a deterministic forward pass.
    void set_fc_dropout(double rate) {
        if (fc_) fc_->dropout_rate = rate;
    }

  private:
    std::optional<PointNetExtractor<S>> pointnet_;
    std::optional<EdgeConvExtractor<S>> edgeconv_;
    std::optional<VladParams<S>> vlad_;
    std::optional<ComposeCapsParams<S>> compose_;
    std::optional<PredictParams<S>> predict_;
    std::optional<DecoderParams<S>> decoder_;
    std::optional<FcBaseline<S>> fc_;
    std::size_t q_effective_ = 0;
};

}  // namespace pointcaps
