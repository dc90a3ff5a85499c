#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pointcaps/model.hpp"

#include <json.hpp>

// Optimizer, schedule, training loop, evaluation and metric recording.
//
// Metrics stream: one JSON record per epoch with fields
//   epoch, lr, loss_total, loss_margin, loss_recon, acc_train, acc_test, seconds
// loss_recon is the unweighted reconstruction term; loss_total equals
// loss_margin + alpha * loss_recon. With timing = none the seconds field is
// written as 0.0 so two identically-seeded runs produce bit-identical files.

namespace pointcaps {

// base_lr halved every 20 epochs.
inline double lr_schedule(std::size_t epoch, double base_lr) {
    return base_lr * std::pow(0.5, static_cast<double>(epoch / 20));
}

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam over the trainable entries of a ParamStore.
template <class S>
class Adam {
  public:
    explicit Adam(const ParamStore<S>& store, AdamHyper hyper = AdamHyper{}) : hyper_(hyper) {
        for (const auto& e : store.entries()) {
            if (!e.trainable) continue;
            slots_.push_back(Slot{e.name, e.tensor, std::vector<S>(e.tensor.size(), S(0)),
                                  std::vector<S>(e.tensor.size(), S(0))});
        }
    }

    std::size_t step_count() const { return step_; }

    void zero_grad() {
        for (auto& s : slots_) s.param.zero_grad();
    }

    void step(double lr) {
        ++step_;
        const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
        for (auto& s : slots_) {
            const auto& g = s.param.grad();
            auto& value = s.param.raw_data();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                if (!std::isfinite(gi))
                    throw NumericError("adam: non-finite gradient in parameter '" + s.name + "'");
                s.m[i] = static_cast<S>(hyper_.beta1 * s.m[i] + (1.0 - hyper_.beta1) * gi);
                s.v[i] = static_cast<S>(hyper_.beta2 * s.v[i] + (1.0 - hyper_.beta2) * gi * gi);
                const double mhat = static_cast<double>(s.m[i]) / bc1;
                const double vhat = static_cast<double>(s.v[i]) / bc2;
                value[i] = static_cast<S>(value[i] - lr * mhat / (std::sqrt(vhat) + hyper_.eps));
            }
        }
    }

  private:
    struct Slot {
        std::string name;
        Tensor<S> param;
        std::vector<S> m, v;
    };
    std::vector<Slot> slots_;
    AdamHyper hyper_;
    std::size_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class;  // accuracy per class index
};

template <class S>
EvalResult evaluate_model(Model<S>& model, const Dataset& ds,
                          const std::optional<CorruptionSpec>& corruption = std::nullopt,
                          std::size_t chunk = 32) {
    Rng rng(0);  // eval mode never draws from it
    std::vector<std::size_t> correct(model.classes, 0), total(model.classes, 0);
    std::vector<const PointCloudSample*> ptrs;
    std::vector<PointCloudSample> corrupted;
    corrupted.reserve(chunk);  // ptrs hold addresses into this buffer
    std::vector<int> labels;
    auto flush = [&]() {
        if (ptrs.empty()) return;
        auto points = points_to_tensor<S>(ptrs);
        const auto pred = model.predict_labels(points, rng);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            total[static_cast<std::size_t>(labels[i])]++;
            if (pred[i] == labels[i]) correct[static_cast<std::size_t>(labels[i])]++;
        }
        ptrs.clear();
        corrupted.clear();
        labels.clear();
    };
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (corruption && !corruption->is_identity()) {
            corrupted.push_back(apply_corruption(ds.samples[i], *corruption, i));
            ptrs.push_back(&corrupted.back());
        } else {
            ptrs.push_back(&ds.samples[i]);
        }
        labels.push_back(ds.samples[i].label);
        if (ptrs.size() == chunk) flush();
    }
    flush();
    EvalResult out;
    std::size_t hits = 0, n = 0;
    out.per_class.resize(model.classes, 0.0);
    for (std::size_t c = 0; c < model.classes; ++c) {
        hits += correct[c];
        n += total[c];
        out.per_class[c] = total[c] ? static_cast<double>(correct[c]) / static_cast<double>(total[c]) : 0.0;
    }
    out.accuracy = n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double loss_total = 0.0;
    double loss_margin = 0.0;
    double loss_recon = 0.0;
    double acc_train = 0.0;
    double acc_test = 0.0;
    double seconds = 0.0;
};

struct RunMetrics {
    std::vector<EpochRecord> epochs;
    bool diverged = false;
};

inline void write_metrics_jsonl(const RunMetrics& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    for (const auto& e : m.epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["lr"] = e.lr;
        j["loss_total"] = e.loss_total;
        j["loss_margin"] = e.loss_margin;
        j["loss_recon"] = e.loss_recon;
        j["acc_train"] = e.acc_train;
        j["acc_test"] = e.acc_test;
        j["seconds"] = e.seconds;
        os << j.dump() << "\n";
    }
}

template <class S>
struct TrainResult {
    RunMetrics metrics;
    Checkpoint best_checkpoint;
    double best_acc = 0.0;
    std::size_t best_epoch = 0;
};

// Deterministic given (config, datasets): parameter init, batch order,
// dropout masks and corruption all derive from cfg.seed. On divergence the
// loop stops and the last finite-loss checkpoint is retained.
template <class S>
TrainResult<S> train_model(Model<S>& model, const Dataset& train_ds, const Dataset& test_ds) {
    const ModelConfig& cfg = model.cfg;
    model.init_aggregator(train_ds);
    Adam<S> opt(model.params);
    TrainResult<S> result;
    result.best_checkpoint = model.to_checkpoint();
    const Rng root(cfg.seed);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_schedule(epoch, cfg.lr);
        BatchIterator<S> batches(train_ds, cfg.batch_size,
                                 root.fork(0xe90c).fork(epoch).next_u64());
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        std::size_t steps = 0;
        Rng drop = root.fork(0xd309).fork(epoch);
        while (auto batch = batches.next()) {
            auto parts = model.loss(*batch, /*train=*/true, drop);
            const double total = static_cast<double>(parts.total.item());
            if (!std::isfinite(total)) {
                result.metrics.diverged = true;
                break;
            }
            opt.zero_grad();
            parts.total.backward();
            opt.step(lr);
            rec.loss_total += total;
            rec.loss_margin += parts.margin;
            rec.loss_recon += parts.recon;
            ++steps;
        }
        if (result.metrics.diverged) break;
        if (steps > 0) {
            rec.loss_total /= static_cast<double>(steps);
            rec.loss_margin /= static_cast<double>(steps);
            rec.loss_recon /= static_cast<double>(steps);
        }
        rec.acc_train = evaluate_model(model, train_ds).accuracy;
        rec.acc_test = evaluate_model(model, test_ds).accuracy;
        if (cfg.timing == TimingMode::wall) {
            rec.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        result.metrics.epochs.push_back(rec);
        if (result.metrics.epochs.size() == 1 || rec.acc_test > result.best_acc) {
            result.best_acc = rec.acc_test;
            result.best_epoch = epoch;
            result.best_checkpoint = model.to_checkpoint();
        }
        if (cfg.early_stop_acc > 0 && rec.acc_test >= cfg.early_stop_acc) break;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Corruption sweep grids
// ---------------------------------------------------------------------------

struct SweepCell {
    double train_level = 0.0;
    double test_level = 0.0;
    double accuracy = 0.0;
};

enum class SweepMode { outliers, perturb };

inline CorruptionSpec level_spec(SweepMode mode, double level, std::uint64_t seed) {
    CorruptionSpec spec;
    spec.seed = seed;
    if (mode == SweepMode::outliers)
        spec.outlier_count = static_cast<std::size_t>(level);
    else
        spec.perturb_std = level;
    return spec;
}

// For each training level: mix clean+corrupted data, train, then evaluate
// across every test level.
template <class S>
std::vector<SweepCell> sweep(const ModelConfig& cfg, const Dataset& train_ds,
                             const Dataset& test_ds, SweepMode mode,
                             const std::vector<double>& train_levels,
                             const std::vector<double>& test_levels) {
    if (train_levels.empty() || test_levels.empty())
        throw ArgumentError("sweep: level lists must be non-empty");
    std::vector<SweepCell> grid;
    for (const double tl : train_levels) {
        const CorruptionSpec train_spec = level_spec(mode, tl, cfg.seed ^ 0xc0221ULL);
        const Dataset mixed = train_spec.is_identity() ? train_ds
                                                       : build_training_mix(train_ds, train_spec);
        auto model = Model<S>::build(cfg, train_ds.class_names.size());
        auto run = train_model(model, mixed, test_ds);
        model.load_checkpoint_state(run.best_checkpoint);
        for (const double sl : test_levels) {
            const CorruptionSpec test_spec = level_spec(mode, sl, cfg.seed ^ 0x7e57ULL);
            SweepCell cell;
            cell.train_level = tl;
            cell.test_level = sl;
            cell.accuracy = evaluate_model(model, test_ds, test_spec).accuracy;
            grid.push_back(cell);
        }
    }
    return grid;
}

inline std::string format_level(SweepMode mode, double level) {
    if (mode == SweepMode::outliers)
        return std::to_string(static_cast<long long>(level));
    return nlohmann::json(level).dump();
}

inline void write_sweep_csv(const std::vector<SweepCell>& grid, SweepMode mode,
                            const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << "train_level,test_level,accuracy\n";
    for (const auto& c : grid)
        os << format_level(mode, c.train_level) << "," << format_level(mode, c.test_level) << ","
           << nlohmann::json(c.accuracy).dump() << "\n";
}

}  // namespace pointcaps
