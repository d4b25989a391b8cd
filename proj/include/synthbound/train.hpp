#pragma once

#include <algorithm>
#include <numeric>
#include <optional>

#include "synthbound/common.hpp"
#include "synthbound/data.hpp"
#include "synthbound/loss.hpp"
#include "synthbound/model.hpp"
#include "synthbound/partition.hpp"

namespace synthbound {

enum class TrainMode { Full, Lightweight, SyntheticOnly };

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 0.5;
    double momentum = 0.9;
    LossConfig loss;
    TrainMode mode = TrainMode::Full;
    std::size_t trace_per_epoch = 2;
    std::uint64_t seed = 0;
    int clusters = 6;               // used by the lightweight streaming partition
    std::size_t kmeans_iters = 50;
    std::size_t eval_samples = 2000;  // fresh draws per trace checkpoint accuracy
};

struct TraceRow {
    std::size_t step = 0;
    double discrepancy = 0.0;  // valid-region aggregate, no lambda weights
    double robustness = 0.0;   // synthetic part, no lambda weights
    double loss_real = 0.0;
    double loss_synth = 0.0;
    double test_accuracy = 0.0;
};

using MetricTrace = std::vector<TraceRow>;

struct TrainResult {
    SoftmaxModel model;
    MetricTrace trace;
};

/// Fraction of N fresh real-world draws classified correctly; argmax ties
/// go to the lowest class index.
inline double evaluate_accuracy(const SoftmaxModel& m, const GaussianWorld& world, std::size_t N,
                                std::uint64_t seed) {
    if (N == 0) throw ParameterError("evaluate_accuracy: need at least one draw");
    const DataSet test = sample_real(world, N, seed);
    std::size_t correct = 0;
    for (const Sample& s : test.samples) {
        const Vector p = m.predict(s.features);
        int arg = 0;
        for (int k = 1; k < m.num_classes(); ++k)
            if (p[static_cast<std::size_t>(k)] > p[static_cast<std::size_t>(arg)]) arg = k;
        if (arg == s.label) correct++;
    }
    return static_cast<double>(correct) / static_cast<double>(N);
}

namespace detail {

/// Un-weighted regularizer metrics evaluated on the full datasets: the
/// valid-region discrepancy aggregate and the synthetic robustness
/// aggregate, both computed with raw softmax outputs.
inline std::pair<double, double> trace_metrics(const SoftmaxModel& m, const DataSet& S,
                                               const DataSet& G, const RegionTable& table) {
    std::vector<Vector> outS, outG;
    outS.reserve(S.size());
    outG.reserve(G.size());
    for (const Sample& s : S.samples) outS.push_back(m.predict(s.features));
    for (const Sample& s : G.samples) outG.push_back(m.predict(s.features));

    double disc = 0.0, rob = 0.0;
    const double g_norm = static_cast<double>(table.g_total);
    std::vector<Vector> a, b;
    for (int i : table.valid_regions) {
        const auto& real = table.real_members[static_cast<std::size_t>(i)];
        const auto& synth = table.synth_members[static_cast<std::size_t>(i)];
        if (synth.empty()) continue;
        a.clear();
        b.clear();
        for (std::size_t j : synth) a.push_back(outG[j]);
        for (std::size_t j : real) b.push_back(outS[j]);
        const double w = static_cast<double>(synth.size()) / g_norm;
        disc += w * discrepancy(a, b);
        rob += w * empirical_robustness(a);
    }
    return {disc, rob};
}

inline TraceRow make_trace_row(std::size_t step, const SoftmaxModel& m, const DataSet& S,
                               const DataSet& G, const RegionTable& table,
                               const TrainConfig& cfg, const GaussianWorld* eval_world) {
    TraceRow row;
    row.step = step;
    auto [disc, rob] = trace_metrics(m, S, G, table);
    row.discrepancy = disc;
    row.robustness = rob;
    row.loss_real = S.samples.empty() ? 0.0 : empirical_loss(m, S, cfg.loss.base_loss);
    row.loss_synth = empirical_loss(m, G, cfg.loss.base_loss);
    if (eval_world)
        row.test_accuracy =
            evaluate_accuracy(m, *eval_world, cfg.eval_samples, mix_seed(cfg.seed, 0xe7a1 + step));
    return row;
}

struct BatchRef {
    Source source;
    std::size_t index;
};

inline std::vector<BatchRef> shuffled_stream(std::size_t n, std::size_t g, std::mt19937_64& rng) {
    std::vector<BatchRef> stream;
    stream.reserve(n + g);
    for (std::size_t j = 0; j < n; ++j) stream.push_back({Source::Real, j});
    for (std::size_t j = 0; j < g; ++j) stream.push_back({Source::Synthetic, j});
    std::shuffle(stream.begin(), stream.end(), rng);
    return stream;
}

inline void sgd_step(SoftmaxModel& m, Vector& velocity, const Vector& grad,
                     const TrainConfig& cfg) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i];
        m.params()[i] += velocity[i];
    }
}

inline DataSet subset(const DataSet& D, const std::vector<std::size_t>& idx) {
    DataSet out;
    out.dim = D.dim;
    out.num_classes = D.num_classes;
    out.samples.reserve(idx.size());
    for (std::size_t j : idx) out.samples.push_back(D.samples[j]);
    return out;
}

}  // namespace detail

/// Algorithm-1-style training: partition fixed up front, minibatch SGD on
/// the composite loss with batch-local region tables. Trace checkpoints
/// are evaluated on the full datasets.
inline TrainResult train_full(const DataSet& S, const DataSet& G, const Partition& partition,
                              SoftmaxModel model, const TrainConfig& cfg,
                              const GaussianWorld* eval_world = nullptr) {
    if (S.samples.empty() || G.samples.empty())
        throw ParameterError("train_full: datasets must be non-empty");
    std::mt19937_64 rng = make_rng(cfg.seed, 1);
    Vector velocity(model.parameter_count(), 0.0);
    const RegionTable full_table = region_table(partition, S, G);

    MetricTrace trace;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto stream = detail::shuffled_stream(S.size(), G.size(), rng);
        const std::size_t batches = (stream.size() + cfg.batch_size - 1) / cfg.batch_size;
        const std::size_t trace_every =
            std::max<std::size_t>(1, batches / std::max<std::size_t>(1, cfg.trace_per_epoch));
        std::size_t traced_this_epoch = 0;

        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<std::size_t> realIdx, synthIdx;
            const std::size_t lo = b * cfg.batch_size;
            const std::size_t hi = std::min(stream.size(), lo + cfg.batch_size);
            for (std::size_t t = lo; t < hi; ++t)
                (stream[t].source == Source::Real ? realIdx : synthIdx).push_back(stream[t].index);

            const DataSet Sb = detail::subset(S, realIdx);
            const DataSet Gb = detail::subset(G, synthIdx);
            Vector grad;
            if (Gb.samples.empty()) {
                // Pure-real batch: only the weighted base loss applies.
                detail::OutputsCache oc = detail::forward_all(model, Sb, cfg.loss.output_mode);
                std::vector<Vector> d(Sb.size(),
                                      Vector(static_cast<std::size_t>(model.num_classes()), 0.0));
                detail::accumulate_base_loss(Sb, oc, cfg.loss.lambda_real, cfg.loss.base_loss, d);
                grad.assign(model.parameter_count(), 0.0);
                for (std::size_t j = 0; j < Sb.size(); ++j)
                    model.backprop(Sb.samples[j].features, oc.caches[j], d[j], grad);
            } else {
                const RegionTable batch_table = region_table(partition, Sb, Gb);
                grad = composite_loss_grad(model, Sb, Gb, batch_table, cfg.loss).gradient;
            }
            detail::sgd_step(model, velocity, grad, cfg);
            step++;

            if (traced_this_epoch < cfg.trace_per_epoch &&
                ((b + 1) % trace_every == 0 || b + 1 == batches)) {
                trace.push_back(detail::make_trace_row(step, model, S, G, full_table, cfg, eval_world));
                traced_this_epoch++;
            }
        }
    }
    return {std::move(model), std::move(trace)};
}

/// Algorithm-2-style training: streaming centroid updates interleaved
/// with SGD. The base losses stay batch-local but the regularizers are
/// evaluated over all data each step.
inline TrainResult train_lightweight(const DataSet& S, const DataSet& G_small, SoftmaxModel model,
                                     const TrainConfig& cfg,
                                     const GaussianWorld* eval_world = nullptr) {
    if (S.samples.empty() || G_small.samples.empty())
        throw ParameterError("train_lightweight: datasets must be non-empty");
    std::mt19937_64 rng = make_rng(cfg.seed, 1);
    Vector velocity(model.parameter_count(), 0.0);

    std::optional<Partition> partition;
    MetricTrace trace;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto stream = detail::shuffled_stream(S.size(), G_small.size(), rng);
        const std::size_t batches = (stream.size() + cfg.batch_size - 1) / cfg.batch_size;
        const std::size_t trace_every =
            std::max<std::size_t>(1, batches / std::max<std::size_t>(1, cfg.trace_per_epoch));
        std::size_t traced_this_epoch = 0;

        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<std::size_t> realIdx, synthIdx;
            const std::size_t lo = b * cfg.batch_size;
            const std::size_t hi = std::min(stream.size(), lo + cfg.batch_size);
            for (std::size_t t = lo; t < hi; ++t)
                (stream[t].source == Source::Real ? realIdx : synthIdx).push_back(stream[t].index);

            std::vector<Vector> synth_feats;
            for (std::size_t j : synthIdx) synth_feats.push_back(G_small.samples[j].features);

            if (!partition) {
                // Seed centroids from the first batch (k-means++ choice only,
                // no Lloyd iterations); fall back to all synthetic features
                // if the first batch is too small.
                std::vector<Vector> init = synth_feats;
                for (std::size_t j : realIdx) init.push_back(S.samples[j].features);
                if (init.size() < static_cast<std::size_t>(cfg.clusters))
                    for (const Sample& s : G_small.samples) init.push_back(s.features);
                std::mt19937_64 init_rng = make_rng(cfg.seed, 2);
                Partition p;
                p.centroids = detail::kmeanspp_init(init, cfg.clusters, init_rng);
                p.counts.assign(static_cast<std::size_t>(cfg.clusters), 1);
                partition = std::move(p);
            }
            if (!synth_feats.empty()) *partition = streaming_update(std::move(*partition), synth_feats);

            const RegionTable table = region_table(*partition, S, G_small);
            LossValueGrad reg = regularizer_loss_grad(model, S, G_small, table, cfg.loss);
            Vector grad = std::move(reg.gradient);

            const DataSet Sb = detail::subset(S, realIdx);
            const DataSet Gb = detail::subset(G_small, synthIdx);
            for (const DataSet* D : {&Sb, &Gb}) {
                if (D->samples.empty()) continue;
                const double weight = (D == &Sb) ? cfg.loss.lambda_real : 1.0;
                if (weight == 0.0) continue;
                detail::OutputsCache oc = detail::forward_all(model, *D, cfg.loss.output_mode);
                std::vector<Vector> d(D->size(),
                                      Vector(static_cast<std::size_t>(model.num_classes()), 0.0));
                detail::accumulate_base_loss(*D, oc, weight, cfg.loss.base_loss, d);
                for (std::size_t j = 0; j < D->size(); ++j)
                    model.backprop(D->samples[j].features, oc.caches[j], d[j], grad);
            }

            detail::sgd_step(model, velocity, grad, cfg);
            step++;

            if (traced_this_epoch < cfg.trace_per_epoch &&
                ((b + 1) % trace_every == 0 || b + 1 == batches)) {
                trace.push_back(detail::make_trace_row(step, model, S, G_small, table, cfg, eval_world));
                traced_this_epoch++;
            }
        }
    }
    return {std::move(model), std::move(trace)};
}

/// Synthetic-only training (no real data, robustness regularizer only).
inline TrainResult train_synthetic_only(const DataSet& G, const Partition& partition,
                                        SoftmaxModel model, const TrainConfig& cfg,
                                        const GaussianWorld* eval_world = nullptr) {
    if (G.samples.empty()) throw ParameterError("train_synthetic_only: empty synthetic set");
    std::mt19937_64 rng = make_rng(cfg.seed, 1);
    Vector velocity(model.parameter_count(), 0.0);
    DataSet empty_real;
    empty_real.dim = G.dim;
    empty_real.num_classes = G.num_classes;
    const RegionTable full_table = region_table(partition, empty_real, G);

    MetricTrace trace;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(G.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * cfg.batch_size;
            const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
            const DataSet Gb = detail::subset(
                G, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                            order.begin() + static_cast<std::ptrdiff_t>(hi)));
            const RegionTable batch_table = region_table(partition, empty_real, Gb);
            const LossValueGrad lv = synthetic_only_loss_grad(model, Gb, batch_table, cfg.loss);
            detail::sgd_step(model, velocity, lv.gradient, cfg);
            step++;
        }
        TraceRow row;
        row.step = step;
        row.loss_synth = empirical_loss(model, G, cfg.loss.base_loss);
        if (eval_world)
            row.test_accuracy = evaluate_accuracy(model, *eval_world, cfg.eval_samples,
                                                  mix_seed(cfg.seed, 0xe7a1 + step));
        trace.push_back(row);
    }
    return {std::move(model), std::move(trace)};
}

}  // namespace synthbound
