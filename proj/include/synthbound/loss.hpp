#pragma once

#include <utility>

#include "synthbound/common.hpp"
#include "synthbound/data.hpp"
#include "synthbound/model.hpp"
#include "synthbound/partition.hpp"

namespace synthbound {

enum class BaseLoss { CrossEntropy, L2Residual };

/// Raw compares softmax outputs h(x) directly; Residual compares
/// h(x) - e_y, which keeps the Lipschitz premise valid across mixed-label
/// pairs. Training defaults to Raw, bound evaluation uses Residual.
enum class OutputMode { Raw, Residual };

struct LossConfig {
    double lambda_real = 4.0;  // lambda
    double lambda_disc = 0.1;  // lambda_1
    double lambda_rob = 1.0;   // lambda_2
    BaseLoss base_loss = BaseLoss::CrossEntropy;
    OutputMode output_mode = OutputMode::Raw;
};

/// Bounded Lipschitz loss used for bound evaluation: l(h,z) = ||h(x) - e_y||,
/// L_h = 1 and C_h = sqrt(2) over simplex outputs.
struct LipschitzLossSpec {
    double lipschitz = 1.0;
    double sup_loss = std::sqrt(2.0);
};

constexpr double kCrossEntropyClamp = 1e-12;

inline double sample_loss(const Vector& probs, int label, BaseLoss base) {
    const auto y = static_cast<std::size_t>(label);
    if (base == BaseLoss::CrossEntropy)
        return -std::log(std::max(probs[y], kCrossEntropyClamp));
    double s = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double r = probs[k] - (k == y ? 1.0 : 0.0);
        s += r * r;
    }
    return std::sqrt(s);
}

/// d(sample_loss)/d(probs); the L2Residual gradient takes subgradient 0
/// at an exact zero residual.
inline Vector sample_loss_dprobs(const Vector& probs, int label, BaseLoss base) {
    const auto y = static_cast<std::size_t>(label);
    Vector d(probs.size(), 0.0);
    if (base == BaseLoss::CrossEntropy) {
        d[y] = -1.0 / std::max(probs[y], kCrossEntropyClamp);
        return d;
    }
    const double l = sample_loss(probs, label, base);
    if (l == 0.0) return d;
    for (std::size_t k = 0; k < probs.size(); ++k)
        d[k] = (probs[k] - (k == y ? 1.0 : 0.0)) / l;
    return d;
}

inline Vector mode_output(const Vector& probs, int label, OutputMode mode) {
    if (mode == OutputMode::Raw) return probs;
    Vector out = probs;
    out[static_cast<std::size_t>(label)] -= 1.0;
    return out;
}

inline double empirical_loss(const SoftmaxModel& m, const DataSet& D, BaseLoss base) {
    if (D.samples.empty()) throw ParameterError("empirical_loss: empty dataset");
    double total = 0.0;
    for (const Sample& s : D.samples) total += sample_loss(m.predict(s.features), s.label, base);
    return total / static_cast<double>(D.size());
}

/// Mean Euclidean output distance over all cross pairs of two output sets.
inline double discrepancy(const std::vector<Vector>& outputs_G, const std::vector<Vector>& outputs_S) {
    if (outputs_G.empty() || outputs_S.empty())
        throw ParameterError("discrepancy: both output sets must be non-empty");
    double total = 0.0;
    for (const Vector& u : outputs_G)
        for (const Vector& s : outputs_S) total += euclidean_distance(s, u);
    return total / (static_cast<double>(outputs_G.size()) * static_cast<double>(outputs_S.size()));
}

/// Mean over points of the mean output distance to the other points in
/// the same region; 0 for singletons.
inline double empirical_robustness(const std::vector<Vector>& outputs) {
    if (outputs.empty()) throw ParameterError("empirical_robustness: empty output set");
    const std::size_t n = outputs.size();
    if (n == 1) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) total += 2.0 * euclidean_distance(outputs[i], outputs[j]);
    return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// K-means reduction target: sum over valid regions of (g_i/g) R(G_i
/// outputs) + (n_i/n) R(S_i outputs), with R the empirical robustness.
inline double partition_objective(const RegionTable& table, const std::vector<Vector>& outputs_S,
                                  const std::vector<Vector>& outputs_G) {
    if (table.valid_regions.empty()) throw ParameterError("partition_objective: empty T_S");
    double total = 0.0;
    std::vector<Vector> outs;
    for (int i : table.valid_regions) {
        const auto& real = table.real_members[static_cast<std::size_t>(i)];
        const auto& synth = table.synth_members[static_cast<std::size_t>(i)];
        if (!synth.empty()) {
            outs.clear();
            for (std::size_t j : synth) outs.push_back(outputs_G[j]);
            total += (static_cast<double>(synth.size()) / static_cast<double>(table.g)) *
                     empirical_robustness(outs);
        }
        outs.clear();
        for (std::size_t j : real) outs.push_back(outputs_S[j]);
        total += (static_cast<double>(real.size()) / static_cast<double>(table.n)) *
                 empirical_robustness(outs);
    }
    return total;
}

struct LossValueGrad {
    double loss = 0.0;
    Vector gradient;
};

namespace detail {

struct OutputsCache {
    std::vector<SoftmaxModel::ForwardCache> caches;
    std::vector<Vector> mode_outputs;
};

inline OutputsCache forward_all(const SoftmaxModel& m, const DataSet& D, OutputMode mode) {
    OutputsCache oc;
    oc.caches.reserve(D.size());
    oc.mode_outputs.reserve(D.size());
    for (const Sample& s : D.samples) {
        oc.caches.push_back(m.forward(s.features));
        oc.mode_outputs.push_back(mode_output(oc.caches.back().probs, s.label, mode));
    }
    return oc;
}

/// Adds w * d||out_a - out_b||/d(probs) to the per-sample output
/// gradients; subgradient 0 when the outputs coincide. Returns the distance.
inline double pair_distance_grad(const Vector& out_a, const Vector& out_b, double w,
                                 Vector& dprobs_a, Vector& dprobs_b) {
    const double dist = euclidean_distance(out_a, out_b);
    if (dist > 0.0) {
        for (std::size_t k = 0; k < out_a.size(); ++k) {
            const double dir = (out_a[k] - out_b[k]) / dist;
            dprobs_a[k] += w * dir;
            dprobs_b[k] -= w * dir;
        }
    }
    return dist;
}

inline double accumulate_base_loss(const DataSet& D, const OutputsCache& oc, double weight,
                                   BaseLoss base, std::vector<Vector>& dprobs) {
    double loss = 0.0;
    const double w = weight / static_cast<double>(D.size());
    for (std::size_t j = 0; j < D.size(); ++j) {
        const Vector& probs = oc.caches[j].probs;
        loss += w * sample_loss(probs, D.samples[j].label, base);
        const Vector dl = sample_loss_dprobs(probs, D.samples[j].label, base);
        for (std::size_t k = 0; k < dl.size(); ++k) dprobs[j][k] += w * dl[k];
    }
    return loss;
}

inline void check_table(const RegionTable& table, const DataSet& S, const DataSet& G) {
    if (table.n != S.size() || table.g_total != G.size())
        throw IntegrityError("loss: region table does not match the datasets");
}

inline Vector finish_gradient(const SoftmaxModel& m, const DataSet& S, const OutputsCache& oS,
                              const std::vector<Vector>& dS, const DataSet& G,
                              const OutputsCache& oG, const std::vector<Vector>& dG) {
    Vector grad(m.parameter_count(), 0.0);
    for (std::size_t j = 0; j < S.size(); ++j)
        m.backprop(S.samples[j].features, oS.caches[j], dS[j], grad);
    for (std::size_t j = 0; j < G.size(); ++j)
        m.backprop(G.samples[j].features, oG.caches[j], dG[j], grad);
    return grad;
}

/// Discrepancy + robustness regularizers into per-sample output grads.
/// Normalizer g is |G|; regions in T_S with no synthetic members
/// contribute nothing. Returns the summed regularizer value.
inline double accumulate_regularizers(const RegionTable& table, const LossConfig& cfg,
                                      const OutputsCache& oS, const OutputsCache& oG,
                                      std::vector<Vector>& dS, std::vector<Vector>& dG) {
    const double g_norm = static_cast<double>(table.g_total);
    double loss = 0.0;
    for (int i : table.valid_regions) {
        const auto& real = table.real_members[static_cast<std::size_t>(i)];
        const auto& synth = table.synth_members[static_cast<std::size_t>(i)];
        if (synth.empty()) continue;

        if (cfg.lambda_disc != 0.0) {
            // (g_i/g)(1/(g_i n_i)) collapses to 1/(g n_i).
            const double w = cfg.lambda_disc / (g_norm * static_cast<double>(real.size()));
            for (std::size_t js : real)
                for (std::size_t ju : synth)
                    loss += w * pair_distance_grad(oS.mode_outputs[js], oG.mode_outputs[ju], w,
                                                   dS[js], dG[ju]);
        }
        if (cfg.lambda_rob != 0.0 && synth.size() > 1) {
            const double w = cfg.lambda_rob / (g_norm * static_cast<double>(synth.size()));
            for (std::size_t a = 0; a < synth.size(); ++a)
                for (std::size_t b = a + 1; b < synth.size(); ++b)
                    // Ordered distinct pairs: each unordered pair counts twice.
                    loss += 2.0 * w *
                            pair_distance_grad(oG.mode_outputs[synth[a]], oG.mode_outputs[synth[b]],
                                               2.0 * w, dG[synth[a]], dG[synth[b]]);
        }
    }
    return loss;
}

}  // namespace detail

/// The two regularizer terms only (lambda_1 discrepancy + lambda_2
/// robustness), with gradient. Used by the lightweight trainer, which
/// evaluates them globally while the base losses stay batch-local.
inline LossValueGrad regularizer_loss_grad(const SoftmaxModel& m, const DataSet& S, const DataSet& G,
                                           const RegionTable& table, const LossConfig& cfg) {
    detail::check_table(table, S, G);
    detail::OutputsCache oS = detail::forward_all(m, S, cfg.output_mode);
    detail::OutputsCache oG = detail::forward_all(m, G, cfg.output_mode);
    std::vector<Vector> dS(S.size(), Vector(static_cast<std::size_t>(m.num_classes()), 0.0));
    std::vector<Vector> dG(G.size(), Vector(static_cast<std::size_t>(m.num_classes()), 0.0));
    LossValueGrad out;
    out.loss = detail::accumulate_regularizers(table, cfg, oS, oG, dS, dG);
    out.gradient = detail::finish_gradient(m, S, oS, dS, G, oG, dG);
    return out;
}

/// Composite training loss:
///   lambda * F(S,h) + F(G,h)
///   + lambda_1 * sum_{i in T_S} (g_i/g) (1/(g_i n_i)) sum ||h(s)-h(u)||
///   + lambda_2 * (1/g) sum_{i in T_S} (1/g_i) sum_{g1 != g2 ordered} ||h(g1)-h(g2)||
/// with its exact analytic gradient. The normalizer g here is |G| (all
/// synthetic samples); the bound module uses the valid-region count instead.
inline LossValueGrad composite_loss_grad(const SoftmaxModel& m, const DataSet& S, const DataSet& G,
                                         const RegionTable& table, const LossConfig& cfg) {
    if (G.samples.empty()) throw ParameterError("composite_loss_grad: empty synthetic set");
    detail::check_table(table, S, G);

    detail::OutputsCache oS = detail::forward_all(m, S, cfg.output_mode);
    detail::OutputsCache oG = detail::forward_all(m, G, cfg.output_mode);
    std::vector<Vector> dS(S.size(), Vector(static_cast<std::size_t>(m.num_classes()), 0.0));
    std::vector<Vector> dG(G.size(), Vector(static_cast<std::size_t>(m.num_classes()), 0.0));

    double loss = 0.0;
    if (!S.samples.empty() && cfg.lambda_real != 0.0)
        loss += detail::accumulate_base_loss(S, oS, cfg.lambda_real, cfg.base_loss, dS);
    loss += detail::accumulate_base_loss(G, oG, 1.0, cfg.base_loss, dG);
    loss += detail::accumulate_regularizers(table, cfg, oS, oG, dS, dG);

    LossValueGrad out;
    out.loss = loss;
    out.gradient = detail::finish_gradient(m, S, oS, dS, G, oG, dG);
    return out;
}

/// Synthetic-only variant: F(G,h) plus the robustness regularizer over
/// every region holding at least two synthetic samples (not only T_S).
inline LossValueGrad synthetic_only_loss_grad(const SoftmaxModel& m, const DataSet& G,
                                              const RegionTable& table, const LossConfig& cfg) {
    if (G.samples.empty()) throw ParameterError("synthetic_only_loss_grad: empty synthetic set");
    if (table.g_total != G.size())
        throw IntegrityError("synthetic_only_loss_grad: region table does not match the dataset");

    const double g_norm = static_cast<double>(G.size());
    detail::OutputsCache oG = detail::forward_all(m, G, cfg.output_mode);
    std::vector<Vector> dG(G.size(), Vector(static_cast<std::size_t>(m.num_classes()), 0.0));

    double loss = detail::accumulate_base_loss(G, oG, 1.0, cfg.base_loss, dG);
    if (cfg.lambda_rob != 0.0) {
        for (const auto& synth : table.synth_members) {
            if (synth.size() < 2) continue;
            const double w = cfg.lambda_rob / (g_norm * static_cast<double>(synth.size()));
            for (std::size_t a = 0; a < synth.size(); ++a)
                for (std::size_t b = a + 1; b < synth.size(); ++b)
                    loss += 2.0 * w *
                            detail::pair_distance_grad(oG.mode_outputs[synth[a]],
                                                       oG.mode_outputs[synth[b]], 2.0 * w,
                                                       dG[synth[a]], dG[synth[b]]);
        }
    }

    LossValueGrad out;
    out.loss = loss;
    out.gradient.assign(m.parameter_count(), 0.0);
    for (std::size_t j = 0; j < G.size(); ++j)
        m.backprop(G.samples[j].features, oG.caches[j], dG[j], out.gradient);
    return out;
}

}  // namespace synthbound
