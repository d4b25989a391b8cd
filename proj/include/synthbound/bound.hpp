#pragma once

#include <string>

#include "synthbound/common.hpp"
#include "synthbound/data.hpp"
#include "synthbound/loss.hpp"
#include "synthbound/model.hpp"
#include "synthbound/partition.hpp"
#include "synthbound/train.hpp"

namespace synthbound {

struct BoundInputs {
    double delta = 0.1;
    LipschitzLossSpec spec;
    std::size_t mc_samples = 2000;  // draws per population-quantity estimate
    std::uint64_t seed = 0;
};

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

/// Evaluated right-hand side of the main bound, term by term. All terms
/// use Residual outputs and the L2 residual loss (L_h = 1, C_h = sqrt(2)).
struct BoundReport {
    double disc_term = 0.0;        // L_h sum (g_i/g) d(G_i, S_i)
    double rob_synth_term = 0.0;   // L_h sum (g_i/g) R(G_i, Z_i | P_g)
    double rob_real_term = 0.0;    // L_h sum (n_i/n) R(S_i, Z_i | P_0)
    double synth_loss = 0.0;       // F(P_g, h), MC estimate
    double reweight_term = 0.0;    // sum [n_i/n - g_i/g] F(S_i, h)
    double concentration = 0.0;
    double total = 0.0;
    double population_loss_estimate = 0.0;  // MC estimate of F(P_0, h)
    double population_loss_std_error = 0.0;
    std::size_t empty_region_warnings = 0;  // regions whose MC rejection accepted nothing
    std::size_t g_valid = 0;   // sum of g_i over T_S (the bound's g)
    std::size_t g_all = 0;     // |G|, logged for comparison with training
};

struct RegionMeasures {
    Vector p_real;   // P_0(Z_i) estimates, indexed by region
    Vector p_synth;  // P_g(Z_i) estimates
};

/// Draw handle over one of the world's two distributions.
struct DistributionHandle {
    const GaussianWorld* world = nullptr;
    bool synthetic = false;
};

namespace detail {

inline Vector residual_output(const SoftmaxModel& m, const Sample& s) {
    return mode_output(m.predict(s.features), s.label, OutputMode::Residual);
}

/// Draws from `dist` that land in region `i`, by rejection with an
/// attempt budget of 50x the requested acceptance count.
inline std::vector<Sample> region_conditioned_draws(const DistributionHandle& dist,
                                                    const Partition& p, int region,
                                                    std::size_t target, std::uint64_t seed) {
    std::vector<Sample> accepted;
    const std::size_t max_attempts = 50 * target;
    std::size_t attempts = 0;
    std::uint64_t batch = 0;
    while (accepted.size() < target && attempts < max_attempts) {
        const std::size_t chunk = std::min<std::size_t>(target, max_attempts - attempts);
        const DataSet draws = dist.synthetic
                                  ? sample_synthetic(*dist.world, chunk, mix_seed(seed, batch))
                                  : sample_real(*dist.world, chunk, mix_seed(seed, batch));
        for (const Sample& s : draws.samples) {
            if (assign(p, s.features) == region) accepted.push_back(s);
            if (accepted.size() >= target) break;
        }
        attempts += chunk;
        batch++;
    }
    return accepted;
}

/// MC estimate of R_h(members, Z_i | P): mean over members of the mean
/// residual-output distance to region-conditioned draws. Returns 0 (and
/// bumps `warnings`) if no draw lands in the region.
inline double robustness_mc(const SoftmaxModel& m, const std::vector<Vector>& member_outputs,
                            const DistributionHandle& dist, const Partition& p, int region,
                            std::size_t target, std::uint64_t seed, std::size_t& warnings) {
    if (member_outputs.empty()) return 0.0;
    const std::vector<Sample> draws = region_conditioned_draws(dist, p, region, target, seed);
    if (draws.empty()) {
        warnings++;
        return 0.0;
    }
    std::vector<Vector> draw_outputs;
    draw_outputs.reserve(draws.size());
    for (const Sample& s : draws) draw_outputs.push_back(residual_output(m, s));
    double total = 0.0;
    for (const Vector& u : member_outputs)
        for (const Vector& z : draw_outputs) total += euclidean_distance(u, z);
    return total / (static_cast<double>(member_outputs.size()) * static_cast<double>(draw_outputs.size()));
}

inline std::vector<Vector> member_residual_outputs(const SoftmaxModel& m, const DataSet& D,
                                                   const std::vector<std::size_t>& idx) {
    std::vector<Vector> outs;
    outs.reserve(idx.size());
    for (std::size_t j : idx) outs.push_back(residual_output(m, D.samples[j]));
    return outs;
}

inline double empirical_loss_subset(const SoftmaxModel& m, const DataSet& D,
                                    const std::vector<std::size_t>& idx) {
    double total = 0.0;
    for (std::size_t j : idx)
        total += sample_loss(m.predict(D.samples[j].features), D.samples[j].label,
                             BaseLoss::L2Residual);
    return total / static_cast<double>(idx.size());
}

}  // namespace detail

/// (1/N) sum of the bounded residual loss over fresh draws from P.
inline MCEstimate mc_population_loss(const SoftmaxModel& m, const DistributionHandle& dist,
                                     std::size_t N, std::uint64_t seed) {
    if (N == 0) throw ParameterError("mc_population_loss: need at least one draw");
    const DataSet draws = dist.synthetic ? sample_synthetic(*dist.world, N, seed)
                                         : sample_real(*dist.world, N, seed);
    double sum = 0.0, sumsq = 0.0;
    for (const Sample& s : draws.samples) {
        const double l = sample_loss(m.predict(s.features), s.label, BaseLoss::L2Residual);
        sum += l;
        sumsq += l * l;
    }
    MCEstimate est;
    est.count = N;
    est.mean = sum / static_cast<double>(N);
    const double var = std::max(0.0, sumsq / static_cast<double>(N) - est.mean * est.mean);
    est.std_error = std::sqrt(var / static_cast<double>(N));
    return est;
}

inline double concentration_term(double sup_loss, std::size_t n, std::size_t g, int K,
                                 double delta) {
    return sup_loss * (1.0 / std::sqrt(static_cast<double>(n)) + 1.0 / std::sqrt(static_cast<double>(g))) *
           std::sqrt(2.0 * K * std::log(2.0) + 2.0 * std::log(2.0 / delta));
}

/// Evaluates every term of the main two-distribution bound on a concrete
/// (model, S, G, partition) instance. The bound's g counts only
/// synthetic samples inside valid regions; every valid region must hold
/// at least one synthetic sample.
inline BoundReport mixture_bound(const SoftmaxModel& m, const DataSet& S, const DataSet& G,
                                  const Partition& p, const RegionTable& table,
                                  const BoundInputs& inputs, const GaussianWorld& world) {
    for (int i : table.valid_regions)
        if (table.g_i(i) == 0)
            throw ParameterError("mixture_bound: valid region " + std::to_string(i) +
                                 " has no synthetic samples");
    if (table.valid_regions.empty()) throw ParameterError("mixture_bound: empty T_S");

    BoundReport r;
    r.g_valid = table.g;
    r.g_all = table.g_total;
    const double n = static_cast<double>(table.n);
    const double g = static_cast<double>(table.g);
    const double L = inputs.spec.lipschitz;
    const DistributionHandle real{&world, false};
    const DistributionHandle synth{&world, true};

    for (int i : table.valid_regions) {
        const auto& real_idx = table.real_members[static_cast<std::size_t>(i)];
        const auto& synth_idx = table.synth_members[static_cast<std::size_t>(i)];
        const double wi_g = static_cast<double>(synth_idx.size()) / g;
        const double wi_n = static_cast<double>(real_idx.size()) / n;

        const std::vector<Vector> outS = detail::member_residual_outputs(m, S, real_idx);
        const std::vector<Vector> outG = detail::member_residual_outputs(m, G, synth_idx);

        r.disc_term += L * wi_g * discrepancy(outG, outS);
        r.rob_synth_term +=
            L * wi_g * detail::robustness_mc(m, outG, synth, p, i, inputs.mc_samples,
                                             mix_seed(inputs.seed, 0x100 + static_cast<std::uint64_t>(i)),
                                             r.empty_region_warnings);
        r.rob_real_term +=
            L * wi_n * detail::robustness_mc(m, outS, real, p, i, inputs.mc_samples,
                                             mix_seed(inputs.seed, 0x200 + static_cast<std::uint64_t>(i)),
                                             r.empty_region_warnings);
        r.reweight_term += (wi_n - wi_g) * detail::empirical_loss_subset(m, S, real_idx);
    }

    r.synth_loss = mc_population_loss(m, synth, inputs.mc_samples, mix_seed(inputs.seed, 0x300)).mean;
    r.concentration = concentration_term(inputs.spec.sup_loss, table.n, table.g, p.k(), inputs.delta);
    r.total = r.disc_term + r.rob_synth_term + r.rob_real_term + r.synth_loss + r.reweight_term +
              r.concentration;

    const MCEstimate pop = mc_population_loss(m, real, inputs.mc_samples, mix_seed(inputs.seed, 0x400));
    r.population_loss_estimate = pop.mean;
    r.population_loss_std_error = pop.std_error;
    return r;
}

/// Empirical region frequencies of P_0 and P_g from N draws each.
inline RegionMeasures estimate_region_measures(const Partition& p, const GaussianWorld& world,
                                               std::size_t N, std::uint64_t seed) {
    if (N == 0) throw ParameterError("estimate_region_measures: need at least one draw");
    RegionMeasures rm;
    rm.p_real.assign(static_cast<std::size_t>(p.k()), 0.0);
    rm.p_synth.assign(static_cast<std::size_t>(p.k()), 0.0);
    const DataSet dr = sample_real(world, N, mix_seed(seed, 0));
    const DataSet ds = sample_synthetic(world, N, mix_seed(seed, 1));
    for (const Sample& s : dr.samples) rm.p_real[static_cast<std::size_t>(assign(p, s.features))] += 1.0;
    for (const Sample& s : ds.samples) rm.p_synth[static_cast<std::size_t>(assign(p, s.features))] += 1.0;
    for (double& v : rm.p_real) v /= static_cast<double>(N);
    for (double& v : rm.p_synth) v /= static_cast<double>(N);
    return rm;
}

struct MeasureBoundReport {
    double rob_synth_term = 0.0;  // L_h sum p_i^g R(S_i, Z_i | P_g)
    double rob_real_term = 0.0;   // L_h sum (n_i/n) R(S_i, Z_i | P_0)
    double synth_loss = 0.0;
    double reweight_term = 0.0;   // sum [n_i/n - p_i^g] F(S_i, h)
    double concentration = 0.0;
    double total = 0.0;
    std::size_t empty_region_warnings = 0;
};

/// The asymptotic-in-g bound: synthetic empirical quantities replaced by
/// region measures and population robustness of the real members.
inline MeasureBoundReport measure_bound(const SoftmaxModel& m, const DataSet& S, const Partition& p,
                                     const RegionTable& table, const RegionMeasures& measures,
                                     const BoundInputs& inputs, const GaussianWorld& world) {
    if (table.valid_regions.empty()) throw ParameterError("measure_bound: empty T_S");
    MeasureBoundReport r;
    const double n = static_cast<double>(table.n);
    const double L = inputs.spec.lipschitz;
    const DistributionHandle real{&world, false};
    const DistributionHandle synth{&world, true};

    for (int i : table.valid_regions) {
        const auto& real_idx = table.real_members[static_cast<std::size_t>(i)];
        const double wi_n = static_cast<double>(real_idx.size()) / n;
        const double pig = measures.p_synth[static_cast<std::size_t>(i)];
        const std::vector<Vector> outS = detail::member_residual_outputs(m, S, real_idx);

        r.rob_synth_term +=
            L * pig * detail::robustness_mc(m, outS, synth, p, i, inputs.mc_samples,
                                            mix_seed(inputs.seed, 0x500 + static_cast<std::uint64_t>(i)),
                                            r.empty_region_warnings);
        r.rob_real_term +=
            L * wi_n * detail::robustness_mc(m, outS, real, p, i, inputs.mc_samples,
                                             mix_seed(inputs.seed, 0x600 + static_cast<std::uint64_t>(i)),
                                             r.empty_region_warnings);
        r.reweight_term += (wi_n - pig) * detail::empirical_loss_subset(m, S, real_idx);
    }
    r.synth_loss = mc_population_loss(m, synth, inputs.mc_samples, mix_seed(inputs.seed, 0x700)).mean;
    r.concentration = (inputs.spec.sup_loss / std::sqrt(n)) *
                      std::sqrt(2.0 * p.k() * std::log(2.0) - 2.0 * std::log(inputs.delta));
    r.total = r.rob_synth_term + r.rob_real_term + r.synth_loss + r.reweight_term + r.concentration;
    return r;
}

struct MacroAverageReport {
    double lhs = 0.0;  // sum p_i^g F_i(P_0, h)
    double rhs = 0.0;  // F(P_g, h) + L_h [d(P_0, P_g) + d(P_0, P_0)]
    std::size_t skipped_regions = 0;  // regions with no P_0 mass in the MC sample
};

/// Macro-average bound: the left side conditions the population loss per
/// region, the right side uses whole-space distributional discrepancies
/// estimated from paired draws.
inline MacroAverageReport macro_average_bound(const SoftmaxModel& m, const Partition& p,
                                       const GaussianWorld& world, const BoundInputs& inputs) {
    MacroAverageReport r;
    const DistributionHandle real{&world, false};
    const DistributionHandle synth{&world, true};
    const RegionMeasures measures =
        estimate_region_measures(p, world, inputs.mc_samples, mix_seed(inputs.seed, 0x800));

    for (int i = 0; i < p.k(); ++i) {
        const double pig = measures.p_synth[static_cast<std::size_t>(i)];
        if (pig == 0.0) continue;
        if (measures.p_real[static_cast<std::size_t>(i)] == 0.0) {
            r.skipped_regions++;
            continue;
        }
        const std::vector<Sample> draws = detail::region_conditioned_draws(
            real, p, i, inputs.mc_samples, mix_seed(inputs.seed, 0x900 + static_cast<std::uint64_t>(i)));
        if (draws.empty()) {
            r.skipped_regions++;
            continue;
        }
        double fi = 0.0;
        for (const Sample& s : draws)
            fi += sample_loss(m.predict(s.features), s.label, BaseLoss::L2Residual);
        fi /= static_cast<double>(draws.size());
        r.lhs += pig * fi;
    }

    // Paired draws for the distributional discrepancies.
    const DataSet a = sample_real(world, inputs.mc_samples, mix_seed(inputs.seed, 0xa00));
    const DataSet b = sample_synthetic(world, inputs.mc_samples, mix_seed(inputs.seed, 0xa01));
    const DataSet c = sample_real(world, inputs.mc_samples, mix_seed(inputs.seed, 0xa02));
    double d_pg = 0.0, d_p0 = 0.0;
    for (std::size_t j = 0; j < inputs.mc_samples; ++j) {
        const Vector oa = detail::residual_output(m, a.samples[j]);
        d_pg += euclidean_distance(oa, detail::residual_output(m, b.samples[j]));
        d_p0 += euclidean_distance(oa, detail::residual_output(m, c.samples[j]));
    }
    d_pg /= static_cast<double>(inputs.mc_samples);
    d_p0 /= static_cast<double>(inputs.mc_samples);

    r.rhs = mc_population_loss(m, synth, inputs.mc_samples, mix_seed(inputs.seed, 0xa03)).mean +
            inputs.spec.lipschitz * (d_pg + d_p0);
    return r;
}

enum class BoundDirection { Upper, Lower };

struct SingleDistReport {
    double lhs = 0.0;  // Upper: MC F(P,h); Lower: F(S,h)
    double rhs = 0.0;
    double lhs_std_error = 0.0;  // nonzero only when the lhs is an MC estimate
};

/// Single-distribution bound in both directions: population vs empirical
/// loss within one robustness + concentration envelope.
inline SingleDistReport bound_single_distribution(const SoftmaxModel& m, const DataSet& S,
                                                  const Partition& p, const RegionTable& table,
                                                  const DistributionHandle& dist,
                                                  const BoundInputs& inputs,
                                                  BoundDirection direction) {
    if (S.samples.empty()) throw ParameterError("bound_single_distribution: empty dataset");
    const double n = static_cast<double>(table.n);
    double rob = 0.0;
    std::size_t warnings = 0;
    for (int i : table.valid_regions) {
        const auto& idx = table.real_members[static_cast<std::size_t>(i)];
        const std::vector<Vector> outs = detail::member_residual_outputs(m, S, idx);
        rob += inputs.spec.lipschitz * (static_cast<double>(idx.size()) / n) *
               detail::robustness_mc(m, outs, dist, p, i, inputs.mc_samples,
                                     mix_seed(inputs.seed, 0xb00 + static_cast<std::uint64_t>(i)),
                                     warnings);
    }
    const double conc = (inputs.spec.sup_loss / std::sqrt(n)) *
                        std::sqrt(2.0 * p.k() * std::log(2.0) - 2.0 * std::log(inputs.delta));
    const double emp = empirical_loss(m, S, BaseLoss::L2Residual);
    const MCEstimate pop = mc_population_loss(m, dist, inputs.mc_samples, mix_seed(inputs.seed, 0xc00));

    SingleDistReport r;
    if (direction == BoundDirection::Upper) {
        r.lhs = pop.mean;
        r.lhs_std_error = pop.std_error;
        r.rhs = emp + rob + conc;
    } else {
        r.lhs = emp;
        r.rhs = pop.mean + rob + conc;
    }
    return r;
}

/// One bound-verification campaign: fresh world sampling, training, and
/// bound evaluation per trial.
struct TrialSpec {
    GaussianWorld world;
    std::size_t n = 48;
    std::size_t g = 300;
    int clusters = 6;
    std::size_t kmeans_iters = 50;
    TrainConfig train;
    BoundInputs bound;
    std::size_t population_mc_samples = 20000;  // high-precision F(P_0, h) check
};

struct VerifyResult {
    std::size_t trials = 0;
    std::size_t violations = 0;
    std::size_t skipped = 0;  // trials where some valid region drew no synthetic sample
    double rate = 0.0;
    Vector slacks;  // rhs - population estimate, one per trial
    std::vector<BoundReport> reports;
};

/// A violation requires the population-loss estimate to exceed the bound
/// by more than 3 MC standard errors, so sampling noise cannot
/// manufacture one.
inline VerifyResult verify_bound(const TrialSpec& spec, std::size_t trials, std::uint64_t seed) {
    if (trials == 0) throw ParameterError("verify_bound: need at least one trial");
    VerifyResult out;
    out.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t ts = seed + t;
        const DataSet S = sample_real(spec.world, spec.n, mix_seed(ts, 1));
        const DataSet G = sample_synthetic(spec.world, spec.g, mix_seed(ts, 2));
        const DataSet joint = merge(S, G);
        std::vector<Vector> feats;
        feats.reserve(joint.size());
        for (const Sample& s : joint.samples) feats.push_back(s.features);
        const Partition p = kmeans_fit(feats, spec.clusters, spec.kmeans_iters, mix_seed(ts, 3));

        TrainConfig tc = spec.train;
        tc.seed = mix_seed(ts, 4);
        SoftmaxModel model = model_init(spec.world.dim(), spec.world.num_classes(), 0, mix_seed(ts, 5));
        model = train_full(S, G, p, std::move(model), tc).model;

        RegionTable table = region_table(p, S, G);
        bool applicable = true;
        for (int i : table.valid_regions)
            if (table.g_i(i) == 0) applicable = false;
        if (!applicable) {
            // The bound's premise requires g_i > 0 on every valid region; a trial
            // where the draw misses that assumption is not a bound check.
            out.skipped++;
            continue;
        }
        BoundInputs bi = spec.bound;
        bi.seed = mix_seed(ts, 6);
        const BoundReport report = mixture_bound(model, S, G, p, table, bi, spec.world);

        const MCEstimate pop = mc_population_loss(model, DistributionHandle{&spec.world, false},
                                                  spec.population_mc_samples, mix_seed(ts, 7));
        const double slack = report.total - pop.mean;
        out.slacks.push_back(slack);
        if (pop.mean > report.total + 3.0 * pop.std_error) out.violations++;
        out.reports.push_back(report);
    }
    const std::size_t effective = trials - out.skipped;
    out.rate = effective == 0 ? 0.0
                              : static_cast<double>(out.violations) / static_cast<double>(effective);
    return out;
}

}  // namespace synthbound
