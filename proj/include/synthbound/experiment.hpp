#pragma once

#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "synthbound/bound.hpp"
#include "synthbound/config.hpp"
#include "synthbound/train.hpp"

namespace synthbound {

/// One result row: a single (config point, seed) execution.
struct ReportRow {
    std::string fingerprint;
    std::uint64_t seed = 0;
    std::string sweep_axis;
    double sweep_value = 0.0;
    double test_accuracy = 0.0;
    double final_discrepancy = 0.0;
    double final_robustness = 0.0;
    BoundReport bound;
    double wall_time_s = 0.0;
};

inline const char* report_csv_header() {
    return "fingerprint,seed,axis,axis_value,test_acc,final_disc,final_rob,disc_term,"
           "rob_synth_term,rob_real_term,synth_loss,reweight_term,concentration,bound_total,"
           "population_loss,g_valid,g_all,wall_time_s";
}

inline void write_report_csv_row(std::ostream& os, const ReportRow& r) {
    os.precision(10);
    os << r.fingerprint << ',' << r.seed << ',' << (r.sweep_axis.empty() ? "-" : r.sweep_axis)
       << ',' << r.sweep_value << ',' << r.test_accuracy << ',' << r.final_discrepancy << ','
       << r.final_robustness << ',' << r.bound.disc_term << ',' << r.bound.rob_synth_term << ','
       << r.bound.rob_real_term << ',' << r.bound.synth_loss << ',' << r.bound.reweight_term << ','
       << r.bound.concentration << ',' << r.bound.total << ',' << r.bound.population_loss_estimate
       << ',' << r.bound.g_valid << ',' << r.bound.g_all << ',' << r.wall_time_s << '\n';
}

inline nlohmann::json report_row_json(const ReportRow& r) {
    return nlohmann::json{{"fingerprint", r.fingerprint},
                          {"seed", r.seed},
                          {"axis", r.sweep_axis},
                          {"axis_value", r.sweep_value},
                          {"test_acc", r.test_accuracy},
                          {"final_disc", r.final_discrepancy},
                          {"final_rob", r.final_robustness},
                          {"disc_term", r.bound.disc_term},
                          {"rob_synth_term", r.bound.rob_synth_term},
                          {"rob_real_term", r.bound.rob_real_term},
                          {"synth_loss", r.bound.synth_loss},
                          {"reweight_term", r.bound.reweight_term},
                          {"concentration", r.bound.concentration},
                          {"bound_total", r.bound.total},
                          {"population_loss", r.bound.population_loss_estimate},
                          {"g_valid", r.bound.g_valid},
                          {"g_all", r.bound.g_all},
                          {"wall_time_s", r.wall_time_s}};
}

inline void write_trace_csv(std::ostream& os, const MetricTrace& trace) {
    os << "step,disc,rob,loss_real,loss_synth,test_acc\n";
    os.precision(10);
    for (const TraceRow& row : trace)
        os << row.step << ',' << row.discrepancy << ',' << row.robustness << ',' << row.loss_real
           << ',' << row.loss_synth << ',' << row.test_accuracy << '\n';
}

struct ExperimentResult {
    ReportRow row;
    MetricTrace trace;
};

/// sample -> cluster -> train -> evaluate -> bound, one seed.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig local = cfg;
    local.seed = seed;
    const GaussianWorld world = local.make_world();
    const DataSet S = sample_real(world, local.n, mix_seed(seed, 1));
    const DataSet G = sample_synthetic(world, local.g, mix_seed(seed, 2));

    TrainConfig tc = local.make_train_config();
    tc.seed = mix_seed(seed, 4);
    SoftmaxModel model = model_init(local.d, local.classes, local.hidden_units, mix_seed(seed, 5));

    Partition partition;
    TrainResult trained{std::move(model), {}};
    if (tc.mode == TrainMode::Lightweight) {
        trained = train_lightweight(S, G, std::move(trained.model), tc, &world);
        // Reconstruct the table partition from the trained stream for bounds.
        const DataSet joint = merge(S, G);
        std::vector<Vector> feats;
        for (const Sample& s : joint.samples) feats.push_back(s.features);
        partition = kmeans_fit(feats, local.k, local.kmeans_iters, mix_seed(seed, 3));
    } else {
        const DataSet joint = merge(S, G);
        std::vector<Vector> feats;
        for (const Sample& s : joint.samples) feats.push_back(s.features);
        partition = kmeans_fit(feats, local.k, local.kmeans_iters, mix_seed(seed, 3));
        if (tc.mode == TrainMode::SyntheticOnly)
            trained = train_synthetic_only(G, partition, std::move(trained.model), tc, &world);
        else
            trained = train_full(S, G, partition, std::move(trained.model), tc, &world);
    }

    ExperimentResult result;
    result.trace = std::move(trained.trace);
    ReportRow& row = result.row;
    row.fingerprint = local.fingerprint();
    row.seed = seed;
    row.test_accuracy =
        evaluate_accuracy(trained.model, world, local.eval_samples, mix_seed(seed, 6));
    if (!result.trace.empty()) {
        row.final_discrepancy = result.trace.back().discrepancy;
        row.final_robustness = result.trace.back().robustness;
    }

    const RegionTable table = region_table(partition, S, G);
    bool bound_ok = !table.valid_regions.empty();
    for (int i : table.valid_regions) bound_ok = bound_ok && table.g_i(i) > 0;
    if (bound_ok) {
        BoundInputs bi = local.make_bound_inputs();
        bi.seed = mix_seed(seed, 7);
        row.bound = mixture_bound(trained.model, S, G, partition, table, bi, world);
    }
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

namespace detail {

inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& axis, double value) {
    if (axis == "gap.mean_shift_norm") cfg.gap_mean_shift_norm = value;
    else if (axis == "K") cfg.k = static_cast<int>(value);
    else if (axis == "g") cfg.g = static_cast<std::size_t>(value);
    else if (axis == "lambda_disc") cfg.lambda1 = value;
    else if (axis == "lambda_rob") cfg.lambda2 = value;
    else if (axis == "gap_reduction") cfg.gap_reduction = value;
    else throw ConfigError("sweep: unknown axis '" + axis + "'");
}

}  // namespace detail

inline std::vector<double> sweep_grid(const ExperimentConfig& cfg) {
    std::vector<double> grid;
    for (double v = cfg.sweep_start; v <= cfg.sweep_stop + 1e-12; v += cfg.sweep_step)
        grid.push_back(v);
    return grid;
}

/// One row per (grid point, trial seed); rows ordered by (grid point,
/// seed) regardless of execution order. `jobs` bounds worker threads.
inline std::vector<ReportRow> run_sweep(const ExperimentConfig& cfg, std::size_t jobs = 1) {
    if (cfg.sweep_axis.empty()) throw ConfigError("sweep: no sweep.axis configured");
    const std::vector<double> grid = sweep_grid(cfg);
    if (grid.empty()) throw ConfigError("sweep: empty grid");

    struct Task {
        double value;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (double v : grid)
        for (std::size_t t = 0; t < cfg.trials; ++t) tasks.push_back({v, cfg.seed + t});

    std::vector<ReportRow> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= tasks.size()) break;
            ExperimentConfig point = cfg;
            detail::apply_sweep_value(point, cfg.sweep_axis, tasks[idx].value);
            ReportRow row = run_experiment(point, tasks[idx].seed).row;
            row.sweep_axis = cfg.sweep_axis;
            row.sweep_value = tasks[idx].value;
            rows[idx] = std::move(row);
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    return rows;
}

}  // namespace synthbound
