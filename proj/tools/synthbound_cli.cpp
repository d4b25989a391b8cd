#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>

#include "synthbound/synthbound.hpp"

namespace fs = std::filesystem;
using namespace synthbound;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string out;
    std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config file")->required();
    cmd->add_option("--set", opts.overrides, "key=value config override (repeatable)");
    cmd->add_option("--seed", opts.seed, "master seed (overrides the config)");
    cmd->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", opts.out, "output directory (overrides the config)");
    cmd->add_option("--format", opts.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));
}

ExperimentConfig load_config(const CommonOpts& opts) {
    std::ifstream in(opts.config_path);
    if (!in) throw ConfigError("config: cannot open '" + opts.config_path + "'");
    ExperimentConfig cfg = parse_config(in);
    // Validation happens once at the end so interdependent keys (the
    // sweep block) can arrive in any order.
    for (const std::string& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: --set expects key=value, got '" + kv + "'");
        detail::apply_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (cfg.validate_error()) throw ConfigError(*cfg.validate_error());
    if (opts.seed) cfg.seed = *opts.seed;
    if (!opts.out.empty()) cfg.out = opts.out;
    return cfg;
}

void write_rows(const fs::path& dir, const std::string& format,
                const std::vector<ReportRow>& rows, const nlohmann::json& extra) {
    fs::create_directories(dir);
    if (format == "json") {
        nlohmann::json j;
        j["rows"] = nlohmann::json::array();
        for (const ReportRow& r : rows) j["rows"].push_back(report_row_json(r));
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
        std::ofstream out(dir / "report.json");
        out << j.dump(2) << '\n';
    } else {
        std::ofstream out(dir / "report.csv");
        out << report_csv_header() << '\n';
        for (const ReportRow& r : rows) write_report_csv_row(out, r);
    }
}

// Per-sweep-point mean and sample standard deviation of the headline
// metrics, appended after the raw rows.
std::vector<ReportRow> sweep_aggregates(const std::vector<ReportRow>& rows) {
    std::vector<ReportRow> aggs;
    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].sweep_value == rows[i].sweep_value) j++;
        const auto k = static_cast<double>(j - i);
        auto stat = [&](auto field) {
            double mean = 0.0, var = 0.0;
            for (std::size_t t = i; t < j; ++t) mean += field(rows[t]) / k;
            for (std::size_t t = i; t < j; ++t) {
                const double d = field(rows[t]) - mean;
                var += d * d;
            }
            const double sd = k > 1 ? std::sqrt(var / (k - 1.0)) : 0.0;
            return std::pair{mean, sd};
        };
        const auto acc = stat([](const ReportRow& r) { return r.test_accuracy; });
        const auto disc = stat([](const ReportRow& r) { return r.final_discrepancy; });
        const auto rob = stat([](const ReportRow& r) { return r.final_robustness; });
        const auto total = stat([](const ReportRow& r) { return r.bound.total; });

        ReportRow mean, sd;
        mean.fingerprint = "mean";
        sd.fingerprint = "std";
        for (ReportRow* a : {&mean, &sd}) {
            a->sweep_axis = rows[i].sweep_axis;
            a->sweep_value = rows[i].sweep_value;
        }
        mean.test_accuracy = acc.first;
        mean.final_discrepancy = disc.first;
        mean.final_robustness = rob.first;
        mean.bound.total = total.first;
        sd.test_accuracy = acc.second;
        sd.final_discrepancy = disc.second;
        sd.final_robustness = rob.second;
        sd.bound.total = total.second;
        aggs.push_back(mean);
        aggs.push_back(sd);
        i = j;
    }
    return aggs;
}

int cmd_run(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_config(opts);
    const fs::path dir = cfg.out;
    fs::create_directories(dir);

    std::vector<ReportRow> rows;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const std::uint64_t seed = cfg.seed + t;
        ExperimentResult res = run_experiment(cfg, seed);
        std::ofstream trace(dir / ("trace_" + std::to_string(seed) + ".csv"));
        write_trace_csv(trace, res.trace);
        rows.push_back(std::move(res.row));
        std::cout << "seed " << seed << ": test_acc=" << res.row.test_accuracy
                  << " bound=" << res.row.bound.total
                  << " pop_loss=" << res.row.bound.population_loss_estimate << '\n';
    }
    write_rows(dir, opts.format, rows, {});
    return 0;
}

int cmd_sweep(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_config(opts);
    std::vector<ReportRow> rows = run_sweep(cfg, opts.jobs);
    const std::vector<ReportRow> aggs = sweep_aggregates(rows);

    nlohmann::json extra;
    extra["aggregates"] = nlohmann::json::array();
    for (std::size_t i = 0; i + 1 < aggs.size(); i += 2)
        extra["aggregates"].push_back(
            {{"axis", aggs[i].sweep_axis},
             {"axis_value", aggs[i].sweep_value},
             {"test_acc_mean", aggs[i].test_accuracy},
             {"test_acc_std", aggs[i + 1].test_accuracy},
             {"final_disc_mean", aggs[i].final_discrepancy},
             {"final_disc_std", aggs[i + 1].final_discrepancy},
             {"final_rob_mean", aggs[i].final_robustness},
             {"final_rob_std", aggs[i + 1].final_robustness},
             {"bound_total_mean", aggs[i].bound.total},
             {"bound_total_std", aggs[i + 1].bound.total}});
    for (const ReportRow& a : aggs) {
        std::cout << cfg.sweep_axis << '=' << a.sweep_value << ' ' << a.fingerprint
                  << ": test_acc=" << a.test_accuracy << " bound=" << a.bound.total << '\n';
        rows.push_back(a);
    }
    write_rows(cfg.out, opts.format, rows, extra);
    return 0;
}

int cmd_verify(const CommonOpts& opts) {
    const ExperimentConfig cfg = load_config(opts);
    TrialSpec spec;
    spec.world = cfg.make_world();
    spec.n = cfg.n;
    spec.g = cfg.g;
    spec.clusters = cfg.k;
    spec.kmeans_iters = cfg.kmeans_iters;
    spec.train = cfg.make_train_config();
    spec.bound = cfg.make_bound_inputs();
    spec.population_mc_samples = cfg.population_mc_samples;

    const VerifyResult res = verify_bound(spec, cfg.trials, cfg.seed);
    const std::size_t effective = res.trials - res.skipped;
    std::cout << "trials=" << res.trials << " skipped=" << res.skipped
              << " violations=" << res.violations << " rate=" << res.rate << '\n';

    const fs::path dir = cfg.out;
    fs::create_directories(dir);
    nlohmann::json j;
    j["trials"] = res.trials;
    j["skipped"] = res.skipped;
    j["violations"] = res.violations;
    j["rate"] = res.rate;
    j["delta"] = cfg.delta;
    j["slacks"] = res.slacks;
    std::ofstream out(dir / "verify.json");
    out << j.dump(2) << '\n';

    // Allow two binomial standard errors above delta before failing, so a
    // statistically consistent campaign is not flagged by noise.
    const double allowance =
        effective > 0 ? 2.0 * std::sqrt(cfg.delta * (1.0 - cfg.delta) / static_cast<double>(effective))
                      : 0.0;
    return res.rate > cfg.delta + allowance ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"train softmax classifiers on real/synthetic mixtures and check "
                 "generalization bounds on Gaussian worlds"};
    app.require_subcommand(1);

    CommonOpts run_opts, sweep_opts, verify_opts;
    CLI::App* run = app.add_subcommand("run", "train and evaluate one configuration");
    add_common(run, run_opts);
    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    add_common(sweep, sweep_opts);
    CLI::App* verify = app.add_subcommand("verify-bound", "Monte-Carlo bound check campaign");
    add_common(verify, verify_opts);

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(run_opts);
        if (sweep->parsed()) return cmd_sweep(sweep_opts);
        return cmd_verify(verify_opts);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
