#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "synthbound/bound.hpp"
#include "synthbound/data.hpp"
#include "synthbound/train.hpp"

namespace synthbound {

/// Malformed experiment config; message names the offending field/line.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One experiment definition, parsed from a flat key = value text file.
/// Unknown keys are rejected so typos cannot silently fall back to
/// defaults.
struct ExperimentConfig {
    // world
    int d = 2;
    int classes = 3;
    double mean_separation = 4.0;
    double cov_scale = 1.0;
    double gap_mean_shift_norm = 0.0;
    double gap_variance_scale = 1.0;
    double gap_label_flip_prob = 0.0;
    double gap_reduction = 1.0;  // factor handed to apply_gap_reduction

    // dataset / partition sizes
    std::size_t n = 48;
    std::size_t g = 300;
    int k = 6;
    std::size_t kmeans_iters = 50;

    // training
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 0.5;
    double momentum = 0.9;
    double lambda = 4.0;
    double lambda1 = 0.1;
    double lambda2 = 1.0;
    std::string mode = "full";  // full | lightweight | synthetic_only
    std::size_t trace_per_epoch = 2;
    std::size_t eval_samples = 2000;
    int hidden_units = 0;

    // bound evaluation
    double delta = 0.1;
    std::size_t mc_samples = 2000;
    std::size_t population_mc_samples = 20000;

    // campaign
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    std::string sweep_axis;  // empty = no sweep
    double sweep_start = 0.0;
    double sweep_stop = 0.0;
    double sweep_step = 0.0;
    std::string out = ".";

    GaussianWorld make_world() const {
        GapSpec gap = GapSpec::zero(d);
        gap.mean_shift[0] = gap_mean_shift_norm;
        gap.variance_scale = gap_variance_scale;
        gap.label_flip_prob = gap_label_flip_prob;
        GaussianWorld w = world_new(d, classes, mean_separation, cov_scale, gap, seed);
        return apply_gap_reduction(w, gap_reduction);
    }

    TrainMode train_mode() const {
        if (mode == "full") return TrainMode::Full;
        if (mode == "lightweight") return TrainMode::Lightweight;
        if (mode == "synthetic_only") return TrainMode::SyntheticOnly;
        throw ConfigError("config: unknown mode '" + mode + "'");
    }

    TrainConfig make_train_config() const {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        tc.momentum = momentum;
        tc.loss.lambda_real = lambda;
        tc.loss.lambda_disc = lambda1;
        tc.loss.lambda_rob = lambda2;
        tc.mode = train_mode();
        tc.trace_per_epoch = trace_per_epoch;
        tc.seed = seed;
        tc.clusters = k;
        tc.kmeans_iters = kmeans_iters;
        tc.eval_samples = eval_samples;
        return tc;
    }

    BoundInputs make_bound_inputs() const {
        BoundInputs bi;
        bi.delta = delta;
        bi.mc_samples = mc_samples;
        bi.seed = seed;
        return bi;
    }

    /// Canonical serialization; also the fingerprint input.
    std::string canonical() const {
        std::ostringstream os;
        os.precision(17);
        os << "d = " << d << "\nclasses = " << classes
           << "\nmean_separation = " << mean_separation << "\ncov_scale = " << cov_scale
           << "\ngap.mean_shift_norm = " << gap_mean_shift_norm
           << "\ngap.variance_scale = " << gap_variance_scale
           << "\ngap.label_flip_prob = " << gap_label_flip_prob
           << "\ngap_reduction = " << gap_reduction << "\nn = " << n << "\ng = " << g
           << "\nk = " << k << "\nkmeans_iters = " << kmeans_iters << "\nepochs = " << epochs
           << "\nbatch_size = " << batch_size << "\nlearning_rate = " << learning_rate
           << "\nmomentum = " << momentum << "\nlambda = " << lambda << "\nlambda1 = " << lambda1
           << "\nlambda2 = " << lambda2 << "\nmode = " << mode
           << "\ntrace_per_epoch = " << trace_per_epoch << "\neval_samples = " << eval_samples
           << "\nhidden_units = " << hidden_units << "\ndelta = " << delta
           << "\nmc_samples = " << mc_samples
           << "\npopulation_mc_samples = " << population_mc_samples << "\ntrials = " << trials
           << "\nseed = " << seed << "\n";
        if (!sweep_axis.empty())
            os << "sweep.axis = " << sweep_axis << "\nsweep.start = " << sweep_start
               << "\nsweep.stop = " << sweep_stop << "\nsweep.step = " << sweep_step << "\n";
        return os.str();
    }

    std::optional<std::string> validate_error() const {
        if (d < 1) return "config: d must be >= 1";
        if (classes < 2) return "config: classes must be >= 2";
        if (mean_separation <= 0.0) return "config: mean_separation must be positive";
        if (cov_scale <= 0.0) return "config: cov_scale must be positive";
        if (gap_variance_scale <= 0.0) return "config: gap.variance_scale must be positive";
        if (gap_label_flip_prob < 0.0 || gap_label_flip_prob >= 1.0)
            return "config: gap.label_flip_prob must be in [0,1)";
        if (gap_reduction < 0.0 || gap_reduction > 1.0)
            return "config: gap_reduction must be in [0,1]";
        if (n == 0) return "config: n must be >= 1";
        if (g == 0) return "config: g must be >= 1";
        if (k < 1) return "config: k must be >= 1";
        if (epochs == 0) return "config: epochs must be >= 1";
        if (batch_size == 0) return "config: batch_size must be >= 1";
        if (learning_rate <= 0.0) return "config: learning_rate must be positive";
        if (delta <= 0.0 || delta >= 1.0) return "config: delta must be in (0,1)";
        if (trials == 0) return "config: trials must be >= 1";
        if (mode != "full" && mode != "lightweight" && mode != "synthetic_only")
            return "config: unknown mode '" + mode + "'";
        if (!sweep_axis.empty()) {
            static const char* axes[] = {"gap.mean_shift_norm", "K",          "g",
                                         "lambda_disc",         "lambda_rob", "gap_reduction"};
            bool known = false;
            for (const char* a : axes) known = known || sweep_axis == a;
            if (!known) return "config: unknown sweep axis '" + sweep_axis + "'";
            if (sweep_step <= 0.0) return "config: sweep.step must be positive";
            if (sweep_stop < sweep_start) return "config: sweep bounds out of order";
        }
        return std::nullopt;
    }

    std::string fingerprint() const {
        // FNV-1a over the canonical text.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : canonical()) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T out;
    is >> out;
    if (is.fail() || !(is >> std::ws).eof())
        throw ConfigError("config: field '" + key + "' has invalid value '" + value + "'");
    return out;
}

inline void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "d") cfg.d = parse_number<int>(key, value);
    else if (key == "classes") cfg.classes = parse_number<int>(key, value);
    else if (key == "mean_separation") cfg.mean_separation = parse_number<double>(key, value);
    else if (key == "cov_scale") cfg.cov_scale = parse_number<double>(key, value);
    else if (key == "gap.mean_shift_norm") cfg.gap_mean_shift_norm = parse_number<double>(key, value);
    else if (key == "gap.variance_scale") cfg.gap_variance_scale = parse_number<double>(key, value);
    else if (key == "gap.label_flip_prob") cfg.gap_label_flip_prob = parse_number<double>(key, value);
    else if (key == "gap_reduction") cfg.gap_reduction = parse_number<double>(key, value);
    else if (key == "n") cfg.n = parse_number<std::size_t>(key, value);
    else if (key == "g") cfg.g = parse_number<std::size_t>(key, value);
    else if (key == "k") cfg.k = parse_number<int>(key, value);
    else if (key == "kmeans_iters") cfg.kmeans_iters = parse_number<std::size_t>(key, value);
    else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "learning_rate") cfg.learning_rate = parse_number<double>(key, value);
    else if (key == "momentum") cfg.momentum = parse_number<double>(key, value);
    else if (key == "lambda") cfg.lambda = parse_number<double>(key, value);
    else if (key == "lambda1") cfg.lambda1 = parse_number<double>(key, value);
    else if (key == "lambda2") cfg.lambda2 = parse_number<double>(key, value);
    else if (key == "mode") cfg.mode = value;
    else if (key == "trace_per_epoch") cfg.trace_per_epoch = parse_number<std::size_t>(key, value);
    else if (key == "eval_samples") cfg.eval_samples = parse_number<std::size_t>(key, value);
    else if (key == "hidden_units") cfg.hidden_units = parse_number<int>(key, value);
    else if (key == "delta") cfg.delta = parse_number<double>(key, value);
    else if (key == "mc_samples") cfg.mc_samples = parse_number<std::size_t>(key, value);
    else if (key == "population_mc_samples")
        cfg.population_mc_samples = parse_number<std::size_t>(key, value);
    else if (key == "trials") cfg.trials = parse_number<std::size_t>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "sweep.axis") cfg.sweep_axis = value;
    else if (key == "sweep.start") cfg.sweep_start = parse_number<double>(key, value);
    else if (key == "sweep.stop") cfg.sweep_stop = parse_number<double>(key, value);
    else if (key == "sweep.step") cfg.sweep_step = parse_number<double>(key, value);
    else if (key == "out") cfg.out = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Fields without defaults; a config missing one of these is rejected.
inline const std::vector<std::string>& required_config_fields() {
    static const std::vector<std::string> fields = {"d", "classes", "n", "g", "k"};
    return fields;
}

inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::map<std::string, bool> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        try {
            detail::apply_key(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
        }
        seen[key] = true;
    }
    for (const std::string& field : required_config_fields())
        if (!seen.count(field))
            throw ConfigError("config: missing required field '" + field + "'");
    if (cfg.validate_error()) throw ConfigError(*cfg.validate_error());
    return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

/// key=value override, same key space as the config file.
inline void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    detail::apply_key(cfg, key, value);
    if (cfg.validate_error()) throw ConfigError(*cfg.validate_error());
}

}  // namespace synthbound
