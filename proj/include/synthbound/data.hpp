#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>

#include "synthbound/common.hpp"

namespace synthbound {

enum class Source { Real, Synthetic };

struct Sample {
    Vector features;
    int label = 0;
    Source source = Source::Real;
};

struct DataSet {
    std::vector<Sample> samples;
    int dim = 0;
    int num_classes = 0;

    std::size_t size() const { return samples.size(); }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
        for (const Sample& s : samples) counts[static_cast<std::size_t>(s.label)]++;
        return counts;
    }
};

/// Generator error knobs: mean shift tau added to every synthetic class
/// mean, variance scale kappa on the synthetic covariance, and label noise.
struct GapSpec {
    Vector mean_shift;           // tau, dimension d
    double variance_scale = 1.0; // kappa > 0
    double label_flip_prob = 0.0;

    static GapSpec zero(int dim) { return GapSpec{Vector(static_cast<std::size_t>(dim), 0.0), 1.0, 0.0}; }
};

/// Class-conditional isotropic Gaussian world. Real draws come from the
/// class means directly; synthetic draws apply the gap.
struct GaussianWorld {
    std::vector<Vector> class_means;
    double class_cov_scale = 1.0; // sigma^2
    Vector class_priors;
    GapSpec gap;
    std::uint64_t seed = 0;

    int dim() const { return static_cast<int>(class_means.empty() ? 0 : class_means[0].size()); }
    int num_classes() const { return static_cast<int>(class_means.size()); }
};

namespace detail {

/// C mutually equidistant points in d >= C-1 dimensions: vertices of a
/// regular simplex scaled so pairwise distances equal `separation`. For
/// d < C-1 the construction falls back to scaled coordinate placement,
/// which keeps means distinct but not equidistant.
inline std::vector<Vector> simplex_means(int d, int C, double separation) {
    std::vector<Vector> means(static_cast<std::size_t>(C), Vector(static_cast<std::size_t>(d), 0.0));
    if (d >= C - 1) {
        // Regular simplex in the first C-1 coordinates, centered at origin.
        // Start from e_1..e_C in R^C projected down: the standard basis has
        // pairwise distance sqrt(2); use the classic embedding.
        for (int c = 0; c < C; ++c) {
            for (int j = 0; j < C - 1; ++j) {
                double v;
                if (c < C - 1)
                    v = (c == j) ? 1.0 : 0.0;
                else
                    v = (1.0 - std::sqrt(static_cast<double>(C))) / (C - 1.0);
                means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] = v;
            }
        }
        // Center and rescale to the requested separation.
        Vector centroid(static_cast<std::size_t>(d), 0.0);
        for (const Vector& m : means)
            for (std::size_t j = 0; j < centroid.size(); ++j) centroid[j] += m[j] / C;
        for (Vector& m : means)
            for (std::size_t j = 0; j < m.size(); ++j) m[j] -= centroid[j];
        const double current = euclidean_distance(means[0], means[1]);
        for (Vector& m : means)
            for (double& v : m) v *= separation / current;
    } else {
        for (int c = 0; c < C; ++c)
            means[static_cast<std::size_t>(c)][0] = separation * c;
    }
    return means;
}

}  // namespace detail

inline GaussianWorld world_new(int d, int C, double mean_separation, double cov_scale,
                               GapSpec gap, std::uint64_t seed) {
    if (d < 1) throw ParameterError("world_new: dimension must be >= 1");
    if (C < 2) throw ParameterError("world_new: need at least 2 classes");
    if (mean_separation <= 0.0) throw ParameterError("world_new: mean_separation must be positive");
    if (cov_scale <= 0.0) throw ParameterError("world_new: cov_scale must be positive");
    if (gap.mean_shift.size() != static_cast<std::size_t>(d))
        throw ShapeError("world_new: gap mean shift dimension mismatch");
    if (gap.variance_scale <= 0.0) throw ParameterError("world_new: variance_scale must be positive");
    if (gap.label_flip_prob < 0.0 || gap.label_flip_prob >= 1.0)
        throw ParameterError("world_new: label_flip_prob must be in [0,1)");

    GaussianWorld w;
    w.class_means = detail::simplex_means(d, C, mean_separation);
    w.class_cov_scale = cov_scale;
    w.class_priors = Vector(static_cast<std::size_t>(C), 1.0 / C);
    w.gap = std::move(gap);
    w.seed = seed;
    return w;
}

/// Scales the gap towards zero: factor 0 removes it, factor 1 keeps it.
inline GaussianWorld apply_gap_reduction(const GaussianWorld& world, double factor) {
    if (factor < 0.0 || factor > 1.0) throw ParameterError("apply_gap_reduction: factor must be in [0,1]");
    GaussianWorld w = world;
    for (double& v : w.gap.mean_shift) v *= factor;
    w.gap.variance_scale = 1.0 + factor * (world.gap.variance_scale - 1.0);
    w.gap.label_flip_prob = factor * world.gap.label_flip_prob;
    return w;
}

namespace detail {

inline int draw_class(const Vector& priors, double u) {
    double acc = 0.0;
    for (std::size_t c = 0; c < priors.size(); ++c) {
        acc += priors[c];
        if (u < acc) return static_cast<int>(c);
    }
    return static_cast<int>(priors.size()) - 1;
}

/// Shared sampler for the real and synthetic distributions. Labels come
/// from one stream; features come from per-class substreams so the same
/// seed yields the same per-class noise regardless of draw order.
inline DataSet sample_from(const GaussianWorld& world, std::size_t count, std::uint64_t seed,
                           bool synthetic) {
    const int d = world.dim();
    const int C = world.num_classes();
    std::mt19937_64 label_rng = make_rng(seed, 0);
    std::mt19937_64 flip_rng = make_rng(seed, 1);
    std::vector<std::mt19937_64> class_rng;
    class_rng.reserve(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) class_rng.push_back(make_rng(seed, 2 + static_cast<std::uint64_t>(c)));

    const double stddev = std::sqrt(world.class_cov_scale *
                                    (synthetic ? world.gap.variance_scale : 1.0));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    DataSet out;
    out.dim = d;
    out.num_classes = C;
    out.samples.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const int cls = draw_class(world.class_priors, unit(label_rng));
        Sample s;
        s.features.resize(static_cast<std::size_t>(d));
        auto& rng = class_rng[static_cast<std::size_t>(cls)];
        for (int k = 0; k < d; ++k) {
            double v = world.class_means[static_cast<std::size_t>(cls)][static_cast<std::size_t>(k)] +
                       stddev * gauss(rng);
            if (synthetic) v += world.gap.mean_shift[static_cast<std::size_t>(k)];
            s.features[static_cast<std::size_t>(k)] = v;
        }
        s.label = cls;
        s.source = synthetic ? Source::Synthetic : Source::Real;
        if (synthetic && world.gap.label_flip_prob > 0.0 &&
            unit(flip_rng) < world.gap.label_flip_prob) {
            // Uniform over the other classes.
            int offset = 1 + static_cast<int>(unit(flip_rng) * (C - 1));
            if (offset > C - 1) offset = C - 1;
            s.label = (cls + offset) % C;
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace detail

inline DataSet sample_real(const GaussianWorld& world, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ParameterError("sample_real: need at least one sample");
    return detail::sample_from(world, n, seed, false);
}

inline DataSet sample_synthetic(const GaussianWorld& world, std::size_t g, std::uint64_t seed) {
    if (g == 0) throw ParameterError("sample_synthetic: need at least one sample");
    return detail::sample_from(world, g, seed, true);
}

/// Concatenation, real set first; source tags and order preserved.
inline DataSet merge(const DataSet& real, const DataSet& synth) {
    if (real.dim != synth.dim) throw ShapeError("merge: dimension mismatch");
    if (real.num_classes != synth.num_classes) throw ShapeError("merge: class count mismatch");
    DataSet out;
    out.dim = real.dim;
    out.num_classes = real.num_classes;
    out.samples.reserve(real.size() + synth.size());
    out.samples.insert(out.samples.end(), real.samples.begin(), real.samples.end());
    out.samples.insert(out.samples.end(), synth.samples.begin(), synth.samples.end());
    return out;
}

}  // namespace synthbound
