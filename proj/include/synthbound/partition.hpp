#pragma once

#include <algorithm>
#include <limits>
#include <utility>

#include "synthbound/common.hpp"
#include "synthbound/data.hpp"

namespace synthbound {

/// K nearest-centroid regions. `counts` track per-centroid assignment
/// totals for the streaming running-mean update.
struct Partition {
    std::vector<Vector> centroids;
    std::vector<std::size_t> counts;

    int k() const { return static_cast<int>(centroids.size()); }
    int dim() const { return centroids.empty() ? 0 : static_cast<int>(centroids[0].size()); }
};

/// Per-iteration Lloyd objective values (sum of squared distances to the
/// assigned centroid), recorded after each centroid update.
struct KMeansStats {
    std::vector<double> objective_history;
    std::size_t iterations = 0;
};

inline int assign(const Partition& p, const Vector& x) {
    if (x.size() != static_cast<std::size_t>(p.dim()))
        throw ShapeError("assign: point dimension does not match partition");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.k(); ++i) {
        const double d = squared_distance(p.centroids[static_cast<std::size_t>(i)], x);
        if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = i;
        }
    }
    return best;
}

namespace detail {

inline std::vector<Vector> kmeanspp_init(const std::vector<Vector>& points, int K,
                                         std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    std::vector<Vector> centroids;
    centroids.reserve(static_cast<std::size_t>(K));
    centroids.push_back(points[pick(rng)]);
    std::vector<double> dist2(points.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (centroids.size() < static_cast<std::size_t>(K)) {
        double total = 0.0;
        for (std::size_t j = 0; j < points.size(); ++j) {
            double d = std::numeric_limits<double>::infinity();
            for (const Vector& c : centroids) d = std::min(d, squared_distance(points[j], c));
            dist2[j] = d;
            total += d;
        }
        std::size_t chosen;
        if (total <= 0.0) {
            chosen = pick(rng);
        } else {
            const double target = unit(rng) * total;
            double acc = 0.0;
            chosen = points.size() - 1;
            for (std::size_t j = 0; j < points.size(); ++j) {
                acc += dist2[j];
                if (target < acc) {
                    chosen = j;
                    break;
                }
            }
        }
        centroids.push_back(points[chosen]);
    }
    return centroids;
}

}  // namespace detail

/// Full-batch Lloyd with k-means++ seeding. Empty clusters are re-seeded
/// to the point farthest from its assigned centroid.
inline Partition kmeans_fit(const std::vector<Vector>& points, int K, std::size_t max_iters,
                            std::uint64_t seed, KMeansStats* stats = nullptr) {
    if (K < 1) throw ParameterError("kmeans_fit: K must be >= 1");
    if (points.size() < static_cast<std::size_t>(K))
        throw ParameterError("kmeans_fit: fewer points than clusters");

    std::mt19937_64 rng = make_rng(seed, 0);
    Partition p;
    p.centroids = detail::kmeanspp_init(points, K, rng);
    p.counts.assign(static_cast<std::size_t>(K), 0);

    std::vector<int> labels(points.size(), -1);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t j = 0; j < points.size(); ++j) {
            const int a = assign(p, points[j]);
            if (a != labels[j]) {
                labels[j] = a;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        std::vector<Vector> sums(static_cast<std::size_t>(K),
                                 Vector(points[0].size(), 0.0));
        std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
        for (std::size_t j = 0; j < points.size(); ++j) {
            const auto c = static_cast<std::size_t>(labels[j]);
            counts[c]++;
            for (std::size_t t = 0; t < points[j].size(); ++t) sums[c][t] += points[j][t];
        }
        for (std::size_t c = 0; c < static_cast<std::size_t>(K); ++c) {
            if (counts[c] == 0) {
                // Re-seed to the farthest point from its centroid.
                double worst = -1.0;
                std::size_t worst_j = 0;
                for (std::size_t j = 0; j < points.size(); ++j) {
                    const double d = squared_distance(
                        points[j], p.centroids[static_cast<std::size_t>(labels[j])]);
                    if (d > worst) {
                        worst = d;
                        worst_j = j;
                    }
                }
                p.centroids[c] = points[worst_j];
                continue;
            }
            for (std::size_t t = 0; t < sums[c].size(); ++t)
                p.centroids[c][t] = sums[c][t] / static_cast<double>(counts[c]);
        }
        if (stats) {
            double obj = 0.0;
            for (std::size_t j = 0; j < points.size(); ++j)
                obj += squared_distance(points[j], p.centroids[static_cast<std::size_t>(assign(p, points[j]))]);
            stats->objective_history.push_back(obj);
            stats->iterations = iter + 1;
        }
    }

    // Final assignment counts.
    std::fill(p.counts.begin(), p.counts.end(), std::size_t{0});
    for (const Vector& x : points) p.counts[static_cast<std::size_t>(assign(p, x))]++;
    return p;
}

/// Streaming running-mean update: each point bumps its centroid's count
/// and moves the centroid by eta = 1/count towards the point.
inline Partition streaming_update(Partition p, const std::vector<Vector>& batch) {
    for (const Vector& x : batch) {
        if (x.size() != static_cast<std::size_t>(p.dim()))
            throw ShapeError("streaming_update: point dimension mismatch");
        const auto i = static_cast<std::size_t>(assign(p, x));
        p.counts[i]++;
        const double eta = 1.0 / static_cast<double>(p.counts[i]);
        for (std::size_t t = 0; t < x.size(); ++t)
            p.centroids[i][t] = (1.0 - eta) * p.centroids[i][t] + eta * x[t];
    }
    return p;
}

/// Region membership bookkeeping. `g` counts only synthetic samples in
/// valid regions (those containing at least one real sample); samples in
/// other regions are listed in `orphan_synth` and counted by g_total.
/// synth_members is populated for every region so that the synthetic-only
/// loss can use regions outside T_S.
struct RegionTable {
    std::vector<int> valid_regions;                        // T_S, ascending
    std::vector<std::vector<std::size_t>> real_members;    // per region, indices into S
    std::vector<std::vector<std::size_t>> synth_members;   // per region, indices into G
    std::vector<std::size_t> orphan_synth;                 // synthetic samples outside T_S
    std::size_t n = 0;        // total real samples
    std::size_t g = 0;        // synthetic samples inside valid regions
    std::size_t g_total = 0;  // all synthetic samples

    std::size_t n_i(int region) const { return real_members[static_cast<std::size_t>(region)].size(); }
    std::size_t g_i(int region) const { return synth_members[static_cast<std::size_t>(region)].size(); }
};

inline RegionTable region_table(const Partition& p, const DataSet& S, const DataSet& G) {
    if (S.dim != p.dim() || G.dim != p.dim())
        throw ShapeError("region_table: dataset dimension does not match partition");
    RegionTable t;
    const auto K = static_cast<std::size_t>(p.k());
    t.real_members.resize(K);
    t.synth_members.resize(K);
    for (std::size_t j = 0; j < S.size(); ++j)
        t.real_members[static_cast<std::size_t>(assign(p, S.samples[j].features))].push_back(j);
    for (std::size_t j = 0; j < G.size(); ++j)
        t.synth_members[static_cast<std::size_t>(assign(p, G.samples[j].features))].push_back(j);

    t.n = S.size();
    t.g_total = G.size();
    for (std::size_t i = 0; i < K; ++i) {
        if (!t.real_members[i].empty()) {
            t.valid_regions.push_back(static_cast<int>(i));
            t.g += t.synth_members[i].size();
        } else {
            t.orphan_synth.insert(t.orphan_synth.end(), t.synth_members[i].begin(),
                                  t.synth_members[i].end());
        }
    }
    return t;
}

/// Both sides of the within-cluster variation identity:
/// sum over ordered pairs i != j of ||x_i - x_j||^2, and 2n * sum ||x_i - xbar||^2.
inline std::pair<double, double> cluster_variation(const std::vector<Vector>& points) {
    if (points.empty()) throw ParameterError("cluster_variation: empty point set");
    const std::size_t n = points.size();
    double pairwise = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) pairwise += squared_distance(points[i], points[j]);

    Vector mean(points[0].size(), 0.0);
    for (const Vector& x : points)
        for (std::size_t t = 0; t < x.size(); ++t) mean[t] += x[t] / static_cast<double>(n);
    double spread = 0.0;
    for (const Vector& x : points) spread += squared_distance(x, mean);
    return {pairwise, 2.0 * static_cast<double>(n) * spread};
}

}  // namespace synthbound
