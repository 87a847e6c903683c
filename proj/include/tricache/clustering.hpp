#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tricache/core.hpp"

namespace tricache {

inline constexpr int kNoise = -1;

struct DbscanParams {
    double eps = 0.0;          // cosine-distance radius
    std::size_t min_pts = 0;   // neighbors within eps, the point itself included

    void validate() const;
    bool operator==(const DbscanParams&) const = default;
};

struct ClusterResult {
    std::vector<int> labels;   // cluster id or kNoise
    std::size_t n_clusters = 0;
    double outlier_rate = 0.0;
};

// 1 - <a, b>; inputs are expected to be unit vectors.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Symmetric n x n cosine-distance matrix over unit vectors.
class DistanceMatrix {
public:
    explicit DistanceMatrix(std::span<const Embedding> points);

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }

private:
    std::size_t n_;
    std::vector<double> d_;
};

// Classic DBSCAN. Points are visited in index order and clusters are
// expanded breadth-first, so a border point joins the first cluster that
// reaches it and cluster ids follow the index of their first core point.
ClusterResult dbscan(std::span<const Embedding> points, const DbscanParams& params);

// DBSCAN over the sub-population `subset` (indices into `dist`), labels
// returned in subset order.
ClusterResult dbscan(const DistanceMatrix& dist, std::span<const std::size_t> subset,
                     const DbscanParams& params);

// Hubert-Arabie adjusted Rand index. Label values are arbitrary ints
// (kNoise is just another label). Two identical trivial partitions (all
// singletons, or one block) have a zero denominator and score 1.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

struct BootstrapConfig {
    double rate = 0.8;
    std::size_t rounds = 10;
    std::uint64_t seed = 0;
};

struct ValidityRules {
    double max_outlier_rate = 0.5;
    std::size_t min_clusters = 1;
    std::size_t max_clusters = 10;
    // A candidate needs at least factor * min_pts samples.
    std::size_t min_samples_factor = 2;
};

struct CandidateScore {
    DbscanParams params;
    double outlier_rate = 0.0;
    std::size_t n_clusters = 0;
    std::optional<double> mean_ari;  // only for valid candidates
    bool valid = false;
};

struct ParamSearchReport {
    std::vector<CandidateScore> candidates;
    std::optional<DbscanParams> chosen;
    bool fallback_used = false;
};

// Scores every grid candidate on the full set (validity) and, when valid,
// by mean ARI between subsample clusterings and the full-run labels
// restricted to the subsample. Highest mean ARI wins; ties go to the lower
// eps, then the lower min_pts. All candidates see the same subsamples.
ParamSearchReport select_params(std::span<const Embedding> points, std::span<const DbscanParams> grid,
                                const BootstrapConfig& bootstrap, const ValidityRules& rules = {});

// eps at the {0.1, ..., 0.9} quantiles of (a sample of) pairwise cosine
// distances, crossed with min_pts in {3, 5, 10}.
std::vector<DbscanParams> default_grid(std::span<const Embedding> points, std::uint64_t seed);

struct PrototypeMeta {
    double eps = 0.0;
    std::size_t min_pts = 0;
    double stability = 0.0;  // mean ARI of the chosen setting
    bool fallback = false;

    bool operator==(const PrototypeMeta&) const = default;
};

struct PrototypeEntry {
    Embedding vector;
    std::size_t cluster_size = 0;
    PrototypeMeta meta;

    bool operator==(const PrototypeEntry&) const = default;
};

// One medoid per non-noise cluster, in cluster-id order. The medoid
// maximizes summed cosine similarity to its cluster (ties: lowest index).
// With no clusters, returns the single point nearest the mean of all
// points, flagged as a fallback.
std::vector<PrototypeEntry> extract_prototypes(std::span<const Embedding> points, const ClusterResult& clusters);

// The sample with maximal cosine similarity to the normalized mean.
PrototypeEntry kmeans_k1_prototype(std::span<const Embedding> points);

}  // namespace tricache
