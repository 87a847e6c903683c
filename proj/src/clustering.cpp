#include "tricache/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

namespace tricache {

namespace {

constexpr int kUnvisited = -2;

double comb2(double n) { return n * (n - 1.0) / 2.0; }

ClusterResult finish(std::vector<int> labels, std::size_t n_clusters) {
    ClusterResult r;
    r.n_clusters = n_clusters;
    const auto noise = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
    r.outlier_rate = labels.empty() ? 0.0 : static_cast<double>(noise) / static_cast<double>(labels.size());
    r.labels = std::move(labels);
    return r;
}

}  // namespace

void DbscanParams::validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrorKind::InvalidInput, "dbscan eps must be > 0");
    if (min_pts < 2) throw Error(ErrorKind::InvalidInput, "dbscan min_pts must be >= 2");
}

double cosine_distance(std::span<const double> a, std::span<const double> b) { return 1.0 - dot(a, b); }

DistanceMatrix::DistanceMatrix(std::span<const Embedding> points) : n_(points.size()), d_(n_ * n_, 0.0) {
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) {
            const double v = cosine_distance(points[i], points[j]);
            d_[i * n_ + j] = v;
            d_[j * n_ + i] = v;
        }
    }
}

ClusterResult dbscan(const DistanceMatrix& dist, std::span<const std::size_t> subset, const DbscanParams& params) {
    params.validate();
    const std::size_t m = subset.size();
    std::vector<int> labels(m, kUnvisited);

    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < m; ++j) {
            if (dist(subset[i], subset[j]) <= params.eps) out.push_back(j);
        }
        return out;
    };

    int cluster = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] != kUnvisited) continue;
        auto seeds = neighbors(i);
        if (seeds.size() < params.min_pts) {
            labels[i] = kNoise;
            continue;
        }
        labels[i] = cluster;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const std::size_t q = seeds[k];
            if (labels[q] == kNoise) {
                labels[q] = cluster;  // border point, already known non-core
                continue;
            }
            if (labels[q] != kUnvisited) continue;
            labels[q] = cluster;
            auto more = neighbors(q);
            if (more.size() >= params.min_pts) seeds.insert(seeds.end(), more.begin(), more.end());
        }
        ++cluster;
    }
    return finish(std::move(labels), static_cast<std::size_t>(cluster));
}

ClusterResult dbscan(std::span<const Embedding> points, const DbscanParams& params) {
    params.validate();
    if (points.empty()) return {};
    DistanceMatrix dist(points);
    std::vector<std::size_t> all(points.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return dbscan(dist, all, params);
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::InvalidInput, "adjusted_rand_index: length mismatch (" + std::to_string(a.size()) +
                                                 " vs " + std::to_string(b.size()) + ")");
    }
    if (a.size() < 2) throw Error(ErrorKind::InvalidInput, "adjusted_rand_index: need at least 2 points");

    std::map<std::pair<int, int>, std::size_t> table;
    std::map<int, std::size_t> rows;
    std::map<int, std::size_t> cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++table[{a[i], b[i]}];
        ++rows[a[i]];
        ++cols[b[i]];
    }
    double index = 0.0;
    for (const auto& [key, n] : table) index += comb2(static_cast<double>(n));
    double sum_a = 0.0;
    for (const auto& [key, n] : rows) sum_a += comb2(static_cast<double>(n));
    double sum_b = 0.0;
    for (const auto& [key, n] : cols) sum_b += comb2(static_cast<double>(n));

    // (index - expected) / (max - expected) scaled through by 2 * total; every
    // term stays an integer (exact in double below 2^53), so the result is
    // a single rounding of the exact ratio.
    const double total = comb2(static_cast<double>(a.size()));
    const double num = 2.0 * (index * total - sum_a * sum_b);
    const double denom = (sum_a + sum_b) * total - 2.0 * sum_a * sum_b;
    if (denom == 0.0) return 1.0;
    return num / denom;
}

ParamSearchReport select_params(std::span<const Embedding> points, std::span<const DbscanParams> grid,
                                const BootstrapConfig& bootstrap, const ValidityRules& rules) {
    if (grid.empty()) throw Error(ErrorKind::InvalidInput, "select_params: empty parameter grid");
    if (!(bootstrap.rate > 0.0 && bootstrap.rate <= 1.0)) {
        throw Error(ErrorKind::InvalidInput, "select_params: bootstrap rate must be in (0, 1]");
    }
    if (bootstrap.rounds == 0) throw Error(ErrorKind::InvalidInput, "select_params: bootstrap rounds must be >= 1");
    for (const auto& p : grid) p.validate();

    const std::size_t n = points.size();
    ParamSearchReport report;
    report.fallback_used = true;
    if (n == 0) {
        for (const auto& p : grid) report.candidates.push_back({p, 0.0, 0, std::nullopt, false});
        return report;
    }

    const DistanceMatrix dist(points);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});

    const auto sub_n = static_cast<std::size_t>(std::ceil(bootstrap.rate * static_cast<double>(n)));
    std::vector<std::vector<std::size_t>> subsamples;
    {
        std::mt19937_64 rng(bootstrap.seed);
        for (std::size_t r = 0; r < bootstrap.rounds; ++r) {
            std::vector<std::size_t> idx = all;
            for (std::size_t i = 0; i < sub_n; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, n - 1);
                std::swap(idx[i], idx[pick(rng)]);
            }
            idx.resize(sub_n);
            std::sort(idx.begin(), idx.end());
            subsamples.push_back(std::move(idx));
        }
    }

    for (const auto& params : grid) {
        CandidateScore score;
        score.params = params;
        const ClusterResult full = dbscan(dist, all, params);
        score.outlier_rate = full.outlier_rate;
        score.n_clusters = full.n_clusters;
        score.valid = n >= rules.min_samples_factor * params.min_pts && full.outlier_rate <= rules.max_outlier_rate &&
                      full.n_clusters >= rules.min_clusters && full.n_clusters <= rules.max_clusters && sub_n >= 2;
        if (score.valid) {
            double total = 0.0;
            std::vector<int> reference(sub_n);
            for (const auto& sub : subsamples) {
                const ClusterResult part = dbscan(dist, sub, params);
                for (std::size_t i = 0; i < sub_n; ++i) reference[i] = full.labels[sub[i]];
                total += adjusted_rand_index(part.labels, reference);
            }
            score.mean_ari = total / static_cast<double>(subsamples.size());
        }
        report.candidates.push_back(score);
    }

    const CandidateScore* best = nullptr;
    for (const auto& c : report.candidates) {
        if (!c.valid) continue;
        if (best == nullptr || *c.mean_ari > *best->mean_ari ||
            (*c.mean_ari == *best->mean_ari &&
             (c.params.eps < best->params.eps ||
              (c.params.eps == best->params.eps && c.params.min_pts < best->params.min_pts)))) {
            best = &c;
        }
    }
    if (best != nullptr) {
        report.chosen = best->params;
        report.fallback_used = false;
    }
    return report;
}

std::vector<DbscanParams> default_grid(std::span<const Embedding> points, std::uint64_t seed) {
    constexpr std::size_t kAllPairsLimit = 300;
    constexpr std::size_t kSampledPairs = 20000;
    constexpr double kMinEps = 1e-6;

    const std::size_t n = points.size();
    std::vector<double> d;
    if (n <= kAllPairsLimit) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) d.push_back(cosine_distance(points[i], points[j]));
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        while (d.size() < kSampledPairs) {
            const std::size_t i = pick(rng);
            const std::size_t j = pick(rng);
            if (i != j) d.push_back(cosine_distance(points[i], points[j]));
        }
    }

    std::vector<double> eps_values;
    if (d.empty()) {
        eps_values = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    } else {
        std::sort(d.begin(), d.end());
        for (int k = 1; k <= 9; ++k) {
            const double h = (static_cast<double>(d.size()) - 1.0) * (k / 10.0);
            const auto lo = static_cast<std::size_t>(std::floor(h));
            const std::size_t hi = std::min(lo + 1, d.size() - 1);
            const double q = d[lo] + (h - static_cast<double>(lo)) * (d[hi] - d[lo]);
            eps_values.push_back(std::max(q, kMinEps));
        }
        eps_values.erase(std::unique(eps_values.begin(), eps_values.end()), eps_values.end());
    }

    std::vector<DbscanParams> grid;
    for (double eps : eps_values)
        for (std::size_t mp : {3, 5, 10}) grid.push_back({eps, mp});
    return grid;
}

std::vector<PrototypeEntry> extract_prototypes(std::span<const Embedding> points, const ClusterResult& clusters) {
    if (points.empty()) throw Error(ErrorKind::InvalidInput, "extract_prototypes: empty input");
    if (clusters.labels.size() != points.size()) {
        throw Error(ErrorKind::InvalidInput, "extract_prototypes: labels/points length mismatch");
    }

    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (clusters.labels[i] != kNoise) members[clusters.labels[i]].push_back(i);
    }

    std::vector<PrototypeEntry> out;
    if (members.empty()) {
        Embedding mean(points.front().size(), 0.0);
        for (const auto& p : points)
            for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += p[j];
        for (double& x : mean) x /= static_cast<double>(points.size());
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < mean.size(); ++j) d2 += (points[i][j] - mean[j]) * (points[i][j] - mean[j]);
            if (d2 < best_d) {
                best_d = d2;
                best = i;
            }
        }
        PrototypeEntry e{points[best], points.size(), {}};
        e.meta.fallback = true;
        out.push_back(std::move(e));
        return out;
    }

    for (const auto& [id, idx] : members) {
        std::size_t best = idx.front();
        double best_sum = -std::numeric_limits<double>::infinity();
        for (std::size_t a : idx) {
            double s = 0.0;
            for (std::size_t b : idx) s += dot(points[a], points[b]);
            if (s > best_sum) {
                best_sum = s;
                best = a;
            }
        }
        out.push_back({points[best], idx.size(), {}});
    }
    return out;
}

PrototypeEntry kmeans_k1_prototype(std::span<const Embedding> points) {
    if (points.empty()) throw Error(ErrorKind::InvalidInput, "kmeans_k1_prototype: empty input");
    Embedding mean(points.front().size(), 0.0);
    for (const auto& p : points)
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += p[j];

    std::size_t best = 0;
    if (l2_norm(mean) > kDegenerateNorm) {
        double best_sim = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double s = cosine(points[i], mean);
            if (s > best_sim) {
                best_sim = s;
                best = i;
            }
        }
    }
    return {points[best], points.size(), {}};
}

}  // namespace tricache
