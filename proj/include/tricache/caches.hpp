#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tricache/core.hpp"
#include "tricache/personalize.hpp"
#include "tricache/store.hpp"

namespace tricache {

inline constexpr const char* kTargetCacheFormat = "tricache-target-cache/1";
inline constexpr double kRetrievalWeightFloor = 1e-6;

enum class Polarity { Positive, Negative };

const char* to_string(Polarity p);

struct CacheEntry {
    Embedding vector;
    ClassIndex label = 0;  // pseudo-label (positive) or least-likely class (negative)
    double entropy = 0.0;  // at insertion
    std::uint64_t seq = 0;

    bool operator==(const CacheEntry&) const = default;
};

struct InsertReport {
    std::uint64_t seq = 0;                // assigned to the inserted entry
    std::optional<CacheEntry> evicted;    // possibly the new entry itself

    bool kept() const { return !evicted || evicted->seq != seq; }
};

class TargetCache;
TargetCache load_target_cache(const fs::path& json_path, const ClassSet& classes);

// Per-class buckets of bounded size. Overflow evicts the highest-entropy
// entry of the bucket, the oldest one among equals.
class TargetCache {
public:
    TargetCache(Polarity polarity, std::size_t n_classes, std::size_t capacity_per_class);

    InsertReport insert(Embedding vector, ClassIndex label, double entropy);

    // Similarity-weighted mean of the top-r entries by cosine to `query`
    // (weights max(cos, 0) + 1e-6), L2-normalized. nullopt when there is
    // nothing to retrieve.
    std::optional<Embedding> retrieve(std::span<const double> query, std::size_t r,
                                      std::optional<ClassIndex> label_filter = std::nullopt) const;

    Polarity polarity() const noexcept { return polarity_; }
    std::size_t capacity_per_class() const noexcept { return capacity_; }
    std::size_t n_classes() const noexcept { return buckets_.size(); }
    const std::vector<CacheEntry>& bucket(ClassIndex c) const { return buckets_.at(c); }
    std::size_t size() const;
    bool empty() const { return size() == 0; }
    void clear();

private:
    friend TargetCache load_target_cache(const fs::path& json_path, const ClassSet& classes);

    Polarity polarity_;
    std::size_t capacity_;
    std::vector<std::vector<CacheEntry>> buckets_;
    std::uint64_t next_seq_ = 0;
};

// Same weighted top-r rule over every prototype of every class. Falls back
// to the single nearest prototype if the weighted mean cancels out.
Embedding retrieve_source(const PersonalizedSourceCache& cache, std::span<const double> query, std::size_t r);

struct WeightedCandidate {
    const Embedding* vector;
    double similarity;
};

// Shared top-r aggregation. Candidates are ranked by similarity with a
// stable sort, so callers fix the tie order by the order they pass in.
std::optional<Embedding> weighted_top_r(std::vector<WeightedCandidate> candidates, std::size_t r);

void save_target_cache(const TargetCache& cache, const ClassSet& classes, const fs::path& json_path);
TargetCache load_target_cache(const fs::path& json_path, const ClassSet& classes);

}  // namespace tricache
