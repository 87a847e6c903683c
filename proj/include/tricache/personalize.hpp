#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tricache/core.hpp"
#include "tricache/store.hpp"

namespace tricache {

inline constexpr const char* kSourceCacheFormat = "tricache-source-cache/1";
inline constexpr double kVarianceFloor = 1e-8;

// Elementwise mean and population (divide-by-n) variance.
struct AnchorStats {
    Embedding mean;
    std::vector<double> var;
};

AnchorStats anchor_stats(std::span<const Embedding> embeddings);

// Frechet distance between diagonal Gaussians:
//   d^2 = |mu_a - mu_b|^2 + sum_j (sqrt(var_a + 1e-8) - sqrt(var_b + 1e-8))^2
double frechet_diag(const AnchorStats& a, const AnchorStats& b);

struct RankedSource {
    std::string subject;
    double distance = 0.0;

    bool operator==(const RankedSource&) const = default;
};

// Ascending by distance, ties by subject id.
std::vector<RankedSource> rank_sources(const AnchorStats& target, const std::map<std::string, AnchorStats>& sources);

struct SourcePrototype {
    Embedding vector;
    std::string source_subject;
    double anchor_distance = 0.0;
    std::size_t cluster_size = 0;

    bool operator==(const SourcePrototype&) const = default;
};

// Fixed per-target class prototypes pooled from the nearest source
// subjects. Immutable once constructed.
class PersonalizedSourceCache {
public:
    PersonalizedSourceCache(std::string target_id, std::vector<std::vector<SourcePrototype>> per_class,
                            std::vector<RankedSource> selected_sources, std::vector<RankedSource> ranking = {});

    const std::string& target_id() const noexcept { return target_id_; }
    std::size_t n_classes() const noexcept { return per_class_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<SourcePrototype>& prototypes(ClassIndex c) const { return per_class_.at(c); }
    const std::vector<RankedSource>& selected_sources() const noexcept { return selected_; }
    // Every source with its distance, for audit.
    const std::vector<RankedSource>& ranking() const noexcept { return ranking_; }
    std::size_t total_size() const;

    bool operator==(const PersonalizedSourceCache&) const = default;

private:
    std::string target_id_;
    std::vector<std::vector<SourcePrototype>> per_class_;
    std::vector<RankedSource> selected_;
    std::vector<RankedSource> ranking_;
    std::size_t dim_ = 0;
};

struct PersonalizeOptions {
    ClassIndex anchor_class = 0;
    std::size_t top_m = 3;
    std::size_t cap_k = 0;  // 0 keeps everything
};

// Source statistics come from each source's anchor-class prototypes, the
// target's from its raw anchor frames. Prototypes of the top-m sources
// are pooled per class; with cap_k > 0 a class keeps its first cap_k by
// (source distance asc, cluster size desc, insertion order).
PersonalizedSourceCache build_personalized_cache(const std::string& target_id,
                                                 std::span<const Embedding> target_anchor,
                                                 const PrototypeStore& protos, const PersonalizeOptions& options);

// Normalized frames inside the anchor ranges of a target subject's videos.
std::vector<Embedding> collect_anchor_frames(const Manifest& manifest, const SubjectRecord& target);

void save_source_cache(const PersonalizedSourceCache& cache, const ClassSet& classes, const fs::path& json_path,
                       const nlohmann::json& config = nullptr);
PersonalizedSourceCache load_source_cache(const fs::path& json_path, const ClassSet& classes);

}  // namespace tricache
