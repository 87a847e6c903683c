#include "tricache/caches.hpp"

#include <algorithm>

namespace tricache {

using nlohmann::json;

const char* to_string(Polarity p) { return p == Polarity::Positive ? "positive" : "negative"; }

TargetCache::TargetCache(Polarity polarity, std::size_t n_classes, std::size_t capacity_per_class)
    : polarity_(polarity), capacity_(capacity_per_class), buckets_(n_classes) {
    if (capacity_per_class == 0) throw Error(ErrorKind::InvalidInput, "cache capacity must be >= 1");
    if (n_classes == 0) throw Error(ErrorKind::InvalidInput, "cache needs at least one class");
}

InsertReport TargetCache::insert(Embedding vector, ClassIndex label, double entropy) {
    if (label >= buckets_.size()) throw Error(ErrorKind::InvalidInput, "cache label out of range");
    InsertReport report;
    report.seq = next_seq_++;
    auto& bucket = buckets_[label];
    bucket.push_back({std::move(vector), label, entropy, report.seq});
    if (bucket.size() > capacity_) {
        auto victim = bucket.begin();
        for (auto it = bucket.begin() + 1; it != bucket.end(); ++it) {
            if (it->entropy > victim->entropy || (it->entropy == victim->entropy && it->seq < victim->seq)) victim = it;
        }
        report.evicted = std::move(*victim);
        bucket.erase(victim);
    }
    return report;
}

std::optional<Embedding> weighted_top_r(std::vector<WeightedCandidate> candidates, std::size_t r) {
    if (candidates.empty() || r == 0) return std::nullopt;
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const WeightedCandidate& a, const WeightedCandidate& b) { return a.similarity > b.similarity; });
    candidates.resize(std::min(r, candidates.size()));
    Embedding sum(candidates.front().vector->size(), 0.0);
    double total = 0.0;
    for (const auto& c : candidates) {
        const double w = std::max(c.similarity, 0.0) + kRetrievalWeightFloor;
        for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += w * (*c.vector)[j];
        total += w;
    }
    for (double& x : sum) x /= total;
    auto n = l2_normalize(sum);
    if (n.degenerate) return std::nullopt;
    return std::move(n.vector);
}

std::optional<Embedding> TargetCache::retrieve(std::span<const double> query, std::size_t r,
                                               std::optional<ClassIndex> label_filter) const {
    std::vector<const CacheEntry*> entries;
    for (ClassIndex c = 0; c < buckets_.size(); ++c) {
        if (label_filter && *label_filter != c) continue;
        for (const auto& e : buckets_[c]) entries.push_back(&e);
    }
    std::sort(entries.begin(), entries.end(), [](const CacheEntry* a, const CacheEntry* b) { return a->seq < b->seq; });
    std::vector<WeightedCandidate> candidates;
    candidates.reserve(entries.size());
    for (const auto* e : entries) candidates.push_back({&e->vector, cosine(query, e->vector)});
    return weighted_top_r(std::move(candidates), r);
}

std::size_t TargetCache::size() const {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
}

void TargetCache::clear() {
    for (auto& b : buckets_) b.clear();
}

Embedding retrieve_source(const PersonalizedSourceCache& cache, std::span<const double> query, std::size_t r) {
    std::vector<WeightedCandidate> candidates;
    for (ClassIndex c = 0; c < cache.n_classes(); ++c) {
        for (const auto& p : cache.prototypes(c)) candidates.push_back({&p.vector, cosine(query, p.vector)});
    }
    if (auto v = weighted_top_r(candidates, r)) return std::move(*v);
    auto best = std::max_element(candidates.begin(), candidates.end(),
                                 [](const auto& a, const auto& b) { return a.similarity < b.similarity; });
    return *best->vector;
}

void save_target_cache(const TargetCache& cache, const ClassSet& classes, const fs::path& json_path) {
    if (classes.size() != cache.n_classes()) throw Error(ErrorKind::Validation, "class set does not match cache");
    std::vector<Embedding> rows;
    json entries = json::array();
    std::size_t dim = 0;
    for (ClassIndex c = 0; c < cache.n_classes(); ++c) {
        for (const auto& e : cache.bucket(c)) {
            dim = e.vector.size();
            entries.push_back({{"class", classes.label(c)},
                               {"row", rows.size()},
                               {"entropy", e.entropy},
                               {"seq", e.seq}});
            rows.push_back(e.vector);
        }
    }
    const fs::path blob = blob_path_for(json_path);
    write_f32_matrix(blob, rows);
    write_json(json_path, {{"format", kTargetCacheFormat},
                           {"polarity", to_string(cache.polarity())},
                           {"capacity_per_class", cache.capacity_per_class()},
                           {"dim", dim},
                           {"classes", classes.labels()},
                           {"blob", blob.filename().string()},
                           {"rows", rows.size()},
                           {"entries", std::move(entries)}});
}

TargetCache load_target_cache(const fs::path& json_path, const ClassSet& classes) {
    const json doc = read_json(json_path);
    const std::string where = json_path.string();
    try {
        if (!doc.is_object() || doc.value("format", std::string{}) != kTargetCacheFormat) {
            throw Error(ErrorKind::Version, where + ": not a " + std::string(kTargetCacheFormat) + " file");
        }
        if (doc.at("classes").get<std::vector<std::string>>() != classes.labels()) {
            throw Error(ErrorKind::Validation, where + ": class list does not match");
        }
        const Polarity polarity =
            doc.at("polarity").get<std::string>() == "positive" ? Polarity::Positive : Polarity::Negative;
        TargetCache cache(polarity, classes.size(), doc.at("capacity_per_class").get<std::size_t>());
        const auto dim = doc.at("dim").get<std::size_t>();
        const auto n_rows = doc.at("rows").get<std::size_t>();
        const auto rows = read_f32_matrix(json_path.parent_path() / doc.at("blob").get<std::string>(), n_rows, dim);
        for (const auto& e : doc.at("entries")) {
            const auto row = e.at("row").get<std::size_t>();
            if (row >= rows.size()) throw Error(ErrorKind::SizeMismatch, where + ": entry row out of range");
            const ClassIndex c = classes.index_of(e.at("class").get<std::string>());
            CacheEntry entry{rows[row], c, e.at("entropy").get<double>(), e.at("seq").get<std::uint64_t>()};
            cache.next_seq_ = std::max(cache.next_seq_, entry.seq + 1);
            cache.buckets_[c].push_back(std::move(entry));
            if (cache.buckets_[c].size() > cache.capacity_) {
                throw Error(ErrorKind::Validation, where + ": bucket exceeds capacity");
            }
        }
        return cache;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, where + ": " + e.what());
    }
}

}  // namespace tricache
