#include "tricache/personalize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tricache {

using nlohmann::json;

AnchorStats anchor_stats(std::span<const Embedding> embeddings) {
    if (embeddings.empty()) throw Error(ErrorKind::InvalidInput, "anchor_stats: empty input");
    const std::size_t d = embeddings.front().size();
    const auto n = static_cast<double>(embeddings.size());
    AnchorStats s{Embedding(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& e : embeddings) {
        if (e.size() != d) throw Error(ErrorKind::InvalidInput, "anchor_stats: dimension mismatch");
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += e[j];
    }
    for (double& m : s.mean) m /= n;
    for (const auto& e : embeddings)
        for (std::size_t j = 0; j < d; ++j) s.var[j] += (e[j] - s.mean[j]) * (e[j] - s.mean[j]);
    for (double& v : s.var) v /= n;
    return s;
}

double frechet_diag(const AnchorStats& a, const AnchorStats& b) {
    if (a.mean.size() != b.mean.size() || a.var.size() != b.var.size() || a.mean.size() != a.var.size()) {
        throw Error(ErrorKind::InvalidInput, "frechet_diag: dimension mismatch");
    }
    double d2 = 0.0;
    for (std::size_t j = 0; j < a.mean.size(); ++j) {
        const double dm = a.mean[j] - b.mean[j];
        const double ds = std::sqrt(a.var[j] + kVarianceFloor) - std::sqrt(b.var[j] + kVarianceFloor);
        d2 += dm * dm + ds * ds;
    }
    return std::sqrt(d2);
}

std::vector<RankedSource> rank_sources(const AnchorStats& target, const std::map<std::string, AnchorStats>& sources) {
    if (sources.empty()) throw Error(ErrorKind::InvalidInput, "rank_sources: no sources");
    std::vector<RankedSource> out;
    for (const auto& [id, stats] : sources) out.push_back({id, frechet_diag(target, stats)});
    std::stable_sort(out.begin(), out.end(), [](const RankedSource& a, const RankedSource& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.subject < b.subject);
    });
    return out;
}

PersonalizedSourceCache::PersonalizedSourceCache(std::string target_id,
                                                 std::vector<std::vector<SourcePrototype>> per_class,
                                                 std::vector<RankedSource> selected_sources,
                                                 std::vector<RankedSource> ranking)
    : target_id_(std::move(target_id)),
      per_class_(std::move(per_class)),
      selected_(std::move(selected_sources)),
      ranking_(std::move(ranking)) {
    if (per_class_.size() < 2) throw Error(ErrorKind::Validation, "source cache needs at least 2 classes");
    for (ClassIndex c = 0; c < per_class_.size(); ++c) {
        if (per_class_[c].empty()) {
            throw Error(ErrorKind::Validation, "source cache for '" + target_id_ + "': class " + std::to_string(c) +
                                                   " has no prototypes");
        }
        for (const auto& p : per_class_[c]) {
            if (dim_ == 0) dim_ = p.vector.size();
            if (p.vector.size() != dim_ || dim_ == 0) throw Error(ErrorKind::Validation, "source cache dimension mismatch");
            if (!is_unit(p.vector)) throw Error(ErrorKind::Validation, "source cache prototype is not unit-norm");
        }
    }
    for (std::size_t i = 1; i < selected_.size(); ++i) {
        if (selected_[i].distance < selected_[i - 1].distance) {
            throw Error(ErrorKind::Validation, "selected sources must be sorted by distance");
        }
    }
}

std::size_t PersonalizedSourceCache::total_size() const {
    std::size_t n = 0;
    for (const auto& v : per_class_) n += v.size();
    return n;
}

PersonalizedSourceCache build_personalized_cache(const std::string& target_id,
                                                 std::span<const Embedding> target_anchor,
                                                 const PrototypeStore& protos, const PersonalizeOptions& options) {
    if (target_anchor.empty()) {
        throw Error(ErrorKind::Validation, "target '" + target_id + "' has no anchor frames");
    }
    if (options.top_m == 0) throw Error(ErrorKind::InvalidInput, "top_m must be >= 1");
    if (options.anchor_class >= protos.classes().size()) {
        throw Error(ErrorKind::InvalidInput, "anchor class index out of range");
    }

    std::map<std::string, AnchorStats> source_stats;
    for (const auto& subject : protos.subjects()) {
        const auto& anchors = protos.entries(subject, options.anchor_class);
        if (anchors.empty()) {
            throw Error(ErrorKind::Validation, "source '" + subject + "' has no prototypes for the anchor class");
        }
        std::vector<Embedding> vecs;
        for (const auto& e : anchors) vecs.push_back(e.vector);
        source_stats.emplace(subject, anchor_stats(vecs));
    }
    if (source_stats.empty()) throw Error(ErrorKind::Validation, "prototype store has no source subjects");

    const AnchorStats target_stats = anchor_stats(target_anchor);
    std::vector<RankedSource> ranking = rank_sources(target_stats, source_stats);
    std::vector<RankedSource> selected(ranking.begin(),
                                       ranking.begin() + static_cast<std::ptrdiff_t>(std::min(options.top_m, ranking.size())));

    const std::size_t n_classes = protos.classes().size();
    std::vector<std::vector<SourcePrototype>> per_class(n_classes);
    for (ClassIndex c = 0; c < n_classes; ++c) {
        auto& pool = per_class[c];
        for (const auto& src : selected) {
            for (const auto& e : protos.entries(src.subject, c)) {
                pool.push_back({e.vector, src.subject, src.distance, e.cluster_size});
            }
        }
        if (pool.empty()) {
            throw Error(ErrorKind::Validation, "personalized cache for '" + target_id + "': class '" +
                                                   protos.classes().label(c) + "' has no pooled prototypes");
        }
        if (options.cap_k > 0 && pool.size() > options.cap_k) {
            std::stable_sort(pool.begin(), pool.end(), [](const SourcePrototype& a, const SourcePrototype& b) {
                if (a.anchor_distance != b.anchor_distance) return a.anchor_distance < b.anchor_distance;
                return a.cluster_size > b.cluster_size;
            });
            pool.resize(options.cap_k);
        }
    }
    return PersonalizedSourceCache(target_id, std::move(per_class), std::move(selected), std::move(ranking));
}

std::vector<Embedding> collect_anchor_frames(const Manifest& manifest, const SubjectRecord& target) {
    std::vector<Embedding> out;
    for (const auto& v : target.videos) {
        if (!v.anchor_range) continue;
        const auto frames = load_embeddings(manifest, v);
        for (std::size_t t = v.anchor_range->start; t < v.anchor_range->end; ++t) {
            out.push_back(normalize_or_throw(frames[t], target.id + "/" + v.id + " frame " + std::to_string(t)));
        }
    }
    if (out.empty()) {
        throw Error(ErrorKind::Validation, "target '" + target.id + "' has no anchor_range on any video");
    }
    return out;
}

namespace {

json ranked_to_json(const std::vector<RankedSource>& list) {
    json out = json::array();
    for (const auto& r : list) out.push_back({{"subject", r.subject}, {"distance", r.distance}});
    return out;
}

std::vector<RankedSource> ranked_from_json(const json& j) {
    std::vector<RankedSource> out;
    for (const auto& r : j) out.push_back({r.at("subject").get<std::string>(), r.at("distance").get<double>()});
    return out;
}

}  // namespace

void save_source_cache(const PersonalizedSourceCache& cache, const ClassSet& classes, const fs::path& json_path,
                       const json& config) {
    if (classes.size() != cache.n_classes()) throw Error(ErrorKind::Validation, "class set does not match cache");
    std::vector<Embedding> rows;
    json entries = json::array();
    for (ClassIndex c = 0; c < cache.n_classes(); ++c) {
        for (const auto& p : cache.prototypes(c)) {
            entries.push_back({{"class", classes.label(c)},
                               {"row", rows.size()},
                               {"source_subject", p.source_subject},
                               {"anchor_distance", p.anchor_distance},
                               {"cluster_size", p.cluster_size}});
            rows.push_back(p.vector);
        }
    }
    const fs::path blob = blob_path_for(json_path);
    write_f32_matrix(blob, rows);
    json doc = {{"format", kSourceCacheFormat},
                {"target", cache.target_id()},
                {"dim", cache.dim()},
                {"classes", classes.labels()},
                {"blob", blob.filename().string()},
                {"rows", rows.size()},
                {"selected_sources", ranked_to_json(cache.selected_sources())},
                {"ranking", ranked_to_json(cache.ranking())},
                {"entries", std::move(entries)}};
    if (!config.is_null()) doc["config"] = config;
    write_json(json_path, doc);
}

PersonalizedSourceCache load_source_cache(const fs::path& json_path, const ClassSet& classes) {
    const json doc = read_json(json_path);
    const std::string where = json_path.string();
    try {
        if (!doc.is_object() || doc.value("format", std::string{}) != kSourceCacheFormat) {
            throw Error(ErrorKind::Version, where + ": not a " + std::string(kSourceCacheFormat) + " file");
        }
        std::vector<std::string> labels = doc.at("classes").get<std::vector<std::string>>();
        if (labels != classes.labels()) throw Error(ErrorKind::Validation, where + ": class list does not match");
        const auto dim = doc.at("dim").get<std::size_t>();
        const auto n_rows = doc.at("rows").get<std::size_t>();
        const fs::path blob = json_path.parent_path() / doc.at("blob").get<std::string>();
        std::error_code ec;
        const auto size = fs::file_size(blob, ec);
        if (ec) throw Error(ErrorKind::MissingFile, "source cache blob not found: " + blob.string());
        if (size != n_rows * dim * 4) throw Error(ErrorKind::SizeMismatch, "source cache blob size mismatch: " + blob.string());
        const auto rows = read_f32_matrix(blob, n_rows, dim);
        std::vector<std::vector<SourcePrototype>> per_class(classes.size());
        for (const auto& e : doc.at("entries")) {
            const auto row = e.at("row").get<std::size_t>();
            if (row >= rows.size()) throw Error(ErrorKind::SizeMismatch, where + ": entry row out of range");
            per_class[classes.index_of(e.at("class").get<std::string>())].push_back(
                {rows[row], e.at("source_subject").get<std::string>(), e.at("anchor_distance").get<double>(),
                 e.at("cluster_size").get<std::size_t>()});
        }
        return PersonalizedSourceCache(doc.at("target").get<std::string>(), std::move(per_class),
                                       ranked_from_json(doc.at("selected_sources")),
                                       ranked_from_json(doc.value("ranking", json::array())));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, where + ": " + e.what());
    }
}

}  // namespace tricache
