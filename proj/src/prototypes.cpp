#include "tricache/prototypes.hpp"

#include <map>

#include "tricache/parallel.hpp"

namespace tricache {

const char* to_string(Extractor e) { return e == Extractor::Dbscan ? "dbscan" : "kmeans1"; }

Extractor parse_extractor(const std::string& s) {
    if (s == "dbscan") return Extractor::Dbscan;
    if (s == "kmeans1") return Extractor::KMeans1;
    throw Error(ErrorKind::Validation, "unknown extractor '" + s + "' (dbscan|kmeans1)");
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& subject, ClassIndex cls) {
    // FNV-1a over the seed bytes, the subject id and the class index.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t byte) {
        h ^= byte;
        h *= 1099511628211ULL;
    };
    for (int i = 0; i < 8; ++i) mix((base >> (8 * i)) & 0xFF);
    for (unsigned char ch : subject) mix(ch);
    for (int i = 0; i < 8; ++i) mix((static_cast<std::uint64_t>(cls) >> (8 * i)) & 0xFF);
    return h;
}

ClassPrototypes extract_class_prototypes(std::span<const Embedding> points, const ProtoBuildOptions& options,
                                         std::uint64_t seed) {
    ClassPrototypes out;
    if (points.empty()) return out;

    if (options.extractor == Extractor::KMeans1) {
        out.entries.push_back(kmeans_k1_prototype(points));
        return out;
    }

    const std::vector<DbscanParams> grid = options.grid.empty() ? default_grid(points, seed) : options.grid;
    BootstrapConfig bootstrap = options.bootstrap;
    bootstrap.seed = seed;
    ParamSearchReport report = select_params(points, grid, bootstrap, options.rules);

    ClusterResult clusters;
    PrototypeMeta meta;
    if (report.chosen) {
        clusters = dbscan(points, *report.chosen);
        meta.eps = report.chosen->eps;
        meta.min_pts = report.chosen->min_pts;
        for (const auto& c : report.candidates) {
            if (c.valid && c.params == *report.chosen) meta.stability = *c.mean_ari;
        }
    } else {
        clusters.labels.assign(points.size(), kNoise);
        clusters.outlier_rate = 1.0;
    }
    out.entries = extract_prototypes(points, clusters);
    for (auto& e : out.entries) {
        const bool fallback = e.meta.fallback;
        e.meta = meta;
        e.meta.fallback = fallback;
    }
    out.report = std::move(report);
    return out;
}

PrototypeStore build_prototype_store(const Manifest& manifest, const ProtoBuildOptions& options) {
    const auto sources = manifest.subjects_with_role(SubjectRole::Source);
    if (sources.empty()) throw Error(ErrorKind::Validation, "manifest has no source subjects");

    struct Job {
        std::string subject;
        ClassIndex cls;
        std::vector<Embedding> points;
    };
    std::map<PairKey, std::vector<Embedding>> grouped;
    for (const auto* s : sources) {
        for (const auto& v : s->videos) {
            if (!v.frame_labels) {
                throw Error(ErrorKind::Validation,
                            "source video " + s->id + "/" + v.id + " has no frame_labels");
            }
            const auto frames = load_embeddings(manifest, v);
            for (std::size_t t = 0; t < frames.size(); ++t) {
                const ClassIndex c = manifest.classes.index_of((*v.frame_labels)[t]);
                grouped[{s->id, c}].push_back(
                    normalize_or_throw(frames[t], s->id + "/" + v.id + " frame " + std::to_string(t)));
            }
        }
    }

    std::vector<Job> jobs;
    for (auto& [key, points] : grouped) jobs.push_back({key.subject, key.cls, std::move(points)});

    std::vector<ClassPrototypes> results(jobs.size());
    parallel_for(jobs.size(), options.jobs, [&](std::size_t i) {
        results[i] = extract_class_prototypes(jobs[i].points, options,
                                              derive_seed(options.bootstrap.seed, jobs[i].subject, jobs[i].cls));
    });

    PrototypeStore store(manifest.dim, manifest.classes);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        store.set_entries(jobs[i].subject, jobs[i].cls, std::move(results[i].entries));
        if (results[i].report) store.set_report(jobs[i].subject, jobs[i].cls, std::move(*results[i].report));
    }
    store.validate();
    return store;
}

}  // namespace tricache
