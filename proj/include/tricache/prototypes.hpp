#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tricache/clustering.hpp"
#include "tricache/store.hpp"

namespace tricache {

enum class Extractor { Dbscan, KMeans1 };

const char* to_string(Extractor e);
Extractor parse_extractor(const std::string& s);

struct ProtoBuildOptions {
    Extractor extractor = Extractor::Dbscan;
    BootstrapConfig bootstrap;
    ValidityRules rules;
    std::vector<DbscanParams> grid;  // empty: default_grid per (subject, class)
    std::size_t jobs = 1;
};

struct ClassPrototypes {
    std::vector<PrototypeEntry> entries;
    std::optional<ParamSearchReport> report;
};

// Prototypes for one (subject, class) set of unit vectors. With DBSCAN the
// parameters are chosen by select_params; an invalid search (or too few
// samples) falls back to the sample nearest the mean.
ClassPrototypes extract_class_prototypes(std::span<const Embedding> points, const ProtoBuildOptions& options,
                                         std::uint64_t seed);

// Stable 64-bit seed for a (subject, class) job.
std::uint64_t derive_seed(std::uint64_t base, const std::string& subject, ClassIndex cls);

// Every source subject's frames grouped by frame label, normalized, then
// summarized. Jobs fan out over options.jobs threads; results are ordered
// by (subject id, class index) regardless.
PrototypeStore build_prototype_store(const Manifest& manifest, const ProtoBuildOptions& options);

}  // namespace tricache
