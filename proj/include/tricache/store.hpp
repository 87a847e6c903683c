#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tricache/clustering.hpp"
#include "tricache/core.hpp"

namespace tricache {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFormat = "tricache-manifest/1";
inline constexpr const char* kAnchorsFormat = "tricache-anchors/1";
inline constexpr const char* kProtoStoreFormat = "tricache-protos/1";

enum class SubjectRole { Source, Target };

const char* to_string(SubjectRole role);

struct FrameRange {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive

    bool operator==(const FrameRange&) const = default;
};

struct VideoRecord {
    std::string id;
    std::size_t frames = 0;
    std::optional<std::string> label;
    std::optional<std::vector<std::string>> frame_labels;  // source videos only
    std::optional<FrameRange> anchor_range;                // target videos only
    std::string embeddings_path;                           // relative to the manifest
};

struct SubjectRecord {
    std::string id;
    SubjectRole role = SubjectRole::Source;
    std::vector<VideoRecord> videos;
};

struct Manifest {
    std::size_t dim = 0;
    ClassSet classes;
    std::vector<SubjectRecord> subjects;
    fs::path base_dir;

    const SubjectRecord* find_subject(const std::string& id) const;
    const SubjectRecord& subject(const std::string& id) const;  // throws Validation
    fs::path resolve(const VideoRecord& video) const { return base_dir / video.embeddings_path; }
    std::vector<const SubjectRecord*> subjects_with_role(SubjectRole role) const;
};

// Parses and validates; `check_files` also verifies every embedding file
// exists with byte length frames * dim * 4.
Manifest parse_manifest(const nlohmann::json& doc, const fs::path& base_dir, bool check_files = true);
Manifest load_manifest(const fs::path& path);
nlohmann::json manifest_to_json(const Manifest& manifest);
void save_manifest(const Manifest& manifest, const fs::path& path);

// Headerless little-endian float32, row-major [rows][dim].
void write_f32_matrix(const fs::path& path, std::span<const Embedding> rows);
std::vector<Embedding> read_f32_matrix(const fs::path& path, std::size_t rows, std::size_t dim);

// Raw (not normalized) frame embeddings of a video. NaN/Inf is a
// CorruptData error that names the frame.
std::vector<Embedding> load_embeddings(const Manifest& manifest, const VideoRecord& video);

struct AnchorSet {
    ClassSet classes;
    ClassAnchors anchors;
};

// anchors.json {format, classes, dim, logit_scale, blob} + |C| x d float32 blob.
AnchorSet load_anchors(const fs::path& path);
void save_anchors(const fs::path& path, const ClassSet& classes, std::span<const Embedding> anchors,
                  double logit_scale);

// json_path with its extension replaced by ".f32".
fs::path blob_path_for(const fs::path& json_path);

void write_json(const fs::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const fs::path& path);

struct PairKey {
    std::string subject;
    ClassIndex cls = 0;

    auto operator<=>(const PairKey&) const = default;
};

// Per (source subject, class) prototypes. Vectors are held at float32
// precision so the on-disk form round-trips bit-exactly.
class PrototypeStore {
public:
    PrototypeStore() = default;
    PrototypeStore(std::size_t dim, ClassSet classes);

    std::size_t dim() const noexcept { return dim_; }
    const ClassSet& classes() const noexcept { return classes_; }

    void add(const std::string& subject, ClassIndex cls, PrototypeEntry entry);
    // Replaces the pair's list; an empty list is kept and fails validate().
    void set_entries(const std::string& subject, ClassIndex cls, std::vector<PrototypeEntry> entries);
    void set_report(const std::string& subject, ClassIndex cls, ParamSearchReport report);

    bool has(const std::string& subject, ClassIndex cls) const;
    const std::vector<PrototypeEntry>& entries(const std::string& subject, ClassIndex cls) const;
    std::vector<std::string> subjects() const;  // sorted
    const std::map<PairKey, std::vector<PrototypeEntry>>& all() const noexcept { return entries_; }
    const std::map<PairKey, ParamSearchReport>& reports() const noexcept { return reports_; }
    std::size_t total_entries() const;

    // Every vector unit-norm and of dimension dim, cluster sizes >= 1,
    // no empty (subject, class) entry.
    void validate() const;

    bool operator==(const PrototypeStore& other) const;

private:
    std::size_t dim_ = 0;
    ClassSet classes_;
    std::map<PairKey, std::vector<PrototypeEntry>> entries_;
    std::map<PairKey, ParamSearchReport> reports_;
};

// `config`, when not null, is echoed under "config".
void save_prototype_store(const PrototypeStore& store, const fs::path& json_path,
                          const nlohmann::json& config = nullptr);
PrototypeStore load_prototype_store(const fs::path& json_path);

nlohmann::json report_to_json(const ParamSearchReport& report);
ParamSearchReport report_from_json(const nlohmann::json& doc);

}  // namespace tricache
