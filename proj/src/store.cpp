#include "tricache/store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace tricache {

using nlohmann::json;

namespace {

bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

std::size_t get_count(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw Error(ErrorKind::Validation, where + ": missing '" + key + "'");
    const json& v = j.at(key);
    if (!is_count(v)) {
        throw Error(ErrorKind::Validation, where + ": '" + key + "' must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

std::string get_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(ErrorKind::Validation, where + ": '" + key + "' must be a string");
    }
    return j.at(key).get<std::string>();
}

double get_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw Error(ErrorKind::Validation, where + ": '" + key + "' must be a number");
    }
    return j.at(key).get<double>();
}

void check_format(const json& doc, const char* expected, const std::string& where) {
    if (!doc.is_object()) throw Error(ErrorKind::Validation, where + ": top level must be an object");
    if (!doc.contains("format")) return;
    if (!doc.at("format").is_string() || doc.at("format").get<std::string>() != expected) {
        throw Error(ErrorKind::Version, where + ": unsupported format " + doc.at("format").dump() + " (expected \"" +
                                            expected + "\")");
    }
}

ClassSet parse_classes(const json& doc, const std::string& where) {
    if (!doc.contains("classes") || !doc.at("classes").is_array()) {
        throw Error(ErrorKind::Validation, where + ": 'classes' must be an array");
    }
    std::vector<std::string> labels;
    for (const auto& c : doc.at("classes")) {
        if (!c.is_string()) throw Error(ErrorKind::Validation, where + ": class names must be strings");
        labels.push_back(c.get<std::string>());
    }
    return ClassSet(std::move(labels));
}

float to_le(float v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bits = std::bit_cast<std::uint32_t>(v);
        bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) | (bits >> 24);
        return std::bit_cast<float>(bits);
    }
    return v;
}

SubjectRole parse_role(const std::string& s, const std::string& where) {
    if (s == "source") return SubjectRole::Source;
    if (s == "target") return SubjectRole::Target;
    throw Error(ErrorKind::Validation, where + ": role must be 'source' or 'target', got '" + s + "'");
}

VideoRecord parse_video(const json& v, const ClassSet& classes, SubjectRole role, const std::string& where) {
    if (!v.is_object()) throw Error(ErrorKind::Validation, where + ": video must be an object");
    VideoRecord rec;
    rec.id = get_string(v, "id", where);
    if (rec.id.empty()) throw Error(ErrorKind::Validation, where + ": empty video id");
    const std::string here = where + "/" + rec.id;
    rec.frames = get_count(v, "frames", here);
    rec.embeddings_path = get_string(v, "embeddings", here);
    if (rec.embeddings_path.empty()) throw Error(ErrorKind::Validation, here + ": empty embeddings path");

    if (v.contains("label") && !v.at("label").is_null()) {
        rec.label = get_string(v, "label", here);
        classes.index_of(*rec.label);
    }
    if (v.contains("frame_labels") && !v.at("frame_labels").is_null()) {
        if (role != SubjectRole::Source) {
            throw Error(ErrorKind::Validation, here + ": frame_labels are only allowed on source videos");
        }
        const json& fl = v.at("frame_labels");
        if (!fl.is_array()) throw Error(ErrorKind::Validation, here + ": frame_labels must be an array");
        if (fl.size() != rec.frames) {
            throw Error(ErrorKind::Validation, here + ": frame_labels length " + std::to_string(fl.size()) +
                                                   " != frames " + std::to_string(rec.frames));
        }
        std::vector<std::string> labels;
        labels.reserve(fl.size());
        for (const auto& l : fl) {
            if (!l.is_string()) throw Error(ErrorKind::Validation, here + ": frame labels must be strings");
            labels.push_back(l.get<std::string>());
            classes.index_of(labels.back());
        }
        rec.frame_labels = std::move(labels);
    }
    if (v.contains("anchor_range") && !v.at("anchor_range").is_null()) {
        if (role != SubjectRole::Target) {
            throw Error(ErrorKind::Validation, here + ": anchor_range is only allowed on target videos");
        }
        const json& ar = v.at("anchor_range");
        if (!ar.is_array() || ar.size() != 2 || !is_count(ar[0]) || !is_count(ar[1])) {
            throw Error(ErrorKind::Validation, here + ": anchor_range must be [start, end]");
        }
        FrameRange r{ar[0].get<std::size_t>(), ar[1].get<std::size_t>()};
        if (!(r.start < r.end && r.end <= rec.frames)) {
            throw Error(ErrorKind::Validation, here + ": anchor_range must satisfy 0 <= start < end <= frames");
        }
        rec.anchor_range = r;
    }
    return rec;
}

}  // namespace

const char* to_string(SubjectRole role) { return role == SubjectRole::Source ? "source" : "target"; }

const SubjectRecord* Manifest::find_subject(const std::string& id) const {
    for (const auto& s : subjects)
        if (s.id == id) return &s;
    return nullptr;
}

const SubjectRecord& Manifest::subject(const std::string& id) const {
    if (const auto* s = find_subject(id)) return *s;
    throw Error(ErrorKind::Validation, "unknown subject '" + id + "'");
}

std::vector<const SubjectRecord*> Manifest::subjects_with_role(SubjectRole role) const {
    std::vector<const SubjectRecord*> out;
    for (const auto& s : subjects)
        if (s.role == role) out.push_back(&s);
    return out;
}

Manifest parse_manifest(const json& doc, const fs::path& base_dir, bool check_files) {
    try {
        check_format(doc, kManifestFormat, "manifest");
        Manifest m;
        m.base_dir = base_dir;
        m.dim = get_count(doc, "dim", "manifest");
        if (m.dim == 0) throw Error(ErrorKind::Validation, "manifest: dim must be >= 1");
        m.classes = parse_classes(doc, "manifest");
        if (!doc.contains("subjects") || !doc.at("subjects").is_array()) {
            throw Error(ErrorKind::Validation, "manifest: 'subjects' must be an array");
        }
        std::set<std::string> subject_ids;
        for (const auto& s : doc.at("subjects")) {
            if (!s.is_object()) throw Error(ErrorKind::Validation, "manifest: subject must be an object");
            SubjectRecord rec;
            rec.id = get_string(s, "id", "manifest subject");
            if (rec.id.empty()) throw Error(ErrorKind::Validation, "manifest: empty subject id");
            if (!subject_ids.insert(rec.id).second) {
                throw Error(ErrorKind::Validation, "manifest: duplicate subject id '" + rec.id + "'");
            }
            rec.role = parse_role(get_string(s, "role", rec.id), rec.id);
            if (!s.contains("videos") || !s.at("videos").is_array()) {
                throw Error(ErrorKind::Validation, rec.id + ": 'videos' must be an array");
            }
            std::set<std::string> video_ids;
            for (const auto& v : s.at("videos")) {
                VideoRecord video = parse_video(v, m.classes, rec.role, rec.id);
                if (!video_ids.insert(video.id).second) {
                    throw Error(ErrorKind::Validation, rec.id + ": duplicate video id '" + video.id + "'");
                }
                if (video.frames > (std::size_t{1} << 40) / (m.dim * 4)) {
                    throw Error(ErrorKind::Validation, rec.id + "/" + video.id + ": frame count too large");
                }
                rec.videos.push_back(std::move(video));
            }
            m.subjects.push_back(std::move(rec));
        }

        if (check_files) {
            for (const auto& s : m.subjects) {
                for (const auto& v : s.videos) {
                    const fs::path p = m.resolve(v);
                    std::error_code ec;
                    if (!fs::is_regular_file(p, ec)) {
                        throw Error(ErrorKind::MissingFile, "embedding file not found: " + p.string());
                    }
                    const auto size = fs::file_size(p, ec);
                    const std::uintmax_t expected = static_cast<std::uintmax_t>(v.frames) * m.dim * 4;
                    if (ec || size != expected) {
                        throw Error(ErrorKind::SizeMismatch, "embedding file " + p.string() + " has " +
                                                                 std::to_string(size) + " bytes, expected " +
                                                                 std::to_string(expected));
                    }
                }
            }
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("manifest: ") + e.what());
    }
}

Manifest load_manifest(const fs::path& path) {
    return parse_manifest(read_json(path), path.parent_path());
}

json manifest_to_json(const Manifest& m) {
    json subjects = json::array();
    for (const auto& s : m.subjects) {
        json videos = json::array();
        for (const auto& v : s.videos) {
            json jv = {{"id", v.id}, {"frames", v.frames}, {"embeddings", v.embeddings_path}};
            if (v.label) jv["label"] = *v.label;
            if (v.frame_labels) jv["frame_labels"] = *v.frame_labels;
            if (v.anchor_range) jv["anchor_range"] = {v.anchor_range->start, v.anchor_range->end};
            videos.push_back(std::move(jv));
        }
        subjects.push_back({{"id", s.id}, {"role", to_string(s.role)}, {"videos", std::move(videos)}});
    }
    return {{"format", kManifestFormat},
            {"dim", m.dim},
            {"classes", m.classes.labels()},
            {"subjects", std::move(subjects)}};
}

void save_manifest(const Manifest& manifest, const fs::path& path) { write_json(path, manifest_to_json(manifest)); }

void write_f32_matrix(const fs::path& path, std::span<const Embedding> rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
    std::vector<float> buf;
    for (const auto& row : rows) {
        buf.resize(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) buf[j] = to_le(static_cast<float>(row[j]));
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<Embedding> read_f32_matrix(const fs::path& path, std::size_t rows, std::size_t dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open: " + path.string());
    std::vector<float> buf(dim);
    std::vector<Embedding> out;
    out.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(dim * sizeof(float))) {
            throw Error(ErrorKind::SizeMismatch, "truncated float32 file " + path.string() + " at row " +
                                                     std::to_string(r));
        }
        Embedding row(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const float v = to_le(buf[j]);
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::CorruptData, "non-finite value in " + path.string() + " at frame " +
                                                        std::to_string(r) + ", component " + std::to_string(j));
            }
            row[j] = static_cast<double>(v);
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<Embedding> load_embeddings(const Manifest& manifest, const VideoRecord& video) {
    return read_f32_matrix(manifest.resolve(video), video.frames, manifest.dim);
}

fs::path blob_path_for(const fs::path& json_path) {
    fs::path p = json_path;
    p.replace_extension(".f32");
    return p;
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

json read_json(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw Error(ErrorKind::MissingFile, "file not found: " + path.string());
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, "malformed JSON in " + path.string() + ": " + e.what());
    }
}

AnchorSet load_anchors(const fs::path& path) {
    const json doc = read_json(path);
    try {
        check_format(doc, kAnchorsFormat, path.string());
        ClassSet classes = parse_classes(doc, path.string());
        const std::size_t dim = get_count(doc, "dim", path.string());
        if (dim == 0) throw Error(ErrorKind::Validation, path.string() + ": dim must be >= 1");
        const double scale = get_number(doc, "logit_scale", path.string());
        const fs::path blob = path.parent_path() / get_string(doc, "blob", path.string());
        std::error_code ec;
        const auto size = fs::file_size(blob, ec);
        if (ec) throw Error(ErrorKind::MissingFile, "anchor blob not found: " + blob.string());
        if (size != classes.size() * dim * 4) {
            throw Error(ErrorKind::SizeMismatch, "anchor blob " + blob.string() + " has " + std::to_string(size) +
                                                     " bytes, expected " + std::to_string(classes.size() * dim * 4));
        }
        auto rows = read_f32_matrix(blob, classes.size(), dim);
        return {std::move(classes), ClassAnchors(std::move(rows), scale)};
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, path.string() + ": " + e.what());
    }
}

void save_anchors(const fs::path& path, const ClassSet& classes, std::span<const Embedding> anchors,
                  double logit_scale) {
    if (anchors.size() != classes.size()) throw Error(ErrorKind::Validation, "anchor count != class count");
    const fs::path blob = blob_path_for(path);
    write_f32_matrix(blob, anchors);
    write_json(path, {{"format", kAnchorsFormat},
                      {"classes", classes.labels()},
                      {"dim", anchors.empty() ? 0 : anchors.front().size()},
                      {"logit_scale", logit_scale},
                      {"blob", blob.filename().string()}});
}

PrototypeStore::PrototypeStore(std::size_t dim, ClassSet classes) : dim_(dim), classes_(std::move(classes)) {}

void PrototypeStore::add(const std::string& subject, ClassIndex cls, PrototypeEntry entry) {
    if (cls >= classes_.size()) throw Error(ErrorKind::Validation, "prototype class index out of range");
    if (entry.vector.size() != dim_) throw Error(ErrorKind::Validation, "prototype dimension mismatch");
    round_to_f32(entry.vector);
    entries_[{subject, cls}].push_back(std::move(entry));
}

void PrototypeStore::set_entries(const std::string& subject, ClassIndex cls, std::vector<PrototypeEntry> entries) {
    if (cls >= classes_.size()) throw Error(ErrorKind::Validation, "prototype class index out of range");
    auto& slot = entries_[{subject, cls}];
    slot.clear();
    for (auto& e : entries) {
        if (e.vector.size() != dim_) throw Error(ErrorKind::Validation, "prototype dimension mismatch");
        round_to_f32(e.vector);
        slot.push_back(std::move(e));
    }
}

void PrototypeStore::set_report(const std::string& subject, ClassIndex cls, ParamSearchReport report) {
    reports_[{subject, cls}] = std::move(report);
}

bool PrototypeStore::has(const std::string& subject, ClassIndex cls) const {
    auto it = entries_.find({subject, cls});
    return it != entries_.end() && !it->second.empty();
}

const std::vector<PrototypeEntry>& PrototypeStore::entries(const std::string& subject, ClassIndex cls) const {
    static const std::vector<PrototypeEntry> kEmpty;
    auto it = entries_.find({subject, cls});
    return it == entries_.end() ? kEmpty : it->second;
}

std::vector<std::string> PrototypeStore::subjects() const {
    std::vector<std::string> out;
    for (const auto& [key, v] : entries_)
        if (out.empty() || out.back() != key.subject) out.push_back(key.subject);
    return out;
}

std::size_t PrototypeStore::total_entries() const {
    std::size_t n = 0;
    for (const auto& [key, v] : entries_) n += v.size();
    return n;
}

void PrototypeStore::validate() const {
    for (const auto& [key, v] : entries_) {
        const std::string where = "prototype store (" + key.subject + ", class " + std::to_string(key.cls) + ")";
        if (v.empty()) throw Error(ErrorKind::Validation, where + ": empty entry list");
        for (const auto& e : v) {
            if (e.vector.size() != dim_) throw Error(ErrorKind::Validation, where + ": dimension mismatch");
            if (!is_unit(e.vector)) throw Error(ErrorKind::Validation, where + ": prototype is not unit-norm");
            if (e.cluster_size < 1) throw Error(ErrorKind::Validation, where + ": cluster_size must be >= 1");
        }
    }
}

bool PrototypeStore::operator==(const PrototypeStore& other) const {
    if (dim_ != other.dim_ || !(classes_ == other.classes_) || entries_ != other.entries_) return false;
    if (reports_.size() != other.reports_.size()) return false;
    for (const auto& [key, r] : reports_) {
        auto it = other.reports_.find(key);
        if (it == other.reports_.end() || report_to_json(r) != report_to_json(it->second)) return false;
    }
    return true;
}

json report_to_json(const ParamSearchReport& report) {
    json candidates = json::array();
    for (const auto& c : report.candidates) {
        candidates.push_back({{"eps", c.params.eps},
                              {"min_pts", c.params.min_pts},
                              {"outlier_rate", c.outlier_rate},
                              {"n_clusters", c.n_clusters},
                              {"mean_ari", c.mean_ari ? json(*c.mean_ari) : json(nullptr)},
                              {"valid", c.valid}});
    }
    json chosen = nullptr;
    if (report.chosen) chosen = {{"eps", report.chosen->eps}, {"min_pts", report.chosen->min_pts}};
    return {{"candidates", std::move(candidates)}, {"chosen", std::move(chosen)}, {"fallback_used", report.fallback_used}};
}

ParamSearchReport report_from_json(const json& doc) {
    ParamSearchReport r;
    for (const auto& c : doc.at("candidates")) {
        CandidateScore s;
        s.params = {c.at("eps").get<double>(), c.at("min_pts").get<std::size_t>()};
        s.outlier_rate = c.at("outlier_rate").get<double>();
        s.n_clusters = c.at("n_clusters").get<std::size_t>();
        if (!c.at("mean_ari").is_null()) s.mean_ari = c.at("mean_ari").get<double>();
        s.valid = c.at("valid").get<bool>();
        r.candidates.push_back(s);
    }
    if (!doc.at("chosen").is_null()) {
        r.chosen = DbscanParams{doc.at("chosen").at("eps").get<double>(), doc.at("chosen").at("min_pts").get<std::size_t>()};
    }
    r.fallback_used = doc.at("fallback_used").get<bool>();
    return r;
}

void save_prototype_store(const PrototypeStore& store, const fs::path& json_path, const json& config) {
    store.validate();
    std::vector<Embedding> rows;
    json entries = json::array();
    for (const auto& [key, list] : store.all()) {
        for (const auto& e : list) {
            entries.push_back({{"subject", key.subject},
                               {"class", store.classes().label(key.cls)},
                               {"row", rows.size()},
                               {"cluster_size", e.cluster_size},
                               {"eps", e.meta.eps},
                               {"min_pts", e.meta.min_pts},
                               {"stability", e.meta.stability},
                               {"fallback", e.meta.fallback}});
            rows.push_back(e.vector);
        }
    }
    json reports = json::array();
    for (const auto& [key, r] : store.reports()) {
        json jr = report_to_json(r);
        jr["subject"] = key.subject;
        jr["class"] = store.classes().label(key.cls);
        reports.push_back(std::move(jr));
    }
    const fs::path blob = blob_path_for(json_path);
    write_f32_matrix(blob, rows);
    json doc = {{"format", kProtoStoreFormat},
                {"dim", store.dim()},
                {"classes", store.classes().labels()},
                {"blob", blob.filename().string()},
                {"rows", rows.size()},
                {"entries", std::move(entries)},
                {"reports", std::move(reports)}};
    if (!config.is_null()) doc["config"] = config;
    write_json(json_path, doc);
}

PrototypeStore load_prototype_store(const fs::path& json_path) {
    const json doc = read_json(json_path);
    const std::string where = json_path.string();
    try {
        if (!doc.is_object() || !doc.contains("format")) {
            throw Error(ErrorKind::Version, where + ": missing format tag");
        }
        check_format(doc, kProtoStoreFormat, where);
        const std::size_t dim = get_count(doc, "dim", where);
        PrototypeStore store(dim, parse_classes(doc, where));
        const std::size_t n_rows = get_count(doc, "rows", where);
        const fs::path blob = json_path.parent_path() / get_string(doc, "blob", where);
        std::error_code ec;
        const auto size = fs::file_size(blob, ec);
        if (ec) throw Error(ErrorKind::MissingFile, "prototype blob not found: " + blob.string());
        if (size != n_rows * dim * 4) {
            throw Error(ErrorKind::SizeMismatch, "prototype blob " + blob.string() + " is truncated or oversized (" +
                                                     std::to_string(size) + " bytes, expected " +
                                                     std::to_string(n_rows * dim * 4) + ")");
        }
        const auto rows = read_f32_matrix(blob, n_rows, dim);
        for (const auto& e : doc.at("entries")) {
            const std::size_t row = get_count(e, "row", where);
            if (row >= rows.size()) throw Error(ErrorKind::SizeMismatch, where + ": entry row out of range");
            PrototypeEntry entry;
            entry.vector = rows[row];
            entry.cluster_size = get_count(e, "cluster_size", where);
            entry.meta.eps = get_number(e, "eps", where);
            entry.meta.min_pts = get_count(e, "min_pts", where);
            entry.meta.stability = get_number(e, "stability", where);
            entry.meta.fallback = e.at("fallback").get<bool>();
            store.add(get_string(e, "subject", where), store.classes().index_of(get_string(e, "class", where)),
                      std::move(entry));
        }
        if (doc.contains("reports")) {
            for (const auto& r : doc.at("reports")) {
                store.set_report(get_string(r, "subject", where),
                                 store.classes().index_of(get_string(r, "class", where)), report_from_json(r));
            }
        }
        store.validate();
        return store;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, where + ": " + e.what());
    }
}

}  // namespace tricache
