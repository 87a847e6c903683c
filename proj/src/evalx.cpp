#include "tricache/evalx.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "tricache/parallel.hpp"

namespace tricache {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(std::size_t n_classes) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

void ConfusionMatrix::add(ClassIndex truth, ClassIndex predicted, std::size_t count) {
    if (truth >= n_ || predicted >= n_) throw Error(ErrorKind::InvalidInput, "confusion matrix: class out of range");
    counts_[truth * n_ + predicted] += count;
    total_ += count;
}

std::size_t ConfusionMatrix::support(ClassIndex truth) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
    return s;
}

std::size_t ConfusionMatrix::predicted(ClassIndex c) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < n_; ++t) s += at(t, c);
    return s;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t s = 0;
    for (std::size_t c = 0; c < n_; ++c) s += at(c, c);
    return s;
}

json ConfusionMatrix::to_json() const {
    json rows = json::array();
    for (std::size_t t = 0; t < n_; ++t) {
        json row = json::array();
        for (std::size_t p = 0; p < n_; ++p) row.push_back(at(t, p));
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

void require_nonempty(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error(ErrorKind::InvalidInput, "metrics need a non-empty confusion matrix");
}

double f1_of(const ConfusionMatrix& cm, ClassIndex c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const std::size_t pred = cm.predicted(c);
    const std::size_t sup = cm.support(c);
    const double precision = pred == 0 ? 0.0 : tp / static_cast<double>(pred);
    const double recall = sup == 0 ? 0.0 : tp / static_cast<double>(sup);
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double war(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

double uar(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double sum = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < cm.n_classes(); ++c) {
        const std::size_t sup = cm.support(c);
        if (sup == 0) continue;
        sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(sup);
        ++classes;
    }
    return sum / static_cast<double>(classes);
}

double weighted_f1(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double sum = 0.0;
    for (std::size_t c = 0; c < cm.n_classes(); ++c) {
        sum += static_cast<double>(cm.support(c)) / static_cast<double>(cm.total()) * f1_of(cm, c);
    }
    return sum;
}

double macro_f1(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double sum = 0.0;
    for (std::size_t c = 0; c < cm.n_classes(); ++c) sum += f1_of(cm, c);
    return sum / static_cast<double>(cm.n_classes());
}

ReliabilityReport reliability(std::span<const ScoredPrediction> predictions, std::size_t n_bins) {
    if (n_bins == 0) throw Error(ErrorKind::InvalidInput, "reliability needs at least one bin");
    ReliabilityReport r;
    r.n = predictions.size();
    r.bins.resize(n_bins);
    std::vector<double> conf_sum(n_bins, 0.0);
    std::vector<std::size_t> correct(n_bins, 0);
    for (std::size_t b = 0; b < n_bins; ++b) {
        r.bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
        r.bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    }
    for (const auto& p : predictions) {
        if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
            throw Error(ErrorKind::InvalidInput, "confidence outside [0, 1]");
        }
        auto b = static_cast<std::size_t>(p.confidence * static_cast<double>(n_bins));
        b = std::min(b, n_bins - 1);
        ++r.bins[b].count;
        conf_sum[b] += p.confidence;
        if (p.correct) ++correct[b];
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
        auto& bin = r.bins[b];
        if (bin.count == 0) continue;
        const double n = static_cast<double>(bin.count);
        bin.confidence = conf_sum[b] / n;
        bin.accuracy = static_cast<double>(correct[b]) / n;
        r.ece += n / static_cast<double>(r.n) * std::abs(bin.accuracy - bin.confidence);
    }
    return r;
}

json to_json(const ReliabilityReport& r) {
    json bins = json::array();
    for (const auto& b : r.bins) {
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"confidence", b.confidence},
                        {"accuracy", b.accuracy}});
    }
    return {{"n", r.n}, {"ece", r.ece}, {"bins", std::move(bins)}};
}

void GateStats::add(const FrameDecision& d) {
    const GateVerdict& v = d.verdict;
    ++frames;
    if (v.temporal_pass) ++temporal;
    if (v.entropy_mode != EntropyMode::Reject) ++entropy_pass;
    if (v.entropy_mode == EntropyMode::Positive) ++entropy_positive;
    if (v.entropy_mode == EntropyMode::Negative) ++entropy_negative;
    if (v.proto_reached) {
        ++proto_reached;
        if (v.proto_pass) ++proto_reached_pass;
    }
    if (v.proto_pass) ++proto_pass;
    if (v.admitted != Admission::None) ++joint;
    if (v.admitted == Admission::Positive) ++admitted_positive;
    if (v.admitted == Admission::Negative) ++admitted_negative;
}

GateStats& GateStats::operator+=(const GateStats& o) {
    frames += o.frames;
    temporal += o.temporal;
    entropy_pass += o.entropy_pass;
    entropy_positive += o.entropy_positive;
    entropy_negative += o.entropy_negative;
    proto_reached += o.proto_reached;
    proto_reached_pass += o.proto_reached_pass;
    proto_pass += o.proto_pass;
    joint += o.joint;
    admitted_positive += o.admitted_positive;
    admitted_negative += o.admitted_negative;
    return *this;
}

json GateStats::to_json() const {
    auto pct = [this](std::size_t count) {
        return frames == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(frames);
    };
    const double reached_pct =
        proto_reached == 0 ? 0.0 : 100.0 * static_cast<double>(proto_reached_pass) / static_cast<double>(proto_reached);
    return {{"frames", frames},
            {"counts",
             {{"temporal", temporal},
              {"entropy_pass", entropy_pass},
              {"entropy_positive", entropy_positive},
              {"entropy_negative", entropy_negative},
              {"proto_reached", proto_reached},
              {"proto_reached_pass", proto_reached_pass},
              {"proto_pass", proto_pass},
              {"joint", joint},
              {"admitted_positive", admitted_positive},
              {"admitted_negative", admitted_negative}}},
            {"percent",
             {{"temporal", pct(temporal)},
              {"entropy_pass", pct(entropy_pass)},
              {"proto_pass", pct(proto_pass)},
              {"proto_pass_among_reached", reached_pct},
              {"joint", pct(joint)},
              {"admitted_positive", pct(admitted_positive)},
              {"admitted_negative", pct(admitted_negative)}}}};
}

GateStats gate_stats(std::span<const FrameDecision> frames) {
    GateStats s;
    for (const auto& f : frames) s.add(f);
    return s;
}

namespace {

struct VideoRef {
    const std::string* subject;
    const VideoDecision* decision;
};

EvalReport evaluate_refs(const Manifest& manifest, const std::vector<VideoRef>& videos) {
    EvalReport report;
    std::map<std::string, std::size_t> slot;
    std::vector<ScoredPrediction> scored;
    for (const auto& ref : videos) {
        const SubjectRecord* subject = manifest.find_subject(*ref.subject);
        if (subject == nullptr) throw Error(ErrorKind::Validation, "log references unknown subject '" + *ref.subject + "'");
        const VideoRecord* record = nullptr;
        for (const auto& v : subject->videos) {
            if (v.id == ref.decision->video_id) record = &v;
        }
        if (record == nullptr) {
            throw Error(ErrorKind::Validation,
                        "log references unknown video '" + *ref.subject + "/" + ref.decision->video_id + "'");
        }
        if (!record->label) {
            throw Error(ErrorKind::Validation,
                        "video '" + *ref.subject + "/" + record->id + "' has no truth label");
        }
        const ClassIndex truth = manifest.classes.index_of(*record->label);
        if (ref.decision->label >= manifest.classes.size()) {
            throw Error(ErrorKind::Validation, "log predicts a class outside the manifest's class set");
        }
        auto [it, fresh] = slot.try_emplace(*ref.subject, report.targets.size());
        if (fresh) {
            SubjectScore s;
            s.subject = *ref.subject;
            s.confusion = ConfusionMatrix(manifest.classes.size());
            report.targets.push_back(std::move(s));
        }
        SubjectScore& s = report.targets[it->second];
        s.confusion.add(truth, ref.decision->label);
        ++s.videos;
        scored.push_back({ref.decision->confidence, truth == ref.decision->label});
        for (const auto& f : ref.decision->frames) report.gates.add(f);
    }
    for (auto& s : report.targets) {
        s.war = war(s.confusion);
        s.uar = uar(s.confusion);
        s.weighted_f1 = weighted_f1(s.confusion);
        s.macro_f1 = macro_f1(s.confusion);
        report.mean.war += s.war;
        report.mean.uar += s.uar;
        report.mean.weighted_f1 += s.weighted_f1;
        report.mean.macro_f1 += s.macro_f1;
    }
    if (!report.targets.empty()) {
        const double n = static_cast<double>(report.targets.size());
        report.mean.war /= n;
        report.mean.uar /= n;
        report.mean.weighted_f1 /= n;
        report.mean.macro_f1 /= n;
    }
    report.calibration = reliability(scored);
    return report;
}

json scores_json(double war_v, double uar_v, double wf1, double mf1) {
    return {{"war", war_v}, {"uar", uar_v}, {"weighted_f1", wf1}, {"macro_f1", mf1}};
}

}  // namespace

EvalReport evaluate(const Manifest& manifest, std::span<const LoggedVideo> videos) {
    std::vector<VideoRef> refs;
    for (const auto& v : videos) refs.push_back({&v.subject, &v.decision});
    return evaluate_refs(manifest, refs);
}

EvalReport evaluate(const Manifest& manifest, std::span<const SubjectRun> runs) {
    std::vector<VideoRef> refs;
    for (const auto& r : runs)
        for (const auto& v : r.videos) refs.push_back({&r.subject, &v});
    return evaluate_refs(manifest, refs);
}

json to_json(const EvalReport& report, const ClassSet& classes) {
    json targets = json::array();
    for (const auto& s : report.targets) {
        json t = scores_json(s.war, s.uar, s.weighted_f1, s.macro_f1);
        t["subject"] = s.subject;
        t["videos"] = s.videos;
        t["confusion"] = s.confusion.to_json();
        targets.push_back(std::move(t));
    }
    return {{"format", kEvalReportFormat},
            {"classes", classes.labels()},
            {"targets", std::move(targets)},
            {"mean", scores_json(report.mean.war, report.mean.uar, report.mean.weighted_f1, report.mean.macro_f1)},
            {"calibration", to_json(report.calibration)},
            {"gates", report.gates.to_json()}};
}

json to_json(const PipelineConfig& cfg) {
    json j = to_json(cfg.engine);
    j["anchor_class"] = cfg.personalize.anchor_class;
    j["top_m"] = cfg.personalize.top_m;
    j["cap_k"] = cfg.personalize.cap_k;
    return j;
}

std::vector<SubjectRun> run_targets(const Manifest& manifest, const AnchorSet& anchors, const PrototypeStore* protos,
                                    const PipelineConfig& cfg, std::size_t jobs) {
    if (!(anchors.classes == manifest.classes)) {
        throw Error(ErrorKind::Validation, "anchor classes do not match the manifest classes");
    }
    const auto targets = manifest.subjects_with_role(SubjectRole::Target);
    const bool with_static = uses_static(cfg.engine.variant);
    if (with_static && protos == nullptr) {
        throw Error(ErrorKind::InvalidInput, "a prototype store is needed for the static source cache");
    }
    auto shared_anchors = std::make_shared<const ClassAnchors>(anchors.anchors);
    std::vector<std::optional<SubjectRun>> runs(targets.size());
    parallel_for(targets.size(), jobs, [&](std::size_t i) {
        std::shared_ptr<const PersonalizedSourceCache> source;
        if (with_static) {
            const auto anchor_frames = collect_anchor_frames(manifest, *targets[i]);
            source = std::make_shared<const PersonalizedSourceCache>(
                build_personalized_cache(targets[i]->id, anchor_frames, *protos, cfg.personalize));
        }
        runs[i] = run_subject(cfg.engine, manifest, *targets[i], shared_anchors, std::move(source));
    });
    std::vector<SubjectRun> out;
    out.reserve(runs.size());
    for (auto& r : runs) out.push_back(std::move(*r));
    return out;
}

void apply_engine_overrides(EngineConfig& cfg, const json& overrides) {
    if (!overrides.is_object()) throw Error(ErrorKind::Validation, "engine overrides must be an object");
    try {
        for (const auto& [key, value] : overrides.items()) {
            if (key == "window_w") cfg.gate.window_w = value.get<std::size_t>();
            else if (key == "tau_h_pos") cfg.gate.tau_h_pos = value.get<double>();
            else if (key == "tau_h_neg") cfg.gate.tau_h_neg = value.get<double>();
            else if (key == "tau_delta") cfg.gate.tau_delta = value.get<double>();
            else if (key == "proto_top_k") cfg.gate.proto_top_k = value.get<std::size_t>();
            else if (key == "gate_temporal") cfg.gates.temporal = value.get<bool>();
            else if (key == "gate_entropy") cfg.gates.entropy = value.get<bool>();
            else if (key == "gate_prototype") cfg.gates.prototype = value.get<bool>();
            else if (key == "pos_capacity") cfg.pos_capacity = value.get<std::size_t>();
            else if (key == "neg_capacity") cfg.neg_capacity = value.get<std::size_t>();
            else if (key == "retrieval_r") cfg.retrieval_r = value.get<std::size_t>();
            else if (key == "alpha_src") cfg.fusion.source = value.get<double>();
            else if (key == "alpha_pos") cfg.fusion.positive = value.get<double>();
            else if (key == "alpha_neg") cfg.fusion.negative = value.get<double>();
            else if (key == "pool_window") cfg.pool_window = value.get<std::size_t>();
            else if (key == "neg_label_filter") cfg.neg_label_filter = value.get<bool>();
            else if (key == "cache_variant") cfg.variant = parse_cache_variant(value.get<std::string>());
            else if (key == "reset_scope") cfg.reset_scope = parse_reset_scope(value.get<std::string>());
            else throw Error(ErrorKind::Validation, "unknown engine override '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("bad engine override: ") + e.what());
    }
    cfg.validate();
}

namespace {

AblationRow make_row(std::string name, bool t, bool e, bool p, CacheVariant variant, Extractor ex) {
    AblationRow r;
    r.name = std::move(name);
    r.gates = {t, e, p};
    r.variant = variant;
    r.extractor = ex;
    return r;
}

}  // namespace

std::vector<AblationRow> gate_subset_rows() {
    return {make_row("entropy", false, true, false, CacheVariant::Both, Extractor::Dbscan),
            make_row("temporal+entropy", true, true, false, CacheVariant::Both, Extractor::Dbscan),
            make_row("temporal+prototype", true, false, true, CacheVariant::Both, Extractor::Dbscan),
            make_row("entropy+prototype", false, true, true, CacheVariant::Both, Extractor::Dbscan),
            make_row("tri-gate", true, true, true, CacheVariant::Both, Extractor::Dbscan)};
}

std::vector<AblationRow> cache_variant_rows() {
    return {make_row("cache-none", true, true, true, CacheVariant::None, Extractor::Dbscan),
            make_row("cache-static", true, true, true, CacheVariant::StaticOnly, Extractor::Dbscan),
            make_row("cache-dynamic", true, true, true, CacheVariant::DynamicOnly, Extractor::Dbscan),
            make_row("cache-both", true, true, true, CacheVariant::Both, Extractor::Dbscan)};
}

std::vector<AblationRow> extractor_rows() {
    return {make_row("extractor-dbscan", true, true, true, CacheVariant::Both, Extractor::Dbscan),
            make_row("extractor-kmeans1", true, true, true, CacheVariant::Both, Extractor::KMeans1)};
}

json to_json(const AblationRow& row) {
    return {{"name", row.name},
            {"gates", {{"temporal", row.gates.temporal}, {"entropy", row.gates.entropy}, {"prototype", row.gates.prototype}}},
            {"cache", to_string(row.variant)},
            {"extractor", to_string(row.extractor)},
            {"overrides", row.overrides}};
}

namespace {

std::vector<AblationRow> preset_rows(const std::string& preset) {
    if (preset == "gates") return gate_subset_rows();
    if (preset == "caches") return cache_variant_rows();
    if (preset == "extractors") return extractor_rows();
    if (preset == "all") {
        auto rows = gate_subset_rows();
        for (auto& r : cache_variant_rows()) rows.push_back(std::move(r));
        for (auto& r : extractor_rows()) rows.push_back(std::move(r));
        return rows;
    }
    throw Error(ErrorKind::Validation, "unknown ablation preset '" + preset + "' (gates|caches|extractors|all)");
}

AblationRow parse_row(const json& j, std::size_t index) {
    const std::string where = "grid row " + std::to_string(index);
    if (!j.is_object()) throw Error(ErrorKind::Validation, where + ": must be an object");
    AblationRow row;
    row.name = j.value("name", "row" + std::to_string(index));
    if (j.contains("gates")) {
        const json& g = j.at("gates");
        if (!g.is_object()) throw Error(ErrorKind::Validation, where + ": gates must be an object");
        for (const auto& [key, value] : g.items()) {
            if (!value.is_boolean()) throw Error(ErrorKind::Validation, where + ": gate '" + key + "' must be boolean");
            if (key == "temporal") row.gates.temporal = value.get<bool>();
            else if (key == "entropy") row.gates.entropy = value.get<bool>();
            else if (key == "prototype") row.gates.prototype = value.get<bool>();
            else throw Error(ErrorKind::Validation, where + ": unknown gate '" + key + "'");
        }
    }
    if (j.contains("cache")) row.variant = parse_cache_variant(j.at("cache").get<std::string>());
    if (j.contains("extractor")) row.extractor = parse_extractor(j.at("extractor").get<std::string>());
    if (j.contains("overrides")) {
        row.overrides = j.at("overrides");
        EngineConfig probe;
        apply_engine_overrides(probe, row.overrides);
    }
    for (const auto& [key, value] : j.items()) {
        if (key != "name" && key != "gates" && key != "cache" && key != "extractor" && key != "overrides") {
            throw Error(ErrorKind::Validation, where + ": unknown key '" + key + "'");
        }
    }
    return row;
}

}  // namespace

std::vector<AblationRow> parse_ablation_grid(const json& grid) {
    try {
        if (grid.is_object() && grid.contains("preset")) return preset_rows(grid.at("preset").get<std::string>());
        const json& rows = grid.is_object() && grid.contains("rows") ? grid.at("rows") : grid;
        if (!rows.is_array() || rows.empty()) throw Error(ErrorKind::Validation, "ablation grid has no rows");
        std::vector<AblationRow> out;
        for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(parse_row(rows[i], i));
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("ablation grid: ") + e.what());
    }
}

std::vector<AblationResult> run_ablation(const Manifest& manifest, const AnchorSet& anchors,
                                         std::span<const AblationRow> rows, const PipelineConfig& base,
                                         const ProtoBuildOptions& proto_options, std::size_t jobs,
                                         const PrototypeStore* dbscan_store) {
    std::optional<PrototypeStore> built_dbscan;
    std::optional<PrototypeStore> built_kmeans;
    auto store_for = [&](Extractor e) -> const PrototypeStore* {
        if (e == Extractor::Dbscan) {
            if (dbscan_store != nullptr) return dbscan_store;
            if (!built_dbscan) {
                ProtoBuildOptions o = proto_options;
                o.extractor = Extractor::Dbscan;
                o.jobs = jobs;
                built_dbscan = build_prototype_store(manifest, o);
            }
            return &*built_dbscan;
        }
        if (!built_kmeans) {
            ProtoBuildOptions o = proto_options;
            o.extractor = Extractor::KMeans1;
            o.jobs = jobs;
            built_kmeans = build_prototype_store(manifest, o);
        }
        return &*built_kmeans;
    };

    std::vector<const PrototypeStore*> stores;
    std::vector<PipelineConfig> configs;
    for (const auto& row : rows) {
        PipelineConfig cfg = base;
        cfg.engine.gates = row.gates;
        cfg.engine.variant = row.variant;
        apply_engine_overrides(cfg.engine, row.overrides);
        stores.push_back(uses_static(cfg.engine.variant) ? store_for(row.extractor) : nullptr);
        configs.push_back(std::move(cfg));
    }

    std::vector<std::optional<AblationResult>> results(rows.size());
    parallel_for(rows.size(), jobs, [&](std::size_t i) {
        const auto runs = run_targets(manifest, anchors, stores[i], configs[i], 1);
        results[i] = AblationResult{rows[i], evaluate(manifest, std::span<const SubjectRun>(runs))};
    });
    std::vector<AblationResult> out;
    out.reserve(results.size());
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

namespace {

std::string fixed6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

void write_ablation_csv(std::ostream& out, std::span<const AblationResult> results) {
    out << "row,name,gate_temporal,gate_entropy,gate_prototype,cache,extractor,target,videos,war,uar,weighted_f1,"
           "macro_f1\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& row = results[i].row;
        const std::string prefix = std::to_string(i) + "," + csv_field(row.name) + "," +
                                   std::to_string(int(row.gates.temporal)) + "," +
                                   std::to_string(int(row.gates.entropy)) + "," +
                                   std::to_string(int(row.gates.prototype)) + "," + to_string(row.variant) + "," +
                                   to_string(row.extractor) + ",";
        std::size_t videos = 0;
        for (const auto& s : results[i].report.targets) {
            videos += s.videos;
            out << prefix << csv_field(s.subject) << ',' << s.videos << ',' << fixed6(s.war) << ',' << fixed6(s.uar)
                << ',' << fixed6(s.weighted_f1) << ',' << fixed6(s.macro_f1) << '\n';
        }
        const auto& m = results[i].report.mean;
        out << prefix << "mean," << videos << ',' << fixed6(m.war) << ',' << fixed6(m.uar) << ','
            << fixed6(m.weighted_f1) << ',' << fixed6(m.macro_f1) << '\n';
    }
}

json ablation_json(std::span<const AblationResult> results, const json& config) {
    json rows = json::array();
    for (const auto& r : results) {
        json targets = json::array();
        for (const auto& s : r.report.targets) {
            json t = scores_json(s.war, s.uar, s.weighted_f1, s.macro_f1);
            t["subject"] = s.subject;
            t["videos"] = s.videos;
            targets.push_back(std::move(t));
        }
        rows.push_back({{"config", to_json(r.row)},
                        {"targets", std::move(targets)},
                        {"mean", scores_json(r.report.mean.war, r.report.mean.uar, r.report.mean.weighted_f1,
                                             r.report.mean.macro_f1)},
                        {"ece", r.report.calibration.ece},
                        {"gates", r.report.gates.to_json()}});
    }
    return {{"format", kAblationFormat}, {"config", config}, {"rows", std::move(rows)}};
}

}  // namespace tricache
