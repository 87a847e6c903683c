#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tricache/engine.hpp"
#include "tricache/framelog.hpp"
#include "tricache/personalize.hpp"
#include "tricache/prototypes.hpp"

namespace tricache {

inline constexpr const char* kEvalReportFormat = "tricache-eval/1";
inline constexpr const char* kAblationFormat = "tricache-ablation/1";

// Rows are truth, columns are prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t n_classes = 0);

    void add(ClassIndex truth, ClassIndex predicted, std::size_t count = 1);
    std::size_t at(ClassIndex truth, ClassIndex predicted) const { return counts_.at(truth * n_ + predicted); }
    std::size_t n_classes() const noexcept { return n_; }
    std::size_t total() const noexcept { return total_; }
    std::size_t support(ClassIndex truth) const;
    std::size_t predicted(ClassIndex c) const;
    std::size_t trace() const;

    nlohmann::json to_json() const;

private:
    std::size_t n_;
    std::vector<std::size_t> counts_;
    std::size_t total_ = 0;
};

// All four throw InvalidInput on an empty matrix.
double war(const ConfusionMatrix& cm);
double uar(const ConfusionMatrix& cm);  // zero-support classes excluded
double weighted_f1(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

struct ScoredPrediction {
    double confidence = 0.0;
    bool correct = false;
};

struct ReliabilityBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double confidence = 0.0;  // mean over the bin, 0 when empty
    double accuracy = 0.0;
};

struct ReliabilityReport {
    std::vector<ReliabilityBin> bins;
    std::size_t n = 0;
    double ece = 0.0;
};

inline constexpr std::size_t kReliabilityBins = 10;

// Equal-width bins [0,0.1), ..., [0.9,1.0]; confidence 1.0 lands in the last.
ReliabilityReport reliability(std::span<const ScoredPrediction> predictions, std::size_t n_bins = kReliabilityBins);
nlohmann::json to_json(const ReliabilityReport& r);

struct GateStats {
    std::size_t frames = 0;
    std::size_t temporal = 0;
    std::size_t entropy_pass = 0;      // mode != REJECT
    std::size_t entropy_positive = 0;  // raw entropy routing, regardless of other gates
    std::size_t entropy_negative = 0;
    std::size_t proto_reached = 0;
    std::size_t proto_reached_pass = 0;
    std::size_t proto_pass = 0;  // includes passes of a disabled gate
    std::size_t joint = 0;
    std::size_t admitted_positive = 0;
    std::size_t admitted_negative = 0;

    void add(const FrameDecision& d);
    GateStats& operator+=(const GateStats& other);
    nlohmann::json to_json() const;
};

GateStats gate_stats(std::span<const FrameDecision> frames);

struct SubjectScore {
    std::string subject;
    std::size_t videos = 0;
    ConfusionMatrix confusion;
    double war = 0.0;
    double uar = 0.0;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
};

struct MeanScores {
    double war = 0.0;
    double uar = 0.0;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
};

struct EvalReport {
    std::vector<SubjectScore> targets;  // first-appearance order
    MeanScores mean;                    // mean over targets
    ReliabilityReport calibration;
    GateStats gates;
};

// Truth comes from the manifest's video labels. Unknown subjects or videos
// and unlabeled videos are Validation errors.
EvalReport evaluate(const Manifest& manifest, std::span<const LoggedVideo> videos);
EvalReport evaluate(const Manifest& manifest, std::span<const SubjectRun> runs);
nlohmann::json to_json(const EvalReport& report, const ClassSet& classes);

// Everything needed to go from a prototype store to per-target runs.
struct PipelineConfig {
    PersonalizeOptions personalize;
    EngineConfig engine;
};

nlohmann::json to_json(const PipelineConfig& cfg);

// Runs every target subject of the manifest (targets in parallel, results in
// manifest order). `protos` may be null when the variant has no static cache.
std::vector<SubjectRun> run_targets(const Manifest& manifest, const AnchorSet& anchors, const PrototypeStore* protos,
                                    const PipelineConfig& cfg, std::size_t jobs = 1);

// Engine keys as emitted by to_json(EngineConfig); unknown keys are rejected.
void apply_engine_overrides(EngineConfig& cfg, const nlohmann::json& overrides);

struct AblationRow {
    std::string name;
    GateToggles gates;
    CacheVariant variant = CacheVariant::Both;
    Extractor extractor = Extractor::Dbscan;
    nlohmann::json overrides = nlohmann::json::object();
};

// The five gate subsets (T,E,P) = 010, 110, 101, 011, 111.
std::vector<AblationRow> gate_subset_rows();
// none, static, dynamic, both.
std::vector<AblationRow> cache_variant_rows();
// dbscan vs kmeans1 under the full configuration.
std::vector<AblationRow> extractor_rows();

// Accepts an array of rows, {"rows": [...]}, or {"preset": "gates"|"caches"|
// "extractors"|"all"}.
std::vector<AblationRow> parse_ablation_grid(const nlohmann::json& grid);
nlohmann::json to_json(const AblationRow& row);

struct AblationResult {
    AblationRow row;
    EvalReport report;
};

// `dbscan_store` is reused for dbscan rows when given; otherwise each
// needed extractor's store is built once from the manifest.
std::vector<AblationResult> run_ablation(const Manifest& manifest, const AnchorSet& anchors,
                                         std::span<const AblationRow> rows, const PipelineConfig& base,
                                         const ProtoBuildOptions& proto_options, std::size_t jobs = 1,
                                         const PrototypeStore* dbscan_store = nullptr);

// Columns: row,name,gate_temporal,gate_entropy,gate_prototype,cache,extractor,
// target,videos,war,uar,weighted_f1,macro_f1. One line per (row, target) and
// a final "mean" line per row.
void write_ablation_csv(std::ostream& out, std::span<const AblationResult> results);
nlohmann::json ablation_json(std::span<const AblationResult> results, const nlohmann::json& config);

}  // namespace tricache
