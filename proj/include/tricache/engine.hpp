#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tricache/caches.hpp"
#include "tricache/core.hpp"
#include "tricache/gates.hpp"
#include "tricache/personalize.hpp"
#include "tricache/store.hpp"

namespace tricache {

inline constexpr double kFusionFallbackNorm = 1e-9;

// Which caches take part: the static personalized source cache (fusion
// term and prototype gate) and the dynamic positive/negative caches.
enum class CacheVariant { None, StaticOnly, DynamicOnly, Both };
enum class ResetScope { Subject, Video };

const char* to_string(CacheVariant v);
CacheVariant parse_cache_variant(const std::string& s);
const char* to_string(ResetScope s);
ResetScope parse_reset_scope(const std::string& s);

inline bool uses_static(CacheVariant v) { return v == CacheVariant::StaticOnly || v == CacheVariant::Both; }
inline bool uses_dynamic(CacheVariant v) { return v == CacheVariant::DynamicOnly || v == CacheVariant::Both; }

struct FusionWeights {
    double source = 1.0;
    double positive = 1.0;
    double negative = 1.0;
};

struct EngineConfig {
    GateConfig gate;
    GateToggles gates;
    std::size_t pos_capacity = 5;
    std::size_t neg_capacity = 4;
    std::size_t retrieval_r = 3;
    FusionWeights fusion;
    std::size_t pool_window = 0;  // 0: same as gate.window_w
    bool neg_label_filter = false;
    CacheVariant variant = CacheVariant::Both;
    ResetScope reset_scope = ResetScope::Subject;

    std::size_t effective_pool_window() const { return pool_window == 0 ? gate.window_w : pool_window; }
    void validate() const;
};

nlohmann::json to_json(const EngineConfig& cfg);

struct EvictionRecord {
    std::uint64_t seq = 0;
    ClassIndex label = 0;
    double entropy = 0.0;
    bool self = false;  // the entry just offered was the one evicted
};

struct CacheEvent {
    Admission admitted = Admission::None;
    std::optional<std::uint64_t> inserted_seq;
    std::optional<EvictionRecord> evicted;
};

struct FrameDecision {
    std::size_t t = 0;
    double pooled_norm = 0.0;  // norm of the pooled mean before normalization
    std::vector<double> base_logits;
    ClassIndex base_label = 0;
    double entropy = 0.0;
    GateVerdict verdict;
    CacheEvent event;
    bool has_src = false;
    bool has_pos = false;
    bool has_neg = false;
    bool fusion_fallback = false;
    std::vector<double> fused_logits;
    ClassIndex fused_label = 0;
};

struct VideoDecision {
    std::string video_id;
    std::vector<double> mean_logits;
    ClassIndex label = 0;
    double confidence = 0.0;  // max softmax of mean_logits
    std::vector<FrameDecision> frames;
};

// Mean of the frames, L2-normalized. Throws Degenerate on a zero mean.
Embedding pool_window(std::span<const Embedding> frames);

// z + a_src z_src + a_pos z_pos - a_neg z_neg, missing terms as zero,
// normalized. Falls back to z when the sum has norm < 1e-9.
Embedding fuse(std::span<const double> z, const std::optional<Embedding>& z_src, const std::optional<Embedding>& z_pos,
               const std::optional<Embedding>& z_neg, const FusionWeights& weights, bool* fell_back = nullptr);

// Averages frame logits; label = argmax (lowest index on ties).
VideoDecision aggregate_video(std::string video_id, std::vector<FrameDecision> frames);

// One adaptation stream. Target caches live as long as the engine (or
// until reset_caches); the pooling buffer and gate history are per video.
class Engine {
public:
    Engine(EngineConfig config, std::shared_ptr<const ClassAnchors> anchors,
           std::shared_ptr<const PersonalizedSourceCache> source);

    FrameDecision step(std::span<const double> frame);
    VideoDecision run_video(std::span<const Embedding> frames, std::string video_id = {});

    void begin_video();
    void reset_caches();

    const EngineConfig& config() const noexcept { return config_; }
    const TargetCache& positive() const noexcept { return positive_; }
    const TargetCache& negative() const noexcept { return negative_; }
    const std::deque<ClassIndex>& history() const noexcept { return history_; }

private:
    EngineConfig config_;
    std::shared_ptr<const ClassAnchors> anchors_;
    std::shared_ptr<const PersonalizedSourceCache> source_;
    TargetCache positive_;
    TargetCache negative_;
    std::deque<Embedding> buffer_;
    std::deque<ClassIndex> history_;
    std::size_t t_ = 0;
};

struct SubjectRun {
    std::string subject;
    std::vector<VideoDecision> videos;
    TargetCache positive;
    TargetCache negative;
};

// Runs every video of the subject in manifest order on a fresh engine.
SubjectRun run_subject(const EngineConfig& config, const Manifest& manifest, const SubjectRecord& subject,
                       std::shared_ptr<const ClassAnchors> anchors,
                       std::shared_ptr<const PersonalizedSourceCache> source);

}  // namespace tricache
