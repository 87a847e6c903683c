#include "tricache/engine.hpp"

#include <algorithm>

namespace tricache {

using nlohmann::json;

const char* to_string(CacheVariant v) {
    switch (v) {
        case CacheVariant::None: return "none";
        case CacheVariant::StaticOnly: return "static";
        case CacheVariant::DynamicOnly: return "dynamic";
        case CacheVariant::Both: return "both";
    }
    return "?";
}

CacheVariant parse_cache_variant(const std::string& s) {
    if (s == "none") return CacheVariant::None;
    if (s == "static") return CacheVariant::StaticOnly;
    if (s == "dynamic") return CacheVariant::DynamicOnly;
    if (s == "both") return CacheVariant::Both;
    throw Error(ErrorKind::Validation, "unknown cache variant '" + s + "' (none|static|dynamic|both)");
}

const char* to_string(ResetScope s) { return s == ResetScope::Subject ? "subject" : "video"; }

ResetScope parse_reset_scope(const std::string& s) {
    if (s == "subject") return ResetScope::Subject;
    if (s == "video") return ResetScope::Video;
    throw Error(ErrorKind::Validation, "unknown reset scope '" + s + "' (subject|video)");
}

void EngineConfig::validate() const {
    gate.validate();
    if (pos_capacity == 0 || neg_capacity == 0) throw Error(ErrorKind::Validation, "cache capacities must be >= 1");
    if (retrieval_r == 0) throw Error(ErrorKind::Validation, "retrieval_r must be >= 1");
    if (!(fusion.source >= 0.0 && fusion.positive >= 0.0 && fusion.negative >= 0.0)) {
        throw Error(ErrorKind::Validation, "fusion weights must be nonnegative");
    }
}

json to_json(const EngineConfig& cfg) {
    return {{"window_w", cfg.gate.window_w},
            {"tau_h_pos", cfg.gate.tau_h_pos},
            {"tau_h_neg", cfg.gate.tau_h_neg},
            {"tau_delta", cfg.gate.tau_delta},
            {"proto_top_k", cfg.gate.proto_top_k},
            {"gate_temporal", cfg.gates.temporal},
            {"gate_entropy", cfg.gates.entropy},
            {"gate_prototype", cfg.gates.prototype},
            {"pos_capacity", cfg.pos_capacity},
            {"neg_capacity", cfg.neg_capacity},
            {"retrieval_r", cfg.retrieval_r},
            {"alpha_src", cfg.fusion.source},
            {"alpha_pos", cfg.fusion.positive},
            {"alpha_neg", cfg.fusion.negative},
            {"pool_window", cfg.effective_pool_window()},
            {"neg_label_filter", cfg.neg_label_filter},
            {"cache_variant", to_string(cfg.variant)},
            {"reset_scope", to_string(cfg.reset_scope)}};
}

Embedding pool_window(std::span<const Embedding> frames) {
    if (frames.empty()) throw Error(ErrorKind::InvalidInput, "pool_window: no frames");
    Embedding mean(frames.front().size(), 0.0);
    for (const auto& f : frames) {
        if (f.size() != mean.size()) throw Error(ErrorKind::InvalidInput, "pool_window: dimension mismatch");
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += f[j];
    }
    for (double& x : mean) x /= static_cast<double>(frames.size());
    return normalize_or_throw(mean, "pooled embedding");
}

Embedding fuse(std::span<const double> z, const std::optional<Embedding>& z_src, const std::optional<Embedding>& z_pos,
               const std::optional<Embedding>& z_neg, const FusionWeights& weights, bool* fell_back) {
    Embedding sum(z.begin(), z.end());
    auto add = [&](const std::optional<Embedding>& v, double w) {
        if (!v) return;
        if (v->size() != sum.size()) throw Error(ErrorKind::InvalidInput, "fuse: dimension mismatch");
        for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += w * (*v)[j];
    };
    add(z_src, weights.source);
    add(z_pos, weights.positive);
    add(z_neg, -weights.negative);
    const bool fallback = l2_norm(sum) < kFusionFallbackNorm;
    if (fell_back != nullptr) *fell_back = fallback;
    if (fallback) return normalize_or_throw(z, "fusion input");
    return normalize_or_throw(sum, "fused embedding");
}

VideoDecision aggregate_video(std::string video_id, std::vector<FrameDecision> frames) {
    if (frames.empty()) throw Error(ErrorKind::InvalidInput, "video '" + video_id + "' has no frames");
    VideoDecision v;
    v.video_id = std::move(video_id);
    v.mean_logits.assign(frames.front().fused_logits.size(), 0.0);
    for (const auto& f : frames)
        for (std::size_t c = 0; c < v.mean_logits.size(); ++c) v.mean_logits[c] += f.fused_logits[c];
    for (double& x : v.mean_logits) x /= static_cast<double>(frames.size());
    v.label = argmax(v.mean_logits);
    const auto probs = softmax(v.mean_logits);
    v.confidence = *std::max_element(probs.begin(), probs.end());
    v.frames = std::move(frames);
    return v;
}

Engine::Engine(EngineConfig config, std::shared_ptr<const ClassAnchors> anchors,
               std::shared_ptr<const PersonalizedSourceCache> source)
    : config_(std::move(config)),
      anchors_(std::move(anchors)),
      source_(std::move(source)),
      positive_(Polarity::Positive, anchors_ ? anchors_->size() : 0, config_.pos_capacity),
      negative_(Polarity::Negative, anchors_ ? anchors_->size() : 0, config_.neg_capacity) {
    config_.validate();
    if (!anchors_) throw Error(ErrorKind::InvalidInput, "engine needs class anchors");
    if (source_) {
        if (source_->n_classes() != anchors_->size()) {
            throw Error(ErrorKind::Validation, "source cache class count does not match the anchors");
        }
        if (source_->dim() != anchors_->dim()) {
            throw Error(ErrorKind::Validation, "source cache dimension does not match the anchors");
        }
    } else if (uses_static(config_.variant)) {
        throw Error(ErrorKind::InvalidInput, "cache variant '" + std::string(to_string(config_.variant)) +
                                                 "' needs a personalized source cache");
    }
}

void Engine::begin_video() {
    buffer_.clear();
    history_.clear();
    t_ = 0;
    if (config_.reset_scope == ResetScope::Video) reset_caches();
}

void Engine::reset_caches() {
    positive_.clear();
    negative_.clear();
}

FrameDecision Engine::step(std::span<const double> frame) {
    if (frame.size() != anchors_->dim()) {
        throw Error(ErrorKind::InvalidInput, "frame dimension " + std::to_string(frame.size()) +
                                                 " does not match anchor dimension " + std::to_string(anchors_->dim()));
    }
    FrameDecision d;
    d.t = t_++;

    buffer_.emplace_back(frame.begin(), frame.end());
    while (buffer_.size() > config_.effective_pool_window()) buffer_.pop_front();
    Embedding mean(frame.size(), 0.0);
    for (const auto& f : buffer_)
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += f[j];
    for (double& x : mean) x /= static_cast<double>(buffer_.size());
    d.pooled_norm = l2_norm(mean);
    const Embedding z = normalize_or_throw(mean, "pooled embedding at frame " + std::to_string(d.t));

    const Classification base = classify(z, *anchors_);
    d.base_logits = base.logits;
    d.base_label = base.prediction.label;
    d.entropy = base.prediction.entropy;

    history_.push_back(d.base_label);
    while (history_.size() > config_.gate.window_w) history_.pop_front();
    const std::vector<ClassIndex> window(history_.begin(), history_.end());

    const bool with_static = uses_static(config_.variant);
    const bool with_dynamic = uses_dynamic(config_.variant);
    d.verdict = tri_gate({window, d.base_label, d.entropy, z}, with_static ? source_.get() : nullptr, config_.gate,
                         config_.gates);

    if (with_dynamic && d.verdict.admitted != Admission::None) {
        const bool pos = d.verdict.admitted == Admission::Positive;
        InsertReport r = pos ? positive_.insert(z, d.base_label, d.entropy)
                             : negative_.insert(z, argmin(d.base_logits), d.entropy);
        d.event.admitted = d.verdict.admitted;
        d.event.inserted_seq = r.seq;
        if (r.evicted) d.event.evicted = EvictionRecord{r.evicted->seq, r.evicted->label, r.evicted->entropy, !r.kept()};
    }

    std::optional<Embedding> z_src;
    std::optional<Embedding> z_pos;
    std::optional<Embedding> z_neg;
    if (with_static) z_src = retrieve_source(*source_, z, config_.retrieval_r);
    if (with_dynamic) {
        z_pos = positive_.retrieve(z, config_.retrieval_r);
        z_neg = negative_.retrieve(z, config_.retrieval_r,
                                   config_.neg_label_filter ? std::optional<ClassIndex>(d.base_label) : std::nullopt);
    }
    d.has_src = z_src.has_value();
    d.has_pos = z_pos.has_value();
    d.has_neg = z_neg.has_value();

    const Embedding fused = fuse(z, z_src, z_pos, z_neg, config_.fusion, &d.fusion_fallback);
    const Classification out = classify(fused, *anchors_);
    d.fused_logits = out.logits;
    d.fused_label = out.prediction.label;
    return d;
}

VideoDecision Engine::run_video(std::span<const Embedding> frames, std::string video_id) {
    if (frames.empty()) throw Error(ErrorKind::InvalidInput, "video '" + video_id + "' has no frames");
    begin_video();
    std::vector<FrameDecision> decisions;
    decisions.reserve(frames.size());
    for (const auto& f : frames) decisions.push_back(step(f));
    return aggregate_video(std::move(video_id), std::move(decisions));
}

SubjectRun run_subject(const EngineConfig& config, const Manifest& manifest, const SubjectRecord& subject,
                       std::shared_ptr<const ClassAnchors> anchors,
                       std::shared_ptr<const PersonalizedSourceCache> source) {
    if (anchors && anchors->dim() != manifest.dim) {
        throw Error(ErrorKind::Validation, "anchor dimension " + std::to_string(anchors->dim()) +
                                               " does not match manifest dimension " + std::to_string(manifest.dim));
    }
    Engine engine(config, std::move(anchors), std::move(source));
    SubjectRun run{subject.id, {}, engine.positive(), engine.negative()};
    for (const auto& video : subject.videos) {
        if (video.frames == 0) continue;
        const auto frames = load_embeddings(manifest, video);
        run.videos.push_back(engine.run_video(frames, video.id));
    }
    run.positive = engine.positive();
    run.negative = engine.negative();
    return run;
}

}  // namespace tricache
