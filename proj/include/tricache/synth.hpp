#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

namespace tricache {

inline constexpr const char* kSynthConfigFormat = "tricache-synth/1";

// Per-subject shifted class clusters with AR(1) frame noise. Class 0 is
// "neutral" and every target video of that class is an anchor video.
struct SynthConfig {
    std::size_t dim = 64;
    std::size_t n_classes = 2;
    std::size_t n_source = 8;
    std::size_t n_target = 4;
    std::size_t frames_per_video = 24;
    std::size_t videos_per_subject_per_class = 4;
    double subject_shift = 0.3;
    double target_extra_shift = 0.5;
    double noise_sigma = 0.12;
    double ar_rho = 0.7;
    double logit_scale = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& doc);

struct SynthSummary {
    std::size_t subjects = 0;
    std::size_t videos = 0;
    std::size_t frames = 0;
};

// Writes manifest.json, anchors.json/.f32, synth_config.json and
// emb/<subject>_<video>.f32 under `out`. Output bytes depend only on cfg.
SynthSummary generate(const SynthConfig& cfg, const std::filesystem::path& out);

}  // namespace tricache
