#include <gtest/gtest.h>

#include <fstream>

#include "../support/oracles.hpp"
#include "tricache/evalx.hpp"
#include "tricache/synth.hpp"

using namespace tricache;

namespace {

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream f(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(f), {});
    }
    return out;
}

SynthConfig small() {
    SynthConfig c;
    c.dim = 12;
    c.n_source = 3;
    c.n_target = 2;
    c.frames_per_video = 10;
    c.videos_per_subject_per_class = 2;
    return c;
}

}  // namespace

TEST(Synth, SameSeedSameBytes) {
    auto a = oracle::scratch_dir("synth_a");
    auto b = oracle::scratch_dir("synth_b");
    SynthConfig cfg = small();
    cfg.seed = 99;
    generate(cfg, a);
    generate(cfg, b);
    EXPECT_EQ(tree_bytes(a), tree_bytes(b));
    cfg.seed = 100;
    auto c = oracle::scratch_dir("synth_c");
    generate(cfg, c);
    EXPECT_NE(tree_bytes(a), tree_bytes(c));
}

TEST(Synth, OutputPassesValidationWithExpectedShape) {
    auto dir = oracle::scratch_dir("synth_shape");
    SynthConfig cfg = small();
    auto summary = generate(cfg, dir);
    Manifest m = load_manifest(dir / "manifest.json");
    EXPECT_EQ(m.subjects.size(), 5u);
    EXPECT_EQ(summary.videos, 5u * 2 * 2);
    EXPECT_EQ(summary.frames, summary.videos * 10);
    for (const auto* t : m.subjects_with_role(SubjectRole::Target)) {
        for (const auto& v : t->videos) {
            EXPECT_EQ(v.anchor_range.has_value(), v.label == m.classes.label(0));
        }
    }
    for (const auto* s : m.subjects_with_role(SubjectRole::Source))
        for (const auto& v : s->videos) EXPECT_TRUE(v.frame_labels.has_value());
    EXPECT_EQ(m.classes.label(0), "neutral");
    EXPECT_EQ(synth_config_from_json(read_json(dir / "synth_config.json")).seed, cfg.seed);
}

TEST(Synth, ConfigValidation) {
    SynthConfig cfg;
    cfg.dim = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.n_classes = 1;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.ar_rho = 1.0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.noise_sigma = 0.0;
    EXPECT_THROW(cfg.validate(), Error);
    EXPECT_THROW(synth_config_from_json({{"dimension", 3}}), Error);
}

TEST(Synth, SeparableLimitClassifiesPerfectly) {
    auto dir = oracle::scratch_dir("synth_separable");
    SynthConfig cfg = small();
    cfg.subject_shift = 0.0;
    cfg.target_extra_shift = 0.0;
    cfg.noise_sigma = 1e-6;
    generate(cfg, dir);
    Manifest m = load_manifest(dir / "manifest.json");
    AnchorSet anchors = load_anchors(dir / "anchors.json");
    for (const auto& s : m.subjects) {
        for (const auto& v : s.videos) {
            const ClassIndex truth = m.classes.index_of(*v.label);
            for (const auto& f : load_embeddings(m, v)) ASSERT_EQ(classify(f, anchors.anchors).prediction.label, truth);
        }
    }
    PipelineConfig pc;
    pc.engine.variant = CacheVariant::None;
    EXPECT_DOUBLE_EQ(evaluate(m, run_targets(m, anchors, nullptr, pc)).mean.war, 1.0);
}

TEST(Synth, FrameMeanConvergesToClassDirection) {
    auto dir = oracle::scratch_dir("synth_mean");
    SynthConfig cfg = small();
    cfg.subject_shift = 0.0;
    cfg.target_extra_shift = 0.0;
    cfg.dim = 64;
    cfg.noise_sigma = 0.3;
    // AR(1) noise inflates the variance of a frame mean by (1 + rho) / (1 - rho),
    // so the 0.99 bound at 500 frames is checked on independent noise.
    cfg.ar_rho = 0.0;
    cfg.frames_per_video = 500;
    cfg.videos_per_subject_per_class = 1;
    cfg.n_source = 1;
    cfg.n_target = 1;
    generate(cfg, dir);
    Manifest m = load_manifest(dir / "manifest.json");
    AnchorSet anchors = load_anchors(dir / "anchors.json");
    for (const auto& s : m.subjects) {
        for (const auto& v : s.videos) {
            Embedding mean(cfg.dim, 0.0);
            for (const auto& f : load_embeddings(m, v))
                for (std::size_t j = 0; j < cfg.dim; ++j) mean[j] += f[j];
            const ClassIndex c = m.classes.index_of(*v.label);
            EXPECT_GE(cosine(mean, anchors.anchors.anchor(c)), 0.99) << s.id << "/" << v.id;
        }
    }
}

TEST(Synth, TargetShiftDegradesZeroShot) {
    double source_war = 0.0;
    double target_war = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto dir = oracle::scratch_dir("synth_shift");
        SynthConfig cfg = small();
        cfg.dim = 32;
        cfg.n_source = 4;
        cfg.n_target = 4;
        cfg.subject_shift = 0.1;
        cfg.target_extra_shift = 0.9;
        cfg.seed = seed;
        generate(cfg, dir);
        Manifest m = load_manifest(dir / "manifest.json");
        AnchorSet anchors = load_anchors(dir / "anchors.json");
        for (auto role : {SubjectRole::Source, SubjectRole::Target}) {
            double hit = 0, n = 0;
            for (const auto* s : m.subjects_with_role(role)) {
                for (const auto& v : s->videos) {
                    const ClassIndex truth = m.classes.index_of(*v.label);
                    for (const auto& f : load_embeddings(m, v)) {
                        hit += classify(f, anchors.anchors).prediction.label == truth;
                        ++n;
                    }
                }
            }
            (role == SubjectRole::Source ? source_war : target_war) += hit / n / 3.0;
        }
    }
    EXPECT_GT(source_war - target_war, 0.1) << source_war << " vs " << target_war;
}
