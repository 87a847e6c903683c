#include "tricache/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "tricache/prototypes.hpp"
#include "tricache/store.hpp"

namespace tricache {

using nlohmann::json;

void SynthConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::Validation, "synth config: " + msg); };
    if (dim == 0) fail("dim must be >= 1");
    if (n_classes < 2) fail("n_classes must be >= 2");
    if (n_source == 0 || n_target == 0) fail("subject counts must be >= 1");
    if (frames_per_video == 0 || videos_per_subject_per_class == 0) fail("frame and video counts must be >= 1");
    if (!(subject_shift >= 0.0) || !(target_extra_shift >= 0.0)) fail("shifts must be nonnegative");
    if (!(noise_sigma > 0.0)) fail("noise_sigma must be positive");
    if (!(ar_rho >= 0.0 && ar_rho < 1.0)) fail("ar_rho must be in [0, 1)");
    if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) fail("logit_scale must be positive");
}

json to_json(const SynthConfig& c) {
    return {{"format", kSynthConfigFormat},
            {"dim", c.dim},
            {"n_classes", c.n_classes},
            {"n_source", c.n_source},
            {"n_target", c.n_target},
            {"frames_per_video", c.frames_per_video},
            {"videos_per_subject_per_class", c.videos_per_subject_per_class},
            {"subject_shift", c.subject_shift},
            {"target_extra_shift", c.target_extra_shift},
            {"noise_sigma", c.noise_sigma},
            {"ar_rho", c.ar_rho},
            {"logit_scale", c.logit_scale},
            {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorKind::Validation, "synth config must be a JSON object");
    SynthConfig c;
    try {
        for (const auto& [key, v] : doc.items()) {
            if (key == "format") {
                if (v.get<std::string>() != kSynthConfigFormat) {
                    throw Error(ErrorKind::Version, "unsupported synth config format " + v.dump());
                }
            } else if (key == "dim") c.dim = v.get<std::size_t>();
            else if (key == "n_classes") c.n_classes = v.get<std::size_t>();
            else if (key == "n_source") c.n_source = v.get<std::size_t>();
            else if (key == "n_target") c.n_target = v.get<std::size_t>();
            else if (key == "frames_per_video") c.frames_per_video = v.get<std::size_t>();
            else if (key == "videos_per_subject_per_class") c.videos_per_subject_per_class = v.get<std::size_t>();
            else if (key == "subject_shift") c.subject_shift = v.get<double>();
            else if (key == "target_extra_shift") c.target_extra_shift = v.get<double>();
            else if (key == "noise_sigma") c.noise_sigma = v.get<double>();
            else if (key == "ar_rho") c.ar_rho = v.get<double>();
            else if (key == "logit_scale") c.logit_scale = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw Error(ErrorKind::Validation, "synth config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

std::string numbered(char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%02zu", prefix, i);
    return buf;
}

Embedding gaussian(std::mt19937_64& rng, std::size_t dim, double sigma) {
    std::normal_distribution<double> n(0.0, 1.0);
    Embedding v(dim);
    for (double& x : v) x = sigma * n(rng);
    return v;
}

std::vector<std::string> class_labels(std::size_t n) {
    std::vector<std::string> labels{"neutral"};
    for (std::size_t c = 1; c < n; ++c) labels.push_back("class" + std::to_string(c));
    return labels;
}

}  // namespace

SynthSummary generate(const SynthConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out / "emb", ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + (out / "emb").string() + ": " + ec.message());

    const ClassSet classes(class_labels(cfg.n_classes));
    std::mt19937_64 anchor_rng(cfg.seed);
    std::vector<Embedding> anchors;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        Embedding a = normalize_or_throw(gaussian(anchor_rng, cfg.dim, 1.0), "anchor");
        round_to_f32(a);
        anchors.push_back(std::move(a));
    }
    save_anchors(out / "anchors.json", classes, anchors, cfg.logit_scale);

    Manifest manifest;
    manifest.dim = cfg.dim;
    manifest.classes = classes;
    manifest.base_dir = out;
    SynthSummary summary;

    const std::size_t n_subjects = cfg.n_source + cfg.n_target;
    for (std::size_t s = 0; s < n_subjects; ++s) {
        const bool target = s >= cfg.n_source;
        SubjectRecord subject;
        subject.id = target ? numbered('T', s - cfg.n_source) : numbered('S', s);
        subject.role = target ? SubjectRole::Target : SubjectRole::Source;

        std::mt19937_64 rng(derive_seed(cfg.seed, subject.id, 0));
        Embedding shift = gaussian(rng, cfg.dim, cfg.subject_shift);
        if (target) {
            const Embedding extra = gaussian(rng, cfg.dim, cfg.target_extra_shift);
            for (std::size_t j = 0; j < cfg.dim; ++j) shift[j] += extra[j];
        }
        std::vector<Embedding> means;
        for (std::size_t c = 0; c < cfg.n_classes; ++c) {
            Embedding m = anchors[c];
            for (std::size_t j = 0; j < cfg.dim; ++j) m[j] += shift[j];
            means.push_back(normalize_or_throw(m, "class mean"));
        }

        // Videos interleave classes: k-th video of every class before the (k+1)-th.
        for (std::size_t k = 0; k < cfg.videos_per_subject_per_class; ++k) {
            for (std::size_t c = 0; c < cfg.n_classes; ++c) {
                VideoRecord video;
                video.id = "c" + std::to_string(c) + "_v" + std::to_string(k);
                video.frames = cfg.frames_per_video;
                video.label = classes.label(c);
                if (target) {
                    if (c == 0) video.anchor_range = FrameRange{0, cfg.frames_per_video};
                } else {
                    video.frame_labels = std::vector<std::string>(cfg.frames_per_video, classes.label(c));
                }
                video.embeddings_path = "emb/" + subject.id + "_" + video.id + ".f32";

                std::vector<Embedding> frames;
                Embedding eps(cfg.dim, 0.0);
                for (std::size_t t = 0; t < cfg.frames_per_video; ++t) {
                    const Embedding innovation = gaussian(rng, cfg.dim, cfg.noise_sigma);
                    Embedding x(cfg.dim);
                    for (std::size_t j = 0; j < cfg.dim; ++j) {
                        eps[j] = cfg.ar_rho * eps[j] + innovation[j];
                        x[j] = means[c][j] + eps[j];
                    }
                    frames.push_back(l2_normalize(x).vector);
                }
                write_f32_matrix(out / video.embeddings_path, frames);
                summary.frames += frames.size();
                ++summary.videos;
                subject.videos.push_back(std::move(video));
            }
        }
        manifest.subjects.push_back(std::move(subject));
        ++summary.subjects;
    }
    save_manifest(manifest, out / "manifest.json");
    write_json(out / "synth_config.json", to_json(cfg));
    return summary;
}

}  // namespace tricache
