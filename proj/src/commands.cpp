#include "tricache/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tricache/evalx.hpp"
#include "tricache/framelog.hpp"
#include "tricache/prototypes.hpp"
#include "tricache/synth.hpp"

namespace tricache {

using nlohmann::json;

namespace {

const std::map<std::string, std::vector<std::string>> kCommandTree = {
    {"synth", {"gen"}}, {"protos", {"build"}}, {"cache", {"build"}}, {"adapt", {"run"}}, {"eval", {}}, {"ablate", {}}};

bool mentions(const std::vector<std::string>& args, const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Replaces `--config FILE` by the file's options for the invoked command.
// Top-level keys and keys under a section named after the command path
// ([adapt.run], [eval], ...) apply; options given on the command line win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw Error(ErrorKind::Validation, "--config needs a file argument");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty()) return args;

    std::vector<std::string> command;
    std::size_t insert_at = args.size();
    for (std::size_t i = 1; i < args.size(); ++i) {
        auto it = kCommandTree.find(args[i]);
        if (it == kCommandTree.end()) continue;
        command.push_back(args[i]);
        insert_at = i + 1;
        if (!it->second.empty() && i + 1 < args.size() &&
            std::find(it->second.begin(), it->second.end(), args[i + 1]) != it->second.end()) {
            command.push_back(args[i + 1]);
            insert_at = i + 2;
        }
        break;
    }
    if (command.empty()) return args;

    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw Error(ErrorKind::MissingFile, "config file not found: " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::Error& e) {
        throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
    std::vector<std::string> injected;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--" || item.name.empty()) continue;
        if (!item.parents.empty() && item.parents != command) continue;
        std::string name = item.name;
        std::replace(name.begin(), name.end(), '_', '-');
        const std::string flag = "--" + name;
        if (mentions(args, flag)) continue;
        injected.push_back(flag);
        for (const auto& v : item.inputs) injected.push_back(v);
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), injected.begin(), injected.end());
    return args;
}

void add_engine_options(CLI::App* app, EngineConfig& cfg, std::string& variant, std::string& reset) {
    app->add_option("--window", cfg.gate.window_w, "Temporal majority window W")->capture_default_str();
    app->add_option("--tau-pos", cfg.gate.tau_h_pos, "Entropy threshold for positive admission")->capture_default_str();
    app->add_option("--tau-neg", cfg.gate.tau_h_neg, "Entropy threshold for negative admission")->capture_default_str();
    app->add_option("--tau-delta", cfg.gate.tau_delta, "Prototype margin threshold")->capture_default_str();
    app->add_option("--proto-top-k", cfg.gate.proto_top_k, "Prototypes averaged per class in the gate")
        ->capture_default_str();
    app->add_option("--gate-temporal", cfg.gates.temporal, "Enable the temporal gate")->capture_default_str();
    app->add_option("--gate-entropy", cfg.gates.entropy, "Enable the entropy gate")->capture_default_str();
    app->add_option("--gate-prototype", cfg.gates.prototype, "Enable the prototype gate")->capture_default_str();
    app->add_option("--pos-capacity", cfg.pos_capacity, "Positive cache capacity per class")->capture_default_str();
    app->add_option("--neg-capacity", cfg.neg_capacity, "Negative cache capacity per class")->capture_default_str();
    app->add_option("--retrieval-r", cfg.retrieval_r, "Neighbors retrieved per cache")->capture_default_str();
    app->add_option("--alpha-src", cfg.fusion.source, "Fusion weight of the source cache")->capture_default_str();
    app->add_option("--alpha-pos", cfg.fusion.positive, "Fusion weight of the positive cache")->capture_default_str();
    app->add_option("--alpha-neg", cfg.fusion.negative, "Fusion weight of the negative cache")->capture_default_str();
    app->add_option("--pool-window", cfg.pool_window, "Frames pooled per step (0: same as --window)")
        ->capture_default_str();
    app->add_option("--neg-label-filter", cfg.neg_label_filter, "Restrict negative retrieval to the base label")
        ->capture_default_str();
    app->add_option("--cache-variant", variant, "none|static|dynamic|both")->capture_default_str();
    app->add_option("--reset-scope", reset, "subject|video")->capture_default_str();
}

void add_personalize_options(CLI::App* app, PersonalizeOptions& p) {
    app->add_option("--top-m", p.top_m, "Closest source subjects kept")->capture_default_str();
    app->add_option("--cap-k", p.cap_k, "Per-class prototype cap (0: no cap)")->capture_default_str();
    app->add_option("--anchor-class", p.anchor_class, "Class index used for subject matching")->capture_default_str();
}

void add_proto_options(CLI::App* app, ProtoBuildOptions& o, std::string& extractor) {
    app->add_option("--extractor", extractor, "dbscan|kmeans1")->capture_default_str();
    app->add_option("--seed", o.bootstrap.seed, "Bootstrap seed")->capture_default_str();
    app->add_option("--bootstrap-rate", o.bootstrap.rate, "Bootstrap subsample rate")->capture_default_str();
    app->add_option("--bootstrap-rounds", o.bootstrap.rounds, "Bootstrap rounds per candidate")->capture_default_str();
}

json proto_options_json(const ProtoBuildOptions& o) {
    return {{"extractor", to_string(o.extractor)},
            {"seed", o.bootstrap.seed},
            {"bootstrap_rate", o.bootstrap.rate},
            {"bootstrap_rounds", o.bootstrap.rounds},
            {"max_outlier_rate", o.rules.max_outlier_rate},
            {"min_clusters", o.rules.min_clusters},
            {"max_clusters", o.rules.max_clusters},
            {"min_samples_factor", o.rules.min_samples_factor}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
    f << text;
    if (!f) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) { return fs::path(base.string() + suffix); }

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gradient-free test-time adaptation with personalized prototype caches", "tricache"};
    app.require_subcommand(1);
    app.fallthrough();
    std::size_t jobs = 1;
    app.add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    std::string config_path;
    app.add_option("--config", config_path,
                   "TOML/INI option file; keys at top level or under [synth.gen], [adapt.run], ... sections");

    // synth gen
    SynthConfig synth;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Synthetic benchmark");
    synth_cmd->require_subcommand(1);
    auto* gen = synth_cmd->add_subcommand("gen", "Generate a synthetic benchmark tree");
    gen->add_option("--out", synth_out, "Output directory")->required();
    gen->add_option("--dim", synth.dim)->capture_default_str();
    gen->add_option("--n-classes", synth.n_classes)->capture_default_str();
    gen->add_option("--n-source", synth.n_source)->capture_default_str();
    gen->add_option("--n-target", synth.n_target)->capture_default_str();
    gen->add_option("--frames-per-video", synth.frames_per_video)->capture_default_str();
    gen->add_option("--videos-per-class", synth.videos_per_subject_per_class)->capture_default_str();
    gen->add_option("--subject-shift", synth.subject_shift)->capture_default_str();
    gen->add_option("--target-extra-shift", synth.target_extra_shift)->capture_default_str();
    gen->add_option("--noise-sigma", synth.noise_sigma)->capture_default_str();
    gen->add_option("--ar-rho", synth.ar_rho)->capture_default_str();
    gen->add_option("--logit-scale", synth.logit_scale)->capture_default_str();
    gen->add_option("--seed", synth.seed)->capture_default_str();

    // protos build
    ProtoBuildOptions proto_opts;
    std::string proto_extractor = "dbscan";
    std::string manifest_path;
    std::string protos_out;
    auto* protos_cmd = app.add_subcommand("protos", "Source prototype store");
    protos_cmd->require_subcommand(1);
    auto* protos_build = protos_cmd->add_subcommand("build", "Extract prototypes for every (source, class) pair");
    protos_build->add_option("--manifest", manifest_path)->required();
    protos_build->add_option("--out", protos_out, "Store JSON path (a .f32 blob is written beside it)")->required();
    add_proto_options(protos_build, proto_opts, proto_extractor);

    // cache build
    PersonalizeOptions personalize;
    std::string protos_path;
    std::string target_id;
    std::string cache_out;
    auto* cache_cmd = app.add_subcommand("cache", "Personalized source cache");
    cache_cmd->require_subcommand(1);
    auto* cache_build = cache_cmd->add_subcommand("build", "Build the source cache of one target subject");
    cache_build->add_option("--manifest", manifest_path)->required();
    cache_build->add_option("--protos", protos_path)->required();
    cache_build->add_option("--target", target_id)->required();
    cache_build->add_option("--out", cache_out)->required();
    add_personalize_options(cache_build, personalize);

    // adapt run
    EngineConfig engine;
    std::string variant = to_string(engine.variant);
    std::string reset = to_string(engine.reset_scope);
    std::string anchors_path;
    std::string source_cache_path;
    std::string log_out;
    auto* adapt_cmd = app.add_subcommand("adapt", "Online adaptation");
    adapt_cmd->require_subcommand(1);
    auto* adapt_run = adapt_cmd->add_subcommand("run", "Adapt over one target subject's videos");
    adapt_run->add_option("--manifest", manifest_path)->required();
    adapt_run->add_option("--anchors", anchors_path)->required();
    adapt_run->add_option("--cache", source_cache_path, "Personalized source cache (needed for static variants)");
    adapt_run->add_option("--target", target_id)->required();
    adapt_run->add_option("--out", log_out, "Frame log path (JSON lines)")->required();
    add_engine_options(adapt_run, engine, variant, reset);

    // eval
    std::vector<std::string> log_paths;
    std::string report_out;
    auto* eval_cmd = app.add_subcommand("eval", "Score frame logs against manifest labels");
    eval_cmd->add_option("--logs", log_paths)->required();
    eval_cmd->add_option("--manifest", manifest_path)->required();
    eval_cmd->add_option("--out", report_out)->required();

    // ablate
    std::string grid_path;
    std::string table_out;
    std::string ablate_json_out;
    auto* ablate_cmd = app.add_subcommand("ablate", "Run a grid of pipeline variants over all targets");
    ablate_cmd->add_option("--manifest", manifest_path)->required();
    ablate_cmd->add_option("--anchors", anchors_path)->required();
    ablate_cmd->add_option("--grid", grid_path, "Grid JSON (rows or preset)")->required();
    ablate_cmd->add_option("--out", table_out, "CSV table path")->required();
    ablate_cmd->add_option("--json", ablate_json_out, "JSON table path (default: CSV path + .json)");
    ablate_cmd->add_option("--protos", protos_path, "Reuse this dbscan prototype store");
    add_personalize_options(ablate_cmd, personalize);
    add_engine_options(ablate_cmd, engine, variant, reset);
    add_proto_options(ablate_cmd, proto_opts, proto_extractor);

    std::vector<std::string> args(argv, argv + argc);
    try {
        args = expand_config(std::move(args));
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code(e.kind());
    }
    args.erase(args.begin());
    std::reverse(args.begin(), args.end());

    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            const SynthSummary s = generate(synth, synth_out);
            out << "subjects " << s.subjects << ", videos " << s.videos << ", frames " << s.frames << '\n';
        } else if (protos_build->parsed()) {
            proto_opts.extractor = parse_extractor(proto_extractor);
            proto_opts.jobs = jobs;
            const Manifest manifest = load_manifest(manifest_path);
            const PrototypeStore store = build_prototype_store(manifest, proto_opts);
            save_prototype_store(store, protos_out, proto_options_json(proto_opts));
            std::size_t fallbacks = 0;
            for (const auto& [key, list] : store.all())
                for (const auto& e : list) fallbacks += e.meta.fallback ? 1 : 0;
            out << "pairs " << store.all().size() << ", prototypes " << store.total_entries() << ", fallbacks "
                << fallbacks << '\n';
        } else if (cache_build->parsed()) {
            const Manifest manifest = load_manifest(manifest_path);
            const SubjectRecord& target = manifest.subject(target_id);
            if (target.role != SubjectRole::Target) {
                throw Error(ErrorKind::Validation, "subject '" + target_id + "' is not a target subject");
            }
            const PrototypeStore store = load_prototype_store(protos_path);
            if (!(store.classes() == manifest.classes)) {
                throw Error(ErrorKind::Validation, "prototype store classes do not match the manifest");
            }
            const auto anchor_frames = collect_anchor_frames(manifest, target);
            const auto cache = build_personalized_cache(target_id, anchor_frames, store, personalize);
            save_source_cache(cache, manifest.classes, cache_out,
                              {{"anchor_class", personalize.anchor_class},
                               {"top_m", personalize.top_m},
                               {"cap_k", personalize.cap_k}});
            out << "target " << target_id << ": " << cache.total_size() << " prototypes from";
            for (const auto& s : cache.selected_sources()) out << ' ' << s.subject << " (" << s.distance << ")";
            out << '\n';
        } else if (adapt_run->parsed()) {
            engine.variant = parse_cache_variant(variant);
            engine.reset_scope = parse_reset_scope(reset);
            engine.validate();
            const Manifest manifest = load_manifest(manifest_path);
            const SubjectRecord& target = manifest.subject(target_id);
            AnchorSet anchors = load_anchors(anchors_path);
            if (!(anchors.classes == manifest.classes)) {
                throw Error(ErrorKind::Validation, "anchor classes do not match the manifest classes");
            }
            std::shared_ptr<const PersonalizedSourceCache> source;
            if (!source_cache_path.empty()) {
                source = std::make_shared<const PersonalizedSourceCache>(
                    load_source_cache(source_cache_path, manifest.classes));
                if (source->target_id() != target_id) {
                    throw Error(ErrorKind::Validation, "source cache was built for '" + source->target_id() +
                                                           "', not '" + target_id + "'");
                }
            }
            const SubjectRun run = run_subject(engine, manifest, target,
                                               std::make_shared<const ClassAnchors>(anchors.anchors), source);
            write_frame_log(fs::path(log_out), run);
            json config = to_json(engine);
            config["target"] = target_id;
            write_json(with_suffix(log_out, ".videos.json"), video_summary_json(run, manifest.classes, config));
            save_target_cache(run.positive, manifest.classes, with_suffix(log_out, ".pos.json"));
            save_target_cache(run.negative, manifest.classes, with_suffix(log_out, ".neg.json"));
            std::size_t frames = 0;
            for (const auto& v : run.videos) frames += v.frames.size();
            out << "target " << target_id << ": videos " << run.videos.size() << ", frames " << frames
                << ", positive " << run.positive.size() << ", negative " << run.negative.size() << '\n';
        } else if (eval_cmd->parsed()) {
            const Manifest manifest = load_manifest(manifest_path);
            std::vector<LoggedVideo> videos;
            for (const auto& p : log_paths) {
                for (auto& v : read_frame_log(p)) videos.push_back(std::move(v));
            }
            const EvalReport report = evaluate(manifest, videos);
            json doc = to_json(report, manifest.classes);
            doc["logs"] = log_paths;
            write_json(report_out, doc);
            out << "targets " << report.targets.size() << ", mean WAR " << report.mean.war << ", mean UAR "
                << report.mean.uar << ", ECE " << report.calibration.ece << '\n';
        } else if (ablate_cmd->parsed()) {
            engine.variant = parse_cache_variant(variant);
            engine.reset_scope = parse_reset_scope(reset);
            engine.validate();
            proto_opts.extractor = parse_extractor(proto_extractor);
            const Manifest manifest = load_manifest(manifest_path);
            const AnchorSet anchors = load_anchors(anchors_path);
            const auto rows = parse_ablation_grid(read_json(grid_path));
            std::optional<PrototypeStore> store;
            if (!protos_path.empty()) store = load_prototype_store(protos_path);
            PipelineConfig base{personalize, engine};
            const auto results = run_ablation(manifest, anchors, rows, base, proto_opts, jobs,
                                              store ? &*store : nullptr);
            std::ostringstream csv;
            write_ablation_csv(csv, results);
            write_text(table_out, csv.str());
            json config = to_json(base);
            config["prototypes"] = protos_path.empty() ? proto_options_json(proto_opts) : json(protos_path);
            write_json(ablate_json_out.empty() ? with_suffix(table_out, ".json") : fs::path(ablate_json_out),
                       ablation_json(results, config));
            for (const auto& r : results) out << r.row.name << ": mean WAR " << r.report.mean.war << '\n';
        }
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error (io): " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

}  // namespace tricache
