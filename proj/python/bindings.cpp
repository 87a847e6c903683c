#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tricache/cli.hpp"
#include "tricache/evalx.hpp"
#include "tricache/gates.hpp"
#include "tricache/prototypes.hpp"
#include "tricache/synth.hpp"

namespace py = pybind11;
using namespace tricache;
using nlohmann::json;

namespace {

py::tuple cli(const std::vector<std::string>& args) {
    std::vector<std::string> full = {"tricache"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    int code = 0;
    {
        py::gil_scoped_release release;
        code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

std::vector<Embedding> unit_rows(const std::vector<Embedding>& rows) {
    std::vector<Embedding> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(normalize_or_throw(r, "point"));
    return out;
}

std::string synth_generate(const std::string& out, const std::string& config_json) {
    const SynthConfig cfg = synth_config_from_json(json::parse(config_json));
    const SynthSummary s = generate(cfg, out);
    return json{{"subjects", s.subjects}, {"videos", s.videos}, {"frames", s.frames}}.dump();
}

std::string build_prototypes(const std::string& manifest, const std::string& out, const std::string& extractor,
                             std::uint64_t seed, std::size_t jobs) {
    ProtoBuildOptions opt;
    opt.extractor = parse_extractor(extractor);
    opt.bootstrap.seed = seed;
    opt.jobs = jobs;
    const PrototypeStore store = build_prototype_store(load_manifest(manifest), opt);
    save_prototype_store(store, out);
    std::size_t fallbacks = 0;
    for (const auto& [key, list] : store.all())
        for (const auto& e : list) fallbacks += e.meta.fallback ? 1 : 0;
    return json{{"pairs", store.all().size()}, {"prototypes", store.total_entries()}, {"fallbacks", fallbacks}}.dump();
}

std::string run_pipeline(const std::string& manifest_path, const std::string& anchors_path,
                         const std::optional<std::string>& protos_path, const std::string& overrides_json,
                         std::size_t top_m, std::size_t jobs) {
    const Manifest manifest = load_manifest(manifest_path);
    const AnchorSet anchors = load_anchors(anchors_path);
    PipelineConfig cfg;
    cfg.personalize.top_m = top_m;
    apply_engine_overrides(cfg.engine, json::parse(overrides_json));
    std::optional<PrototypeStore> store;
    if (protos_path) store = load_prototype_store(*protos_path);
    const auto runs = run_targets(manifest, anchors, store ? &*store : nullptr, cfg, jobs);
    return to_json(evaluate(manifest, runs), manifest.classes).dump();
}

py::dict metrics(const std::vector<std::vector<std::size_t>>& counts) {
    ConfusionMatrix cm(counts.size());
    for (std::size_t y = 0; y < counts.size(); ++y) {
        if (counts[y].size() != counts.size()) throw Error(ErrorKind::InvalidInput, "confusion matrix must be square");
        for (std::size_t p = 0; p < counts.size(); ++p) cm.add(y, p, counts[y][p]);
    }
    py::dict d;
    d["war"] = war(cm);
    d["uar"] = uar(cm);
    d["weighted_f1"] = weighted_f1(cm);
    d["macro_f1"] = macro_f1(cm);
    return d;
}

double ece(const std::vector<double>& confidence, const std::vector<bool>& correct, std::size_t bins) {
    if (confidence.size() != correct.size()) throw Error(ErrorKind::InvalidInput, "length mismatch");
    std::vector<ScoredPrediction> preds;
    for (std::size_t i = 0; i < confidence.size(); ++i) preds.push_back({confidence[i], correct[i]});
    return reliability(preds, bins).ece;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bindings for the tricache test-time adaptation engine";

    py::register_exception<Error>(m, "TricacheError", PyExc_RuntimeError);

    m.def("run_cli", &cli, py::arg("args"), "Run the command-line tool in-process; returns (code, stdout, stderr).");
    m.def("synth_generate", &synth_generate, py::arg("out"), py::arg("config_json") = "{}");
    m.def("build_prototypes", &build_prototypes, py::arg("manifest"), py::arg("out"), py::arg("extractor") = "dbscan",
          py::arg("seed") = 0, py::arg("jobs") = 1);
    m.def("run_pipeline", &run_pipeline, py::arg("manifest"), py::arg("anchors"), py::arg("protos") = py::none(),
          py::arg("overrides_json") = "{}", py::arg("top_m") = 3, py::arg("jobs") = 1,
          py::call_guard<py::gil_scoped_release>());

    m.def(
        "dbscan",
        [](const std::vector<Embedding>& points, double eps, std::size_t min_pts) {
            return dbscan(unit_rows(points), DbscanParams{eps, min_pts}).labels;
        },
        py::arg("points"), py::arg("eps"), py::arg("min_pts"));
    m.def(
        "adjusted_rand_index", [](const std::vector<int>& a, const std::vector<int>& b) { return adjusted_rand_index(a, b); },
        py::arg("a"), py::arg("b"));
    m.def(
        "frechet_diag",
        [](Embedding mean_a, std::vector<double> var_a, Embedding mean_b, std::vector<double> var_b) {
            return frechet_diag({std::move(mean_a), std::move(var_a)}, {std::move(mean_b), std::move(var_b)});
        },
        py::arg("mean_a"), py::arg("var_a"), py::arg("mean_b"), py::arg("var_b"));
    m.def(
        "entropy_route",
        [](double h, double tau_pos, double tau_neg) {
            GateConfig cfg;
            cfg.tau_h_pos = tau_pos;
            cfg.tau_h_neg = tau_neg;
            cfg.validate();
            return std::string(to_string(entropy_gate(h, cfg)));
        },
        py::arg("h"), py::arg("tau_pos") = 0.5, py::arg("tau_neg") = 0.8);
    m.def("metrics", &metrics, py::arg("confusion"));
    m.def("ece", &ece, py::arg("confidence"), py::arg("correct"), py::arg("bins") = kReliabilityBins);
}
