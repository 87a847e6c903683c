#include "tricache/framelog.hpp"

#include <fstream>
#include <map>

namespace tricache {

using nlohmann::json;

namespace {

EntropyMode parse_entropy_mode(const std::string& s) {
    if (s == "positive") return EntropyMode::Positive;
    if (s == "negative") return EntropyMode::Negative;
    if (s == "reject") return EntropyMode::Reject;
    throw Error(ErrorKind::Validation, "frame log: bad entropy mode '" + s + "'");
}

Admission parse_admission(const std::string& s) {
    if (s == "none") return Admission::None;
    if (s == "positive") return Admission::Positive;
    if (s == "negative") return Admission::Negative;
    throw Error(ErrorKind::Validation, "frame log: bad admission '" + s + "'");
}

}  // namespace

json frame_to_json(const std::string& subject, const std::string& video, const FrameDecision& d) {
    json evicted = nullptr;
    if (d.event.evicted) {
        evicted = {{"seq", d.event.evicted->seq},
                   {"label", d.event.evicted->label},
                   {"entropy", d.event.evicted->entropy},
                   {"self", d.event.evicted->self}};
    }
    json line;
    line["v"] = kFrameLogVersion;
    line["subject"] = subject;
    line["video"] = video;
    line["t"] = d.t;
    line["pooled_norm"] = d.pooled_norm;
    line["base_logits"] = d.base_logits;
    line["base_label"] = d.base_label;
    line["entropy"] = d.entropy;
    line["gate"] = {{"temporal", d.verdict.temporal_pass},
                    {"entropy_mode", to_string(d.verdict.entropy_mode)},
                    {"proto_reached", d.verdict.proto_reached},
                    {"proto_class", d.verdict.proto_class},
                    {"proto_margin", d.verdict.proto_margin},
                    {"proto_pass", d.verdict.proto_pass},
                    {"admitted", to_string(d.verdict.admitted)}};
    line["cache"] = {{"admitted", to_string(d.event.admitted)},
                     {"seq", d.event.inserted_seq ? json(*d.event.inserted_seq) : json(nullptr)},
                     {"evicted", std::move(evicted)}};
    line["retrieved"] = {{"src", d.has_src}, {"pos", d.has_pos}, {"neg", d.has_neg}};
    line["fusion_fallback"] = d.fusion_fallback;
    line["fused_logits"] = d.fused_logits;
    line["fused_label"] = d.fused_label;
    return line;
}

FrameDecision frame_from_json(const json& j) {
    try {
        if (j.at("v").get<int>() != kFrameLogVersion) {
            throw Error(ErrorKind::Version, "frame log: unsupported version " + j.at("v").dump());
        }
        FrameDecision d;
        d.t = j.at("t").get<std::size_t>();
        d.pooled_norm = j.at("pooled_norm").get<double>();
        d.base_logits = j.at("base_logits").get<std::vector<double>>();
        d.base_label = j.at("base_label").get<ClassIndex>();
        d.entropy = j.at("entropy").get<double>();
        const json& g = j.at("gate");
        d.verdict.temporal_pass = g.at("temporal").get<bool>();
        d.verdict.entropy_mode = parse_entropy_mode(g.at("entropy_mode").get<std::string>());
        d.verdict.proto_reached = g.at("proto_reached").get<bool>();
        d.verdict.proto_class = g.at("proto_class").get<ClassIndex>();
        d.verdict.proto_margin = g.at("proto_margin").get<double>();
        d.verdict.proto_pass = g.at("proto_pass").get<bool>();
        d.verdict.admitted = parse_admission(g.at("admitted").get<std::string>());
        const json& c = j.at("cache");
        d.event.admitted = parse_admission(c.at("admitted").get<std::string>());
        if (!c.at("seq").is_null()) d.event.inserted_seq = c.at("seq").get<std::uint64_t>();
        if (!c.at("evicted").is_null()) {
            const json& e = c.at("evicted");
            d.event.evicted = EvictionRecord{e.at("seq").get<std::uint64_t>(), e.at("label").get<ClassIndex>(),
                                             e.at("entropy").get<double>(), e.at("self").get<bool>()};
        }
        const json& r = j.at("retrieved");
        d.has_src = r.at("src").get<bool>();
        d.has_pos = r.at("pos").get<bool>();
        d.has_neg = r.at("neg").get<bool>();
        d.fusion_fallback = j.at("fusion_fallback").get<bool>();
        d.fused_logits = j.at("fused_logits").get<std::vector<double>>();
        d.fused_label = j.at("fused_label").get<ClassIndex>();
        if (d.fused_logits.empty() || d.fused_logits.size() != d.base_logits.size()) {
            throw Error(ErrorKind::Validation, "frame log: inconsistent logit lengths");
        }
        return d;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("frame log: ") + e.what());
    }
}

void write_frame_log(std::ostream& out, const SubjectRun& run) {
    for (const auto& v : run.videos)
        for (const auto& f : v.frames) out << frame_to_json(run.subject, v.video_id, f).dump() << '\n';
}

void write_frame_log(const std::filesystem::path& path, const SubjectRun& run) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
    write_frame_log(out, run);
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<LoggedVideo> read_frame_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open: " + path.string());
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<FrameDecision>> frames;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("subject") || !j.contains("video") || !j.at("subject").is_string() ||
            !j.at("video").is_string()) {
            throw Error(ErrorKind::Validation, path.string() + ":" + std::to_string(lineno) + ": missing subject/video");
        }
        std::pair<std::string, std::string> key{j.at("subject").get<std::string>(), j.at("video").get<std::string>()};
        auto [it, fresh] = frames.try_emplace(key);
        if (fresh) order.push_back(key);
        it->second.push_back(frame_from_json(j));
    }
    std::vector<LoggedVideo> out;
    for (const auto& key : order) out.push_back({key.first, aggregate_video(key.second, std::move(frames[key]))});
    return out;
}

json video_summary_json(const SubjectRun& run, const ClassSet& classes, const json& config) {
    json videos = json::array();
    for (const auto& v : run.videos) {
        videos.push_back({{"video", v.video_id},
                          {"frames", v.frames.size()},
                          {"mean_logits", v.mean_logits},
                          {"label", classes.label(v.label)},
                          {"label_index", v.label},
                          {"confidence", v.confidence}});
    }
    return {{"format", kVideoSummaryFormat},
            {"subject", run.subject},
            {"config", config},
            {"videos", std::move(videos)},
            {"positive_cache_size", run.positive.size()},
            {"negative_cache_size", run.negative.size()}};
}

}  // namespace tricache
