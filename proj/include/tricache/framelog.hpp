#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tricache/engine.hpp"

namespace tricache {

// Version tag carried by every frame-log line as "v".
inline constexpr int kFrameLogVersion = 1;
inline constexpr const char* kVideoSummaryFormat = "tricache-videos/1";

nlohmann::json frame_to_json(const std::string& subject, const std::string& video, const FrameDecision& d);
FrameDecision frame_from_json(const nlohmann::json& line);

struct LoggedVideo {
    std::string subject;
    VideoDecision decision;
};

// One FrameDecision per line, videos in run order.
void write_frame_log(std::ostream& out, const SubjectRun& run);
void write_frame_log(const std::filesystem::path& path, const SubjectRun& run);

// Groups lines back into videos (first-appearance order) and re-aggregates
// their logits.
std::vector<LoggedVideo> read_frame_log(const std::filesystem::path& path);

nlohmann::json video_summary_json(const SubjectRun& run, const ClassSet& classes, const nlohmann::json& config);

}  // namespace tricache
