#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tricache/core.hpp"
#include "tricache/personalize.hpp"

namespace tricache {

struct GateConfig {
    std::size_t window_w = 3;
    double tau_h_pos = 0.5;
    double tau_h_neg = 0.8;
    double tau_delta = 0.05;
    std::size_t proto_top_k = 3;

    void validate() const;
};

// A disabled gate always passes; with entropy disabled every admission
// is routed to the positive cache.
struct GateToggles {
    bool temporal = true;
    bool entropy = true;
    bool prototype = true;

    bool operator==(const GateToggles&) const = default;
};

enum class EntropyMode { Positive, Negative, Reject };
enum class Admission { None, Positive, Negative };

const char* to_string(EntropyMode m);
const char* to_string(Admission a);

// `history` is the window of the last W base predictions, the current
// frame included. Fewer than W entries (warm-up) or a tied majority fail.
bool temporal_gate(std::span<const ClassIndex> history, ClassIndex current, std::size_t window_w);

// Positive iff h < tau+, Negative iff tau+ <= h < tau-, otherwise Reject.
EntropyMode entropy_gate(double h, const GateConfig& cfg);

struct ProtoMatch {
    ClassIndex best = 0;
    double margin = 0.0;
    bool pass = false;
    std::vector<double> scores;  // per class: mean cosine over its top-k prototypes
};

ProtoMatch prototype_gate(std::span<const double> query, const PersonalizedSourceCache& cache, ClassIndex base_label,
                          const GateConfig& cfg);

struct GateInput {
    std::span<const ClassIndex> history;
    ClassIndex base_label = 0;
    double entropy = 0.0;
    std::span<const double> query;
};

struct GateVerdict {
    bool temporal_pass = false;
    EntropyMode entropy_mode = EntropyMode::Reject;
    bool proto_reached = false;
    ClassIndex proto_class = 0;
    double proto_margin = 0.0;
    bool proto_pass = false;
    Admission admitted = Admission::None;
};

// The cache-admission branch structure: temporal, then entropy routing,
// then prototype agreement.
Admission admission_rule(bool temporal_pass, EntropyMode mode, bool proto_pass);

// Evaluates temporal and entropy gates, then the prototype gate when both
// passed. Without a source cache the prototype gate counts as disabled.
GateVerdict tri_gate(const GateInput& input, const PersonalizedSourceCache* cache, const GateConfig& cfg,
                     const GateToggles& toggles = {});

}  // namespace tricache
