#include "tricache/gates.hpp"

#include <algorithm>
#include <functional>

namespace tricache {

void GateConfig::validate() const {
    if (window_w == 0) throw Error(ErrorKind::Validation, "window_w must be >= 1");
    if (!(tau_h_pos > 0.0 && tau_h_pos < 1.0)) throw Error(ErrorKind::Validation, "tau_h_pos must be in (0, 1)");
    if (!(tau_h_neg > tau_h_pos && tau_h_neg <= 1.0)) {
        throw Error(ErrorKind::Validation, "tau_h_neg must be in (tau_h_pos, 1]");
    }
    if (!(tau_delta >= 0.0)) throw Error(ErrorKind::Validation, "tau_delta must be >= 0");
    if (proto_top_k == 0) throw Error(ErrorKind::Validation, "proto_top_k must be >= 1");
}

const char* to_string(EntropyMode m) {
    switch (m) {
        case EntropyMode::Positive: return "positive";
        case EntropyMode::Negative: return "negative";
        case EntropyMode::Reject: return "reject";
    }
    return "?";
}

const char* to_string(Admission a) {
    switch (a) {
        case Admission::None: return "none";
        case Admission::Positive: return "positive";
        case Admission::Negative: return "negative";
    }
    return "?";
}

bool temporal_gate(std::span<const ClassIndex> history, ClassIndex current, std::size_t window_w) {
    if (history.size() != window_w) return false;
    const auto mode = majority(history);
    return mode && *mode == current;
}

EntropyMode entropy_gate(double h, const GateConfig& cfg) {
    if (h < cfg.tau_h_pos) return EntropyMode::Positive;
    if (h < cfg.tau_h_neg) return EntropyMode::Negative;
    return EntropyMode::Reject;
}

ProtoMatch prototype_gate(std::span<const double> query, const PersonalizedSourceCache& cache, ClassIndex base_label,
                          const GateConfig& cfg) {
    ProtoMatch m;
    m.scores.resize(cache.n_classes());
    for (ClassIndex c = 0; c < cache.n_classes(); ++c) {
        std::vector<double> sims;
        for (const auto& p : cache.prototypes(c)) sims.push_back(cosine(query, p.vector));
        const std::size_t k = std::min(cfg.proto_top_k, sims.size());
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(), std::greater<>());
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += sims[i];
        m.scores[c] = s / static_cast<double>(k);
    }
    m.best = argmax(m.scores);
    double second = -std::numeric_limits<double>::infinity();
    for (ClassIndex c = 0; c < m.scores.size(); ++c)
        if (c != m.best) second = std::max(second, m.scores[c]);
    m.margin = m.scores[m.best] - second;
    m.pass = m.best == base_label && m.margin > cfg.tau_delta;
    return m;
}

Admission admission_rule(bool temporal_pass, EntropyMode mode, bool proto_pass) {
    if (!temporal_pass) return Admission::None;
    if (mode == EntropyMode::Reject) return Admission::None;
    if (!proto_pass) return Admission::None;
    return mode == EntropyMode::Positive ? Admission::Positive : Admission::Negative;
}

GateVerdict tri_gate(const GateInput& input, const PersonalizedSourceCache* cache, const GateConfig& cfg,
                     const GateToggles& toggles) {
    GateVerdict v;
    v.temporal_pass = !toggles.temporal || temporal_gate(input.history, input.base_label, cfg.window_w);
    v.entropy_mode = toggles.entropy ? entropy_gate(input.entropy, cfg) : EntropyMode::Positive;

    if (v.temporal_pass && v.entropy_mode != EntropyMode::Reject) {
        if (toggles.prototype && cache != nullptr) {
            const ProtoMatch m = prototype_gate(input.query, *cache, input.base_label, cfg);
            v.proto_reached = true;
            v.proto_class = m.best;
            v.proto_margin = m.margin;
            v.proto_pass = m.pass;
        } else {
            v.proto_pass = true;
        }
    }
    v.admitted = admission_rule(v.temporal_pass, v.entropy_mode, v.proto_pass);
    return v;
}

}  // namespace tricache
