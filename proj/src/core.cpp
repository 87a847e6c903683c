#include "tricache/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tricache {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Io: return "io";
        case ErrorKind::MissingFile: return "missing-file";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::SizeMismatch: return "size-mismatch";
        case ErrorKind::CorruptData: return "corrupt-data";
        case ErrorKind::Version: return "version";
        case ErrorKind::Internal: return "internal";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io:
        case ErrorKind::MissingFile:
            return 2;
        case ErrorKind::Internal:
            return 3;
        default:
            return 1;
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::InvalidInput, "dot: dimension mismatch (" + std::to_string(a.size()) +
                                                 " vs " + std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool is_unit(std::span<const double> v, double tol) { return std::abs(l2_norm(v) - 1.0) <= tol; }

Normalized l2_normalize(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) throw Error(ErrorKind::InvalidInput, "l2_normalize: non-finite component");
    }
    const double n = l2_norm(v);
    Normalized out{Embedding(v.begin(), v.end()), false};
    if (n <= kDegenerateNorm) {
        out.degenerate = true;
        return out;
    }
    for (double& x : out.vector) x /= n;
    return out;
}

Embedding normalize_or_throw(std::span<const double> v, std::string_view what) {
    auto r = l2_normalize(v);
    if (r.degenerate) throw Error(ErrorKind::Degenerate, std::string(what) + " has zero norm");
    return std::move(r.vector);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na <= kDegenerateNorm || nb <= kDegenerateNorm) {
        throw Error(ErrorKind::Degenerate, "cosine: zero-norm operand");
    }
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

void round_to_f32(Embedding& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

ClassSet::ClassSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw Error(ErrorKind::Validation, "class set needs at least 2 classes");
    for (ClassIndex i = 0; i < labels_.size(); ++i) {
        if (labels_[i].empty()) throw Error(ErrorKind::Validation, "empty class name");
        if (!index_.emplace(labels_[i], i).second) {
            throw Error(ErrorKind::Validation, "duplicate class name '" + labels_[i] + "'");
        }
    }
}

std::optional<ClassIndex> ClassSet::find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

ClassIndex ClassSet::index_of(std::string_view label) const {
    if (auto c = find(label)) return *c;
    throw Error(ErrorKind::Validation, "unknown class '" + std::string(label) + "'");
}

ClassAnchors::ClassAnchors(std::vector<Embedding> anchors, double logit_scale) : logit_scale_(logit_scale) {
    if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) {
        throw Error(ErrorKind::Validation, "logit scale must be positive and finite");
    }
    if (anchors.size() < 2) throw Error(ErrorKind::Validation, "need at least 2 class anchors");
    const std::size_t d = anchors.front().size();
    if (d == 0) throw Error(ErrorKind::Validation, "anchor dimension must be >= 1");
    anchors_.reserve(anchors.size());
    for (std::size_t c = 0; c < anchors.size(); ++c) {
        if (anchors[c].size() != d) throw Error(ErrorKind::Validation, "anchors have inconsistent dimensions");
        anchors_.push_back(normalize_or_throw(anchors[c], "anchor " + std::to_string(c)));
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double mx = *std::max_element(p.begin(), p.end());
    double z = 0.0;
    for (double& x : p) {
        x = std::exp(x - mx);
        z += x;
    }
    for (double& x : p) x /= z;
    return p;
}

double normalized_entropy(std::span<const double> probs) {
    if (probs.size() < 2) return 0.0;
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return std::clamp(h / std::log(static_cast<double>(probs.size())), 0.0, 1.0);
}

ClassIndex argmax(std::span<const double> values) {
    ClassIndex best = 0;
    for (ClassIndex i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

ClassIndex argmin(std::span<const double> values) {
    ClassIndex best = 0;
    for (ClassIndex i = 1; i < values.size(); ++i) {
        if (values[i] < values[best]) best = i;
    }
    return best;
}

Prediction predict(std::span<const double> logits) {
    Prediction p;
    p.probs = softmax(logits);
    p.label = argmax(logits);
    p.entropy = normalized_entropy(p.probs);
    return p;
}

Classification classify(std::span<const double> z, const ClassAnchors& anchors) {
    if (z.size() != anchors.dim()) {
        throw Error(ErrorKind::InvalidInput, "classify: embedding dim " + std::to_string(z.size()) +
                                                 " != anchor dim " + std::to_string(anchors.dim()));
    }
    const Embedding unit = normalize_or_throw(z, "classify input");
    Classification out;
    out.logits.resize(anchors.size());
    for (ClassIndex c = 0; c < anchors.size(); ++c) {
        out.logits[c] = anchors.logit_scale() * std::clamp(dot(unit, anchors.anchor(c)), -1.0, 1.0);
    }
    out.prediction = predict(out.logits);
    return out;
}

std::optional<ClassIndex> majority(std::span<const ClassIndex> labels) {
    if (labels.empty()) return std::nullopt;
    std::map<ClassIndex, std::size_t> counts;
    for (ClassIndex l : labels) ++counts[l];
    std::size_t best = 0;
    std::optional<ClassIndex> mode;
    bool tied = false;
    for (const auto& [label, n] : counts) {
        if (n > best) {
            best = n;
            mode = label;
            tied = false;
        } else if (n == best) {
            tied = true;
        }
    }
    if (tied) return std::nullopt;
    return mode;
}

}  // namespace tricache
