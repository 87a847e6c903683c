#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tricache/error.hpp"

namespace tricache {

// Dense feature vector. Files carry float32; all arithmetic runs in double.
using Embedding = std::vector<double>;
using ClassIndex = std::size_t;

inline constexpr double kUnitNormTolerance = 1e-6;
inline constexpr double kDegenerateNorm = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
bool is_unit(std::span<const double> v, double tol = kUnitNormTolerance);

struct Normalized {
    Embedding vector;
    bool degenerate = false;
};

// v / ||v||; a vector with norm <= 1e-12 comes back unchanged with
// `degenerate` set. Throws InvalidInput on non-finite values.
Normalized l2_normalize(std::span<const double> v);

// Like l2_normalize but a degenerate input is an error.
Embedding normalize_or_throw(std::span<const double> v, std::string_view what = "vector");

// Cosine similarity clamped to [-1, 1]. Throws Degenerate on a zero operand.
double cosine(std::span<const double> a, std::span<const double> b);

// Rounds every component through float32 so the vector survives a
// float32 round trip bit-exactly.
void round_to_f32(Embedding& v);

class ClassSet {
public:
    ClassSet() = default;
    explicit ClassSet(std::vector<std::string> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    const std::string& label(ClassIndex c) const { return labels_.at(c); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::optional<ClassIndex> find(std::string_view label) const;
    // Throws Validation for an unknown label.
    ClassIndex index_of(std::string_view label) const;

    bool operator==(const ClassSet& other) const { return labels_ == other.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, ClassIndex> index_;
};

// Per-class unit anchors and the logit scale. Anchors are normalized on
// construction; a zero anchor or a nonpositive scale is rejected.
class ClassAnchors {
public:
    ClassAnchors(std::vector<Embedding> anchors, double logit_scale);

    std::size_t size() const noexcept { return anchors_.size(); }
    std::size_t dim() const noexcept { return anchors_.empty() ? 0 : anchors_.front().size(); }
    const Embedding& anchor(ClassIndex c) const { return anchors_.at(c); }
    const std::vector<Embedding>& anchors() const noexcept { return anchors_; }
    double logit_scale() const noexcept { return logit_scale_; }

private:
    std::vector<Embedding> anchors_;
    double logit_scale_;
};

struct Prediction {
    ClassIndex label = 0;
    std::vector<double> probs;
    double entropy = 0.0;  // normalized to [0, 1]
};

struct Classification {
    std::vector<double> logits;
    Prediction prediction;
};

std::vector<double> softmax(std::span<const double> logits);

// Shannon entropy divided by log(K), so the range is [0, 1] for any K >= 2.
double normalized_entropy(std::span<const double> probs);

// First index of the max (min); ties go to the lowest index.
ClassIndex argmax(std::span<const double> values);
ClassIndex argmin(std::span<const double> values);

Prediction predict(std::span<const double> logits);

// logit(c) = scale * cosine(z / ||z||, anchor_c).
Classification classify(std::span<const double> z, const ClassAnchors& anchors);

// Unique mode of the labels, or nullopt when the mode is tied or the input empty.
std::optional<ClassIndex> majority(std::span<const ClassIndex> labels);

}  // namespace tricache
