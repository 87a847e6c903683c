#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <set>
#include <fstream>
#include <limits>
#include <random>

#include "../support/oracles.hpp"
#include "tricache/store.hpp"

using namespace tricache;
using nlohmann::json;

namespace {

void write_frames(const fs::path& p, std::size_t frames, std::size_t dim, float fill = 0.5f) {
    std::vector<Embedding> rows(frames, Embedding(dim, fill));
    write_f32_matrix(p, rows);
}

json two_subject_manifest() {
    return {{"format", kManifestFormat},
            {"dim", 3},
            {"classes", {"neutral", "pain"}},
            {"subjects",
             {{{"id", "S1"},
               {"role", "source"},
               {"videos",
                {{{"id", "v1"},
                  {"frames", 2},
                  {"label", "pain"},
                  {"frame_labels", {"neutral", "pain"}},
                  {"embeddings", "S1_v1.f32"}}}}},
              {{"id", "T1"},
               {"role", "target"},
               {"videos",
                {{{"id", "v1"}, {"frames", 2}, {"label", "neutral"}, {"anchor_range", {0, 2}},
                  {"embeddings", "T1_v1.f32"}}}}}}}};
}

fs::path fixture_dir(const std::string& name) {
    auto dir = oracle::scratch_dir(name);
    write_frames(dir / "S1_v1.f32", 2, 3);
    write_frames(dir / "T1_v1.f32", 2, 3);
    return dir;
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected a tricache::Error";
    return ErrorKind::Internal;
}

}  // namespace

TEST(Manifest, ValidTwoSubjects) {
    auto dir = fixture_dir("manifest_valid");
    write_json(dir / "manifest.json", two_subject_manifest());
    Manifest m = load_manifest(dir / "manifest.json");
    ASSERT_EQ(m.subjects.size(), 2u);
    EXPECT_EQ(m.dim, 3u);
    EXPECT_EQ(m.subject("T1").role, SubjectRole::Target);
    EXPECT_EQ(m.subjects_with_role(SubjectRole::Source).size(), 1u);
    ASSERT_TRUE(m.subject("T1").videos[0].anchor_range.has_value());
    EXPECT_EQ(m.subject("T1").videos[0].anchor_range->end, 2u);
}

TEST(Manifest, ShortFileNamesTheFile) {
    auto dir = fixture_dir("manifest_short");
    {
        std::ofstream f(dir / "T1_v1.f32", std::ios::binary | std::ios::trunc);
        std::string bytes(24 - 7, '\0');
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    write_json(dir / "manifest.json", two_subject_manifest());
    try {
        load_manifest(dir / "manifest.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SizeMismatch);
        EXPECT_NE(std::string(e.what()).find("T1_v1.f32"), std::string::npos);
    }
}

TEST(Manifest, DistinctErrorKinds) {
    auto dir = fixture_dir("manifest_kinds");
    json dup = two_subject_manifest();
    dup["subjects"][1]["id"] = "S1";
    EXPECT_EQ(kind_of([&] { parse_manifest(dup, dir); }), ErrorKind::Validation);

    json dangling = two_subject_manifest();
    dangling["subjects"][0]["videos"][0]["embeddings"] = "nope.f32";
    EXPECT_EQ(kind_of([&] { parse_manifest(dangling, dir); }), ErrorKind::MissingFile);

    json wrong_dim = two_subject_manifest();
    wrong_dim["dim"] = 4;
    EXPECT_EQ(kind_of([&] { parse_manifest(wrong_dim, dir); }), ErrorKind::SizeMismatch);

    EXPECT_EQ(kind_of([&] { load_manifest(dir / "absent.json"); }), ErrorKind::MissingFile);

    {
        std::ofstream f(dir / "broken.json");
        f << "{\"dim\": 3, ";
    }
    EXPECT_EQ(kind_of([&] { load_manifest(dir / "broken.json"); }), ErrorKind::Parse);
}

TEST(Manifest, VideoRules) {
    auto dir = fixture_dir("manifest_rules");
    json bad_range = two_subject_manifest();
    bad_range["subjects"][1]["videos"][0]["anchor_range"] = {1, 1};
    EXPECT_THROW(parse_manifest(bad_range, dir), Error);

    json range_on_source = two_subject_manifest();
    range_on_source["subjects"][0]["videos"][0]["anchor_range"] = {0, 1};
    EXPECT_THROW(parse_manifest(range_on_source, dir), Error);

    json short_labels = two_subject_manifest();
    short_labels["subjects"][0]["videos"][0]["frame_labels"] = {"pain"};
    EXPECT_THROW(parse_manifest(short_labels, dir), Error);

    json unknown_label = two_subject_manifest();
    unknown_label["subjects"][0]["videos"][0]["label"] = "joy";
    EXPECT_THROW(parse_manifest(unknown_label, dir), Error);

    json dup_video = two_subject_manifest();
    dup_video["subjects"][0]["videos"].push_back(dup_video["subjects"][0]["videos"][0]);
    EXPECT_THROW(parse_manifest(dup_video, dir), Error);
}

TEST(Manifest, RoundTripThroughJson) {
    auto dir = fixture_dir("manifest_roundtrip");
    Manifest a = parse_manifest(two_subject_manifest(), dir);
    Manifest b = parse_manifest(manifest_to_json(a), dir);
    EXPECT_EQ(manifest_to_json(a), manifest_to_json(b));
}

// Mutated documents either parse into a manifest that satisfies every
// invariant or are rejected with a tricache::Error.
TEST(Manifest, FuzzedDocumentsNeverYieldInvalidManifest) {
    auto dir = fixture_dir("manifest_fuzz");
    std::mt19937_64 rng(7);
    const json base = two_subject_manifest();
    const json flat = base.flatten();
    std::vector<std::string> keys;
    for (auto it = flat.begin(); it != flat.end(); ++it) keys.push_back(it.key());
    const std::vector<json> replacements = {nullptr, -1, 0, 1, 2, 3, 4, 1e9, 2.5, "", "x", "pain", "target",
                                            "source", true, json::array(), json::object()};
    int accepted = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        json f = flat;
        const int n_mut = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < n_mut; ++k) {
            const auto& key = keys[rng() % keys.size()];
            if (rng() % 5 == 0) {
                f.erase(key);
            } else {
                f[key] = replacements[rng() % replacements.size()];
            }
        }
        json doc;
        try {
            doc = f.unflatten();
        } catch (const json::exception&) {
            continue;
        }
        try {
            Manifest m = parse_manifest(doc, dir);
            ++accepted;
            ASSERT_GE(m.dim, 1u);
            std::set<std::string> ids;
            for (const auto& s : m.subjects) {
                ASSERT_TRUE(ids.insert(s.id).second);
                std::set<std::string> vids;
                for (const auto& v : s.videos) {
                    ASSERT_TRUE(vids.insert(v.id).second);
                    ASSERT_EQ(fs::file_size(m.resolve(v)), v.frames * m.dim * 4);
                    if (v.anchor_range) {
                        ASSERT_LT(v.anchor_range->start, v.anchor_range->end);
                        ASSERT_LE(v.anchor_range->end, v.frames);
                        ASSERT_EQ(s.role, SubjectRole::Target);
                    }
                    if (v.frame_labels) {
                        ASSERT_EQ(v.frame_labels->size(), v.frames);
                        ASSERT_EQ(s.role, SubjectRole::Source);
                    }
                }
            }
        } catch (const Error&) {
        }
    }
    EXPECT_GT(accepted, 0);
}

TEST(Embeddings, ReadsRowMajorFloat32) {
    auto dir = oracle::scratch_dir("emb_read");
    {
        std::ofstream f(dir / "a.f32", std::ios::binary);
        const float vals[6] = {1, 2, 3, 4, 5, 6};
        f.write(reinterpret_cast<const char*>(vals), sizeof vals);
    }
    EXPECT_EQ(fs::file_size(dir / "a.f32"), 24u);
    Manifest m;
    m.dim = 3;
    m.base_dir = dir;
    VideoRecord v;
    v.id = "a";
    v.frames = 2;
    v.embeddings_path = "a.f32";
    auto e = load_embeddings(m, v);
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[0], (Embedding{1, 2, 3}));
    EXPECT_EQ(e[1], (Embedding{4, 5, 6}));
}

TEST(Embeddings, NanReportsFrame) {
    auto dir = oracle::scratch_dir("emb_nan");
    std::vector<Embedding> rows = {{1, 0, 0}, {0, std::numeric_limits<double>::quiet_NaN(), 0}};
    write_f32_matrix(dir / "a.f32", rows);
    Manifest m;
    m.dim = 3;
    m.base_dir = dir;
    VideoRecord v{"a", 2, std::nullopt, std::nullopt, std::nullopt, "a.f32"};
    try {
        load_embeddings(m, v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CorruptData);
        EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos) << e.what();
    }
}

TEST(Embeddings, EmptyVideo) {
    auto dir = oracle::scratch_dir("emb_empty");
    { std::ofstream f(dir / "a.f32", std::ios::binary); }
    Manifest m;
    m.dim = 3;
    m.base_dir = dir;
    VideoRecord v{"a", 0, std::nullopt, std::nullopt, std::nullopt, "a.f32"};
    EXPECT_TRUE(load_embeddings(m, v).empty());
}

TEST(Anchors, RoundTripNormalizes) {
    auto dir = oracle::scratch_dir("anchors");
    std::vector<Embedding> a = {{2, 0, 0}, {0, 0, 3}};
    save_anchors(dir / "anchors.json", ClassSet({"x", "y"}), a, 12.5);
    AnchorSet set = load_anchors(dir / "anchors.json");
    EXPECT_EQ(set.classes.labels(), (std::vector<std::string>{"x", "y"}));
    EXPECT_DOUBLE_EQ(set.anchors.logit_scale(), 12.5);
    EXPECT_EQ(set.anchors.anchor(1), (Embedding{0, 0, 1}));
}

namespace {

PrototypeStore sample_store(std::mt19937_64& rng, std::size_t dim) {
    PrototypeStore store(dim, ClassSet({"neutral", "pain"}));
    for (const char* s : {"S1", "S2"}) {
        for (ClassIndex c = 0; c < 2; ++c) {
            for (int k = 0; k < 2; ++k) {
                PrototypeEntry e;
                e.vector = oracle::random_unit(rng, dim);
                e.cluster_size = 3 + static_cast<std::size_t>(k);
                e.meta = {0.1 * (k + 1), 3, 0.75, k == 1};
                store.add(s, c, e);
            }
        }
    }
    return store;
}

}  // namespace

TEST(PrototypeStoreIo, OneEntryRoundTrip) {
    auto dir = oracle::scratch_dir("protos_one");
    PrototypeStore store(3, ClassSet({"neutral", "pain"}));
    PrototypeEntry e;
    e.vector = normalize_or_throw(std::vector<double>{0.1, 0.2, 0.3});
    e.cluster_size = 4;
    e.meta = {0.05, 3, 0.9, false};
    store.add("S1", 0, e);
    save_prototype_store(store, dir / "protos.json");
    EXPECT_EQ(load_prototype_store(dir / "protos.json"), store);
}

TEST(PrototypeStoreIo, RandomStoresRoundTripBitExact) {
    auto dir = oracle::scratch_dir("protos_rand");
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        PrototypeStore store = sample_store(rng, 5 + trial);
        ParamSearchReport rep;
        rep.chosen = DbscanParams{0.2, 3};
        rep.candidates.push_back({{0.2, 3}, 0.1, 2, 0.8, true});
        rep.candidates.push_back({{0.4, 5}, 0.6, 1, std::nullopt, false});
        store.set_report("S1", 1, rep);
        save_prototype_store(store, dir / "p.json");
        PrototypeStore back = load_prototype_store(dir / "p.json");
        ASSERT_EQ(back, store);
        for (const auto& [key, list] : store.all()) {
            const auto& other = back.entries(key.subject, key.cls);
            for (std::size_t i = 0; i < list.size(); ++i) {
                for (std::size_t j = 0; j < list[i].vector.size(); ++j) {
                    ASSERT_EQ(std::memcmp(&list[i].vector[j], &other[i].vector[j], sizeof(double)), 0);
                }
            }
        }
    }
}

TEST(PrototypeStoreIo, UnknownVersion) {
    auto dir = oracle::scratch_dir("protos_version");
    std::mt19937_64 rng(3);
    save_prototype_store(sample_store(rng, 4), dir / "p.json");
    json doc = read_json(dir / "p.json");
    doc["format"] = "tricache-protos/99";
    write_json(dir / "p.json", doc);
    EXPECT_EQ(kind_of([&] { load_prototype_store(dir / "p.json"); }), ErrorKind::Version);
}

TEST(PrototypeStoreIo, TruncatedBlob) {
    auto dir = oracle::scratch_dir("protos_trunc");
    std::mt19937_64 rng(4);
    save_prototype_store(sample_store(rng, 4), dir / "p.json");
    fs::resize_file(dir / "p.f32", fs::file_size(dir / "p.f32") - 4);
    EXPECT_EQ(kind_of([&] { load_prototype_store(dir / "p.json"); }), ErrorKind::SizeMismatch);
}

TEST(PrototypeStoreIo, EmptyClassEntryRejectedOnSave) {
    auto dir = oracle::scratch_dir("protos_empty");
    PrototypeStore store(3, ClassSet({"neutral", "pain"}));
    PrototypeEntry e;
    e.vector = {1, 0, 0};
    e.cluster_size = 1;
    store.add("S1", 0, e);
    EXPECT_NO_THROW(store.validate());
    store.set_entries("S1", 1, {});
    EXPECT_EQ(kind_of([&] { save_prototype_store(store, dir / "p.json"); }), ErrorKind::Validation);
    EXPECT_FALSE(fs::exists(dir / "p.json"));
}
