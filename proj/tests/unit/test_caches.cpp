#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "../support/oracles.hpp"
#include "tricache/caches.hpp"

using namespace tricache;

namespace {

std::vector<double> entropies(const TargetCache& cache, ClassIndex c) {
    std::vector<double> out;
    for (const auto& e : cache.bucket(c)) out.push_back(e.entropy);
    std::sort(out.begin(), out.end());
    return out;
}

// Top-r by cosine, weights max(cos, 0) + 1e-6, normalized; written
// independently of the library's aggregation.
std::optional<Embedding> weighted_reference(const std::vector<Embedding>& pool, const Embedding& q, std::size_t r) {
    if (pool.empty()) return std::nullopt;
    std::vector<std::pair<double, std::size_t>> sims;
    const double qn = std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& v = pool[i];
        const double vn = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        sims.push_back({std::inner_product(v.begin(), v.end(), q.begin(), 0.0) / (qn * vn), i});
    }
    std::stable_sort(sims.begin(), sims.end(), [](auto& a, auto& b) { return a.first > b.first; });
    Embedding acc(q.size(), 0.0);
    for (std::size_t k = 0; k < std::min(r, sims.size()); ++k) {
        const double w = std::max(sims[k].first, 0.0) + 1e-6;
        for (std::size_t j = 0; j < q.size(); ++j) acc[j] += w * pool[sims[k].second][j];
    }
    return normalize_or_throw(acc);
}

}  // namespace

TEST(TargetCacheTest, EvictsHighestEntropy) {
    TargetCache cache(Polarity::Positive, 1, 2);
    EXPECT_FALSE(cache.insert({1, 0}, 0, 0.1).evicted);
    EXPECT_FALSE(cache.insert({0, 1}, 0, 0.3).evicted);
    auto rep = cache.insert({1, 1}, 0, 0.2);
    ASSERT_TRUE(rep.evicted);
    EXPECT_DOUBLE_EQ(rep.evicted->entropy, 0.3);
    EXPECT_TRUE(rep.kept());
    EXPECT_EQ(entropies(cache, 0), (std::vector<double>{0.1, 0.2}));
}

TEST(TargetCacheTest, NewEntryCanBeItsOwnVictim) {
    TargetCache cache(Polarity::Positive, 1, 2);
    cache.insert({1, 0}, 0, 0.1);
    cache.insert({0, 1}, 0, 0.2);
    auto rep = cache.insert({1, 1}, 0, 0.5);
    ASSERT_TRUE(rep.evicted);
    EXPECT_FALSE(rep.kept());
    EXPECT_EQ(entropies(cache, 0), (std::vector<double>{0.1, 0.2}));
}

TEST(TargetCacheTest, TiesEvictOldest) {
    TargetCache cache(Polarity::Negative, 1, 2);
    auto a = cache.insert({1, 0}, 0, 0.4);
    cache.insert({0, 1}, 0, 0.4);
    auto rep = cache.insert({1, 1}, 0, 0.4);
    ASSERT_TRUE(rep.evicted);
    EXPECT_EQ(rep.evicted->seq, a.seq);
}

TEST(TargetCacheTest, MatchesReplayOracle) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t k = 1 + rng() % 3;
        const std::size_t cap = 1 + rng() % 5;
        TargetCache cache(Polarity::Positive, k, cap);
        std::vector<oracle::Offer> offers;
        const int n = static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            const ClassIndex c = rng() % k;
            // Coarse entropies so ties are frequent.
            const double h = static_cast<double>(rng() % 5) / 10.0;
            auto rep = cache.insert({1.0, 0.0}, c, h);
            offers.push_back({c, h, rep.seq});
            for (ClassIndex b = 0; b < k; ++b) ASSERT_LE(cache.bucket(b).size(), cap);
        }
        for (ClassIndex c = 0; c < k; ++c) {
            std::vector<std::uint64_t> got;
            for (const auto& e : cache.bucket(c)) got.push_back(e.seq);
            std::sort(got.begin(), got.end());
            ASSERT_EQ(got, oracle::surviving_seqs(offers, c, cap)) << "trial " << trial;
        }
    }
}

TEST(TargetCacheTest, RetrievalExamples) {
    TargetCache cache(Polarity::Positive, 2, 3);
    EXPECT_FALSE(cache.retrieve(Embedding{1, 0}, 3).has_value());
    cache.insert({0.6, 0.8}, 1, 0.1);
    auto one = cache.retrieve(Embedding{1, 0}, 3);
    ASSERT_TRUE(one);
    EXPECT_NEAR((*one)[0], 0.6, 1e-12);
    EXPECT_NEAR((*one)[1], 0.8, 1e-12);

    TargetCache two(Polarity::Positive, 2, 3);
    two.insert({1, 0}, 0, 0.1);
    two.insert({0, 1}, 1, 0.1);
    auto r1 = two.retrieve(Embedding{1, 0}, 1);
    ASSERT_TRUE(r1);
    EXPECT_NEAR((*r1)[0], 1.0, 1e-12);
    EXPECT_NEAR((*r1)[1], 0.0, 1e-12);
    auto filtered = two.retrieve(Embedding{1, 0}, 1, ClassIndex{1});
    ASSERT_TRUE(filtered);
    EXPECT_NEAR((*filtered)[1], 1.0, 1e-12);
}

TEST(TargetCacheTest, RetrievalMatchesOracleAndIgnoresOrder) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t dim = 2 + rng() % 6;
        const std::size_t n = 1 + rng() % 8;
        std::vector<Embedding> pool;
        for (std::size_t i = 0; i < n; ++i) pool.push_back(oracle::random_unit(rng, dim));
        const Embedding q = oracle::random_unit(rng, dim);
        const std::size_t r = 1 + rng() % 10;

        TargetCache fwd(Polarity::Positive, 1, n);
        TargetCache rev(Polarity::Positive, 1, n);
        for (std::size_t i = 0; i < n; ++i) fwd.insert(pool[i], 0, 0.1);
        for (std::size_t i = n; i-- > 0;) rev.insert(pool[i], 0, 0.1);
        auto a = fwd.retrieve(q, r);
        auto b = rev.retrieve(q, r);
        auto want = weighted_reference(pool, q, r);
        ASSERT_TRUE(a && b && want);
        for (std::size_t j = 0; j < dim; ++j) {
            ASSERT_NEAR((*a)[j], (*want)[j], 1e-9);
            ASSERT_NEAR((*b)[j], (*want)[j], 1e-9);
        }
    }
}

TEST(SourceRetrieval, Examples) {
    std::vector<std::vector<SourcePrototype>> per_class(2);
    per_class[0].push_back({{1, 0, 0}, "S1", 0.1, 3});
    per_class[0].push_back({normalize_or_throw(std::vector<double>{0.8, 0.6, 0}), "S1", 0.1, 2});
    per_class[1].push_back({{0, 0, 1}, "S2", 0.2, 4});
    PersonalizedSourceCache cache("T", per_class, {{"S1", 0.1}, {"S2", 0.2}});

    auto same = retrieve_source(cache, Embedding{0, 0, 1}, 1);
    EXPECT_NEAR(same[2], 1.0, 1e-12);

    const Embedding q = normalize_or_throw(std::vector<double>{1, 0.2, 0.1});
    auto got = retrieve_source(cache, q, 2);
    std::vector<Embedding> pool = {per_class[0][0].vector, per_class[0][1].vector, per_class[1][0].vector};
    auto want = weighted_reference(pool, q, 2);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got[j], (*want)[j], 1e-12);

    std::vector<std::vector<SourcePrototype>> single(2);
    single[0].push_back({{0, 1}, "S1", 0.0, 1});
    single[1].push_back({{0, 1}, "S1", 0.0, 1});
    PersonalizedSourceCache one("T", single, {{"S1", 0.0}});
    EXPECT_EQ(retrieve_source(one, Embedding{1, 0}, 3), (Embedding{0, 1}));
}

TEST(TargetCacheIo, RoundTrip) {
    auto dir = oracle::scratch_dir("target_cache");
    std::mt19937_64 rng(2);
    TargetCache cache(Polarity::Negative, 2, 3);
    for (int i = 0; i < 9; ++i) {
        Embedding v = oracle::random_unit(rng, 4);
        round_to_f32(v);
        cache.insert(v, i % 2, 0.05 * i);
    }
    ClassSet classes({"a", "b"});
    save_target_cache(cache, classes, dir / "neg.json");
    TargetCache back = load_target_cache(dir / "neg.json", classes);
    EXPECT_EQ(back.polarity(), Polarity::Negative);
    for (ClassIndex c = 0; c < 2; ++c) EXPECT_EQ(back.bucket(c), cache.bucket(c));
}
