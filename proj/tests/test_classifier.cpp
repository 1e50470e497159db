#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "leafid/classifier.hpp"

using namespace leafid;

namespace {

// Reference sets assembled directly from embeddings: the ranking and fusion
// machinery only touches embeddings, ids and fingerprints.
ReferenceSet synthetic_refs(const SiameseModel& a, const SiameseModel& b,
                            const std::vector<std::tuple<std::string, std::string, std::string>>& ids,
                            std::uint64_t seed) {
    ReferenceSet refs;
    refs.n_r = 6;
    refs.fingerprint_a = a.fingerprint();
    refs.fingerprint_b = b.fingerprint();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (const auto& [sample, species, genus] : ids) {
        ReferenceEntry e;
        e.sample_id = sample;
        e.species_id = species;
        e.genus_id = genus;
        e.global_embedding.resize(a.embed_dim());
        e.local_embedding.resize(b.embed_dim());
        for (int i = 0; i < a.embed_dim(); ++i) e.global_embedding[i] = dist(rng);
        for (int i = 0; i < b.embed_dim(); ++i) e.local_embedding[i] = dist(rng);
        refs.entries.push_back(std::move(e));
    }
    return refs;
}

Eigen::VectorXf random_embedding(int m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    Eigen::VectorXf v(m);
    for (int i = 0; i < m; ++i) v[i] = dist(rng);
    return v;
}

// Independent straightforward re-implementation of stages 1-2 plus the
// fusion formula, used as the ranking oracle.
SpeciesRanking oracle_classify(const QueryEmbeddings& q, const SiameseModel& a,
                               const SiameseModel& b, const ReferenceSet& refs, int k) {
    struct Row {
        double score;
        std::string species, sample, genus;
    };
    std::vector<Row> rows;
    for (const auto& e : refs.entries)
        rows.push_back({head_similarity(a, q.global_embedding, e.global_embedding), e.species_id,
                        e.sample_id, e.genus_id});
    std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
        if (x.score != y.score) return x.score > y.score;
        if (x.species != y.species) return x.species < y.species;
        return x.sample < y.sample;
    });
    if (static_cast<int>(rows.size()) > k) rows.resize(k);

    std::map<std::string, int> weights;
    for (const auto& r : rows) ++weights[r.genus];
    double wsum = 0;
    for (auto& [g, w] : weights) wsum += w;

    std::map<std::string, double> s_i;
    for (const auto& e : refs.entries) {
        if (!weights.count(e.genus_id)) continue;
        double s = head_similarity(b, q.local_embedding, e.local_embedding);
        auto it = s_i.find(e.species_id);
        if (it == s_i.end() || s > it->second) s_i[e.species_id] = s;
    }

    SpeciesRanking out;
    for (const auto& e : refs.entries) {
        if (!s_i.count(e.species_id)) continue;
        out.push_back({e.species_id, weights.at(e.genus_id) * s_i.at(e.species_id) / wsum});
        s_i.erase(e.species_id);  // one row per species
    }
    std::sort(out.begin(), out.end(), [](const ScoredSpecies& x, const ScoredSpecies& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.species_id < y.species_id;
    });
    return out;
}

}  // namespace

TEST_CASE("rank_genus returns all references sorted for exhaustive k") {
    SiameseModel a = make_model("tiny2", 32, 32, View::global, Grouping::genus, 1);
    SiameseModel b = make_model("tiny2", 32, 32, View::local, Grouping::species, 2);
    auto refs = synthetic_refs(a, b,
                               {{"r0", "sp0", "g0"},
                                {"r1", "sp0", "g0"},
                                {"r2", "sp1", "g0"},
                                {"r3", "sp2", "g1"},
                                {"r4", "sp3", "g1"}},
                               7);
    auto q = random_embedding(a.embed_dim(), 50);
    auto rk = rank_genus(q, a, refs, 5);
    REQUIRE(rk.size() == 5);
    for (std::size_t i = 1; i < rk.size(); ++i) CHECK(rk[i - 1].score >= rk[i].score);

    auto rk_more = rank_genus(q, a, refs, 100);  // k beyond the gallery
    CHECK(rk_more.size() == 5);
}

TEST_CASE("a query equal to a reference embedding tops the ranking at logistic(b)") {
    SiameseModel a = make_model("tiny2", 32, 32, View::global, Grouping::genus, 3);
    SiameseModel b = make_model("tiny2", 32, 32, View::local, Grouping::species, 4);
    auto refs = synthetic_refs(a, b,
                               {{"r0", "sp0", "g0"},
                                {"r1", "sp1", "g0"},
                                {"r2", "sp2", "g1"},
                                {"r3", "sp3", "g1"}},
                               8);
    const double self = 1.0 / (1.0 + std::exp(-static_cast<double>(a.head_b)));
    Eigen::VectorXf q = refs.entries[2].global_embedding;
    auto rk = rank_genus(q, a, refs, 4);
    CHECK(rk[0].entry_index == 2);
    CHECK(rk[0].score == doctest::Approx(self).epsilon(1e-12));
    for (const auto& r : rk) CHECK(r.score <= rk[0].score);
}

TEST_CASE("genus frequencies are exact multiset counts") {
    RankedGenusList rk = {{0, "ga", 0.9}, {1, "ga", 0.8}, {2, "gb", 0.7}, {3, "ga", 0.6}, {4, "gb", 0.5}};
    auto w = genus_frequencies(rk);
    CHECK(w.at("ga") == 3);
    CHECK(w.at("gb") == 2);

    RankedGenusList one = {{0, "gz", 0.4}};
    CHECK(genus_frequencies(one).at("gz") == 1);

    RankedGenusList same(5, {0, "ga", 0.1});
    CHECK(genus_frequencies(same).at("ga") == 5);

    CHECK_THROWS_AS(genus_frequencies({}), Error);
}

TEST_CASE("score_species covers candidate genera and flags empty ones") {
    SiameseModel a = make_model("tiny2", 32, 32, View::global, Grouping::genus, 5);
    SiameseModel b = make_model("tiny2", 32, 32, View::local, Grouping::species, 6);
    auto refs = synthetic_refs(a, b,
                               {{"r0", "sp0", "g0"},
                                {"r1", "sp1", "g0"},
                                {"r2", "sp2", "g0"},
                                {"r3", "sp3", "g1"},
                                {"r4", "sp4", "g1"}},
                               9);
    auto q = random_embedding(b.embed_dim(), 60);
    std::vector<std::string> warnings;
    auto scores = score_species(q, b, refs, {"g0", "g1"}, SpeciesAggregation::max, &warnings);
    CHECK(scores.size() == 5);
    CHECK(warnings.empty());

    // query equal to a reference's local embedding attains logistic(b)
    const double self = 1.0 / (1.0 + std::exp(-static_cast<double>(b.head_b)));
    auto hit = score_species(refs.entries[3].local_embedding, b, refs, {"g1"});
    CHECK(hit.at("sp3") == doctest::Approx(self).epsilon(1e-12));

    auto with_ghost = score_species(q, b, refs, {"g0", "ghost"}, SpeciesAggregation::max, &warnings);
    CHECK(with_ghost.size() == 3);
    REQUIRE_FALSE(warnings.empty());
    CHECK(warnings.front().find("ghost") != std::string::npos);
}

TEST_CASE("fusion follows the weighted formula") {
    SiameseModel a = make_model("tiny2", 32, 32, View::global, Grouping::genus, 7);
    SiameseModel b = make_model("tiny2", 32, 32, View::local, Grouping::species, 8);
    auto refs = synthetic_refs(a, b,
                               {{"r0", "a1", "A"}, {"r1", "a2", "A"}, {"r2", "b1", "B"}},
                               10);

    SUBCASE("hand-evaluated zeta") {
        GenusWeights w{{"A", 3}, {"B", 2}};
        std::map<std::string, double> s{{"a1", 0.8}};
        auto ranking = fuse(w, s, refs);
        REQUIRE(ranking.size() == 1);
        CHECK(ranking[0].score == doctest::Approx(0.48).epsilon(1e-12));
    }

    SUBCASE("single genus: order equals similarity order, zeta equals S") {
        GenusWeights w{{"A", 5}};
        std::map<std::string, double> s{{"a1", 0.7}, {"a2", 0.9}};
        auto ranking = fuse(w, s, refs);
        REQUIRE(ranking.size() == 2);
        CHECK(ranking[0].species_id == "a2");
        CHECK(ranking[0].score == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(ranking[1].score == doctest::Approx(0.7).epsilon(1e-12));
    }

    SUBCASE("equal similarities: order follows genus weights") {
        GenusWeights w{{"A", 4}, {"B", 1}};
        std::map<std::string, double> s{{"a1", 0.6}, {"b1", 0.6}};
        auto ranking = fuse(w, s, refs);
        CHECK(ranking[0].species_id == "a1");
    }

    SUBCASE("missing genus weight is an error") {
        GenusWeights w{{"A", 2}};
        std::map<std::string, double> s{{"b1", 0.5}};
        CHECK_THROWS_WITH_AS(fuse(w, s, refs), doctest::Contains("carries no weight"), Error);
    }
}

TEST_CASE("classify_embedded matches the brute-force oracle on randomized galleries") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        SiameseModel a = make_model("tiny2", 32, 32, View::global, Grouping::genus, 100 + trial);
        SiameseModel b = make_model("tiny2", 32, 32, View::local, Grouping::species, 200 + trial);

        std::uniform_int_distribution<int> n_genera(1, 4), n_species(1, 3), n_refs(1, 4);
        std::vector<std::tuple<std::string, std::string, std::string>> ids;
        int g_total = n_genera(rng);
        for (int g = 0; g < g_total; ++g)
            for (int s = 0, s_total = n_species(rng); s < s_total; ++s)
                for (int r = 0, r_total = n_refs(rng); r < r_total; ++r)
                    ids.emplace_back("r" + std::to_string(g) + std::to_string(s) + std::to_string(r),
                                     "sp" + std::to_string(g) + "_" + std::to_string(s),
                                     "g" + std::to_string(g));
        if (ids.size() > 50) ids.resize(50);
        auto refs = synthetic_refs(a, b, ids, 500 + trial);

        QueryEmbeddings q;
        q.global_embedding = random_embedding(a.embed_dim(), 900 + trial);
        q.local_embedding = random_embedding(b.embed_dim(), 950 + trial);
        // occasionally duplicate a reference embedding to exercise ties
        if (trial % 5 == 0 && refs.entries.size() > 2) {
            refs.entries[1].global_embedding = refs.entries[0].global_embedding;
            q.global_embedding = refs.entries[0].global_embedding;
        }

        std::uniform_int_distribution<int> k_dist(1, static_cast<int>(refs.entries.size()));
        const int k = k_dist(rng);
        ClassifyOptions opts;
        opts.k = k;
        auto got = classify_embedded(q, a, b, refs, opts);
        auto expect = oracle_classify(q, a, b, refs, k);
        REQUIRE(got.ranking.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(got.ranking[i].species_id == expect[i].species_id);
            CHECK(got.ranking[i].score == expect[i].score);
        }
    }
}

TEST_CASE("truncation yields nested prefixes and no padding") {
    SiameseModel a = make_model("tiny2", 32, 32, View::global, Grouping::genus, 11);
    SiameseModel b = make_model("tiny2", 32, 32, View::local, Grouping::species, 12);
    std::vector<std::tuple<std::string, std::string, std::string>> ids;
    for (int g = 0; g < 3; ++g)
        for (int s = 0; s < 2; ++s)
            ids.emplace_back("r" + std::to_string(g) + std::to_string(s),
                             "sp" + std::to_string(g) + std::to_string(s), "g" + std::to_string(g));
    auto refs = synthetic_refs(a, b, ids, 13);
    QueryEmbeddings q{random_embedding(a.embed_dim(), 70), random_embedding(b.embed_dim(), 71)};

    ClassifyOptions full;
    full.k = 4;
    auto base = classify_embedded(q, a, b, refs, full);
    for (int top_n : {1, 3, 5}) {
        ClassifyOptions opts;
        opts.k = 4;
        opts.top_n = top_n;
        auto r = classify_embedded(q, a, b, refs, opts);
        CHECK(r.ranking.size() == std::min<std::size_t>(top_n, base.ranking.size()));
        for (std::size_t i = 0; i < r.ranking.size(); ++i)
            CHECK(r.ranking[i].species_id == base.ranking[i].species_id);
    }

    // top_n larger than the candidate list: full list, no padding
    ClassifyOptions big;
    big.k = 4;
    big.top_n = 100;
    CHECK(classify_embedded(q, a, b, refs, big).ranking.size() == base.ranking.size());
}

TEST_CASE("zeta values stay in (0,1) and candidates never exceed the gallery") {
    SiameseModel a = make_model("tiny2", 32, 32, View::global, Grouping::genus, 21);
    SiameseModel b = make_model("tiny2", 32, 32, View::local, Grouping::species, 22);
    std::vector<std::tuple<std::string, std::string, std::string>> ids;
    for (int g = 0; g < 4; ++g)
        for (int s = 0; s < 3; ++s)
            for (int r = 0; r < 2; ++r)
                ids.emplace_back("e" + std::to_string(g * 100 + s * 10 + r),
                                 "sp" + std::to_string(g) + std::to_string(s),
                                 "g" + std::to_string(g));
    auto refs = synthetic_refs(a, b, ids, 23);

    for (int t = 0; t < 10; ++t) {
        QueryEmbeddings q{random_embedding(a.embed_dim(), 300 + t),
                          random_embedding(b.embed_dim(), 400 + t)};
        ClassifyOptions opts;
        opts.k = 5;
        auto r = classify_embedded(q, a, b, refs, opts);
        int weight_total = 0;
        for (const auto& [g, w] : r.weights) weight_total += w;
        CHECK(weight_total == 5);
        for (const auto& item : r.ranking) {
            CHECK(item.score > 0.0);
            CHECK(item.score < 1.0);
        }
        // stage-2 candidates are exactly the species of the stage-1 genera
        std::set<std::string> candidate_genera;
        for (const auto& [g, w] : r.weights) candidate_genera.insert(g);
        for (const auto& [sp, s] : r.species_scores) {
            auto idx = refs.entries_of_species(sp);
            CHECK(candidate_genera.count(refs.entries[idx.front()].genus_id) == 1);
        }
    }
}
