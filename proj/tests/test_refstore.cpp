#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "leafid/classifier.hpp"
#include "leafid/refstore.hpp"
#include "leafid/synth.hpp"

using namespace leafid;

namespace {

std::vector<LeafSample> id_samples(const std::vector<std::pair<std::string, int>>& species_counts) {
    std::vector<LeafSample> out;
    for (const auto& [sp, n] : species_counts)
        for (int i = 0; i < n; ++i) {
            LeafSample s;
            s.sample_id = sp + "_" + std::to_string(i);
            s.species_id = sp;
            s.image = Image(1, 1);
            out.push_back(std::move(s));
        }
    return out;
}

std::map<std::string, int> count_per_species(const ReferenceSelection& sel) {
    std::map<std::string, int> c;
    for (const auto& id : sel.sample_ids) c[id.substr(0, id.rfind('_'))]++;
    return c;
}

struct SmallPipeline {
    SynthDataset data;
    PreprocessConfig pp;
    SiameseModel model_a = make_model("tiny2", 224, 224, View::global, Grouping::genus, 1);
    SiameseModel model_b = make_model("tiny2", 32, 32, View::local, Grouping::species, 2);

    SmallPipeline() {
        SynthSpec spec;
        spec.num_genera = 2;
        spec.species_per_genus = 2;
        spec.samples_per_species = 3;
        spec.train_per_species = 2;
        spec.image_size = 128;
        spec.seed = 42;
        data = generate(spec);
        pp.crop_size = 32;
    }
};

}  // namespace

TEST_CASE("reference selection covers every species of a genus") {
    Taxonomy tax({{"pr_a", "prunus", "ros", "A"},
                  {"pr_b", "prunus", "ros", "B"},
                  {"pr_c", "prunus", "ros", "C"}});

    SUBCASE("three species, two references each: six for the genus") {
        auto samples = id_samples({{"pr_a", 5}, {"pr_b", 5}, {"pr_c", 5}});
        auto sel = select_references(samples, tax, 2, 9);
        CHECK(sel.sample_ids.size() == 6);
        auto counts = count_per_species(sel);
        CHECK(counts["pr_a"] == 2);
        CHECK(counts["pr_b"] == 2);
        CHECK(counts["pr_c"] == 2);
        CHECK(sel.warnings.empty());
    }

    SUBCASE("one reference per species covers each species once") {
        Taxonomy tax4({{"x_a", "gx", "f", "A"},
                       {"x_b", "gx", "f", "B"},
                       {"x_c", "gx", "f", "C"},
                       {"x_d", "gx", "f", "D"}});
        auto samples = id_samples({{"x_a", 3}, {"x_b", 3}, {"x_c", 3}, {"x_d", 3}});
        auto sel = select_references(samples, tax4, 1, 5);
        CHECK(sel.sample_ids.size() == 4);
        for (const auto& [sp, n] : count_per_species(sel)) CHECK(n == 1);
    }

    SUBCASE("shortfall refills from siblings with a warning") {
        auto samples = id_samples({{"pr_a", 1}, {"pr_b", 10}, {"pr_c", 10}});
        auto sel = select_references(samples, tax, 6, 5);
        auto counts = count_per_species(sel);
        CHECK(counts["pr_a"] == 1);                 // all it has
        CHECK(sel.sample_ids.size() == 18);         // genus budget reached via siblings
        CHECK(counts["pr_b"] + counts["pr_c"] == 17);
        REQUIRE_FALSE(sel.warnings.empty());
        CHECK(sel.warnings.front().find("pr_a") != std::string::npos);
    }

    SUBCASE("selection is deterministic per seed") {
        auto samples = id_samples({{"pr_a", 8}, {"pr_b", 8}, {"pr_c", 8}});
        auto s1 = select_references(samples, tax, 3, 77);
        auto s2 = select_references(samples, tax, 3, 77);
        CHECK(s1.sample_ids == s2.sample_ids);
        auto s3 = select_references(samples, tax, 3, 78);
        CHECK(s1.sample_ids != s3.sample_ids);
    }
}

TEST_CASE("reference build, extension and persistence") {
    SmallPipeline pipe;
    const auto& train = pipe.data.split.train;
    const auto& tax = pipe.data.split.taxonomy;

    auto sel = select_references(train, tax, 2, 3);
    ReferenceSet refs =
        build_references(train, sel, tax, pipe.model_a, pipe.model_b, pipe.pp, 2);

    SUBCASE("entry count and fingerprints") {
        CHECK(refs.entries.size() == 8);  // 4 species x 2 refs
        CHECK(refs.n_r == 2);
        CHECK(refs.fingerprint_a == pipe.model_a.fingerprint());
        CHECK_NOTHROW(refs.check_models(pipe.model_a, pipe.model_b));
    }

    SUBCASE("rebuild with the same seed is bit-identical") {
        ReferenceSet again =
            build_references(train, sel, tax, pipe.model_a, pipe.model_b, pipe.pp, 2);
        REQUIRE(again.entries.size() == refs.entries.size());
        for (std::size_t i = 0; i < refs.entries.size(); ++i) {
            CHECK(again.entries[i].sample_id == refs.entries[i].sample_id);
            CHECK(again.entries[i].global_embedding == refs.entries[i].global_embedding);
            CHECK(again.entries[i].local_embedding == refs.entries[i].local_embedding);
        }
    }

    SUBCASE("fingerprint mismatch at query time is rejected") {
        SiameseModel other = make_model("tiny2", 224, 224, View::global, Grouping::genus, 999);
        Eigen::VectorXf q = Eigen::VectorXf::Zero(pipe.model_a.embed_dim());
        CHECK_THROWS_AS(rank_genus(q, other, refs, 3), Error);
        CHECK_THROWS_WITH_AS(refs.check_models(other, pipe.model_b), doctest::Contains("model A"),
                             Error);
    }

    SUBCASE("add_species extends without touching inputs") {
        SynthSpec extra_spec;
        extra_spec.num_genera = 3;
        extra_spec.species_per_genus = 2;
        extra_spec.samples_per_species = 3;
        extra_spec.train_per_species = 2;
        extra_spec.image_size = 128;
        extra_spec.seed = 99;
        SynthDataset extra = generate(extra_spec);

        // keep only the genus not present in the base set (g02)
        std::vector<LeafSample> new_samples;
        for (const auto& s : extra.split.train)
            if (s.species_id->rfind("g02", 0) == 0) new_samples.push_back(s);
        std::vector<TaxonRecord> new_rows;
        for (const auto& r : extra.taxonomy)
            if (r.species_id.rfind("g02", 0) == 0) new_rows.push_back(r);
        Taxonomy merged = tax.merged_with(new_rows);

        const std::string fp_a = pipe.model_a.fingerprint();
        const std::size_t before = refs.entries.size();
        ReferenceSet bigger =
            add_species(refs, new_samples, merged, pipe.model_a, pipe.model_b, 4);

        CHECK(refs.entries.size() == before);  // input untouched
        CHECK(bigger.entries.size() == before + 4);
        CHECK(bigger.has_species("g02s00"));
        CHECK(pipe.model_a.fingerprint() == fp_a);  // models untouched

        // the new genus becomes rankable in stage 1
        Eigen::VectorXf q = bigger.entries.back().global_embedding;
        auto rk = rank_genus(q, pipe.model_a, bigger, static_cast<int>(bigger.entries.size()));
        bool seen = false;
        for (const auto& r : rk) seen |= r.genus_id == "g02";
        CHECK(seen);

        // duplicates are rejected
        CHECK_THROWS_WITH_AS(
            add_species(bigger, new_samples, merged, pipe.model_a, pipe.model_b, 4),
            doctest::Contains("already present"), Error);

        // adding nothing yields an equal copy
        ReferenceSet same = add_species(refs, {}, merged, pipe.model_a, pipe.model_b, 4);
        CHECK(same.entries.size() == refs.entries.size());
        for (std::size_t i = 0; i < refs.entries.size(); ++i)
            CHECK(same.entries[i].global_embedding == refs.entries[i].global_embedding);
    }

    SUBCASE("save/load round-trip is exact") {
        testutil::TempDir dir("refs");
        save_references(refs, dir.str());
        ReferenceSet back = load_references(dir.str());
        CHECK(back.n_r == refs.n_r);
        CHECK(back.fingerprint_a == refs.fingerprint_a);
        CHECK(back.preprocess.crop_size == refs.preprocess.crop_size);
        REQUIRE(back.entries.size() == refs.entries.size());
        for (std::size_t i = 0; i < refs.entries.size(); ++i) {
            CHECK(back.entries[i].sample_id == refs.entries[i].sample_id);
            CHECK(back.entries[i].global_embedding == refs.entries[i].global_embedding);
            CHECK(back.entries[i].local_embedding == refs.entries[i].local_embedding);
        }
    }

    SUBCASE("tampered cache is rejected") {
        testutil::TempDir dir("refsbad");
        save_references(refs, dir.str());
        {
            std::ofstream bin(dir.path() / "references.bin", std::ios::binary | std::ios::app);
            const float junk = 1.0f;
            bin.write(reinterpret_cast<const char*>(&junk), sizeof(junk));
        }
        CHECK_THROWS_WITH_AS(load_references(dir.str()), doctest::Contains("length"), Error);
    }

    SUBCASE("missing cache file is rejected") {
        testutil::TempDir dir("refsmiss");
        save_references(refs, dir.str());
        std::filesystem::remove(dir.path() / "references.bin");
        CHECK_THROWS_WITH_AS(load_references(dir.str()), doctest::Contains("missing"), Error);
    }
}
