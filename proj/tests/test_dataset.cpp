#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "leafid/dataset.hpp"

using namespace leafid;

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

// species -> number of images, written as a tiny valid corpus
void write_corpus_dir(const std::filesystem::path& root,
                      const std::vector<std::pair<std::string, int>>& layout) {
    for (const auto& [species, n] : layout) {
        std::filesystem::create_directories(root / species);
        for (int i = 0; i < n; ++i) {
            Image img = testutil::blob_image(32, 32, 8, 8, 24, 24);
            img.px(0, 0)[0] = static_cast<std::uint8_t>(i);  // make files distinct
            char name[32];
            std::snprintf(name, sizeof(name), "%s_%03d.png", species.c_str(), i);
            save_png(img, (root / species / name).string());
        }
    }
}

}  // namespace

TEST_CASE("taxonomy loads and validates") {
    testutil::TempDir dir("tax");
    auto csv = dir.path() / "t.csv";

    SUBCASE("three species over two genera") {
        write_file(csv,
                   "species_id,genus_id,family_id,display_name\n"
                   "sp_a,gen_x,fam_1,Alpha\n"
                   "sp_b,gen_x,fam_1,Beta\n"
                   "sp_c,gen_y,fam_1,Gamma, the third\n");
        auto records = load_taxonomy(csv.string());
        REQUIRE(records.size() == 3);
        Taxonomy tax(records);
        CHECK(tax.genus_ids().size() == 2);
        CHECK(tax.genus_of("sp_c") == "gen_y");
        CHECK(tax.family_of("sp_a") == "fam_1");
        CHECK(records[2].display_name == "Gamma, the third");  // comma kept in last field
    }

    SUBCASE("species listed under two genera is rejected") {
        write_file(csv,
                   "species_id,genus_id,family_id,display_name\n"
                   "sp_a,gen_x,fam_1,Alpha\n"
                   "sp_a,gen_y,fam_1,Alpha again\n");
        CHECK_THROWS_WITH_AS(load_taxonomy(csv.string()), doctest::Contains("duplicate"), Error);
    }

    SUBCASE("header-only file yields empty list") {
        write_file(csv, "species_id,genus_id,family_id,display_name\n");
        CHECK(load_taxonomy(csv.string()).empty());
    }

    SUBCASE("malformed row names the line") {
        write_file(csv,
                   "species_id,genus_id,family_id,display_name\n"
                   "sp_a,gen_x,fam_1,Alpha\n"
                   "garbage-without-commas\n");
        CHECK_THROWS_WITH_AS(load_taxonomy(csv.string()), doctest::Contains("line 3"), Error);
    }

    SUBCASE("genus split across families is rejected") {
        write_file(csv,
                   "species_id,genus_id,family_id,display_name\n"
                   "sp_a,gen_x,fam_1,Alpha\n"
                   "sp_b,gen_x,fam_2,Beta\n");
        CHECK_THROWS_WITH_AS(load_taxonomy(csv.string()), doctest::Contains("two families"), Error);
    }

    SUBCASE("missing file is an io error") {
        CHECK_THROWS_AS(load_taxonomy((dir.path() / "nope.csv").string()), Error);
    }
}

TEST_CASE("taxonomy round-trips through save") {
    testutil::TempDir dir("taxrt");
    std::vector<TaxonRecord> recs = {{"sp_a", "gen_x", "fam_1", "Alpha"},
                                     {"sp_b", "gen_y", "fam_2", "Beta"}};
    auto path = (dir.path() / "t.csv").string();
    save_taxonomy(recs, path);
    auto back = load_taxonomy(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].genus_id == "gen_y");
}

TEST_CASE("split loading") {
    testutil::TempDir dir("split");
    auto root = dir.path() / "corpus";
    write_corpus_dir(root, {{"sp_a", 20}, {"sp_b", 20}});
    Taxonomy tax({{"sp_a", "gen_x", "fam_1", "A"}, {"sp_b", "gen_y", "fam_1", "B"}});

    SUBCASE("per-class count reserves a training sample") {
        write_corpus_dir(dir.path() / "small", {{"sp_a", 10}, {"sp_b", 10}});
        CHECK_THROWS_WITH_AS(
            load_split((dir.path() / "small").string(), tax, SplitByCount{15}, 1),
            doctest::Contains("sp_a"), Error);
    }

    SUBCASE("same seed yields the identical split") {
        auto s1 = load_split(root.string(), tax, SplitByCount{15}, 7);
        auto s2 = load_split(root.string(), tax, SplitByCount{15}, 7);
        REQUIRE(s1.test.size() == s2.test.size());
        CHECK(s1.test.size() == 30);
        CHECK(s1.train.size() == 10);
        for (std::size_t i = 0; i < s1.test.size(); ++i)
            CHECK(s1.test[i].sample_id == s2.test[i].sample_id);

        auto s3 = load_split(root.string(), tax, SplitByCount{15}, 8);
        bool same = s1.test.size() == s3.test.size();
        if (same)
            for (std::size_t i = 0; i < s1.test.size(); ++i)
                same = same && s1.test[i].sample_id == s3.test[i].sample_id;
        CHECK_FALSE(same);  // different seed moves the split
    }

    SUBCASE("train and test ids are disjoint and resolvable") {
        auto s = load_split(root.string(), tax, SplitByFraction{0.25}, 3);
        std::set<std::string> train_ids, test_ids;
        for (const auto& t : s.train) train_ids.insert(t.sample_id);
        for (const auto& t : s.test) {
            test_ids.insert(t.sample_id);
            CHECK(train_ids.count(t.sample_id) == 0);
        }
        CHECK(train_ids.size() + test_ids.size() == 40);
        for (const auto& t : s.train) {
            REQUIRE(t.species_id.has_value());
            CHECK_NOTHROW(s.taxonomy.family_of(*t.species_id));
        }
    }

    SUBCASE("manifest selects exactly the listed ids") {
        write_file(dir.path() / "manifest.txt", "sp_a_000\nsp_b_003\n");
        auto s = load_split(root.string(), tax, SplitByManifest{(dir.path() / "manifest.txt").string()}, 0);
        REQUIRE(s.test.size() == 2);
        CHECK(s.test[0].sample_id == "sp_a_000");
        CHECK(s.test[1].sample_id == "sp_b_003");
        CHECK(s.train.size() == 38);
    }

    SUBCASE("unknown species directory is rejected") {
        write_corpus_dir(root, {{"sp_zz", 1}});
        CHECK_THROWS_WITH_AS(load_split(root.string(), tax, SplitByCount{1}, 0),
                             doctest::Contains("sp_zz"), Error);
    }
}

TEST_CASE("unreadable image names the file") {
    testutil::TempDir dir("badimg");
    auto root = dir.path() / "corpus";
    std::filesystem::create_directories(root / "sp_a");
    write_file(root / "sp_a" / "broken.png", "this is not a png");
    Taxonomy tax({{"sp_a", "gen_x", "fam_1", "A"}});
    CHECK_THROWS_WITH_AS(load_split(root.string(), tax, SplitByCount{0}, 0),
                         doctest::Contains("broken"), Error);
}
