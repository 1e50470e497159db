#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "leafid/gradcheck.hpp"
#include "leafid/model.hpp"

using namespace leafid;

TEST_CASE("l1_vector arithmetic") {
    Eigen::VectorXf a(2), b(2);
    a << 1.0f, 2.0f;
    b << 0.0f, 0.0f;
    auto v = l1_vector(a, b);
    CHECK(v[0] == 1.0f);
    CHECK(v[1] == 2.0f);
    CHECK(l1_scalar(a, b) == doctest::Approx(3.0));

    CHECK(l1_vector(a, a).isZero());
    CHECK((l1_vector(a, b) - l1_vector(b, a)).norm() == 0.0f);

    Eigen::VectorXf c(3);
    CHECK_THROWS_AS(l1_vector(a, c), Error);
}

TEST_CASE("pair_loss matches the cross-entropy formula") {
    CHECK(pair_loss(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(pair_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(pair_loss(1.0 - 1e-12, 1) < 1e-11);
    CHECK(pair_loss(1e-12, 0) < 1e-11);
    CHECK_THROWS_AS(pair_loss(0.0, 1), Error);
    CHECK_THROWS_AS(pair_loss(1.0, 1), Error);
    CHECK_THROWS_AS(pair_loss(-0.5, 0), Error);
    CHECK_THROWS_AS(pair_loss(0.5, 2), Error);
}

TEST_CASE("embedding basics") {
    SiameseModel m = make_model("tiny2", 32, 32, View::global, Grouping::species, 11);
    Image img = testutil::random_image(32, 32, 3);

    auto e1 = embed(m, img);
    auto e2 = embed(m, img);
    CHECK(e1.size() == m.embed_dim());
    CHECK((e1 - e2).norm() == 0.0f);  // deterministic
    CHECK(e1.allFinite());

    Image wrong = testutil::random_image(16, 16, 3);
    CHECK_THROWS_AS(embed(m, wrong), Error);
}

TEST_CASE("similarity is symmetric, bounded, and maximal on identical inputs") {
    SiameseModel m = make_model("tiny2", 32, 32, View::global, Grouping::species, 23);
    const double self = 1.0 / (1.0 + std::exp(-static_cast<double>(m.head_b)));

    for (int t = 0; t < 20; ++t) {
        Image a = testutil::random_image(32, 32, 100 + t);
        Image b = testutil::random_image(32, 32, 200 + t);
        const double sab = similarity(m, a, b);
        const double sba = similarity(m, b, a);
        CHECK(sab > 0.0);
        CHECK(sab < 1.0);
        CHECK(sab == doctest::Approx(sba).epsilon(1e-12));
        CHECK(similarity(m, a, a) == doctest::Approx(self).epsilon(1e-12));
        // head weights are non-positive, so the self-similarity bounds all pairs
        CHECK(sab <= self + 1e-12);
    }
}

TEST_CASE("twins share one parameter storage") {
    SiameseModel m = make_model("tiny2", 32, 32, View::global, Grouping::species, 5);
    Image a = testutil::random_image(32, 32, 1);
    // Perturb a parameter and observe the change through both twin roles.
    auto before_l = embed(m, a);
    m.params.conv_w[0](0, 0) += 0.5f;
    auto after_l = embed(m, a);
    CHECK((before_l - after_l).norm() > 0.0f);
    // the "right" twin is the same embed path: identical output for the image
    auto after_r = embed(m, a);
    CHECK((after_l - after_r).norm() == 0.0f);
}

TEST_CASE("model save/load round-trip") {
    testutil::TempDir dir("model");
    SiameseModel m = make_model("tiny2", 32, 32, View::local, Grouping::genus, 17);
    m.channel_means = {0.4f, 0.5f, 0.45f};
    auto path = (dir.path() / "m.scnn").string();
    save_model(m, path);
    SiameseModel back = load_model(path);

    CHECK(back.config.id == "tiny2");
    CHECK(back.view_tag == View::local);
    CHECK(back.grouping_tag == Grouping::genus);
    CHECK(back.fingerprint() == m.fingerprint());

    Image a = testutil::random_image(32, 32, 8);
    Image b = testutil::random_image(32, 32, 9);
    // bit-identical parameters give bit-identical similarity
    CHECK(similarity(m, a, b) == similarity(back, a, b));
}

TEST_CASE("model file corruption is rejected") {
    testutil::TempDir dir("modelbad");
    SiameseModel m = make_model("tiny2", 16, 16, View::global, Grouping::species, 1);
    auto path = (dir.path() / "m.scnn").string();
    save_model(m, path);

    SUBCASE("truncated file") {
        std::ifstream in(path, std::ios::binary);
        std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size() / 2));
        out.close();
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("truncated"), Error);
    }
    SUBCASE("wrong magic") {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("magic"), Error);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_model((dir.path() / "nope").string()), Error); }
}

TEST_CASE("gradient check: head and toy backbone match finite differences") {
    SiameseModel m = make_model("tiny2", 16, 16, View::global, Grouping::species, 31);
    Image a = testutil::random_image(16, 16, 41);
    Image b = testutil::random_image(16, 16, 43);

    auto res_pos = gradient_check(m, a, b, 1, 1e-4);
    CHECK(res_pos.head_max_rel < 1e-3);
    CHECK(res_pos.backbone_max_rel < 1e-2);

    auto res_neg = gradient_check(m, a, b, 0, 1e-4);
    CHECK(res_neg.head_max_rel < 1e-3);
    CHECK(res_neg.backbone_max_rel < 1e-2);
}
