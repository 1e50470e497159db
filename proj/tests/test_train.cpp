#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "helpers.hpp"
#include "leafid/train.hpp"

using namespace leafid;

namespace {

// Two separable texture classes (horizontal vs vertical stripes).
struct TinyBench {
    std::vector<LeafSample> samples;
    Taxonomy taxonomy{std::vector<TaxonRecord>{{"sp_h", "gen_h", "fam", "H"},
                                               {"sp_v", "gen_v", "fam", "V"}}};
    std::vector<PairRef> train_pairs;
};

// Striped block on a white canvas so leaf extraction finds it.
LeafSample framed_sample(const std::string& id, const std::string& species, int cls,
                         std::uint64_t seed) {
    LeafSample s;
    s.sample_id = id;
    s.species_id = species;
    Image stripes = testutil::striped_image(32, cls, 2, seed);
    Image canvas(48, 48, 255);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) std::memcpy(canvas.px(y + 8, x + 8), stripes.px(y, x), 3);
    s.image = canvas;
    return s;
}

TinyBench make_bench(int per_class, std::uint64_t seed) {
    TinyBench b;
    for (int cls = 0; cls < 2; ++cls)
        for (int i = 0; i < per_class; ++i)
            b.samples.push_back(framed_sample((cls == 0 ? "h_" : "v_") + std::to_string(i),
                                              cls == 0 ? "sp_h" : "sp_v", cls,
                                              seed + cls * 1000 + i));
    PairSpec spec;
    spec.grouping = Grouping::species;
    spec.positive_count = 40;
    spec.negative_count = 60;
    spec.seed = seed;
    b.train_pairs = generate_pairs(b.samples, b.taxonomy, spec).pairs;
    return b;
}

PreprocessConfig bench_preprocess() {
    PreprocessConfig pp;
    pp.crop_size = 32;
    pp.kernel_radius = 2;
    return pp;
}

}  // namespace

TEST_CASE("training reduces the loss on separable pairs and stays deterministic") {
    TinyBench bench = make_bench(8, 5);
    ViewCache views(bench.samples, bench_preprocess());

    SiameseModel model = make_model("tiny2", 32, 32, View::local, Grouping::species, 99);
    TrainConfig cfg;
    cfg.num_epochs = 20;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.05;
    cfg.seed = 12;
    cfg.backbone_id = "tiny2";
    cfg.workers = 2;

    SiameseModel twin = model;  // identical start for the determinism run
    auto r1 = train(model, bench.train_pairs, views, cfg);
    REQUIRE(r1.epoch_mean_loss.size() == 20);
    CHECK(r1.epoch_mean_loss.back() < r1.epoch_mean_loss.front());

    auto r2 = train(twin, bench.train_pairs, views, cfg);
    CHECK(r1.epoch_mean_loss == r2.epoch_mean_loss);  // same seed, same trace
    CHECK(twin.fingerprint() == model.fingerprint());

    // After training, same-class pairs score higher on held-out samples.
    TinyBench held = make_bench(4, 777);
    ViewCache held_views(held.samples, bench_preprocess());
    double same = 0.0, cross = 0.0;
    int n_same = 0, n_cross = 0;
    for (std::size_t i = 0; i < held.samples.size(); ++i)
        for (std::size_t j = i + 1; j < held.samples.size(); ++j) {
            const Image& a = held_views.view(held.samples[i].sample_id, View::local);
            const Image& b = held_views.view(held.samples[j].sample_id, View::local);
            const double s = similarity(model, a, b);
            if (*held.samples[i].species_id == *held.samples[j].species_id) {
                same += s;
                ++n_same;
            } else {
                cross += s;
                ++n_cross;
            }
        }
    CHECK(same / n_same > cross / n_cross);
}

TEST_CASE("zero epochs and zero learning rate leave parameters untouched") {
    TinyBench bench = make_bench(4, 21);
    ViewCache views(bench.samples, bench_preprocess());

    SiameseModel model = make_model("tiny2", 32, 32, View::local, Grouping::species, 7);
    const std::string fp0 = model.fingerprint();

    TrainConfig cfg;
    cfg.backbone_id = "tiny2";
    cfg.num_epochs = 0;
    auto r = train(model, bench.train_pairs, views, cfg);
    CHECK(r.epoch_mean_loss.empty());
    CHECK(model.fingerprint() == fp0);  // bit-identical

    cfg.num_epochs = 3;
    cfg.learning_rate = 0.0;
    SiameseModel frozen = make_model("tiny2", 32, 32, View::local, Grouping::species, 7);
    auto params_before = frozen.params;
    auto head_before = frozen.head_w;
    train(frozen, bench.train_pairs, views, cfg);
    for (std::size_t i = 0; i < params_before.conv_w.size(); ++i)
        CHECK(frozen.params.conv_w[i] == params_before.conv_w[i]);
    CHECK(frozen.params.dense_w == params_before.dense_w);
    CHECK(frozen.head_w == head_before);
}

TEST_CASE("non-finite loss aborts with epoch and batch in the message") {
    TinyBench bench = make_bench(4, 33);
    ViewCache views(bench.samples, bench_preprocess());

    SiameseModel model = make_model("tiny2", 32, 32, View::local, Grouping::species, 7);
    model.head_b = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg;
    cfg.backbone_id = "tiny2";
    cfg.num_epochs = 1;
    CHECK_THROWS_WITH_AS(train(model, bench.train_pairs, views, cfg), doctest::Contains("epoch 0"),
                         Error);
}

TEST_CASE("invalid configs are rejected") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = TrainConfig{};
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = TrainConfig{};
    cfg.num_epochs = -1;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
