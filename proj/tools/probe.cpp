#include <chrono>
#include <iostream>
#include "leafid/eval.hpp"
#include "leafid/synth.hpp"

using namespace leafid;
using Clock = std::chrono::steady_clock;
static double secs(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int main(int argc, char** argv) {
    double lr_a = argc > 1 ? std::stod(argv[1]) : 0.01;
    int ep_a = argc > 2 ? std::stoi(argv[2]) : 12;
    double lr_b = argc > 3 ? std::stod(argv[3]) : 0.02;
    int ep_b = argc > 4 ? std::stoi(argv[4]) : 25;

    auto t_all = Clock::now();
    SynthSpec spec;
    spec.seed = 20240811;
    auto data = generate(spec);
    PreprocessConfig pp;
    ViewCache views(data.split.train, pp);
    views.add_samples(data.split.test);

    PairSpec spa; spa.grouping = Grouping::genus; spa.view = View::global;
    spa.positive_count = 400; spa.negative_count = 600; spa.seed = 1;
    auto pairs_a = generate_pairs(data.split.train, data.split.taxonomy, spa);
    SiameseModel ma = make_model("small4", 224, 224, View::global, Grouping::genus, 7);
    TrainConfig ca; ca.num_epochs = ep_a; ca.batch_size = 32; ca.learning_rate = lr_a;
    ca.seed = 3; ca.workers = 2;
    auto t0 = Clock::now();
    auto ra = train(ma, pairs_a.pairs, views, ca);
    std::cout << "A(" << lr_a << "," << ep_a << "): " << secs(t0) << "s loss "
              << ra.epoch_mean_loss.front() << " -> " << ra.epoch_mean_loss.back() << "\n";

    PairSpec spb; spb.grouping = Grouping::species; spb.view = View::local;
    spb.positive_count = 600; spb.negative_count = 900; spb.seed = 2;
    auto pairs_b = generate_pairs(data.split.train, data.split.taxonomy, spb);
    SiameseModel mb = make_model("small4", 32, 32, View::local, Grouping::species, 8);
    TrainConfig cb = ca; cb.num_epochs = ep_b; cb.learning_rate = lr_b;
    t0 = Clock::now();
    auto rb = train(mb, pairs_b.pairs, views, cb);
    std::cout << "B(" << lr_b << "," << ep_b << "): " << secs(t0) << "s loss "
              << rb.epoch_mean_loss.front() << " -> " << rb.epoch_mean_loss.back() << "\n";

    auto sel = select_references(data.split.train, data.split.taxonomy, 6, 11);
    auto refs = build_references(data.split.train, sel, data.split.taxonomy, ma, mb, pp, 6, &views);
    auto table = embed_all(data.split.test, ma, mb, views);

    ClassifyOptions opts; opts.k = 30;
    auto outcome = evaluate_testset(data.split.test, data.split.taxonomy, ma, mb, refs, opts, views, &table);
    std::cout << "stage1 hit@30: " << outcome.stage1_hit_rate
              << "  candidates: " << outcome.mean_candidates << "\n";
    std::cout << "top1: " << accuracy(outcome.results, 1)
              << "  top3: " << accuracy(outcome.results, 3)
              << "  top5: " << accuracy(outcome.results, 5) << "\n";
    std::cout << "total: " << secs(t_all) << "s\n";
    return 0;
}
