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
    double lr_c = argc > 1 ? std::stod(argv[1]) : 0.01;
    int ep_c = argc > 2 ? std::stoi(argv[2]) : 12;

    SynthSpec spec;
    spec.seed = 20240811;
    auto data = generate(spec);
    PreprocessConfig pp;
    ViewCache views(data.split.train, pp);
    views.add_samples(data.split.test);

    // flat baseline: species grouping on the global view
    PairSpec spc; spc.grouping = Grouping::species; spc.view = View::global;
    spc.positive_count = 600; spc.negative_count = 900; spc.seed = 5;
    auto pairs_c = generate_pairs(data.split.train, data.split.taxonomy, spc);
    SiameseModel mc = make_model("small4", 224, 224, View::global, Grouping::species, 9);
    TrainConfig cc; cc.num_epochs = ep_c; cc.batch_size = 32; cc.learning_rate = lr_c;
    cc.seed = 6; cc.workers = 2;
    auto t0 = Clock::now();
    auto rc = train(mc, pairs_c.pairs, views, cc);
    std::cout << "C(" << lr_c << "," << ep_c << "): " << secs(t0) << "s loss "
              << rc.epoch_mean_loss.front() << " -> " << rc.epoch_mean_loss.back() << "\n";

    // flat_rank only checks the fingerprint of the queried view's model;
    // a placeholder local model fills the other slot
    SiameseModel placeholder = make_model("tiny2", 32, 32, View::local, Grouping::species, 1);
    auto sel = select_references(data.split.train, data.split.taxonomy, 6, 11);
    auto refs = build_references(data.split.train, sel, data.split.taxonomy, mc, placeholder, pp, 6, &views);
    auto flat = flat_eval(data.split.test, mc, refs, View::global, views);
    std::cout << "flat top1: " << accuracy(flat, 1) << "  top3: " << accuracy(flat, 3)
              << "  top5: " << accuracy(flat, 5) << "\n";
    return 0;
}
