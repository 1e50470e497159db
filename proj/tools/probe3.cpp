#include <chrono>
#include <iostream>
#include "leafid/eval.hpp"
#include "leafid/synth.hpp"

using namespace leafid;

int main() {
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
    TrainConfig ca; ca.num_epochs = 12; ca.batch_size = 32; ca.learning_rate = 0.01;
    ca.seed = 3; ca.workers = 2;
    train(ma, pairs_a.pairs, views, ca);

    PairSpec spb; spb.grouping = Grouping::species; spb.view = View::local;
    spb.positive_count = 600; spb.negative_count = 900; spb.seed = 2;
    auto pairs_b = generate_pairs(data.split.train, data.split.taxonomy, spb);
    SiameseModel mb = make_model("small4", 32, 32, View::local, Grouping::species, 8);
    TrainConfig cb = ca; cb.num_epochs = 40; cb.learning_rate = 0.03;
    train(mb, pairs_b.pairs, views, cb);

    // unseen species: genera 6..17 из an 18-genus rendering of the same family
    SynthSpec big = spec;
    big.num_genera = 18;
    big.samples_per_species = 11;  // 6 refs + 5 test per new species
    big.train_per_species = 6;
    auto extra = generate(big);

    std::vector<SpeciesBatch> batches(2);
    for (int b = 0; b < 2; ++b) {
        for (const auto& r : extra.taxonomy) {
            int g = std::stoi(r.genus_id.substr(1));
            if (g >= 6 + b * 6 && g < 12 + b * 6) batches[b].taxonomy_rows.push_back(r);
        }
        auto want = [&](const LeafSample& s) {
            int g = std::stoi(s.species_id->substr(1, 2));
            return g >= 6 + b * 6 && g < 12 + b * 6;
        };
        for (const auto& s : extra.split.train)
            if (want(s)) batches[b].ref_samples.push_back(s);
        for (const auto& s : extra.split.test)
            if (want(s)) batches[b].test_samples.push_back(s);
    }
    std::cout << "batch sizes: " << batches[0].ref_samples.size() << "/" << batches[0].test_samples.size()
              << " and " << batches[1].ref_samples.size() << "/" << batches[1].test_samples.size() << "\n";

    auto report = scalability_run(data.split, batches, ma, mb, pp, 6, 30, 17);
    std::cout << report.metrics.dump(2) << "\n";
    return 0;
}
