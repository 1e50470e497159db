#include "leafid/eval.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

namespace leafid {

std::size_t rank_of_truth(const PictureResult& r) {
    for (std::size_t i = 0; i < r.ranking.size(); ++i)
        if (r.ranking[i].species_id == r.true_species) return i + 1;
    return 0;
}

double s_metric(const ObservationTree& tree) {
    if (tree.users.empty()) throw validation_error("s_metric: tree has no users");
    double user_sum = 0.0;
    for (const auto& user : tree.users) {
        if (user.plants.empty()) throw validation_error("s_metric: user without plants");
        double plant_sum = 0.0;
        for (const auto& plant : user.plants) {
            if (plant.pictures.empty()) throw validation_error("s_metric: plant without pictures");
            double pic_sum = 0.0;
            for (const auto& pic : plant.pictures) {
                const std::size_t rank = rank_of_truth(pic);
                pic_sum += rank == 0 ? 0.0 : 1.0 / static_cast<double>(rank);
            }
            plant_sum += pic_sum / static_cast<double>(plant.pictures.size());
        }
        user_sum += plant_sum / static_cast<double>(user.plants.size());
    }
    return user_sum / static_cast<double>(tree.users.size());
}

ObservationTree single_user_tree(const std::vector<PictureResult>& results) {
    ObservationTree tree;
    ObservationUser user;
    user.user_id = "u0";
    for (const auto& r : results) {
        ObservationPlant plant;
        plant.pictures.push_back(r);
        user.plants.push_back(std::move(plant));
    }
    tree.users.push_back(std::move(user));
    return tree;
}

double accuracy(const std::vector<PictureResult>& results, int top_k) {
    if (results.empty()) throw validation_error("accuracy: no results");
    if (top_k < 1) throw usage_error("accuracy: top_k must be >= 1");
    std::size_t hits = 0;
    for (const auto& r : results) {
        const std::size_t rank = rank_of_truth(r);
        if (rank > 0 && rank <= static_cast<std::size_t>(top_k)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

int ConfusionMatrix::total() const {
    int t = 0;
    for (const auto& row : counts)
        for (int v : row) t += v;
    return t;
}

ConfusionMatrix confusion_matrix(const std::vector<PictureResult>& results, const Taxonomy& taxonomy,
                                 TaxonLevel level) {
    if (results.empty()) throw validation_error("confusion_matrix: no results");
    auto lift = [&](const std::string& species) -> std::string {
        switch (level) {
            case TaxonLevel::species: {
                taxonomy.species(species);  // throws for unknown labels
                return species;
            }
            case TaxonLevel::genus: return taxonomy.genus_of(species);
            case TaxonLevel::family: return taxonomy.family_of(species);
        }
        throw usage_error("confusion_matrix: bad level");
    };

    std::set<std::string> label_set;
    for (const auto& r : results) {
        label_set.insert(lift(r.true_species));
        if (!r.ranking.empty()) label_set.insert(lift(r.ranking.front().species_id));
    }
    ConfusionMatrix cm;
    cm.labels.assign(label_set.begin(), label_set.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < cm.labels.size(); ++i) index[cm.labels[i]] = i;
    cm.counts.assign(cm.labels.size(), std::vector<int>(cm.labels.size(), 0));
    for (const auto& r : results) {
        if (r.ranking.empty()) continue;
        ++cm.counts[index[lift(r.true_species)]][index[lift(r.ranking.front().species_id)]];
    }
    return cm;
}

void ExperimentReport::save(const std::string& path) const {
    nlohmann::json j;
    j["config"] = config;
    j["metrics"] = metrics;
    std::ofstream out(path);
    if (!out) throw io_error("cannot write report: " + path);
    out << j.dump(2) << '\n';
}

void save_species_hits_csv(const std::vector<PictureResult>& results, const std::string& path) {
    std::map<std::string, std::pair<int, int>> per_species;  // species -> (test_count, hits)
    for (const auto& r : results) {
        auto& slot = per_species[r.true_species];
        ++slot.first;
        if (rank_of_truth(r) == 1) ++slot.second;
    }
    std::ofstream out(path);
    if (!out) throw io_error("cannot write hits csv: " + path);
    out << "species_id,test_count,hits\n";
    for (const auto& [sp, v] : per_species) out << sp << ',' << v.first << ',' << v.second << '\n';
}

void save_line_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<double>& xs,
                         const std::map<std::string, std::vector<double>>& series) {
    constexpr int W = 640, H = 420, ML = 60, MR = 20, MT = 40, MB = 50;
    double xmin = xs.front(), xmax = xs.back();
    double ymin = 0.0, ymax = 0.0;
    for (const auto& [name, ys] : series)
        for (double y : ys) ymax = std::max(ymax, y);
    if (ymax <= ymin) ymax = ymin + 1.0;
    if (xmax <= xmin) xmax = xmin + 1.0;

    auto px = [&](double x) { return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR); };
    auto py = [&](double y) { return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ofstream out(path);
    if (!out) throw io_error("cannot write chart: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";
    out << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    out << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    for (double x : xs)
        out << "<text x='" << px(x) << "' y='" << H - MB + 18 << "' text-anchor='middle' font-size='11'>"
            << x << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        double y = ymin + (ymax - ymin) * i / 4.0;
        out << "<text x='" << ML - 8 << "' y='" << py(y) + 4 << "' text-anchor='end' font-size='11'>"
            << y << "</text>\n";
    }
    int ci = 0;
    int legend_y = MT;
    for (const auto& [name, ys] : series) {
        const char* color = colors[ci % 6];
        out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
        for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i)
            out << px(xs[i]) << ',' << py(ys[i]) << ' ';
        out << "'/>\n";
        out << "<text x='" << W - MR - 150 << "' y='" << legend_y << "' font-size='12' fill='" << color
            << "'>" << name << "</text>\n";
        legend_y += 16;
        ++ci;
    }
    out << "</svg>\n";
}

EmbeddingTable embed_all(const std::vector<LeafSample>& samples, const SiameseModel& model_a,
                         const SiameseModel& model_b, const ViewCache& views) {
    EmbeddingTable table;
    nn::Workspace<float> ws;
    for (const auto& s : samples) {
        const ViewPair& vp = views.views(s.sample_id);
        QueryEmbeddings q;
        q.global_embedding = embed(model_a, vp.global_view, ws);
        q.local_embedding = embed(model_b, vp.local_view, ws);
        table.by_id.emplace(s.sample_id, std::move(q));
    }
    return table;
}

EvalOutcome evaluate_testset(const std::vector<LeafSample>& test, const Taxonomy& taxonomy,
                             const SiameseModel& model_a, const SiameseModel& model_b,
                             const ReferenceSet& refs, const ClassifyOptions& opts,
                             const ViewCache& views, const EmbeddingTable* embeddings) {
    if (test.empty()) throw validation_error("evaluate_testset: empty test set");
    refs.check_models(model_a, model_b);

    EvalOutcome out;
    double seconds = 0.0;
    std::size_t stage1_hits = 0, candidates = 0;
    for (const auto& s : test) {
        if (!s.species_id) continue;
        ClassifyResult cr;
        if (embeddings) {
            cr = classify_embedded(embeddings->by_id.at(s.sample_id), model_a, model_b, refs, opts);
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            cr = classify_views(views.views(s.sample_id), model_a, model_b, refs, opts);
            seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        const std::string& true_genus = taxonomy.genus_of(*s.species_id);
        if (cr.weights.count(true_genus)) ++stage1_hits;
        candidates += cr.species_scores.size();
        out.results.push_back({*s.species_id, std::move(cr.ranking)});
    }
    if (out.results.empty()) throw validation_error("evaluate_testset: no labeled test samples");
    const double n = static_cast<double>(out.results.size());
    out.stage1_hit_rate = static_cast<double>(stage1_hits) / n;
    out.mean_candidates = static_cast<double>(candidates) / n;
    out.mean_query_seconds = embeddings ? 0.0 : seconds / n;
    return out;
}

std::vector<PictureResult> flat_eval(const std::vector<LeafSample>& test, const SiameseModel& model,
                                     const ReferenceSet& refs, View which, const ViewCache& views) {
    std::vector<PictureResult> results;
    nn::Workspace<float> ws;
    for (const auto& s : test) {
        if (!s.species_id) continue;
        const Image& img = views.view(s.sample_id, which);
        Eigen::VectorXf q = embed(model, img, ws);
        results.push_back({*s.species_id, flat_rank(q, model, refs, which)});
    }
    return results;
}

ExperimentReport sweep_references(const DatasetSplit& split, const SiameseModel& model_a,
                                  const SiameseModel& model_b, const PreprocessConfig& preprocess,
                                  const std::vector<int>& nr_values, const std::vector<int>& k_values,
                                  std::uint64_t seed) {
    if (nr_values.empty() || k_values.empty())
        throw usage_error("sweep_references: need at least one N_r and one k");

    ViewCache views(split.train, preprocess);
    views.add_samples(split.test);
    EmbeddingTable queries = embed_all(split.test, model_a, model_b, views);

    ExperimentReport report;
    report.config = {{"seed", seed},
                     {"n_r_values", nr_values},
                     {"k_values", k_values},
                     {"model_a_fingerprint", model_a.fingerprint()},
                     {"model_b_fingerprint", model_b.fingerprint()}};
    nlohmann::json grid = nlohmann::json::array();
    for (int n_r : nr_values) {
        auto sel = select_references(split.train, split.taxonomy, n_r, derive_seed(seed, n_r));
        auto refs = build_references(split.train, sel, split.taxonomy, model_a, model_b, preprocess,
                                     n_r, &views);
        for (int k : k_values) {
            ClassifyOptions opts;
            opts.k = k;
            EvalOutcome outcome = evaluate_testset(split.test, split.taxonomy, model_a, model_b, refs,
                                                   opts, views, &queries);
            grid.push_back({{"n_r", n_r},
                            {"k", k},
                            {"stage1_hit_rate", outcome.stage1_hit_rate},
                            {"top1_accuracy", accuracy(outcome.results, 1)},
                            {"mean_candidates", outcome.mean_candidates}});
        }
    }
    report.metrics["grid"] = std::move(grid);
    return report;
}

ExperimentReport stability_run(const DatasetSplit& split, const SiameseModel& model_a,
                               const SiameseModel& model_b, const PreprocessConfig& preprocess,
                               int n_r, int k, int repetitions, std::uint64_t base_seed) {
    if (repetitions < 1) throw usage_error("stability_run: repetitions must be >= 1");

    ViewCache views(split.train, preprocess);
    views.add_samples(split.test);
    EmbeddingTable queries = embed_all(split.test, model_a, model_b, views);

    std::vector<double> accs;
    for (int rep = 0; rep < repetitions; ++rep) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(rep);
        auto sel = select_references(split.train, split.taxonomy, n_r, seed);
        auto refs = build_references(split.train, sel, split.taxonomy, model_a, model_b, preprocess,
                                     n_r, &views);
        ClassifyOptions opts;
        opts.k = k;
        EvalOutcome outcome =
            evaluate_testset(split.test, split.taxonomy, model_a, model_b, refs, opts, views, &queries);
        accs.push_back(accuracy(outcome.results, 1));
    }
    const auto [mn, mx] = std::minmax_element(accs.begin(), accs.end());

    ExperimentReport report;
    report.config = {{"base_seed", base_seed},
                     {"repetitions", repetitions},
                     {"n_r", n_r},
                     {"k", k},
                     {"model_a_fingerprint", model_a.fingerprint()},
                     {"model_b_fingerprint", model_b.fingerprint()}};
    report.metrics = {{"per_run_accuracy", accs}, {"spread", *mx - *mn}};
    return report;
}

ExperimentReport scalability_run(const DatasetSplit& base, const std::vector<SpeciesBatch>& batches,
                                 const SiameseModel& model_a, const SiameseModel& model_b,
                                 const PreprocessConfig& preprocess, int n_r, int k,
                                 std::uint64_t seed) {
    const std::string fp_a = model_a.fingerprint();
    const std::string fp_b = model_b.fingerprint();

    ViewCache views(base.train, preprocess);
    views.add_samples(base.test);

    auto sel = select_references(base.train, base.taxonomy, n_r, seed);
    ReferenceSet refs =
        build_references(base.train, sel, base.taxonomy, model_a, model_b, preprocess, n_r, &views);

    ClassifyOptions opts;
    opts.k = k;

    ExperimentReport report;
    report.config = {{"seed", seed},
                     {"n_r", n_r},
                     {"k", k},
                     {"model_a_fingerprint", fp_a},
                     {"model_b_fingerprint", fp_b}};
    nlohmann::json steps = nlohmann::json::array();

    auto record = [&](const std::string& label, const ReferenceSet& current,
                      const std::vector<LeafSample>* new_test, const Taxonomy& taxonomy) {
        EvalOutcome outcome =
            evaluate_testset(base.test, taxonomy, model_a, model_b, current, opts, views, nullptr);
        nlohmann::json step{{"label", label},
                            {"gallery_species", current.species_ids().size()},
                            {"gallery_references", current.entries.size()},
                            {"original_top1_accuracy", accuracy(outcome.results, 1)},
                            {"mean_query_seconds", outcome.mean_query_seconds}};
        if (new_test && !new_test->empty()) {
            EvalOutcome fresh =
                evaluate_testset(*new_test, taxonomy, model_a, model_b, current, opts, views, nullptr);
            step["new_species_top1_accuracy"] = accuracy(fresh.results, 1);
        }
        steps.push_back(std::move(step));
    };

    record("baseline", refs, nullptr, base.taxonomy);

    Taxonomy taxonomy = base.taxonomy;
    std::vector<LeafSample> cumulative_new_test;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        const auto& batch = batches[bi];
        taxonomy = taxonomy.merged_with(batch.taxonomy_rows);
        views.add_samples(batch.ref_samples);
        views.add_samples(batch.test_samples);
        refs = add_species(refs, batch.ref_samples, taxonomy, model_a, model_b,
                           derive_seed(seed, 1000 + bi), &views);
        cumulative_new_test.insert(cumulative_new_test.end(), batch.test_samples.begin(),
                                   batch.test_samples.end());
        record("batch_" + std::to_string(bi), refs, &cumulative_new_test, taxonomy);
    }

    if (model_a.fingerprint() != fp_a || model_b.fingerprint() != fp_b)
        throw Error(ErrorKind::internal, "scalability_run: model parameters changed");
    report.metrics["steps"] = std::move(steps);
    report.metrics["models_unchanged"] = true;
    return report;
}

ExperimentReport unbalanced_run(const DatasetSplit& split, const PreprocessConfig& preprocess,
                                const UnbalancedProtocol& protocol) {
    if (protocol.caps.empty()) throw usage_error("unbalanced_run: no caps given");

    ViewCache views(split.train, preprocess);
    views.add_samples(split.test);

    ExperimentReport report;
    report.config = {{"caps", protocol.caps}, {"seed", protocol.seed},
                     {"n_r", protocol.n_r},   {"k", protocol.k}};
    nlohmann::json runs = nlohmann::json::array();

    for (int cap : protocol.caps) {
        // Deterministic per-species cap on the training side.
        std::map<std::string, std::vector<const LeafSample*>> by_species;
        for (const auto& s : split.train)
            if (s.species_id) by_species[*s.species_id].push_back(&s);
        std::vector<LeafSample> capped;
        auto rng = make_rng(derive_seed(protocol.seed, cap));
        for (auto& [sp, list] : by_species) {
            std::sort(list.begin(), list.end(),
                      [](const LeafSample* a, const LeafSample* b) { return a->sample_id < b->sample_id; });
            std::shuffle(list.begin(), list.end(), rng);
            for (int i = 0; i < cap && i < static_cast<int>(list.size()); ++i)
                capped.push_back(*list[i]);
        }

        nlohmann::json run{{"cap", cap}, {"train_size", capped.size()}};
        try {
            PairSpec spec_a;
            spec_a.grouping = Grouping::genus;
            spec_a.view = View::global;
            spec_a.positive_count = protocol.positive_pairs_a;
            spec_a.negative_count = protocol.negative_pairs_a;
            spec_a.seed = derive_seed(protocol.seed, 100 + cap);
            PairSet pairs_a = generate_pairs(capped, split.taxonomy, spec_a);

            PairSpec spec_b = spec_a;
            spec_b.grouping = Grouping::species;
            spec_b.view = View::local;
            spec_b.positive_count = protocol.positive_pairs_b;
            spec_b.negative_count = protocol.negative_pairs_b;
            spec_b.seed = derive_seed(protocol.seed, 200 + cap);
            PairSet pairs_b = generate_pairs(capped, split.taxonomy, spec_b);

            SiameseModel model_a = make_model(protocol.train_a.backbone_id, kGlobalViewSize,
                                              kGlobalViewSize, View::global, Grouping::genus,
                                              derive_seed(protocol.seed, 300 + cap));
            SiameseModel model_b = make_model(protocol.train_b.backbone_id, preprocess.crop_size,
                                              preprocess.crop_size, View::local, Grouping::species,
                                              derive_seed(protocol.seed, 400 + cap));
            train(model_a, pairs_a.pairs, views, protocol.train_a);
            train(model_b, pairs_b.pairs, views, protocol.train_b);

            auto sel = select_references(capped, split.taxonomy, protocol.n_r,
                                         derive_seed(protocol.seed, 500 + cap));
            auto refs = build_references(capped, sel, split.taxonomy, model_a, model_b, preprocess,
                                         protocol.n_r, &views);
            ClassifyOptions opts;
            opts.k = protocol.k;
            EvalOutcome outcome = evaluate_testset(split.test, split.taxonomy, model_a, model_b, refs,
                                                   opts, views, nullptr);
            run["top1_accuracy"] = accuracy(outcome.results, 1);
            run["pair_warnings"] = pairs_a.warnings.size() + pairs_b.warnings.size();
        } catch (const Error& e) {
            run["failed"] = true;
            run["error"] = e.what();
        }
        runs.push_back(std::move(run));
    }
    report.metrics["runs"] = std::move(runs);
    return report;
}

}  // namespace leafid
