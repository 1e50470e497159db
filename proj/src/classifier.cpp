#include "leafid/classifier.hpp"

#include <algorithm>

namespace leafid {

RankedGenusList rank_genus(const Eigen::VectorXf& query_global, const SiameseModel& model_a,
                           const ReferenceSet& refs, int k) {
    if (k < 1) throw usage_error("rank_genus: k must be >= 1");
    if (refs.entries.empty()) throw validation_error("rank_genus: empty reference set");
    if (model_a.fingerprint() != refs.fingerprint_a)
        throw fingerprint_error("rank_genus: model A does not match the reference set");

    std::vector<RankedRef> all;
    all.reserve(refs.entries.size());
    for (std::size_t i = 0; i < refs.entries.size(); ++i) {
        const auto& e = refs.entries[i];
        all.push_back({i, e.genus_id, head_similarity(model_a, query_global, e.global_embedding)});
    }
    auto cmp = [&](const RankedRef& a, const RankedRef& b) {
        if (a.score != b.score) return a.score > b.score;
        const auto& ea = refs.entries[a.entry_index];
        const auto& eb = refs.entries[b.entry_index];
        if (ea.species_id != eb.species_id) return ea.species_id < eb.species_id;
        return ea.sample_id < eb.sample_id;
    };
    std::sort(all.begin(), all.end(), cmp);
    if (static_cast<std::size_t>(k) < all.size()) all.resize(static_cast<std::size_t>(k));
    return all;
}

GenusWeights genus_frequencies(const RankedGenusList& rk) {
    if (rk.empty()) throw validation_error("genus_frequencies: empty ranked list");
    GenusWeights w;
    for (const auto& r : rk) ++w[r.genus_id];
    return w;
}

std::map<std::string, double> score_species(const Eigen::VectorXf& query_local,
                                            const SiameseModel& model_b, const ReferenceSet& refs,
                                            const std::vector<std::string>& candidate_genera,
                                            SpeciesAggregation agg,
                                            std::vector<std::string>* warnings) {
    if (candidate_genera.empty()) throw validation_error("score_species: no candidate genera");
    if (model_b.fingerprint() != refs.fingerprint_b)
        throw fingerprint_error("score_species: model B does not match the reference set");

    std::map<std::string, double> scores;
    for (const auto& genus : candidate_genera) {
        auto species = refs.species_of_genus(genus);
        if (species.empty()) {
            if (warnings)
                warnings->push_back("genus '" + genus + "' has no species references; skipped");
            continue;
        }
        for (const auto& sp : species) {
            auto idx = refs.entries_of_species(sp);
            double best = 0.0, sum = 0.0;
            for (std::size_t i : idx) {
                double s = head_similarity(model_b, query_local, refs.entries[i].local_embedding);
                best = std::max(best, s);
                sum += s;
            }
            scores[sp] = agg == SpeciesAggregation::max ? best
                                                        : sum / static_cast<double>(idx.size());
        }
    }
    return scores;
}

SpeciesRanking fuse(const GenusWeights& weights, const std::map<std::string, double>& species_scores,
                    const ReferenceSet& refs) {
    double weight_sum = 0.0;
    for (const auto& [g, w] : weights) weight_sum += w;
    if (weight_sum <= 0.0) throw validation_error("fuse: empty genus weights");

    SpeciesRanking out;
    out.reserve(species_scores.size());
    for (const auto& [sp, s] : species_scores) {
        // genus of a scored species comes from its reference entries
        auto idx = refs.entries_of_species(sp);
        if (idx.empty()) throw validation_error("fuse: species '" + sp + "' has no reference entries");
        const std::string& genus = refs.entries[idx.front()].genus_id;
        auto it = weights.find(genus);
        if (it == weights.end())
            throw validation_error("fuse: genus '" + genus + "' of species '" + sp +
                                   "' carries no weight");
        out.push_back({sp, static_cast<double>(it->second) * s / weight_sum});
    }
    std::sort(out.begin(), out.end(), [](const ScoredSpecies& a, const ScoredSpecies& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.species_id < b.species_id;
    });
    return out;
}

ClassifyResult classify_embedded(const QueryEmbeddings& query, const SiameseModel& model_a,
                                 const SiameseModel& model_b, const ReferenceSet& refs,
                                 const ClassifyOptions& opts) {
    ClassifyResult res;
    res.rk = rank_genus(query.global_embedding, model_a, refs, opts.k);
    res.weights = genus_frequencies(res.rk);
    std::vector<std::string> genera;
    genera.reserve(res.weights.size());
    for (const auto& [g, w] : res.weights) genera.push_back(g);
    res.species_scores = score_species(query.local_embedding, model_b, refs, genera,
                                       opts.aggregation, &res.warnings);
    res.ranking = fuse(res.weights, res.species_scores, refs);
    if (opts.top_n > 0 && res.ranking.size() > static_cast<std::size_t>(opts.top_n))
        res.ranking.resize(static_cast<std::size_t>(opts.top_n));
    return res;
}

ClassifyResult classify_views(const ViewPair& views, const SiameseModel& model_a,
                              const SiameseModel& model_b, const ReferenceSet& refs,
                              const ClassifyOptions& opts) {
    refs.check_models(model_a, model_b);
    QueryEmbeddings q;
    q.global_embedding = embed(model_a, views.global_view);
    q.local_embedding = embed(model_b, views.local_view);
    return classify_embedded(q, model_a, model_b, refs, opts);
}

ClassifyResult classify(const Image& leaf, const SiameseModel& model_a, const SiameseModel& model_b,
                        const ReferenceSet& refs, const ClassifyOptions& opts) {
    ViewPair views = make_views(leaf, refs.preprocess);
    return classify_views(views, model_a, model_b, refs, opts);
}

SpeciesRanking flat_rank(const Eigen::VectorXf& query_embedding, const SiameseModel& model,
                         const ReferenceSet& refs, View which, SpeciesAggregation agg) {
    const std::string& expected =
        which == View::global ? refs.fingerprint_a : refs.fingerprint_b;
    if (model.fingerprint() != expected)
        throw fingerprint_error("flat_rank: model does not match the reference set for this view");

    std::map<std::string, std::pair<double, std::pair<double, int>>> acc;  // sp -> (max, (sum, n))
    for (const auto& e : refs.entries) {
        const Eigen::VectorXf& ref_emb =
            which == View::global ? e.global_embedding : e.local_embedding;
        double s = head_similarity(model, query_embedding, ref_emb);
        auto& slot = acc[e.species_id];
        slot.first = std::max(slot.first, s);
        slot.second.first += s;
        slot.second.second += 1;
    }
    SpeciesRanking out;
    for (const auto& [sp, v] : acc)
        out.push_back({sp, agg == SpeciesAggregation::max
                               ? v.first
                               : v.second.first / static_cast<double>(v.second.second)});
    std::sort(out.begin(), out.end(), [](const ScoredSpecies& a, const ScoredSpecies& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.species_id < b.species_id;
    });
    return out;
}

}  // namespace leafid
