#pragma once

#include <map>
#include <string>
#include <vector>

#include "leafid/refstore.hpp"

namespace leafid {

// One entry of the stage-1 ranked list R_k (reference level, so a genus may
// repeat).
struct RankedRef {
    std::size_t entry_index;  // into ReferenceSet::entries
    std::string genus_id;
    double score;
};
using RankedGenusList = std::vector<RankedRef>;

// genus -> frequency w_i inside R_k.
using GenusWeights = std::map<std::string, int>;

struct ScoredSpecies {
    std::string species_id;
    double score;  // zeta for the fused ranking, S_i for raw stage-2 maps
};
using SpeciesRanking = std::vector<ScoredSpecies>;

// How multiple references of one species aggregate into S_i.
enum class SpeciesAggregation { max, mean };

struct QueryEmbeddings {
    Eigen::VectorXf global_embedding;
    Eigen::VectorXf local_embedding;
};

// Stage 1: scores the query global view against every reference and returns
// the top-k references. Ties break by (score desc, species_id asc,
// sample_id asc).
RankedGenusList rank_genus(const Eigen::VectorXf& query_global, const SiameseModel& model_a,
                           const ReferenceSet& refs, int k);

GenusWeights genus_frequencies(const RankedGenusList& rk);

// Stage 2: S_i per species of every candidate genus, from local-view
// similarities against that species' references.
std::map<std::string, double> score_species(const Eigen::VectorXf& query_local,
                                            const SiameseModel& model_b, const ReferenceSet& refs,
                                            const std::vector<std::string>& candidate_genera,
                                            SpeciesAggregation agg = SpeciesAggregation::max,
                                            std::vector<std::string>* warnings = nullptr);

// zeta = w_i * S_i / sum(w_i), descending. Every scored species' genus must
// carry a weight.
SpeciesRanking fuse(const GenusWeights& weights, const std::map<std::string, double>& species_scores,
                    const ReferenceSet& refs);

struct ClassifyOptions {
    int k = 30;
    int top_n = 0;  // 0 = full candidate list
    SpeciesAggregation aggregation = SpeciesAggregation::max;
};

struct ClassifyResult {
    SpeciesRanking ranking;  // truncated to top_n when requested
    RankedGenusList rk;
    GenusWeights weights;
    std::map<std::string, double> species_scores;
    std::vector<std::string> warnings;
};

// Full pipeline from a raw leaf image (preprocessing per the reference set's
// recorded config). Checks model fingerprints against the set.
ClassifyResult classify(const Image& leaf, const SiameseModel& model_a, const SiameseModel& model_b,
                        const ReferenceSet& refs, const ClassifyOptions& opts);

ClassifyResult classify_views(const ViewPair& views, const SiameseModel& model_a,
                              const SiameseModel& model_b, const ReferenceSet& refs,
                              const ClassifyOptions& opts);

// Entry point for sweep/evaluation loops that cache query embeddings.
ClassifyResult classify_embedded(const QueryEmbeddings& query, const SiameseModel& model_a,
                                 const SiameseModel& model_b, const ReferenceSet& refs,
                                 const ClassifyOptions& opts);

// Single-view non-hierarchical baseline: ranks every species in the gallery
// by its aggregated similarity in one view, no genus weighting.
SpeciesRanking flat_rank(const Eigen::VectorXf& query_embedding, const SiameseModel& model,
                         const ReferenceSet& refs, View which,
                         SpeciesAggregation agg = SpeciesAggregation::max);

}  // namespace leafid
