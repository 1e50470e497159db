#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "leafid/classifier.hpp"
#include "leafid/train.hpp"

namespace leafid {

// --- metrics ----------------------------------------------------------------

struct PictureResult {
    std::string true_species;
    SpeciesRanking ranking;  // may be empty for a recorded failure
};

struct ObservationPlant {
    std::vector<PictureResult> pictures;
};
struct ObservationUser {
    std::string user_id;
    std::vector<ObservationPlant> plants;
};
// users -> plants -> pictures, the averaging structure of the S score.
struct ObservationTree {
    std::vector<ObservationUser> users;
};

// 1-based rank of the true species in the ranking; 0 when absent.
std::size_t rank_of_truth(const PictureResult& r);

// S = (1/U) sum_u (1/P_u) sum_p (1/N_up) sum_n 1/rank, 0 for unranked truth.
double s_metric(const ObservationTree& tree);

// Wraps flat results as one user / one picture per plant, collapsing the S
// score to mean reciprocal rank.
ObservationTree single_user_tree(const std::vector<PictureResult>& results);

// Fraction of results whose true species appears within the first top_k.
double accuracy(const std::vector<PictureResult>& results, int top_k);

enum class TaxonLevel { species, genus, family };

struct ConfusionMatrix {
    std::vector<std::string> labels;        // row/column order
    std::vector<std::vector<int>> counts;   // rows true, columns predicted (top-1)
    int total() const;
};
ConfusionMatrix confusion_matrix(const std::vector<PictureResult>& results, const Taxonomy& taxonomy,
                                 TaxonLevel level);

// --- experiment reports -------------------------------------------------------

struct ExperimentReport {
    nlohmann::json config;   // seeds, fingerprints, knobs
    nlohmann::json metrics;  // metric values and tables

    void save(const std::string& path) const;
};

// Per-species hit counts (top-1) as CSV: species_id,test_count,hits.
void save_species_hits_csv(const std::vector<PictureResult>& results, const std::string& path);

// Minimal SVG polyline chart; series share the x axis.
void save_line_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<double>& xs,
                         const std::map<std::string, std::vector<double>>& series);

// --- shared evaluation machinery ----------------------------------------------

struct EmbeddingTable {
    std::map<std::string, QueryEmbeddings> by_id;
};
EmbeddingTable embed_all(const std::vector<LeafSample>& samples, const SiameseModel& model_a,
                         const SiameseModel& model_b, const ViewCache& views);

struct EvalOutcome {
    std::vector<PictureResult> results;
    double stage1_hit_rate = 0.0;   // true genus present in the R_k weights
    double mean_candidates = 0.0;   // species scored in stage 2 per query
    double mean_query_seconds = 0.0;
};

// Runs the two-stage classifier over labeled test samples. When `embeddings`
// is given, scoring uses the cached query embeddings (no timing); otherwise
// views are pulled from `views` and classify_views is timed per query.
EvalOutcome evaluate_testset(const std::vector<LeafSample>& test, const Taxonomy& taxonomy,
                             const SiameseModel& model_a, const SiameseModel& model_b,
                             const ReferenceSet& refs, const ClassifyOptions& opts,
                             const ViewCache& views, const EmbeddingTable* embeddings = nullptr);

// Single-view full-gallery baseline accuracy over the same test set.
std::vector<PictureResult> flat_eval(const std::vector<LeafSample>& test, const SiameseModel& model,
                                     const ReferenceSet& refs, View which, const ViewCache& views);

// --- experiment protocols -------------------------------------------------------

// Grid over reference counts and ranked-list sizes: stage-1 hit rate, final
// top-1 accuracy, mean stage-2 candidate count per (N_r, k).
ExperimentReport sweep_references(const DatasetSplit& split, const SiameseModel& model_a,
                                  const SiameseModel& model_b, const PreprocessConfig& preprocess,
                                  const std::vector<int>& nr_values, const std::vector<int>& k_values,
                                  std::uint64_t seed);

// Repeated reference draws with distinct seeds; reports per-run accuracy and
// the max-min spread.
ExperimentReport stability_run(const DatasetSplit& split, const SiameseModel& model_a,
                               const SiameseModel& model_b, const PreprocessConfig& preprocess,
                               int n_r, int k, int repetitions, std::uint64_t base_seed);

// A batch of unseen species: training-side samples feed references, test-side
// samples measure accuracy on the new species.
struct SpeciesBatch {
    std::vector<LeafSample> ref_samples;
    std::vector<LeafSample> test_samples;
    std::vector<TaxonRecord> taxonomy_rows;
};

// Cumulatively registers unseen species without retraining, measuring the
// original-test accuracy, new-species accuracy and per-query wall time at
// each gallery size. Asserts the model fingerprints never change.
ExperimentReport scalability_run(const DatasetSplit& base, const std::vector<SpeciesBatch>& batches,
                                 const SiameseModel& model_a, const SiameseModel& model_b,
                                 const PreprocessConfig& preprocess, int n_r, int k,
                                 std::uint64_t seed);

struct UnbalancedProtocol {
    std::vector<int> caps;       // training images kept per species
    int positive_pairs_a = 0, negative_pairs_a = 0;  // genus/global model
    int positive_pairs_b = 0, negative_pairs_b = 0;  // species/local model
    TrainConfig train_a, train_b;
    int n_r = 6, k = 30;
    std::uint64_t seed = 0;
};

// Retrains the full two-stage system under per-class training caps and
// reports accuracy per cap; caps that make pair generation impossible are
// recorded as failures instead of aborting the run.
ExperimentReport unbalanced_run(const DatasetSplit& split, const PreprocessConfig& preprocess,
                                const UnbalancedProtocol& protocol);

}  // namespace leafid
