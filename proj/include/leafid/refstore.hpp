#pragma once

#include <string>
#include <vector>

#include "leafid/model.hpp"
#include "leafid/views.hpp"

namespace leafid {

struct ReferenceEntry {
    std::string sample_id;
    std::string species_id;
    std::string genus_id;
    Eigen::VectorXf global_embedding;  // from model A
    Eigen::VectorXf local_embedding;   // from model B
};

// Immutable reference gallery: N_r reference images per species with cached
// embeddings for both views. Extension produces a new set; the models are
// never touched.
class ReferenceSet {
public:
    std::vector<ReferenceEntry> entries;
    int n_r = 0;
    std::string fingerprint_a;  // model A content hash
    std::string fingerprint_b;  // model B content hash
    PreprocessConfig preprocess;

    std::vector<std::string> species_ids() const;
    std::vector<std::string> genus_ids() const;
    std::vector<std::size_t> entries_of_species(const std::string& species_id) const;
    std::vector<std::string> species_of_genus(const std::string& genus_id) const;
    bool has_species(const std::string& species_id) const;

    void check_models(const SiameseModel& a, const SiameseModel& b) const;
};

struct ReferenceSelection {
    std::vector<std::string> sample_ids;   // chosen references, sorted
    std::vector<std::string> warnings;     // species that fell short of N_r
};

// Picks N_r references per species (seeded). When a species has fewer
// samples than requested, the genus shortfall is refilled round-robin from
// sibling species so the genus keeps its reference budget where possible;
// every species with at least one sample always contributes at least one.
ReferenceSelection select_references(const std::vector<LeafSample>& train, const Taxonomy& taxonomy,
                                     int n_r, std::uint64_t seed);

// Embeds the selected references (global via A, local via B) and records the
// model fingerprints. `cache` optionally supplies precomputed views.
ReferenceSet build_references(const std::vector<LeafSample>& train, const ReferenceSelection& selection,
                              const Taxonomy& taxonomy, const SiameseModel& model_a,
                              const SiameseModel& model_b, const PreprocessConfig& preprocess,
                              int n_r, const ViewCache* cache = nullptr);

// Registers unseen species by reference addition only; returns the extended
// set, leaves the input set and the models untouched.
ReferenceSet add_species(const ReferenceSet& set, const std::vector<LeafSample>& new_samples,
                         const Taxonomy& taxonomy_with_new_rows, const SiameseModel& model_a,
                         const SiameseModel& model_b, std::uint64_t seed,
                         const ViewCache* cache = nullptr);

// Directory layout: references.json (manifest) + references.bin (embedding
// cache, magic "REFS").
void save_references(const ReferenceSet& set, const std::string& dir);
ReferenceSet load_references(const std::string& dir);

}  // namespace leafid
