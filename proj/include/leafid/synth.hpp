#pragma once

#include <cstdint>
#include <string>

#include "leafid/dataset.hpp"

namespace leafid {

// Desk-scale two-factor benchmark: genus identity is carried by the leaf
// silhouette (eccentricity, lobes, margin serration), species identity by
// interior texture and venation. Global views separate genera, local crops
// separate sibling species.
struct SynthSpec {
    int num_genera = 6;
    int species_per_genus = 3;
    int samples_per_species = 21;
    int train_per_species = 6;
    int image_size = 256;
    double shape_noise = 0.3;    // silhouette + pose jitter within a species
    double texture_noise = 0.25; // phase/brightness/pixel noise
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthDataset {
    DatasetSplit split;                  // train/test + taxonomy
    std::vector<TaxonRecord> taxonomy;   // same records as split.taxonomy
};

SynthDataset generate(const SynthSpec& spec);

// Renders one sample (genus g, species s within g, sample index i).
Image render_leaf(const SynthSpec& spec, int genus, int species, int sample_index);

// Writes `<dir>/corpus/<species_id>/<sample_id>.png`, `<dir>/taxonomy.csv`
// and `<dir>/test_ids.txt` (split manifest).
void write_corpus(const SynthDataset& data, const std::string& dir);

std::string synth_species_id(int genus, int species);
std::string synth_genus_id(int genus);

}  // namespace leafid
