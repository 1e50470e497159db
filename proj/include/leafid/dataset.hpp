#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "leafid/image.hpp"

namespace leafid {

// One row of the taxonomy table: species -> genus -> family.
struct TaxonRecord {
    std::string species_id;
    std::string genus_id;
    std::string family_id;
    std::string display_name;
};

// Validated species->genus->family lookup built from TaxonRecords.
class Taxonomy {
public:
    Taxonomy() = default;
    explicit Taxonomy(std::vector<TaxonRecord> records);

    const std::vector<TaxonRecord>& records() const { return records_; }
    bool has_species(const std::string& species_id) const;
    const TaxonRecord& species(const std::string& species_id) const;
    const std::string& genus_of(const std::string& species_id) const;
    const std::string& family_of(const std::string& species_id) const;
    std::vector<std::string> species_of_genus(const std::string& genus_id) const;
    std::vector<std::string> genus_ids() const;

    // Adds rows for previously unseen species (same invariants re-checked).
    Taxonomy merged_with(const std::vector<TaxonRecord>& extra) const;

private:
    std::vector<TaxonRecord> records_;
    std::map<std::string, std::size_t> by_species_;
    std::map<std::string, std::vector<std::string>> genus_species_;
};

struct LeafSample {
    std::string sample_id;
    Image image;
    std::optional<std::string> species_id;  // absent for unlabeled test inputs
};

struct DatasetSplit {
    std::vector<LeafSample> train;
    std::vector<LeafSample> test;
    Taxonomy taxonomy;
};

// CSV format: header `species_id,genus_id,family_id,display_name`.
std::vector<TaxonRecord> load_taxonomy(const std::string& path);
void save_taxonomy(const std::vector<TaxonRecord>& records, const std::string& path);

// How the test set is chosen from `<root>/<species_id>/<sample_id>.png`.
struct SplitByCount { int test_per_class; };      // N test images per species
struct SplitByFraction { double test_fraction; }; // rounded per species
struct SplitByManifest { std::string path; };     // explicit test sample ids
using SplitPolicy = std::variant<SplitByCount, SplitByFraction, SplitByManifest>;

DatasetSplit load_split(const std::string& root, const Taxonomy& taxonomy,
                        const SplitPolicy& policy, std::uint64_t seed);

}  // namespace leafid
