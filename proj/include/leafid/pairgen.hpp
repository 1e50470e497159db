#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leafid/dataset.hpp"

namespace leafid {

enum class Grouping { species, genus };
enum class View { global, local };

std::string to_string(Grouping g);
std::string to_string(View v);
Grouping grouping_from_string(const std::string& s);
View view_from_string(const std::string& s);

// A labeled pair by sample id; rasters are materialized lazily at train time.
struct PairRef {
    std::string left_id;
    std::string right_id;
    int label = 0;  // 1 = same group, 0 = different group
};

struct PairSpec {
    Grouping grouping = Grouping::species;
    View view = View::global;
    int positive_count = 0;
    int negative_count = 0;
    std::uint64_t seed = 0;
    bool allow_replacement = true;  // only used when a pool is smaller than the request

    void validate() const;
};

struct PairSet {
    std::vector<PairRef> pairs;
    PairSpec spec;
    std::vector<std::string> warnings;  // e.g. sampling with replacement
};

// Samples exactly positive_count same-group and negative_count cross-group
// pairs, uniformly without replacement from the candidate pools (with
// replacement only when a pool is smaller than the request and the spec
// allows it).
PairSet generate_pairs(const std::vector<LeafSample>& samples, const Taxonomy& taxonomy,
                       const PairSpec& spec);

// Manifest: `<path>.csv` with header left_id,right_id,label plus
// `<path>.json` recording the PairSpec and warnings.
void save_pairs(const PairSet& set, const std::string& path_stem);
PairSet load_pairs(const std::string& path_stem);

// Seeded epoch shuffling; the final partial batch is yielded.
class BatchIterator {
public:
    BatchIterator(std::size_t pair_count, std::size_t batch_size, std::uint64_t seed);

    // Batches of indices into the pair list for the given epoch (0-based).
    std::vector<std::vector<std::uint32_t>> epoch_batches(std::size_t epoch) const;

private:
    std::size_t count_;
    std::size_t batch_size_;
    std::uint64_t seed_;
};

}  // namespace leafid
