#pragma once

#include <map>
#include <string>
#include <vector>

#include "leafid/dataset.hpp"
#include "leafid/pairgen.hpp"
#include "leafid/preprocess.hpp"

namespace leafid {

// Preprocessed two-view rasters per sample, computed once and shared by
// training, reference building and evaluation.
class ViewCache {
public:
    ViewCache() = default;
    ViewCache(const std::vector<LeafSample>& samples, const PreprocessConfig& cfg);

    void add_samples(const std::vector<LeafSample>& samples);

    const ViewPair& views(const std::string& sample_id) const;
    const Image& view(const std::string& sample_id, View which) const;
    bool has(const std::string& sample_id) const { return cache_.count(sample_id) != 0; }
    const PreprocessConfig& config() const { return cfg_; }

private:
    PreprocessConfig cfg_;
    std::map<std::string, ViewPair> cache_;
};

}  // namespace leafid
