#include "leafid/views.hpp"

namespace leafid {

ViewCache::ViewCache(const std::vector<LeafSample>& samples, const PreprocessConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    add_samples(samples);
}

void ViewCache::add_samples(const std::vector<LeafSample>& samples) {
    for (const auto& s : samples) {
        if (cache_.count(s.sample_id)) continue;
        try {
            cache_.emplace(s.sample_id, make_views(s.image, cfg_));
        } catch (const Error& e) {
            throw Error(e.kind(), "preprocessing sample '" + s.sample_id + "': " + e.what());
        }
    }
}

const ViewPair& ViewCache::views(const std::string& sample_id) const {
    auto it = cache_.find(sample_id);
    if (it == cache_.end())
        throw validation_error("sample '" + sample_id + "' not present in view cache");
    return it->second;
}

const Image& ViewCache::view(const std::string& sample_id, View which) const {
    const ViewPair& vp = views(sample_id);
    return which == View::global ? vp.global_view : vp.local_view;
}

}  // namespace leafid
