#include "leafid/pairgen.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

namespace leafid {

std::string to_string(Grouping g) { return g == Grouping::species ? "species" : "genus"; }
std::string to_string(View v) { return v == View::global ? "global" : "local"; }

Grouping grouping_from_string(const std::string& s) {
    if (s == "species") return Grouping::species;
    if (s == "genus") return Grouping::genus;
    throw usage_error("unknown grouping '" + s + "' (expected species|genus)");
}

View view_from_string(const std::string& s) {
    if (s == "global") return View::global;
    if (s == "local") return View::local;
    throw usage_error("unknown view '" + s + "' (expected global|local)");
}

void PairSpec::validate() const {
    if (positive_count < 0 || negative_count < 0)
        throw usage_error("pair counts must be >= 0");
    if (negative_count < positive_count)
        throw usage_error("negative_count must be >= positive_count");
}

PairSet generate_pairs(const std::vector<LeafSample>& samples, const Taxonomy& taxonomy,
                       const PairSpec& spec) {
    spec.validate();
    if (samples.empty()) throw validation_error("generate_pairs: no samples");

    // group label per sample (species or genus), sorted by id for determinism
    std::vector<std::pair<std::string, std::string>> labeled;  // (sample_id, group)
    for (const auto& s : samples) {
        if (!s.species_id) continue;
        std::string group = spec.grouping == Grouping::species ? *s.species_id
                                                               : taxonomy.genus_of(*s.species_id);
        labeled.emplace_back(s.sample_id, group);
    }
    if (labeled.empty()) throw validation_error("generate_pairs: no labeled samples");
    std::sort(labeled.begin(), labeled.end());

    std::map<std::string, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < labeled.size(); ++i) by_group[labeled[i].second].push_back(i);

    if (by_group.size() < 2 && spec.negative_count > 0)
        throw validation_error("generate_pairs: need at least 2 groups for negative pairs");

    std::vector<std::pair<std::size_t, std::size_t>> pos_pool, neg_pool;
    for (const auto& [g, idx] : by_group)
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = a + 1; b < idx.size(); ++b) pos_pool.emplace_back(idx[a], idx[b]);
    for (std::size_t a = 0; a < labeled.size(); ++a)
        for (std::size_t b = a + 1; b < labeled.size(); ++b)
            if (labeled[a].second != labeled[b].second) neg_pool.emplace_back(a, b);

    if (spec.positive_count > 0 && pos_pool.empty())
        throw validation_error("generate_pairs: no group has 2 samples, positive pool is empty");

    PairSet out;
    out.spec = spec;
    auto rng = make_rng(spec.seed);

    auto draw = [&](std::vector<std::pair<std::size_t, std::size_t>>& pool, int want, int label,
                    const char* name) {
        if (want == 0) return;
        std::shuffle(pool.begin(), pool.end(), rng);
        if (static_cast<std::size_t>(want) <= pool.size()) {
            for (int i = 0; i < want; ++i)
                out.pairs.push_back({labeled[pool[i].first].first, labeled[pool[i].second].first, label});
        } else {
            if (!spec.allow_replacement)
                throw validation_error(std::string("generate_pairs: ") + name + " pool has only " +
                                       std::to_string(pool.size()) + " candidates for a request of " +
                                       std::to_string(want) + " (replacement disabled)");
            out.warnings.push_back(std::string(name) + " pool (" + std::to_string(pool.size()) +
                                   ") smaller than request (" + std::to_string(want) +
                                   "); sampled with replacement");
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            for (int i = 0; i < want; ++i) {
                auto& p = pool[pick(rng)];
                out.pairs.push_back({labeled[p.first].first, labeled[p.second].first, label});
            }
        }
    };

    draw(pos_pool, spec.positive_count, 1, "positive");
    draw(neg_pool, spec.negative_count, 0, "negative");
    return out;
}

void save_pairs(const PairSet& set, const std::string& path_stem) {
    std::ofstream csv(path_stem + ".csv");
    if (!csv) throw io_error("cannot write pair manifest: " + path_stem + ".csv");
    csv << "left_id,right_id,label\n";
    for (const auto& p : set.pairs) csv << p.left_id << ',' << p.right_id << ',' << p.label << '\n';

    nlohmann::json j;
    j["grouping"] = to_string(set.spec.grouping);
    j["view"] = to_string(set.spec.view);
    j["positive_count"] = set.spec.positive_count;
    j["negative_count"] = set.spec.negative_count;
    j["seed"] = set.spec.seed;
    j["allow_replacement"] = set.spec.allow_replacement;
    j["warnings"] = set.warnings;
    std::ofstream js(path_stem + ".json");
    if (!js) throw io_error("cannot write pair header: " + path_stem + ".json");
    js << j.dump(2) << '\n';
}

PairSet load_pairs(const std::string& path_stem) {
    std::ifstream js(path_stem + ".json");
    if (!js) throw io_error("cannot open pair header: " + path_stem + ".json");
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("bad pair header " + path_stem + ".json: " + e.what());
    }
    PairSet set;
    set.spec.grouping = grouping_from_string(j.at("grouping").get<std::string>());
    set.spec.view = view_from_string(j.at("view").get<std::string>());
    set.spec.positive_count = j.at("positive_count").get<int>();
    set.spec.negative_count = j.at("negative_count").get<int>();
    set.spec.seed = j.at("seed").get<std::uint64_t>();
    set.spec.allow_replacement = j.at("allow_replacement").get<bool>();
    if (j.contains("warnings")) set.warnings = j.at("warnings").get<std::vector<std::string>>();

    std::ifstream csv(path_stem + ".csv");
    if (!csv) throw io_error("cannot open pair manifest: " + path_stem + ".csv");
    std::string line;
    if (!std::getline(csv, line) || (line != "left_id,right_id,label" && line != "left_id,right_id,label\r"))
        throw validation_error("pair manifest header mismatch in " + path_stem + ".csv");
    int lineno = 1;
    while (std::getline(csv, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw validation_error("pair manifest parse error at line " + std::to_string(lineno));
        PairRef p;
        p.left_id = line.substr(0, c1);
        p.right_id = line.substr(c1 + 1, c2 - c1 - 1);
        std::string lab = line.substr(c2 + 1);
        if (lab != "0" && lab != "1")
            throw validation_error("pair manifest label must be 0/1 at line " + std::to_string(lineno));
        p.label = lab == "1" ? 1 : 0;
        set.pairs.push_back(std::move(p));
    }
    return set;
}

BatchIterator::BatchIterator(std::size_t pair_count, std::size_t batch_size, std::uint64_t seed)
    : count_(pair_count), batch_size_(batch_size), seed_(seed) {
    if (batch_size_ < 1) throw usage_error("batch_size must be >= 1");
}

std::vector<std::vector<std::uint32_t>> BatchIterator::epoch_batches(std::size_t epoch) const {
    std::vector<std::uint32_t> order(count_);
    for (std::size_t i = 0; i < count_; ++i) order[i] = static_cast<std::uint32_t>(i);
    auto rng = make_rng(derive_seed(seed_, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::uint32_t>> batches;
    for (std::size_t start = 0; start < count_; start += batch_size_) {
        std::size_t end = std::min(count_, start + batch_size_);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

}  // namespace leafid
