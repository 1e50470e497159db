#include "leafid/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace leafid {

Taxonomy::Taxonomy(std::vector<TaxonRecord> records) : records_(std::move(records)) {
    std::map<std::string, std::string> genus_family;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.species_id.empty() || r.genus_id.empty() || r.family_id.empty())
            throw validation_error("taxonomy: empty id in record for species '" + r.species_id + "'");
        if (by_species_.count(r.species_id))
            throw validation_error("taxonomy: duplicate species_id '" + r.species_id + "'");
        auto [it, inserted] = genus_family.try_emplace(r.genus_id, r.family_id);
        if (!inserted && it->second != r.family_id)
            throw validation_error("taxonomy: genus '" + r.genus_id + "' mapped to two families");
        by_species_[r.species_id] = i;
        genus_species_[r.genus_id].push_back(r.species_id);
    }
    for (auto& [g, sp] : genus_species_) std::sort(sp.begin(), sp.end());
}

bool Taxonomy::has_species(const std::string& species_id) const {
    return by_species_.count(species_id) != 0;
}

const TaxonRecord& Taxonomy::species(const std::string& species_id) const {
    auto it = by_species_.find(species_id);
    if (it == by_species_.end())
        throw validation_error("taxonomy: unknown species_id '" + species_id + "'");
    return records_[it->second];
}

const std::string& Taxonomy::genus_of(const std::string& species_id) const {
    return species(species_id).genus_id;
}

const std::string& Taxonomy::family_of(const std::string& species_id) const {
    return species(species_id).family_id;
}

std::vector<std::string> Taxonomy::species_of_genus(const std::string& genus_id) const {
    auto it = genus_species_.find(genus_id);
    if (it == genus_species_.end())
        throw validation_error("taxonomy: unknown genus_id '" + genus_id + "'");
    return it->second;
}

std::vector<std::string> Taxonomy::genus_ids() const {
    std::vector<std::string> out;
    out.reserve(genus_species_.size());
    for (const auto& [g, _] : genus_species_) out.push_back(g);
    return out;
}

Taxonomy Taxonomy::merged_with(const std::vector<TaxonRecord>& extra) const {
    std::vector<TaxonRecord> all = records_;
    all.insert(all.end(), extra.begin(), extra.end());
    return Taxonomy(std::move(all));
}

namespace {

// Splits a CSV row into exactly `min_fields` leading fields; the remainder
// (which may contain commas, e.g. a display name) stays in the last field.
std::vector<std::string> split_csv_row(const std::string& line, std::size_t min_fields) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (out.size() + 1 < min_fields) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) break;
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    out.push_back(line.substr(start));
    return out;
}

}  // namespace

std::vector<TaxonRecord> load_taxonomy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open taxonomy file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw validation_error("taxonomy file is empty (header required): " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "species_id,genus_id,family_id,display_name")
        throw validation_error("taxonomy header mismatch in " + path + ": got '" + line + "'");

    std::vector<TaxonRecord> records;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_row(line, 4);
        if (fields.size() != 4)
            throw validation_error("taxonomy parse error at line " + std::to_string(lineno) +
                                   ": expected 4 fields");
        records.push_back(TaxonRecord{fields[0], fields[1], fields[2], fields[3]});
    }
    Taxonomy check(records);  // enforce invariants before returning
    return check.records();
}

void save_taxonomy(const std::vector<TaxonRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write taxonomy file: " + path);
    out << "species_id,genus_id,family_id,display_name\n";
    for (const auto& r : records)
        out << r.species_id << ',' << r.genus_id << ',' << r.family_id << ',' << r.display_name << '\n';
}

DatasetSplit load_split(const std::string& root, const Taxonomy& taxonomy,
                        const SplitPolicy& policy, std::uint64_t seed) {
    if (!fs::is_directory(root)) throw io_error("corpus root is not a directory: " + root);

    // species dir -> sorted list of (sample_id, path)
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> per_species;
    std::set<std::string> seen_ids;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        std::string species = entry.path().filename().string();
        if (!taxonomy.has_species(species))
            throw validation_error("species directory '" + species + "' not present in taxonomy");
        auto& list = per_species[species];
        for (const auto& f : fs::directory_iterator(entry.path())) {
            if (!f.is_regular_file() || f.path().extension() != ".png") continue;
            std::string sid = f.path().stem().string();
            if (!seen_ids.insert(sid).second)
                throw validation_error("duplicate sample_id '" + sid + "' in corpus");
            list.emplace_back(sid, f.path().string());
        }
        std::sort(list.begin(), list.end());
    }
    if (per_species.empty()) throw validation_error("corpus has no species directories: " + root);

    std::set<std::string> test_ids;
    if (const auto* man = std::get_if<SplitByManifest>(&policy)) {
        std::ifstream in(man->path);
        if (!in) throw io_error("cannot open split manifest: " + man->path);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) test_ids.insert(line);
        }
    }

    DatasetSplit split;
    split.taxonomy = taxonomy;
    auto rng = make_rng(seed);

    for (auto& [species, files] : per_species) {
        std::size_t want_test = 0;
        if (const auto* c = std::get_if<SplitByCount>(&policy)) {
            if (c->test_per_class < 0) throw usage_error("test_per_class must be >= 0");
            want_test = static_cast<std::size_t>(c->test_per_class);
            if (files.size() < want_test + 1)
                throw validation_error("species '" + species + "' has " + std::to_string(files.size()) +
                                       " samples, cannot reserve " + std::to_string(want_test) +
                                       " for test and keep a training sample");
        } else if (const auto* f = std::get_if<SplitByFraction>(&policy)) {
            if (f->test_fraction < 0.0 || f->test_fraction >= 1.0)
                throw usage_error("test_fraction must be in [0,1)");
            want_test = static_cast<std::size_t>(std::llround(f->test_fraction * files.size()));
            if (files.size() < want_test + 1)
                throw validation_error("species '" + species + "' too small for requested test fraction");
        }

        std::vector<std::size_t> order(files.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (!std::holds_alternative<SplitByManifest>(policy))
            std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            const auto& [sid, path] = files[order[rank]];
            bool is_test = std::holds_alternative<SplitByManifest>(policy)
                               ? test_ids.count(sid) != 0
                               : rank < want_test;
            LeafSample s;
            s.sample_id = sid;
            s.species_id = species;
            try {
                s.image = load_png(path);
            } catch (const Error&) {
                throw io_error("unreadable image: " + path);
            }
            (is_test ? split.test : split.train).push_back(std::move(s));
        }
    }

    // Stable order independent of directory iteration quirks.
    auto by_id = [](const LeafSample& a, const LeafSample& b) { return a.sample_id < b.sample_id; };
    std::sort(split.train.begin(), split.train.end(), by_id);
    std::sort(split.test.begin(), split.test.end(), by_id);
    return split;
}

}  // namespace leafid
