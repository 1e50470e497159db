#include "leafid/refstore.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

namespace fs = std::filesystem;

namespace leafid {

std::vector<std::string> ReferenceSet::species_ids() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.species_id);
    return {s.begin(), s.end()};
}

std::vector<std::string> ReferenceSet::genus_ids() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.genus_id);
    return {s.begin(), s.end()};
}

std::vector<std::size_t> ReferenceSet::entries_of_species(const std::string& species_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].species_id == species_id) out.push_back(i);
    return out;
}

std::vector<std::string> ReferenceSet::species_of_genus(const std::string& genus_id) const {
    std::set<std::string> s;
    for (const auto& e : entries)
        if (e.genus_id == genus_id) s.insert(e.species_id);
    return {s.begin(), s.end()};
}

bool ReferenceSet::has_species(const std::string& species_id) const {
    for (const auto& e : entries)
        if (e.species_id == species_id) return true;
    return false;
}

void ReferenceSet::check_models(const SiameseModel& a, const SiameseModel& b) const {
    if (a.fingerprint() != fingerprint_a)
        throw fingerprint_error("model A fingerprint " + a.fingerprint() +
                                " does not match reference set (" + fingerprint_a + ")");
    if (b.fingerprint() != fingerprint_b)
        throw fingerprint_error("model B fingerprint " + b.fingerprint() +
                                " does not match reference set (" + fingerprint_b + ")");
}

ReferenceSelection select_references(const std::vector<LeafSample>& train, const Taxonomy& taxonomy,
                                     int n_r, std::uint64_t seed) {
    if (n_r < 1) throw usage_error("select_references: N_r must be >= 1");

    // genus -> species -> sorted sample ids
    std::map<std::string, std::map<std::string, std::vector<std::string>>> tree;
    for (const auto& s : train) {
        if (!s.species_id) continue;
        tree[taxonomy.genus_of(*s.species_id)][*s.species_id].push_back(s.sample_id);
    }
    if (tree.empty()) throw validation_error("select_references: no labeled training samples");

    ReferenceSelection sel;
    auto rng = make_rng(seed);
    for (auto& [genus, species_map] : tree) {
        int deficit = 0;
        std::map<std::string, std::vector<std::string>> leftovers;
        for (auto& [species, ids] : species_map) {
            if (ids.empty())
                throw validation_error("select_references: species '" + species + "' has no samples");
            std::sort(ids.begin(), ids.end());
            std::shuffle(ids.begin(), ids.end(), rng);
            const int take = std::min<int>(n_r, static_cast<int>(ids.size()));
            for (int i = 0; i < take; ++i) sel.sample_ids.push_back(ids[i]);
            if (take < n_r) {
                deficit += n_r - take;
                sel.warnings.push_back("species '" + species + "' has only " + std::to_string(take) +
                                       " of " + std::to_string(n_r) + " requested references");
            }
            leftovers[species].assign(ids.begin() + take, ids.end());
        }
        // Refill the genus budget round-robin from sibling species.
        while (deficit > 0) {
            bool any = false;
            for (auto& [species, rest] : leftovers) {
                if (deficit == 0) break;
                if (rest.empty()) continue;
                sel.sample_ids.push_back(rest.front());
                rest.erase(rest.begin());
                --deficit;
                any = true;
            }
            if (!any) break;  // genus exhausted
        }
    }
    std::sort(sel.sample_ids.begin(), sel.sample_ids.end());
    return sel;
}

ReferenceSet build_references(const std::vector<LeafSample>& train, const ReferenceSelection& selection,
                              const Taxonomy& taxonomy, const SiameseModel& model_a,
                              const SiameseModel& model_b, const PreprocessConfig& preprocess,
                              int n_r, const ViewCache* cache) {
    if (n_r < 1) throw usage_error("build_references: N_r must be >= 1");
    std::map<std::string, const LeafSample*> by_id;
    for (const auto& s : train) by_id[s.sample_id] = &s;

    ReferenceSet set;
    set.n_r = n_r;
    set.fingerprint_a = model_a.fingerprint();
    set.fingerprint_b = model_b.fingerprint();
    set.preprocess = preprocess;

    nn::Workspace<float> ws;
    for (const auto& id : selection.sample_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw validation_error("build_references: unknown sample id '" + id + "'");
        const LeafSample& s = *it->second;
        if (!s.species_id)
            throw validation_error("build_references: sample '" + id + "' is unlabeled");

        ReferenceEntry e;
        e.sample_id = id;
        e.species_id = *s.species_id;
        e.genus_id = taxonomy.genus_of(*s.species_id);
        if (cache && cache->has(id)) {
            const ViewPair& vp = cache->views(id);
            e.global_embedding = embed(model_a, vp.global_view, ws);
            e.local_embedding = embed(model_b, vp.local_view, ws);
        } else {
            ViewPair vp = make_views(s.image, preprocess);
            e.global_embedding = embed(model_a, vp.global_view, ws);
            e.local_embedding = embed(model_b, vp.local_view, ws);
        }
        set.entries.push_back(std::move(e));
    }
    std::sort(set.entries.begin(), set.entries.end(),
              [](const ReferenceEntry& a, const ReferenceEntry& b) { return a.sample_id < b.sample_id; });
    return set;
}

ReferenceSet add_species(const ReferenceSet& set, const std::vector<LeafSample>& new_samples,
                         const Taxonomy& taxonomy_with_new_rows, const SiameseModel& model_a,
                         const SiameseModel& model_b, std::uint64_t seed, const ViewCache* cache) {
    set.check_models(model_a, model_b);

    std::set<std::string> new_species;
    for (const auto& s : new_samples) {
        if (!s.species_id) throw validation_error("add_species: unlabeled sample '" + s.sample_id + "'");
        if (set.has_species(*s.species_id))
            throw validation_error("add_species: species '" + *s.species_id +
                                   "' already present in the reference set");
        new_species.insert(*s.species_id);
    }

    ReferenceSet out = set;  // input set stays untouched
    if (new_samples.empty()) return out;

    const int n_r = std::max(1, set.n_r);
    ReferenceSelection sel = select_references(new_samples, taxonomy_with_new_rows, n_r, seed);
    ReferenceSet extra = build_references(new_samples, sel, taxonomy_with_new_rows, model_a, model_b,
                                          set.preprocess, n_r, cache);
    out.entries.insert(out.entries.end(), extra.entries.begin(), extra.entries.end());
    std::sort(out.entries.begin(), out.entries.end(),
              [](const ReferenceEntry& a, const ReferenceEntry& b) { return a.sample_id < b.sample_id; });
    return out;
}

namespace {
constexpr char kRefsMagic[4] = {'R', 'E', 'F', 'S'};
constexpr std::uint32_t kRefsVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::string polarity_str(LeafPolarity p) { return p == LeafPolarity::darker ? "darker" : "brighter"; }
LeafPolarity polarity_from(const std::string& s) {
    if (s == "darker") return LeafPolarity::darker;
    if (s == "brighter") return LeafPolarity::brighter;
    throw validation_error("bad polarity '" + s + "' in reference manifest");
}
}  // namespace

void save_references(const ReferenceSet& set, const std::string& dir) {
    fs::create_directories(dir);
    if (set.entries.empty()) throw validation_error("save_references: empty reference set");
    const int m_a = static_cast<int>(set.entries.front().global_embedding.size());
    const int m_b = static_cast<int>(set.entries.front().local_embedding.size());
    const std::size_t stride = static_cast<std::size_t>(m_a + m_b) * sizeof(float);

    nlohmann::json j;
    j["version"] = kRefsVersion;
    j["n_r"] = set.n_r;
    j["model_a_fingerprint"] = set.fingerprint_a;
    j["model_b_fingerprint"] = set.fingerprint_b;
    j["m_a"] = m_a;
    j["m_b"] = m_b;
    j["preprocess"] = {{"crop_size", set.preprocess.crop_size},
                       {"kernel_radius", set.preprocess.kernel_radius},
                       {"polarity", polarity_str(set.preprocess.polarity)}};
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        const auto& e = set.entries[i];
        entries.push_back({{"sample_id", e.sample_id},
                           {"species_id", e.species_id},
                           {"genus_id", e.genus_id},
                           {"offset", i * stride}});
    }
    j["entries"] = std::move(entries);

    std::ofstream manifest(fs::path(dir) / "references.json");
    if (!manifest) throw io_error("cannot write reference manifest in " + dir);
    manifest << j.dump(2) << '\n';

    std::ofstream bin(fs::path(dir) / "references.bin", std::ios::binary);
    if (!bin) throw io_error("cannot write reference cache in " + dir);
    bin.write(kRefsMagic, 4);
    write_u32(bin, kRefsVersion);
    write_u32(bin, static_cast<std::uint32_t>(m_a));
    write_u32(bin, static_cast<std::uint32_t>(m_b));
    write_u32(bin, static_cast<std::uint32_t>(set.entries.size()));
    for (const auto& e : set.entries) {
        bin.write(reinterpret_cast<const char*>(e.global_embedding.data()), m_a * sizeof(float));
        bin.write(reinterpret_cast<const char*>(e.local_embedding.data()), m_b * sizeof(float));
    }
    if (!bin) throw io_error("short write on reference cache in " + dir);
}

ReferenceSet load_references(const std::string& dir) {
    std::ifstream manifest(fs::path(dir) / "references.json");
    if (!manifest) throw io_error("cannot open reference manifest: " + dir + "/references.json");
    nlohmann::json j;
    try {
        manifest >> j;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("bad reference manifest in " + dir + ": " + e.what());
    }
    if (j.at("version").get<std::uint32_t>() != kRefsVersion)
        throw validation_error("unsupported reference manifest version in " + dir);

    ReferenceSet set;
    set.n_r = j.at("n_r").get<int>();
    set.fingerprint_a = j.at("model_a_fingerprint").get<std::string>();
    set.fingerprint_b = j.at("model_b_fingerprint").get<std::string>();
    const int m_a = j.at("m_a").get<int>();
    const int m_b = j.at("m_b").get<int>();
    const auto& pp = j.at("preprocess");
    set.preprocess.crop_size = pp.at("crop_size").get<int>();
    set.preprocess.kernel_radius = pp.at("kernel_radius").get<int>();
    set.preprocess.polarity = polarity_from(pp.at("polarity").get<std::string>());

    const fs::path bin_path = fs::path(dir) / "references.bin";
    if (!fs::exists(bin_path))
        throw io_error("reference manifest points to missing cache file: " + bin_path.string());
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw io_error("cannot open reference cache: " + bin_path.string());
    std::string buf((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    const std::size_t count = j.at("entries").size();
    const std::size_t header = 4 + 4 * 4;
    const std::size_t stride = static_cast<std::size_t>(m_a + m_b) * sizeof(float);
    if (buf.size() != header + count * stride)
        throw validation_error("reference cache length mismatch (expected " +
                               std::to_string(header + count * stride) + " bytes, got " +
                               std::to_string(buf.size()) + ")");
    if (std::memcmp(buf.data(), kRefsMagic, 4) != 0)
        throw validation_error("reference cache has bad magic: " + bin_path.string());

    auto read_u32_at = [&](std::size_t off) {
        const auto* b = reinterpret_cast<const unsigned char*>(buf.data() + off);
        return static_cast<std::uint32_t>(b[0]) | (b[1] << 8) | (b[2] << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    };
    if (read_u32_at(4) != kRefsVersion) throw validation_error("reference cache version mismatch");
    if (read_u32_at(8) != static_cast<std::uint32_t>(m_a) ||
        read_u32_at(12) != static_cast<std::uint32_t>(m_b) ||
        read_u32_at(16) != static_cast<std::uint32_t>(count))
        throw validation_error("reference cache header disagrees with manifest");

    for (std::size_t i = 0; i < count; ++i) {
        const auto& je = j.at("entries").at(i);
        ReferenceEntry e;
        e.sample_id = je.at("sample_id").get<std::string>();
        e.species_id = je.at("species_id").get<std::string>();
        e.genus_id = je.at("genus_id").get<std::string>();
        const std::size_t offset = je.at("offset").get<std::size_t>();
        if (offset != i * stride)
            throw validation_error("reference manifest offset mismatch for entry " + std::to_string(i));
        e.global_embedding.resize(m_a);
        e.local_embedding.resize(m_b);
        std::memcpy(e.global_embedding.data(), buf.data() + header + offset, m_a * sizeof(float));
        std::memcpy(e.local_embedding.data(), buf.data() + header + offset + m_a * sizeof(float),
                    m_b * sizeof(float));
        set.entries.push_back(std::move(e));
    }
    return set;
}

}  // namespace leafid
