#include "leafid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace leafid {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct GenusShape {
    double ecc;        // minor/major axis ratio
    int lobes;
    double lobe_amp;
    double serr_freq;
    double serr_amp;
    double taper;      // base-side narrowing
    double vein_spacing_frac;
};

GenusShape genus_shape(int g) {
    static const GenusShape table[8] = {
        {0.34, 0, 0.00, 0.0, 0.00, 0.35, 0.16},
        {0.92, 0, 0.00, 0.0, 0.00, 0.05, 0.20},
        {0.62, 3, 0.26, 0.0, 0.00, 0.12, 0.24},
        {0.75, 5, 0.18, 0.0, 0.00, 0.08, 0.18},
        {0.50, 0, 0.00, 22.0, 0.05, 0.30, 0.22},
        {0.85, 7, 0.12, 0.0, 0.00, 0.00, 0.26},
        {0.42, 4, 0.22, 0.0, 0.00, 0.25, 0.17},
        {0.70, 6, 0.15, 14.0, 0.04, 0.18, 0.21},
    };
    GenusShape s = table[g % 8];
    // Beyond the base palette, shift eccentricity so extra genera stay apart.
    s.ecc = std::clamp(s.ecc + 0.06 * (g / 8), 0.25, 0.97);
    return s;
}

struct SpeciesTexture {
    double lambda_frac;  // stripe wavelength as a fraction of the half-length
    double theta_deg;    // stripe orientation in the leaf frame
    double vein_angle_deg;
};

constexpr int kMaxSpeciesPatterns = 6;

SpeciesTexture species_texture(int g, int s) {
    static const double lambda[kMaxSpeciesPatterns] = {0.07, 0.16, 0.36, 0.10, 0.24, 0.48};
    static const double theta[kMaxSpeciesPatterns] = {0.0, 60.0, 120.0, 30.0, 90.0, 150.0};
    static const double vein[kMaxSpeciesPatterns] = {25.0, 45.0, 65.0, 35.0, 55.0, 75.0};
    SpeciesTexture t;
    t.lambda_frac = lambda[s];
    t.theta_deg = theta[s] + 7.0 * g;  // decorrelate texture across genera
    t.vein_angle_deg = vein[s];
    return t;
}

double positive_fmod(double a, double m) {
    double r = std::fmod(a, m);
    return r < 0.0 ? r + m : r;
}

}  // namespace

void SynthSpec::validate() const {
    if (num_genera < 1 || species_per_genus < 1 || samples_per_species < 1)
        throw usage_error("synth: all counts must be >= 1");
    if (species_per_genus > kMaxSpeciesPatterns)
        throw usage_error("synth: species_per_genus exceeds the " +
                          std::to_string(kMaxSpeciesPatterns) + " available texture patterns");
    if (train_per_species < 0 || train_per_species > samples_per_species)
        throw usage_error("synth: train_per_species must be within samples_per_species");
    if (image_size < 64) throw usage_error("synth: image_size must be >= 64");
    if (shape_noise < 0.0 || texture_noise < 0.0) throw usage_error("synth: noise must be >= 0");
}

std::string synth_genus_id(int genus) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "g%02d", genus);
    return buf;
}

std::string synth_species_id(int genus, int species) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "g%02ds%02d", genus, species);
    return buf;
}

Image render_leaf(const SynthSpec& spec, int genus, int species, int sample_index) {
    spec.validate();
    const GenusShape shape = genus_shape(genus);
    const SpeciesTexture tex = species_texture(genus, species);
    const int n = spec.image_size;
    const double sn = spec.shape_noise;
    const double tn = spec.texture_noise;

    auto rng = make_rng(derive_seed(spec.seed, static_cast<std::uint64_t>(genus) * 1000003ull +
                                                   static_cast<std::uint64_t>(species) * 1009ull +
                                                   static_cast<std::uint64_t>(sample_index)));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Per-sample jitter, all scaled by the noise knobs so zero noise means
    // pixel-identical samples.
    const double scale = 1.0 + 0.12 * sn * uni(rng);
    const double rot = (25.0 * kPi / 180.0) * sn * uni(rng);
    const double tx = 8.0 * sn * uni(rng);
    const double ty = 8.0 * sn * uni(rng);
    const double ecc = std::clamp(shape.ecc * (1.0 + 0.06 * sn * uni(rng)), 0.2, 0.98);
    const double lobe_amp = std::max(0.0, shape.lobe_amp + 0.03 * sn * uni(rng));
    const double lobe_phase = 0.25 * sn * uni(rng);
    const double phase = 2.0 * kPi * uni01(rng) * std::clamp(tn * 4.0, 0.0, 1.0);
    const double brightness = 10.0 * tn * uni(rng);

    const double a = 0.40 * n * scale;        // half-length along the major axis
    const double b = a * ecc;
    const double cx = n / 2.0 + tx, cy = n / 2.0 + ty;
    const double cos_r = std::cos(rot), sin_r = std::sin(rot);

    const double theta = tex.theta_deg * kPi / 180.0;
    const double lambda = std::max(2.0, tex.lambda_frac * a);
    const double alpha = tex.vein_angle_deg * kPi / 180.0;
    const double vein_spacing = shape.vein_spacing_frac * a;
    const double vein_step = std::sin(alpha) * vein_spacing;

    const double base_r = 46.0, base_g = 98.0 + 4.0 * (genus % 5 - 2), base_b = 44.0;

    Image img(n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double noise = gauss(rng);
            const double dx = x - cx, dy = y - cy;
            const double u = cos_r * dx + sin_r * dy;
            const double v = -sin_r * dx + cos_r * dy;
            const double ru = u / a, rv = v / b;
            const double r = std::hypot(ru, rv);
            const double t = std::atan2(rv, ru);
            double boundary = 1.0 + lobe_amp * std::cos(shape.lobes * t + lobe_phase) +
                              shape.serr_amp * std::cos(shape.serr_freq * t);
            boundary *= 1.0 - shape.taper * (1.0 - std::cos(t)) / 2.0;

            auto* px = img.px(y, x);
            if (r > boundary) {
                const double bg = 249.0 + 3.0 * tn * noise;
                const auto val = static_cast<std::uint8_t>(std::clamp(bg, 0.0, 255.0));
                px[0] = px[1] = px[2] = val;
                continue;
            }

            double stripe = std::sin(2.0 * kPi * (u * std::cos(theta) + v * std::sin(theta)) / lambda + phase);
            stripe += 0.35 * std::sin(2.0 * kPi * (-u * std::sin(theta) + v * std::cos(theta)) /
                                          (1.7 * lambda) + 1.3 * phase);
            const double tex_mod = 30.0 * stripe / 1.35;

            // Venation: midrib along the major axis plus parallel laterals at
            // the species angle, mirrored across the midrib.
            double vein_strength = 0.0;
            const double w_mid = 1.3, w_lat = 0.9, fade = 0.9;
            if (std::abs(v) <= w_mid + fade)
                vein_strength = std::clamp((w_mid + fade - std::abs(v)) / fade, 0.0, 1.0);
            const double q = positive_fmod(std::sin(alpha) * u - std::cos(alpha) * std::abs(v), vein_step);
            const double lat_dist = std::min(q, vein_step - q);
            if (lat_dist <= w_lat + fade)
                vein_strength = std::max(
                    vein_strength, 0.8 * std::clamp((w_lat + fade - lat_dist) / fade, 0.0, 1.0));

            const double dark = 1.0 - 0.45 * vein_strength;
            const double pn = 10.0 * tn * noise + brightness;
            px[0] = static_cast<std::uint8_t>(std::clamp((base_r + 0.4 * tex_mod) * dark + pn, 0.0, 255.0));
            px[1] = static_cast<std::uint8_t>(std::clamp((base_g + tex_mod) * dark + pn, 0.0, 255.0));
            px[2] = static_cast<std::uint8_t>(std::clamp((base_b + 0.3 * tex_mod) * dark + pn, 0.0, 255.0));
        }
    }
    return img;
}

SynthDataset generate(const SynthSpec& spec) {
    spec.validate();
    SynthDataset out;
    for (int g = 0; g < spec.num_genera; ++g) {
        char fam[8];
        std::snprintf(fam, sizeof(fam), "f%02d", g / 2);
        for (int s = 0; s < spec.species_per_genus; ++s) {
            TaxonRecord rec;
            rec.species_id = synth_species_id(g, s);
            rec.genus_id = synth_genus_id(g);
            rec.family_id = fam;
            rec.display_name = "Leaf G" + std::to_string(g) + " S" + std::to_string(s);
            out.taxonomy.push_back(rec);
        }
    }
    out.split.taxonomy = Taxonomy(out.taxonomy);

    for (int g = 0; g < spec.num_genera; ++g) {
        for (int s = 0; s < spec.species_per_genus; ++s) {
            for (int i = 0; i < spec.samples_per_species; ++i) {
                LeafSample sample;
                char idx[8];
                std::snprintf(idx, sizeof(idx), "%04d", i);
                sample.sample_id = synth_species_id(g, s) + "_" + idx;
                sample.species_id = synth_species_id(g, s);
                sample.image = render_leaf(spec, g, s, i);
                if (i < spec.train_per_species)
                    out.split.train.push_back(std::move(sample));
                else
                    out.split.test.push_back(std::move(sample));
            }
        }
    }
    return out;
}

void write_corpus(const SynthDataset& data, const std::string& dir) {
    const fs::path root(dir);
    fs::create_directories(root / "corpus");
    save_taxonomy(data.taxonomy, (root / "taxonomy.csv").string());

    std::ofstream manifest(root / "test_ids.txt");
    if (!manifest) throw io_error("cannot write split manifest in " + dir);

    auto write_all = [&](const std::vector<LeafSample>& samples, bool is_test) {
        for (const auto& s : samples) {
            const fs::path sp_dir = root / "corpus" / *s.species_id;
            fs::create_directories(sp_dir);
            save_png(s.image, (sp_dir / (s.sample_id + ".png")).string());
            if (is_test) manifest << s.sample_id << '\n';
        }
    };
    write_all(data.split.train, false);
    write_all(data.split.test, true);
}

}  // namespace leafid
