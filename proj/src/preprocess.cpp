#include "leafid/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace leafid {

void PreprocessConfig::validate() const {
    if (crop_size != 32 && crop_size != 64 && crop_size != 128)
        throw usage_error("crop_size must be 32, 64 or 128");
    if (kernel_radius < 1) throw usage_error("kernel_radius must be >= 1");
}

GrayImage to_grayscale(const Image& img) {
    img.validate();
    GrayImage out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.px(y, x);
            double v = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            long r = std::lround(v);
            out.at(y, x) = static_cast<std::uint8_t>(std::clamp(r, 0l, 255l));
        }
    }
    return out;
}

OtsuResult otsu_threshold(const GrayImage& gray) {
    if (gray.data.empty()) throw validation_error("otsu: empty grid");

    std::array<std::size_t, 256> hist{};
    for (auto v : gray.data) ++hist[v];
    const double total = static_cast<double>(gray.data.size());

    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[i];

    // Class 0 = pixels <= t, class 1 = pixels > t. Scan all 256 candidates,
    // keep the lowest t with maximal between-class variance.
    int best_t = 0;
    double best_var = -1.0;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[t];
        sum0 += static_cast<double>(t) * hist[t];
        double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        double mu0 = sum0 / w0;
        double mu1 = (sum_all - sum0) / w1;
        double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var + 1e-12) {
            best_var = var;
            best_t = t;
        }
    }

    OtsuResult res;
    if (best_var < 0.0) {
        // Constant image: threshold is the constant itself, no foreground.
        res.threshold = gray.data[0];
        res.mask = BinaryMask(gray.height, gray.width, 0);
        return res;
    }
    res.threshold = best_t;
    res.mask = BinaryMask(gray.height, gray.width, 0);
    for (std::size_t i = 0; i < gray.data.size(); ++i)
        res.mask.data[i] = gray.data[i] > best_t ? 1 : 0;
    return res;
}

namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius) {
    std::vector<std::pair<int, int>> offs;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dy * dy + dx * dx <= radius * radius) offs.emplace_back(dy, dx);
    return offs;
}

BinaryMask erode(const BinaryMask& m, const std::vector<std::pair<int, int>>& offs) {
    BinaryMask out(m.height, m.width, 0);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            bool all = true;
            for (auto [dy, dx] : offs) {
                int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= m.height || xx < 0 || xx >= m.width || !m.at(yy, xx)) {
                    all = false;
                    break;
                }
            }
            out.at(y, x) = all ? 1 : 0;
        }
    }
    return out;
}

BinaryMask dilate(const BinaryMask& m, const std::vector<std::pair<int, int>>& offs) {
    BinaryMask out(m.height, m.width, 0);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(y, x)) continue;
            for (auto [dy, dx] : offs) {
                int yy = y + dy, xx = x + dx;
                if (yy >= 0 && yy < m.height && xx >= 0 && xx < m.width) out.at(yy, xx) = 1;
            }
        }
    }
    return out;
}

}  // namespace

BinaryMask open_mask(const BinaryMask& mask, int kernel_radius) {
    if (kernel_radius < 1) throw usage_error("open_mask: kernel_radius must be >= 1");
    auto offs = disk_offsets(kernel_radius);
    return dilate(erode(mask, offs), offs);
}

std::optional<BBox> mask_bounds(const BinaryMask& mask) {
    int y0 = mask.height, x0 = mask.width, y1 = -1, x1 = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(y, x)) continue;
            y0 = std::min(y0, y);
            x0 = std::min(x0, x);
            y1 = std::max(y1, y);
            x1 = std::max(x1, x);
        }
    }
    if (y1 < 0) return std::nullopt;
    return BBox{y0, x0, y1, x1};
}

Image bounding_box_crop(const Image& img, const BinaryMask& mask) {
    img.validate();
    if (img.height != mask.height || img.width != mask.width)
        throw validation_error("bounding_box_crop: mask size mismatch");
    auto bb = mask_bounds(mask);
    if (!bb) throw numeric_error("no leaf detected (empty mask)");
    Image out(bb->y1 - bb->y0 + 1, bb->x1 - bb->x0 + 1);
    for (int y = bb->y0; y <= bb->y1; ++y)
        for (int x = bb->x0; x <= bb->x1; ++x) {
            const auto* s = img.px(y, x);
            auto* d = out.px(y - bb->y0, x - bb->x0);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    return out;
}

BinaryMask leaf_mask(const Image& img, const PreprocessConfig& cfg) {
    cfg.validate();
    GrayImage gray = to_grayscale(img);
    OtsuResult otsu = otsu_threshold(gray);

    // The Otsu mask marks the bright side. Pick the leaf side by polarity,
    // using the class mean intensities.
    std::size_t n_bright = otsu.mask.count();
    std::size_t n_total = gray.data.size();
    if (n_bright == 0 || n_bright == n_total)
        throw numeric_error("no leaf detected (degenerate threshold)");

    double sum_bright = 0.0, sum_dark = 0.0;
    for (std::size_t i = 0; i < n_total; ++i) {
        if (otsu.mask.data[i])
            sum_bright += gray.data[i];
        else
            sum_dark += gray.data[i];
    }
    double mean_bright = sum_bright / static_cast<double>(n_bright);
    double mean_dark = sum_dark / static_cast<double>(n_total - n_bright);

    bool take_bright = (cfg.polarity == LeafPolarity::darker) ? (mean_bright < mean_dark)
                                                              : (mean_bright >= mean_dark);
    BinaryMask fg(otsu.mask.height, otsu.mask.width, 0);
    for (std::size_t i = 0; i < n_total; ++i)
        fg.data[i] = (otsu.mask.data[i] != 0) == take_bright ? 1 : 0;

    BinaryMask opened = open_mask(fg, cfg.kernel_radius);
    if (opened.count() == 0) throw numeric_error("no leaf detected (opening removed all foreground)");
    return opened;
}

ViewPair make_views(const Image& img, const PreprocessConfig& cfg) {
    cfg.validate();
    BinaryMask mask = leaf_mask(img, cfg);

    // Background to white so both views share the filtered appearance.
    Image filtered = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (!mask.at(y, x)) {
                auto* p = filtered.px(y, x);
                p[0] = p[1] = p[2] = 255;
            }

    Image cropped = bounding_box_crop(filtered, mask);
    ViewPair vp;
    vp.global_view = resize_bilinear(cropped, kGlobalViewSize, kGlobalViewSize);

    const int c = cfg.crop_size;
    const int off = (kGlobalViewSize - c) / 2;
    vp.local_view = Image(c, c);
    for (int y = 0; y < c; ++y)
        for (int x = 0; x < c; ++x) {
            const auto* s = vp.global_view.px(y + off, x + off);
            auto* d = vp.local_view.px(y, x);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    return vp;
}

std::vector<Image> augment_rotations(const Image& img, int count, std::uint64_t seed) {
    if (count < 0) throw usage_error("augment_rotations: count must be >= 0");
    std::vector<Image> out;
    out.reserve(count);
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 360.0);
    for (int i = 0; i < count; ++i) out.push_back(rotate_white_fill(img, angle(rng)));
    return out;
}

}  // namespace leafid
