#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "leafid/image.hpp"

namespace testutil {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("leafid_test_" + tag + "_" + std::to_string(counter_++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
    static inline int counter_ = 0;
};

inline leafid::Image random_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dist(0, 255);
    leafid::Image img(h, w);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(dist(rng));
    return img;
}

// Dark leaf-like blob on a white background for preprocessing tests.
inline leafid::Image blob_image(int h, int w, int y0, int x0, int y1, int x1,
                                std::uint8_t leaf_value = 60) {
    leafid::Image img(h, w, 255);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            auto* p = img.px(y, x);
            p[0] = p[1] = p[2] = leaf_value;
        }
    return img;
}

// Striped texture images: two visually separable classes for tiny training
// runs (class 0 horizontal stripes, class 1 vertical). Both stripe shades
// stay well below a white background so leaf extraction keeps the whole
// block.
inline leafid::Image striped_image(int size, int cls, int period, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 8.0);
    leafid::Image img(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const int c = cls == 0 ? y : x;
            const double base = (c / period) % 2 == 0 ? 70.0 : 130.0;
            auto* p = img.px(y, x);
            for (int ch = 0; ch < 3; ++ch) {
                double v = base + noise(rng);
                p[ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    return img;
}

}  // namespace testutil
