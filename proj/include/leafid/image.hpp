#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leafid/common.hpp"

namespace leafid {

// Interleaved 8-bit RGB raster.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // size = height * width * 3, row-major, RGB

    Image() = default;
    Image(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    std::uint8_t* px(int y, int x) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* px(int y, int x) const { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }

    bool empty() const { return data.empty(); }
    bool same_size(const Image& o) const { return height == o.height && width == o.width; }

    void validate() const {
        if (height < 1 || width < 1 || data.size() != static_cast<std::size_t>(height) * width * 3)
            throw validation_error("image must be non-empty 3-channel RGB");
    }
};

// Single-channel 8-bit intensity grid.
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    GrayImage() = default;
    GrayImage(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Boolean foreground mask matching a source raster.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // 0 or 1

    BinaryMask() = default;
    BinaryMask(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : data) n += v != 0;
        return n;
    }
};

// PNG I/O (8-bit RGB). Decoding/encoding is delegated to OpenCV.
Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path);

// Bilinear resize to out_h x out_w.
Image resize_bilinear(const Image& img, int out_h, int out_w);

// Rotates around the image center by `degrees` (counter-clockwise), same
// canvas size, bilinear sampling, white fill outside the source.
Image rotate_white_fill(const Image& img, double degrees);

}  // namespace leafid
