#include "leafid/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstdio>

namespace leafid {

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

namespace {

cv::Mat to_cv(const Image& img) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.px(y, x);
            row[x] = cv::Vec3b(p[2], p[1], p[0]);  // RGB -> BGR
        }
    }
    return m;
}

Image from_cv(const cv::Mat& m) {
    Image img(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            auto* p = img.px(y, x);
            p[0] = row[x][2];
            p[1] = row[x][1];
            p[2] = row[x][0];
        }
    }
    return img;
}

}  // namespace

Image load_png(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
    if (m.empty()) throw io_error("cannot read image: " + path);
    return from_cv(m);
}

void save_png(const Image& img, const std::string& path) {
    img.validate();
    if (!cv::imwrite(path, to_cv(img))) throw io_error("cannot write image: " + path);
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    img.validate();
    cv::Mat dst;
    cv::resize(to_cv(img), dst, cv::Size(out_w, out_h), 0, 0, cv::INTER_LINEAR);
    return from_cv(dst);
}

Image rotate_white_fill(const Image& img, double degrees) {
    img.validate();
    cv::Mat src = to_cv(img);
    cv::Point2f center(static_cast<float>(img.width) / 2.0f, static_cast<float>(img.height) / 2.0f);
    cv::Mat rot = cv::getRotationMatrix2D(center, degrees, 1.0);
    cv::Mat dst;
    cv::warpAffine(src, dst, rot, src.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                   cv::Scalar(255, 255, 255));
    return from_cv(dst);
}

}  // namespace leafid
