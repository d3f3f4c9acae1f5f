#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aniadapter/linalg.hpp"

namespace aniadapter {

// Desk-scale grayscale image, values in [0, 1], row-major.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> pix;  // height * width

    Image() = default;
    Image(int h, int w, double fill = 0.0) : height(h), width(w), pix(size_t(h) * w, fill) {}

    double& at(int y, int x) { return pix[size_t(y) * width + x]; }
    double at(int y, int x) const { return pix[size_t(y) * width + x]; }
    size_t size() const { return pix.size(); }

    Mat to_matrix() const;
    static Image from_matrix(const Mat& m, bool clamp = false);
};

// Binary pixel mask, 1 = foreground.
struct PixelMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> bits;  // height * width, values 0/1

    PixelMask() = default;
    PixelMask(int h, int w, uint8_t fill = 0) : height(h), width(w), bits(size_t(h) * w, fill) {}

    uint8_t& at(int y, int x) { return bits[size_t(y) * width + x]; }
    uint8_t at(int y, int x) const { return bits[size_t(y) * width + x]; }
};

// 8-bit binary PGM (P5). Values quantized round(v * 255) and clamped.
void write_pgm(const Image& img, const std::string& path);
Image read_pgm(const std::string& path);

// 1-bit grayscale PNG, the on-disk mask format.
void write_mask_png(const PixelMask& mask, const std::string& path);
PixelMask read_mask_png(const std::string& path);

// Nearest-neighbor resize for images and masks.
Image resize_nearest(const Image& img, int new_h, int new_w);
PixelMask resize_nearest(const PixelMask& mask, int new_h, int new_w);

// Replace background with white (= 1.0, the maximum of the dynamic range).
Image white_composite(const Image& img, const PixelMask& mask);

}  // namespace aniadapter
