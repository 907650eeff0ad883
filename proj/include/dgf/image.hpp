#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgf/common.hpp"

namespace dgf {

// Single-channel real-valued pixel grid, row-major. Intensities are nominally
// in [0,1]; degraded inputs may exceed that range. Stored as double so that
// filter outputs can be compared against brute-force oracles at 1e-10 level.
class Image2D {
public:
    Image2D() = default;
    Image2D(int width, int height, double fill = 0.0);
    static Image2D from_data(int width, int height, std::vector<double> pixels);

    int width() const { return w_; }
    int height() const { return h_; }
    std::size_t size() const { return pixels_.size(); }

    double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * w_ + x]; }
    double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * w_ + x]; }
    double& operator[](std::size_t i) { return pixels_[i]; }
    double operator[](std::size_t i) const { return pixels_[i]; }
    double* data() { return pixels_.data(); }
    const double* data() const { return pixels_.data(); }

    bool same_dims(const Image2D& o) const { return w_ == o.w_ && h_ == o.h_; }
    bool all_finite() const;

private:
    int w_ = 0;
    int h_ = 0;
    std::vector<double> pixels_;
};

// Boolean evaluation mask; true = pixel participates in metrics.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, bool fill = false);

    int width() const { return w_; }
    int height() const { return h_; }
    std::size_t size() const { return bits_.size(); }

    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * w_ + x] != 0; }
    void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * w_ + x] = v ? 1 : 0; }
    std::uint8_t operator[](std::size_t i) const { return bits_[i]; }

    std::size_t count() const;
    bool same_dims(const Image2D& img) const { return w_ == img.width() && h_ == img.height(); }

private:
    int w_ = 0;
    int h_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

// Seeded two-modality phantom: identical geometry, independent contrasts.
// Equal specs produce bit-identical phantoms.
struct PhantomSpec {
    std::uint64_t seed = 0;
    int size = 64;
    int n_shapes = 5;
    Range contrast_a{0.35, 0.95};
    Range contrast_b{0.30, 0.90};
    double texture_amplitude = 0.03;
};

struct Phantom {
    Image2D modality_a;
    Image2D modality_b;
    Mask support;  // union of painted shapes
};

Phantom make_phantom(const PhantomSpec& spec);

// Smooth (5x5 box), threshold, then one morphological closing of radius 2.
Mask head_mask(const Image2D& image, double threshold);

// --- file IO -----------------------------------------------------------
//
// DGF1 raw-float format: "DGF1" magic, u32 LE width, u32 LE height,
// u32 LE dtype (1 = IEEE binary32), then width*height row-major f32 LE.
// PGM: binary "P5", maxval 65535, big-endian 16-bit samples.

Image2D read_image(const std::string& path);
void write_image_dgf1(const Image2D& image, const std::string& path);
void write_image_pgm16(const Image2D& image, const std::string& path);
// Dispatches on extension: .dgf1 or .pgm.
void write_image(const Image2D& image, const std::string& path);

Mask mask_from_image(const Image2D& image);   // nonzero -> true
Image2D mask_to_image(const Mask& mask);      // true -> 1.0

}  // namespace dgf
