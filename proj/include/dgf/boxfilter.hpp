#pragma once

#include "dgf/image.hpp"

namespace dgf {

// Square window of side 2r+1 centered on each pixel, clipped at the borders.
struct WindowSpec {
    int radius = 1;
};

// Mean over the clipped window, normalized by the true pixel count.
// Running-sum implementation; runtime independent of the radius.
Image2D box_mean(const Image2D& image, WindowSpec w);

// Same contract, explicit per-pixel window loops. Test oracle.
Image2D box_mean_bruteforce(const Image2D& image, WindowSpec w);

// Per-pixel count of valid window pixels; (2r+1)^2 in the interior.
Image2D window_count(int width, int height, WindowSpec w);

namespace detail {

// Raw-buffer kernels shared by the image and tensor paths so both produce
// bit-identical values.
void box_sum_raw(const double* src, double* dst, int width, int height, int radius);
void box_mean_raw(const double* src, double* dst, int width, int height, int radius);

}  // namespace detail

}  // namespace dgf
