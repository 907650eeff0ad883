#pragma once

#include "dgf/boxfilter.hpp"
#include "dgf/image.hpp"

namespace dgf {

struct GuidedFilterParams {
    WindowSpec window{2};
    double epsilon = 1e-4;
};

// Per-window linear model p = a*m + b and its window-averaged coefficients.
struct CoefficientMaps {
    Image2D a;
    Image2D b;
    Image2D a_bar;
    Image2D b_bar;
};

// a_k = (mean(M*I) - mean(M)*mean(I)) / (var(M) + eps), b_k = mean(I) - a_k*mean(M),
// all statistics over clipped windows normalized by the true count.
CoefficientMaps guided_filter_coefficients(const Image2D& input,
                                           const Image2D& guidance,
                                           const GuidedFilterParams& params);

// P = a_bar .* M + b_bar: the per-window outputs averaged over every window
// covering each pixel.
Image2D guided_filter(const Image2D& input, const Image2D& guidance,
                      const GuidedFilterParams& params);

}  // namespace dgf
