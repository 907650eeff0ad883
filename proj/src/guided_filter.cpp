#include "dgf/guided_filter.hpp"

namespace dgf {

namespace {

void check_inputs(const Image2D& input, const Image2D& guidance,
                  const GuidedFilterParams& params) {
    if (!input.same_dims(guidance))
        throw contract_error("guided filter input and guidance dimensions differ");
    if (params.epsilon <= 0.0)
        throw config_error("guided filter epsilon must be > 0");
    if (params.window.radius < 0)
        throw config_error("guided filter radius must be >= 0");
    if (params.window.radius >= std::min(input.width(), input.height()))
        throw config_error("guided filter radius must be smaller than both extents");
}

}  // namespace

// The elementwise sequence below is mirrored exactly by guided_filter_node;
// keep the two in sync so the layer's forward stays bit-identical.
CoefficientMaps guided_filter_coefficients(const Image2D& input,
                                           const Image2D& guidance,
                                           const GuidedFilterParams& params) {
    check_inputs(input, guidance, params);
    const WindowSpec w = params.window;
    const double eps = params.epsilon;
    const std::size_t n = input.size();

    Image2D product(input.width(), input.height());
    Image2D guide_sq(input.width(), input.height());
    for (std::size_t i = 0; i < n; ++i) {
        product[i] = guidance[i] * input[i];
        guide_sq[i] = guidance[i] * guidance[i];
    }

    Image2D mean_i = box_mean(input, w);
    Image2D mean_m = box_mean(guidance, w);
    Image2D mean_mi = box_mean(product, w);
    Image2D mean_mm = box_mean(guide_sq, w);

    CoefficientMaps maps;
    maps.a = Image2D(input.width(), input.height());
    maps.b = Image2D(input.width(), input.height());
    for (std::size_t i = 0; i < n; ++i) {
        double cov = mean_mi[i] - mean_m[i] * mean_i[i];
        double var = mean_mm[i] - mean_m[i] * mean_m[i];
        double a = cov / (var + eps);
        maps.a[i] = a;
        maps.b[i] = mean_i[i] - a * mean_m[i];
    }
    maps.a_bar = box_mean(maps.a, w);
    maps.b_bar = box_mean(maps.b, w);
    return maps;
}

Image2D guided_filter(const Image2D& input, const Image2D& guidance,
                      const GuidedFilterParams& params) {
    CoefficientMaps maps = guided_filter_coefficients(input, guidance, params);
    Image2D out(input.width(), input.height());
    for (std::size_t i = 0; i < input.size(); ++i)
        out[i] = maps.a_bar[i] * guidance[i] + maps.b_bar[i];
    return out;
}

}  // namespace dgf
