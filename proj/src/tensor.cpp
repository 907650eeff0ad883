#include "dgf/tensor.hpp"

#include <cmath>

namespace dgf {

Tensor::Tensor(int c, int h, int w, double fill) {
    if (c < 1 || h < 1 || w < 1)
        throw contract_error("Tensor dimensions must be >= 1");
    shape_ = {c, h, w};
    v_.assign(shape_.count(), fill);
}

Tensor Tensor::from_image(const Image2D& img) {
    Tensor t(1, img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) t.v_[i] = img[i];
    return t;
}

Image2D Tensor::to_image() const {
    if (shape_.c != 1)
        throw contract_error("only single-channel tensors convert to images");
    std::vector<double> pixels(v_);
    return Image2D::from_data(shape_.w, shape_.h, std::move(pixels));
}

bool Tensor::all_finite() const {
    for (double v : v_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace dgf
