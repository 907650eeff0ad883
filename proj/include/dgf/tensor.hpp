#pragma once

#include <cstdint>
#include <vector>

#include "dgf/image.hpp"

namespace dgf {

struct Shape {
    int c = 0, h = 0, w = 0;
    std::size_t count() const {
        return static_cast<std::size_t>(c) * h * w;
    }
    bool operator==(const Shape&) const = default;
};

// Dense (channels, height, width) value grid, double storage.
class Tensor {
public:
    Tensor() = default;
    Tensor(int c, int h, int w, double fill = 0.0);
    explicit Tensor(Shape s, double fill = 0.0) : Tensor(s.c, s.h, s.w, fill) {}

    static Tensor from_image(const Image2D& img);
    Image2D to_image() const;  // requires c == 1

    Shape shape() const { return shape_; }
    std::size_t size() const { return v_.size(); }

    double& at(int c, int y, int x) {
        return v_[(static_cast<std::size_t>(c) * shape_.h + y) * shape_.w + x];
    }
    double at(int c, int y, int x) const {
        return v_[(static_cast<std::size_t>(c) * shape_.h + y) * shape_.w + x];
    }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool all_finite() const;

private:
    Shape shape_;
    std::vector<double> v_;
};

}  // namespace dgf
