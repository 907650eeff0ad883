#include "dgf/boxfilter.hpp"

#include <algorithm>
#include <vector>

namespace dgf {

namespace detail {

// Sliding-window sums, one horizontal then one vertical pass. Each output is
// produced by the same fixed add/subtract order, so results are deterministic
// and independent of the radius in runtime.
void box_sum_raw(const double* src, double* dst, int width, int height, int radius) {
    const int r = radius;
    if (r == 0) {  // exact identity, no accumulator rounding
        std::copy(src, src + static_cast<std::size_t>(width) * height, dst);
        return;
    }
    std::vector<double> row(static_cast<std::size_t>(width) * height);

    for (int y = 0; y < height; ++y) {
        const double* s = src + static_cast<std::size_t>(y) * width;
        double* d = row.data() + static_cast<std::size_t>(y) * width;
        double acc = 0.0;
        for (int x = 0; x <= std::min(r, width - 1); ++x) acc += s[x];
        d[0] = acc;
        for (int x = 1; x < width; ++x) {
            int add = x + r, drop = x - r - 1;
            if (add < width) acc += s[add];
            if (drop >= 0) acc -= s[drop];
            d[x] = acc;
        }
    }

    for (int x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int y = 0; y <= std::min(r, height - 1); ++y)
            acc += row[static_cast<std::size_t>(y) * width + x];
        dst[x] = acc;
        for (int y = 1; y < height; ++y) {
            int add = y + r, drop = y - r - 1;
            if (add < height) acc += row[static_cast<std::size_t>(add) * width + x];
            if (drop >= 0) acc -= row[static_cast<std::size_t>(drop) * width + x];
            dst[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
}

void box_mean_raw(const double* src, double* dst, int width, int height, int radius) {
    box_sum_raw(src, dst, width, height, radius);
    const int r = radius;
    for (int y = 0; y < height; ++y) {
        int cy = std::min(y + r, height - 1) - std::max(y - r, 0) + 1;
        for (int x = 0; x < width; ++x) {
            int cx = std::min(x + r, width - 1) - std::max(x - r, 0) + 1;
            dst[static_cast<std::size_t>(y) * width + x] /= static_cast<double>(cx * cy);
        }
    }
}

}  // namespace detail

namespace {

void check_window(const Image2D& image, WindowSpec w) {
    if (w.radius < 0) throw config_error("box filter radius must be >= 0");
    if (w.radius >= std::min(image.width(), image.height()))
        throw config_error("box filter radius must be smaller than both image extents");
}

}  // namespace

Image2D box_mean(const Image2D& image, WindowSpec w) {
    check_window(image, w);
    Image2D out(image.width(), image.height());
    detail::box_mean_raw(image.data(), out.data(), image.width(), image.height(),
                         w.radius);
    return out;
}

Image2D box_mean_bruteforce(const Image2D& image, WindowSpec w) {
    check_window(image, w);
    const int r = w.radius;
    Image2D out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y) {
        int y0 = std::max(y - r, 0), y1 = std::min(y + r, image.height() - 1);
        for (int x = 0; x < image.width(); ++x) {
            int x0 = std::max(x - r, 0), x1 = std::min(x + r, image.width() - 1);
            double acc = 0.0;
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) acc += image.at(xx, yy);
            out.at(x, y) = acc / ((y1 - y0 + 1) * (x1 - x0 + 1));
        }
    }
    return out;
}

Image2D window_count(int width, int height, WindowSpec w) {
    if (width < 1 || height < 1)
        throw contract_error("window_count dimensions must be >= 1");
    if (w.radius < 0) throw config_error("box filter radius must be >= 0");
    if (w.radius >= std::min(width, height))
        throw config_error("box filter radius must be smaller than both image extents");
    const int r = w.radius;
    Image2D out(width, height);
    for (int y = 0; y < height; ++y) {
        int cy = std::min(y + r, height - 1) - std::max(y - r, 0) + 1;
        for (int x = 0; x < width; ++x) {
            int cx = std::min(x + r, width - 1) - std::max(x - r, 0) + 1;
            out.at(x, y) = static_cast<double>(cx * cy);
        }
    }
    return out;
}

}  // namespace dgf
