#pragma once

// Shared helpers and independent oracles for the test suites. The oracles
// here deliberately avoid the library's fast paths: brute-force window
// loops, direct convolution, index arithmetic.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dgf/guided_filter.hpp"
#include "dgf/image.hpp"

namespace dgf_test {

inline dgf::Image2D random_image(int w, int h, std::uint64_t seed, double lo = 0.0,
                                 double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    dgf::Image2D img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = u(rng);
    return img;
}

// Random image whose values are exactly representable in binary32, for
// bit-exact raw-float IO round trips.
inline dgf::Image2D random_image_f32(int w, int h, std::uint64_t seed) {
    dgf::Image2D img = random_image(w, h, seed);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = static_cast<double>(static_cast<float>(img[i]));
    return img;
}

inline double max_abs_diff(const dgf::Image2D& a, const dgf::Image2D& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Literal per-window evaluation of the guided-filter statistics; the oracle
// for the O(N) implementation.
struct BruteForceGFResult {
    dgf::Image2D a, b, output;
};

inline BruteForceGFResult guided_filter_bruteforce(const dgf::Image2D& input,
                                                   const dgf::Image2D& guidance,
                                                   const dgf::GuidedFilterParams& p) {
    const int W = input.width(), H = input.height(), r = p.window.radius;
    BruteForceGFResult res{dgf::Image2D(W, H), dgf::Image2D(W, H), dgf::Image2D(W, H)};
    dgf::Image2D a_bar(W, H), b_bar(W, H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int x0 = std::max(x - r, 0), x1 = std::min(x + r, W - 1);
            int y0 = std::max(y - r, 0), y1 = std::min(y + r, H - 1);
            double n = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
            double sum_i = 0, sum_m = 0, sum_mi = 0, sum_mm = 0;
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) {
                    double iv = input.at(xx, yy), mv = guidance.at(xx, yy);
                    sum_i += iv;
                    sum_m += mv;
                    sum_mi += mv * iv;
                    sum_mm += mv * mv;
                }
            double mean_i = sum_i / n, mean_m = sum_m / n;
            double cov = sum_mi / n - mean_m * mean_i;
            double var = sum_mm / n - mean_m * mean_m;
            double a = cov / (var + p.epsilon);
            res.a.at(x, y) = a;
            res.b.at(x, y) = mean_i - a * mean_m;
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int x0 = std::max(x - r, 0), x1 = std::min(x + r, W - 1);
            int y0 = std::max(y - r, 0), y1 = std::min(y + r, H - 1);
            double n = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
            double sa = 0, sb = 0;
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) {
                    sa += res.a.at(xx, yy);
                    sb += res.b.at(xx, yy);
                }
            a_bar.at(x, y) = sa / n;
            b_bar.at(x, y) = sb / n;
            res.output.at(x, y) = a_bar.at(x, y) * guidance.at(x, y) + b_bar.at(x, y);
        }
    return res;
}

// Reference 3x3 Sobel magnitude (unnormalized kernels), zero at the border.
inline dgf::Image2D sobel_magnitude(const dgf::Image2D& img) {
    dgf::Image2D out(img.width(), img.height(), 0.0);
    for (int y = 1; y + 1 < img.height(); ++y)
        for (int x = 1; x + 1 < img.width(); ++x) {
            double gx = -img.at(x - 1, y - 1) + img.at(x + 1, y - 1) -
                        2 * img.at(x - 1, y) + 2 * img.at(x + 1, y) -
                        img.at(x - 1, y + 1) + img.at(x + 1, y + 1);
            double gy = -img.at(x - 1, y - 1) - 2 * img.at(x, y - 1) -
                        img.at(x + 1, y - 1) + img.at(x - 1, y + 1) +
                        2 * img.at(x, y + 1) + img.at(x + 1, y + 1);
            out.at(x, y) = std::sqrt(gx * gx + gy * gy);
        }
    return out;
}

inline double edge_iou(const dgf::Image2D& a, const dgf::Image2D& b, double thr) {
    dgf::Image2D ea = sobel_magnitude(a), eb = sobel_magnitude(b);
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < ea.size(); ++i) {
        bool pa = ea[i] > thr, pb = eb[i] > thr;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double pearson_masked(const dgf::Image2D& a, const dgf::Image2D& b,
                             const dgf::Mask& mask) {
    double sa = 0, sb = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (mask[i]) {
            sa += a[i];
            sb += b[i];
            ++n;
        }
    double ma = sa / n, mb = sb / n;
    double cab = 0, caa = 0, cbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (mask[i]) {
            cab += (a[i] - ma) * (b[i] - mb);
            caa += (a[i] - ma) * (a[i] - ma);
            cbb += (b[i] - mb) * (b[i] - mb);
        }
    return cab / std::sqrt(caa * cbb);
}

// Small multi-modal pair for gradient checks: the central crop of a larger
// phantom, downsampled the same way the SR dataset path does it.
inline dgf::Image2D center_crop(const dgf::Image2D& src, int size) {
    const int x0 = (src.width() - size) / 2, y0 = (src.height() - size) / 2;
    dgf::Image2D out(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out.at(x, y) = src.at(x0 + x, y0 + y);
    return out;
}

struct TinyPair {
    dgf::Image2D input, guide, ground_truth;
    dgf::Mask mask;
};

inline TinyPair tiny_sr_pair(std::uint64_t seed, int size) {
    dgf::PhantomSpec spec;
    spec.seed = seed;
    spec.size = 32;
    dgf::Phantom ph = dgf::make_phantom(spec);
    TinyPair pair;
    pair.ground_truth = center_crop(ph.modality_a, size);
    pair.guide = center_crop(ph.modality_b, size);
    // lift the zero background and jitter every pixel so no relu input sits
    // exactly on its kink and no pooling window ties during finite-difference
    // checks
    std::mt19937_64 jitter_rng(seed ^ 0xabcdef);
    std::uniform_real_distribution<double> jitter(0.0, 0.01);
    for (std::size_t i = 0; i < pair.ground_truth.size(); ++i) {
        pair.ground_truth[i] += 0.15 + jitter(jitter_rng);
        pair.guide[i] += 0.15 + jitter(jitter_rng);
    }
    pair.mask = dgf::Mask(size, size, true);
    dgf::Image2D low(size / 4, size / 4);
    for (int y = 0; y < low.height(); ++y)
        for (int x = 0; x < low.width(); ++x)
            low.at(x, y) = pair.ground_truth.at(4 * x, 4 * y);
    pair.input = low;
    return pair;
}

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = (std::filesystem::temp_directory_path() /
                 ("dgf_" + tag + "_" + std::to_string(std::random_device{}())))
                    .string();
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const { return path_ + "/" + name; }

private:
    std::string path_;
};

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

}  // namespace dgf_test
