#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dgf/image.hpp"

namespace dgf {

struct NoiseSpec {
    enum class Kind { gaussian, poisson };
    Kind kind = Kind::gaussian;
    double sigma = 0.0;              // gaussian, intensity units
    double photons_at_white = 1000;  // poisson, expected counts at intensity 1
    std::uint64_t seed = 0;

    static NoiseSpec gaussian(double sigma, std::uint64_t seed);
    static NoiseSpec poisson(double photons_at_white, std::uint64_t seed);
};

// Poisson preset levels: low / medium / strong.
inline constexpr double kPoissonPhotonsLow = 4000.0;
inline constexpr double kPoissonPhotonsMedium = 1000.0;
inline constexpr double kPoissonPhotonsStrong = 250.0;

// Poisson: scale to photon counts, draw, rescale. Gaussian: add N(0, sigma^2).
// Deterministic in spec.seed.
Image2D apply_noise(const Image2D& image, const NoiseSpec& spec);

double mae_masked(const Image2D& a, const Image2D& b, const Mask& mask);

// Standard SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03, L=1.
// Window weights are renormalized over the clipped support at the borders;
// the per-pixel map is averaged over mask-true pixels.
double ssim_masked(const Image2D& a, const Image2D& b, const Mask& mask);

// --- Daubechies 4-tap wavelet ------------------------------------------

// h = [(1+s3), (3+s3), (3-s3), (1-s3)] / (4*sqrt(2)), s3 = sqrt(3).
std::array<double, 4> daubechies4_taps();

struct WaveletPyramid {
    struct Level {
        Image2D lh, hl, hh;  // detail subbands
        int in_w = 0, in_h = 0;  // input dims before padding at this level
    };
    std::vector<Level> levels;  // [0] = finest
    Image2D ll;                 // coarsest approximation
};

// Separable orthogonal DWT with periodized borders; odd extents are
// replicate-padded to even per level and cropped again on inversion, so the
// round trip is exact. Subband extents are ceil(prev/2). Each level input
// must be at least 4 pixels per side.
WaveletPyramid dwt2(const Image2D& image, int levels = 2);
Image2D idwt2(const WaveletPyramid& pyr);

// Zero all detail subbands of a 2-level decomposition of both images,
// reconstruct, and compare with ssim_masked at full scale.
double lowfreq_ssim(const Image2D& pred, const Image2D& ref, const Mask& mask);

// --- reporting ----------------------------------------------------------

struct MetricRow {
    std::string id;
    std::string variant;
    std::string task;
    double mae = 0.0;
    double ssim = 0.0;
    double lowfreq_ssim = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    Aggregate mae_aggregate(const std::string& variant) const;
    Aggregate ssim_aggregate(const std::string& variant) const;
    Aggregate lowfreq_aggregate(const std::string& variant) const;

    // header `id,variant,task,mae,ssim,lowfreq_ssim`, one row per image,
    // UTF-8, LF, 9 significant digits.
    void write_csv(const std::string& path) const;
};

// %.9g formatting shared by every CSV writer so outputs are byte-stable.
std::string format_g9(double v);

}  // namespace dgf
