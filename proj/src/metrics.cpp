#include "dgf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace dgf {

NoiseSpec NoiseSpec::gaussian(double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw config_error("gaussian sigma must be >= 0");
    NoiseSpec s;
    s.kind = Kind::gaussian;
    s.sigma = sigma;
    s.seed = seed;
    return s;
}

NoiseSpec NoiseSpec::poisson(double photons_at_white, std::uint64_t seed) {
    if (photons_at_white <= 0.0)
        throw config_error("poisson photons_at_white must be > 0");
    NoiseSpec s;
    s.kind = Kind::poisson;
    s.photons_at_white = photons_at_white;
    s.seed = seed;
    return s;
}

Image2D apply_noise(const Image2D& image, const NoiseSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    Image2D out = image;
    if (spec.kind == NoiseSpec::Kind::gaussian) {
        if (spec.sigma == 0.0) return out;
        std::normal_distribution<double> noise(0.0, spec.sigma);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += noise(rng);
        return out;
    }
    // Poisson in a scaled photon domain: counts at intensity 1 equal
    // photons_at_white.
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (image[i] < 0.0)
            throw contract_error("poisson noise requires non-negative pixels");
        double lambda = image[i] * spec.photons_at_white;
        if (lambda == 0.0) {
            out[i] = 0.0;
            continue;
        }
        std::poisson_distribution<long long> draw(lambda);
        out[i] = static_cast<double>(draw(rng)) / spec.photons_at_white;
    }
    return out;
}

namespace {

void check_pair(const Image2D& a, const Image2D& b, const Mask& mask) {
    if (!a.same_dims(b)) throw contract_error("metric images differ in dimensions");
    if (!mask.same_dims(a)) throw contract_error("mask dimensions differ from images");
    if (mask.count() == 0) throw contract_error("metric mask is empty");
}

}  // namespace

double mae_masked(const Image2D& a, const Image2D& b, const Mask& mask) {
    check_pair(a, b, mask);
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask[i]) continue;
        acc += std::abs(a[i] - b[i]);
        ++n;
    }
    return acc / static_cast<double>(n);
}

// --- SSIM -----------------------------------------------------------------

namespace {

constexpr int kSsimRadius = 5;  // 11x11 window
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
constexpr double kSsimC2 = 0.03 * 0.03;

const double* ssim_taps() {
    static const auto taps = [] {
        std::array<double, 2 * kSsimRadius + 1> t{};
        double sum = 0.0;
        for (int d = -kSsimRadius; d <= kSsimRadius; ++d) {
            t[d + kSsimRadius] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
            sum += t[d + kSsimRadius];
        }
        for (auto& v : t) v /= sum;
        return t;
    }();
    return taps.data();
}

// Separable Gaussian-weighted mean; weights renormalized over the clipped
// support so the map stays full-size at the borders.
Image2D gaussian_mean(const Image2D& src) {
    const double* w = ssim_taps();
    const int W = src.width(), H = src.height();
    Image2D tmp(W, H), out(W, H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0, norm = 0.0;
            for (int d = -kSsimRadius; d <= kSsimRadius; ++d) {
                int xx = x + d;
                if (xx < 0 || xx >= W) continue;
                acc += w[d + kSsimRadius] * src.at(xx, y);
                norm += w[d + kSsimRadius];
            }
            tmp.at(x, y) = acc / norm;
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0, norm = 0.0;
            for (int d = -kSsimRadius; d <= kSsimRadius; ++d) {
                int yy = y + d;
                if (yy < 0 || yy >= H) continue;
                acc += w[d + kSsimRadius] * tmp.at(x, yy);
                norm += w[d + kSsimRadius];
            }
            out.at(x, y) = acc / norm;
        }
    return out;
}

}  // namespace

double ssim_masked(const Image2D& a, const Image2D& b, const Mask& mask) {
    check_pair(a, b, mask);
    const std::size_t n = a.size();
    Image2D aa(a.width(), a.height()), bb(a.width(), a.height()),
        ab(a.width(), a.height());
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    Image2D mu_a = gaussian_mean(a);
    Image2D mu_b = gaussian_mean(b);
    Image2D mu_aa = gaussian_mean(aa);
    Image2D mu_bb = gaussian_mean(bb);
    Image2D mu_ab = gaussian_mean(ab);

    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        double var_a = mu_aa[i] - mu_a[i] * mu_a[i];
        double var_b = mu_bb[i] - mu_b[i] * mu_b[i];
        double cov = mu_ab[i] - mu_a[i] * mu_b[i];
        double num = (2.0 * mu_a[i] * mu_b[i] + kSsimC1) * (2.0 * cov + kSsimC2);
        double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kSsimC1) *
                     (var_a + var_b + kSsimC2);
        acc += num / den;
        ++cnt;
    }
    return acc / static_cast<double>(cnt);
}

// --- Daubechies 4-tap wavelet ----------------------------------------------

std::array<double, 4> daubechies4_taps() {
    const double s3 = std::sqrt(3.0);
    const double norm = 4.0 * std::sqrt(2.0);
    return {(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm,
            (1.0 - s3) / norm};
}

namespace {

struct Filters {
    std::array<double, 4> h;  // lowpass
    std::array<double, 4> g;  // highpass, g[n] = (-1)^n h[3-n]
};

Filters d4_filters() {
    Filters f;
    f.h = daubechies4_taps();
    f.g = {f.h[3], -f.h[2], f.h[1], -f.h[0]};
    return f;
}

// Pads to an even length of at least 4 by edge replication, so the periodized
// filter bank stays orthonormal at every level.
int padded_length(int n) { return std::max(n + (n & 1), 4); }

void analyze_1d(const double* x, int n, double* approx, double* detail) {
    const Filters f = d4_filters();
    const int half = n / 2;
    for (int k = 0; k < half; ++k) {
        double a = 0.0, d = 0.0;
        for (int t = 0; t < 4; ++t) {
            double v = x[(2 * k + t) % n];
            a += f.h[t] * v;
            d += f.g[t] * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
}

void synthesize_1d(const double* approx, const double* detail, int n, double* x) {
    const Filters f = d4_filters();
    const int half = n / 2;
    std::fill(x, x + n, 0.0);
    for (int k = 0; k < half; ++k)
        for (int t = 0; t < 4; ++t)
            x[(2 * k + t) % n] += approx[k] * f.h[t] + detail[k] * f.g[t];
}

Image2D pad_replicate(const Image2D& src, int pw, int ph) {
    Image2D out(pw, ph);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            out.at(x, y) = src.at(std::min(x, src.width() - 1),
                                  std::min(y, src.height() - 1));
    return out;
}

struct LevelBands {
    Image2D ll, lh, hl, hh;
};

LevelBands dwt2_level(const Image2D& input) {
    const int pw = padded_length(input.width());
    const int ph = padded_length(input.height());
    Image2D x = (pw == input.width() && ph == input.height())
                    ? input
                    : pad_replicate(input, pw, ph);

    const int hw = pw / 2, hh_ = ph / 2;
    Image2D low(hw, ph), high(hw, ph);
    std::vector<double> rowbuf(pw), abuf(hw), dbuf(hw);
    for (int y = 0; y < ph; ++y) {
        for (int i = 0; i < pw; ++i) rowbuf[i] = x.at(i, y);
        analyze_1d(rowbuf.data(), pw, abuf.data(), dbuf.data());
        for (int i = 0; i < hw; ++i) {
            low.at(i, y) = abuf[i];
            high.at(i, y) = dbuf[i];
        }
    }
    LevelBands out{Image2D(hw, hh_), Image2D(hw, hh_), Image2D(hw, hh_),
                   Image2D(hw, hh_)};
    std::vector<double> colbuf(ph), ca(hh_), cd(hh_);
    for (int i = 0; i < hw; ++i) {
        for (int y = 0; y < ph; ++y) colbuf[y] = low.at(i, y);
        analyze_1d(colbuf.data(), ph, ca.data(), cd.data());
        for (int y = 0; y < hh_; ++y) {
            out.ll.at(i, y) = ca[y];
            out.lh.at(i, y) = cd[y];
        }
        for (int y = 0; y < ph; ++y) colbuf[y] = high.at(i, y);
        analyze_1d(colbuf.data(), ph, ca.data(), cd.data());
        for (int y = 0; y < hh_; ++y) {
            out.hl.at(i, y) = ca[y];
            out.hh.at(i, y) = cd[y];
        }
    }
    return out;
}

Image2D idwt2_level(const Image2D& ll, const Image2D& lh, const Image2D& hl,
                    const Image2D& hh, int out_w, int out_h) {
    const int hw = ll.width(), hh_ = ll.height();
    const int pw = hw * 2, ph = hh_ * 2;
    Image2D low(hw, ph), high(hw, ph);
    std::vector<double> ca(hh_), cd(hh_), col(ph);
    for (int i = 0; i < hw; ++i) {
        for (int y = 0; y < hh_; ++y) {
            ca[y] = ll.at(i, y);
            cd[y] = lh.at(i, y);
        }
        synthesize_1d(ca.data(), cd.data(), ph, col.data());
        for (int y = 0; y < ph; ++y) low.at(i, y) = col[y];
        for (int y = 0; y < hh_; ++y) {
            ca[y] = hl.at(i, y);
            cd[y] = hh.at(i, y);
        }
        synthesize_1d(ca.data(), cd.data(), ph, col.data());
        for (int y = 0; y < ph; ++y) high.at(i, y) = col[y];
    }
    Image2D padded(pw, ph);
    std::vector<double> ra(hw), rd(hw), row(pw);
    for (int y = 0; y < ph; ++y) {
        for (int i = 0; i < hw; ++i) {
            ra[i] = low.at(i, y);
            rd[i] = high.at(i, y);
        }
        synthesize_1d(ra.data(), rd.data(), pw, row.data());
        for (int i = 0; i < pw; ++i) padded.at(i, y) = row[i];
    }
    if (pw == out_w && ph == out_h) return padded;
    Image2D out(out_w, out_h);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) out.at(x, y) = padded.at(x, y);
    return out;
}

}  // namespace

WaveletPyramid dwt2(const Image2D& image, int levels) {
    if (levels < 1) throw contract_error("dwt2 needs at least one level");
    if (image.width() < (1 << levels) || image.height() < (1 << levels))
        throw contract_error("dwt2 input too small for requested levels");
    WaveletPyramid pyr;
    Image2D current = image;
    for (int l = 0; l < levels; ++l) {
        WaveletPyramid::Level lev;
        lev.in_w = current.width();
        lev.in_h = current.height();
        LevelBands bands = dwt2_level(current);
        lev.lh = std::move(bands.lh);
        lev.hl = std::move(bands.hl);
        lev.hh = std::move(bands.hh);
        current = std::move(bands.ll);
        pyr.levels.push_back(std::move(lev));
    }
    pyr.ll = std::move(current);
    return pyr;
}

Image2D idwt2(const WaveletPyramid& pyr) {
    if (pyr.levels.empty()) throw contract_error("idwt2 on empty pyramid");
    Image2D current = pyr.ll;
    for (int l = static_cast<int>(pyr.levels.size()) - 1; l >= 0; --l) {
        const auto& lev = pyr.levels[l];
        current = idwt2_level(current, lev.lh, lev.hl, lev.hh, lev.in_w, lev.in_h);
    }
    return current;
}

double lowfreq_ssim(const Image2D& pred, const Image2D& ref, const Mask& mask) {
    check_pair(pred, ref, mask);
    auto lowpass = [](const Image2D& img) {
        WaveletPyramid pyr = dwt2(img, 2);
        for (auto& lev : pyr.levels) {
            lev.lh = Image2D(lev.lh.width(), lev.lh.height(), 0.0);
            lev.hl = Image2D(lev.hl.width(), lev.hl.height(), 0.0);
            lev.hh = Image2D(lev.hh.width(), lev.hh.height(), 0.0);
        }
        return idwt2(pyr);
    };
    return ssim_masked(lowpass(pred), lowpass(ref), mask);
}

// --- reporting --------------------------------------------------------------

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

namespace {

Aggregate aggregate_of(const std::vector<MetricRow>& rows, const std::string& variant,
                       double MetricRow::*field) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows)
        if (r.variant == variant) {
            sum += r.*field;
            ++n;
        }
    if (n == 0) throw contract_error("no rows for variant '" + variant + "'");
    double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& r : rows)
        if (r.variant == variant) ss += (r.*field - mean) * (r.*field - mean);
    return {mean, std::sqrt(ss / static_cast<double>(n))};
}

}  // namespace

Aggregate MetricReport::mae_aggregate(const std::string& variant) const {
    return aggregate_of(rows, variant, &MetricRow::mae);
}
Aggregate MetricReport::ssim_aggregate(const std::string& variant) const {
    return aggregate_of(rows, variant, &MetricRow::ssim);
}
Aggregate MetricReport::lowfreq_aggregate(const std::string& variant) const {
    return aggregate_of(rows, variant, &MetricRow::lowfreq_ssim);
}

void MetricReport::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << "id,variant,task,mae,ssim,lowfreq_ssim\n";
    for (const auto& r : rows)
        out << r.id << ',' << r.variant << ',' << r.task << ','
            << format_g9(r.mae) << ',' << format_g9(r.ssim) << ','
            << format_g9(r.lowfreq_ssim) << '\n';
    if (!out) throw io_error(path + ": short write");
}

}  // namespace dgf
