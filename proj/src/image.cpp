#include "dgf/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

#include "dgf/boxfilter.hpp"

namespace dgf {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

Image2D::Image2D(int width, int height, double fill) {
    if (width < 1 || height < 1)
        throw contract_error("Image2D dimensions must be >= 1");
    w_ = width;
    h_ = height;
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image2D Image2D::from_data(int width, int height, std::vector<double> pixels) {
    if (width < 1 || height < 1)
        throw contract_error("Image2D dimensions must be >= 1");
    if (pixels.size() != static_cast<std::size_t>(width) * height)
        throw contract_error("Image2D pixel count does not match dimensions");
    Image2D img;
    img.w_ = width;
    img.h_ = height;
    img.pixels_ = std::move(pixels);
    return img;
}

bool Image2D::all_finite() const {
    for (double v : pixels_)
        if (!std::isfinite(v)) return false;
    return true;
}

Mask::Mask(int width, int height, bool fill) {
    if (width < 1 || height < 1)
        throw contract_error("Mask dimensions must be >= 1");
    w_ = width;
    h_ = height;
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
}

// --- phantom -------------------------------------------------------------

namespace {

struct Shape2 {
    bool ellipse;
    double cx, cy, rx, ry, cos_t, sin_t;
    double value_a, value_b;

    bool contains(double x, double y) const {
        double dx = x - cx, dy = y - cy;
        double u = cos_t * dx + sin_t * dy;
        double v = -sin_t * dx + cos_t * dy;
        if (ellipse) {
            double eu = u / rx, ev = v / ry;
            return eu * eu + ev * ev <= 1.0;
        }
        return std::abs(u) <= rx && std::abs(v) <= ry;
    }
};

struct TextureWave {
    double fx, fy, px, py;
};

double texture_value(const std::vector<TextureWave>& waves, double x, double y,
                     int size) {
    constexpr double two_pi = 6.283185307179586;
    double t = 0.0;
    for (const auto& w : waves)
        t += std::sin(two_pi * (w.fx * x / size + w.px)) *
             std::sin(two_pi * (w.fy * y / size + w.py));
    return t / static_cast<double>(waves.size());
}

}  // namespace

Phantom make_phantom(const PhantomSpec& spec) {
    if (spec.size < 32)
        throw config_error("phantom size must be >= 32");
    if (spec.n_shapes < 1)
        throw config_error("phantom needs at least one shape");

    std::mt19937_64 rng(spec.seed);
    auto uniform = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    const int n = spec.size;
    std::vector<Shape2> shapes;
    shapes.reserve(spec.n_shapes);
    for (int s = 0; s < spec.n_shapes; ++s) {
        Shape2 sh;
        sh.ellipse = uniform(0.0, 1.0) < 0.5;
        sh.cx = uniform(0.25, 0.75) * n;
        sh.cy = uniform(0.25, 0.75) * n;
        sh.rx = uniform(0.08, 0.30) * n;
        sh.ry = uniform(0.08, 0.30) * n;
        double theta = uniform(0.0, 3.141592653589793);
        sh.cos_t = std::cos(theta);
        sh.sin_t = std::sin(theta);
        sh.value_a = uniform(spec.contrast_a.lo, spec.contrast_a.hi);
        sh.value_b = uniform(spec.contrast_b.lo, spec.contrast_b.hi);
        shapes.push_back(sh);
    }

    // Smooth texture fields, one per modality; frequencies kept low so the
    // texture never trips edge detectors tuned for shape boundaries.
    std::vector<TextureWave> waves_a(3), waves_b(3);
    for (auto* waves : {&waves_a, &waves_b})
        for (auto& w : *waves) {
            w.fx = uniform(0.4, 1.5);
            w.fy = uniform(0.4, 1.5);
            w.px = uniform(0.0, 1.0);
            w.py = uniform(0.0, 1.0);
        }

    Phantom ph{Image2D(n, n, 0.0), Image2D(n, n, 0.0), Mask(n, n, false)};
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const Shape2* top = nullptr;
            for (const auto& sh : shapes)
                if (sh.contains(x, y)) top = &sh;  // painter's order
            if (!top) continue;
            double a = top->value_a;
            double b = top->value_b;
            if (spec.texture_amplitude != 0.0) {
                a += spec.texture_amplitude * texture_value(waves_a, x, y, n);
                b += spec.texture_amplitude * texture_value(waves_b, x, y, n);
            }
            ph.modality_a.at(x, y) = std::clamp(a, 0.0, 1.0);
            ph.modality_b.at(x, y) = std::clamp(b, 0.0, 1.0);
            ph.support.set(x, y, true);
        }
    }
    return ph;
}

// --- head mask -----------------------------------------------------------

namespace {

Mask dilate(const Mask& m, int r) {
    Mask out(m.width(), m.height(), false);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            bool hit = false;
            for (int dy = -r; dy <= r && !hit; ++dy)
                for (int dx = -r; dx <= r && !hit; ++dx) {
                    int xx = x + dx, yy = y + dy;
                    if (xx >= 0 && xx < m.width() && yy >= 0 && yy < m.height() &&
                        m.at(xx, yy))
                        hit = true;
                }
            out.set(x, y, hit);
        }
    return out;
}

Mask erode(const Mask& m, int r) {
    Mask out(m.width(), m.height(), false);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            bool all = true;
            for (int dy = -r; dy <= r && all; ++dy)
                for (int dx = -r; dx <= r && all; ++dx) {
                    int xx = std::clamp(x + dx, 0, m.width() - 1);
                    int yy = std::clamp(y + dy, 0, m.height() - 1);
                    if (!m.at(xx, yy)) all = false;
                }
            out.set(x, y, all);
        }
    return out;
}

}  // namespace

Mask head_mask(const Image2D& image, double threshold) {
    if (threshold < 0.0 || threshold >= 1.0)
        throw contract_error("head_mask threshold must be in [0, 1)");
    Image2D smooth = box_mean(image, WindowSpec{2});
    Mask m(image.width(), image.height(), false);
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            m.set(x, y, smooth.at(x, y) > threshold);
    return erode(dilate(m, 2), 2);
}

// --- IO -------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'G', 'F', '1'};
constexpr std::uint32_t kDtypeF32 = 1;
constexpr std::uint64_t kMaxPixels = 1ull << 30;

void put_u32(std::string& buf, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf.append(b, 4);
}

[[noreturn]] void fail_at(const std::string& path, const std::string& what,
                          std::uint64_t offset) {
    throw io_error(path + ": " + what + " at byte " + std::to_string(offset));
}

}  // namespace

void write_image_dgf1(const Image2D& image, const std::string& path) {
    if (!image.all_finite())
        throw contract_error("refusing to write non-finite pixels");
    std::string buf;
    buf.reserve(16 + image.size() * 4);
    buf.append(kMagic, 4);
    put_u32(buf, static_cast<std::uint32_t>(image.width()));
    put_u32(buf, static_cast<std::uint32_t>(image.height()));
    put_u32(buf, kDtypeF32);
    for (std::size_t i = 0; i < image.size(); ++i) {
        float f = static_cast<float>(image[i]);
        char b[4];
        std::memcpy(b, &f, 4);
        buf.append(b, 4);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw io_error(path + ": short write");
}

namespace {

Image2D read_dgf1(const std::string& path, const std::string& bytes) {
    if (bytes.size() < 16) fail_at(path, "truncated header", bytes.size());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        fail_at(path, "bad magic", 0);
    std::uint32_t w, h, dtype;
    std::memcpy(&w, bytes.data() + 4, 4);
    std::memcpy(&h, bytes.data() + 8, 4);
    std::memcpy(&dtype, bytes.data() + 12, 4);
    if (w < 1 || h < 1 || static_cast<std::uint64_t>(w) * h > kMaxPixels)
        fail_at(path, "dimension overflow", 4);
    if (dtype != kDtypeF32) fail_at(path, "unsupported dtype", 12);
    std::uint64_t need = 16 + static_cast<std::uint64_t>(w) * h * 4;
    if (bytes.size() < need) fail_at(path, "truncated payload", bytes.size());
    std::vector<double> pixels(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + 16 + i * 4, 4);
        if (!std::isfinite(f)) fail_at(path, "non-finite pixel", 16 + i * 4);
        pixels[i] = f;
    }
    return Image2D::from_data(static_cast<int>(w), static_cast<int>(h),
                              std::move(pixels));
}

Image2D read_pgm16(const std::string& path, const std::string& bytes) {
    std::size_t pos = 2;  // past "P5"
    auto skip_ws = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> long {
        skip_ws();
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        if (pos == start) fail_at(path, "malformed header", start);
        return std::stol(bytes.substr(start, pos - start));
    };
    long w = read_int();
    long h = read_int();
    long maxval = read_int();
    if (w < 1 || h < 1 || static_cast<std::uint64_t>(w) * h > kMaxPixels)
        fail_at(path, "dimension overflow", pos);
    if (maxval != 65535) fail_at(path, "expected maxval 65535", pos);
    if (pos >= bytes.size() ||
        !std::isspace(static_cast<unsigned char>(bytes[pos])))
        fail_at(path, "malformed header", pos);
    ++pos;  // single whitespace before payload
    std::uint64_t need = static_cast<std::uint64_t>(w) * h * 2;
    if (bytes.size() - pos < need) fail_at(path, "truncated payload", bytes.size());
    std::vector<double> pixels(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        auto hi = static_cast<unsigned char>(bytes[pos + 2 * i]);
        auto lo = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
        pixels[i] = static_cast<double>((hi << 8) | lo) / 65535.0;
    }
    return Image2D::from_data(static_cast<int>(w), static_cast<int>(h),
                              std::move(pixels));
}

}  // namespace

Image2D read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": cannot open");
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0)
        return read_dgf1(path, bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
        return read_pgm16(path, bytes);
    fail_at(path, "unknown format magic", 0);
}

void write_image_pgm16(const Image2D& image, const std::string& path) {
    if (!image.all_finite())
        throw contract_error("refusing to write non-finite pixels");
    char header[64];
    int n = std::snprintf(header, sizeof(header), "P5\n%d %d\n65535\n",
                          image.width(), image.height());
    std::string buf(header, n);
    for (std::size_t i = 0; i < image.size(); ++i) {
        double clamped = std::clamp(image[i], 0.0, 1.0);
        long v = std::lround(clamped * 65535.0);
        buf.push_back(static_cast<char>((v >> 8) & 0xff));
        buf.push_back(static_cast<char>(v & 0xff));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw io_error(path + ": short write");
}

void write_image(const Image2D& image, const std::string& path) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".dgf1")
        return write_image_dgf1(image, path);
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
        return write_image_pgm16(image, path);
    throw io_error(path + ": unknown image extension (use .dgf1 or .pgm)");
}

Mask mask_from_image(const Image2D& image) {
    Mask m(image.width(), image.height(), false);
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            m.set(x, y, image.at(x, y) != 0.0);
    return m;
}

Image2D mask_to_image(const Mask& mask) {
    Image2D img(mask.width(), mask.height(), 0.0);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y)) img.at(x, y) = 1.0;
    return img;
}

}  // namespace dgf
