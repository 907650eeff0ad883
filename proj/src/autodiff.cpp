#include "dgf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dgf/boxfilter.hpp"

namespace dgf {
namespace ad {

namespace {

void quantize_f32(Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(static_cast<float>(t[i]));
}

struct ConvGeom {
    int out_h, out_w, pad_top, pad_left;
};

ConvGeom conv_geometry(int in_h, int in_w, int kh, int kw, int stride, Padding pad) {
    ConvGeom g{};
    if (pad == Padding::same) {
        g.out_h = (in_h + stride - 1) / stride;
        g.out_w = (in_w + stride - 1) / stride;
        int pad_h = std::max((g.out_h - 1) * stride + kh - in_h, 0);
        int pad_w = std::max((g.out_w - 1) * stride + kw - in_w, 0);
        g.pad_top = pad_h / 2;
        g.pad_left = pad_w / 2;
    } else {
        if (in_h < kh || in_w < kw)
            throw contract_error("conv2d valid padding needs input >= kernel");
        g.out_h = (in_h - kh) / stride + 1;
        g.out_w = (in_w - kw) / stride + 1;
        g.pad_top = 0;
        g.pad_left = 0;
    }
    return g;
}

struct BilinearTap {
    int lo, hi;
    double w_hi;  // weight of hi sample; lo gets 1 - w_hi
};

// align-corners-false, half-pixel centers: src = (dst + 0.5) * in/out - 0.5,
// clamped to the valid range.
BilinearTap bilinear_tap(int dst, int in_n, int out_n) {
    double src = (dst + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
    if (src < 0.0) src = 0.0;
    if (src > in_n - 1) src = in_n - 1;
    BilinearTap t;
    t.lo = static_cast<int>(std::floor(src));
    t.hi = std::min(t.lo + 1, in_n - 1);
    t.w_hi = src - t.lo;
    return t;
}

}  // namespace

NodeId emit(Tape& t, Node n) {
    if (t.precision_ == Precision::f32) quantize_f32(n.value);
    t.nodes_.push_back(std::move(n));
    return static_cast<NodeId>(t.nodes_.size() - 1);
}

NodeId Tape::variable(Tensor v) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(v);
    n.requires_grad = true;
    return emit(*this, std::move(n));
}

NodeId Tape::constant(Tensor v) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(v);
    n.requires_grad = false;
    return emit(*this, std::move(n));
}

namespace {

Node make_node(Op op, std::initializer_list<NodeId> parents, const Tape& t) {
    Node n;
    n.op = op;
    n.n_parents = 0;
    for (NodeId p : parents) {
        n.parent[n.n_parents++] = p;
        if (t.value(p).size() == 0)
            throw contract_error("op on empty tensor node");
    }
    return n;
}

void mark_requires(Node& n, const std::vector<Node>& nodes) {
    for (int i = 0; i < n.n_parents; ++i)
        if (nodes[n.parent[i]].requires_grad) n.requires_grad = true;
}

}  // namespace

// The ops need access to node internals; routed through one friend helper.
class TapeOps {
public:
    static std::vector<Node>& nodes(Tape& t) { return t.nodes_; }
    static const std::vector<Node>& nodes(const Tape& t) { return t.nodes_; }
    static void kink(Tape& t, double gap) { t.note_kink(gap); }
    static void branch(Tape& t, std::uint64_t token) { t.note_branch(token); }
};

namespace {

NodeId finish(Tape& t, Node n) {
    mark_requires(n, TapeOps::nodes(t));
    return emit(t, std::move(n));
}

const Tensor& val(const Tape& t, NodeId id) { return t.value(id); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!(a.shape() == b.shape()))
        throw contract_error(std::string(what) + ": shape mismatch");
}

}  // namespace

NodeId add(Tape& t, NodeId a, NodeId b) {
    const Tensor &va = val(t, a), &vb = val(t, b);
    check_same_shape(va, vb, "add");
    Node n = make_node(Op::add, {a, b}, t);
    n.value = Tensor(va.shape());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] + vb[i];
    return finish(t, std::move(n));
}

NodeId sub(Tape& t, NodeId a, NodeId b) {
    const Tensor &va = val(t, a), &vb = val(t, b);
    check_same_shape(va, vb, "sub");
    Node n = make_node(Op::sub, {a, b}, t);
    n.value = Tensor(va.shape());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] - vb[i];
    return finish(t, std::move(n));
}

NodeId mul(Tape& t, NodeId a, NodeId b) {
    const Tensor &va = val(t, a), &vb = val(t, b);
    check_same_shape(va, vb, "mul");
    Node n = make_node(Op::mul, {a, b}, t);
    n.value = Tensor(va.shape());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] * vb[i];
    return finish(t, std::move(n));
}

NodeId div(Tape& t, NodeId a, NodeId b) {
    const Tensor &va = val(t, a), &vb = val(t, b);
    check_same_shape(va, vb, "div");
    Node n = make_node(Op::div, {a, b}, t);
    n.value = Tensor(va.shape());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] / vb[i];
    return finish(t, std::move(n));
}

NodeId add_scalar(Tape& t, NodeId a, double s) {
    const Tensor& va = val(t, a);
    Node n = make_node(Op::add_scalar, {a}, t);
    n.d0 = s;
    n.value = Tensor(va.shape());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] + s;
    return finish(t, std::move(n));
}

NodeId mul_scalar(Tape& t, NodeId a, double s) {
    const Tensor& va = val(t, a);
    Node n = make_node(Op::mul_scalar, {a}, t);
    n.d0 = s;
    n.value = Tensor(va.shape());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] * s;
    return finish(t, std::move(n));
}

NodeId relu(Tape& t, NodeId a) {
    const Tensor& va = val(t, a);
    Node n = make_node(Op::relu, {a}, t);
    n.value = Tensor(va.shape());
    double gap = 1e300;
    std::uint64_t fp = 0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        n.value[i] = va[i] > 0.0 ? va[i] : 0.0;
        if (va[i] != 0.0) gap = std::min(gap, std::abs(va[i]));
        fp = fp * 31 + (va[i] > 0.0 ? 1 : 2);
    }
    TapeOps::kink(t, gap);
    TapeOps::branch(t, fp);
    return finish(t, std::move(n));
}

NodeId leaky_relu(Tape& t, NodeId a, double slope) {
    const Tensor& va = val(t, a);
    Node n = make_node(Op::leaky_relu, {a}, t);
    n.d0 = slope;
    n.value = Tensor(va.shape());
    double gap = 1e300;
    std::uint64_t fp = 0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        n.value[i] = va[i] > 0.0 ? va[i] : slope * va[i];
        if (va[i] != 0.0) gap = std::min(gap, std::abs(va[i]));
        fp = fp * 31 + (va[i] > 0.0 ? 1 : 2);
    }
    TapeOps::kink(t, gap);
    TapeOps::branch(t, fp);
    return finish(t, std::move(n));
}

NodeId abs(Tape& t, NodeId a) {
    const Tensor& va = val(t, a);
    Node n = make_node(Op::abs, {a}, t);
    n.value = Tensor(va.shape());
    double gap = 1e300;
    std::uint64_t fp = 0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        n.value[i] = std::abs(va[i]);
        if (va[i] != 0.0) gap = std::min(gap, std::abs(va[i]));
        fp = fp * 31 + (va[i] > 0.0 ? 1 : (va[i] < 0.0 ? 2 : 3));
    }
    TapeOps::kink(t, gap);
    TapeOps::branch(t, fp);
    return finish(t, std::move(n));
}

NodeId conv2d(Tape& t, NodeId x, NodeId weight, NodeId bias, int stride, Padding pad) {
    const Tensor& vx = val(t, x);
    const Tensor& vw = val(t, weight);
    const Tensor& vb = val(t, bias);
    if (stride < 1) throw contract_error("conv2d stride must be >= 1");
    // weight layout: (out_c, in_c * kh, kw) is ambiguous in a 3-axis tensor;
    // we store it as shape (out_c * in_c, kh, kw) with out_c recorded in bias.
    const int out_c = vb.shape().c;
    if (vb.shape().h != 1 || vb.shape().w != 1)
        throw contract_error("conv2d bias must be (C,1,1)");
    if (vw.shape().c % out_c != 0)
        throw contract_error("conv2d weight channels not divisible by out channels");
    const int in_c = vw.shape().c / out_c;
    if (in_c != vx.shape().c)
        throw contract_error("conv2d input channels mismatch");
    const int kh = vw.shape().h, kw = vw.shape().w;
    ConvGeom g = conv_geometry(vx.shape().h, vx.shape().w, kh, kw, stride, pad);

    Node n = make_node(Op::conv2d, {x, weight, bias}, t);
    n.i0 = stride;
    n.i1 = pad == Padding::same ? 1 : 0;
    n.i2 = g.pad_top;
    n.i3 = g.pad_left;
    n.value = Tensor(out_c, g.out_h, g.out_w);
    const int in_h = vx.shape().h, in_w = vx.shape().w;
    // accumulate scaled shifted rows per kernel tap; vectorizes and keeps a
    // fixed summation order
    for (int oc = 0; oc < out_c; ++oc) {
        double* out_plane = n.value.data() +
                            static_cast<std::size_t>(oc) * g.out_h * g.out_w;
        const double bias_v = vb.at(oc, 0, 0);
        std::fill(out_plane, out_plane + static_cast<std::size_t>(g.out_h) * g.out_w,
                  bias_v);
        for (int ic = 0; ic < in_c; ++ic) {
            const double* in_plane =
                vx.data() + static_cast<std::size_t>(ic) * in_h * in_w;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = vw.at(oc * in_c + ic, ky, kx);
                    for (int oy = 0; oy < g.out_h; ++oy) {
                        const int iy = oy * stride + ky - g.pad_top;
                        if (iy < 0 || iy >= in_h) continue;
                        double* out_row = out_plane + static_cast<std::size_t>(oy) * g.out_w;
                        const double* in_row =
                            in_plane + static_cast<std::size_t>(iy) * in_w;
                        int ox0 = 0, ox1 = g.out_w;
                        // clamp to the valid ix range: 0 <= ox*stride + kx - pl < in_w
                        while (ox0 < ox1 && ox0 * stride + kx - g.pad_left < 0) ++ox0;
                        while (ox1 > ox0 && (ox1 - 1) * stride + kx - g.pad_left >= in_w)
                            --ox1;
                        const int off = kx - g.pad_left;
                        if (stride == 1) {
                            for (int ox = ox0; ox < ox1; ++ox)
                                out_row[ox] += wv * in_row[ox + off];
                        } else {
                            for (int ox = ox0; ox < ox1; ++ox)
                                out_row[ox] += wv * in_row[ox * stride + off];
                        }
                    }
                }
            }
        }
    }
    return finish(t, std::move(n));
}

NodeId max_pool2(Tape& t, NodeId x) {
    const Tensor& vx = val(t, x);
    if (vx.shape().h % 2 != 0 || vx.shape().w % 2 != 0)
        throw contract_error("max_pool2 needs even spatial extents");
    Node n = make_node(Op::max_pool2, {x}, t);
    n.value = Tensor(vx.shape().c, vx.shape().h / 2, vx.shape().w / 2);
    double gap = 1e300;
    std::uint64_t fp = 0;
    for (int c = 0; c < vx.shape().c; ++c)
        for (int y = 0; y < n.value.shape().h; ++y)
            for (int xx = 0; xx < n.value.shape().w; ++xx) {
                double m = vx.at(c, 2 * y, 2 * xx);
                double second = -1e300;
                int arg = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        double v = vx.at(c, 2 * y + dy, 2 * xx + dx);
                        if (v > m) {
                            second = m;
                            m = v;
                            arg = dy * 2 + dx;
                        } else if (v > second && !(dy == 0 && dx == 0)) {
                            second = v;
                        }
                    }
                if (second > -1e300 && m - second > 0.0)
                    gap = std::min(gap, m - second);
                fp = fp * 31 + static_cast<std::uint64_t>(arg + 1);
                n.value.at(c, y, xx) = m;
            }
    TapeOps::kink(t, gap);
    TapeOps::branch(t, fp);
    return finish(t, std::move(n));
}

NodeId bilinear_resize(Tape& t, NodeId x, int out_h, int out_w) {
    const Tensor& vx = val(t, x);
    if (out_h < 1 || out_w < 1)
        throw contract_error("bilinear_resize output extents must be >= 1");
    Node n = make_node(Op::bilinear_resize, {x}, t);
    n.i0 = out_h;
    n.i1 = out_w;
    n.value = ad::bilinear_resize(vx, out_h, out_w);
    return finish(t, std::move(n));
}

NodeId pixel_shuffle(Tape& t, NodeId x, int factor) {
    const Tensor& vx = val(t, x);
    if (factor < 1) throw contract_error("pixel_shuffle factor must be >= 1");
    if (vx.shape().c % (factor * factor) != 0)
        throw contract_error("pixel_shuffle channels not divisible by factor^2");
    Node n = make_node(Op::pixel_shuffle, {x}, t);
    n.i0 = factor;
    const int oc = vx.shape().c / (factor * factor);
    n.value = Tensor(oc, vx.shape().h * factor, vx.shape().w * factor);
    for (int c = 0; c < oc; ++c)
        for (int y = 0; y < vx.shape().h; ++y)
            for (int xx = 0; xx < vx.shape().w; ++xx)
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        n.value.at(c, y * factor + dy, xx * factor + dx) =
                            vx.at(c * factor * factor + dy * factor + dx, y, xx);
    return finish(t, std::move(n));
}

NodeId concat_c(Tape& t, NodeId a, NodeId b) {
    const Tensor &va = val(t, a), &vb = val(t, b);
    if (va.shape().h != vb.shape().h || va.shape().w != vb.shape().w)
        throw contract_error("concat_c spatial extents differ");
    Node n = make_node(Op::concat_c, {a, b}, t);
    n.i0 = va.shape().c;
    n.value = Tensor(va.shape().c + vb.shape().c, va.shape().h, va.shape().w);
    std::copy(va.data(), va.data() + va.size(), n.value.data());
    std::copy(vb.data(), vb.data() + vb.size(), n.value.data() + va.size());
    return finish(t, std::move(n));
}

NodeId crop(Tape& t, NodeId x, int y0, int x0, int h, int w) {
    const Tensor& vx = val(t, x);
    if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > vx.shape().h ||
        x0 + w > vx.shape().w)
        throw contract_error("crop out of bounds");
    Node n = make_node(Op::crop, {x}, t);
    n.i0 = y0;
    n.i1 = x0;
    n.value = Tensor(vx.shape().c, h, w);
    for (int c = 0; c < vx.shape().c; ++c)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                n.value.at(c, y, xx) = vx.at(c, y0 + y, x0 + xx);
    return finish(t, std::move(n));
}

NodeId box_mean(Tape& t, NodeId x, int radius) {
    const Tensor& vx = val(t, x);
    if (radius < 0) throw contract_error("box_mean radius must be >= 0");
    if (radius >= std::min(vx.shape().h, vx.shape().w))
        throw config_error("box_mean radius must be smaller than both extents");
    Node n = make_node(Op::box_mean, {x}, t);
    n.i0 = radius;
    n.value = Tensor(vx.shape());
    const std::size_t plane = static_cast<std::size_t>(vx.shape().h) * vx.shape().w;
    for (int c = 0; c < vx.shape().c; ++c)
        detail::box_mean_raw(vx.data() + c * plane, n.value.data() + c * plane,
                             vx.shape().w, vx.shape().h, radius);
    return finish(t, std::move(n));
}

NodeId instance_norm(Tape& t, NodeId x, NodeId gamma, NodeId beta) {
    const Tensor& vx = val(t, x);
    const Tensor& vg = val(t, gamma);
    const Tensor& vb = val(t, beta);
    if (vg.shape().c != vx.shape().c || vb.shape().c != vx.shape().c ||
        vg.shape().h != 1 || vg.shape().w != 1 || vb.shape().h != 1 ||
        vb.shape().w != 1)
        throw contract_error("instance_norm affine params must be (C,1,1)");
    Node n = make_node(Op::instance_norm, {x, gamma, beta}, t);
    n.d0 = 1e-5;  // variance epsilon
    n.value = Tensor(vx.shape());
    const int hw = vx.shape().h * vx.shape().w;
    for (int c = 0; c < vx.shape().c; ++c) {
        double mean = 0.0;
        for (int i = 0; i < hw; ++i) mean += vx[c * hw + i];
        mean /= hw;
        double var = 0.0;
        for (int i = 0; i < hw; ++i) {
            double d = vx[c * hw + i] - mean;
            var += d * d;
        }
        var /= hw;
        double inv = 1.0 / std::sqrt(var + n.d0);
        for (int i = 0; i < hw; ++i)
            n.value[c * hw + i] =
                vg.at(c, 0, 0) * (vx[c * hw + i] - mean) * inv + vb.at(c, 0, 0);
    }
    return finish(t, std::move(n));
}

NodeId sum_all(Tape& t, NodeId a) {
    const Tensor& va = val(t, a);
    Node n = make_node(Op::sum_all, {a}, t);
    n.value = Tensor(1, 1, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i];
    n.value[0] = acc;
    return finish(t, std::move(n));
}

NodeId l2_norm(Tape& t, NodeId a) {
    const Tensor& va = val(t, a);
    Node n = make_node(Op::l2_norm, {a}, t);
    n.value = Tensor(1, 1, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * va[i];
    n.value[0] = std::sqrt(acc);
    return finish(t, std::move(n));
}

// Mirrors guided_filter_coefficients / guided_filter elementwise sequences:
// same box_mean kernel, same op order, hence bit-identical forward values.
NodeId guided_filter_node(Tape& t, NodeId input, NodeId guidance,
                          const GuidedFilterParams& params) {
    const Tensor& vi = val(t, input);
    const Tensor& vm = val(t, guidance);
    if (vi.shape().c != 1 || vm.shape().c != 1)
        throw contract_error("guided_filter_node needs single-channel inputs");
    if (!(vi.shape() == vm.shape()))
        throw contract_error("guided_filter_node input/guidance shape mismatch");
    if (params.epsilon <= 0.0)
        throw config_error("guided filter epsilon must be > 0");
    const int r = params.window.radius;

    NodeId product = mul(t, guidance, input);
    NodeId guide_sq = mul(t, guidance, guidance);
    NodeId mean_i = box_mean(t, input, r);
    NodeId mean_m = box_mean(t, guidance, r);
    NodeId mean_mi = box_mean(t, product, r);
    NodeId mean_mm = box_mean(t, guide_sq, r);

    NodeId cov = sub(t, mean_mi, mul(t, mean_m, mean_i));
    NodeId var = sub(t, mean_mm, mul(t, mean_m, mean_m));
    NodeId a = div(t, cov, add_scalar(t, var, params.epsilon));
    NodeId b = sub(t, mean_i, mul(t, a, mean_m));
    NodeId a_bar = box_mean(t, a, r);
    NodeId b_bar = box_mean(t, b, r);
    return add(t, mul(t, a_bar, guidance), b_bar);
}

// --- backward ---------------------------------------------------------------

void Tape::backward(NodeId loss) {
    if (loss < 0 || loss >= static_cast<NodeId>(nodes_.size()))
        throw contract_error("backward on unknown node");
    if (nodes_[loss].value.size() != 1)
        throw contract_error("backward needs a scalar loss node");

    for (auto& n : nodes_) {
        if (n.requires_grad || &n == &nodes_[loss])
            n.grad = Tensor(n.value.shape(), 0.0);
        else
            n.grad = Tensor();
    }
    // Intermediate nodes still need accumulators when they sit between the
    // loss and a variable; requires_grad already marks exactly those.
    nodes_[loss].grad = Tensor(nodes_[loss].value.shape(), 0.0);
    nodes_[loss].grad[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) continue;
        if (!n.requires_grad && id != loss) continue;

        auto parent_grad = [&](int slot) -> Tensor* {
            NodeId pid = n.parent[slot];
            if (pid < 0) return nullptr;
            Node& p = nodes_[pid];
            if (!p.requires_grad) return nullptr;
            if (p.grad.size() == 0) p.grad = Tensor(p.value.shape(), 0.0);
            return &p.grad;
        };
        const Tensor& g = n.grad;

        switch (n.op) {
            case Op::leaf:
                break;
            case Op::add: {
                for (int s = 0; s < 2; ++s)
                    if (Tensor* pg = parent_grad(s))
                        for (std::size_t i = 0; i < g.size(); ++i) (*pg)[i] += g[i];
                break;
            }
            case Op::sub: {
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < g.size(); ++i) (*pg)[i] += g[i];
                if (Tensor* pg = parent_grad(1))
                    for (std::size_t i = 0; i < g.size(); ++i) (*pg)[i] -= g[i];
                break;
            }
            case Op::mul: {
                const Tensor& va = nodes_[n.parent[0]].value;
                const Tensor& vb = nodes_[n.parent[1]].value;
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < g.size(); ++i) (*pg)[i] += g[i] * vb[i];
                if (Tensor* pg = parent_grad(1))
                    for (std::size_t i = 0; i < g.size(); ++i) (*pg)[i] += g[i] * va[i];
                break;
            }
            case Op::div: {
                const Tensor& va = nodes_[n.parent[0]].value;
                const Tensor& vb = nodes_[n.parent[1]].value;
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < g.size(); ++i) (*pg)[i] += g[i] / vb[i];
                if (Tensor* pg = parent_grad(1))
                    for (std::size_t i = 0; i < g.size(); ++i)
                        (*pg)[i] -= g[i] * va[i] / (vb[i] * vb[i]);
                break;
            }
            case Op::add_scalar: {
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < g.size(); ++i) (*pg)[i] += g[i];
                break;
            }
            case Op::mul_scalar: {
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < g.size(); ++i) (*pg)[i] += g[i] * n.d0;
                break;
            }
            case Op::relu: {
                const Tensor& vx = nodes_[n.parent[0]].value;
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (vx[i] > 0.0) (*pg)[i] += g[i];
                break;
            }
            case Op::leaky_relu: {
                const Tensor& vx = nodes_[n.parent[0]].value;
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < g.size(); ++i)
                        (*pg)[i] += vx[i] > 0.0 ? g[i] : n.d0 * g[i];
                break;
            }
            case Op::abs: {
                const Tensor& vx = nodes_[n.parent[0]].value;
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        if (vx[i] > 0.0)
                            (*pg)[i] += g[i];
                        else if (vx[i] < 0.0)
                            (*pg)[i] -= g[i];
                    }
                break;
            }
            case Op::conv2d: {
                const Tensor& vx = nodes_[n.parent[0]].value;
                const Tensor& vw = nodes_[n.parent[1]].value;
                Tensor* gx = parent_grad(0);
                Tensor* gw = parent_grad(1);
                Tensor* gb = parent_grad(2);
                const int stride = n.i0, pt = n.i2, pl = n.i3;
                const int out_c = n.value.shape().c;
                const int in_c = vx.shape().c;
                const int kh = vw.shape().h, kw = vw.shape().w;
                const int in_h = vx.shape().h, in_w = vx.shape().w;
                const int oh = n.value.shape().h, ow = n.value.shape().w;
                for (int oc = 0; oc < out_c; ++oc) {
                    const double* g_plane =
                        g.data() + static_cast<std::size_t>(oc) * oh * ow;
                    if (gb) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i)
                            acc += g_plane[i];
                        gb->at(oc, 0, 0) += acc;
                    }
                    for (int ic = 0; ic < in_c; ++ic) {
                        const double* x_plane =
                            vx.data() + static_cast<std::size_t>(ic) * in_h * in_w;
                        double* gx_plane =
                            gx ? gx->data() + static_cast<std::size_t>(ic) * in_h * in_w
                               : nullptr;
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const double wv = vw.at(oc * in_c + ic, ky, kx);
                                double wacc = 0.0;
                                const int off = kx - pl;
                                for (int oy = 0; oy < oh; ++oy) {
                                    const int iy = oy * stride + ky - pt;
                                    if (iy < 0 || iy >= in_h) continue;
                                    const double* g_row =
                                        g_plane + static_cast<std::size_t>(oy) * ow;
                                    const double* x_row =
                                        x_plane + static_cast<std::size_t>(iy) * in_w;
                                    double* gx_row =
                                        gx_plane
                                            ? gx_plane + static_cast<std::size_t>(iy) * in_w
                                            : nullptr;
                                    int ox0 = 0, ox1 = ow;
                                    while (ox0 < ox1 && ox0 * stride + off < 0) ++ox0;
                                    while (ox1 > ox0 && (ox1 - 1) * stride + off >= in_w)
                                        --ox1;
                                    if (stride == 1) {
                                        if (gw)
                                            for (int ox = ox0; ox < ox1; ++ox)
                                                wacc += g_row[ox] * x_row[ox + off];
                                        if (gx_row)
                                            for (int ox = ox0; ox < ox1; ++ox)
                                                gx_row[ox + off] += wv * g_row[ox];
                                    } else {
                                        if (gw)
                                            for (int ox = ox0; ox < ox1; ++ox)
                                                wacc += g_row[ox] * x_row[ox * stride + off];
                                        if (gx_row)
                                            for (int ox = ox0; ox < ox1; ++ox)
                                                gx_row[ox * stride + off] += wv * g_row[ox];
                                    }
                                }
                                if (gw) gw->at(oc * in_c + ic, ky, kx) += wacc;
                            }
                    }
                }
                break;
            }
            case Op::max_pool2: {
                const Tensor& vx = nodes_[n.parent[0]].value;
                if (Tensor* pg = parent_grad(0))
                    for (int c = 0; c < n.value.shape().c; ++c)
                        for (int y = 0; y < n.value.shape().h; ++y)
                            for (int xx = 0; xx < n.value.shape().w; ++xx) {
                                // route to the first maximal element, scan order
                                int by = 0, bx = 0;
                                double best = vx.at(c, 2 * y, 2 * xx);
                                for (int dy = 0; dy < 2; ++dy)
                                    for (int dx = 0; dx < 2; ++dx) {
                                        double v = vx.at(c, 2 * y + dy, 2 * xx + dx);
                                        if (v > best) {
                                            best = v;
                                            by = dy;
                                            bx = dx;
                                        }
                                    }
                                pg->at(c, 2 * y + by, 2 * xx + bx) += g.at(c, y, xx);
                            }
                break;
            }
            case Op::bilinear_resize: {
                const Tensor& vx = nodes_[n.parent[0]].value;
                if (Tensor* pg = parent_grad(0)) {
                    const int in_h = vx.shape().h, in_w = vx.shape().w;
                    for (int c = 0; c < n.value.shape().c; ++c)
                        for (int oy = 0; oy < n.i0; ++oy) {
                            BilinearTap ty = bilinear_tap(oy, in_h, n.i0);
                            for (int ox = 0; ox < n.i1; ++ox) {
                                BilinearTap tx = bilinear_tap(ox, in_w, n.i1);
                                double go = g.at(c, oy, ox);
                                pg->at(c, ty.lo, tx.lo) +=
                                    go * (1.0 - ty.w_hi) * (1.0 - tx.w_hi);
                                pg->at(c, ty.lo, tx.hi) += go * (1.0 - ty.w_hi) * tx.w_hi;
                                pg->at(c, ty.hi, tx.lo) += go * ty.w_hi * (1.0 - tx.w_hi);
                                pg->at(c, ty.hi, tx.hi) += go * ty.w_hi * tx.w_hi;
                            }
                        }
                }
                break;
            }
            case Op::pixel_shuffle: {
                if (Tensor* pg = parent_grad(0)) {
                    const int f = n.i0;
                    const int oc = n.value.shape().c;
                    const int ih = pg->shape().h, iw = pg->shape().w;
                    for (int c = 0; c < oc; ++c)
                        for (int y = 0; y < ih; ++y)
                            for (int xx = 0; xx < iw; ++xx)
                                for (int dy = 0; dy < f; ++dy)
                                    for (int dx = 0; dx < f; ++dx)
                                        pg->at(c * f * f + dy * f + dx, y, xx) +=
                                            g.at(c, y * f + dy, xx * f + dx);
                }
                break;
            }
            case Op::concat_c: {
                const int ca = n.i0;
                const std::size_t plane =
                    static_cast<std::size_t>(n.value.shape().h) * n.value.shape().w;
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < static_cast<std::size_t>(ca) * plane; ++i)
                        (*pg)[i] += g[i];
                if (Tensor* pg = parent_grad(1)) {
                    const std::size_t off = static_cast<std::size_t>(ca) * plane;
                    for (std::size_t i = 0; i < pg->size(); ++i) (*pg)[i] += g[off + i];
                }
                break;
            }
            case Op::crop: {
                if (Tensor* pg = parent_grad(0))
                    for (int c = 0; c < n.value.shape().c; ++c)
                        for (int y = 0; y < n.value.shape().h; ++y)
                            for (int xx = 0; xx < n.value.shape().w; ++xx)
                                pg->at(c, n.i0 + y, n.i1 + xx) += g.at(c, y, xx);
                break;
            }
            case Op::box_mean: {
                // adjoint of mean with clipped-count weighting: divide the
                // upstream gradient by the per-pixel count, then box-sum.
                if (Tensor* pg = parent_grad(0)) {
                    const int r = n.i0;
                    const int h = n.value.shape().h, w = n.value.shape().w;
                    Tensor scaled(n.value.shape());
                    for (int c = 0; c < n.value.shape().c; ++c)
                        for (int y = 0; y < h; ++y) {
                            int cy = std::min(y + r, h - 1) - std::max(y - r, 0) + 1;
                            for (int xx = 0; xx < w; ++xx) {
                                int cx = std::min(xx + r, w - 1) - std::max(xx - r, 0) + 1;
                                scaled.at(c, y, xx) = g.at(c, y, xx) / (cx * cy);
                            }
                        }
                    const std::size_t plane = static_cast<std::size_t>(h) * w;
                    Tensor summed(n.value.shape());
                    for (int c = 0; c < n.value.shape().c; ++c)
                        detail::box_sum_raw(scaled.data() + c * plane,
                                            summed.data() + c * plane, w, h, r);
                    for (std::size_t i = 0; i < pg->size(); ++i) (*pg)[i] += summed[i];
                }
                break;
            }
            case Op::instance_norm: {
                const Tensor& vx = nodes_[n.parent[0]].value;
                const Tensor& vg_ = nodes_[n.parent[1]].value;
                Tensor* gx = parent_grad(0);
                Tensor* gg = parent_grad(1);
                Tensor* gb = parent_grad(2);
                const int hw = vx.shape().h * vx.shape().w;
                for (int c = 0; c < vx.shape().c; ++c) {
                    double mean = 0.0;
                    for (int i = 0; i < hw; ++i) mean += vx[c * hw + i];
                    mean /= hw;
                    double var = 0.0;
                    for (int i = 0; i < hw; ++i) {
                        double d = vx[c * hw + i] - mean;
                        var += d * d;
                    }
                    var /= hw;
                    double inv = 1.0 / std::sqrt(var + n.d0);
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (int i = 0; i < hw; ++i) {
                        double xh = (vx[c * hw + i] - mean) * inv;
                        sum_g += g[c * hw + i];
                        sum_gx += g[c * hw + i] * xh;
                    }
                    if (gb) gb->at(c, 0, 0) += sum_g;
                    if (gg) gg->at(c, 0, 0) += sum_gx;
                    if (gx) {
                        double gamma = vg_.at(c, 0, 0);
                        for (int i = 0; i < hw; ++i) {
                            double xh = (vx[c * hw + i] - mean) * inv;
                            (*gx)[c * hw + i] +=
                                gamma * inv *
                                (g[c * hw + i] - sum_g / hw - xh * sum_gx / hw);
                        }
                    }
                }
                break;
            }
            case Op::sum_all: {
                if (Tensor* pg = parent_grad(0))
                    for (std::size_t i = 0; i < pg->size(); ++i) (*pg)[i] += g[0];
                break;
            }
            case Op::l2_norm: {
                const Tensor& vx = nodes_[n.parent[0]].value;
                if (Tensor* pg = parent_grad(0)) {
                    double norm = std::max(n.value[0], 1e-12);
                    for (std::size_t i = 0; i < pg->size(); ++i)
                        (*pg)[i] += g[0] * vx[i] / norm;
                }
                break;
            }
        }
    }
}

// --- tensor-level helpers -----------------------------------------------

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    Tensor out(x.shape().c, out_h, out_w);
    const int in_h = x.shape().h, in_w = x.shape().w;
    for (int c = 0; c < x.shape().c; ++c)
        for (int oy = 0; oy < out_h; ++oy) {
            BilinearTap ty = bilinear_tap(oy, in_h, out_h);
            for (int ox = 0; ox < out_w; ++ox) {
                BilinearTap tx = bilinear_tap(ox, in_w, out_w);
                double top = (1.0 - tx.w_hi) * x.at(c, ty.lo, tx.lo) +
                             tx.w_hi * x.at(c, ty.lo, tx.hi);
                double bot = (1.0 - tx.w_hi) * x.at(c, ty.hi, tx.lo) +
                             tx.w_hi * x.at(c, ty.hi, tx.hi);
                out.at(c, oy, ox) = (1.0 - ty.w_hi) * top + ty.w_hi * bot;
            }
        }
    return out;
}

Tensor pixel_unshuffle(const Tensor& x, int factor) {
    if (x.shape().h % factor != 0 || x.shape().w % factor != 0)
        throw contract_error("pixel_unshuffle extents not divisible by factor");
    Tensor out(x.shape().c * factor * factor, x.shape().h / factor,
               x.shape().w / factor);
    for (int c = 0; c < x.shape().c; ++c)
        for (int y = 0; y < out.shape().h; ++y)
            for (int xx = 0; xx < out.shape().w; ++xx)
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        out.at(c * factor * factor + dy * factor + dx, y, xx) =
                            x.at(c, y * factor + dy, xx * factor + dx);
    return out;
}

// --- gradient checking ----------------------------------------------------

GradCheckResult grad_check(
    const std::function<double(const std::vector<Tensor>&, EvalProbe* probe)>& f,
    const std::vector<Tensor>& point, const std::vector<Tensor>& analytic,
    double h, int max_coords_per_tensor, std::uint64_t seed, double kink_skip) {
    if (point.size() != analytic.size())
        throw contract_error("grad_check point/analytic size mismatch");
    GradCheckResult res;
    std::mt19937_64 rng(seed);
    std::vector<Tensor> work = point;

    for (std::size_t ti = 0; ti < point.size(); ++ti) {
        const std::size_t n = point[ti].size();
        std::vector<std::size_t> coords;
        if (static_cast<int>(n) <= max_coords_per_tensor) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (int i = 0; i < max_coords_per_tensor; ++i) coords.push_back(pick(rng));
        }
        for (std::size_t ci : coords) {
            const double orig = work[ti][ci];
            EvalProbe plus, minus;
            work[ti][ci] = orig + h;
            double f_plus = f(work, &plus);
            work[ti][ci] = orig - h;
            double f_minus = f(work, &minus);
            work[ti][ci] = orig;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw numeric_error("grad_check encountered non-finite loss");
            if (plus.kink_gap < kink_skip || minus.kink_gap < kink_skip ||
                plus.fingerprint != minus.fingerprint) {
                ++res.skipped;
                continue;
            }
            double numeric = (f_plus - f_minus) / (2.0 * h);
            double a = analytic[ti][ci];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            double rel = std::abs(a - numeric) / denom;
            res.max_rel_error = std::max(res.max_rel_error, rel);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace ad
}  // namespace dgf
