#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dgf/guided_filter.hpp"
#include "dgf/tensor.hpp"

namespace dgf {
namespace ad {

using NodeId = int;

enum class Op {
    leaf,
    add,
    sub,
    mul,
    div,
    add_scalar,
    mul_scalar,
    relu,
    leaky_relu,
    abs,
    conv2d,
    max_pool2,
    bilinear_resize,
    pixel_shuffle,
    concat_c,
    crop,
    box_mean,
    instance_norm,
    sum_all,
    l2_norm,
};

enum class Padding { same, valid };

// Rounds forward values through binary32 when set; gradient checks require f64.
enum class Precision { f64, f32 };

struct Node {
    Op op = Op::leaf;
    NodeId parent[3] = {-1, -1, -1};
    int n_parents = 0;
    Tensor value;
    Tensor grad;            // allocated and zeroed per backward pass
    bool requires_grad = false;
    // op attributes
    int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
    double d0 = 0.0;
};

// Append-only DAG of tensor ops; node order is a topological order, so
// backward is one reverse sweep. Single-threaded per instance.
class Tape {
public:
    explicit Tape(Precision p = Precision::f64) : precision_(p) {}

    NodeId variable(Tensor v);   // requires_grad = true
    NodeId constant(Tensor v);   // requires_grad = false

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    std::size_t node_count() const { return nodes_.size(); }
    Precision precision() const { return precision_; }

    // Forward probes for gradient checking. min_kink_gap is the smallest
    // nonzero |pre-activation| at a relu/leaky/abs kink or strict max-pool
    // rivalry; activation_fingerprint hashes every sign decision and argmax,
    // so two forwards in the same linear region hash identically.
    double min_kink_gap() const { return min_kink_gap_; }
    std::uint64_t activation_fingerprint() const { return fingerprint_; }
    void reset_forward_probes() {
        min_kink_gap_ = 1e300;
        fingerprint_ = 0x9e3779b97f4a7c15ull;
    }

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients onto every node
    // with requires_grad. `loss` must be a single-element node.
    void backward(NodeId loss);

    friend NodeId emit(Tape& t, Node n);
    friend class TapeOps;

private:
    std::vector<Node> nodes_;
    Precision precision_ = Precision::f64;
    double min_kink_gap_ = 1e300;
    std::uint64_t fingerprint_ = 0x9e3779b97f4a7c15ull;

    void note_kink(double gap) {
        if (gap < min_kink_gap_) min_kink_gap_ = gap;
    }
    void note_branch(std::uint64_t token) {
        fingerprint_ = fingerprint_ * 1099511628211ull + token;
    }
};

// elementwise
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId sub(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId div(Tape& t, NodeId a, NodeId b);
NodeId add_scalar(Tape& t, NodeId a, double s);
NodeId mul_scalar(Tape& t, NodeId a, double s);
NodeId relu(Tape& t, NodeId a);
NodeId leaky_relu(Tape& t, NodeId a, double slope);
NodeId abs(Tape& t, NodeId a);

// structural / spatial
NodeId conv2d(Tape& t, NodeId x, NodeId weight, NodeId bias, int stride, Padding pad);
NodeId max_pool2(Tape& t, NodeId x);
NodeId bilinear_resize(Tape& t, NodeId x, int out_h, int out_w);
NodeId pixel_shuffle(Tape& t, NodeId x, int factor);
NodeId concat_c(Tape& t, NodeId a, NodeId b);
NodeId crop(Tape& t, NodeId x, int y0, int x0, int h, int w);
NodeId box_mean(Tape& t, NodeId x, int radius);
NodeId instance_norm(Tape& t, NodeId x, NodeId gamma, NodeId beta);

// reductions (1x1x1 results)
NodeId sum_all(Tape& t, NodeId a);
NodeId l2_norm(Tape& t, NodeId a);

// Guided filter as a differentiable subgraph. Forward values are bit-identical
// to dgf::guided_filter; gradients flow to both inputs through the composed
// primitive adjoints. Single-channel nodes of matching extent.
NodeId guided_filter_node(Tape& t, NodeId input, NodeId guidance,
                          const GuidedFilterParams& params);

// tensor-level (non-tape) counterparts used by data preparation
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
Tensor pixel_unshuffle(const Tensor& x, int factor);  // exact inverse layout

// --- gradient verification ----------------------------------------------

// Written by the function under test after each forward evaluation.
struct EvalProbe {
    double kink_gap = 1e300;
    std::uint64_t fingerprint = 0;
};

// Evaluates `f` (a fresh scalar forward pass over `point`) with one
// coordinate of one tensor perturbed; compares central differences against
// `analytic` at up to max_coords_per_tensor seeded coordinates per tensor.
// Relative error denominator: max(|analytic|, |numeric|, 1e-8). A coordinate
// is skipped when either perturbed forward passes within kink_skip of an
// activation kink or the two forwards land in different linear regions
// (differing activation fingerprints). Returns the worst relative error.
struct GradCheckResult {
    double max_rel_error = 0.0;
    int checked = 0;
    int skipped = 0;
};

GradCheckResult grad_check(
    const std::function<double(const std::vector<Tensor>&, EvalProbe* probe)>& f,
    const std::vector<Tensor>& point, const std::vector<Tensor>& analytic,
    double h, int max_coords_per_tensor, std::uint64_t seed,
    double kink_skip = 1e-7);

}  // namespace ad
}  // namespace dgf
