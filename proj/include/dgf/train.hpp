#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dgf/generator.hpp"

namespace dgf {

struct LossSpec {
    enum class Kind { l1, ssim, l1_grad_diff };
    Kind kind = Kind::l1_grad_diff;
    double grad_weight = 0.5;  // weight of the gradient-difference term

    std::string to_text() const;
    static LossSpec from_text(const std::string& s);
};

// Differentiable scalar loss between pred and target nodes; masked variants
// average over mask-true pixels only. Pass nullptr for unmasked.
ad::NodeId loss_node(ad::Tape& tape, ad::NodeId pred, ad::NodeId target,
                     const LossSpec& spec, const Mask* mask);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    std::vector<std::pair<std::string, Tensor>> m;  // aligned with parameters
    std::vector<std::pair<std::string, Tensor>> v;
    AdamConfig adam;
    double lr = 1e-5;
    std::int64_t step = 0;

    static OptimizerState init(const std::vector<std::pair<std::string, Tensor>>& params,
                               double lr);
};

// One bias-corrected Adam update, in place. Throws numeric_error on
// non-finite gradients (no partial update is applied).
void adam_step(std::vector<std::pair<std::string, Tensor>>& params,
               const std::vector<Tensor>& grads, OptimizerState& state);

struct TrainConfig {
    double initial_lr = 1e-5;
    double min_lr = 1e-6;
    int plateau_patience = 5;       // validation evaluations without improvement
    double decay_factor = 0.5;
    double improvement_rtol = 1e-4; // relative improvement threshold
    int max_iterations = 2000;
    int validation_cadence = 100;
    std::uint64_t seed = 0;
    LossSpec loss;
    Variant variant = Variant::with_gf;
    GuidedFilterParams gf;

    std::string canonical_text() const;
};

struct Checkpoint {
    GeneratorConfig generator;
    std::vector<std::pair<std::string, Tensor>> parameters;  // best-validation weights
    OptimizerState optimizer;
    TrainConfig train;
    Task task = Task::super_resolution;
    std::vector<double> val_history;
    std::vector<double> train_history;  // loss at each validation point
    double best_val_loss = 0.0;
    std::uint32_t version = 1;
};

// sample -> forward_pipeline -> loss -> backward -> adam, with plateau decay
// of the learning rate on stagnating validation loss. Returns the
// best-validation checkpoint. Throws numeric_error on divergence.
Checkpoint train(const std::vector<ImagePair>& dataset,
                 const std::vector<ImagePair>& val_set,
                 const GeneratorConfig& gen_config, const TrainConfig& cfg);

double validation_loss(const Network& net, const std::vector<ImagePair>& val_set,
                       const TrainConfig& cfg);

// Checkpoint file: "DGFC", u32 version, length-prefixed canonical config
// text, then named parameter blocks (u16 name length, name, u32 c/h/w,
// f64 LE payload). Round trips are byte-identical.
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Network network_from_checkpoint(const Checkpoint& cp);

}  // namespace dgf
