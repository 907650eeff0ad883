#pragma once

#include <string>
#include <vector>

#include "dgf/train.hpp"

namespace dgf {

struct SweepRow {
    std::string sweep_kind;  // "robustness" | "radius" | "noise"
    double param = 0.0;      // sigma, radius, or noise level
    std::string variant;
    std::string metric;
    double value = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    // `sweep_kind,param,variant,metric,value`
    void write_csv(const std::string& path) const;
};

// Corrupts the guide with zero-mean Gaussian noise per sigma at inference
// time and records masked SSIM vs ground truth for both variants.
SweepResult robustness_sweep(const Checkpoint& cp_with, const Checkpoint& cp_without,
                             const std::vector<ImagePair>& test_set,
                             const std::vector<double>& sigmas,
                             std::uint64_t noise_seed);

// lowfreq_ssim per guided-filter radius for withGF (reference: I_up for SR,
// ground truth for denoising), plus one withoutGF reference row.
SweepResult content_preservation_sweep(const Checkpoint& cp_with,
                                       const Checkpoint& cp_without,
                                       const std::vector<ImagePair>& test_set,
                                       const std::vector<int>& radii);

// Denoising quality per Poisson level: inputs are re-corrupted from the
// ground truth at each photons_at_white value, then ssim and lowfreq_ssim
// are recorded for both variants.
SweepResult noise_level_sweep(const Checkpoint& cp_with, const Checkpoint& cp_without,
                              const std::vector<ImagePair>& test_set,
                              const std::vector<double>& photon_levels,
                              std::uint64_t noise_seed);

struct AttackSpec {
    double lambda = 0.1;      // residual-norm penalty weight
    double initial_lr = 1e-2;
    double min_lr = 1e-5;
    int iterations = 300;
    int plateau_patience = 20;
    double decay_factor = 0.5;
    Variant target = Variant::with_gf;
};

struct AttackTracePoint {
    int iteration = 0;
    double objective = 0.0;  // minimized: -deviation + lambda*(|E_I| + |E_G|)
    double deviation = 0.0;  // masked L1 of L - P
    double res_norm = 0.0;   // ||E_I||2 + ||E_G||2
};

struct AttackResult {
    Image2D residual_input;  // E_I
    Image2D residual_guide;  // E_G
    std::vector<AttackTracePoint> trace;
    std::vector<std::pair<double, double>> deviation_curve;  // (lambda_adv, MAE)

    // `iteration,objective,deviation,res_norm`
    void write_trace_csv(const std::string& path) const;
};

// Adam on the additive residuals E_I, E_G with the network frozen,
// maximizing masked |L - P| under a lambda-weighted L2 norm penalty.
AttackResult train_attack(const Checkpoint& cp, const ImagePair& pair,
                          const AttackSpec& spec);

// Normalizes each residual to unit max-abs, scales by lambda_adversarial,
// adds to the inputs, and runs inference. Returns (prediction, masked MAE).
std::pair<Image2D, double> apply_attack(const Checkpoint& cp, const ImagePair& pair,
                                        const AttackResult& result,
                                        double lambda_adversarial);

// MAE/SSIM/lowfreq rows for the interpolation baseline, onlyGF, withGF and
// withoutGF on every test pair.
MetricReport ablation_run(const std::vector<ImagePair>& test_set, Task task,
                          const Checkpoint& cp_with, const Checkpoint& cp_without,
                          const GuidedFilterParams& only_gf_params);

// Sum of all parameter values; used to assert attacks leave weights intact.
double parameter_checksum(const Network& net);

}  // namespace dgf
