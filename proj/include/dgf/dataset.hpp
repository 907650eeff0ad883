#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dgf/image.hpp"
#include "dgf/metrics.hpp"

namespace dgf {

struct PairMeta {
    Task task = Task::super_resolution;
    std::string degradation;  // descriptor, e.g. "nn-downsample-4" or "poisson:1000"
    std::uint64_t seed = 0;
};

// input I (degraded), guide G (second modality), ground truth L, and the
// evaluation mask. For SR the input is exactly 1/4 per side.
struct ImagePair {
    Image2D input;
    Image2D guide;
    Image2D ground_truth;
    Mask mask;
    PairMeta meta;
};

inline constexpr int kSrFactor = 4;

// Generates n pairs from per-pair phantoms (seeds derived from spec.seed).
// SR: input = top-left nearest-neighbor 4x downsample of modality A.
// Denoising: input = modality A through apply_noise (or identical if no noise).
std::vector<ImagePair> make_dataset(const PhantomSpec& spec, Task task,
                                    const std::optional<NoiseSpec>& noise, int n);

// Dataset directory layout: manifest.csv + DGF1 files per pair.
void save_dataset(const std::vector<ImagePair>& pairs, const std::string& dir);
std::vector<ImagePair> load_dataset(const std::string& dir);

}  // namespace dgf
