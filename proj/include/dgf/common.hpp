#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace dgf {

// Error taxonomy, mapped to CLI exit codes (config 2, io 3, numeric 4).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Task { super_resolution, denoising };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

// splitmix64 finalizer; used to derive independent RNG streams from one seed.
inline std::uint64_t split_mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return split_mix(base ^ split_mix(stream + 0x51ul));
}

// Thread cap for per-image experiment fan-out. Reads DGF_THREADS once; >= 1.
int thread_budget();

// Runs body(i) for i in [0, n). Work is split into contiguous chunks over at
// most thread_budget() threads; cells must be independent. Joins before
// returning, so results land in caller-owned slots in a fixed order.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace dgf
