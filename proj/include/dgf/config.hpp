#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dgf/experiments.hpp"

namespace dgf {

// `key = value` per line, '#' comments, unknown keys rejected. Relative paths
// resolve against the config file's directory.
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_text(const std::string& text, const std::string& base_dir);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;
    std::string resolve_path(const std::string& value) const;

    void reject_unknown(const std::set<std::string>& allowed) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::string base_dir_;
};

// Everything one experiment needs, materialized from a config file.
struct RunConfig {
    Task task = Task::super_resolution;
    std::uint64_t seed = 7;

    PhantomSpec phantom;
    int data_count = 8;
    int val_count = 2;
    std::optional<NoiseSpec> noise;

    GuidedFilterParams gf;
    GeneratorConfig generator;
    TrainConfig train;
    AttackSpec attack;

    std::vector<double> sweep_sigmas{0.0, 0.02, 0.05, 0.1, 0.2, 0.4};
    std::vector<int> sweep_radii{2, 4, 8, 16};

    static RunConfig from_config(const KeyValueConfig& kv);
    static const std::set<std::string>& allowed_keys();
};

}  // namespace dgf
