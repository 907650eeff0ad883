#include "dgf/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dgf {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string dir = std::filesystem::path(path).parent_path().string();
    if (dir.empty()) dir = ".";
    return parse_text(buf.str(), dir);
}

KeyValueConfig KeyValueConfig::parse_text(const std::string& text,
                                          const std::string& base_dir) {
    KeyValueConfig cfg;
    cfg.base_dir_ = base_dir;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) +
                               ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw config_error("config line " + std::to_string(lineno) + ": empty key");
        if (!cfg.entries_.emplace(key, value).second)
            throw config_error("config line " + std::to_string(lineno) +
                               ": duplicate key '" + key + "'");
    }
    return cfg;
}

bool KeyValueConfig::has(const std::string& key) const {
    return entries_.count(key) != 0;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected a number, got '" +
                           it->second + "'");
    }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t used = 0;
        int v = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected an integer, got '" +
                           it->second + "'");
    }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t used = 0;
        std::uint64_t v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected an unsigned integer, got '" +
                           it->second + "'");
    }
}

std::vector<double> KeyValueConfig::get_doubles(
    const std::string& key, const std::vector<double>& fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw config_error("key '" + key + "': expected numbers, got '" + tok + "'");
        }
    }
    if (out.empty())
        throw config_error("key '" + key + "': expected a comma-separated list");
    return out;
}

std::string KeyValueConfig::resolve_path(const std::string& value) const {
    std::filesystem::path p(value);
    if (p.is_absolute() || base_dir_.empty()) return value;
    return (std::filesystem::path(base_dir_) / p).string();
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : entries_)
        if (!allowed.count(key))
            throw config_error("unknown config key '" + key + "'");
}

// --- RunConfig ---------------------------------------------------------------

const std::set<std::string>& RunConfig::allowed_keys() {
    static const std::set<std::string> keys = {
        "task", "seed",
        "phantom.size", "phantom.shapes", "phantom.contrast_a", "phantom.contrast_b",
        "phantom.texture",
        "data.count", "data.val_count", "data.noise", "data.dir",
        "gf.radius", "gf.epsilon",
        "net.architecture", "net.encoder_depth", "net.base_channels", "net.upsample",
        "net.activation", "net.normalization", "net.residual_blocks", "net.seed",
        "train.variant", "train.loss", "train.lr", "train.min_lr", "train.patience",
        "train.decay", "train.iterations", "train.val_cadence",
        "attack.lambda", "attack.iterations", "attack.lr", "attack.min_lr",
        "sweep.sigmas", "sweep.radii",
        "out.dir",
    };
    return keys;
}

namespace {

Range parse_range(const std::string& text, const std::string& key) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw config_error("key '" + key + "': expected 'lo:hi'");
    try {
        Range r{std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
        if (r.lo > r.hi) throw std::invalid_argument("inverted");
        return r;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected 'lo:hi' with lo <= hi");
    }
}

std::optional<NoiseSpec> parse_noise(const std::string& text, std::uint64_t seed) {
    if (text == "none") return std::nullopt;
    if (text.rfind("poisson:", 0) == 0)
        return NoiseSpec::poisson(std::stod(text.substr(8)), seed);
    if (text.rfind("gaussian:", 0) == 0)
        return NoiseSpec::gaussian(std::stod(text.substr(9)), seed);
    if (text == "poisson-low") return NoiseSpec::poisson(kPoissonPhotonsLow, seed);
    if (text == "poisson-medium")
        return NoiseSpec::poisson(kPoissonPhotonsMedium, seed);
    if (text == "poisson-strong")
        return NoiseSpec::poisson(kPoissonPhotonsStrong, seed);
    throw config_error("data.noise: expected none | poisson:<photons> | "
                       "gaussian:<sigma> | poisson-{low,medium,strong}");
}

}  // namespace

RunConfig RunConfig::from_config(const KeyValueConfig& kv) {
    kv.reject_unknown(allowed_keys());
    RunConfig rc;
    rc.task = task_from_string(kv.get_string("task", "sr"));
    rc.seed = kv.get_u64("seed", 7);

    rc.phantom.seed = rc.seed;
    rc.phantom.size = kv.get_int("phantom.size", 64);
    rc.phantom.n_shapes = kv.get_int("phantom.shapes", 5);
    if (kv.has("phantom.contrast_a"))
        rc.phantom.contrast_a =
            parse_range(kv.get_string("phantom.contrast_a", ""), "phantom.contrast_a");
    if (kv.has("phantom.contrast_b"))
        rc.phantom.contrast_b =
            parse_range(kv.get_string("phantom.contrast_b", ""), "phantom.contrast_b");
    rc.phantom.texture_amplitude = kv.get_double("phantom.texture", 0.03);

    rc.data_count = kv.get_int("data.count", 8);
    rc.val_count = kv.get_int("data.val_count", 2);
    rc.noise = parse_noise(kv.get_string("data.noise", "none"),
                           derive_seed(rc.seed, 0xd09e));

    rc.gf.window.radius = kv.get_int("gf.radius", 2);
    rc.gf.epsilon = kv.get_double("gf.epsilon", 1e-4);

    std::string arch = kv.get_string("net.architecture", "unet-mini");
    if (arch == "unet-mini")
        rc.generator.architecture = Architecture::unet_mini;
    else if (arch == "wdsr-mini")
        rc.generator.architecture = Architecture::wdsr_mini;
    else
        throw config_error("net.architecture: expected unet-mini | wdsr-mini");
    rc.generator.encoder_depth = kv.get_int("net.encoder_depth", 2);
    rc.generator.base_channels = kv.get_int("net.base_channels", 8);
    std::string up = kv.get_string("net.upsample", "bilinear");
    if (up == "bilinear")
        rc.generator.upsample = UpsampleMode::bilinear_conv;
    else if (up == "pixel-shuffle")
        rc.generator.upsample = UpsampleMode::pixel_shuffle;
    else
        throw config_error("net.upsample: expected bilinear | pixel-shuffle");
    std::string act = kv.get_string("net.activation", "relu");
    if (act == "relu") {
        rc.generator.activation = Activation::relu;
    } else if (act.rfind("leaky-relu:", 0) == 0) {
        rc.generator.activation = Activation::leaky_relu;
        rc.generator.leaky_slope = std::stod(act.substr(11));
    } else {
        throw config_error("net.activation: expected relu | leaky-relu:<slope>");
    }
    std::string norm = kv.get_string("net.normalization", "none");
    if (norm == "none")
        rc.generator.normalization = Normalization::none;
    else if (norm == "instance")
        rc.generator.normalization = Normalization::instance;
    else
        throw config_error("net.normalization: expected none | instance");
    rc.generator.residual_blocks = kv.get_int("net.residual_blocks", 4);
    rc.generator.seed = kv.get_u64("net.seed", derive_seed(rc.seed, 0x11e7));

    rc.train.variant = variant_from_string(kv.get_string("train.variant", "withGF"));
    rc.train.loss = LossSpec::from_text(kv.get_string("train.loss", "l1+grad:0.5"));
    rc.train.initial_lr = kv.get_double("train.lr", 1e-5);
    rc.train.min_lr = kv.get_double("train.min_lr", 1e-6);
    rc.train.plateau_patience = kv.get_int("train.patience", 5);
    rc.train.decay_factor = kv.get_double("train.decay", 0.5);
    rc.train.max_iterations = kv.get_int("train.iterations", 2000);
    rc.train.validation_cadence = kv.get_int("train.val_cadence", 100);
    rc.train.seed = derive_seed(rc.seed, 0x7a41);
    rc.train.gf = rc.gf;

    rc.attack.lambda = kv.get_double("attack.lambda", 0.1);
    rc.attack.iterations = kv.get_int("attack.iterations", 300);
    rc.attack.initial_lr = kv.get_double("attack.lr", 1e-2);
    rc.attack.min_lr = kv.get_double("attack.min_lr", 1e-5);

    rc.sweep_sigmas = kv.get_doubles("sweep.sigmas", rc.sweep_sigmas);
    std::vector<double> radii_d;
    for (int r : rc.sweep_radii) radii_d.push_back(r);
    radii_d = kv.get_doubles("sweep.radii", radii_d);
    rc.sweep_radii.clear();
    for (double r : radii_d) {
        if (r < 1 || r != std::floor(r))
            throw config_error("sweep.radii: expected positive integers");
        rc.sweep_radii.push_back(static_cast<int>(r));
    }
    return rc;
}

}  // namespace dgf
