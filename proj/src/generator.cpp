#include "dgf/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace dgf {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::with_gf: return "withGF";
        case Variant::without_gf: return "withoutGF";
        case Variant::only_gf: return "onlyGF";
    }
    return "?";
}

Variant variant_from_string(const std::string& s) {
    if (s == "withGF") return Variant::with_gf;
    if (s == "withoutGF") return Variant::without_gf;
    if (s == "onlyGF") return Variant::only_gf;
    throw config_error("unknown variant '" + s + "'");
}

std::string to_string(Architecture a) {
    return a == Architecture::unet_mini ? "unet-mini" : "wdsr-mini";
}

namespace {

void validate(const GeneratorConfig& cfg) {
    if (cfg.encoder_depth < 1 || cfg.encoder_depth > 4)
        throw config_error("encoder_depth must be in [1, 4]");
    if (cfg.base_channels < 1 || cfg.base_channels > 64)
        throw config_error("base_channels must be in [1, 64]");
    if (cfg.residual_blocks < 1 || cfg.residual_blocks > 16)
        throw config_error("residual_blocks must be in [1, 16]");
    if (cfg.leaky_slope < 0.0 || cfg.leaky_slope >= 1.0)
        throw config_error("leaky slope must be in [0, 1)");
}

// Registers parameters in a deterministic order with He fan-in init.
struct Registrar {
    std::vector<std::pair<std::string, Tensor>>& out;
    std::mt19937_64 rng;
    const GeneratorConfig& cfg;

    void conv(const std::string& name, int out_c, int in_c, int kh, int kw) {
        Tensor w(out_c * in_c, kh, kw);
        const double stddev = std::sqrt(2.0 / (in_c * kh * kw));
        std::normal_distribution<double> init(0.0, stddev);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = init(rng);
        out.emplace_back(name + ".w", std::move(w));
        out.emplace_back(name + ".b", Tensor(out_c, 1, 1, 0.0));
    }

    void block(const std::string& name, int out_c, int in_c, int k = 3) {
        conv(name, out_c, in_c, k, k);
        if (cfg.normalization == Normalization::instance) {
            out.emplace_back(name + ".gamma", Tensor(out_c, 1, 1, 1.0));
            out.emplace_back(name + ".beta", Tensor(out_c, 1, 1, 0.0));
        }
    }
};

// Applies the node sequence matching Registrar::block.
struct GraphCtx {
    ad::Tape& tape;
    const std::map<std::string, ad::NodeId>& p;
    const GeneratorConfig& cfg;

    ad::NodeId node(const std::string& name) const {
        auto it = p.find(name);
        if (it == p.end())
            throw contract_error("missing parameter '" + name + "'");
        return it->second;
    }
    ad::NodeId conv(const std::string& name, ad::NodeId x, int stride,
                    ad::Padding pad) const {
        return ad::conv2d(tape, x, node(name + ".w"), node(name + ".b"), stride, pad);
    }
    ad::NodeId act(ad::NodeId x) const {
        return cfg.activation == Activation::relu
                   ? ad::relu(tape, x)
                   : ad::leaky_relu(tape, x, cfg.leaky_slope);
    }
    ad::NodeId norm(const std::string& name, ad::NodeId x) const {
        if (cfg.normalization == Normalization::none) return x;
        return ad::instance_norm(tape, x, node(name + ".gamma"), node(name + ".beta"));
    }
    // conv -> norm -> act
    ad::NodeId block(const std::string& name, ad::NodeId x, int stride = 1) const {
        return act(norm(name, conv(name, x, stride, ad::Padding::same)));
    }
};

int level_channels(const GeneratorConfig& cfg, int level) {
    return cfg.base_channels << level;
}

void register_unet(Registrar& reg, const GeneratorConfig& cfg) {
    for (const char* path : {"in", "g"}) {
        int prev = 1;
        for (int l = 0; l < cfg.encoder_depth; ++l) {
            int ch = level_channels(cfg, l);
            reg.block("enc." + std::string(path) + "." + std::to_string(l), ch, prev);
            prev = ch;
        }
    }
    const int deepest = level_channels(cfg, cfg.encoder_depth - 1);
    const int bottleneck = level_channels(cfg, cfg.encoder_depth);
    reg.block("bott", bottleneck, 2 * deepest);
    int prev = bottleneck;
    for (int l = cfg.encoder_depth - 1; l >= 0; --l) {
        int ch = level_channels(cfg, l);
        std::string base = "dec." + std::to_string(l);
        if (cfg.upsample == UpsampleMode::bilinear_conv)
            reg.block(base + ".up", ch, prev);
        else
            reg.block(base + ".up", ch * 4, prev);  // pixel-shuffle x2
        reg.block(base, ch, 3 * ch);
        prev = ch;
    }
    reg.conv("out", 1, cfg.base_channels, 1, 1);
}

void register_wdsr(Registrar& reg, const GeneratorConfig& cfg) {
    const int c = cfg.base_channels;
    reg.block("genc.0", c, 1);
    reg.block("genc.1", c, c);
    reg.block("head", c, 1);
    reg.block("fuse", c, 2 * c);
    for (int b = 0; b < cfg.residual_blocks; ++b) {
        std::string base = "body." + std::to_string(b);
        reg.conv(base + ".a", 2 * c, c, 3, 3);
        reg.conv(base + ".b", c, 2 * c, 3, 3);
    }
    reg.conv("tail", kSrFactor * kSrFactor, c, 3, 3);
}

struct UnetForward {
    const GeneratorConfig& cfg;
    const GraphCtx& ctx;

    ad::NodeId encode(const char* path, ad::NodeId x,
                      std::vector<ad::NodeId>& skips) const {
        for (int l = 0; l < cfg.encoder_depth; ++l) {
            x = ctx.block("enc." + std::string(path) + "." + std::to_string(l), x);
            skips.push_back(x);
            x = ad::max_pool2(ctx.tape, x);
        }
        return x;
    }

    ad::NodeId run(ad::NodeId input, ad::NodeId guide) const {
        const Shape in_shape = ctx.tape.value(input).shape();
        if (in_shape.h % (1 << cfg.encoder_depth) != 0 ||
            in_shape.w % (1 << cfg.encoder_depth) != 0)
            throw contract_error("unet-mini input extents must be divisible by 2^depth");
        std::vector<ad::NodeId> skips_in, skips_g;
        ad::NodeId a = encode("in", input, skips_in);
        ad::NodeId b = encode("g", guide, skips_g);
        ad::NodeId x = ctx.block("bott", ad::concat_c(ctx.tape, a, b));
        for (int l = cfg.encoder_depth - 1; l >= 0; --l) {
            std::string base = "dec." + std::to_string(l);
            if (cfg.upsample == UpsampleMode::bilinear_conv) {
                const Shape s = ctx.tape.value(x).shape();
                x = ad::bilinear_resize(ctx.tape, x, s.h * 2, s.w * 2);
                x = ctx.block(base + ".up", x);
            } else {
                x = ctx.block(base + ".up", x);
                x = ad::pixel_shuffle(ctx.tape, x, 2);
            }
            ad::NodeId skip = ad::concat_c(ctx.tape, skips_in[l], skips_g[l]);
            x = ctx.block(base, ad::concat_c(ctx.tape, x, skip));
        }
        return ctx.conv("out", x, 1, ad::Padding::same);
    }
};

struct WdsrForward {
    const GeneratorConfig& cfg;
    const GraphCtx& ctx;

    ad::NodeId run(ad::NodeId input, ad::NodeId guide, ad::NodeId i_up) const {
        if (i_up < 0)
            throw contract_error("wdsr-mini needs the upsampled input node");
        ad::NodeId g = ctx.block("genc.0", guide, 2);
        g = ctx.block("genc.1", g, 2);
        ad::NodeId x = ctx.block("head", input);
        x = ctx.block("fuse", ad::concat_c(ctx.tape, x, g));
        for (int b = 0; b < cfg.residual_blocks; ++b) {
            std::string base = "body." + std::to_string(b);
            ad::NodeId r = ctx.act(ctx.conv(base + ".a", x, 1, ad::Padding::same));
            r = ctx.conv(base + ".b", r, 1, ad::Padding::same);
            x = ad::add(ctx.tape, x, r);
        }
        x = ctx.conv("tail", x, 1, ad::Padding::same);
        x = ad::pixel_shuffle(ctx.tape, x, kSrFactor);
        return ad::add(ctx.tape, x, i_up);
    }
};

}  // namespace

Network build_generator(const GeneratorConfig& config) {
    validate(config);
    Network net;
    net.config_ = config;
    Registrar reg{net.params_, std::mt19937_64(config.seed), config};
    if (config.architecture == Architecture::unet_mini)
        register_unet(reg, config);
    else
        register_wdsr(reg, config);
    return net;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
}

Tensor* Network::find_parameter(const std::string& name) {
    for (auto& [n, t] : params_)
        if (n == name) return &t;
    return nullptr;
}

Network::ForwardBinding Network::forward(ad::Tape& tape, ad::NodeId input,
                                         ad::NodeId guide, ad::NodeId i_up,
                                         bool trainable) const {
    ForwardBinding fb;
    std::map<std::string, ad::NodeId> by_name;
    fb.param_nodes.reserve(params_.size());
    for (const auto& [name, tensor] : params_) {
        ad::NodeId id = trainable ? tape.variable(tensor) : tape.constant(tensor);
        fb.param_nodes.push_back(id);
        by_name.emplace(name, id);
    }
    GraphCtx ctx{tape, by_name, config_};
    if (config_.architecture == Architecture::unet_mini)
        fb.output = UnetForward{config_, ctx}.run(input, guide);
    else
        fb.output = WdsrForward{config_, ctx}.run(input, guide, i_up);
    return fb;
}

PipelineResult forward_pipeline(ad::Tape& tape, const Network* net, Variant variant,
                                Task task, ad::NodeId input, ad::NodeId guide,
                                const GuidedFilterParams& params, bool trainable) {
    if (variant != Variant::only_gf && net == nullptr)
        throw config_error("variant " + to_string(variant) + " needs a network");
    if (net && net->config().architecture == Architecture::wdsr_mini &&
        task != Task::super_resolution)
        throw config_error("wdsr-mini supports the super-resolution task only");

    PipelineResult r;
    ad::NodeId processed = input;
    if (task == Task::super_resolution) {
        const Shape gs = tape.value(guide).shape();
        r.i_up = ad::bilinear_resize(tape, input, gs.h, gs.w);
        processed = r.i_up;
    }

    if (variant == Variant::only_gf) {
        r.guidance_map = guide;
        r.prediction = ad::guided_filter_node(tape, processed, guide, params);
        return r;
    }

    ad::NodeId net_input = net->config().architecture == Architecture::wdsr_mini
                               ? input
                               : processed;
    Network::ForwardBinding fb = net->forward(tape, net_input, guide, r.i_up, trainable);
    r.param_nodes = std::move(fb.param_nodes);
    r.guidance_map = fb.output;
    r.prediction = variant == Variant::with_gf
                       ? ad::guided_filter_node(tape, processed, fb.output, params)
                       : fb.output;
    return r;
}

Image2D run_inference(const Network* net, Variant variant, const ImagePair& pair,
                      const GuidedFilterParams& params) {
    ad::Tape tape;
    ad::NodeId input = tape.constant(Tensor::from_image(pair.input));
    ad::NodeId guide = tape.constant(Tensor::from_image(pair.guide));
    PipelineResult r = forward_pipeline(tape, net, variant, pair.meta.task, input,
                                        guide, params, false);
    return tape.value(r.prediction).to_image();
}

// --- config text -----------------------------------------------------------

std::string GeneratorConfig::canonical_text() const {
    std::ostringstream out;
    out << "net.activation = "
        << (activation == Activation::relu
                ? std::string("relu")
                : "leaky-relu:" + format_g9(leaky_slope))
        << '\n';
    out << "net.architecture = " << to_string(architecture) << '\n';
    out << "net.base_channels = " << base_channels << '\n';
    out << "net.encoder_depth = " << encoder_depth << '\n';
    out << "net.normalization = "
        << (normalization == Normalization::none ? "none" : "instance") << '\n';
    out << "net.residual_blocks = " << residual_blocks << '\n';
    out << "net.seed = " << seed << '\n';
    out << "net.upsample = "
        << (upsample == UpsampleMode::bilinear_conv ? "bilinear" : "pixel-shuffle")
        << '\n';
    return out.str();
}

GeneratorConfig GeneratorConfig::from_text(const std::string& text) {
    GeneratorConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 3);
        if (key == "net.activation") {
            if (value == "relu") {
                cfg.activation = Activation::relu;
            } else if (value.rfind("leaky-relu:", 0) == 0) {
                cfg.activation = Activation::leaky_relu;
                cfg.leaky_slope = std::stod(value.substr(11));
            } else {
                throw config_error("unknown activation '" + value + "'");
            }
        } else if (key == "net.architecture") {
            if (value == "unet-mini")
                cfg.architecture = Architecture::unet_mini;
            else if (value == "wdsr-mini")
                cfg.architecture = Architecture::wdsr_mini;
            else
                throw config_error("unknown architecture '" + value + "'");
        } else if (key == "net.base_channels") {
            cfg.base_channels = std::stoi(value);
        } else if (key == "net.encoder_depth") {
            cfg.encoder_depth = std::stoi(value);
        } else if (key == "net.normalization") {
            if (value == "none")
                cfg.normalization = Normalization::none;
            else if (value == "instance")
                cfg.normalization = Normalization::instance;
            else
                throw config_error("unknown normalization '" + value + "'");
        } else if (key == "net.residual_blocks") {
            cfg.residual_blocks = std::stoi(value);
        } else if (key == "net.seed") {
            cfg.seed = std::stoull(value);
        } else if (key == "net.upsample") {
            if (value == "bilinear")
                cfg.upsample = UpsampleMode::bilinear_conv;
            else if (value == "pixel-shuffle")
                cfg.upsample = UpsampleMode::pixel_shuffle;
            else
                throw config_error("unknown upsample mode '" + value + "'");
        }
    }
    validate(cfg);
    return cfg;
}

}  // namespace dgf
