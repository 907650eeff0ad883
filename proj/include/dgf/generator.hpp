#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dgf/autodiff.hpp"
#include "dgf/dataset.hpp"

namespace dgf {

enum class Architecture { unet_mini, wdsr_mini };
enum class UpsampleMode { bilinear_conv, pixel_shuffle };
enum class Activation { relu, leaky_relu };
enum class Normalization { none, instance };

// Miniature guidance-map generator: dual encoders with concatenation fusion
// (unet-mini) or a residual body with pixel-shuffle tail and a stride-2 guide
// pre-encoder (wdsr-mini).
struct GeneratorConfig {
    Architecture architecture = Architecture::unet_mini;
    int encoder_depth = 2;       // unet-mini levels
    int base_channels = 8;
    UpsampleMode upsample = UpsampleMode::bilinear_conv;
    Activation activation = Activation::relu;
    double leaky_slope = 0.1;
    Normalization normalization = Normalization::none;
    int residual_blocks = 4;     // wdsr-mini body
    std::uint64_t seed = 1;

    std::string canonical_text() const;
    static GeneratorConfig from_text(const std::string& text);
};

enum class Variant { with_gf, without_gf, only_gf };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(Architecture a);

class Network {
public:
    Network() = default;

    const GeneratorConfig& config() const { return config_; }
    std::size_t parameter_count() const;

    std::vector<std::pair<std::string, Tensor>>& parameters() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
    Tensor* find_parameter(const std::string& name);

    struct ForwardBinding {
        ad::NodeId output = -1;
        std::vector<ad::NodeId> param_nodes;  // aligned with parameters()
    };

    // Builds the forward graph on `tape`. `input` is the image to process
    // (I_up for unet SR, low-res I for wdsr) and `i_up` the upsampled input
    // for the wdsr residual path (-1 otherwise). With trainable=false the
    // parameters are bound as constants and receive no gradients.
    ForwardBinding forward(ad::Tape& tape, ad::NodeId input, ad::NodeId guide,
                           ad::NodeId i_up, bool trainable) const;

    friend Network build_generator(const GeneratorConfig&);

private:
    GeneratorConfig config_;
    std::vector<std::pair<std::string, Tensor>> params_;
};

// Deterministic He fan-in initialization from config.seed.
Network build_generator(const GeneratorConfig& config);

struct PipelineResult {
    ad::NodeId prediction = -1;
    ad::NodeId guidance_map = -1;  // -1 for withoutGF
    ad::NodeId i_up = -1;          // -1 for denoising
    std::vector<ad::NodeId> param_nodes;
};

// The full processing graph for one pair: builds I_up for SR, runs the
// generator (unless onlyGF), and applies the guided filter layer (unless
// withoutGF). `input`/`guide` are existing tape nodes so callers can inject
// residuals before the pipeline. net may be null only for onlyGF.
PipelineResult forward_pipeline(ad::Tape& tape, const Network* net, Variant variant,
                                Task task, ad::NodeId input, ad::NodeId guide,
                                const GuidedFilterParams& params, bool trainable);

// Convenience wrapper: constants in, predicted image out.
Image2D run_inference(const Network* net, Variant variant, const ImagePair& pair,
                      const GuidedFilterParams& params);

}  // namespace dgf
