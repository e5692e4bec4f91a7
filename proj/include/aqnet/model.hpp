#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqnet/dataset.hpp"
#include "aqnet/nn/layers.hpp"
#include "aqnet/pollutant.hpp"

namespace aqnet {

/// Either all three pollutants (NO2, O3, PM10 order) or one of them.
struct OutputSpec {
    bool triple = true;
    Pollutant single = Pollutant::NO2;

    std::size_t arity() const { return triple ? 3 : 1; }
    std::vector<Pollutant> pollutants() const;
    std::string to_string() const;  // "triple" | "single:<pollutant>"
    static OutputSpec parse(std::string_view text);

    bool operator==(const OutputSpec&) const = default;
};

struct ModelConfig {
    std::string preset = "default";

    // Sentinel-2 image backbone. "small_cnn" is native; the named backbones
    // ("mobilenet_v3_large", "resnet50") are width-compatible stand-ins built
    // from the same conv stack and projected to the named feature width.
    std::string s2_backbone = "small_cnn";
    std::array<std::size_t, 3> s2_channels{8, 16, 32};
    std::size_t s2_stem_stride = 2;
    std::size_t s2_feature_dim = 64;

    // Sentinel-5P backbone: 2 convs, maxpool, fully connected.
    std::array<std::size_t, 2> s5p_channels{8, 16};
    std::size_t s5p_pool = 4;
    std::size_t s5p_feature_dim = 128;

    std::size_t tabular_hidden_dim = 64;
    std::size_t tabular_feature_dim = 32;

    std::array<std::size_t, 2> satellite_head_dims{256, 128};
    // (hidden width, output arity)
    std::array<std::size_t, 2> regression_head_dims{64, 3};

    OutputSpec outputs;
    bool use_tabular = true;

    std::string pretrained_source = "none";  // none | generic-image-corpus
    std::string pretrained_path;

    std::size_t patch_size = kPatchSide;

    /// Sets outputs and keeps regression_head_dims[1] in step.
    void set_outputs(OutputSpec spec);

    /// Throws Error(Validation) on any inconsistent field.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Canonical 16-hex-digit fingerprint of the config JSON.
std::string config_fingerprint(const ModelConfig& c);

/// default | tiny | aqnet | aqnet-single | aqnet-no-tabular | baseline
ModelConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

struct ModelWidths {
    std::size_t s2_features = 0;
    std::size_t s5p_features = 0;
    std::size_t fused_satellite = 0;   // input of the satellite head
    std::size_t satellite_head_out = 0;
    std::size_t tabular_features = 0;  // 0 when tabular input is disabled
    std::size_t regression_input = 0;
    std::size_t outputs = 0;
};

ModelWidths expected_widths(const ModelConfig& c);

/// Standardization applied to regression targets; predictions are mapped
/// back to µg/m³ with value * std + mean.
struct TargetScaling {
    std::vector<double> mean;
    std::vector<double> std;

    static TargetScaling identity(std::size_t k);
};

struct ModelInputs {
    nn::Tensor s2;       // [B, 12, P, P]
    nn::Tensor s5p;      // [B, 1, P, P]
    nn::Tensor tabular;  // [B, 8]; left empty when the model ignores it
};

class AqNet {
public:
    AqNet(ModelConfig config, std::uint64_t seed, double dropout = 0.0);

    AqNet(AqNet&&) = default;
    AqNet& operator=(AqNet&&) = default;

    const ModelConfig& config() const { return config_; }
    ModelWidths widths() const { return widths_; }
    /// Widths read back from the constructed parameter tensors.
    ModelWidths measured_widths();
    std::vector<Pollutant> output_pollutants() const { return config_.outputs.pollutants(); }

    /// Per-backbone feature extractors.
    nn::Tensor forward_s2(const nn::Tensor& s2, const nn::ForwardMode& mode) const;
    nn::Tensor forward_s5p(const nn::Tensor& s5p, const nn::ForwardMode& mode) const;
    nn::Tensor forward_tabular(const nn::Tensor& tabular, const nn::ForwardMode& mode) const;

    /// Network output in standardized target units, [B, K].
    nn::Tensor forward(const ModelInputs& inputs, const nn::ForwardMode& mode) const;

    /// Backpropagates d(loss)/d(output) of the last training-mode forward().
    void backward(const nn::Tensor& grad_out);

    /// Evaluation-mode predictions in µg/m³, [B, K].
    nn::Tensor predict(const ModelInputs& inputs) const;

    std::vector<nn::Parameter*> parameters();
    /// Parameters whose name starts with prefix, e.g. "s2." or "tabular.".
    std::vector<nn::Parameter*> parameters(std::string_view prefix);

    nn::Sequential& s2_backbone() { return s2_; }
    nn::Sequential& s5p_backbone() { return s5p_; }
    nn::Sequential& tabular_backbone() { return tabular_; }

    std::vector<std::string> describe() const;

    TargetScaling target_scaling;
    std::optional<NormStats> norm_stats;

private:
    void check_inputs(const ModelInputs& inputs) const;

    ModelConfig config_;
    ModelWidths widths_;
    nn::Sequential s2_, s5p_, tabular_, satellite_head_, regression_head_;
};

/// Packs normalized samples into network inputs.
ModelInputs make_inputs(const std::vector<const NormalizedSample*>& samples, bool with_tabular);

}  // namespace aqnet
