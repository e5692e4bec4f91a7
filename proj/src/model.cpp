#include "aqnet/model.hpp"

#include <algorithm>
#include <cstdio>

#include "aqnet/error.hpp"
#include "aqnet/nn/adam.hpp"

namespace aqnet {

using nn::Tensor;

namespace {

struct NamedBackbone {
    const char* name;
    std::size_t feature_dim;
};

// Canonical pooled-feature widths of the named backbones.
constexpr NamedBackbone kNamedBackbones[] = {
    {"small_cnn", 64},
    {"mobilenet_v3_large", 576},
    {"resnet50", 2048},
};

bool known_backbone(std::string_view name) {
    return std::any_of(std::begin(kNamedBackbones), std::end(kNamedBackbones),
                       [&](const NamedBackbone& b) { return name == b.name; });
}

void require_positive(std::size_t v, const char* field) {
    if (v == 0) fail(ErrorKind::Validation, std::string("model config: ") + field + " must be >= 1");
}

std::size_t conv_side(std::size_t in, std::size_t stride) {
    // kernel 3, padding 1
    return (in + 2 - 3) / stride + 1;
}

std::size_t s2_final_side(const ModelConfig& c) {
    std::size_t side = conv_side(c.patch_size, c.s2_stem_stride) / 2;
    side = conv_side(side, 1) / 2;
    side = conv_side(side, 1) / 2;
    return side;
}

std::size_t s5p_final_side(const ModelConfig& c) {
    return conv_side(conv_side(c.patch_size, 2), 2) / c.s5p_pool;
}

}  // namespace

std::vector<Pollutant> OutputSpec::pollutants() const {
    if (triple) return {kAllPollutants.begin(), kAllPollutants.end()};
    return {single};
}

std::string OutputSpec::to_string() const {
    return triple ? std::string("triple") : "single:" + std::string(aqnet::to_string(single));
}

OutputSpec OutputSpec::parse(std::string_view text) {
    OutputSpec spec;
    if (text == "triple") return spec;
    constexpr std::string_view prefix = "single:";
    if (text.substr(0, prefix.size()) == prefix) {
        spec.triple = false;
        spec.single = parse_pollutant(text.substr(prefix.size()));
        return spec;
    }
    if (text == "single") {
        spec.triple = false;
        return spec;
    }
    fail(ErrorKind::Validation, "outputs must be 'triple' or 'single:<pollutant>', got '" +
                                    std::string(text) + "'");
}

void ModelConfig::set_outputs(OutputSpec spec) {
    outputs = spec;
    regression_head_dims[1] = spec.arity();
}

void ModelConfig::validate() const {
    if (!known_backbone(s2_backbone)) {
        fail(ErrorKind::Validation, "model config: unknown s2_backbone '" + s2_backbone + "'");
    }
    for (auto c : s2_channels) require_positive(c, "s2_channels");
    require_positive(s2_stem_stride, "s2_stem_stride");
    require_positive(s2_feature_dim, "s2_feature_dim");
    for (auto c : s5p_channels) require_positive(c, "s5p_channels");
    require_positive(s5p_pool, "s5p_pool");
    require_positive(s5p_feature_dim, "s5p_feature_dim");
    require_positive(tabular_hidden_dim, "tabular_hidden_dim");
    require_positive(tabular_feature_dim, "tabular_feature_dim");
    for (auto d : satellite_head_dims) require_positive(d, "satellite_head_dims");
    for (auto d : regression_head_dims) require_positive(d, "regression_head_dims");
    if (regression_head_dims[1] != outputs.arity()) {
        fail(ErrorKind::Validation,
             "model config: regression_head_dims[1] = " + std::to_string(regression_head_dims[1]) +
                 " does not match output arity " + std::to_string(outputs.arity()));
    }
    if (pretrained_source != "none" && pretrained_source != "generic-image-corpus") {
        fail(ErrorKind::Validation, "model config: unknown pretrained_source '" + pretrained_source + "'");
    }
    if (s2_final_side(*this) == 0 || s5p_final_side(*this) == 0) {
        fail(ErrorKind::Validation, "model config: patch_size " + std::to_string(patch_size) +
                                        " is too small for the backbone strides");
    }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"preset", c.preset},
                       {"s2_backbone", c.s2_backbone},
                       {"s2_channels", c.s2_channels},
                       {"s2_stem_stride", c.s2_stem_stride},
                       {"s2_feature_dim", c.s2_feature_dim},
                       {"s5p_channels", c.s5p_channels},
                       {"s5p_pool", c.s5p_pool},
                       {"s5p_feature_dim", c.s5p_feature_dim},
                       {"tabular_hidden_dim", c.tabular_hidden_dim},
                       {"tabular_feature_dim", c.tabular_feature_dim},
                       {"satellite_head_dims", c.satellite_head_dims},
                       {"regression_head_dims", c.regression_head_dims},
                       {"outputs", c.outputs.to_string()},
                       {"use_tabular", c.use_tabular},
                       {"pretrained_source", c.pretrained_source},
                       {"pretrained_path", c.pretrained_path},
                       {"patch_size", c.patch_size}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    // Start from the named preset (if any) so partial configs fill in sensibly.
    ModelConfig base = preset_config(j.value("preset", std::string("default")));
    c = base;
    c.s2_backbone = j.value("s2_backbone", base.s2_backbone);
    c.s2_channels = j.value("s2_channels", base.s2_channels);
    c.s2_stem_stride = j.value("s2_stem_stride", base.s2_stem_stride);
    c.s2_feature_dim = j.value("s2_feature_dim", base.s2_feature_dim);
    c.s5p_channels = j.value("s5p_channels", base.s5p_channels);
    c.s5p_pool = j.value("s5p_pool", base.s5p_pool);
    c.s5p_feature_dim = j.value("s5p_feature_dim", base.s5p_feature_dim);
    c.tabular_hidden_dim = j.value("tabular_hidden_dim", base.tabular_hidden_dim);
    c.tabular_feature_dim = j.value("tabular_feature_dim", base.tabular_feature_dim);
    c.satellite_head_dims = j.value("satellite_head_dims", base.satellite_head_dims);
    if (j.contains("outputs")) c.set_outputs(OutputSpec::parse(j.at("outputs").get<std::string>()));
    if (j.contains("regression_head_dims")) {
        c.regression_head_dims = j.at("regression_head_dims").get<std::array<std::size_t, 2>>();
    }
    c.use_tabular = j.value("use_tabular", base.use_tabular);
    c.pretrained_source = j.value("pretrained_source", base.pretrained_source);
    c.pretrained_path = j.value("pretrained_path", base.pretrained_path);
    c.patch_size = j.value("patch_size", base.patch_size);
}

std::string config_fingerprint(const ModelConfig& c) {
    const std::string text = nlohmann::json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ModelConfig preset_config(std::string_view name) {
    ModelConfig c;
    c.preset = std::string(name);
    if (name == "default") return c;
    if (name == "tiny") {
        c.s2_channels = {4, 4, 4};
        c.s2_feature_dim = 8;
        c.s5p_channels = {2, 4};
        c.s5p_feature_dim = 16;
        c.tabular_hidden_dim = 16;
        c.tabular_feature_dim = 8;
        c.satellite_head_dims = {16, 16};
        c.regression_head_dims = {16, 3};
        return c;
    }
    if (name == "aqnet" || name == "aqnet-single" || name == "aqnet-no-tabular") {
        c.s2_backbone = "mobilenet_v3_large";
        c.s2_feature_dim = 576;
        if (name != "aqnet") c.set_outputs(OutputSpec{false, Pollutant::NO2});
        if (name == "aqnet-no-tabular") c.use_tabular = false;
        return c;
    }
    if (name == "baseline") {
        // ResNet50-class image stream + 128-wide S5P stream, no tabular input
        c.s2_backbone = "resnet50";
        c.s2_feature_dim = 2048;
        c.s5p_feature_dim = 128;
        c.use_tabular = false;
        c.set_outputs(OutputSpec{false, Pollutant::NO2});
        return c;
    }
    fail(ErrorKind::Validation, "unknown model preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
    return {"default", "tiny", "aqnet", "aqnet-single", "aqnet-no-tabular", "baseline"};
}

ModelWidths expected_widths(const ModelConfig& c) {
    ModelWidths w;
    w.s2_features = c.s2_feature_dim;
    w.s5p_features = c.s5p_feature_dim;
    w.fused_satellite = c.s2_feature_dim + c.s5p_feature_dim;
    w.satellite_head_out = c.satellite_head_dims[1];
    w.tabular_features = c.use_tabular ? c.tabular_feature_dim : 0;
    w.regression_input = w.satellite_head_out + w.tabular_features;
    w.outputs = c.outputs.arity();
    return w;
}

TargetScaling TargetScaling::identity(std::size_t k) {
    return {std::vector<double>(k, 0.0), std::vector<double>(k, 1.0)};
}

AqNet::AqNet(ModelConfig config, std::uint64_t seed, double dropout)
    : target_scaling(TargetScaling::identity(config.outputs.arity())), config_(std::move(config)) {
    config_.validate();
    if (dropout < 0.0 || dropout >= 1.0) fail(ErrorKind::Validation, "dropout must lie in [0, 1)");
    const auto& c = config_;

    auto& s2_stem = s2_.add<nn::Conv2d>("s2.conv1", kS2Bands, c.s2_channels[0], 3, c.s2_stem_stride, 1);
    s2_stem.set_input_grad(false);
    s2_.add<nn::Relu>();
    s2_.add<nn::MaxPool2d>(2);
    s2_.add<nn::Conv2d>("s2.conv2", c.s2_channels[0], c.s2_channels[1], 3, 1, 1);
    s2_.add<nn::Relu>();
    s2_.add<nn::MaxPool2d>(2);
    s2_.add<nn::Conv2d>("s2.conv3", c.s2_channels[1], c.s2_channels[2], 3, 1, 1);
    s2_.add<nn::Relu>();
    s2_.add<nn::MaxPool2d>(2);
    s2_.add<nn::GlobalAvgPool>();
    s2_.add<nn::Linear>("s2.fc", c.s2_channels[2], c.s2_feature_dim);
    s2_.add<nn::Relu>();

    auto& s5p_stem = s5p_.add<nn::Conv2d>("s5p.conv1", 1, c.s5p_channels[0], 3, 2, 1);
    s5p_stem.set_input_grad(false);
    s5p_.add<nn::Relu>();
    s5p_.add<nn::Conv2d>("s5p.conv2", c.s5p_channels[0], c.s5p_channels[1], 3, 2, 1);
    s5p_.add<nn::Relu>();
    s5p_.add<nn::MaxPool2d>(c.s5p_pool);
    s5p_.add<nn::Flatten>();
    const std::size_t side = s5p_final_side(c);
    s5p_.add<nn::Linear>("s5p.fc", c.s5p_channels[1] * side * side, c.s5p_feature_dim);
    s5p_.add<nn::Relu>();

    if (c.use_tabular) {
        tabular_.add<nn::Linear>("tabular.fc1", kTabularWidth, c.tabular_hidden_dim);
        tabular_.add<nn::Relu>();
        tabular_.add<nn::Linear>("tabular.fc2", c.tabular_hidden_dim, c.tabular_feature_dim);
        tabular_.add<nn::Relu>();
    }

    widths_ = expected_widths(c);

    satellite_head_.add<nn::Linear>("satellite_head.fc1", widths_.fused_satellite,
                                    c.satellite_head_dims[0]);
    satellite_head_.add<nn::Relu>();
    if (dropout > 0.0) satellite_head_.add<nn::Dropout>(dropout);
    satellite_head_.add<nn::Linear>("satellite_head.fc2", c.satellite_head_dims[0],
                                    c.satellite_head_dims[1]);

    regression_head_.add<nn::Linear>("regression_head.fc1", widths_.regression_input,
                                     c.regression_head_dims[0]);
    regression_head_.add<nn::Relu>();
    if (dropout > 0.0) regression_head_.add<nn::Dropout>(dropout);
    regression_head_.add<nn::Linear>("regression_head.fc2", c.regression_head_dims[0],
                                     c.regression_head_dims[1]);

    Rng rng(derive_seed(seed, 0x1417));
    s2_.initialize(rng);
    s5p_.initialize(rng);
    tabular_.initialize(rng);
    satellite_head_.initialize(rng);
    regression_head_.initialize(rng);
    for (auto* p : parameters()) nn::round_to_float32(p->value);
}

Tensor AqNet::forward_s2(const Tensor& s2, const nn::ForwardMode& mode) const {
    if (s2.rank() != 4 || s2.dim(1) != kS2Bands || s2.dim(2) != config_.patch_size ||
        s2.dim(3) != config_.patch_size) {
        fail(ErrorKind::Validation, "s2 batch must be [B,12," + std::to_string(config_.patch_size) +
                                        "," + std::to_string(config_.patch_size) + "], got " +
                                        s2.shape_string());
    }
    return s2_.forward(s2, mode);
}

Tensor AqNet::forward_s5p(const Tensor& s5p, const nn::ForwardMode& mode) const {
    if (s5p.rank() != 4 || s5p.dim(1) != 1 || s5p.dim(2) != config_.patch_size ||
        s5p.dim(3) != config_.patch_size) {
        fail(ErrorKind::Validation, "s5p batch must be [B,1," + std::to_string(config_.patch_size) +
                                        "," + std::to_string(config_.patch_size) + "], got " +
                                        s5p.shape_string());
    }
    return s5p_.forward(s5p, mode);
}

Tensor AqNet::forward_tabular(const Tensor& tabular, const nn::ForwardMode& mode) const {
    if (!config_.use_tabular) fail(ErrorKind::Validation, "model was built without a tabular backbone");
    if (tabular.rank() != 2 || tabular.dim(1) != kTabularWidth) {
        fail(ErrorKind::Validation, "tabular batch must be [B,8], got " + tabular.shape_string());
    }
    return tabular_.forward(tabular, mode);
}

void AqNet::check_inputs(const ModelInputs& in) const {
    if (in.s2.rank() == 0 || in.s5p.rank() == 0) fail(ErrorKind::Validation, "missing image inputs");
    const std::size_t b = in.s2.dim(0);
    if (in.s5p.dim(0) != b) fail(ErrorKind::Validation, "s2 and s5p batch sizes differ");
    if (config_.use_tabular) {
        if (in.tabular.rank() == 0) fail(ErrorKind::Validation, "model expects a tabular batch");
        if (in.tabular.dim(0) != b) fail(ErrorKind::Validation, "tabular batch size differs");
    }
}

Tensor AqNet::forward(const ModelInputs& in, const nn::ForwardMode& mode) const {
    check_inputs(in);
    Tensor fused = nn::concat_features(forward_s2(in.s2, mode), forward_s5p(in.s5p, mode));
    Tensor z = satellite_head_.forward(fused, mode);
    if (config_.use_tabular) z = nn::concat_features(z, forward_tabular(in.tabular, mode));
    return regression_head_.forward(z, mode);
}

void AqNet::backward(const Tensor& grad_out) {
    Tensor dz = regression_head_.backward(grad_out);
    Tensor dsat;
    if (config_.use_tabular) {
        auto [left, right] = nn::split_features(dz, widths_.satellite_head_out);
        tabular_.backward(right);
        dsat = std::move(left);
    } else {
        dsat = std::move(dz);
    }
    Tensor dfused = satellite_head_.backward(dsat);
    auto [d2, d5] = nn::split_features(dfused, widths_.s2_features);
    s2_.backward(d2);
    s5p_.backward(d5);
}

Tensor AqNet::predict(const ModelInputs& inputs) const {
    Tensor out = forward(inputs, nn::ForwardMode{});
    const std::size_t k = out.dim(1);
    for (std::size_t b = 0; b < out.dim(0); ++b) {
        for (std::size_t j = 0; j < k; ++j) {
            double& v = out[b * k + j];
            v = v * target_scaling.std[j] + target_scaling.mean[j];
        }
    }
    return out;
}

std::vector<nn::Parameter*> AqNet::parameters() {
    std::vector<nn::Parameter*> out;
    s2_.collect_parameters(out);
    s5p_.collect_parameters(out);
    tabular_.collect_parameters(out);
    satellite_head_.collect_parameters(out);
    regression_head_.collect_parameters(out);
    return out;
}

std::vector<nn::Parameter*> AqNet::parameters(std::string_view prefix) {
    std::vector<nn::Parameter*> out;
    for (auto* p : parameters()) {
        if (std::string_view(p->name).substr(0, prefix.size()) == prefix) out.push_back(p);
    }
    return out;
}

ModelWidths AqNet::measured_widths() {
    auto rows = [&](const std::string& name) -> std::size_t {
        for (auto* p : parameters()) {
            if (p->name == name) return p->value.dim(0);
        }
        return 0;
    };
    auto cols = [&](const std::string& name) -> std::size_t {
        for (auto* p : parameters()) {
            if (p->name == name) return p->value.dim(1);
        }
        return 0;
    };
    ModelWidths w;
    w.s2_features = rows("s2.fc.weight");
    w.s5p_features = rows("s5p.fc.weight");
    w.fused_satellite = cols("satellite_head.fc1.weight");
    w.satellite_head_out = rows("satellite_head.fc2.weight");
    w.tabular_features = rows("tabular.fc2.weight");
    w.regression_input = cols("regression_head.fc1.weight");
    w.outputs = rows("regression_head.fc2.weight");
    return w;
}

std::vector<std::string> AqNet::describe() const {
    std::vector<std::string> out;
    auto add = [&](const char* name, const nn::Sequential& seq) {
        std::string line = std::string(name) + ":";
        for (const auto& d : seq.describe()) line += " " + d;
        out.push_back(line);
    };
    add("s2", s2_);
    add("s5p", s5p_);
    if (config_.use_tabular) add("tabular", tabular_);
    add("satellite_head", satellite_head_);
    add("regression_head", regression_head_);
    return out;
}

ModelInputs make_inputs(const std::vector<const NormalizedSample*>& samples, bool with_tabular) {
    const std::size_t b = samples.size();
    ModelInputs in;
    in.s2 = Tensor({b, kS2Bands, kPatchSide, kPatchSide});
    in.s5p = Tensor({b, 1, kPatchSide, kPatchSide});
    if (with_tabular) in.tabular = Tensor({b, kTabularWidth});
    for (std::size_t i = 0; i < b; ++i) {
        const auto& s = *samples[i];
        std::copy(s.s2.begin(), s.s2.end(), in.s2.data() + i * kS2Bands * kPatchPixels);
        std::copy(s.s5p.begin(), s.s5p.end(), in.s5p.data() + i * kPatchPixels);
        if (with_tabular) {
            std::copy(s.tabular.values.begin(), s.tabular.values.end(),
                      in.tabular.data() + i * kTabularWidth);
        }
    }
    return in;
}

}  // namespace aqnet
