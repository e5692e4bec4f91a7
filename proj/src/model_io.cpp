#include "aqnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "aqnet/error.hpp"
#include "aqnet/nn/adam.hpp"

namespace fs = std::filesystem;

namespace aqnet {

namespace {

constexpr char kMagic[8] = {'A', 'Q', 'N', 'E', 'T', 'M', 'D', 'L'};

template <typename T>
void put_le(std::ostream& out, T v) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) fail(ErrorKind::Format, "model file is truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
}

struct Container {
    nlohmann::json header;
    std::map<std::string, nn::Tensor> tensors;
};

Container read_container(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open model file " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        fail(ErrorKind::Format, path.string() + " is not a model file (bad magic)");
    }
    const auto version = get_le<std::uint32_t>(in);
    if (version != kModelFormatVersion) {
        fail(ErrorKind::Format, "model file version " + std::to_string(version) +
                                    " is not supported (expected " +
                                    std::to_string(kModelFormatVersion) + ")");
    }
    const auto header_len = get_le<std::uint64_t>(in);
    if (header_len > (1ULL << 30)) fail(ErrorKind::Format, "model header length is corrupt");
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) fail(ErrorKind::Format, "model file is truncated in its header");

    Container c;
    try {
        c.header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("model header is corrupt: ") + e.what());
    }

    const auto payload_start = in.tellg();
    in.seekg(0, std::ios::end);
    const auto payload_bytes = static_cast<std::uint64_t>(in.tellg() - payload_start);
    try {
        for (const auto& t : c.header.at("tensors")) {
            const auto name = t.at("name").get<std::string>();
            const auto shape = t.at("shape").get<std::vector<std::size_t>>();
            const auto offset = t.at("offset").get<std::uint64_t>();
            nn::Tensor tensor(shape);
            if ((offset + tensor.size()) * sizeof(float) > payload_bytes) {
                fail(ErrorKind::Format, "tensor '" + name + "' runs past the end of the file");
            }
            in.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(float)));
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                tensor[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
            }
            c.tensors.emplace(name, std::move(tensor));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("model tensor index is corrupt: ") + e.what());
    }
    return c;
}

AqNet model_from_container(const Container& c) {
    ModelConfig config;
    std::string stored_fp;
    try {
        config = c.header.at("config").get<ModelConfig>();
        stored_fp = c.header.at("fingerprint").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("model header is missing its config: ") + e.what());
    }
    if (config_fingerprint(config) != stored_fp) {
        fail(ErrorKind::Format, "model config fingerprint mismatch: header says " + stored_fp +
                                    ", config hashes to " + config_fingerprint(config));
    }

    AqNet model(config, 0);
    for (auto* p : model.parameters()) {
        auto it = c.tensors.find(p->name);
        if (it == c.tensors.end()) fail(ErrorKind::Format, "model file lacks tensor '" + p->name + "'");
        if (it->second.shape() != p->value.shape()) {
            fail(ErrorKind::Format, "tensor '" + p->name + "' has shape " + it->second.shape_string() +
                                        ", model expects " + p->value.shape_string());
        }
        p->value = it->second;
    }
    if (c.tensors.size() != model.parameters().size()) {
        fail(ErrorKind::Format, "model file holds tensors this config does not use");
    }

    const auto& ts = c.header.at("target_scaling");
    model.target_scaling.mean = ts.at("mean").get<std::vector<double>>();
    model.target_scaling.std = ts.at("std").get<std::vector<double>>();
    if (model.target_scaling.mean.size() != config.outputs.arity() ||
        model.target_scaling.std.size() != config.outputs.arity()) {
        fail(ErrorKind::Format, "target scaling does not match the output arity");
    }
    if (c.header.contains("norm_stats") && !c.header.at("norm_stats").is_null()) {
        model.norm_stats = c.header.at("norm_stats").get<NormStats>();
    }
    return model;
}

}  // namespace

void save_model(AqNet& model, const fs::path& path) {
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (auto* p : model.parameters()) {
        index.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}});
        offset += p->value.size();
    }
    nlohmann::json header{{"config", model.config()},
                          {"fingerprint", config_fingerprint(model.config())},
                          {"target_scaling",
                           {{"mean", model.target_scaling.mean}, {"std", model.target_scaling.std}}},
                          {"norm_stats", model.norm_stats ? nlohmann::json(*model.norm_stats)
                                                          : nlohmann::json(nullptr)},
                          {"dtype", "float32"},
                          {"tensors", index}};
    const std::string text = header.dump();

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write model file " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, kModelFormatVersion);
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (auto* p : model.parameters()) {
        for (double v : p->value.values()) {
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
    if (!out) fail(ErrorKind::Io, "failed writing model file " + path.string());
}

AqNet load_model(const fs::path& path) { return model_from_container(read_container(path)); }

AqNet load_model(const fs::path& path, const ModelConfig& expected) {
    Container c = read_container(path);
    const std::string stored = c.header.value("fingerprint", std::string());
    const std::string want = config_fingerprint(expected);
    if (stored != want) {
        fail(ErrorKind::Format, "model file " + path.string() + " has config fingerprint " + stored +
                                    ", expected " + want);
    }
    return model_from_container(c);
}

std::map<std::string, nn::Tensor> load_tensor_bundle(const fs::path& path) {
    return read_container(path).tensors;
}

nn::Tensor inflate_conv_channels(const nn::Tensor& weight, std::size_t channels) {
    if (weight.rank() != 4) fail(ErrorKind::Validation, "conv weights must be rank 4");
    const std::size_t O = weight.dim(0), C = weight.dim(1), K = weight.dim(2) * weight.dim(3);
    nn::Tensor out({O, channels, weight.dim(2), weight.dim(3)});
    for (std::size_t o = 0; o < O; ++o) {
        for (std::size_t k = 0; k < K; ++k) {
            double sum = 0.0;
            for (std::size_t c = 0; c < C; ++c) sum += weight[(o * C + c) * K + k];
            const double mean = sum / static_cast<double>(C);
            for (std::size_t c = 0; c < channels; ++c) out[(o * channels + c) * K + k] = mean;
        }
    }
    return out;
}

AqNet build_model(const ModelConfig& config, std::uint64_t seed, double dropout) {
    AqNet model(config, seed, dropout);
    if (config.pretrained_source == "none") return model;
    if (config.pretrained_path.empty()) {
        fail(ErrorKind::Validation, "pretrained_source '" + config.pretrained_source +
                                        "' needs pretrained_path pointing at a weights container");
    }
    const auto bundle = load_tensor_bundle(config.pretrained_path);
    std::size_t copied = 0;
    for (auto* p : model.parameters("s2.")) {
        auto it = bundle.find(p->name);
        if (it == bundle.end()) continue;
        nn::Tensor w = it->second;
        if (p->name == "s2.conv1.weight" && w.rank() == 4 && w.dim(1) != p->value.dim(1)) {
            w = inflate_conv_channels(w, p->value.dim(1));
        }
        if (w.shape() != p->value.shape()) {
            fail(ErrorKind::Format, "pretrained tensor '" + p->name + "' has shape " +
                                        w.shape_string() + ", model expects " +
                                        p->value.shape_string());
        }
        p->value = std::move(w);
        nn::round_to_float32(p->value);
        ++copied;
    }
    if (copied == 0) {
        fail(ErrorKind::Format, "no s2 backbone tensors found in " + config.pretrained_path);
    }
    return model;
}

}  // namespace aqnet
