#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "aqnet/model.hpp"

namespace aqnet {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Model container layout:
///   8 bytes   magic "AQNETMDL"
///   u32 LE    format version
///   u64 LE    header length
///   header    JSON: config, fingerprint, norm_stats, target_scaling, tensor index
///   payload   named float32 little-endian parameter tensors
void save_model(AqNet& model, const std::filesystem::path& path);

AqNet load_model(const std::filesystem::path& path);

/// As load_model, but also rejects files whose config fingerprint differs
/// from the expected config.
AqNet load_model(const std::filesystem::path& path, const ModelConfig& expected);

/// Raw named tensors of a model container, without config checks.
std::map<std::string, nn::Tensor> load_tensor_bundle(const std::filesystem::path& path);

/// Replicates the channel mean of a [O, C, k, k] filter bank across `channels`
/// input channels.
nn::Tensor inflate_conv_channels(const nn::Tensor& weight, std::size_t channels);

/// Constructs a model and, when the config names a pretrained source, copies
/// the matching s2 backbone tensors from config.pretrained_path.
AqNet build_model(const ModelConfig& config, std::uint64_t seed, double dropout = 0.0);

}  // namespace aqnet
