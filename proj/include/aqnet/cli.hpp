#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqnet/model.hpp"
#include "aqnet/training.hpp"

namespace aqnet {

/// Everything a train/eval invocation needs.
struct RunConfig {
    ModelConfig model;
    TrainSettings train;
    std::string data;
    std::string out_dir = "runs";
    std::string thresholds_file;
    std::size_t runs = 1;
};

/// Layers, lowest precedence first: built-in defaults, the config file
/// (`{"model": {..}, "train": {..}, "data": .., "out_dir": .., ...}`), then
/// flag overrides in the same shape.
RunConfig resolve_run_config(const nlohmann::json& file, const nlohmann::json& flags);

nlohmann::json run_config_to_json(const RunConfig& c);

/// Directory name "run-<config fingerprint>-s<seed>".
std::string run_dir_name(const RunConfig& c);

/// Exit codes: 0 success, 1 validation/runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aqnet
