#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqnet/station.hpp"
#include "aqnet/tabular.hpp"

namespace aqnet {

inline constexpr std::size_t kS2Bands = 12;
inline constexpr std::size_t kPatchSide = 120;
inline constexpr std::size_t kPatchPixels = kPatchSide * kPatchSide;

inline constexpr const char* kManifestFile = "manifest.csv";
inline constexpr const char* kManifestHeader =
    "station_id,country,lon,lat,altitude,pop_density,area_type,station_type,no2,o3,pm10,"
    "s2_file,s5p_file";

/// Paired image tensors for one station. s2 is band-major C order.
struct SamplePatch {
    std::vector<float> s2 = std::vector<float>(kS2Bands * kPatchPixels, 0.0f);
    std::vector<float> s5p = std::vector<float>(kPatchPixels, 0.0f);

    float s2_at(std::size_t band, std::size_t row, std::size_t col) const {
        return s2[band * kPatchPixels + row * kPatchSide + col];
    }
};

/// Throws unless shapes are exact, all values finite and s2 non-negative.
void validate_patch(const SamplePatch& patch);

struct NormStats {
    std::array<double, kS2Bands> s2_mean{};
    std::array<double, kS2Bands> s2_std{};
    double s5p_mean = 0.0;
    double s5p_std = 1.0;
    double altitude_mean = 0.0;
    double altitude_std = 1.0;
    double pop_density_mean = 0.0;
    double pop_density_std = 1.0;

    bool operator==(const NormStats&) const = default;
};

inline constexpr double kStdFloor = 1e-6;

void to_json(nlohmann::json& j, const NormStats& s);
void from_json(const nlohmann::json& j, NormStats& s);

struct ManifestEntry {
    StationRecord record;
    std::string s2_file;   // relative to the manifest root
    std::string s5p_file;
};

class DatasetManifest {
public:
    DatasetManifest() = default;
    DatasetManifest(std::filesystem::path root, std::vector<ManifestEntry> entries);

    const std::filesystem::path& root() const { return root_; }
    const std::vector<ManifestEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    bool contains(const std::string& station_id) const;
    const ManifestEntry& entry(const std::string& station_id) const;

    std::vector<StationRecord> records() const;
    std::vector<std::string> station_ids() const;

    std::optional<NormStats> norm_stats;

private:
    std::filesystem::path root_;
    std::vector<ManifestEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Accepts either the dataset directory or the manifest CSV itself.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes manifest.csv under manifest.root().
void write_manifest(const DatasetManifest& manifest);

SamplePatch load_patch(const std::string& station_id, const DatasetManifest& manifest);

/// Writes `<stem>.s2.bin`/`<stem>.s5p.bin` with JSON sidecars into dir.
/// Returns the two file names relative to dir.
std::pair<std::string, std::string> write_patch(const std::filesystem::path& dir,
                                                const std::string& stem,
                                                const SamplePatch& patch);

/// Low-level float32 array file helpers (little-endian, C order, JSON sidecar).
void write_array_file(const std::filesystem::path& file, std::span<const float> values,
                      const std::vector<std::size_t>& shape);
std::vector<float> read_array_file(const std::filesystem::path& file,
                                   const std::vector<std::size_t>& expected_shape);

struct SplitAssignment {
    std::uint64_t seed = 0;
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// 2:1:1 split: |val| = |test| = floor(N/4), remainder to train.
SplitAssignment split_dataset(const DatasetManifest& manifest, std::uint64_t seed);
SplitAssignment split_ids(std::vector<std::string> ids, std::uint64_t seed);

NormStats compute_norm_stats(const DatasetManifest& manifest, const SplitAssignment& split);

struct NormalizedSample {
    std::vector<float> s2;
    std::vector<float> s5p;
    TabularVector tabular;
};

NormalizedSample normalize_sample(const SamplePatch& patch, const StationRecord& record,
                                  const NormStats& stats);

/// Inverse of normalize_sample for the image arrays and numeric tabular fields.
SamplePatch denormalize_patch(const NormalizedSample& sample, const NormStats& stats);
TabularVector denormalize_tabular(const TabularVector& scaled, const NormStats& stats);

}  // namespace aqnet
