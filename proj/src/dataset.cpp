#include "aqnet/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "aqnet/error.hpp"
#include "aqnet/rng.hpp"

namespace fs = std::filesystem;

namespace aqnet {

namespace {

constexpr std::array<const char*, kS2Bands> kS2BandNames{
    "B01", "B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B09", "B11", "B12"};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_number(const std::string& text, std::size_t row, const char* field) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty()) {
        fail(ErrorKind::Format, "manifest row " + std::to_string(row) + " field " + field +
                                    ": '" + text + "' is not a number");
    }
    return value;
}

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
}

fs::path sidecar_path(const fs::path& bin) {
    fs::path p = bin;
    p.replace_extension(".json");
    return p;
}

}  // namespace

void validate_patch(const SamplePatch& patch) {
    if (patch.s2.size() != kS2Bands * kPatchPixels) {
        fail(ErrorKind::Validation, "s2 patch must hold 12x120x120 values");
    }
    if (patch.s5p.size() != kPatchPixels) {
        fail(ErrorKind::Validation, "s5p patch must hold 120x120 values");
    }
    for (float v : patch.s2) {
        if (!std::isfinite(v)) fail(ErrorKind::Numeric, "s2 patch holds a non-finite value");
        if (v < 0.0f) fail(ErrorKind::Validation, "s2 patch holds a negative reflectance");
    }
    for (float v : patch.s5p) {
        if (!std::isfinite(v)) fail(ErrorKind::Numeric, "s5p patch holds a non-finite value");
    }
}

void to_json(nlohmann::json& j, const NormStats& s) {
    j = nlohmann::json{{"s2_mean", s.s2_mean},
                       {"s2_std", s.s2_std},
                       {"s5p_mean", s.s5p_mean},
                       {"s5p_std", s.s5p_std},
                       {"altitude_mean", s.altitude_mean},
                       {"altitude_std", s.altitude_std},
                       {"pop_density_mean", s.pop_density_mean},
                       {"pop_density_std", s.pop_density_std}};
}

void from_json(const nlohmann::json& j, NormStats& s) {
    j.at("s2_mean").get_to(s.s2_mean);
    j.at("s2_std").get_to(s.s2_std);
    j.at("s5p_mean").get_to(s.s5p_mean);
    j.at("s5p_std").get_to(s.s5p_std);
    j.at("altitude_mean").get_to(s.altitude_mean);
    j.at("altitude_std").get_to(s.altitude_std);
    j.at("pop_density_mean").get_to(s.pop_density_mean);
    j.at("pop_density_std").get_to(s.pop_density_std);
}

DatasetManifest::DatasetManifest(fs::path root, std::vector<ManifestEntry> entries)
    : root_(std::move(root)), entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& id = entries_[i].record.station_id;
        if (!index_.emplace(id, i).second) {
            fail(ErrorKind::Validation, "duplicate station_id '" + id + "'");
        }
    }
}

bool DatasetManifest::contains(const std::string& station_id) const {
    return index_.count(station_id) != 0;
}

const ManifestEntry& DatasetManifest::entry(const std::string& station_id) const {
    auto it = index_.find(station_id);
    if (it == index_.end()) {
        fail(ErrorKind::Validation, "station '" + station_id + "' is not in the manifest");
    }
    return entries_[it->second];
}

std::vector<StationRecord> DatasetManifest::records() const {
    std::vector<StationRecord> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.record);
    return out;
}

std::vector<std::string> DatasetManifest::station_ids() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.record.station_id);
    return out;
}

DatasetManifest load_manifest(const fs::path& path) {
    fs::path file = path;
    if (fs::is_directory(path)) file = path / kManifestFile;
    std::ifstream in(file);
    if (!in) fail(ErrorKind::Io, "cannot open manifest " + file.string());

    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Format, "manifest " + file.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) {
        fail(ErrorKind::Format, "manifest header must be exactly '" +
                                    std::string(kManifestHeader) + "'");
    }

    const fs::path root = file.parent_path();
    std::vector<ManifestEntry> entries;
    std::unordered_set<std::string> seen;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto f = split_csv_line(line);
        if (f.size() != 13) {
            fail(ErrorKind::Format, "manifest row " + std::to_string(row) + ": expected 13 fields, got " +
                                        std::to_string(f.size()));
        }
        ManifestEntry e;
        auto& r = e.record;
        r.station_id = f[0];
        if (r.station_id.empty()) {
            fail(ErrorKind::Format, "manifest row " + std::to_string(row) + " field station_id: empty");
        }
        if (!seen.insert(r.station_id).second) {
            fail(ErrorKind::Validation, "manifest row " + std::to_string(row) +
                                            ": duplicate station_id '" + r.station_id + "'");
        }
        r.country = f[1];
        r.lon = parse_number(f[2], row, "lon");
        r.lat = parse_number(f[3], row, "lat");
        r.altitude = parse_number(f[4], row, "altitude");
        r.pop_density = parse_number(f[5], row, "pop_density");
        try {
            r.area_type = parse_area_type(f[6]);
        } catch (const Error& err) {
            fail(ErrorKind::Validation,
                 "manifest row " + std::to_string(row) + " field area_type: " + err.what());
        }
        try {
            r.station_type = parse_station_type(f[7]);
        } catch (const Error& err) {
            fail(ErrorKind::Validation,
                 "manifest row " + std::to_string(row) + " field station_type: " + err.what());
        }
        const char* names[3] = {"no2", "o3", "pm10"};
        for (std::size_t k = 0; k < 3; ++k) {
            if (f[8 + k].empty()) {
                fail(ErrorKind::Validation, "manifest row " + std::to_string(row) + " field " +
                                                names[k] + ": missing pollutant value");
            }
            r.measured[k] = parse_number(f[8 + k], row, names[k]);
        }
        try {
            validate_record(r);
        } catch (const Error& err) {
            fail(ErrorKind::Validation, "manifest row " + std::to_string(row) + ": " + err.what());
        }
        e.s2_file = f[11];
        e.s5p_file = f[12];
        for (const auto* name : {&e.s2_file, &e.s5p_file}) {
            if (name->empty() || !fs::exists(root / *name)) {
                fail(ErrorKind::Io, "manifest row " + std::to_string(row) + ": patch file '" +
                                        *name + "' does not exist");
            }
        }
        entries.push_back(std::move(e));
    }
    return DatasetManifest(root, std::move(entries));
}

void write_manifest(const DatasetManifest& manifest) {
    fs::create_directories(manifest.root());
    const fs::path file = manifest.root() / kManifestFile;
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write manifest " + file.string());
    out << kManifestHeader << '\n';
    for (const auto& e : manifest.entries()) {
        const auto& r = e.record;
        out << r.station_id << ',' << r.country << ',' << format_double(r.lon) << ','
            << format_double(r.lat) << ',' << format_double(r.altitude) << ','
            << format_double(r.pop_density) << ',' << to_string(r.area_type) << ','
            << to_string(r.station_type);
        for (double v : r.measured) out << ',' << format_double(v);
        out << ',' << e.s2_file << ',' << e.s5p_file << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing manifest " + file.string());
}

void write_array_file(const fs::path& file, std::span<const float> values,
                      const std::vector<std::size_t>& shape) {
    std::size_t expected = 1;
    for (auto d : shape) expected *= d;
    if (expected != values.size()) fail(ErrorKind::Validation, "array size does not match shape");

    std::ofstream out(file, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + file.string());
    std::vector<std::uint32_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        words[i] = to_le(std::bit_cast<std::uint32_t>(values[i]));
    }
    out.write(reinterpret_cast<const char*>(words.data()),
              static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
    if (!out) fail(ErrorKind::Io, "failed writing " + file.string());

    nlohmann::json side{{"shape", shape}, {"dtype", "float32"}, {"order", "C"}};
    if (shape.size() == 3 && shape[0] == kS2Bands) side["bands"] = kS2BandNames;
    std::ofstream js(sidecar_path(file), std::ios::binary);
    if (!js) fail(ErrorKind::Io, "cannot write " + sidecar_path(file).string());
    js << side.dump() << '\n';
}

std::vector<float> read_array_file(const fs::path& file,
                                   const std::vector<std::size_t>& expected_shape) {
    const fs::path side = sidecar_path(file);
    if (!fs::exists(file)) fail(ErrorKind::Io, "patch file " + file.string() + " is missing");
    if (!fs::exists(side)) fail(ErrorKind::Io, "patch header " + side.string() + " is missing");

    nlohmann::json header;
    try {
        std::ifstream hs(side);
        hs >> header;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "patch header " + side.string() + ": " + e.what());
    }
    std::vector<std::size_t> shape;
    try {
        shape = header.at("shape").get<std::vector<std::size_t>>();
        if (header.at("dtype").get<std::string>() != "float32") {
            fail(ErrorKind::Format, "patch " + file.string() + ": dtype must be float32");
        }
        if (header.value("order", std::string("C")) != "C") {
            fail(ErrorKind::Format, "patch " + file.string() + ": order must be C");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "patch header " + side.string() + ": " + e.what());
    }
    if (shape != expected_shape) {
        auto fmt = [](const std::vector<std::size_t>& s) {
            std::string out;
            for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
            return out;
        };
        fail(ErrorKind::Format, "patch " + file.string() + ": shape mismatch, header says " +
                                    fmt(shape) + ", expected " + fmt(expected_shape));
    }

    std::size_t count = 1;
    for (auto d : shape) count *= d;
    const auto bytes = fs::file_size(file);
    if (bytes != count * sizeof(float)) {
        fail(ErrorKind::Format, "patch " + file.string() + ": expected " +
                                    std::to_string(count * sizeof(float)) + " bytes, found " +
                                    std::to_string(bytes));
    }
    std::ifstream in(file, std::ios::binary);
    std::vector<std::uint32_t> words(count);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
    if (!in) fail(ErrorKind::Io, "failed reading " + file.string());

    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<float>(to_le(words[i]));
        if (!std::isfinite(values[i])) {
            fail(ErrorKind::Numeric, "patch " + file.string() + " holds a non-finite value at index " +
                                         std::to_string(i));
        }
    }
    return values;
}

std::pair<std::string, std::string> write_patch(const fs::path& dir, const std::string& stem,
                                                const SamplePatch& patch) {
    validate_patch(patch);
    fs::create_directories(dir);
    std::string s2_name = stem + ".s2.bin";
    std::string s5p_name = stem + ".s5p.bin";
    write_array_file(dir / s2_name, patch.s2, {kS2Bands, kPatchSide, kPatchSide});
    write_array_file(dir / s5p_name, patch.s5p, {kPatchSide, kPatchSide});
    return {s2_name, s5p_name};
}

SamplePatch load_patch(const std::string& station_id, const DatasetManifest& manifest) {
    const auto& e = manifest.entry(station_id);
    SamplePatch patch;
    patch.s2 = read_array_file(manifest.root() / e.s2_file, {kS2Bands, kPatchSide, kPatchSide});
    patch.s5p = read_array_file(manifest.root() / e.s5p_file, {kPatchSide, kPatchSide});
    for (float v : patch.s2) {
        if (v < 0.0f) {
            fail(ErrorKind::Validation, "patch for '" + station_id + "' has negative s2 reflectance");
        }
    }
    return patch;
}

SplitAssignment split_ids(std::vector<std::string> ids, std::uint64_t seed) {
    const std::size_t n = ids.size();
    if (n < 4) {
        fail(ErrorKind::Validation, "splitting needs at least 4 entries, got " + std::to_string(n));
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, 0x5011));
    rng.shuffle(ids);

    const std::size_t quarter = n / 4;
    const std::size_t n_train = n - 2 * quarter;
    SplitAssignment s;
    s.seed = seed;
    s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                 ids.begin() + static_cast<std::ptrdiff_t>(n_train + quarter));
    s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + quarter), ids.end());
    return s;
}

SplitAssignment split_dataset(const DatasetManifest& manifest, std::uint64_t seed) {
    return split_ids(manifest.station_ids(), seed);
}

namespace {

// Running mean / sum of squared deviations, merged pairwise (Chan et al.).
struct Moments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void merge(double n_b, double mean_b, double m2_b) {
        if (n_b == 0.0) return;
        const double n = count + n_b;
        const double delta = mean_b - mean;
        mean += delta * n_b / n;
        m2 += m2_b + delta * delta * count * n_b / n;
        count = n;
    }

    void merge_block(std::span<const float> xs) {
        double sum = 0.0;
        for (float x : xs) sum += x;
        const double m = sum / static_cast<double>(xs.size());
        double ss = 0.0;
        for (float x : xs) ss += (x - m) * (x - m);
        merge(static_cast<double>(xs.size()), m, ss);
    }

    double std_floored() const {
        const double sd = count > 0.0 ? std::sqrt(m2 / count) : 0.0;
        return std::max(sd, kStdFloor);
    }
};

}  // namespace

NormStats compute_norm_stats(const DatasetManifest& manifest, const SplitAssignment& split) {
    if (split.train.empty()) fail(ErrorKind::Validation, "norm stats need a non-empty train split");

    // Sorting makes the accumulation order independent of how the split lists ids.
    std::vector<std::string> ids = split.train;
    std::sort(ids.begin(), ids.end());

    std::array<Moments, kS2Bands> bands;
    Moments s5p, altitude, pop;
    for (const auto& id : ids) {
        const SamplePatch patch = load_patch(id, manifest);
        for (std::size_t b = 0; b < kS2Bands; ++b) {
            bands[b].merge_block(std::span<const float>(patch.s2).subspan(b * kPatchPixels, kPatchPixels));
        }
        s5p.merge_block(patch.s5p);
        const auto& r = manifest.entry(id).record;
        altitude.merge(1.0, r.altitude, 0.0);
        pop.merge(1.0, r.pop_density, 0.0);
    }

    NormStats stats;
    for (std::size_t b = 0; b < kS2Bands; ++b) {
        stats.s2_mean[b] = bands[b].mean;
        stats.s2_std[b] = bands[b].std_floored();
    }
    stats.s5p_mean = s5p.mean;
    stats.s5p_std = s5p.std_floored();
    stats.altitude_mean = altitude.mean;
    stats.altitude_std = altitude.std_floored();
    stats.pop_density_mean = pop.mean;
    stats.pop_density_std = pop.std_floored();
    return stats;
}

NormalizedSample normalize_sample(const SamplePatch& patch, const StationRecord& record,
                                  const NormStats& stats) {
    NormalizedSample out;
    out.s2.resize(patch.s2.size());
    for (std::size_t b = 0; b < kS2Bands; ++b) {
        const double m = stats.s2_mean[b];
        const double s = stats.s2_std[b];
        for (std::size_t i = 0; i < kPatchPixels; ++i) {
            const std::size_t k = b * kPatchPixels + i;
            out.s2[k] = static_cast<float>((patch.s2[k] - m) / s);
        }
    }
    out.s5p.resize(patch.s5p.size());
    for (std::size_t i = 0; i < patch.s5p.size(); ++i) {
        out.s5p[i] = static_cast<float>((patch.s5p[i] - stats.s5p_mean) / stats.s5p_std);
    }
    out.tabular = encode_tabular(record);
    out.tabular.values[0] = (record.altitude - stats.altitude_mean) / stats.altitude_std;
    out.tabular.values[1] = (record.pop_density - stats.pop_density_mean) / stats.pop_density_std;
    return out;
}

SamplePatch denormalize_patch(const NormalizedSample& sample, const NormStats& stats) {
    SamplePatch patch;
    for (std::size_t b = 0; b < kS2Bands; ++b) {
        for (std::size_t i = 0; i < kPatchPixels; ++i) {
            const std::size_t k = b * kPatchPixels + i;
            patch.s2[k] = static_cast<float>(sample.s2[k] * stats.s2_std[b] + stats.s2_mean[b]);
        }
    }
    for (std::size_t i = 0; i < kPatchPixels; ++i) {
        patch.s5p[i] = static_cast<float>(sample.s5p[i] * stats.s5p_std + stats.s5p_mean);
    }
    return patch;
}

TabularVector denormalize_tabular(const TabularVector& scaled, const NormStats& stats) {
    TabularVector v = scaled;
    v.values[0] = scaled.values[0] * stats.altitude_std + stats.altitude_mean;
    v.values[1] = scaled.values[1] * stats.pop_density_std + stats.pop_density_mean;
    return v;
}

}  // namespace aqnet
