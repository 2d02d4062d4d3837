#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace microkappa {

/// One labeled sample. `image` is stored relative to the manifest's
/// directory.
struct DatasetRecord {
  std::string image;
  double f_b = 0.0;
  int resolution = 0;
  double contrast = 0.0;
  std::array<double, 3> kappa_v{};  ///< (k11, k22, sqrt(2) k12)
  double residual = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Line-delimited JSON manifest (.mkds), one record per line.
struct Dataset {
  std::filesystem::path base_dir;  ///< directory image paths are relative to
  std::vector<DatasetRecord> records;

  std::filesystem::path image_path(const DatasetRecord& r) const { return base_dir / r.image; }
};

void to_json(nlohmann::json& j, const DatasetRecord& r);
void from_json(const nlohmann::json& j, DatasetRecord& r);

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);
Dataset read_dataset(const std::filesystem::path& path);

/// Entry of the manifest written by `generate`.
struct ImageEntry {
  std::string image;
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  std::string morphology;
  double target_vf = 0.0;
  double achieved_vf = 0.0;
  int retries = 0;
  std::string config_hash;
};

void to_json(nlohmann::json& j, const ImageEntry& e);
void from_json(const nlohmann::json& j, ImageEntry& e);

/// JSON Lines helpers; blank lines are skipped on read.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace microkappa
