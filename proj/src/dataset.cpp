#include "microkappa/dataset.hpp"

#include <fstream>

#include "microkappa/binary_io.hpp"
#include "microkappa/error.hpp"

namespace microkappa {

void to_json(nlohmann::json& j, const DatasetRecord& r) {
  j = {{"image", r.image},
       {"f_b", r.f_b},
       {"resolution", r.resolution},
       {"contrast", r.contrast},
       {"kappa_v", r.kappa_v},
       {"residual", r.residual},
       {"seed", r.seed},
       {"config_hash", r.config_hash}};
}

void from_json(const nlohmann::json& j, DatasetRecord& r) {
  r.image = j.at("image").get<std::string>();
  r.f_b = j.at("f_b").get<double>();
  r.resolution = j.at("resolution").get<int>();
  r.contrast = j.at("contrast").get<double>();
  r.kappa_v = j.at("kappa_v").get<std::array<double, 3>>();
  r.residual = j.value("residual", 0.0);
  r.seed = j.value("seed", std::uint64_t{0});
  r.config_hash = j.value("config_hash", std::string{});
}

void to_json(nlohmann::json& j, const ImageEntry& e) {
  j = {{"image", e.image},
       {"index", e.index},
       {"seed", e.seed},
       {"morphology", e.morphology},
       {"target_vf", e.target_vf},
       {"achieved_vf", e.achieved_vf},
       {"retries", e.retries},
       {"config_hash", e.config_hash}};
}

void from_json(const nlohmann::json& j, ImageEntry& e) {
  e.image = j.at("image").get<std::string>();
  e.index = j.value("index", std::uint64_t{0});
  e.seed = j.value("seed", std::uint64_t{0});
  e.morphology = j.value("morphology", std::string{});
  e.target_vf = j.value("target_vf", 0.0);
  e.achieved_vf = j.value("achieved_vf", 0.0);
  e.retries = j.value("retries", 0);
  e.config_hash = j.value("config_hash", std::string{});
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  require(bool(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  for (const auto& j : lines) out << j.dump() << '\n';
  out.close();
  require(!out.fail(), ErrorKind::Io, "failed writing " + path.string());
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(bool(in), ErrorKind::Io, "cannot open " + path.string());
  std::vector<nlohmann::json> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      lines.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return lines;
}

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  std::vector<nlohmann::json> lines(records.begin(), records.end());
  write_jsonl(path, lines);
}

Dataset read_dataset(const std::filesystem::path& path) {
  Dataset ds;
  ds.base_dir = path.parent_path();
  std::size_t number = 0;
  for (const auto& j : read_jsonl(path)) {
    ++number;
    try {
      ds.records.push_back(j.get<DatasetRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, path.string() + ": record " + std::to_string(number) + ": " + e.what());
    }
  }
  return ds;
}

std::string config_hash(const nlohmann::json& config) { return hex64(fnv1a(config.dump())); }

}  // namespace microkappa
