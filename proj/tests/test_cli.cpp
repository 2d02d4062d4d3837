#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "microkappa/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path work = fs::temp_directory_path() / "mk_test_cli";

int run(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd = std::string("cd '") + work.string() + "' && '" + MICROKAPPA_BIN +
                          "' --log-level quiet " + args + " > " + stdout_file + " 2> stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Small circle pipeline in `dir`; returns the artifacts that must be reproducible.
std::vector<std::string> pipeline(const std::string& dir) {
  fs::create_directories(work / dir);
  REQUIRE(run("generate --spec circ.json --out " + dir + "/imgs --count 300") == 0);
  REQUIRE(run("homogenize --in " + dir + "/imgs --contrast 5 --out " + dir + "/d.mkds") == 0);
  REQUIRE(run("train-rb --method c --eps 0.025 --na 16 --nc 50 --initial 100 --max-snapshots 300 "
              "--stream circ.json --out " + dir + "/basis.rb") == 0);
  REQUIRE(run("train-ann --dataset " + dir + "/d.mkds --basis " + dir +
              "/basis.rb --h 6 --layers 7,39 --act relu,softplus --restarts 2 --epochs 200 --n-train 200 "
              "--n-val 100 --out " + dir + "/model.mk") == 0);
  REQUIRE(run("evaluate-rb --basis " + dir + "/basis.rb --validation val.json --count 50 --out " + dir +
              "/curve.csv --table " + dir + "/table.csv") == 0);
  return {"imgs/manifest.jsonl", "imgs/img_000123.txt", "d.mkds", "basis.rb", "basis.rb.json", "model.mk",
          "model.mk.loss.csv", "curve.csv", "table.csv"};
}

}  // namespace

TEST_CASE("command line pipeline") {
  fs::remove_all(work);
  fs::create_directories(work);
  write(work / "circ.json", R"({"resolution": 64, "morphology": "circle", "seed": 1})");
  write(work / "val.json", R"({"resolution": 64, "morphology": "circle", "seed": 2})");
  write(work / "rect.json", R"({"resolution": 64, "morphology": "rectangle", "seed": 3})");

  SUBCASE("empty generate") {
    CHECK(run("generate --spec circ.json --out empty --count 0") == 0);
    CHECK(fs::exists(work / "empty/manifest.jsonl"));
    CHECK(fs::file_size(work / "empty/manifest.jsonl") == 0);
  }

  SUBCASE("errors are reported as JSON with exit codes") {
    CHECK(run("generate --spec missing.json --out x --count 1") == 2);
    CHECK(json::parse(slurp(work / "stderr.txt")).at("exit_code") == 2);

    write(work / "bad.json", R"({"resolution": 15})");
    CHECK(run("generate --spec bad.json --out x --count 1") == 2);
    CHECK(json::parse(slurp(work / "stderr.txt")).at("error") == "InvalidArgument");

    write(work / "broken.json", "{resolution");
    CHECK(run("generate --spec broken.json --out x --count 1") == 2);
    CHECK(json::parse(slurp(work / "stderr.txt")).at("error") == "Format");

    CHECK(run("train-rb --method d --stream circ.json --out b.rb") == 2);
    CHECK(run("frobnicate") == 2);

    REQUIRE(run("generate --spec circ.json --out few --count 2") == 0);
    CHECK(run("homogenize --in few --max-iter 1 --out few.mkds") == 3);
    CHECK(json::parse(slurp(work / "stderr.txt")).at("error") == "NoConvergence");
  }

  SUBCASE("help documents every subcommand") {
    CHECK(run("--help", "help.txt") == 0);
    const auto help = slurp(work / "help.txt");
    for (auto name : {"generate", "homogenize", "train-rb", "train-ann", "predict", "evaluate-rb", "evaluate-ann"})
      CHECK(help.find(name) != std::string::npos);
    CHECK(run("train-ann --help", "help.txt") == 0);
    CHECK(slurp(work / "help.txt").find("--restarts") != std::string::npos);
  }

  SUBCASE("small circle pipeline, replay and reproducibility") {
    const auto files = pipeline("run1");
    REQUIRE(run("generate --spec val.json --out vimgs --count 40") == 0);
    REQUIRE(run("homogenize --in vimgs --out v.mkds") == 0);
    REQUIRE(run("generate --spec rect.json --out rimgs --count 40") == 0);
    REQUIRE(run("homogenize --in rimgs --out r.mkds") == 0);
    REQUIRE(run("evaluate-ann --model run1/model.mk --basis run1/basis.rb --test v.mkds,r.mkds,run1/d.mkds "
                "--out err.csv --hist-dir hist",
                "matrix.txt") == 0);
    std::istringstream matrix(slurp(work / "matrix.txt"));
    int rows = 0;
    for (std::string line; std::getline(matrix, line);) {
      std::istringstream cells(line);
      std::string model, test;
      double k11 = -1, k22 = -1;
      if (!(cells >> model >> test >> k11 >> k22)) continue;
      CHECK(k11 >= 0);
      CHECK(k22 >= 0);
      ++rows;
    }
    CHECK(rows == 3);
    CHECK(fs::exists(work / "hist/model_r.csv"));

    // Replay a training image through predict.
    const auto ds = microkappa::read_dataset(work / "run1/d.mkds");
    const auto& rec = ds.records[5];
    REQUIRE(run("predict --model run1/model.mk --basis run1/basis.rb --image run1/" + rec.image, "pred.txt") == 0);
    std::istringstream pred(slurp(work / "pred.txt"));
    double k11, k22, k12;
    REQUIRE(static_cast<bool>(pred >> k11 >> k22 >> k12));
    CHECK(std::abs(k11 / rec.kappa_v[0] - 1) <= 0.2);
    CHECK(std::abs(k22 / rec.kappa_v[1] - 1) <= 0.2);
    CHECK(std::abs(k12 - rec.kappa_v[2] / std::sqrt(2.0)) <= 0.1);

    // Every artifact carries the config hash and reruns are byte-identical.
    CHECK(slurp(work / "run1/curve.csv").rfind("# config_hash=", 0) == 0);
    CHECK(slurp(work / "run1/model.mk.loss.csv").rfind("# config_hash=", 0) == 0);
    CHECK(slurp(work / "run1/d.mkds").find("config_hash") != std::string::npos);
    std::vector<std::string> first;
    for (const auto& f : files) first.push_back(slurp(work / "run1" / f));
    fs::remove_all(work / "run1");
    pipeline("run1");
    for (std::size_t i = 0; i < files.size(); ++i) {
      INFO(files[i]);
      CHECK(slurp(work / "run1" / files[i]) == first[i]);
    }
  }
  fs::remove_all(work);
}
