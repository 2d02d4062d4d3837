#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "microkappa/correlation.hpp"
#include "microkappa/dataset.hpp"
#include "microkappa/error.hpp"
#include "microkappa/homogenize.hpp"
#include "microkappa/microgen.hpp"
#include "microkappa/parallel.hpp"
#include "microkappa/pipeline.hpp"
#include "microkappa/podrb_io.hpp"
#include "microkappa/surrogate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace microkappa;

namespace {

struct Globals {
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  std::string log_level = "info";
};

Globals globals;

void log(const std::string& message) {
  if (globals.log_level != "quiet") std::cerr << "[microkappa] " << message << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

// Creates the parent directory so bad output paths fail before any work.
void prepare_output(const fs::path& path) {
  const auto parent = path.parent_path();
  std::error_code ec;
  if (!parent.empty()) fs::create_directories(parent, ec);
  require(!ec, ErrorKind::Io, "cannot create " + parent.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<MicrostructureImage> read_images(const std::vector<fs::path>& paths) {
  std::vector<MicrostructureImage> images(paths.size());
  parallel_for(paths.size(), globals.threads, [&](std::size_t i) { images[i] = read_image(paths[i]); });
  return images;
}

LabeledSet load_labeled(const fs::path& dataset_path, const ReducedBasis<double>& rb, Eigen::Index h) {
  const auto ds = read_dataset(dataset_path);
  require(!ds.records.empty(), ErrorKind::EmptyDataset, dataset_path.string() + " has no records");
  std::vector<fs::path> paths;
  std::vector<VoigtVector> labels;
  for (const auto& r : ds.records) {
    paths.push_back(ds.image_path(r));
    VoigtVector v;
    v.values = Eigen::Vector3d(r.kappa_v[0], r.kappa_v[1], r.kappa_v[2]);
    labels.push_back(v);
  }
  return build_labeled_set(rb, read_images(paths), labels, h, globals.threads);
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string spec;
  std::string out;
  std::uint64_t count = 0;
  std::uint64_t first = 0;
  std::string format = "txt";
};

void cmd_generate(const GenerateArgs& a) {
  auto spec = read_json(a.spec).get<EnsembleSpec>();
  if (globals.seed) spec.seed = *globals.seed;
  spec.validate();
  require(a.format == "txt" || a.format == "pgm", ErrorKind::InvalidArgument, "format must be txt or pgm");
  const fs::path dir = a.out;
  fs::create_directories(dir);

  const json config = {{"spec", spec}, {"count", a.count}, {"first", a.first}, {"format", a.format}};
  const auto hash = config_hash(config);
  log("generating " + std::to_string(a.count) + " images, config " + hash);

  const auto samples = generate_ensemble(spec, a.first, a.count, globals.threads);
  std::vector<json> lines;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto index = a.first + i;
    char name[32];
    std::snprintf(name, sizeof name, "img_%06llu.%s", static_cast<unsigned long long>(index), a.format.c_str());
    const auto& s = samples[i];
    if (a.format == "txt")
      write_matrix_txt(dir / name, s.image);
    else
      write_pgm(dir / name, s.image);
    ImageEntry e;
    e.image = name;
    e.index = index;
    e.seed = s.spec.seed;
    e.morphology = to_string(s.spec.morphology);
    e.target_vf = s.spec.target_vf;
    e.achieved_vf = s.image.achieved_vf();
    e.retries = s.retries;
    e.config_hash = hash;
    lines.push_back(e);
  }
  write_jsonl(dir / "manifest.jsonl", lines);
  write_text(dir / "generate.json", json{{"config", config}, {"config_hash", hash}}.dump(2) + "\n");
}

// -------------------------------------------------------------- homogenize

struct HomogenizeArgs {
  std::string in;
  std::string out;
  double contrast = 5.0;
  double kappa_a = 1.0;
  double tol = 1e-8;
  int max_iter = 2000;
};

void cmd_homogenize(const HomogenizeArgs& a) {
  const PhaseLaw law{a.kappa_a, a.contrast};
  law.validate();
  SolverOptions opts;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  const fs::path in = a.in;
  const fs::path out = a.out;
  prepare_output(out);

  std::vector<fs::path> paths;
  std::vector<std::uint64_t> seeds;
  if (fs::exists(in / "manifest.jsonl")) {
    for (const auto& line : read_jsonl(in / "manifest.jsonl")) {
      const auto e = line.get<ImageEntry>();
      paths.push_back(in / e.image);
      seeds.push_back(e.seed);
    }
  } else {
    for (const auto& entry : fs::directory_iterator(in)) {
      const auto ext = entry.path().extension();
      if (ext == ".txt" || ext == ".pgm") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    seeds.assign(paths.size(), 0);
  }

  const json config = {{"in", in.lexically_normal().generic_string()},
                       {"kappa_a", a.kappa_a},
                       {"contrast", a.contrast},
                       {"tol", a.tol},
                       {"max_iter", a.max_iter}};
  const auto hash = config_hash(config);
  log("homogenizing " + std::to_string(paths.size()) + " images, config " + hash);

  const auto images = read_images(paths);
  const auto results = label_images(images, law, opts, globals.threads);
  const auto base = fs::absolute(out).parent_path();
  std::vector<DatasetRecord> records;
  for (std::size_t i = 0; i < images.size(); ++i) {
    DatasetRecord r;
    r.image = fs::relative(fs::absolute(paths[i]), base).generic_string();
    r.f_b = images[i].achieved_vf();
    r.resolution = images[i].resolution();
    r.contrast = a.contrast;
    const auto v = to_voigt(results[i].kappa).values;
    r.kappa_v = {v(0), v(1), v(2)};
    r.residual = results[i].residual;
    r.seed = seeds[i];
    r.config_hash = hash;
    records.push_back(r);
  }
  write_dataset(out, records);
}

// ---------------------------------------------------------------- train-rb

struct TrainRbArgs {
  std::string method = "c";
  double eps = 0.025;
  Eigen::Index na = 75;
  Eigen::Index nc = 100;
  std::string stream;
  std::string out;
  Eigen::Index initial = 200;
  Eigen::Index max_snapshots = 20000;
  std::string normalization = "block";
  std::string initializer = "svd";
};

void cmd_train_rb(const TrainRbArgs& a) {
  RbTrainConfig cfg;
  cfg.stream = read_json(a.stream).get<EnsembleSpec>();
  if (globals.seed) cfg.stream.seed = *globals.seed;
  cfg.enrich.method = parse_method(a.method);
  cfg.enrich.eps = a.eps;
  cfg.enrich.buffer_size = a.na;
  cfg.enrich.convergence_streak = a.nc;
  require(a.normalization == "block" || a.normalization == "total", ErrorKind::InvalidArgument,
          "normalization must be block or total");
  cfg.enrich.normalization = a.normalization == "block" ? Normalization::Block : Normalization::Total;
  require(a.initializer == "svd" || a.initializer == "corr", ErrorKind::InvalidArgument,
          "initializer must be svd or corr");
  cfg.initial_from_correlation = a.initializer == "corr";
  cfg.initial_count = a.initial;
  cfg.max_snapshots = a.max_snapshots;
  cfg.threads = globals.threads;
  cfg.validate();
  const fs::path out = a.out;
  prepare_output(out);

  const json config = cfg;
  const auto hash = config_hash(config);
  log("training reduced basis with method " + a.method + ", config " + hash);
  const auto result = train_reduced_basis(cfg);
  save_basis(out, result.basis);
  const json side = {{"config", config},
                     {"config_hash", hash},
                     {"basis_hash", hex(basis_hash(result.basis))},
                     {"report", result.report}};
  write_text(out.string() + ".json", side.dump(2) + "\n");
  log("final basis size " + std::to_string(result.report.final_modes) +
      (result.report.converged ? ", converged" : ", not converged"));
}

// --------------------------------------------------------------- train-ann

struct TrainAnnArgs {
  std::string dataset;
  std::string basis;
  Eigen::Index h = 6;
  std::string layers = "7,39";
  std::string act = "relu,softplus";
  Eigen::Index restarts = 5;
  std::string out;
  TrainConfig train;
};

void cmd_train_ann(TrainAnnArgs a) {
  Architecture arch;
  arch.h = a.h;
  arch.hidden.clear();
  for (const auto& s : split_list(a.layers)) {
    try {
      arch.hidden.push_back(std::stol(s));
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad layer size: " + s);
    }
  }
  arch.activations.clear();
  for (const auto& s : split_list(a.act)) arch.activations.push_back(parse_activation(s));
  arch.validate();
  a.train.restarts = a.restarts;
  if (globals.seed) a.train.seed = *globals.seed;
  const fs::path out = a.out;
  prepare_output(out);

  const auto rb = load_basis(a.basis);
  const auto bhash = basis_hash(rb);
  json acts = json::array();
  for (auto act : arch.activations) acts.push_back(to_string(act));
  const json config = {{"dataset", fs::path(a.dataset).lexically_normal().generic_string()},
                       {"basis_hash", hex(bhash)},
                       {"h", arch.h},
                       {"layers", arch.hidden},
                       {"activations", acts},
                       {"learning_rate", a.train.learning_rate},
                       {"batch_size", a.train.batch_size},
                       {"max_epochs", a.train.max_epochs},
                       {"n_train", a.train.n_train},
                       {"n_val", a.train.n_val},
                       {"restarts", a.train.restarts},
                       {"patience", a.train.patience},
                       {"seed", a.train.seed}};
  const auto hash = config_hash(config);

  const auto data = load_labeled(a.dataset, rb, arch.h);
  log("training network on " + std::to_string(data.size()) + " samples, config " + hash);
  auto model = train(data, arch, a.train);
  model.basis_hash = bhash;
  save_model(out, model);
  write_text(out.string() + ".loss.csv", loss_curve_csv(model.info, hash));
  const json side = {{"config", config},
                     {"config_hash", hash},
                     {"best_epoch", model.info.best_epoch},
                     {"best_validation_cost", model.info.best_val},
                     {"restart", model.info.restart},
                     {"epochs_run", model.info.epochs_run}};
  write_text(out.string() + ".json", side.dump(2) + "\n");
  log("best validation cost " + std::to_string(model.info.best_val) + " at epoch " +
      std::to_string(model.info.best_epoch));
}

// ----------------------------------------------------------------- predict

struct PredictArgs {
  std::string model;
  std::string basis;
  std::string image;
};

void cmd_predict(const PredictArgs& a) {
  const auto model = load_model(a.model);
  const auto rb = load_basis(a.basis);
  const auto v = predict(model, read_image(a.image), rb);
  const auto k = from_voigt(v);
  std::printf("%.9g %.9g %.9g\n", k.k11, k.k22, k.k12);
}

// ------------------------------------------------------------- evaluate-rb

struct EvaluateRbArgs {
  std::string basis;
  std::string validation;
  std::uint64_t count = 500;
  std::uint64_t first = 0;
  std::string out;
  std::string table;
};

void cmd_evaluate_rb(const EvaluateRbArgs& a) {
  const auto files = split_list(a.basis);
  require(!files.empty(), ErrorKind::InvalidArgument, "no basis files given");
  const auto spec = read_json(a.validation).get<EnsembleSpec>();
  spec.validate();
  prepare_output(a.out);
  if (!a.table.empty()) prepare_output(a.table);

  std::vector<ReducedBasis<double>> bases;
  std::vector<json> sides;
  json hashes = json::array();
  for (const auto& f : files) {
    bases.push_back(load_basis(f));
    hashes.push_back(hex(basis_hash(bases.back())));
    const fs::path side = f + ".json";
    sides.push_back(fs::exists(side) ? read_json(side) : json());
  }
  const json config = {{"bases", hashes}, {"validation", spec}, {"count", a.count}, {"first", a.first}};
  const auto hash = config_hash(config);
  log("evaluating " + std::to_string(files.size()) + " bases on " + std::to_string(a.count) +
      " snapshots, config " + hash);

  const auto images = images_of(generate_ensemble(spec, a.first, a.count, globals.threads));
  const auto s = snapshot_matrix(images, globals.threads);
  std::vector<std::pair<std::string, Eigen::VectorXd>> curves;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::string label = fs::path(files[i]).stem().string();
    if (sides[i].contains("config")) label = sides[i]["config"].value("method", label);
    for (const auto& [other, curve] : curves)
      if (other == label) label = fs::path(files[i]).stem().string();
    curves.emplace_back(label, rb_accuracy_curve(bases[i], s));
  }
  write_text(a.out, accuracy_curve_csv(curves, hash));

  if (!a.table.empty()) {
    std::vector<RbTrainReport> reports;
    double eps = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
      require(sides[i].contains("report"), ErrorKind::Io, "missing sidecar for " + files[i]);
      reports.push_back(sides[i]["report"].get<RbTrainReport>());
      eps = sides[i]["config"].value("eps", bases[i].eps);
    }
    write_text(a.table, method_table_csv(reports, eps, hash));
  }
}

// ------------------------------------------------------------ evaluate-ann

struct EvaluateAnnArgs {
  std::string models;
  std::string basis;
  std::string test;
  std::string out;
  std::string hist_dir;
  int bins = 20;
};

void cmd_evaluate_ann(const EvaluateAnnArgs& a) {
  const auto model_files = split_list(a.models);
  const auto basis_files = split_list(a.basis);
  const auto test_files = split_list(a.test);
  require(!model_files.empty() && !test_files.empty(), ErrorKind::InvalidArgument, "need models and test sets");
  require(basis_files.size() == 1 || basis_files.size() == model_files.size(), ErrorKind::InvalidArgument,
          "give one basis or one per model");
  prepare_output(a.out);
  if (!a.hist_dir.empty()) fs::create_directories(a.hist_dir);

  json config = {{"models", json::array()}, {"tests", json::array()}, {"bins", a.bins}};
  std::vector<SurrogateModel> models;
  for (const auto& f : model_files) {
    models.push_back(load_model(f));
    config["models"].push_back(hex(models.back().basis_hash));
  }
  for (const auto& f : test_files) config["tests"].push_back(fs::path(f).lexically_normal().generic_string());
  const auto hash = config_hash(config);

  std::vector<AnnEvaluation> rows;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto rb = load_basis(basis_files.size() == 1 ? basis_files[0] : basis_files[m]);
    require(models[m].basis_hash == 0 || models[m].basis_hash == basis_hash(rb), ErrorKind::InvalidArgument,
            "basis does not match model " + model_files[m]);
    const auto model_name = fs::path(model_files[m]).stem().string();
    for (const auto& t : test_files) {
      const auto test = load_labeled(t, rb, models[m].h);
      rows.push_back({model_name, fs::path(t).stem().string(), evaluate(models[m], test)});
      if (!a.hist_dir.empty())
        write_text(fs::path(a.hist_dir) / (model_name + "_" + rows.back().test_set + ".csv"),
                   "# config_hash=" + hash + "\n" + histogram_csv(rows.back().report, a.bins));
    }
  }
  write_text(a.out, error_matrix_csv(rows, hash));

  std::printf("%-16s %-16s %12s %12s\n", "model", "test_set", "k11_rel_%", "k22_rel_%");
  for (const auto& r : rows)
    std::printf("%-16s %-16s %12.3f %12.3f\n", r.model.c_str(), r.test_set.c_str(), 100 * r.report.mean_rel(0),
                100 * r.report.mean_rel(1));
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microstructure generation, reduced bases and surrogate models for effective conductivity"};
  app.require_subcommand(1);
  app.add_option("--threads", globals.threads, "Worker threads for sample-parallel stages (0 = all cores)");
  app.add_option("--seed", globals.seed, "Overrides the seed of the stream or training run");
  app.add_option("--log-level", globals.log_level, "info or quiet")->check(CLI::IsMember({"info", "quiet"}));

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Sample microstructure images from an ensemble spec");
  g->add_option("--spec", gen.spec, "Ensemble spec (JSON)")->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--count", gen.count, "Number of images")->required();
  g->add_option("--first", gen.first, "Index of the first sample in the stream");
  g->add_option("--format", gen.format, "Image format: txt or pgm")->check(CLI::IsMember({"txt", "pgm"}));
  g->callback([&] { cmd_generate(gen); });

  HomogenizeArgs hom;
  auto* h = app.add_subcommand("homogenize", "Label images with their effective conductivity");
  h->add_option("--in", hom.in, "Image directory (uses manifest.jsonl when present)")
      ->required()
      ->check(CLI::ExistingDirectory);
  h->add_option("--out", hom.out, "Dataset manifest to write (.mkds)")->required();
  h->add_option("--contrast", hom.contrast, "Phase contrast kappa_a / kappa_b");
  h->add_option("--kappa-a", hom.kappa_a, "Matrix conductivity");
  h->add_option("--tol", hom.tol, "Relative residual tolerance");
  h->add_option("--max-iter", hom.max_iter, "Iteration cap per load case");
  h->callback([&] { cmd_homogenize(hom); });

  TrainRbArgs trb;
  auto* r = app.add_subcommand("train-rb", "Build a reduced basis by streaming enrichment");
  r->add_option("--method", trb.method, "Enrichment method: a, b or c")->check(CLI::IsMember({"a", "b", "c"}));
  r->add_option("--eps", trb.eps, "Truncation and acceptance tolerance");
  r->add_option("--na", trb.na, "Snapshots buffered per enrichment");
  r->add_option("--nc", trb.nc, "Consecutive accepted snapshots for convergence");
  r->add_option("--stream", trb.stream, "Ensemble spec of the snapshot stream (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  r->add_option("--out", trb.out, "Basis file; a .json sidecar is written next to it")->required();
  r->add_option("--initial", trb.initial, "Snapshots in the initial batch basis");
  r->add_option("--max-snapshots", trb.max_snapshots, "Stream length cap");
  r->add_option("--normalization", trb.normalization, "Truncation denominator for b/c: block or total");
  r->add_option("--initializer", trb.initializer, "Initial basis route: svd or corr");
  r->callback([&] { cmd_train_rb(trb); });

  TrainAnnArgs tann;
  auto* t = app.add_subcommand("train-ann", "Train a network from features to conductivities");
  t->set_help_flag("--help", "Print this help message and exit");
  t->add_option("--dataset", tann.dataset, "Labeled dataset (.mkds)")->required()->check(CLI::ExistingFile);
  t->add_option("--basis", tann.basis, "Reduced basis file")->required()->check(CLI::ExistingFile);
  t->add_option("--h", tann.h, "Number of reduced coefficients in the feature vector");
  t->add_option("--layers", tann.layers, "Hidden layer sizes, comma separated");
  t->add_option("--act", tann.act, "Hidden activations, comma separated (relu, tanh, sigmoid, softplus)");
  t->add_option("--restarts", tann.restarts, "Independent initializations");
  t->add_option("--out", tann.out, "Model file")->required();
  t->add_option("--epochs", tann.train.max_epochs, "Maximum epochs per run");
  t->add_option("--lr", tann.train.learning_rate, "Adam step size");
  t->add_option("--batch", tann.train.batch_size, "Minibatch size");
  t->add_option("--n-train", tann.train.n_train, "Training samples");
  t->add_option("--n-val", tann.train.n_val, "Validation samples");
  t->add_option("--patience", tann.train.patience, "Early stop after this many epochs without improvement (0 = off)");
  t->callback([&] { cmd_train_ann(tann); });

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Predict k11 k22 k12 for one image");
  p->add_option("--model", pred.model, "Model file")->required()->check(CLI::ExistingFile);
  p->add_option("--basis", pred.basis, "Reduced basis the model was trained with")
      ->required()
      ->check(CLI::ExistingFile);
  p->add_option("--image", pred.image, "Image (.txt matrix or .pgm)")->required()->check(CLI::ExistingFile);
  p->callback([&] { cmd_predict(pred); });

  EvaluateRbArgs erb;
  auto* e = app.add_subcommand("evaluate-rb", "Accuracy curves and method table for reduced bases");
  e->add_option("--basis", erb.basis, "Basis files, comma separated")->required();
  e->add_option("--validation", erb.validation, "Ensemble spec of the validation snapshots (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  e->add_option("--count", erb.count, "Validation snapshots");
  e->add_option("--first", erb.first, "Index of the first validation sample");
  e->add_option("--out", erb.out, "Accuracy curve CSV")->required();
  e->add_option("--table", erb.table, "Method comparison CSV (needs the training sidecars)");
  e->callback([&] { cmd_evaluate_rb(erb); });

  EvaluateAnnArgs eann;
  auto* v = app.add_subcommand("evaluate-ann", "Error matrix of models over test datasets");
  v->add_option("--model", eann.models, "Model files, comma separated")->required();
  v->add_option("--basis", eann.basis, "One basis, or one per model, comma separated")->required();
  v->add_option("--test", eann.test, "Test datasets (.mkds), comma separated")->required();
  v->add_option("--out", eann.out, "Error matrix CSV")->required();
  v->add_option("--hist-dir", eann.hist_dir, "Directory for absolute-error histograms");
  v->add_option("--bins", eann.bins, "Histogram bins");
  v->callback([&] { cmd_evaluate_ann(eann); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("InvalidArgument", e.what(), 2);
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.kind())), e.what(), is_numerical(e.kind()) ? 3 : 2);
  } catch (const json::exception& e) {
    return report_error("Format", e.what(), 2);
  } catch (const fs::filesystem_error& e) {
    return report_error("Io", e.what(), 2);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), 3);
  }
  return 0;
}
