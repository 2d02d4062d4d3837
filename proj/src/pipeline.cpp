#include "microkappa/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "microkappa/correlation.hpp"
#include "microkappa/parallel.hpp"

namespace microkappa {

using Eigen::Index;

std::vector<EnsembleSample> generate_ensemble(const EnsembleSpec& spec, std::uint64_t first, std::size_t count,
                                              unsigned threads) {
  spec.validate();
  std::vector<EnsembleSample> out(count);
  parallel_for(count, threads, [&](std::size_t i) { out[i] = generate_sample(spec, first + i); });
  return out;
}

std::vector<MicrostructureImage> images_of(std::vector<EnsembleSample> samples) {
  std::vector<MicrostructureImage> images;
  images.reserve(samples.size());
  for (auto& s : samples) images.push_back(std::move(s.image));
  return images;
}

std::vector<HomogenizationResult> label_images(const std::vector<MicrostructureImage>& images,
                                               const PhaseLaw& law, const SolverOptions& options,
                                               unsigned threads) {
  law.validate();
  std::vector<HomogenizationResult> out(images.size());
  parallel_for(images.size(), threads,
               [&](std::size_t i) { out[i] = effective_conductivity(images[i], law, options); });
  return out;
}

Eigen::MatrixXd snapshot_matrix(const std::vector<MicrostructureImage>& images, unsigned threads) {
  if (images.empty()) return {};
  const auto n = static_cast<Index>(images.front().size());
  Eigen::MatrixXd s(n, static_cast<Index>(images.size()));
  parallel_for(images.size(), threads, [&](std::size_t i) {
    require(static_cast<Index>(images[i].size()) == n, ErrorKind::ResolutionMismatch,
            "images of different resolutions in one snapshot matrix");
    s.col(static_cast<Index>(i)) = snapshot_of<double>(images[i]).values;
  });
  return s;
}

LabeledSet build_labeled_set(const ReducedBasis<double>& rb, const std::vector<MicrostructureImage>& images,
                             const std::vector<VoigtVector>& labels, Index h, unsigned threads) {
  require(images.size() == labels.size(), ErrorKind::InvalidArgument, "image and label counts differ");
  LabeledSet set;
  set.features.resize(h + 1, static_cast<Index>(images.size()));
  set.labels.resize(3, static_cast<Index>(images.size()));
  parallel_for(images.size(), threads, [&](std::size_t i) {
    set.features.col(static_cast<Index>(i)) = extract_features(rb, images[i], h).xi;
  });
  for (std::size_t i = 0; i < labels.size(); ++i) set.labels.col(static_cast<Index>(i)) = labels[i].values;
  return set;
}

// ---------------------------------------------------------------------------

void RbTrainConfig::validate() const {
  stream.validate();
  require(initial_count >= 1, ErrorKind::InvalidArgument, "initial snapshot count must be positive");
  require(max_snapshots >= 0, ErrorKind::InvalidArgument, "snapshot cap must be non-negative");
  require(enrich.eps >= 0 && enrich.eps < 1, ErrorKind::InvalidArgument, "eps must lie in [0, 1)");
  require(enrich.buffer_size >= 1 && enrich.convergence_streak >= 1, ErrorKind::InvalidArgument,
          "n_a and n_c must be positive");
  require(enrich.method != Method::Batch, ErrorKind::InvalidArgument, "method must be a, b or c");
}

void to_json(nlohmann::json& j, const RbTrainConfig& c) {
  j = {{"stream", c.stream},
       {"method", to_string(c.enrich.method)},
       {"eps", c.enrich.eps},
       {"na", c.enrich.buffer_size},
       {"nc", c.enrich.convergence_streak},
       {"normalization", c.enrich.normalization == Normalization::Block ? "block" : "total"},
       {"initial", c.initial_count},
       {"initializer", c.initial_from_correlation ? "corr" : "svd"},
       {"max_snapshots", c.max_snapshots}};
}

void from_json(const nlohmann::json& j, RbTrainConfig& c) {
  try {
    if (j.contains("stream")) c.stream = j.at("stream").get<EnsembleSpec>();
    if (j.contains("method")) c.enrich.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("eps")) c.enrich.eps = j.at("eps").get<double>();
    if (j.contains("na")) c.enrich.buffer_size = j.at("na").get<Index>();
    if (j.contains("nc")) c.enrich.convergence_streak = j.at("nc").get<Index>();
    if (j.contains("normalization")) {
      const auto norm = j.at("normalization").get<std::string>();
      require(norm == "block" || norm == "total", ErrorKind::InvalidArgument,
              "normalization must be 'block' or 'total'");
      c.enrich.normalization = norm == "block" ? Normalization::Block : Normalization::Total;
    }
    if (j.contains("initial")) c.initial_count = j.at("initial").get<Index>();
    if (j.contains("initializer")) c.initial_from_correlation = j.at("initializer").get<std::string>() == "corr";
    if (j.contains("max_snapshots")) c.max_snapshots = j.at("max_snapshots").get<Index>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("train-rb config: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const RbTrainReport& r) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : r.events) events.push_back({e.processed, e.modes});
  j = {{"method", to_string(r.method)},
       {"initial_modes", r.initial_modes},
       {"final_modes", r.final_modes},
       {"processed", r.processed},
       {"accepted", r.accepted},
       {"buffered", r.buffered},
       {"enrichments", r.enrichments},
       {"converged", r.converged},
       {"events", events}};
}

void from_json(const nlohmann::json& j, RbTrainReport& r) {
  try {
    r.method = parse_method(j.at("method").get<std::string>());
    r.initial_modes = j.at("initial_modes").get<Index>();
    r.final_modes = j.at("final_modes").get<Index>();
    r.processed = j.at("processed").get<std::uint64_t>();
    r.accepted = j.at("accepted").get<std::uint64_t>();
    r.buffered = j.at("buffered").get<std::uint64_t>();
    r.enrichments = j.at("enrichments").get<std::uint64_t>();
    r.converged = j.at("converged").get<bool>();
    r.events.clear();
    for (const auto& e : j.value("events", nlohmann::json::array()))
      r.events.push_back({e.at(0).get<std::uint64_t>(), e.at(1).get<Index>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("training report: ") + e.what());
  }
}

RbTrainResult train_reduced_basis(const RbTrainConfig& config) {
  config.validate();
  const auto initial_images =
      images_of(generate_ensemble(config.stream, 0, static_cast<std::size_t>(config.initial_count), config.threads));
  const Eigen::MatrixXd s0 = snapshot_matrix(initial_images, config.threads);
  ReducedBasis<double> rb0 = config.initial_from_correlation ? batch_pod_corr(s0, config.enrich.eps)
                                                             : batch_pod_svd(s0, config.enrich.eps);

  RbTrainResult result;
  RbTrainReport& report = result.report;
  report.method = config.enrich.method;
  report.initial_modes = rb0.size();
  IncrementalPod<double> pod(std::move(rb0), config.enrich);

  // Snapshots are produced in parallel chunks and consumed in stream order.
  const std::size_t chunk = std::max<std::size_t>(32, 8 * static_cast<std::size_t>(std::max(1u, config.threads)));
  const auto first = static_cast<std::uint64_t>(config.initial_count);
  const auto cap = static_cast<std::uint64_t>(config.max_snapshots);
  std::uint64_t position = 0;
  while (!pod.converged() && position < cap) {
    const auto count = static_cast<std::size_t>(std::min<std::uint64_t>(chunk, cap - position));
    const Eigen::MatrixXd block =
        snapshot_matrix(images_of(generate_ensemble(config.stream, first + position, count, config.threads)),
                        config.threads);
    for (Index k = 0; k < block.cols() && !pod.converged(); ++k) {
      const auto outcome = pod.step(block.col(k));
      ++position;
      if (outcome == StepOutcome::EnrichedNow) report.events.push_back({position, pod.current()->size()});
    }
  }
  if (!pod.converged() && pod.pending() > 0) {
    pod.flush();
    report.events.push_back({position, pod.current()->size()});
  }

  result.basis = *pod.current();
  report.final_modes = result.basis.size();
  report.processed = pod.processed();
  report.accepted = pod.accepted_total();
  report.buffered = pod.buffered_total();
  report.enrichments = pod.enrichments();
  report.converged = pod.converged();
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string accuracy_curve_csv(const std::vector<std::pair<std::string, Eigen::VectorXd>>& curves,
                               const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash=" << hash << '\n' << "N";
  Index longest = 0;
  for (const auto& [label, curve] : curves) {
    out << ',' << label;
    longest = std::max(longest, curve.size());
  }
  out << '\n';
  for (Index n = 0; n < longest; ++n) {
    out << n + 1;
    for (const auto& [label, curve] : curves) {
      out << ',';
      if (n < curve.size()) out << fmt(curve(n));
    }
    out << '\n';
  }
  return out.str();
}

std::string method_table_csv(const std::vector<RbTrainReport>& reports, double eps, const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash=" << hash << '\n'
      << "method,eps,initial_modes,final_modes,processed,below_eps,above_eps,enrichments,converged\n";
  for (const auto& r : reports)
    out << to_string(r.method) << ',' << fmt(eps) << ',' << r.initial_modes << ',' << r.final_modes << ','
        << r.processed << ',' << r.accepted << ',' << r.buffered << ',' << r.enrichments << ','
        << (r.converged ? "yes" : "no") << '\n';
  return out.str();
}

std::string error_matrix_csv(const std::vector<AnnEvaluation>& rows, const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash=" << hash << '\n'
      << "model,test_set,count,mean_rel_k11_pct,mean_rel_k22_pct,max_rel_k11_pct,max_rel_k22_pct,"
         "mae_k11,mae_k22,mae_k12\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << row.model << ',' << row.test_set << ',' << r.count << ',' << fmt(100 * r.mean_rel(0)) << ','
        << fmt(100 * r.mean_rel(1)) << ',' << fmt(100 * r.max_rel(0)) << ',' << fmt(100 * r.max_rel(1)) << ','
        << fmt(r.mae(0)) << ',' << fmt(r.mae(1)) << ',' << fmt(r.mae(2) / std::numbers::sqrt2) << '\n';
  }
  return out.str();
}

std::string loss_curve_csv(const TrainingInfo& info, const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash=" << hash << '\n' << "# best_epoch=" << info.best_epoch << '\n'
      << "epoch,train,validation\n";
  for (std::size_t e = 0; e < info.train_curve.size(); ++e)
    out << e + 1 << ',' << fmt(info.train_curve[e]) << ',' << fmt(info.val_curve[e]) << '\n';
  return out.str();
}

}  // namespace microkappa
