// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "microkappa/correlation.hpp"
#include "microkappa/dataset.hpp"
#include "microkappa/homogenize.hpp"
#include "microkappa/microgen.hpp"
#include "microkappa/pipeline.hpp"
#include "microkappa/podrb.hpp"
#include "microkappa/surrogate.hpp"

using namespace microkappa;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MatrixXd random_matrix(Index rows, Index cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

MicrostructureImage random_image(int n, double p, Rng& rng) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * n);
  for (auto& v : px) v = rng.uniform() < p;
  return MicrostructureImage(n, std::move(px));
}

// Largest principal angle between two subspaces of equal dimension.
double max_angle(const MatrixXd& a, const MatrixXd& b) {
  const MatrixXd r = b - a * (a.transpose() * b);
  Eigen::JacobiSVD<MatrixXd> svd(r);
  return std::asin(std::min(1.0, svd.singularValues()(0)));
}

// Smallest N with P_delta(N) <= level, or curve size + 1 when never reached.
Index modes_for(const VectorXd& curve, double level) {
  for (Index i = 0; i < curve.size(); ++i)
    if (curve(i) <= level) return i + 1;
  return curve.size() + 1;
}

// ------------------------------------------------------------------------ 1

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  const int n = 16;
  double worst = 0;
  bool identities = true;
  for (int k = 0; k < 50; ++k) {
    const auto img = random_image(n, rng.uniform(0.05, 0.95), rng);
    const double fb = volume_fraction(img);
    for (auto [p, q] : {std::pair{Phase::B, Phase::B}, std::pair{Phase::A, Phase::B}, std::pair{Phase::A, Phase::A}}) {
      const auto c = two_point(img, p, q);
      for (int dy = 0; dy < n; ++dy)
        for (int dx = 0; dx < n; ++dx) {
          long sum = 0;
          for (int r = 0; r < n; ++r)
            for (int col = 0; col < n; ++col) {
              const int u = img(r, col), v = img((r + dy) % n, (col + dx) % n);
              sum += (p == Phase::B ? u : 1 - u) * (q == Phase::B ? v : 1 - v);
            }
          worst = std::max(worst, std::abs(c.values(dy, dx) - static_cast<double>(sum) / (n * n)));
        }
    }
    const auto bb = two_point(img, Phase::B, Phase::B);
    const auto ab = two_point(img, Phase::A, Phase::B);
    identities = identities && ab.values(0, 0) == 0.0 && bb.values.sum() / (n * n) == fb * fb;
    for (int dy = 0; dy < n; ++dy)
      for (int dx = 0; dx < n; ++dx) identities = identities && bb.values(dy, dx) == bb.values((n - dy) % n, (n - dx) % n);
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && identities && t < 10,
          format("max |fft - direct| = %.2e (tol 1e-9), identities exact: %s, %.2f s", worst,
                 identities ? "yes" : "no", t)};
}

// ------------------------------------------------------------------------ 2

Outcome criterion2() {
  Rng rng(202);
  double worst = 0;
  bool sizes = true;
  for (int k = 0; k < 20; ++k) {
    const MatrixXd s = random_matrix(128, 40, rng);
    const auto a = batch_pod_corr(s, 0.0);
    const auto b = batch_pod_svd(s, 0.0);
    sizes = sizes && a.size() == b.size();
    if (a.size() == b.size()) worst = std::max(worst, (a.projector() - b.projector()).cwiseAbs().maxCoeff());
  }
  return {sizes && worst <= 1e-8, format("max |P_corr - P_svd| = %.2e (tol 1e-8)", worst)};
}

// ------------------------------------------------------------------------ 3

Outcome criterion3() {
  Rng rng(303);
  const MatrixXd s = random_matrix(256, 64, rng);
  Eigen::JacobiSVD<MatrixXd> svd(s, Eigen::ComputeThinU);
  std::string detail;
  bool pass = true;
  for (auto method : {Method::A, Method::B, Method::C}) {
    auto rb = for_method(batch_pod_svd(s.leftCols(8), 0.0), method);
    for (Index j = 8; j < 64; j += 8) rb = update(rb, s.middleCols(j, 8), 0.0, method);
    const double angle = rb.size() == 64 ? max_angle(svd.matrixU(), rb.basis) : 1.0;
    pass = pass && angle <= 1e-3;
    detail += format("%s angle %.1e, ", to_string(method), angle);
  }

  // Method A bound on a truncated run over normalized microstructure snapshots.
  const double eps = 0.025;
  const Index n_a = 8;
  EnsembleSpec ens;
  ens.resolution = 48;
  ens.seed = 304;
  MatrixXd snaps = snapshot_matrix(images_of(generate_ensemble(ens, 0, 430, 1)), 1);
  snaps.colwise().normalize();
  IncrementalPod<double> pod(batch_pod_svd(snaps.leftCols(30), eps), {eps, n_a, 1000, Method::A});
  for (Index j = 30; j < snaps.cols(); ++j) pod.step(snaps.col(j));
  pod.flush();
  const auto rb = pod.current();
  double worst = 0;
  for (Index j = 30; j < snaps.cols(); ++j) worst = std::max(worst, projection_error(*rb, snaps.col(j)));
  const double bound = std::sqrt(static_cast<double>(n_a)) * eps;
  pass = pass && worst <= bound && pod.enrichments() > 0;
  detail += format("A bound: max error %.4f <= sqrt(n_a) eps = %.4f over %lu enrichments", worst, bound,
                   static_cast<unsigned long>(pod.enrichments()));
  return {pass, detail};
}

// ------------------------------------------------------------------ 4 and 5

RbTrainConfig rb_config(Morphology morph, Method method, Index cap) {
  RbTrainConfig c;
  c.stream.resolution = 64;
  c.stream.morphology = morph;
  c.stream.seed = 11;
  c.enrich.eps = 0.025;
  c.enrich.buffer_size = 16;
  c.enrich.convergence_streak = 50;
  c.enrich.method = method;
  c.max_snapshots = cap;
  c.threads = 0;
  return c;
}

MatrixXd validation_snapshots(Morphology morph) {
  EnsembleSpec v = rb_config(morph, Method::C, 0).stream;
  v.seed = 999;
  return snapshot_matrix(images_of(generate_ensemble(v, 0, 500)));
}

struct RbRun {
  std::vector<RbTrainResult> results;  // A, B, C
  std::string table_csv;
  std::string curve_csv;
  double seconds = 0;
};

RbRun circle_rb_run(const MatrixXd& validation) {
  const auto t0 = std::chrono::steady_clock::now();
  RbRun run;
  nlohmann::json configs = nlohmann::json::array();
  std::vector<RbTrainReport> reports;
  std::vector<std::pair<std::string, VectorXd>> curves;
  for (auto m : {Method::A, Method::B, Method::C}) {
    const auto cfg = rb_config(Morphology::Circle, m, 6000);
    configs.push_back(cfg);
    run.results.push_back(train_reduced_basis(cfg));
    reports.push_back(run.results.back().report);
    curves.emplace_back(to_string(m), rb_accuracy_curve(run.results.back().basis, validation));
  }
  const auto hash = config_hash(configs);
  run.table_csv = method_table_csv(reports, 0.025, hash);
  run.curve_csv = accuracy_curve_csv(curves, hash);
  run.seconds = seconds_since(t0);
  return run;
}

Outcome criterion4(const RbRun& run) {
  const auto& a = run.results[0].report;
  const auto& b = run.results[1].report;
  const auto& c = run.results[2].report;
  const bool pass = b.converged && c.converged && b.final_modes < a.final_modes && c.final_modes < a.final_modes &&
                    run.seconds < 600;
  return {pass, format("final sizes A=%ld B=%ld C=%ld, converged A=%d B=%d C=%d, %.0f s", static_cast<long>(a.final_modes),
                       static_cast<long>(b.final_modes), static_cast<long>(c.final_modes), a.converged, b.converged,
                       c.converged, run.seconds)};
}

Outcome criterion5(const RbRun& run, const MatrixXd& circle_validation) {
  const MatrixXd rect_validation = validation_snapshots(Morphology::Rectangle);
  bool pass = true;
  std::string detail;
  for (int i : {1, 2}) {
    const auto method = i == 1 ? Method::B : Method::C;
    const Index circle = modes_for(rb_accuracy_curve(run.results[i].basis, circle_validation), 0.05);
    const auto rect = train_reduced_basis(rb_config(Morphology::Rectangle, method, 2000));
    const VectorXd rect_curve = rb_accuracy_curve(rect.basis, rect_validation);
    const Index rectangle = modes_for(rect_curve, 0.05);
    pass = pass && circle <= 30 && rectangle > circle;
    detail += format("%s: circles %ld modes, rectangles %s%ld modes; ", to_string(method), static_cast<long>(circle),
                     rectangle > rect_curve.size() ? "> " : "",
                     static_cast<long>(std::min<Index>(rectangle, rect_curve.size())));
  }
  return {pass, detail + "(level 0.05, circles need <= 30)"};
}

// ------------------------------------------------------------------------ 6

Outcome criterion6() {
  const PhaseLaw law;
  auto rel = [](double x, double y) { return std::abs(x / y - 1.0); };

  double single = 0;
  for (std::uint8_t phase : {0, 1}) {
    const auto k = effective_conductivity(MicrostructureImage::filled(32, phase), law).kappa;
    const double expect = phase ? law.kappa_b() : law.kappa_a;
    single = std::max({single, rel(k.k11, expect), rel(k.k22, expect), std::abs(k.k12)});
  }

  const int n = 64;
  std::vector<std::uint8_t> stripes(n * n), checker(128 * 128);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) stripes[r * n + c] = r < n / 2;
  for (int r = 0; r < 128; ++r)
    for (int c = 0; c < 128; ++c) checker[r * 128 + c] = (r < 64) != (c < 64);
  const auto lam = effective_conductivity(MicrostructureImage(n, stripes), law).kappa;
  const double laminate = std::max(rel(lam.k11, 0.6), rel(lam.k22, 1.0 / 3.0));
  const auto chk = effective_conductivity(MicrostructureImage(128, checker), law).kappa;
  const double checkerboard = std::max(rel(chk.k11, std::sqrt(0.2)), rel(chk.k22, std::sqrt(0.2)));

  EnsembleSpec ens;
  ens.resolution = 64;
  ens.morphology = Morphology::Mixed;
  ens.seed = 606;
  const auto images = images_of(generate_ensemble(ens, 0, 500));
  const auto labels = label_images(images, law);
  int violations = 0;
  double max_k12 = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto [lo, hi] = wiener_bounds(images[i].achieved_vf(), law);
    const auto ev = labels[i].kappa.eigenvalues();
    violations += ev(0) < lo * (1 - 1e-9) || ev(1) > hi * (1 + 1e-9);
    max_k12 = std::max(max_k12, std::abs(labels[i].kappa.k12));
  }
  const bool pass = single <= 1e-12 && laminate <= 0.01 && checkerboard <= 0.01 && violations == 0 && max_k12 < 0.15;
  return {pass, format("single phase %.1e, laminate %.2e, checkerboard(128) %.2e, bound violations %d/500, "
                       "max |k12| %.4f",
                       single, laminate, checkerboard, violations, max_k12)};
}

// ------------------------------------------------------------------------ 7

double gradient_mismatch(Mlp& net, const MatrixXd& x, const MatrixXd& y) {
  Mlp::Gradients g;
  net.backprop(x, y, g);
  const VectorXd analytic = net.flatten(g);
  const VectorXd p0 = net.parameters();
  VectorXd numeric(p0.size());
  const double h = 1e-6;
  for (Index i = 0; i < p0.size(); ++i) {
    VectorXd p = p0;
    p(i) += h;
    net.set_parameters(p);
    const double up = net.cost(x, y);
    p(i) = p0(i) - h;
    net.set_parameters(p);
    numeric(i) = (up - net.cost(x, y)) / (2 * h);
  }
  net.set_parameters(p0);
  return (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
}

Outcome criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(707);
  double worst = 0;
  int checks = 0;
  const Activation tags[] = {Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Softplus};
  for (int k = 0; k < 10; ++k) {
    std::vector<Index> sizes{1 + static_cast<Index>(rng.index(7))};
    const auto depth = 1 + rng.index(3);
    for (std::uint64_t l = 0; l < depth; ++l) sizes.push_back(1 + static_cast<Index>(rng.index(12)));
    sizes.push_back(3);
    const MatrixXd x = random_matrix(sizes.front(), 8, rng) * 2.0;
    const MatrixXd y = random_matrix(3, 8, rng);
    for (auto tag : tags) {
      Mlp net(sizes, std::vector<Activation>(depth, tag), rng);
      // Random biases keep ReLU pre-activations off the kink.
      net.set_parameters(random_matrix(net.parameter_count(), 1, rng));
      worst = std::max(worst, gradient_mismatch(net, x, y));
      ++checks;
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-5 && t < 60,
          format("max relative gradient mismatch %.2e over %d checks (tol 1e-5), %.2f s", worst, checks, t)};
}

// ----------------------------------------------------------------- 8 and 9

struct AnnRun {
  SurrogateModel model;
  ErrorReport circles;
  ErrorReport rectangles;
  std::string error_csv;
  std::string loss_csv;
  double seconds = 0;
};

LabeledSet labeled(const ReducedBasis<double>& rb, const std::vector<MicrostructureImage>& images, Index h) {
  std::vector<VoigtVector> labels;
  for (const auto& r : label_images(images, PhaseLaw{})) labels.push_back(to_voigt(r.kappa));
  return build_labeled_set(rb, images, labels, h);
}

AnnRun circle_ann_run() {
  const auto t0 = std::chrono::steady_clock::now();
  AnnRun run;
  RbTrainConfig rbc;
  rbc.stream.resolution = 100;
  rbc.stream.morphology = Morphology::Circle;
  rbc.stream.seed = 21;
  rbc.enrich.eps = 0.025;
  rbc.enrich.buffer_size = 16;
  rbc.enrich.convergence_streak = 50;
  rbc.enrich.method = Method::C;
  rbc.max_snapshots = 3000;
  const auto rb = train_reduced_basis(rbc).basis;

  Architecture arch;  // h = 6, {7, 39}, relu / softplus
  TrainConfig tc;     // 1000 train, 500 validation, 5 restarts
  tc.seed = 23;

  EnsembleSpec data = rbc.stream;
  data.seed = 22;
  const auto all = labeled(rb, images_of(generate_ensemble(data, 0, 2000)), arch.h);
  std::vector<Index> fit_cols, test_cols;
  for (Index i = 0; i < all.size(); ++i) (i < 1500 ? fit_cols : test_cols).push_back(i);
  run.model = train(all.subset(fit_cols), arch, tc);
  run.circles = evaluate(run.model, all.subset(test_cols));

  EnsembleSpec rect = data;
  rect.morphology = Morphology::Rectangle;
  rect.seed = 24;
  run.rectangles = evaluate(run.model, labeled(rb, images_of(generate_ensemble(rect, 0, 500)), arch.h));

  nlohmann::json config = {{"basis", rbc}, {"data", data}, {"rectangles", rect}, {"train_seed", tc.seed}};
  const auto hash = config_hash(config);
  run.error_csv = error_matrix_csv({{"circle", "circle", run.circles}, {"circle", "rectangle", run.rectangles}}, hash);
  run.loss_csv = loss_curve_csv(run.model.info, hash);
  run.seconds = seconds_since(t0);
  return run;
}

Outcome criterion8(const AnnRun& run) {
  const auto& r = run.circles;
  return {r.mean_rel(0) <= 0.05 && r.mean_rel(1) <= 0.05 && run.seconds < 7200,
          format("circle test set (500): mean relative error k11 %.2f%%, k22 %.2f%% (tol 5%%), best epoch %ld of "
                 "restart %ld, %.0f s",
                 100 * r.mean_rel(0), 100 * r.mean_rel(1), static_cast<long>(run.model.info.best_epoch),
                 static_cast<long>(run.model.info.restart), run.seconds)};
}

Outcome criterion9(const AnnRun& run) {
  const auto& c = run.circles;
  const auto& r = run.rectangles;
  return {r.mean_rel(0) > c.mean_rel(0) && r.mean_rel(1) > c.mean_rel(1),
          format("circle-trained model on rectangles: k11 %.2f%%, k22 %.2f%% vs circles %.2f%%, %.2f%%",
                 100 * r.mean_rel(0), 100 * r.mean_rel(1), 100 * c.mean_rel(0), 100 * c.mean_rel(1))};
}

// ----------------------------------------------------------------------- 10

Outcome criterion10(const RbRun& rb_first, const AnnRun& ann_first, const MatrixXd& circle_validation) {
  const auto rb_again = circle_rb_run(circle_validation);
  const auto ann_again = circle_ann_run();
  const bool table = rb_again.table_csv == rb_first.table_csv;
  const bool curve = rb_again.curve_csv == rb_first.curve_csv;
  const bool errors = ann_again.error_csv == ann_first.error_csv;
  const bool loss = ann_again.loss_csv == ann_first.loss_csv;
  return {table && curve && errors && loss,
          format("byte-identical on rerun: method table %s, accuracy curves %s, error matrix %s, loss curve %s",
                 table ? "yes" : "no", curve ? "yes" : "no", errors ? "yes" : "no", loss ? "yes" : "no")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "two-point function oracle", criterion1);
  report(2, "batch POD routes agree", criterion2);
  report(3, "incremental methods vs batch", criterion3);

  const MatrixXd circle_validation = validation_snapshots(Morphology::Circle);
  RbRun rb;
  report(4, "enrichment loop", [&] {
    rb = circle_rb_run(circle_validation);
    return criterion4(rb);
  });
  report(5, "reduced basis accuracy curve", [&] { return criterion5(rb, circle_validation); });
  report(6, "homogenization analytics", criterion6);
  report(7, "network gradient check", criterion7);

  AnnRun ann;
  report(8, "surrogate quality on circles", [&] {
    ann = circle_ann_run();
    return criterion8(ann);
  });
  report(9, "surrogate on an unseen class", [&] { return criterion9(ann); });
  report(10, "reproducible artifacts", [&] { return criterion10(rb, ann, circle_validation); });

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
