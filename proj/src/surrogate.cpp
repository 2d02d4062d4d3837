#include "microkappa/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "microkappa/binary_io.hpp"
#include "microkappa/parallel.hpp"
#include "microkappa/podrb_io.hpp"

namespace microkappa {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

FeatureVector features_from_snapshot(const ReducedBasis<double>& rb, const Snapshot<double>& s,
                                     Index h) {
  require(h >= 1 && h <= rb.size(), ErrorKind::HTooLarge,
          "h = " + std::to_string(h) + " outside [1, " + std::to_string(rb.size()) + "]");
  require(s.values.size() == rb.dim(), ErrorKind::ResolutionMismatch,
          "snapshot length " + std::to_string(s.values.size()) + " does not match basis dimension " +
              std::to_string(rb.dim()));
  FeatureVector f;
  f.xi.resize(h + 1);
  f.xi(0) = s.f_b;
  f.xi.tail(h).noalias() = rb.basis.leftCols(h).transpose() * s.values;
  return f;
}

FeatureVector extract_features(const ReducedBasis<double>& rb, const MicrostructureImage& img,
                               Index h) {
  require(h >= 1 && h <= rb.size(), ErrorKind::HTooLarge,
          "h = " + std::to_string(h) + " outside [1, " + std::to_string(rb.size()) + "]");
  require(static_cast<Index>(img.size()) == rb.dim(), ErrorKind::ResolutionMismatch,
          "image with " + std::to_string(img.size()) + " pixels does not match basis dimension " +
              std::to_string(rb.dim()));
  return features_from_snapshot(rb, snapshot_of<double>(img), h);
}

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const MatrixXd& features, const MatrixXd& labels) {
  require(features.cols() >= 2, ErrorKind::EmptyDataset, "standardization needs at least two samples");
  require(labels.cols() == features.cols(), ErrorKind::InvalidArgument,
          "feature and label counts differ");
  Standardizer s;
  const double m = static_cast<double>(features.cols());
  s.input_mean = features.rowwise().mean();
  s.input_std = ((features.colwise() - s.input_mean).array().square().rowwise().sum() / m).sqrt();
  for (Index i = 0; i < s.input_std.size(); ++i) {
    const double scale = std::max(1.0, std::abs(s.input_mean(i)));
    require(s.input_std(i) > 1e-12 * scale, ErrorKind::ConstantFeature,
            "feature " + std::to_string(i) + " is constant over the training set");
  }
  s.output_shift = labels.rowwise().mean();
  return s;
}

MatrixXd Standardizer::transform_input(const MatrixXd& x) const {
  return (x.colwise() - input_mean).array().colwise() / input_std.array();
}

MatrixXd Standardizer::inverse_input(const MatrixXd& z) const {
  return (z.array().colwise() * input_std.array()).matrix().colwise() + input_mean;
}

MatrixXd Standardizer::transform_output(const MatrixXd& y) const { return y.colwise() - output_shift; }

MatrixXd Standardizer::inverse_output(const MatrixXd& z) const { return z.colwise() + output_shift; }

// ---------------------------------------------------------------------------

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softplus: return "softplus";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid" || name == "sigm") return Activation::Sigmoid;
  if (name == "softplus") return Activation::Softplus;
  throw Error(ErrorKind::InvalidArgument, "unknown activation '" + name + "'");
}

namespace {

void activate(Activation a, const MatrixXd& z, MatrixXd& out) {
  switch (a) {
    case Activation::Relu: out = z.cwiseMax(0.0); break;
    case Activation::Tanh: out = z.array().tanh(); break;
    case Activation::Sigmoid: out = (1.0 + (-z.array()).exp()).inverse(); break;
    case Activation::Softplus:
      out = z.unaryExpr([](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); });
      break;
    case Activation::Identity: out = z; break;
  }
}

// Multiplies delta in place by f'(z).
void scale_by_derivative(Activation a, const MatrixXd& z, MatrixXd& delta) {
  switch (a) {
    case Activation::Relu: delta.array() *= (z.array() > 0.0).cast<double>(); break;
    case Activation::Tanh: delta.array() *= 1.0 - z.array().tanh().square(); break;
    case Activation::Sigmoid: {
      const Eigen::ArrayXXd s = (1.0 + (-z.array()).exp()).inverse();
      delta.array() *= s * (1.0 - s);
      break;
    }
    case Activation::Softplus: delta.array() *= (1.0 + (-z.array()).exp()).inverse(); break;
    case Activation::Identity: break;
  }
}

}  // namespace

Mlp::Mlp(const std::vector<Index>& sizes, const std::vector<Activation>& hidden, Rng& rng) {
  require(sizes.size() >= 2, ErrorKind::InvalidArgument, "network needs input and output sizes");
  require(hidden.size() == sizes.size() - 2, ErrorKind::InvalidArgument,
          "one activation per hidden layer required");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Index in = sizes[l], out = sizes[l + 1];
    require(in >= 1 && out >= 1, ErrorKind::InvalidArgument, "layer sizes must be positive");
    DenseLayer layer;
    const double limit = std::sqrt(3.0 / static_cast<double>(in));
    layer.weights.resize(out, in);
    for (Index j = 0; j < in; ++j)
      for (Index i = 0; i < out; ++i) layer.weights(i, j) = rng.uniform(-limit, limit);
    layer.bias = VectorXd::Zero(out);
    layer.activation = l < hidden.size() ? hidden[l] : Activation::Identity;
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), ErrorKind::InvalidArgument, "network has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    require(L.bias.size() == L.weights.rows(), ErrorKind::InvalidArgument, "bias/weight shape mismatch");
    if (l > 0)
      require(L.weights.cols() == layers_[l - 1].weights.rows(), ErrorKind::InvalidArgument,
              "layer shapes do not chain");
  }
  require(layers_.back().activation == Activation::Identity, ErrorKind::InvalidArgument,
          "output layer must be linear");
}

MatrixXd Mlp::forward(const MatrixXd& x) const {
  MatrixXd a = x, z;
  for (const auto& L : layers_) {
    z.noalias() = L.weights * a;
    z.colwise() += L.bias;
    activate(L.activation, z, a);
  }
  return a;
}

double Mlp::cost(const MatrixXd& x, const MatrixXd& y) const {
  return (forward(x) - y).squaredNorm() / static_cast<double>(y.size());
}

double Mlp::backprop(const MatrixXd& x, const MatrixXd& y, Gradients& grad) const {
  const std::size_t depth = layers_.size();
  std::vector<MatrixXd> zs(depth), as(depth + 1);
  as[0] = x;
  for (std::size_t l = 0; l < depth; ++l) {
    zs[l].noalias() = layers_[l].weights * as[l];
    zs[l].colwise() += layers_[l].bias;
    activate(layers_[l].activation, zs[l], as[l + 1]);
  }
  MatrixXd delta = as[depth] - y;
  const double cost = delta.squaredNorm() / static_cast<double>(y.size());
  delta *= 2.0 / static_cast<double>(y.size());

  grad.weights.resize(depth);
  grad.bias.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    scale_by_derivative(layers_[l].activation, zs[l], delta);
    grad.weights[l].noalias() = delta * as[l].transpose();
    grad.bias[l] = delta.rowwise().sum();
    if (l > 0) {
      MatrixXd next;
      next.noalias() = layers_[l].weights.transpose() * delta;
      delta = std::move(next);
    }
  }
  return cost;
}

Index Mlp::parameter_count() const {
  Index n = 0;
  for (const auto& L : layers_) n += L.weights.size() + L.bias.size();
  return n;
}

VectorXd Mlp::parameters() const {
  VectorXd p(parameter_count());
  Index k = 0;
  for (const auto& L : layers_) {
    p.segment(k, L.weights.size()) = L.weights.reshaped();
    k += L.weights.size();
    p.segment(k, L.bias.size()) = L.bias;
    k += L.bias.size();
  }
  return p;
}

void Mlp::set_parameters(const VectorXd& flat) {
  require(flat.size() == parameter_count(), ErrorKind::InvalidArgument, "parameter count mismatch");
  Index k = 0;
  for (auto& L : layers_) {
    L.weights.reshaped() = flat.segment(k, L.weights.size());
    k += L.weights.size();
    L.bias = flat.segment(k, L.bias.size());
    k += L.bias.size();
  }
}

VectorXd Mlp::flatten(const Gradients& g) const {
  VectorXd p(parameter_count());
  Index k = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    p.segment(k, g.weights[l].size()) = g.weights[l].reshaped();
    k += g.weights[l].size();
    p.segment(k, g.bias[l].size()) = g.bias[l];
    k += g.bias[l].size();
  }
  return p;
}

std::vector<Index> Mlp::sizes() const {
  std::vector<Index> s;
  if (layers_.empty()) return s;
  s.push_back(layers_.front().weights.cols());
  for (const auto& L : layers_) s.push_back(L.weights.rows());
  return s;
}

void Architecture::validate() const {
  require(h >= 1, ErrorKind::InvalidArgument, "h must be at least 1");
  require(!hidden.empty(), ErrorKind::InvalidArgument, "at least one hidden layer required");
  require(hidden.size() == activations.size(), ErrorKind::InvalidArgument,
          "number of activations must match number of hidden layers");
  for (Index n : hidden) require(n >= 1, ErrorKind::InvalidArgument, "hidden layer sizes must be positive");
  for (Activation a : activations)
    require(a != Activation::Identity, ErrorKind::InvalidArgument,
            "hidden activations must be relu, tanh, sigmoid or softplus");
}

// ---------------------------------------------------------------------------

LabeledSet LabeledSet::subset(const std::vector<Index>& columns) const {
  LabeledSet out;
  out.features.resize(features.rows(), static_cast<Index>(columns.size()));
  out.labels.resize(labels.rows(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.features.col(static_cast<Index>(k)) = features.col(columns[k]);
    out.labels.col(static_cast<Index>(k)) = labels.col(columns[k]);
  }
  return out;
}

MatrixXd SurrogateModel::predict_features(const MatrixXd& features) const {
  require(features.rows() == h + 1, ErrorKind::InvalidArgument,
          "expected " + std::to_string(h + 1) + " features, got " + std::to_string(features.rows()));
  return scaler.inverse_output(net.forward(scaler.transform_input(features)));
}

DatasetSplit split_dataset(const LabeledSet& data, Index n_train, Index n_val, std::uint64_t seed) {
  const Index m = data.size();
  require(m >= 3, ErrorKind::EmptyDataset, "dataset has " + std::to_string(m) + " samples, need at least 3");
  require(data.labels.cols() == m, ErrorKind::InvalidArgument, "feature and label counts differ");
  require(n_train >= 1 && n_val >= 1, ErrorKind::InvalidArgument, "split sizes must be positive");
  if (n_train + n_val > m) {
    n_train = (2 * m) / 3;
    n_val = m - n_train;
  }
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  const auto mid = order.begin() + n_train;
  DatasetSplit split;
  split.train = data.subset({order.begin(), mid});
  split.validation = data.subset({mid, mid + n_val});
  return split;
}

namespace {

struct AdamState {
  std::vector<MatrixXd> mw, vw;
  std::vector<VectorXd> mb, vb;
  long step = 0;

  explicit AdamState(const Mlp& net) {
    for (const auto& L : net.layers()) {
      mw.push_back(MatrixXd::Zero(L.weights.rows(), L.weights.cols()));
      vw.push_back(mw.back());
      mb.push_back(VectorXd::Zero(L.bias.size()));
      vb.push_back(mb.back());
    }
  }

  void apply(Mlp& net, const Mlp::Gradients& g, const TrainConfig& c) {
    ++step;
    const double c1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = c.beta1 * m + (1.0 - c.beta1) * grad;
      v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
      param.array() -= c.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + c.adam_eps);
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weights, mw[l], vw[l], g.weights[l]);
      update(layers[l].bias, mb[l], vb[l], g.bias[l]);
    }
  }
};

}  // namespace

SurrogateModel train_once(const DatasetSplit& split, const Architecture& arch, const TrainConfig& config,
                          std::uint64_t init_seed) {
  arch.validate();
  require(config.batch_size >= 1 && config.max_epochs >= 1, ErrorKind::InvalidArgument,
          "batch size and epoch count must be positive");
  const auto& train = split.train;
  const auto& val = split.validation;
  require(train.size() >= 2 && val.size() >= 1, ErrorKind::EmptyDataset, "training or validation set is empty");
  require(train.features.rows() == arch.h + 1, ErrorKind::InvalidArgument,
          "feature length " + std::to_string(train.features.rows()) + " does not match h + 1 = " +
              std::to_string(arch.h + 1));

  SurrogateModel model;
  model.h = arch.h;
  model.scaler = Standardizer::fit(train.features, train.labels);
  const MatrixXd xt = model.scaler.transform_input(train.features);
  const MatrixXd yt = model.scaler.transform_output(train.labels);
  const MatrixXd xv = model.scaler.transform_input(val.features);
  const MatrixXd yv = model.scaler.transform_output(val.labels);

  std::vector<Index> sizes{arch.h + 1};
  sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
  sizes.push_back(train.labels.rows());
  Rng rng(init_seed);
  Mlp net(sizes, arch.activations, rng);
  AdamState adam(net);

  const Index m = train.size();
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  Mlp::Gradients grad;
  MatrixXd xb, yb;

  TrainingInfo& info = model.info;
  info.seed = init_seed;
  Mlp best = net;
  Index since_best = 0;
  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (Index start = 0; start < m; start += config.batch_size) {
      const Index count = std::min(config.batch_size, m - start);
      xb.resize(xt.rows(), count);
      yb.resize(yt.rows(), count);
      for (Index k = 0; k < count; ++k) {
        xb.col(k) = xt.col(order[static_cast<std::size_t>(start + k)]);
        yb.col(k) = yt.col(order[static_cast<std::size_t>(start + k)]);
      }
      net.backprop(xb, yb, grad);
      adam.apply(net, grad, config);
    }
    const double tc = net.cost(xt, yt);
    const double vc = net.cost(xv, yv);
    require(std::isfinite(tc) && std::isfinite(vc), ErrorKind::Diverged,
            "non-finite cost at epoch " + std::to_string(epoch));
    info.train_curve.push_back(tc);
    info.val_curve.push_back(vc);
    info.epochs_run = epoch;
    if (vc < info.best_val) {
      info.best_val = vc;
      info.best_epoch = epoch;
      best = net;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  model.net = std::move(best);
  return model;
}

SurrogateModel train(const LabeledSet& data, const Architecture& arch, const TrainConfig& config) {
  require(config.restarts >= 1, ErrorKind::InvalidArgument, "at least one restart required");
  const DatasetSplit split = split_dataset(data, config.n_train, config.n_val, derive_seed(config.seed, 0));
  std::vector<SurrogateModel> runs(static_cast<std::size_t>(config.restarts));
  parallel_for(runs.size(), 0, [&](std::size_t r) {
    runs[r] = train_once(split, arch, config, derive_seed(config.seed, 1 + r));
    runs[r].info.restart = static_cast<Index>(r);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].info.best_val < runs[best].info.best_val) best = r;
  return std::move(runs[best]);
}

VoigtVector predict(const SurrogateModel& model, const MicrostructureImage& img, const ReducedBasis<double>& rb) {
  require(model.basis_hash == 0 || model.basis_hash == basis_hash(rb), ErrorKind::InvalidArgument,
          "model was trained against a different reduced basis");
  const FeatureVector f = extract_features(rb, img, model.h);
  VoigtVector v;
  v.values = model.predict_features(f.xi).col(0);
  return v;
}

// ---------------------------------------------------------------------------

ErrorReport compare(const MatrixXd& predicted, const MatrixXd& truth) {
  require(predicted.rows() == 3 && truth.rows() == 3 && predicted.cols() == truth.cols(),
          ErrorKind::InvalidArgument, "prediction and truth shapes differ");
  ErrorReport r;
  r.count = truth.cols();
  r.abs_error = (predicted - truth).cwiseAbs();
  if (r.count == 0) return r;
  r.mae = r.abs_error.rowwise().mean();
  r.max_ae = r.abs_error.rowwise().maxCoeff();
  const Eigen::ArrayXXd rel = r.abs_error.topRows(2).array() / truth.topRows(2).array().abs();
  r.mean_rel = rel.rowwise().mean();
  r.max_rel = rel.rowwise().maxCoeff();
  return r;
}

ErrorReport evaluate(const SurrogateModel& model, const LabeledSet& test) {
  return compare(model.predict_features(test.features), test.labels);
}

std::string histogram_csv(const ErrorReport& report, int bins) {
  require(bins >= 1, ErrorKind::InvalidArgument, "histogram needs at least one bin");
  // Tensor units: the Voigt shear entry carries a factor sqrt(2).
  Eigen::MatrixXd err = report.abs_error;
  if (err.rows() == 3) err.row(2) /= std::sqrt(2.0);
  double hi = report.count > 0 ? err.maxCoeff() : 0.0;
  if (!(hi > 0)) hi = 1.0;
  const double width = hi / bins;
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(bins, 3);
  for (Index j = 0; j < report.count; ++j)
    for (Index c = 0; c < 3; ++c) {
      const int b = std::min(bins - 1, static_cast<int>(err(c, j) / width));
      ++counts(b, c);
    }
  std::ostringstream out;
  out << "bin_lo,bin_hi,k11,k22,k12\n";
  char buf[64];
  for (int b = 0; b < bins; ++b) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g", b * width, (b + 1) * width);
    out << buf << ',' << counts(b, 0) << ',' << counts(b, 1) << ',' << counts(b, 2) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kModelMagic = "MKNN";
constexpr std::uint32_t kModelVersion = 1;

Eigen::Map<const VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Index>(v.size())};
}
}  // namespace

void save_model(const std::filesystem::path& path, const SurrogateModel& model) {
  BinaryWriter w(path);
  w.put_bytes(kModelMagic);
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint64_t>(model.basis_hash);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.h));
  w.put<std::uint64_t>(model.net.layers().size());
  for (const auto& L : model.net.layers()) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(L.activation));
    w.put_matrix(L.weights);
    w.put_matrix(L.bias);
  }
  w.put_matrix(model.scaler.input_mean);
  w.put_matrix(model.scaler.input_std);
  w.put_matrix(model.scaler.output_shift);
  const auto& info = model.info;
  w.put<std::uint64_t>(static_cast<std::uint64_t>(info.epochs_run));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(info.best_epoch));
  w.put<double>(info.best_val);
  w.put<std::uint64_t>(info.seed);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(info.restart));
  w.put_matrix(as_vector(info.train_curve));
  w.put_matrix(as_vector(info.val_curve));
  w.close();
}

SurrogateModel load_model(const std::filesystem::path& path) {
  BinaryReader r(path);
  require(r.get_bytes(4) == kModelMagic, ErrorKind::Format, path.string() + ": not a model file");
  const auto version = r.get<std::uint32_t>();
  require(version == kModelVersion, ErrorKind::Format,
          path.string() + ": unsupported model version " + std::to_string(version));
  SurrogateModel model;
  model.basis_hash = r.get<std::uint64_t>();
  model.h = static_cast<Index>(r.get<std::uint64_t>());
  const auto depth = r.get<std::uint64_t>();
  require(depth >= 1 && depth < 1024, ErrorKind::Format, path.string() + ": bad layer count");
  std::vector<DenseLayer> layers(depth);
  for (auto& L : layers) {
    const auto tag = r.get<std::uint8_t>();
    require(tag <= static_cast<std::uint8_t>(Activation::Identity), ErrorKind::Format,
            path.string() + ": unknown activation tag");
    L.activation = static_cast<Activation>(tag);
    L.weights = r.get_matrix();
    L.bias = r.get_matrix();
  }
  try {
    model.net = Mlp(std::move(layers));
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  model.scaler.input_mean = r.get_matrix();
  model.scaler.input_std = r.get_matrix();
  model.scaler.output_shift = r.get_matrix();
  require(model.net.sizes().front() == model.h + 1 && model.scaler.input_mean.size() == model.h + 1 &&
              model.scaler.input_std.size() == model.h + 1 &&
              model.scaler.output_shift.size() == model.net.sizes().back(),
          ErrorKind::Format, path.string() + ": inconsistent model shapes");
  auto& info = model.info;
  info.epochs_run = static_cast<Index>(r.get<std::uint64_t>());
  info.best_epoch = static_cast<Index>(r.get<std::uint64_t>());
  info.best_val = r.get<double>();
  info.seed = r.get<std::uint64_t>();
  info.restart = static_cast<Index>(r.get<std::uint64_t>());
  const VectorXd tc = r.get_matrix().reshaped();
  const VectorXd vc = r.get_matrix().reshaped();
  info.train_curve.assign(tc.begin(), tc.end());
  info.val_curve.assign(vc.begin(), vc.end());
  r.expect_end();
  return model;
}

}  // namespace microkappa
