#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "microkappa/correlation.hpp"
#include "microkappa/homogenize.hpp"
#include "microkappa/image.hpp"
#include "microkappa/podrb.hpp"
#include "microkappa/rng.hpp"

namespace microkappa {

/// xi = [f_b; leading h coefficients of B^T s].
struct FeatureVector {
  Eigen::VectorXd xi;
  Eigen::Index h() const { return xi.size() - 1; }
};

FeatureVector features_from_snapshot(const ReducedBasis<double>& rb, const Snapshot<double>& s,
                                     Eigen::Index h);

/// Throws HTooLarge when h > rb.size() (or h < 1) and ResolutionMismatch when
/// the image does not match the basis dimension.
FeatureVector extract_features(const ReducedBasis<double>& rb, const MicrostructureImage& img,
                               Eigen::Index h);

/// Per-feature z-scoring of inputs, a single mean shift of the outputs.
/// Samples are columns.
struct Standardizer {
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_std;
  Eigen::VectorXd output_shift;

  /// Population statistics of the training columns. Throws EmptyDataset for
  /// fewer than two samples and ConstantFeature for a zero-spread feature.
  static Standardizer fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& labels);

  Eigen::MatrixXd transform_input(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd inverse_input(const Eigen::MatrixXd& z) const;
  Eigen::MatrixXd transform_output(const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd inverse_output(const Eigen::MatrixXd& z) const;
};

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1, Sigmoid = 2, Softplus = 3, Identity = 4 };

const char* to_string(Activation a);
/// Accepts relu, tanh, sigmoid (or sigm), softplus.
Activation parse_activation(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd weights;  ///< out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::Identity;
};

/// Dense feed-forward network; hidden layers use the given activations, the
/// output layer is linear. Cost is the mean squared error over all output
/// entries of a batch (samples are columns).
class Mlp {
 public:
  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
  };

  Mlp() = default;

  /// sizes = {inputs, hidden..., outputs}; weights uniform in
  /// +-sqrt(3 / fan_in), biases zero.
  Mlp(const std::vector<Eigen::Index>& sizes, const std::vector<Activation>& hidden, Rng& rng);

  explicit Mlp(std::vector<DenseLayer> layers);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  double cost(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;
  /// Fills `grad` and returns the cost.
  double backprop(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradients& grad) const;

  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  Eigen::VectorXd flatten(const Gradients& g) const;

  std::vector<Eigen::Index> sizes() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
};

struct Architecture {
  Eigen::Index h = 6;
  std::vector<Eigen::Index> hidden{7, 39};
  std::vector<Activation> activations{Activation::Relu, Activation::Softplus};

  void validate() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  Eigen::Index batch_size = 32;
  Eigen::Index max_epochs = 10000;
  Eigen::Index n_train = 1000;
  Eigen::Index n_val = 500;
  Eigen::Index restarts = 5;
  /// Stop after this many epochs without a validation improvement; 0 runs
  /// all max_epochs.
  Eigen::Index patience = 0;
  std::uint64_t seed = 0;
};

struct TrainingInfo {
  Eigen::Index epochs_run = 0;
  Eigen::Index best_epoch = 0;  ///< 1-based
  double best_val = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  Eigen::Index restart = 0;
  std::vector<double> train_curve;  ///< standardized MSE per epoch
  std::vector<double> val_curve;
};

/// Samples are columns: features (h+1) x m, labels 3 x m (Voigt vectors).
struct LabeledSet {
  Eigen::MatrixXd features;
  Eigen::MatrixXd labels;

  Eigen::Index size() const { return features.cols(); }
  LabeledSet subset(const std::vector<Eigen::Index>& columns) const;
};

struct SurrogateModel {
  Mlp net;
  Standardizer scaler;
  Eigen::Index h = 0;
  std::uint64_t basis_hash = 0;
  TrainingInfo info;

  /// Voigt predictions for raw feature columns.
  Eigen::MatrixXd predict_features(const Eigen::MatrixXd& features) const;
};

struct DatasetSplit {
  LabeledSet train;
  LabeledSet validation;
};

/// Shuffles with `seed` and takes the first n_train / next n_val columns.
/// When the set is smaller than n_train + n_val it is split 2:1 instead.
DatasetSplit split_dataset(const LabeledSet& data, Eigen::Index n_train, Eigen::Index n_val,
                           std::uint64_t seed);

/// One training run from a fresh initialization drawn from `init_seed`.
/// Returns the parameters of the epoch with the lowest validation cost.
/// Throws Diverged on a non-finite cost.
SurrogateModel train_once(const DatasetSplit& split, const Architecture& arch,
                          const TrainConfig& config, std::uint64_t init_seed);

/// Split, then `restarts` independent runs; keeps the lowest validation cost.
SurrogateModel train(const LabeledSet& data, const Architecture& arch, const TrainConfig& config);

/// Image -> two-point function -> shift -> projection -> network -> Voigt.
VoigtVector predict(const SurrogateModel& model, const MicrostructureImage& img,
                    const ReducedBasis<double>& rb);

struct ErrorReport {
  Eigen::Index count = 0;
  Eigen::Vector3d mae = Eigen::Vector3d::Zero();
  Eigen::Vector3d max_ae = Eigen::Vector3d::Zero();
  /// Relative errors (fractions) for k11 and k22 only.
  Eigen::Vector2d mean_rel = Eigen::Vector2d::Zero();
  Eigen::Vector2d max_rel = Eigen::Vector2d::Zero();
  Eigen::MatrixXd abs_error;  ///< 3 x count, Voigt components
};

ErrorReport compare(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth);
ErrorReport evaluate(const SurrogateModel& model, const LabeledSet& test);

/// Absolute-error histogram of k11, k22 and k12 (tensor units):
/// bin_lo,bin_hi,k11,k22,k12.
std::string histogram_csv(const ErrorReport& report, int bins);

/// Model file layout (little-endian): "MKNN", u32 version, u64 basis hash,
/// u64 h, u64 layer count, per layer {u8 activation, matrix W, matrix b},
/// standardizer {matrix mean, matrix std, matrix shift}, training info
/// {u64 epochs, u64 best epoch, f64 best val, u64 seed, u64 restart,
/// matrix train curve, matrix val curve}. Each matrix is u64 rows, u64 cols
/// and column-major f64 values.
void save_model(const std::filesystem::path& path, const SurrogateModel& model);
SurrogateModel load_model(const std::filesystem::path& path);

}  // namespace microkappa
