#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include <Eigen/Dense>

#include "microkappa/error.hpp"

namespace microkappa {

/// Which update produced (or will enrich) a basis.
enum class Method : std::uint8_t { Batch = 0, A = 1, B = 2, C = 3 };

/// Eigenvalues of the snapshot correlation matrix or singular values of the
/// snapshot matrix; theta = sigma^2.
enum class SpectrumKind : std::uint8_t { Eigenvalue = 0, SingularValue = 1 };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Batch: return "batch";
    case Method::A: return "a";
    case Method::B: return "b";
    case Method::C: return "c";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "a" || s == "A") return Method::A;
  if (s == "b" || s == "B") return Method::B;
  if (s == "c" || s == "C") return Method::C;
  if (s == "batch") return Method::Batch;
  throw Error(ErrorKind::InvalidArgument, "unknown basis method '" + s + "'");
}

/// What the truncation tail of a Method B/C update is measured against:
/// the enrichment block ||dS||_F^2 (as in Method A) or the whole
/// approximated spectrum (trace of C1, sum of Sigma_Gamma^2).
enum class Normalization : std::uint8_t { Block = 0, Total = 1 };

/// Relative floor below which eigenvalues (theta, not sigma) count as zero.
inline constexpr double kEigenvalueFloor = 1e-12;
/// Orthonormality drift that triggers a re-orthonormalization pass.
inline constexpr double kOrthoTolerance = 1e-8;

/// Column-orthonormal reduced basis with its spectral sidecar.
///
/// Method A appends blocks, so its spectrum is sorted within each appended
/// block only; all other lineages keep it globally non-increasing.
template <typename Scalar = double>
struct ReducedBasis {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix basis;          ///< n x N
  Vector spectrum;       ///< N entries, see `kind`
  SpectrumKind kind = SpectrumKind::Eigenvalue;
  Matrix right_factor;   ///< absorbed x N (correlation eigenvectors), may be empty
  Scalar frobenius_sq = 0;  ///< squared Frobenius norm of everything absorbed
  std::uint64_t absorbed = 0;
  Method method = Method::Batch;
  Scalar eps = 0;

  Eigen::Index dim() const { return basis.rows(); }
  Eigen::Index size() const { return basis.cols(); }

  /// max |B^T B - I|
  Scalar orthonormality_defect() const {
    if (basis.cols() == 0) return Scalar(0);
    Matrix g = basis.transpose() * basis;
    g.diagonal().array() -= Scalar(1);
    return g.cwiseAbs().maxCoeff();
  }

  /// Eigenvalues regardless of the stored kind.
  Vector energies() const {
    return kind == SpectrumKind::Eigenvalue ? spectrum : Vector(spectrum.array().square());
  }

  /// B B^T, for tests and small problems.
  Matrix projector() const { return basis * basis.transpose(); }
};

namespace detail {

template <typename Scalar>
struct SortedEigen {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;
};

/// Symmetric eigendecomposition, non-increasing eigenvalues clamped at 0.
/// Equal eigenvalues keep the solver's order (any basis of the eigenspace).
template <typename Scalar>
SortedEigen<Scalar> sorted_eigen(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> es(c);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::IllConditioned, "symmetric eigendecomposition failed");
  SortedEigen<Scalar> out;
  out.values = es.eigenvalues().reverse().cwiseMax(Scalar(0));
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace detail

/// Smallest rank N >= min_rank with sqrt(sum_{j>N} e_j / denominator) <= eps,
/// where `energies` is non-increasing. Entries at or below
/// kEigenvalueFloor * floor_ref are never retained; when no admissible N
/// meets the tolerance the numerical rank is returned. Throws IllConditioned
/// if min_rank exceeds the numerical rank.
template <typename Vector, typename Scalar>
Eigen::Index truncation_rank(const Vector& energies, Scalar denominator, Scalar eps,
                             Eigen::Index min_rank, Scalar floor_ref) {
  const Eigen::Index m = energies.size();
  Eigen::Index rank = 0;
  while (rank < m && energies(rank) > Scalar(kEigenvalueFloor) * floor_ref) ++rank;
  if (min_rank > rank)
    throw Error(ErrorKind::IllConditioned,
                "basis would retain " + std::to_string(min_rank) + " modes but only " +
                    std::to_string(rank) + " eigenvalues are above the conditioning floor");
  // tail(N) = sum_{j >= N} e_j, accumulated from the small end.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> tail(m + 1);
  tail(m) = Scalar(0);
  for (Eigen::Index j = m - 1; j >= 0; --j) tail(j) = tail(j + 1) + energies(j);
  const Scalar budget = eps * eps * denominator;
  for (Eigen::Index n = min_rank; n < rank; ++n)
    if (tail(n) <= budget) return n;
  return rank;
}

/// Relative truncation error delta_N = sqrt(sum_{j>N} e_j / sum_j e_j).
template <typename Vector>
auto truncation_error(const Vector& energies, Eigen::Index n) {
  using Scalar = typename Vector::Scalar;
  const Scalar total = energies.sum();
  if (total <= Scalar(0)) return Scalar(0);
  const Scalar tail = energies.tail(energies.size() - n).sum();
  return std::sqrt(std::max(tail, Scalar(0)) / total);
}

/// Householder re-orthonormalization keeping every leading column span and
/// the sign of each column's component along its predecessor's complement.
template <typename Scalar>
void reorthonormalize(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& b) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = b.rows(), k = b.cols();
  if (k == 0) return;
  Eigen::HouseholderQR<Matrix> qr(b);
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  const auto r = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < k; ++j)
    if (r(j) < Scalar(0)) q.col(j) = -q.col(j);
  b = std::move(q);
}

template <typename Scalar>
void ensure_orthonormal(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& b) {
  if (b.cols() == 0) return;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g = b.transpose() * b;
  g.diagonal().array() -= Scalar(1);
  if (g.cwiseAbs().maxCoeff() > Scalar(kOrthoTolerance)) reorthonormalize(b);
}

/// Snapshot POD through the correlation matrix S^T S = V Theta V^T and
/// B = S V~ Theta~^(-1/2). Throws DegenerateInput when ||S||_F = 0.
template <typename Derived>
ReducedBasis<typename Derived::Scalar> batch_pod_corr(const Eigen::MatrixBase<Derived>& s,
                                                       typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  using Matrix = typename ReducedBasis<Scalar>::Matrix;
  require(s.cols() >= 1 && s.rows() >= 1, ErrorKind::DegenerateInput, "empty snapshot matrix");
  const Scalar total = s.squaredNorm();
  require(total > Scalar(0), ErrorKind::DegenerateInput, "snapshot matrix is identically zero");

  const Matrix corr = s.transpose() * s;
  const auto eig = detail::sorted_eigen<Scalar>(corr);
  const Eigen::Index n_modes =
      truncation_rank(eig.values, total, eps, Eigen::Index(1), eig.values(0));

  ReducedBasis<Scalar> rb;
  rb.right_factor = eig.vectors.leftCols(n_modes);
  rb.spectrum = eig.values.head(n_modes);
  rb.kind = SpectrumKind::Eigenvalue;
  rb.basis = s * rb.right_factor;
  rb.basis *= rb.spectrum.cwiseSqrt().cwiseInverse().asDiagonal();
  ensure_orthonormal(rb.basis);
  rb.frobenius_sq = total;
  rb.absorbed = static_cast<std::uint64_t>(s.cols());
  rb.method = Method::Batch;
  rb.eps = eps;
  return rb;
}

/// Snapshot POD through the thin SVD S = U Sigma W^T; B = U~.
template <typename Derived>
ReducedBasis<typename Derived::Scalar> batch_pod_svd(const Eigen::MatrixBase<Derived>& s,
                                                      typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  using Matrix = typename ReducedBasis<Scalar>::Matrix;
  require(s.cols() >= 1 && s.rows() >= 1, ErrorKind::DegenerateInput, "empty snapshot matrix");
  const Scalar total = s.squaredNorm();
  require(total > Scalar(0), ErrorKind::DegenerateInput, "snapshot matrix is identically zero");

  Eigen::BDCSVD<Matrix> svd(s.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto sigma = svd.singularValues();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> energies = sigma.array().square();
  const Eigen::Index n_modes =
      truncation_rank(energies, total, eps, Eigen::Index(1), energies(0));

  ReducedBasis<Scalar> rb;
  rb.basis = svd.matrixU().leftCols(n_modes);
  rb.spectrum = sigma.head(n_modes);
  rb.kind = SpectrumKind::SingularValue;
  rb.right_factor = svd.matrixV().leftCols(n_modes);
  ensure_orthonormal(rb.basis);
  rb.frobenius_sq = total;
  rb.absorbed = static_cast<std::uint64_t>(s.cols());
  rb.method = Method::Batch;
  rb.eps = eps;
  return rb;
}

/// ||s - B B^T s|| / ||s||. Throws ZeroSnapshot for s = 0.
template <typename Scalar, typename Derived>
Scalar projection_error(const ReducedBasis<Scalar>& rb, const Eigen::MatrixBase<Derived>& s) {
  require(s.size() == rb.dim(), ErrorKind::InvalidArgument, "snapshot dimension mismatch");
  const Scalar norm = s.norm();
  require(norm > Scalar(0), ErrorKind::ZeroSnapshot, "projection error of a zero snapshot");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coeff = rb.basis.transpose() * s;
  return (s - rb.basis * coeff).norm() / norm;
}

/// Converts the sidecar to what `method` consumes: eigenvalues (A, B) or
/// singular values (C). Method B also needs the right factor.
template <typename Scalar>
ReducedBasis<Scalar> for_method(ReducedBasis<Scalar> rb, Method method) {
  if (method == Method::C) {
    if (rb.kind == SpectrumKind::Eigenvalue) rb.spectrum = rb.spectrum.cwiseSqrt();
    rb.kind = SpectrumKind::SingularValue;
  } else {
    if (rb.kind == SpectrumKind::SingularValue) rb.spectrum = rb.spectrum.array().square();
    rb.kind = SpectrumKind::Eigenvalue;
  }
  if (method == Method::B)
    require(rb.right_factor.cols() == rb.size(), ErrorKind::InvalidArgument,
            "method B needs the correlation eigenvectors of the initial basis");
  rb.method = method;
  return rb;
}

/// Method A: append modes built from the part of the new block orthogonal to
/// the basis. Existing columns are left untouched. The block is truncated so
/// that ||dS^ - dB dB^T dS^||_F <= eps ||dS||_F (normalized by the block
/// before projection).
template <typename Scalar, typename Derived>
ReducedBasis<Scalar> update_method_a(const ReducedBasis<Scalar>& rb,
                                     const Eigen::MatrixBase<Derived>& ds, Scalar eps) {
  using Matrix = typename ReducedBasis<Scalar>::Matrix;
  require(ds.rows() == rb.dim(), ErrorKind::InvalidArgument, "snapshot dimension mismatch");
  ReducedBasis<Scalar> out = rb;
  out.method = Method::A;
  const Scalar block_sq = ds.squaredNorm();
  out.frobenius_sq += block_sq;
  out.absorbed += static_cast<std::uint64_t>(ds.cols());
  if (ds.cols() == 0 || block_sq == Scalar(0)) return out;

  // Classical Gram-Schmidt applied twice.
  Matrix residual = ds - rb.basis * (rb.basis.transpose() * ds);
  residual -= rb.basis * (rb.basis.transpose() * residual);

  const auto eig = detail::sorted_eigen<Scalar>(Matrix(residual.transpose() * residual));
  const Scalar floor_ref = std::max(eig.values(0), block_sq);
  const Eigen::Index added = truncation_rank(eig.values, block_sq, eps, Eigen::Index(0), floor_ref);
  if (added == 0) return out;

  Matrix delta = residual * eig.vectors.leftCols(added);
  delta *= eig.values.head(added).cwiseSqrt().cwiseInverse().asDiagonal();
  Matrix cross = rb.basis.transpose() * delta;
  Matrix gram = delta.transpose() * delta;
  gram.diagonal().array() -= Scalar(1);
  if (std::max(cross.size() ? cross.cwiseAbs().maxCoeff() : Scalar(0), gram.cwiseAbs().maxCoeff()) >
      Scalar(kOrthoTolerance)) {
    delta -= rb.basis * cross;
    reorthonormalize(delta);
  }

  out.basis.conservativeResize(Eigen::NoChange, rb.size() + added);
  out.basis.rightCols(added) = delta;
  out.spectrum.conservativeResize(rb.size() + added);
  out.spectrum.tail(added) = eig.values.head(added);
  out.kind = SpectrumKind::Eigenvalue;
  out.right_factor.resize(0, 0);
  return out;
}

/// Method B: eigendecomposition of the approximated correlation matrix
///   C1 = [[Theta, Theta^(1/2) B^T dS], [sym, dS^T dS]] = V1 Theta1 V1^T
/// and B <- [B Theta^(1/2) | dS] V1~ Theta1~^(-1/2). The basis never shrinks;
/// the discarded tail of Theta1 is measured against `norm`.
template <typename Scalar, typename Derived>
ReducedBasis<Scalar> update_method_b(const ReducedBasis<Scalar>& rb,
                                     const Eigen::MatrixBase<Derived>& ds, Scalar eps,
                                     Normalization norm = Normalization::Block) {
  using Matrix = typename ReducedBasis<Scalar>::Matrix;
  using Vector = typename ReducedBasis<Scalar>::Vector;
  require(ds.rows() == rb.dim(), ErrorKind::InvalidArgument, "snapshot dimension mismatch");
  require(rb.kind == SpectrumKind::Eigenvalue && rb.right_factor.cols() == rb.size(),
          ErrorKind::InvalidArgument, "method B needs eigenvalue and right-factor sidecars");
  const Eigen::Index n_old = rb.size(), k = ds.cols();
  ReducedBasis<Scalar> out = rb;
  out.method = Method::B;
  if (k == 0) return out;

  const Vector root = rb.spectrum.cwiseSqrt();
  const Matrix coupling = root.asDiagonal() * (rb.basis.transpose() * ds);
  Matrix c1(n_old + k, n_old + k);
  c1.topLeftCorner(n_old, n_old) = rb.spectrum.asDiagonal();
  c1.topRightCorner(n_old, k) = coupling;
  c1.bottomLeftCorner(k, n_old) = coupling.transpose();
  c1.bottomRightCorner(k, k) = ds.transpose() * ds;

  const auto eig = detail::sorted_eigen<Scalar>(c1);
  const Scalar denominator = norm == Normalization::Block ? ds.squaredNorm() : eig.values.sum();
  const Eigen::Index n_new = truncation_rank(eig.values, denominator, eps, n_old, eig.values(0));

  const auto v1 = eig.vectors.leftCols(n_new);
  out.basis = rb.basis * (root.asDiagonal() * v1.topRows(n_old)) + ds * v1.bottomRows(k);
  out.spectrum = eig.values.head(n_new);
  out.basis *= out.spectrum.cwiseSqrt().cwiseInverse().asDiagonal();
  ensure_orthonormal(out.basis);

  Matrix w(rb.right_factor.rows() + k, n_new);
  w.topRows(rb.right_factor.rows()) = rb.right_factor * v1.topRows(n_old);
  w.bottomRows(k) = v1.bottomRows(k);
  out.right_factor = std::move(w);
  out.frobenius_sq += ds.squaredNorm();
  out.absorbed += static_cast<std::uint64_t>(k);
  return out;
}

/// Method C (Brand's incremental SVD): with dS^ = dS - B B^T dS = U_S S_S W_S^T
///   Gamma = [[Sigma, B^T dS], [0, S_S W_S^T]] = U_G Sigma_G W_G^T,
///   B <- [B U_S] U_G~, Sigma <- Sigma_G~.
/// The right singular vectors are never formed. The basis never shrinks;
/// the discarded tail of Sigma_G^2 is measured against `norm`.
template <typename Scalar, typename Derived>
ReducedBasis<Scalar> update_method_c(const ReducedBasis<Scalar>& rb,
                                     const Eigen::MatrixBase<Derived>& ds, Scalar eps,
                                     Normalization norm = Normalization::Block) {
  using Matrix = typename ReducedBasis<Scalar>::Matrix;
  using Vector = typename ReducedBasis<Scalar>::Vector;
  require(ds.rows() == rb.dim(), ErrorKind::InvalidArgument, "snapshot dimension mismatch");
  require(rb.kind == SpectrumKind::SingularValue, ErrorKind::InvalidArgument,
          "method C needs a singular-value sidecar");
  const Eigen::Index n_old = rb.size(), k = ds.cols();
  ReducedBasis<Scalar> out = rb;
  out.method = Method::C;
  out.right_factor.resize(0, 0);
  if (k == 0) return out;

  Matrix coeff = rb.basis.transpose() * ds;
  Matrix residual = ds - rb.basis * coeff;
  const Matrix again = rb.basis.transpose() * residual;
  residual -= rb.basis * again;
  coeff += again;

  Eigen::BDCSVD<Matrix> rsvd(residual, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sig_s = rsvd.singularValues();
  // Directions of dS^ below the floor are numerically inside span(B).
  const Scalar scale = std::max(rb.spectrum.size() ? rb.spectrum(0) : Scalar(0), ds.norm());
  Eigen::Index q = 0;
  while (q < sig_s.size() && sig_s(q) * sig_s(q) > Scalar(kEigenvalueFloor) * scale * scale) ++q;

  Matrix gamma = Matrix::Zero(n_old + q, n_old + k);
  gamma.topLeftCorner(n_old, n_old) = rb.spectrum.asDiagonal();
  gamma.topRightCorner(n_old, k) = coeff;
  gamma.bottomRightCorner(q, k) =
      sig_s.head(q).asDiagonal() * rsvd.matrixV().leftCols(q).transpose();

  Eigen::BDCSVD<Matrix> gsvd(gamma, Eigen::ComputeThinU);
  const Vector sig_g = gsvd.singularValues();
  const Vector energies = sig_g.array().square();
  const Eigen::Index n_new =
      truncation_rank(energies, norm == Normalization::Block ? ds.squaredNorm() : energies.sum(), eps,
                      n_old, energies(0));

  const auto ug = gsvd.matrixU().leftCols(n_new);
  out.basis = rb.basis * ug.topRows(n_old);
  if (q > 0) out.basis += rsvd.matrixU().leftCols(q) * ug.bottomRows(q);
  ensure_orthonormal(out.basis);
  out.spectrum = sig_g.head(n_new);
  out.frobenius_sq += ds.squaredNorm();
  out.absorbed += static_cast<std::uint64_t>(k);
  return out;
}

template <typename Scalar, typename Derived>
ReducedBasis<Scalar> update(const ReducedBasis<Scalar>& rb, const Eigen::MatrixBase<Derived>& ds,
                            Scalar eps, Method method, Normalization norm = Normalization::Block) {
  switch (method) {
    case Method::A: return update_method_a(rb, ds, eps);
    case Method::B: return update_method_b(rb, ds, eps, norm);
    case Method::C: return update_method_c(rb, ds, eps, norm);
    case Method::Batch: break;
  }
  throw Error(ErrorKind::InvalidArgument, "batch is not an incremental update method");
}

/// P_delta(N) = ||S - B_N B_N^T S||_F / ||S||_F for N = 1..rb.size(), with
/// B_N the leading N columns. Evaluated from the coefficient energies, which
/// makes the curve non-increasing by construction.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rb_accuracy_curve(const ReducedBasis<Scalar>& rb,
                                                           const Eigen::MatrixBase<Derived>& s) {
  require(s.rows() == rb.dim(), ErrorKind::InvalidArgument, "snapshot dimension mismatch");
  const Scalar total = s.squaredNorm();
  require(total > Scalar(0), ErrorKind::ZeroSnapshot, "validation snapshots are all zero");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> coeff = rb.basis.transpose() * s;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> captured = coeff.rowwise().squaredNorm();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> curve(rb.size());
  Scalar acc = 0;
  for (Eigen::Index j = 0; j < rb.size(); ++j) {
    acc += captured(j);
    curve(j) = std::sqrt(std::max(total - acc, Scalar(0)) / total);
  }
  return curve;
}

struct EnrichParams {
  double eps = 0.025;
  Eigen::Index buffer_size = 75;         ///< n_a
  Eigen::Index convergence_streak = 100; ///< n_c
  Method method = Method::C;
  Normalization normalization = Normalization::Block;
};

enum class StepOutcome { Accepted, Buffered, EnrichedNow, Converged };

inline const char* to_string(StepOutcome o) {
  switch (o) {
    case StepOutcome::Accepted: return "accepted";
    case StepOutcome::Buffered: return "buffered";
    case StepOutcome::EnrichedNow: return "enriched";
    case StepOutcome::Converged: return "converged";
  }
  return "?";
}

/// Streaming enrichment loop. Snapshots are screened against the current
/// basis; poorly represented ones are buffered and, once n_a are pending,
/// absorbed by the chosen method. Converged after n_c consecutive accepts.
///
/// Single writer. current() hands out an immutable generation that other
/// threads may keep using while the writer installs the next one.
template <typename Scalar = double>
class IncrementalPod {
 public:
  using Basis = ReducedBasis<Scalar>;
  using Vector = typename Basis::Vector;
  using Matrix = typename Basis::Matrix;

  IncrementalPod(Basis initial, EnrichParams params) : params_(params) {
    require(params.eps >= 0, ErrorKind::InvalidArgument, "eps must be non-negative");
    require(params.buffer_size >= 1, ErrorKind::InvalidArgument, "n_a must be positive");
    require(params.convergence_streak >= 1, ErrorKind::InvalidArgument, "n_c must be positive");
    require(params.method != Method::Batch, ErrorKind::InvalidArgument,
            "enrichment needs method A, B or C");
    initial = for_method(std::move(initial), params.method);
    initial.eps = static_cast<Scalar>(params.eps);
    buffer_.resize(initial.dim(), params.buffer_size);
    basis_ = std::make_shared<const Basis>(std::move(initial));
  }

  template <typename Derived>
  StepOutcome step(const Eigen::MatrixBase<Derived>& s) {
    ++processed_;
    const auto rb = current();
    if (projection_error(*rb, s) <= static_cast<Scalar>(params_.eps)) {
      ++accepted_total_;
      if (++consecutive_ok_ >= params_.convergence_streak) {
        converged_ = true;
        return StepOutcome::Converged;
      }
      return StepOutcome::Accepted;
    }
    ++buffered_total_;
    consecutive_ok_ = 0;
    buffer_.col(pending_++) = s;
    if (pending_ < params_.buffer_size) return StepOutcome::Buffered;
    flush();
    return StepOutcome::EnrichedNow;
  }

  /// Absorbs whatever is buffered (a no-op when empty).
  void flush() {
    if (pending_ == 0) return;
    const auto rb = current();
    auto next = update(*rb, buffer_.leftCols(pending_), static_cast<Scalar>(params_.eps),
                       params_.method, params_.normalization);
    next.eps = static_cast<Scalar>(params_.eps);
    pending_ = 0;
    ++enrichments_;
    std::lock_guard<std::mutex> lock(mutex_);
    basis_ = std::make_shared<const Basis>(std::move(next));
  }

  std::shared_ptr<const Basis> current() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return basis_;
  }

  const EnrichParams& params() const { return params_; }
  bool converged() const { return converged_; }
  Eigen::Index pending() const { return pending_; }
  Eigen::Index consecutive_ok() const { return consecutive_ok_; }
  std::uint64_t enrichments() const { return enrichments_; }
  std::uint64_t processed() const { return processed_; }
  std::uint64_t accepted_total() const { return accepted_total_; }
  std::uint64_t buffered_total() const { return buffered_total_; }

 private:
  EnrichParams params_;
  std::shared_ptr<const Basis> basis_;
  mutable std::mutex mutex_;
  Matrix buffer_;
  Eigen::Index pending_ = 0;
  Eigen::Index consecutive_ok_ = 0;
  bool converged_ = false;
  std::uint64_t enrichments_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t accepted_total_ = 0;
  std::uint64_t buffered_total_ = 0;
};

}  // namespace microkappa
