#pragma once

#include <utility>

#include <Eigen/Core>

#include "microkappa/image.hpp"

namespace microkappa {

/// kappa_a for the matrix, kappa_b = kappa_a / contrast for the inclusions.
struct PhaseLaw {
  double kappa_a = 1.0;
  double contrast = 5.0;

  double kappa_b() const { return kappa_a / contrast; }
  void validate() const;
};

/// Symmetric 2x2 effective conductivity.
struct ConductivityTensor {
  double k11 = 0.0;
  double k22 = 0.0;
  double k12 = 0.0;

  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << k11, k12, k12, k22;
    return m;
  }
  bool positive_definite() const { return k11 > 0 && k11 * k22 - k12 * k12 > 0; }
  /// Eigenvalues, ascending.
  Eigen::Vector2d eigenvalues() const;
};

/// Normalized Voigt form (k11, k22, sqrt(2) k12); its Euclidean norm equals
/// the Frobenius norm of the tensor.
struct VoigtVector {
  Eigen::Vector3d values = Eigen::Vector3d::Zero();
};

VoigtVector to_voigt(const ConductivityTensor& t);
ConductivityTensor from_voigt(const VoigtVector& v);

struct SolverOptions {
  /// Relative L2 norm of the discrete flux divergence.
  double tol = 1e-8;
  int max_iter = 2000;
};

struct HomogenizationResult {
  ConductivityTensor kappa;  ///< symmetrized
  double residual = 0.0;     ///< worst relative residual of the two load cases
  double asymmetry = 0.0;    ///< |k12 - k21| before symmetrization
  int iterations = 0;        ///< summed over both load cases
};

/// Effective conductivity of the periodic pixel cell.
///
/// Finite volumes on the pixel grid: temperatures at pixel centers, face
/// conductivities are harmonic means of the two adjacent pixels. For each
/// unit average gradient e_j the periodic fluctuation is found with
/// conjugate gradients preconditioned by the Fourier-diagonal inverse of
/// the homogeneous operator with kappa0 = (kappa_a + kappa_b) / 2. Column j
/// of the tensor is the cell-averaged flux.
///
/// Throws NoConvergence (with the last residual in the message) or
/// NonFiniteField.
HomogenizationResult effective_conductivity(const MicrostructureImage& img, const PhaseLaw& law,
                                            const SolverOptions& options = {});

/// (harmonic, arithmetic) means of the phase conductivities at inclusion
/// fraction f_b.
std::pair<double, double> wiener_bounds(double f_b, const PhaseLaw& law);

}  // namespace microkappa
