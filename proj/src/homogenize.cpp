#include "microkappa/homogenize.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "microkappa/error.hpp"
#include "microkappa/fft.hpp"

namespace microkappa {

void PhaseLaw::validate() const {
  require(std::isfinite(kappa_a) && kappa_a > 0, ErrorKind::InvalidArgument,
          "kappa_a must be positive");
  require(std::isfinite(contrast) && contrast > 0, ErrorKind::InvalidArgument,
          "contrast must be positive");
}

Eigen::Vector2d ConductivityTensor::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

VoigtVector to_voigt(const ConductivityTensor& t) {
  VoigtVector v;
  v.values << t.k11, t.k22, std::numbers::sqrt2 * t.k12;
  return v;
}

ConductivityTensor from_voigt(const VoigtVector& v) {
  return {v.values(0), v.values(1), v.values(2) / std::numbers::sqrt2};
}

std::pair<double, double> wiener_bounds(double f_b, const PhaseLaw& law) {
  const double ka = law.kappa_a, kb = law.kappa_b();
  const double harmonic = 1.0 / ((1.0 - f_b) / ka + f_b / kb);
  const double arithmetic = (1.0 - f_b) * ka + f_b * kb;
  return {harmonic, arithmetic};
}

namespace {

using Field = Grid<double>;

class CellProblem {
 public:
  CellProblem(const MicrostructureImage& img, const PhaseLaw& law)
      : n_(img.resolution()), kx_(n_, n_), ky_(n_, n_), symbol_(n_, n_) {
    Field k(n_, n_);
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) k(r, c) = img(r, c) ? law.kappa_b() : law.kappa_a;
    for (int r = 0; r < n_; ++r) {
      for (int c = 0; c < n_; ++c) {
        const double here = k(r, c), right = k(r, next(c)), below = k(next(r), c);
        kx_(r, c) = 2.0 * here * right / (here + right);
        ky_(r, c) = 2.0 * here * below / (here + below);
      }
    }
    const double k0 = 0.5 * (law.kappa_a + law.kappa_b());
    for (int p = 0; p < n_; ++p) {
      for (int q = 0; q < n_; ++q) {
        const double sp = std::sin(std::numbers::pi * p / n_), sq = std::sin(std::numbers::pi * q / n_);
        const double lambda = 4.0 * (sp * sp + sq * sq);
        symbol_(p, q) = (p == 0 && q == 0) ? 0.0 : 1.0 / (k0 * lambda);
      }
    }
  }

  // A u = -div(k grad u)
  void apply(const Field& u, Field& out) const {
    for (int r = 0; r < n_; ++r) {
      const int rp = next(r), rm = prev(r);
      for (int c = 0; c < n_; ++c) {
        const int cp = next(c), cm = prev(c);
        const double uc = u(r, c);
        out(r, c) = -(kx_(r, c) * (u(r, cp) - uc) - kx_(r, cm) * (uc - u(r, cm)) +
                      ky_(r, c) * (u(rp, c) - uc) - ky_(rm, c) * (uc - u(rm, c)));
      }
    }
  }

  // div(k G)
  Field rhs(const Eigen::Vector2d& g) const {
    Field b(n_, n_);
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c)
        b(r, c) = g.x() * (kx_(r, c) - kx_(r, prev(c))) + g.y() * (ky_(r, c) - ky_(prev(r), c));
    return b;
  }

  void precondition(const Field& r, Field& z) {
    buffer_ = r.cast<std::complex<double>>();
    fft_.forward(buffer_);
    buffer_.array() *= symbol_.array();
    fft_.inverse(buffer_);
    z = buffer_.real();
  }

  Eigen::Vector2d mean_flux(const Field& u, const Eigen::Vector2d& g) const {
    double qx = 0, qy = 0;
    for (int r = 0; r < n_; ++r) {
      for (int c = 0; c < n_; ++c) {
        qx += kx_(r, c) * (g.x() + u(r, next(c)) - u(r, c));
        qy += ky_(r, c) * (g.y() + u(next(r), c) - u(r, c));
      }
    }
    const double cells = static_cast<double>(n_) * n_;
    return {qx / cells, qy / cells};
  }

  int n() const { return n_; }

 private:
  int next(int i) const { return i + 1 == n_ ? 0 : i + 1; }
  int prev(int i) const { return i == 0 ? n_ - 1 : i - 1; }

  int n_;
  Field kx_, ky_, symbol_;
  Fft2<double> fft_;
  ComplexGrid<double> buffer_;
};

struct LoadCase {
  Eigen::Vector2d flux;
  double residual;
  int iterations;
};

LoadCase solve(CellProblem& cell, const Eigen::Vector2d& gradient, const SolverOptions& opt) {
  const int n = cell.n();
  const Field b = cell.rhs(gradient);
  const double b_norm = b.norm();
  Field u = Field::Zero(n, n);
  if (b_norm == 0.0) return {cell.mean_flux(u, gradient), 0.0, 0};

  Field r = b, z(n, n), p(n, n), ap(n, n);
  double rel = 1.0;
  int it = 0;
  // CG restarts from the true residual whenever the recursive one has drifted
  // below the tolerance without the true one following.
  while (true) {
    cell.precondition(r, z);
    p = z;
    double rz = (r.array() * z.array()).sum();
    while (true) {
      if (it >= opt.max_iter)
        throw Error(ErrorKind::NoConvergence, "conduction solve did not converge in " +
                                                  std::to_string(opt.max_iter) +
                                                  " iterations (residual " + std::to_string(rel) + ")");
      cell.apply(p, ap);
      const double alpha = rz / (p.array() * ap.array()).sum();
      u += alpha * p;
      r -= alpha * ap;
      ++it;
      rel = r.norm() / b_norm;
      if (!std::isfinite(rel)) throw Error(ErrorKind::NonFiniteField, "non-finite residual in conduction solve");
      if (rel <= opt.tol) break;
      cell.precondition(r, z);
      const double rz_next = (r.array() * z.array()).sum();
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    cell.apply(u, ap);
    r = b - ap;
    rel = r.norm() / b_norm;
    if (!u.allFinite() || !std::isfinite(rel))
      throw Error(ErrorKind::NonFiniteField, "non-finite temperature field");
    if (rel <= opt.tol) break;
  }
  return {cell.mean_flux(u, gradient), rel, it};
}

}  // namespace

HomogenizationResult effective_conductivity(const MicrostructureImage& img, const PhaseLaw& law,
                                            const SolverOptions& options) {
  law.validate();
  require(img.resolution() > 0, ErrorKind::InvalidArgument, "empty image");
  require(options.tol > 0 && options.max_iter > 0, ErrorKind::InvalidArgument,
          "solver tolerance and iteration cap must be positive");
  CellProblem cell(img, law);
  const auto first = solve(cell, Eigen::Vector2d::UnitX(), options);
  const auto second = solve(cell, Eigen::Vector2d::UnitY(), options);

  HomogenizationResult out;
  out.kappa.k11 = first.flux.x();
  out.kappa.k22 = second.flux.y();
  out.kappa.k12 = 0.5 * (first.flux.y() + second.flux.x());
  out.asymmetry = std::abs(first.flux.y() - second.flux.x());
  out.residual = std::max(first.residual, second.residual);
  out.iterations = first.iterations + second.iterations;
  return out;
}

}  // namespace microkappa
