#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "microkappa/error.hpp"
#include "microkappa/fft.hpp"
#include "microkappa/image.hpp"

namespace microkappa {

enum class Phase : std::uint8_t { A = 0, B = 1 };

/// c2(r; first, second) on every periodic pixel offset. values(dy, dx) holds
/// the offset r = (dx, dy); negative offsets wrap to n - |d|.
template <typename Scalar = double>
struct TwoPointField {
  int resolution = 0;
  Grid<Scalar> values;
  Scalar f_first = 0;   ///< volume fraction of the first phase
  Scalar f_second = 0;  ///< volume fraction of the second phase
};

/// Shifted two-point function flattened row-major (index dy * n + dx).
template <typename Scalar = double>
struct Snapshot {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  Scalar f_b = 0;
  std::string source_id;
};

template <typename Scalar = double>
Scalar volume_fraction(const MicrostructureImage& img, Phase phase = Phase::B) {
  const auto vf = static_cast<Scalar>(img.achieved_vf());
  return phase == Phase::B ? vf : Scalar(1) - vf;
}

namespace detail {

template <typename Scalar>
ComplexGrid<Scalar> indicator(const MicrostructureImage& img, Phase phase) {
  const int n = img.resolution();
  ComplexGrid<Scalar> g(n, n);
  const std::uint8_t want = phase == Phase::B ? 1 : 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) g(r, c) = (img(r, c) == want) ? Scalar(1) : Scalar(0);
  return g;
}

}  // namespace detail

/// c2(r; first, second) = < chi_first(x) chi_second(x + r) >_x via FFT.
///
/// On binary images n * c2 is an integer pair count, so the FFT result is
/// rounded onto that lattice; the identities between the three functions
/// then hold exactly. An imaginary residue above 1e-8 * max(f) is reported
/// as NonFiniteField (it can only come from an indexing defect).
template <typename Scalar = double>
TwoPointField<Scalar> two_point(const MicrostructureImage& img, Phase first, Phase second) {
  const int n = img.resolution();
  require(n > 0, ErrorKind::InvalidArgument, "empty image");
  const auto pixels = static_cast<Scalar>(img.size());
  Fft2<Scalar> fft;

  auto a = detail::indicator<Scalar>(img, first);
  fft.forward(a);
  ComplexGrid<Scalar> spectrum;
  if (first == second) {
    spectrum = a.cwiseAbs2().template cast<std::complex<Scalar>>();
  } else {
    auto b = detail::indicator<Scalar>(img, second);
    fft.forward(b);
    spectrum = a.conjugate().cwiseProduct(b);
  }
  fft.inverse(spectrum);

  TwoPointField<Scalar> field;
  field.resolution = n;
  field.f_first = volume_fraction<Scalar>(img, first);
  field.f_second = volume_fraction<Scalar>(img, second);

  const Scalar scale = std::max(field.f_first, field.f_second);
  const Scalar residue = spectrum.imag().cwiseAbs().maxCoeff() / pixels;
  if (!(residue <= Scalar(1e-8) * scale))
    throw Error(ErrorKind::NonFiniteField, "two-point function has an imaginary residue");

  field.values = (spectrum.real().array()).round() / pixels;
  return field;
}

/// s = flatten(c2(.; b, b)) - f_b^2. The field must be the (b, b) function.
template <typename Scalar = double>
Snapshot<Scalar> shift_snapshot(const TwoPointField<Scalar>& field, std::string source_id = {}) {
  Snapshot<Scalar> s;
  s.f_b = field.f_second;
  s.values = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(field.values.data(),
                                                                          field.values.size());
  s.values.array() -= field.f_second * field.f_second;
  s.source_id = std::move(source_id);
  return s;
}

/// Adds f_b^2 back and reshapes; the inverse of shift_snapshot.
template <typename Scalar = double>
TwoPointField<Scalar> unshift_snapshot(const Snapshot<Scalar>& s) {
  const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(s.values.size()))));
  require(static_cast<Eigen::Index>(n) * n == s.values.size(), ErrorKind::InvalidArgument,
          "snapshot length is not a square");
  TwoPointField<Scalar> field;
  field.resolution = n;
  field.f_first = field.f_second = s.f_b;
  field.values = Eigen::Map<const Grid<Scalar>>(s.values.data(), n, n);
  field.values.array() += s.f_b * s.f_b;
  return field;
}

template <typename Scalar = double>
Snapshot<Scalar> snapshot_of(const MicrostructureImage& img, std::string source_id = {}) {
  return shift_snapshot(two_point<Scalar>(img, Phase::B, Phase::B), std::move(source_id));
}

/// The (a, a) and (a, b) functions from the (b, b) one:
/// c2(a,b) = f_b - c2(b,b), c2(a,a) = f_a - c2(a,b).
template <typename Scalar = double>
TwoPointField<Scalar> cross_from_auto(const TwoPointField<Scalar>& bb) {
  TwoPointField<Scalar> ab = bb;
  ab.f_first = Scalar(1) - bb.f_second;
  ab.values = (bb.f_second - bb.values.array()).matrix();
  return ab;
}

template <typename Scalar = double>
TwoPointField<Scalar> matrix_auto_from_auto(const TwoPointField<Scalar>& bb) {
  TwoPointField<Scalar> aa = bb;
  const Scalar fa = Scalar(1) - bb.f_second;
  aa.f_first = aa.f_second = fa;
  aa.values = (fa - (bb.f_second - bb.values.array())).matrix();
  return aa;
}

/// Greyscale dump, linearly rescaled from [min, max] to [0, 255].
void write_field_pgm(const std::filesystem::path& path, const Grid<double>& values);

/// Raw little-endian float64 values, row-major, no header.
void write_field_f64(const std::filesystem::path& path, const Grid<double>& values);
Grid<double> read_field_f64(const std::filesystem::path& path, int resolution);

}  // namespace microkappa
