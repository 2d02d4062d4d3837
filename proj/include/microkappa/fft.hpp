#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

namespace microkappa {

template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using ComplexGrid = Grid<std::complex<Scalar>>;

/// 2-D periodic DFT on square or rectangular row-major grids, built from
/// 1-D transforms along rows and then columns.
///
/// forward() is unnormalized; inverse() divides by the number of grid
/// points, so inverse(forward(x)) == x.
template <typename Scalar>
class Fft2 {
 public:
  using Complex = std::complex<Scalar>;

  Fft2() { fft_.SetFlag(Eigen::FFT<Scalar>::Unscaled); }

  void forward(ComplexGrid<Scalar>& g) { transform(g, false); }

  void inverse(ComplexGrid<Scalar>& g) {
    transform(g, true);
    g /= static_cast<Scalar>(g.size());
  }

 private:
  void transform(ComplexGrid<Scalar>& g, bool inv) {
    const int rows = static_cast<int>(g.rows()), cols = static_cast<int>(g.cols());
    in_.resize(static_cast<std::size_t>(std::max(rows, cols)));
    out_.resize(in_.size());
    for (int r = 0; r < rows; ++r) {
      Complex* row = g.data() + static_cast<std::ptrdiff_t>(r) * cols;
      std::copy(row, row + cols, in_.begin());
      run(inv, cols);
      std::copy(out_.begin(), out_.begin() + cols, row);
    }
    for (int c = 0; c < cols; ++c) {
      for (int r = 0; r < rows; ++r) in_[static_cast<std::size_t>(r)] = g(r, c);
      run(inv, rows);
      for (int r = 0; r < rows; ++r) g(r, c) = out_[static_cast<std::size_t>(r)];
    }
  }

  void run(bool inv, int n) {
    if (inv)
      fft_.inv(out_.data(), in_.data(), n);
    else
      fft_.fwd(out_.data(), in_.data(), n);
  }

  Eigen::FFT<Scalar> fft_;
  std::vector<Complex> in_, out_;
};

}  // namespace microkappa
