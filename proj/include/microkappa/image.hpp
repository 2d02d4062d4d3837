#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace microkappa {

/// Periodic binary pixel grid, row-major. 0 is the matrix phase a, 1 the
/// inclusion phase b. Pixel (row, col) sits at x = col + 0.5, y = row + 0.5
/// in pixel units.
class MicrostructureImage {
 public:
  MicrostructureImage() = default;

  /// Takes ownership of `pixels`; any non-zero entry is stored as 1.
  MicrostructureImage(int resolution, std::vector<std::uint8_t> pixels);

  static MicrostructureImage filled(int resolution, std::uint8_t phase);

  int resolution() const { return resolution_; }
  std::size_t size() const { return pixels_.size(); }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  std::uint8_t operator()(int row, int col) const {
    return pixels_[static_cast<std::size_t>(row) * resolution_ + col];
  }

  /// Fraction of phase-b pixels.
  double achieved_vf() const { return achieved_vf_; }
  std::size_t inclusion_pixels() const { return count_; }

  bool operator==(const MicrostructureImage& other) const {
    return resolution_ == other.resolution_ && pixels_ == other.pixels_;
  }

 private:
  int resolution_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::size_t count_ = 0;
  double achieved_vf_ = 0.0;
};

/// Periodic shift: the output pixel (r, c) is the input pixel (r - dy, c - dx).
MicrostructureImage translate(const MicrostructureImage& img, int dx, int dy);

/// Quarter turn counter-clockwise (in the x-right, y-down pixel frame the x
/// axis maps onto the y axis).
MicrostructureImage rotate90(const MicrostructureImage& img);

MicrostructureImage swap_phases(const MicrostructureImage& img);

/// Plain-text matrix: one row per line, 0/1 separated by single spaces.
void write_matrix_txt(const std::filesystem::path& path, const MicrostructureImage& img);
MicrostructureImage read_matrix_txt(const std::filesystem::path& path);

/// 8-bit binary PGM (P5), 0 for phase a and 255 for phase b.
void write_pgm(const std::filesystem::path& path, const MicrostructureImage& img);
/// Accepts P5 or P2; any grey value above maxval/2 is phase b.
MicrostructureImage read_pgm(const std::filesystem::path& path);

/// Dispatches on the extension (.pgm, anything else is the text matrix).
MicrostructureImage read_image(const std::filesystem::path& path);

}  // namespace microkappa
