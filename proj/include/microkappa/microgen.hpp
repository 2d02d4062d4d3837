#pragma once

#include <cstdint>
#include <numbers>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "microkappa/image.hpp"

namespace microkappa {

enum class Morphology : std::uint8_t { Circle, Rectangle, Mixed };

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Parameters for one random sequential adsorption run.
///
/// Inclusion sizes are fractions of `max_radius_fraction * resolution`
/// pixels. A rectangle of size s has the area of a circle of radius
/// s * max_radius_fraction * resolution, split by its aspect ratio.
struct GenSpec {
  int resolution = 64;
  Morphology morphology = Morphology::Circle;
  double target_vf = 0.5;
  Range size_range{0.2, 1.0};
  Range orientation_range{0.0, std::numbers::pi};
  Range aspect_range{1.0, 10.0};
  /// Largest admissible fraction of a candidate's pixels that may already
  /// be occupied.
  double overlap = 1.0;
  std::uint64_t seed = 0;
  int max_attempts = 10000;
  double max_radius_fraction = 0.3;

  /// Throws InvalidArgument when a field is outside its admissible range.
  void validate() const;
};

struct Circle {
  Eigen::Vector2d center;
  double radius;
};

struct Rectangle {
  Eigen::Vector2d center;
  Eigen::Vector2d half_lengths;
  double angle;
};

using Inclusion = std::variant<Circle, Rectangle>;

/// Sorted, unique row-major indices of every pixel whose center lies inside
/// the shape or inside any of its periodic images. Coordinates are in pixel
/// units.
std::vector<std::int64_t> rasterize_inclusion(const Inclusion& shape, int resolution);

struct GenStats {
  int placed = 0;
  /// Candidates refused by the overlap rule.
  int rejections = 0;
  /// Candidates that covered no pixel center.
  int empty_draws = 0;
  /// Accepted shapes in placement order.
  std::vector<Inclusion> inclusions;
};

/// Random sequential adsorption until the inclusion fraction first reaches
/// `target_vf`.
///
/// Each candidate consumes, in order: one uniform for the prototype (only
/// for Morphology::Mixed), two for the center, one for the size and, for
/// rectangles, one for the angle and one for the aspect ratio. Throws
/// FailedToConverge after `max_attempts` consecutive unsuccessful draws.
MicrostructureImage generate(const GenSpec& spec, GenStats* stats = nullptr);

/// Distribution over GenSpecs; each image draws its own target fraction and
/// overlap. For Morphology::Mixed every image uses a single prototype
/// picked with equal probability.
struct EnsembleSpec {
  int resolution = 64;
  Morphology morphology = Morphology::Circle;
  Range vf{0.2, 0.8};
  Range size{0.2, 1.0};
  Range orientation{0.0, std::numbers::pi};
  Range aspect{1.0, 10.0};
  Range overlap{0.0, 1.0};
  double max_radius_fraction = 0.3;
  int max_attempts = 2000;
  /// Jammed draws are redrawn with fresh parameters up to this many times.
  int max_retries = 100;
  std::uint64_t seed = 0;

  void validate() const;

  /// The GenSpec for sample `index`, attempt `retry`. Pure function.
  GenSpec sample(std::uint64_t index, int retry = 0) const;
};

struct EnsembleSample {
  MicrostructureImage image;
  GenSpec spec;
  int retries = 0;
};

EnsembleSample generate_sample(const EnsembleSpec& ensemble, std::uint64_t index);

const char* to_string(Morphology m);
Morphology parse_morphology(const std::string& name);

void to_json(nlohmann::json& j, const Range& r);
void from_json(const nlohmann::json& j, Range& r);
void to_json(nlohmann::json& j, const GenSpec& s);
void to_json(nlohmann::json& j, const EnsembleSpec& s);
/// Missing keys keep their defaults; a bare number is accepted for a range.
void from_json(const nlohmann::json& j, EnsembleSpec& s);

}  // namespace microkappa
