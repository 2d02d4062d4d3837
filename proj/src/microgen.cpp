#include "microkappa/microgen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "microkappa/error.hpp"
#include "microkappa/rng.hpp"

namespace microkappa {

namespace {

void check_range(const Range& r, double lo, double hi, bool open_lo, const char* what) {
  const bool lo_ok = open_lo ? r.lo > lo : r.lo >= lo;
  require(lo_ok && r.lo <= r.hi && r.hi <= hi, ErrorKind::InvalidArgument,
          std::string(what) + " range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) +
              "] is outside its admissible interval");
}

std::int64_t wrap(std::int64_t i, std::int64_t n) { return ((i % n) + n) % n; }

// Visits every pixel whose center falls in [x0, x1] x [y0, y1] (unwrapped).
template <typename Inside>
std::vector<std::int64_t> scan(double x0, double x1, double y0, double y1, int resolution,
                               Inside inside) {
  const auto n = static_cast<std::int64_t>(resolution);
  const auto c0 = static_cast<std::int64_t>(std::ceil(x0 - 0.5));
  const auto c1 = static_cast<std::int64_t>(std::floor(x1 - 0.5));
  const auto r0 = static_cast<std::int64_t>(std::ceil(y0 - 0.5));
  const auto r1 = static_cast<std::int64_t>(std::floor(y1 - 0.5));
  std::vector<std::int64_t> out;
  for (std::int64_t r = r0; r <= r1; ++r) {
    for (std::int64_t c = c0; c <= c1; ++c) {
      if (inside(static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5))
        out.push_back(wrap(r, n) * n + wrap(c, n));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

void GenSpec::validate() const {
  require(resolution >= 16, ErrorKind::InvalidArgument, "resolution must be at least 16");
  require(target_vf >= 0.2 && target_vf <= 0.8, ErrorKind::InvalidArgument,
          "target_vf must lie in [0.2, 0.8]");
  check_range(size_range, 0.0, 1.0, true, "size");
  check_range(orientation_range, 0.0, std::numbers::pi, false, "orientation");
  check_range(aspect_range, 1.0, 10.0, false, "aspect");
  require(overlap >= 0.0 && overlap <= 1.0, ErrorKind::InvalidArgument,
          "overlap must lie in [0, 1]");
  require(max_attempts > 0, ErrorKind::InvalidArgument, "max_attempts must be positive");
  require(max_radius_fraction > 0.0, ErrorKind::InvalidArgument,
          "max_radius_fraction must be positive");
}

std::vector<std::int64_t> rasterize_inclusion(const Inclusion& shape, int resolution) {
  require(resolution > 0, ErrorKind::InvalidArgument, "resolution must be positive");
  if (const auto* c = std::get_if<Circle>(&shape)) {
    require(std::isfinite(c->radius) && c->radius > 0 && c->center.allFinite(),
            ErrorKind::InvalidArgument, "circle needs a finite center and positive radius");
    const double cx = c->center.x(), cy = c->center.y(), r2 = c->radius * c->radius;
    return scan(cx - c->radius, cx + c->radius, cy - c->radius, cy + c->radius, resolution,
                [&](double x, double y) {
                  const double dx = x - cx, dy = y - cy;
                  return dx * dx + dy * dy <= r2;
                });
  }
  const auto& rect = std::get<Rectangle>(shape);
  require(rect.center.allFinite() && rect.half_lengths.allFinite() && std::isfinite(rect.angle) &&
              (rect.half_lengths.array() > 0).all(),
          ErrorKind::InvalidArgument, "rectangle needs finite parameters and positive half lengths");
  const double cs = std::cos(rect.angle), sn = std::sin(rect.angle);
  const double hx = rect.half_lengths.x(), hy = rect.half_lengths.y();
  const double ex = std::abs(hx * cs) + std::abs(hy * sn);
  const double ey = std::abs(hx * sn) + std::abs(hy * cs);
  const double cx = rect.center.x(), cy = rect.center.y();
  return scan(cx - ex, cx + ex, cy - ey, cy + ey, resolution, [&](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    const double u = dx * cs + dy * sn;
    const double v = -dx * sn + dy * cs;
    return std::abs(u) <= hx && std::abs(v) <= hy;
  });
}

MicrostructureImage generate(const GenSpec& spec, GenStats* stats) {
  spec.validate();
  const int n = spec.resolution;
  const auto total = static_cast<std::size_t>(n) * n;
  std::vector<std::uint8_t> occupied(total, 0);
  std::size_t count = 0;
  GenStats local;
  int consecutive = 0;
  Rng rng(spec.seed);
  const double length_scale = spec.max_radius_fraction * n;

  while (static_cast<double>(count) < spec.target_vf * static_cast<double>(total)) {
    Morphology kind = spec.morphology;
    if (kind == Morphology::Mixed)
      kind = rng.uniform() < 0.5 ? Morphology::Circle : Morphology::Rectangle;
    const Eigen::Vector2d center(rng.uniform() * n, rng.uniform() * n);
    const double length = rng.uniform(spec.size_range.lo, spec.size_range.hi) * length_scale;

    Inclusion shape;
    if (kind == Morphology::Circle) {
      shape = Circle{center, length};
    } else {
      const double angle = rng.uniform(spec.orientation_range.lo, spec.orientation_range.hi);
      const double aspect = rng.uniform(spec.aspect_range.lo, spec.aspect_range.hi);
      const double hy = length * std::sqrt(std::numbers::pi / (4.0 * aspect));
      shape = Rectangle{center, Eigen::Vector2d(aspect * hy, hy), angle};
    }

    const auto pix = rasterize_inclusion(shape, n);
    bool accepted = false;
    if (pix.empty()) {
      ++local.empty_draws;
    } else {
      std::size_t covered = 0;
      for (auto i : pix) covered += occupied[static_cast<std::size_t>(i)];
      if (static_cast<double>(covered) <= spec.overlap * static_cast<double>(pix.size())) {
        for (auto i : pix) {
          auto& cell = occupied[static_cast<std::size_t>(i)];
          count += 1 - cell;
          cell = 1;
        }
        ++local.placed;
        if (stats) local.inclusions.push_back(shape);
        accepted = true;
      } else {
        ++local.rejections;
      }
    }

    if (accepted) {
      consecutive = 0;
    } else if (++consecutive >= spec.max_attempts) {
      if (stats) *stats = local;
      throw Error(ErrorKind::FailedToConverge,
                  "RSA stalled at volume fraction " +
                      std::to_string(static_cast<double>(count) / static_cast<double>(total)) +
                      " (target " + std::to_string(spec.target_vf) + ") after " +
                      std::to_string(spec.max_attempts) + " consecutive rejections");
    }
  }
  if (stats) *stats = local;
  return MicrostructureImage(n, std::move(occupied));
}

void EnsembleSpec::validate() const {
  GenSpec probe;
  probe.resolution = resolution;
  probe.size_range = size;
  probe.orientation_range = orientation;
  probe.aspect_range = aspect;
  probe.max_attempts = max_attempts;
  probe.max_radius_fraction = max_radius_fraction;
  probe.validate();
  check_range(vf, 0.2, 0.8, false, "volume fraction");
  check_range(overlap, 0.0, 1.0, false, "overlap");
  require(max_retries >= 0, ErrorKind::InvalidArgument, "max_retries must be non-negative");
}

GenSpec EnsembleSpec::sample(std::uint64_t index, int retry) const {
  Rng rng(derive_seed(derive_seed(seed, index), static_cast<std::uint64_t>(retry)));
  GenSpec spec;
  spec.resolution = resolution;
  spec.size_range = size;
  spec.orientation_range = orientation;
  spec.aspect_range = aspect;
  spec.max_attempts = max_attempts;
  spec.max_radius_fraction = max_radius_fraction;
  spec.target_vf = rng.uniform(vf.lo, vf.hi);
  spec.overlap = rng.uniform(overlap.lo, overlap.hi);
  spec.morphology = morphology;
  if (morphology == Morphology::Mixed)
    spec.morphology = rng.uniform() < 0.5 ? Morphology::Circle : Morphology::Rectangle;
  spec.seed = rng.next();
  return spec;
}

EnsembleSample generate_sample(const EnsembleSpec& ensemble, std::uint64_t index) {
  ensemble.validate();
  for (int retry = 0;; ++retry) {
    GenSpec spec = ensemble.sample(index, retry);
    try {
      auto image = generate(spec);
      return {std::move(image), spec, retry};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::FailedToConverge || retry >= ensemble.max_retries) throw;
    }
  }
}

const char* to_string(Morphology m) {
  switch (m) {
    case Morphology::Circle: return "circle";
    case Morphology::Rectangle: return "rectangle";
    case Morphology::Mixed: return "mixed";
  }
  return "?";
}

Morphology parse_morphology(const std::string& name) {
  if (name == "circle" || name == "circles") return Morphology::Circle;
  if (name == "rectangle" || name == "rectangles") return Morphology::Rectangle;
  if (name == "mixed") return Morphology::Mixed;
  throw Error(ErrorKind::InvalidArgument, "unknown morphology '" + name + "'");
}

void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }

void from_json(const nlohmann::json& j, Range& r) {
  if (j.is_number()) {
    r.lo = r.hi = j.get<double>();
  } else if (j.is_array() && j.size() == 2) {
    r.lo = j[0].get<double>();
    r.hi = j[1].get<double>();
  } else if (j.is_object()) {
    r.lo = j.at("lo").get<double>();
    r.hi = j.at("hi").get<double>();
  } else {
    throw Error(ErrorKind::Format, "range must be a number, [lo, hi] or {lo, hi}");
  }
}

void to_json(nlohmann::json& j, const GenSpec& s) {
  j = {{"resolution", s.resolution},
       {"morphology", to_string(s.morphology)},
       {"target_vf", s.target_vf},
       {"size", s.size_range},
       {"orientation", s.orientation_range},
       {"aspect", s.aspect_range},
       {"overlap", s.overlap},
       {"seed", s.seed},
       {"max_attempts", s.max_attempts},
       {"max_radius_fraction", s.max_radius_fraction}};
}

void to_json(nlohmann::json& j, const EnsembleSpec& s) {
  j = {{"resolution", s.resolution},
       {"morphology", to_string(s.morphology)},
       {"vf", s.vf},
       {"size", s.size},
       {"orientation", s.orientation},
       {"aspect", s.aspect},
       {"overlap", s.overlap},
       {"max_radius_fraction", s.max_radius_fraction},
       {"max_attempts", s.max_attempts},
       {"max_retries", s.max_retries},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, EnsembleSpec& s) {
  try {
    if (j.contains("resolution")) s.resolution = j.at("resolution").get<int>();
    if (j.contains("morphology")) s.morphology = parse_morphology(j.at("morphology").get<std::string>());
    if (j.contains("vf")) s.vf = j.at("vf").get<Range>();
    if (j.contains("size")) s.size = j.at("size").get<Range>();
    if (j.contains("orientation")) s.orientation = j.at("orientation").get<Range>();
    if (j.contains("aspect")) s.aspect = j.at("aspect").get<Range>();
    if (j.contains("overlap")) s.overlap = j.at("overlap").get<Range>();
    if (j.contains("max_radius_fraction"))
      s.max_radius_fraction = j.at("max_radius_fraction").get<double>();
    if (j.contains("max_attempts")) s.max_attempts = j.at("max_attempts").get<int>();
    if (j.contains("max_retries")) s.max_retries = j.at("max_retries").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("ensemble spec: ") + e.what());
  }
}

}  // namespace microkappa
