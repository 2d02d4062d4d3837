#include "microkappa/podrb_io.hpp"

#include <cstdio>

#include "microkappa/binary_io.hpp"

namespace microkappa {

namespace {
constexpr std::string_view kMagic = "MKRB";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void save_basis(const std::filesystem::path& path, const ReducedBasis<double>& rb) {
  BinaryWriter w(path);
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(rb.dim()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(rb.size()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(rb.method));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(rb.kind));
  w.put<double>(rb.eps);
  w.put<double>(rb.frobenius_sq);
  w.put<std::uint64_t>(rb.absorbed);
  w.put_bytes({reinterpret_cast<const char*>(rb.basis.data()),
               static_cast<std::size_t>(rb.basis.size()) * sizeof(double)});
  w.put_bytes({reinterpret_cast<const char*>(rb.spectrum.data()),
               static_cast<std::size_t>(rb.spectrum.size()) * sizeof(double)});
  w.put_matrix(rb.right_factor);
  w.close();
}

ReducedBasis<double> load_basis(const std::filesystem::path& path) {
  BinaryReader r(path);
  require(r.get_bytes(4) == kMagic, ErrorKind::Format, path.string() + ": not a basis file");
  const auto version = r.get<std::uint32_t>();
  require(version == kVersion, ErrorKind::Format,
          path.string() + ": unsupported basis version " + std::to_string(version));
  const auto n = r.get<std::uint64_t>();
  const auto modes = r.get<std::uint64_t>();
  require(n < (1ULL << 32) && modes <= n, ErrorKind::Format, path.string() + ": bad basis shape");
  ReducedBasis<double> rb;
  const auto method = r.get<std::uint8_t>();
  const auto kind = r.get<std::uint8_t>();
  require(method <= 3 && kind <= 1, ErrorKind::Format, path.string() + ": bad method tag");
  rb.method = static_cast<Method>(method);
  rb.kind = static_cast<SpectrumKind>(kind);
  rb.eps = r.get<double>();
  rb.frobenius_sq = r.get<double>();
  rb.absorbed = r.get<std::uint64_t>();
  rb.basis.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(modes));
  const auto bytes = r.get_bytes(static_cast<std::size_t>(n * modes) * sizeof(double));
  std::memcpy(rb.basis.data(), bytes.data(), bytes.size());
  rb.spectrum.resize(static_cast<Eigen::Index>(modes));
  const auto sbytes = r.get_bytes(static_cast<std::size_t>(modes) * sizeof(double));
  std::memcpy(rb.spectrum.data(), sbytes.data(), sbytes.size());
  rb.right_factor = r.get_matrix();
  r.expect_end();
  return rb;
}

std::uint64_t basis_hash(const ReducedBasis<double>& rb) {
  Fnv1a h;
  const auto n = static_cast<std::uint64_t>(rb.dim()), modes = static_cast<std::uint64_t>(rb.size());
  h.update(&n, sizeof n);
  h.update(&modes, sizeof modes);
  h.update(rb.basis.data(), static_cast<std::size_t>(rb.basis.size()) * sizeof(double));
  h.update(rb.spectrum.data(), static_cast<std::size_t>(rb.spectrum.size()) * sizeof(double));
  return h.digest();
}

}  // namespace microkappa
