#include "microkappa/correlation.hpp"

#include <cstring>
#include <fstream>

#include "microkappa/binary_io.hpp"

namespace microkappa {

void write_field_pgm(const std::filesystem::path& path, const Grid<double>& values) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  out << "P5\n" << values.cols() << ' ' << values.rows() << "\n255\n";
  std::string bytes(static_cast<std::size_t>(values.size()), '\0');
  for (Eigen::Index i = 0; i < values.size(); ++i)
    bytes[static_cast<std::size_t>(i)] =
        static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (values.data()[i] - lo) / span)));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(bool(out), ErrorKind::Io, "failed writing " + path.string());
}

void write_field_f64(const std::filesystem::path& path, const Grid<double>& values) {
  BinaryWriter w(path);
  w.put_bytes({reinterpret_cast<const char*>(values.data()),
               static_cast<std::size_t>(values.size()) * sizeof(double)});
  w.close();
}

Grid<double> read_field_f64(const std::filesystem::path& path, int resolution) {
  BinaryReader r(path);
  Grid<double> g(resolution, resolution);
  const auto bytes = r.get_bytes(static_cast<std::size_t>(g.size()) * sizeof(double));
  std::memcpy(g.data(), bytes.data(), bytes.size());
  r.expect_end();
  return g;
}

}  // namespace microkappa
