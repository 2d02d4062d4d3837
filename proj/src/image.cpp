#include "microkappa/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include "microkappa/error.hpp"

namespace microkappa {

MicrostructureImage::MicrostructureImage(int resolution, std::vector<std::uint8_t> pixels)
    : resolution_(resolution), pixels_(std::move(pixels)) {
  require(resolution > 0, ErrorKind::InvalidArgument, "image resolution must be positive");
  require(pixels_.size() == static_cast<std::size_t>(resolution) * resolution,
          ErrorKind::InvalidArgument, "pixel count does not match resolution²");
  for (auto& p : pixels_) {
    p = p ? 1 : 0;
    count_ += p;
  }
  achieved_vf_ = static_cast<double>(count_) / static_cast<double>(pixels_.size());
}

MicrostructureImage MicrostructureImage::filled(int resolution, std::uint8_t phase) {
  return MicrostructureImage(
      resolution, std::vector<std::uint8_t>(static_cast<std::size_t>(resolution) * resolution, phase));
}

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

}  // namespace

MicrostructureImage translate(const MicrostructureImage& img, int dx, int dy) {
  const int n = img.resolution();
  std::vector<std::uint8_t> out(img.size());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      out[static_cast<std::size_t>(wrap(r + dy, n)) * n + wrap(c + dx, n)] = img(r, c);
  return MicrostructureImage(n, std::move(out));
}

MicrostructureImage rotate90(const MicrostructureImage& img) {
  // (x, y) -> (y, -x) up to a periodic shift: new(row=c', col=r') pattern.
  const int n = img.resolution();
  std::vector<std::uint8_t> out(img.size());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      out[static_cast<std::size_t>(c) * n + (n - 1 - r)] = img(r, c);
  return MicrostructureImage(n, std::move(out));
}

MicrostructureImage swap_phases(const MicrostructureImage& img) {
  std::vector<std::uint8_t> out(img.pixels());
  for (auto& p : out) p = 1 - p;
  return MicrostructureImage(img.resolution(), std::move(out));
}

void write_matrix_txt(const std::filesystem::path& path, const MicrostructureImage& img) {
  std::ofstream out(path);
  require(bool(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  const int n = img.resolution();
  std::string line;
  line.reserve(2 * n);
  for (int r = 0; r < n; ++r) {
    line.clear();
    for (int c = 0; c < n; ++c) {
      if (c) line.push_back(' ');
      line.push_back(img(r, c) ? '1' : '0');
    }
    line.push_back('\n');
    out << line;
  }
  require(bool(out), ErrorKind::Io, "failed writing " + path.string());
}

MicrostructureImage read_matrix_txt(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(bool(in), ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> pixels;
  int rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::size_t here = 0;
    double v;
    while (ls >> v) {
      pixels.push_back(v > 0.5 ? 1 : 0);
      ++here;
    }
    require(!ls.bad() && ls.eof(), ErrorKind::Format, "non-numeric entry in " + path.string());
    if (rows == 0) cols = here;
    require(here == cols, ErrorKind::Format, "ragged rows in " + path.string());
    ++rows;
  }
  require(rows > 0 && cols == static_cast<std::size_t>(rows), ErrorKind::Format,
          path.string() + " is not a square matrix");
  return MicrostructureImage(rows, std::move(pixels));
}

void write_pgm(const std::filesystem::path& path, const MicrostructureImage& img) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "P5\n" << img.resolution() << ' ' << img.resolution() << "\n255\n";
  std::vector<char> bytes(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), bytes.begin(),
                 [](std::uint8_t p) { return static_cast<char>(p ? 255 : 0); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(bool(out), ErrorKind::Io, "failed writing " + path.string());
}

namespace {

// Reads the next header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

MicrostructureImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::Io, "cannot open " + path.string());
  const std::string magic = pgm_token(in);
  require(magic == "P5" || magic == "P2", ErrorKind::Format, path.string() + ": not a PGM file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pgm_token(in));
    h = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorKind::Format, path.string() + ": bad PGM header");
  }
  require(w == h && w > 0, ErrorKind::Format, path.string() + ": image must be square");
  require(maxval > 0 && maxval < 256, ErrorKind::Format, path.string() + ": only 8-bit PGM supported");
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h);
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    require(in.gcount() == static_cast<std::streamsize>(pixels.size()), ErrorKind::Format,
            path.string() + ": truncated pixel data");
  } else {
    for (auto& p : pixels) {
      int v;
      require(bool(in >> v), ErrorKind::Format, path.string() + ": truncated pixel data");
      p = static_cast<std::uint8_t>(v);
    }
  }
  for (auto& p : pixels) p = (2 * p > maxval) ? 1 : 0;
  return MicrostructureImage(w, std::move(pixels));
}

MicrostructureImage read_image(const std::filesystem::path& path) {
  if (path.extension() == ".pgm") return read_pgm(path);
  return read_matrix_txt(path);
}

}  // namespace microkappa
