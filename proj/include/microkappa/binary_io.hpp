#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Core>

#include "microkappa/error.hpp"

namespace microkappa {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written in native little-endian order");

/// Unbuffered helpers for the little-endian containers (.rb, .mk).
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    require(bool(out_), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  void put_bytes(std::string_view bytes) { out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); }

  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    put_bytes(s);
  }

  template <typename Derived>
  void put_matrix(const Eigen::DenseBase<Derived>& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    const Eigen::MatrixXd colmajor = m.template cast<double>();
    out_.write(reinterpret_cast<const char*>(colmajor.data()),
               static_cast<std::streamsize>(colmajor.size() * sizeof(double)));
  }

  void close() {
    out_.close();
    require(!out_.fail(), ErrorKind::Io, "failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    require(bool(in_), ErrorKind::Io, "cannot open " + path.string());
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T value{};
    read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
  }

  std::string get_bytes(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    require(n < (1ULL << 32), ErrorKind::Format, path_.string() + ": implausible string length");
    return get_bytes(static_cast<std::size_t>(n));
  }

  Eigen::MatrixXd get_matrix() {
    const auto rows = get<std::uint64_t>();
    const auto cols = get<std::uint64_t>();
    require(rows < (1ULL << 32) && cols < (1ULL << 32), ErrorKind::Format,
            path_.string() + ": implausible matrix shape");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    read(reinterpret_cast<char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }

  void expect_end() {
    require(in_.peek() == std::char_traits<char>::eof(), ErrorKind::Format,
            path_.string() + ": trailing bytes");
  }

 private:
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    require(in_.gcount() == static_cast<std::streamsize>(n), ErrorKind::Format,
            path_.string() + ": unexpected end of file");
  }

  std::filesystem::path path_;
  std::ifstream in_;
};

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

std::string hex64(std::uint64_t v);

}  // namespace microkappa
