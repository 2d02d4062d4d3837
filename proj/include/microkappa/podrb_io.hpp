#pragma once

#include <cstdint>
#include <filesystem>

#include "microkappa/podrb.hpp"

namespace microkappa {

/// Basis file layout (little-endian):
///
///   char[4]  magic "MKRB"
///   u32      version (1)
///   u64      n, N
///   u8       method (0 batch, 1 A, 2 B, 3 C)
///   u8       spectrum kind (0 eigenvalues, 1 singular values)
///   f64      eps
///   f64      squared Frobenius norm of absorbed snapshots
///   u64      absorbed snapshot count
///   f64[n*N] basis, column-major
///   f64[N]   spectrum
///   u64 r, u64 c, f64[r*c]  right factor, column-major (0 x 0 when absent)
void save_basis(const std::filesystem::path& path, const ReducedBasis<double>& rb);
ReducedBasis<double> load_basis(const std::filesystem::path& path);

/// FNV-1a over the basis and spectrum bytes; identifies the basis a model
/// was trained against.
std::uint64_t basis_hash(const ReducedBasis<double>& rb);

}  // namespace microkappa
