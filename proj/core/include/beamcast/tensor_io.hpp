// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_TENSOR_IO_HPP
#define BEAMCAST_TENSOR_IO_HPP

#include <filesystem>
#include <iosfwd>

#include "beamcast/tensor.hpp"

namespace beamcast {

// BCTN binary tensor format, little-endian:
//   magic "BCTN" | u32 rank | u64 dims[rank] | f64 values, row-major.
// Complex-valued dumps store interleaved (real, imag) pairs as a trailing
// dimension of 2.

void write_bctn(std::ostream& os, const Tensor& t);
// Throws DataIntegrityError on bad magic, truncation, or non-finite payload.
Tensor read_bctn(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace beamcast

#endif  // BEAMCAST_TENSOR_IO_HPP
