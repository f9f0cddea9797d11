// SPDX-License-Identifier: Apache-2.0

#include "beamcast/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>

#include "beamcast/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "BCTN I/O assumes a little-endian host");

namespace beamcast {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'T', 'N'};
constexpr std::int64_t kMaxRank = 8;
constexpr std::int64_t kMaxElements = 1LL << 32;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataIntegrityError("BCTN: truncated stream");
  return v;
}

}  // namespace

void write_bctn(std::ostream& os, const Tensor& t) {
  if (!t.defined()) throw ContractError("write_bctn: undefined tensor");
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::int64_t d : t.shape()) write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * static_cast<std::int64_t>(sizeof(double))));
  if (!os) throw DataIntegrityError("BCTN: write failed");
}

Tensor read_bctn(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataIntegrityError("BCTN: bad magic");
  }
  const auto rank = read_pod<std::uint32_t>(is);
  if (rank == 0 || rank > kMaxRank) throw DataIntegrityError("BCTN: implausible rank");
  Shape shape(rank);
  std::int64_t numel = 1;
  for (auto& d : shape) {
    const auto v = read_pod<std::uint64_t>(is);
    if (v == 0 || v > static_cast<std::uint64_t>(kMaxElements)) {
      throw DataIntegrityError("BCTN: implausible dimension");
    }
    d = static_cast<std::int64_t>(v);
    numel *= d;
    if (numel > kMaxElements) throw DataIntegrityError("BCTN: implausible element count");
  }
  std::vector<double> data(static_cast<std::size_t>(numel));
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!is) throw DataIntegrityError("BCTN: truncated payload");
  Tensor t(std::move(shape), std::move(data));
  if (!t.all_finite()) throw DataIntegrityError("BCTN: non-finite values in payload");
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataIntegrityError("cannot open for write: " + path.string());
  write_bctn(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataIntegrityError("cannot open for read: " + path.string());
  return read_bctn(is);
}

}  // namespace beamcast
