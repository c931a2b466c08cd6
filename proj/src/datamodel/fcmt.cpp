#include "fcmf/datamodel/fcmt.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fcmf/errors.hpp"

namespace fcmf::data {

namespace {

static_assert(std::endian::native == std::endian::little, "FCMT I/O assumes a little-endian host");

constexpr char kMagic[4] = {'F', 'C', 'M', 'T'};

void write_header(std::ostream& os, std::uint8_t version, std::span<const std::uint32_t> dims,
                  std::size_t count) {
  if (dims.empty() || dims.size() > 255) throw DimensionError("FCMT: ndim must be in [1, 255]");
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  if (n != count) throw DimensionError("FCMT: dims do not match payload length");
  os.write(kMagic, 4);
  const auto ndim = static_cast<std::uint8_t>(dims.size());
  os.put(static_cast<char>(version));
  os.put(static_cast<char>(ndim));
  os.write(reinterpret_cast<const char*>(dims.data()), static_cast<std::streamsize>(dims.size() * 4));
}

std::vector<std::uint32_t> read_header(std::istream& is, std::uint8_t expected_version) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("FCMT: bad magic");
  const int version = is.get();
  const int ndim = is.get();
  if (!is) throw DataError("FCMT: truncated header");
  if (version != expected_version) {
    throw DataError("FCMT: expected version " + std::to_string(expected_version) + ", found " +
                    std::to_string(version));
  }
  if (ndim == 0) throw DataError("FCMT: ndim is zero");
  std::vector<std::uint32_t> dims(static_cast<std::size_t>(ndim));
  if (!is.read(reinterpret_cast<char*>(dims.data()), ndim * 4)) throw DataError("FCMT: truncated dims");
  return dims;
}

template <typename T>
std::vector<T> read_payload(std::istream& is, const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  std::vector<T> values(n);
  if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(T)))) {
    throw DataError("FCMT: truncated payload");
  }
  return values;
}

}  // namespace

void write_fcmt(std::ostream& os, std::span<const std::uint32_t> dims, std::span<const float> values) {
  write_header(os, kFcmtF32, dims, values.size());
  os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

void write_fcmt(std::ostream& os, std::span<const std::uint32_t> dims, std::span<const double> values) {
  write_header(os, kFcmtF64, dims, values.size());
  os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

void write_fcmt_file(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                     std::span<const float> values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  write_fcmt(os, dims, values);
}

FeatureArray read_fcmt_f32(std::istream& is) {
  FeatureArray out;
  out.dims = read_header(is, kFcmtF32);
  out.values = read_payload<float>(is, out.dims);
  return out;
}

DoubleArray read_fcmt_f64(std::istream& is) {
  DoubleArray out;
  out.dims = read_header(is, kFcmtF64);
  out.values = read_payload<double>(is, out.dims);
  return out;
}

FeatureArray read_fcmt_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file " + path.string());
  try {
    return read_fcmt_f32(is);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint32_t> read_fcmt_dims(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file " + path.string());
  try {
    return read_header(is, kFcmtF32);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace fcmf::data
