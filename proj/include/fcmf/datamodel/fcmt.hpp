#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace fcmf::data {

// FCMT binary container:
//   "FCMT" | version u8 | ndim u8 | ndim × u32 LE dims | row-major LE payload
// Version 1 carries f32 (visual features); version 2 carries f64 (checkpoints).
inline constexpr std::uint8_t kFcmtF32 = 0x01;
inline constexpr std::uint8_t kFcmtF64 = 0x02;

struct FeatureArray {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct DoubleArray {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

void write_fcmt(std::ostream& os, std::span<const std::uint32_t> dims, std::span<const float> values);
void write_fcmt(std::ostream& os, std::span<const std::uint32_t> dims, std::span<const double> values);
void write_fcmt_file(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                     std::span<const float> values);

FeatureArray read_fcmt_f32(std::istream& is);
DoubleArray read_fcmt_f64(std::istream& is);
FeatureArray read_fcmt_file(const std::filesystem::path& path);
// Reads only the header of a version-1 file.
std::vector<std::uint32_t> read_fcmt_dims(const std::filesystem::path& path);

}  // namespace fcmf::data
