#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drnn/lm.hpp"

namespace drnn {

// Uncompressed little-endian named-array container:
//   "DRNN" | version u32 | count u32 |
//   per array: name_len u16, name, dtype u8, rank u8, dims u64[rank], data (row-major)
inline constexpr char kContainerMagic[4] = {'D', 'R', 'N', 'N'};
inline constexpr std::uint32_t kContainerVersion = 1;

enum class Dtype : std::uint8_t { kF64 = 0, kF32 = 1 };

struct NamedArray {
  std::string name;
  Dtype dtype = Dtype::kF64;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;  // f32 arrays are widened on read
};

std::vector<char> encode_container(const std::vector<NamedArray>& arrays);
// Throws DataError on bad magic, unknown version, unknown dtype or truncation.
std::vector<NamedArray> decode_container(const std::vector<char>& bytes);

void write_container(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_container(const std::filesystem::path& path);

// Arrays are stored as f64 by default, which round-trips bit for bit.
void save_model(const LstmStackParams& params, const std::filesystem::path& path,
                Dtype dtype = Dtype::kF64);
LstmStackParams load_model(const std::filesystem::path& path);

std::vector<NamedArray> model_to_arrays(const LstmStackParams& params, Dtype dtype);
LstmStackParams model_from_arrays(const std::vector<NamedArray>& arrays);

}  // namespace drnn
