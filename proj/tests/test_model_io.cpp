#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "drnn/error.hpp"
#include "drnn/model_io.hpp"
#include "oracles.hpp"

using namespace drnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("drnn_io_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<char> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("model round-trip is bitwise exact") {
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = oracle::random_params(11, 4, seed, 3.0);
    p.output(0, 0) = -0.0;
    p.layers[1].bias[2][3] = 1e-310;  // subnormal
    save_model(p, dir.path / "m.drnn");
    const auto q = load_model(dir.path / "m.drnn");
    const auto a = oracle::flatten(p);
    const auto b = oracle::flatten(q);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("container layout") {
  NamedArray a{"w", Dtype::kF32, {2, 3}, {1, 2, 3, 4, 5, 6}};
  const auto bytes = encode_container({a});
  // magic + version + count + (2 + 1 + 1 + 1 + 16) header + 6 floats
  CHECK(bytes.size() == 4 + 4 + 4 + 2 + 1 + 1 + 1 + 16 + 24);
  CHECK(std::string(bytes.data(), 4) == "DRNN");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 1);  // name length, little-endian
  CHECK(bytes[14] == 'w');
  CHECK(bytes[15] == 1);  // f32
  CHECK(bytes[16] == 2);  // rank
  const auto back = decode_container(bytes);
  REQUIRE(back.size() == 1);
  CHECK(back[0].dims == a.dims);
  CHECK(back[0].data == a.data);
}

TEST_CASE("f32 storage widens on load") {
  TempDir dir;
  const auto p = oracle::random_params(9, 3, 1);
  save_model(p, dir.path / "m32.drnn", Dtype::kF32);
  const auto q = load_model(dir.path / "m32.drnn");
  const auto a = oracle::flatten(p);
  const auto b = oracle::flatten(q);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == static_cast<double>(static_cast<float>(a[i])));
}

TEST_CASE("file size follows the array count") {
  TempDir dir;
  // hidden 128 / vocab 8000 in 32-bit floats
  const auto p = LstmStackParams::zeros(8000, 128);
  save_model(p, dir.path / "big.drnn", Dtype::kF32);
  const std::uint64_t floats = 4ull * (128 * 128 + 128 * 8000 + 128) + 2 * 4ull * (2 * 128 * 128 + 128) +
                               8000ull * 128;
  const auto size = fs::file_size(dir.path / "big.drnn");
  CHECK(size > floats * 4);
  CHECK(size < floats * 4 + 4096);
}

TEST_CASE("corrupt containers are rejected") {
  TempDir dir;
  const auto p = oracle::random_params(7, 3, 2);
  save_model(p, dir.path / "ok.drnn");
  const auto good = read_all(dir.path / "ok.drnn");

  auto bad_magic = good;
  bad_magic[0] = 'X';
  write_all(dir.path / "magic.drnn", bad_magic);
  CHECK_THROWS_WITH_AS(load_model(dir.path / "magic.drnn"), doctest::Contains("magic"), DataError);

  auto bad_version = good;
  bad_version[4] = 9;
  write_all(dir.path / "version.drnn", bad_version);
  CHECK_THROWS_WITH_AS(load_model(dir.path / "version.drnn"), doctest::Contains("version"), DataError);

  for (std::size_t cut : {std::size_t{6}, std::size_t{20}, good.size() / 2, good.size() - 1}) {
    write_all(dir.path / "trunc.drnn", std::vector<char>(good.begin(), good.begin() + static_cast<long>(cut)));
    CHECK_THROWS_WITH_AS(load_model(dir.path / "trunc.drnn"), doctest::Contains("truncated"), DataError);
  }

  auto trailing = good;
  trailing.push_back(0);
  write_all(dir.path / "trail.drnn", trailing);
  CHECK_THROWS_AS(load_model(dir.path / "trail.drnn"), DataError);

  // a container missing one of the named arrays
  auto arrays = model_to_arrays(p, Dtype::kF64);
  arrays.erase(arrays.begin() + 3);
  write_container(dir.path / "missing.drnn", arrays);
  CHECK_THROWS_WITH_AS(load_model(dir.path / "missing.drnn"), doctest::Contains("missing array"), DataError);

  CHECK_THROWS_AS(load_model(dir.path / "does_not_exist.drnn"), DataError);
}
