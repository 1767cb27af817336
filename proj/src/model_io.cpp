#include "drnn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "drnn/error.hpp"

namespace drnn {

namespace {

template <typename T>
void put(std::vector<char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
            std::conditional_t<sizeof(T) == 2, std::uint16_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  const auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    need(sizeof(T), what);
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(std::string("model container truncated while reading ") + what);
    }
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

template <typename Derived>
NamedArray to_array(const std::string& name, const Eigen::DenseBase<Derived>& a, bool is_vector,
                    Dtype dtype) {
  NamedArray out;
  out.name = name;
  out.dtype = dtype;
  if (is_vector) {
    out.dims = {static_cast<std::uint64_t>(a.size())};
  } else {
    out.dims = {static_cast<std::uint64_t>(a.rows()), static_cast<std::uint64_t>(a.cols())};
  }
  out.data.reserve(static_cast<std::size_t>(a.size()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) out.data.push_back(a(r, c));
  }
  return out;
}

}  // namespace

std::vector<char> encode_container(const std::vector<NamedArray>& arrays) {
  std::vector<char> out(std::begin(kContainerMagic), std::end(kContainerMagic));
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (a.name.size() > 0xFFFF) throw UsageError("array name too long: " + a.name);
    if (a.dims.size() > 0xFF) throw UsageError("array rank too large: " + a.name);
    std::uint64_t count = 1;
    for (auto d : a.dims) count *= d;
    if (count != a.data.size()) throw UsageError("array dims do not match data size: " + a.name);

    put<std::uint16_t>(out, static_cast<std::uint16_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(a.dtype));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(a.dims.size()));
    for (auto d : a.dims) put<std::uint64_t>(out, d);
    for (double v : a.data) {
      if (a.dtype == Dtype::kF64) put<double>(out, v);
      else put<float>(out, static_cast<float>(v));
    }
  }
  return out;
}

std::vector<NamedArray> decode_container(const std::vector<char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kContainerMagic, 4) != 0) {
    throw DataError("not a model container (bad magic)");
  }
  Reader in(bytes);
  in.get_string(4, "magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw DataError("unsupported model container version " + std::to_string(version));
  }
  const auto count = in.get<std::uint32_t>("array count");
  std::vector<NamedArray> arrays;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    const auto name_len = in.get<std::uint16_t>("name length");
    a.name = in.get_string(name_len, "name");
    const auto dtype = in.get<std::uint8_t>("dtype");
    if (dtype > 1) throw DataError("unknown dtype code " + std::to_string(dtype) + " for " + a.name);
    a.dtype = static_cast<Dtype>(dtype);
    const auto rank = in.get<std::uint8_t>("rank");
    std::uint64_t n = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      const auto d = in.get<std::uint64_t>("dims");
      a.dims.push_back(d);
      // any count beyond the file length is truncation; this also bounds n
      n = d == 0 ? 0 : (n > bytes.size() / d ? bytes.size() + 1 : n * d);
    }
    const std::size_t width = a.dtype == Dtype::kF64 ? 8 : 4;
    if (n > bytes.size()) throw DataError("model container truncated while reading data of " + a.name);
    in.need(n * width, "array data");
    a.data.resize(n);
    for (auto& v : a.data) v = a.dtype == Dtype::kF64 ? in.get<double>("data") : in.get<float>("data");
    arrays.push_back(std::move(a));
  }
  if (!in.done()) throw DataError("trailing bytes after last array");
  return arrays;
}

void write_container(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  const auto bytes = encode_container(arrays);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<NamedArray> read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

std::vector<NamedArray> model_to_arrays(const LstmStackParams& params, Dtype dtype) {
  params.validate();
  std::vector<NamedArray> arrays;
  params.for_each_array([&](const std::string& name, const auto& a) {
    constexpr bool is_vector = std::is_same_v<std::decay_t<decltype(a)>, Vector>;
    arrays.push_back(to_array(name, a, is_vector, dtype));
  });
  return arrays;
}

LstmStackParams model_from_arrays(const std::vector<NamedArray>& arrays) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;
  const auto find = [&](const std::string& name) -> const NamedArray& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("model container is missing array " + name);
    return *it->second;
  };

  const auto& v = find("V");
  if (v.dims.size() != 2) throw DataError("array V must be rank 2");
  auto params = LstmStackParams::zeros(v.dims[0], v.dims[1]);
  params.for_each_array([&](const std::string& name, auto& dst) {
    const auto& src = find(name);
    constexpr bool is_vector = std::is_same_v<std::decay_t<decltype(dst)>, Vector>;
    const bool shape_ok =
        is_vector ? (src.dims.size() == 1 && src.dims[0] == static_cast<std::uint64_t>(dst.size()))
                  : (src.dims.size() == 2 && src.dims[0] == static_cast<std::uint64_t>(dst.rows()) &&
                     src.dims[1] == static_cast<std::uint64_t>(dst.cols()));
    if (!shape_ok) throw DataError("array " + name + " has the wrong shape");
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < dst.rows(); ++r) {
      for (Eigen::Index c = 0; c < dst.cols(); ++c) dst(r, c) = src.data[i++];
    }
  });
  try {
    params.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid model: ") + e.what());
  }
  return params;
}

void save_model(const LstmStackParams& params, const std::filesystem::path& path, Dtype dtype) {
  write_container(path, model_to_arrays(params, dtype));
}

LstmStackParams load_model(const std::filesystem::path& path) {
  return model_from_arrays(read_container(path));
}

}  // namespace drnn
