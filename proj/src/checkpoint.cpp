#include "hwgen/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "hwgen/error.hpp"
#include "hwgen/nn.hpp"

namespace hwgen {

namespace {

constexpr std::array<char, 8> kMagic{'H', 'W', 'G', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kDtypeF32 = 1;
constexpr std::uint8_t kDtypeF64 = 2;

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  auto n = get_le<std::uint32_t>(is);
  if (n > (1u << 24)) throw DataError("checkpoint string too long");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw DataError("checkpoint truncated");
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& id) const {
  for (const auto& [name, t] : tensors) {
    if (name == id) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, Checkpoint::kVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.config.size()));
  for (const auto& [k, v] : ckpt.config) {
    put_string(os, k);
    put_string(os, v);
  }
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [id, t] : ckpt.tensors) {
    put_string(os, id);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    put_le<std::uint8_t>(os, sizeof(Real) == 4 ? kDtypeF32 : kDtypeF64);
    for (Real v : t.values()) put_le<Real>(os, v);
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint not found: " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError("not a checkpoint file: " + path.string());
  }
  auto version = get_le<std::uint32_t>(is);
  if (version != Checkpoint::kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  auto n_cfg = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_cfg; ++i) {
    std::string k = get_string(is);
    ckpt.config[k] = get_string(is);
  }
  auto n_t = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_t; ++i) {
    std::string id = get_string(is);
    auto rank = get_le<std::uint32_t>(is);
    if (rank > 8) throw DataError("checkpoint tensor rank too large for " + id);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(get_le<std::uint32_t>(is)));
    auto dtype = get_le<std::uint8_t>(is);
    Tensor t(shape);
    for (auto& v : t.values()) {
      if (dtype == kDtypeF32) {
        v = static_cast<Real>(get_le<float>(is));
      } else if (dtype == kDtypeF64) {
        v = static_cast<Real>(get_le<double>(is));
      } else {
        throw DataError("unknown dtype tag in checkpoint for " + id);
      }
    }
    ckpt.tensors.emplace_back(std::move(id), std::move(t));
  }
  return ckpt;
}

void append_params(Checkpoint& ckpt, const ParamSet& params) {
  for (const Parameter* p : params.all()) ckpt.tensors.emplace_back(p->id, p->value);
}

void restore_params(const Checkpoint& ckpt, ParamSet& params) {
  for (Parameter* p : params.all()) {
    const Tensor* t = ckpt.find(p->id);
    if (t == nullptr) throw DataError("checkpoint lacks parameter " + p->id);
    if (t->shape() != p->value.shape()) {
      throw DataError("checkpoint shape " + shape_str(t->shape()) + " for " + p->id +
                      " does not match model " + shape_str(p->value.shape()));
    }
    p->value = *t;
    p->grad.reset();
  }
}

}  // namespace hwgen
