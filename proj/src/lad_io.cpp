#include "ewod/adapters/lad_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ewod::adapters {

namespace {

constexpr char kMagic[4] = {'L', 'A', 'D', 'P'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_value(std::vector<std::uint8_t>& out, double v, std::uint8_t dtype) {
  if (dtype == 0) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    put_u32(out, bits);
  } else {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

void put_matrix(std::vector<std::uint8_t>& out, const Matrix& m,
                std::uint8_t dtype) {
  for (double v : m.data()) put_value(out, v, dtype);
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take(1)[0]; }

  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  double value(std::uint8_t dtype) {
    if (dtype == 0) return static_cast<double>(std::bit_cast<float>(u32()));
    return std::bit_cast<double>(u64());
  }

  std::string str(std::size_t n) {
    auto b = take(n);
    return std::string(reinterpret_cast<const char*>(b.data()), n);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw std::runtime_error("lad: truncated container");
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Matrix read_matrix(Cursor& c, std::size_t rows, std::size_t cols,
                   std::uint8_t dtype) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = c.value(dtype);
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_lad(const AdapterFile& file) {
  if (file.dtype > 1) throw std::invalid_argument("lad: unknown dtype code");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  out.push_back(file.dtype);
  put_u32(out, static_cast<std::uint32_t>(file.layers.size()));
  put_u64(out, file.n_cumulative);
  put_u32(out, file.task_index);
  for (const auto& [name, state] : file.layers) {
    if (name.size() > 0xffff) throw std::invalid_argument("lad: name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(state.agg.d_out()));
    put_u32(out, static_cast<std::uint32_t>(state.agg.d_in()));
    put_u32(out, static_cast<std::uint32_t>(state.rank()));
    for (const LoraDelta* d : {&state.agg, &state.task}) {
      if (d->d_out() != state.agg.d_out() || d->d_in() != state.agg.d_in() ||
          d->rank() != state.rank()) {
        throw std::invalid_argument("lad: layer '" + name +
                                    "' has mismatched delta shapes");
      }
      put_matrix(out, d->b, file.dtype);
      put_matrix(out, d->a, file.dtype);
    }
  }
  return out;
}

AdapterFile decode_lad(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  if (c.str(4) != std::string(kMagic, 4)) {
    throw std::runtime_error("lad: bad magic");
  }
  if (c.u16() != kVersion) throw std::runtime_error("lad: unsupported version");
  AdapterFile file;
  file.dtype = c.u8();
  if (file.dtype > 1) throw std::runtime_error("lad: unknown dtype code");
  const std::uint32_t n_layers = c.u32();
  file.n_cumulative = c.u64();
  file.task_index = c.u32();
  file.layers.reserve(n_layers);
  for (std::uint32_t li = 0; li < n_layers; ++li) {
    const std::size_t name_len = c.u16();
    std::string name = c.str(name_len);
    const std::size_t d_out = c.u32();
    const std::size_t d_in = c.u32();
    const std::size_t r = c.u32();
    AdapterState state;
    state.n_cumulative = file.n_cumulative;
    state.task_index = file.task_index;
    for (LoraDelta* d : {&state.agg, &state.task}) {
      d->b = read_matrix(c, d_out, r, file.dtype);
      d->a = read_matrix(c, r, d_in, file.dtype);
    }
    file.layers.emplace_back(std::move(name), std::move(state));
  }
  if (!c.done()) throw std::runtime_error("lad: trailing bytes");
  return file;
}

void write_lad(const std::filesystem::path& path, const AdapterFile& file) {
  const std::vector<std::uint8_t> bytes = encode_lad(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("lad: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("lad: write failed for " + path.string());
}

AdapterFile read_lad(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("lad: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_lad(bytes);
}

}  // namespace ewod::adapters
