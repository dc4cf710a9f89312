#pragma once

// Named-tensor checkpoint files.
//
// Layout (all integers and values little-endian):
//   "RRNETCK1"                       8-byte magic
//   u64 count
//   count x { u32 name_len, name bytes, u64 rows, u64 cols }
//   row-major f64 values of every tensor, in table order

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "rrnet/model.hpp"

namespace rrnet {

inline constexpr std::array<char, 8> kCheckpointMagic{'R', 'R', 'N', 'E', 'T', 'C', 'K', '1'};

struct CheckpointEntry {
  std::string name;
  Matrix value;
};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& v) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&v, bytes.data(), sizeof(T));
  return true;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint64_t>(os, tensors.size());
  for (const auto& nt : tensors) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(nt.name.size()));
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(nt.tensor.rows()));
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(nt.tensor.cols()));
  }
  for (const auto& nt : tensors) {
    const Matrix& m = nt.tensor.value();
    for (Index i = 0; i < m.size(); ++i) detail::put_le<double>(os, m.data()[i]);
  }
}

inline void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  write_checkpoint(os, tensors);
  if (!os) throw IoError("write failed for checkpoint '" + path + "'");
}

inline std::vector<CheckpointEntry> read_checkpoint(std::istream& is, const std::string& origin = "checkpoint") {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw FormatError(origin + ": bad magic, not a checkpoint file");
  }
  std::uint64_t count = 0;
  if (!detail::get_le(is, count)) throw FormatError(origin + ": truncated header");
  if (count > (1u << 20)) throw FormatError(origin + ": implausible tensor count " + std::to_string(count));

  std::vector<CheckpointEntry> out;
  out.reserve(count);
  for (std::uint64_t t = 0; t < count; ++t) {
    std::uint32_t len = 0;
    if (!detail::get_le(is, len) || len > 4096) {
      throw FormatError(origin + ": corrupt table entry " + std::to_string(t));
    }
    std::string name(len, '\0');
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    if (!is.read(name.data(), len) || !detail::get_le(is, rows) || !detail::get_le(is, cols)) {
      throw FormatError(origin + ": truncated table entry " + std::to_string(t));
    }
    if (rows > (1ull << 32) || cols > (1ull << 32) || (cols != 0 && rows > (1ull << 34) / cols)) {
      throw FormatError(origin + ": tensor '" + name + "' has implausible shape");
    }
    out.push_back({std::move(name), Matrix(static_cast<Index>(rows), static_cast<Index>(cols))});
  }
  for (auto& e : out) {
    for (Index i = 0; i < e.value.size(); ++i) {
      if (!detail::get_le(is, e.value.data()[i])) throw FormatError(origin + ": tensor '" + e.name + "' is truncated");
    }
    if (!e.value.allFinite()) throw FormatError(origin + ": tensor '" + e.name + "' holds non-finite values");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(origin + ": trailing bytes after last tensor");
  return out;
}

inline std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(is, path);
}

/// Copies checkpoint values into `params`; names and shapes must match exactly.
inline void restore_params(ModelParams& params, const std::vector<CheckpointEntry>& entries,
                           const std::string& origin = "checkpoint") {
  auto named = params.named();
  for (std::size_t i = 0; i < std::min(named.size(), entries.size()); ++i) {
    if (entries[i].name != named[i].name) {
      throw FormatError(origin + ": tensor '" + entries[i].name + "' found where '" + named[i].name + "' expected");
    }
    if (entries[i].value.rows() != named[i].tensor.rows() || entries[i].value.cols() != named[i].tensor.cols()) {
      throw FormatError(origin + ": tensor '" + entries[i].name + "' is " +
                        shape_str(entries[i].value.rows(), entries[i].value.cols()) + ", model expects " +
                        named[i].tensor.shape());
    }
  }
  if (entries.size() < named.size()) throw FormatError(origin + ": missing tensor '" + named[entries.size()].name + "'");
  if (entries.size() > named.size()) throw FormatError(origin + ": unexpected tensor '" + entries[named.size()].name + "'");
  for (std::size_t i = 0; i < named.size(); ++i) named[i].tensor.mutable_value() = entries[i].value;
}

}  // namespace rrnet
