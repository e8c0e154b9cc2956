#pragma once

// Self-describing tensor container ("SNTP").
//
// Layout, little-endian throughout:
//   magic      4 bytes  "SNTP"
//   version    u16      kContainerVersion
//   count      u32      number of entries
//   table      count x { u16 name_len, name (UTF-8), u8 dtype, u8 rank,
//                        rank x u64 dims, u64 payload_bytes }
//   payloads   concatenated in table order, row-major
//
// payload_bytes must equal product(dims) * dtype_size(dtype).

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sonotype/error.hpp"

namespace sonotype {

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::uint32_t kSchemaVersion = 1;

enum class DType : std::uint8_t {
  u8 = 1,
  i32 = 2,
  u32 = 3,
  i64 = 4,
  u64 = 5,
  f32 = 6,
  f64 = 7,
  utf8 = 8,
};

std::size_t dtype_size(DType dtype);
std::string_view dtype_name(DType dtype);

template <class T>
constexpr DType dtype_of();
template <> constexpr DType dtype_of<std::uint8_t>() { return DType::u8; }
template <> constexpr DType dtype_of<std::int32_t>() { return DType::i32; }
template <> constexpr DType dtype_of<std::uint32_t>() { return DType::u32; }
template <> constexpr DType dtype_of<std::int64_t>() { return DType::i64; }
template <> constexpr DType dtype_of<std::uint64_t>() { return DType::u64; }
template <> constexpr DType dtype_of<float>() { return DType::f32; }
template <> constexpr DType dtype_of<double>() { return DType::f64; }

struct Entry {
  std::string name;
  DType dtype = DType::u8;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;

  std::uint64_t element_count() const;

  friend bool operator==(const Entry&, const Entry&) = default;
};

class Container {
 public:
  void put(Entry entry);

  template <class T>
  void put_tensor(const std::string& name, std::vector<std::uint64_t> dims, std::span<const T> values) {
    Entry e{name, dtype_of<T>(), std::move(dims), {}};
    if (e.element_count() != values.size()) {
      fail(Errc::shape_mismatch, "entry '" + name + "': dims disagree with value count");
    }
    e.payload.resize(values.size() * sizeof(T));
    if (!values.empty()) std::memcpy(e.payload.data(), values.data(), e.payload.size());
    put(std::move(e));
  }
  void put_u8(const std::string& name, std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values);
  void put_text(const std::string& name, std::string_view text);
  template <class T>
  void put_scalar(const std::string& name, T value) {
    put_tensor<T>(name, {1}, std::span<const T>(&value, 1));
  }

  bool contains(std::string_view name) const;
  const Entry& at(std::string_view name) const;

  template <class T>
  std::vector<T> get(std::string_view name) const {
    const Entry& e = at(name);
    if (e.dtype != dtype_of<T>()) {
      fail(Errc::shape_mismatch, "entry '" + e.name + "' has dtype " + std::string(dtype_name(e.dtype)));
    }
    std::vector<T> out(e.element_count());
    if (!out.empty()) std::memcpy(out.data(), e.payload.data(), e.payload.size());
    return out;
  }
  template <class T>
  T scalar(std::string_view name) const {
    auto v = get<T>(name);
    if (v.size() != 1) fail(Errc::shape_mismatch, "entry '" + std::string(name) + "' is not a scalar");
    return v.front();
  }
  std::string text(std::string_view name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  /// Names starting with prefix, in insertion order.
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;

  friend bool operator==(const Container&, const Container&) = default;

 private:
  std::vector<Entry> entries_;
};

std::vector<std::uint8_t> write_container(const Container& container);
/// Errors: BadMagic, VersionMismatch, TruncatedTensor (names the entry).
Container read_container(std::span<const std::uint8_t> bytes);

void write_container_file(const std::filesystem::path& path, const Container& container);
Container read_container_file(const std::filesystem::path& path);

}  // namespace sonotype
