#pragma once

// Little-endian byte cursor helpers shared by the WAV and container codecs.

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace sonotype::detail {

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  bool has(std::size_t n) const noexcept { return remaining() >= n; }

  template <class T>
  T read_le() {
    T value{};
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      acc |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    if constexpr (sizeof(T) == 8) {
      std::memcpy(&value, &acc, 8);
    } else {
      auto narrow = static_cast<std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                   std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                      std::uint8_t>>>(acc);
      std::memcpy(&value, &narrow, sizeof(T));
    }
    return value;
  }

  std::string_view read_tag(std::size_t n) {
    std::string_view tag(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return tag;
  }

  std::span<const std::uint8_t> read_span(std::size_t n) {
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  template <class T>
  void write_le(T value) {
    std::uint64_t acc = 0;
    std::memcpy(&acc, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>((acc >> (8 * i)) & 0xFF));
    }
  }

  void write_tag(std::string_view tag) { out_.insert(out_.end(), tag.begin(), tag.end()); }
  void write_bytes(std::span<const std::uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }
  void reserve(std::size_t n) { out_.reserve(n); }

  std::vector<std::uint8_t>& buffer() noexcept { return out_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

}  // namespace sonotype::detail
