#include "sonotype/container.hpp"

#include <algorithm>
#include <bit>
#include <limits>

#include "bytes.hpp"
#include "sonotype/ingest.hpp"

namespace sonotype {

static_assert(std::endian::native == std::endian::little,
              "container payloads are memcpy'd and assume a little-endian host");

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::u8: return 1;
    case DType::i32: return 4;
    case DType::u32: return 4;
    case DType::i64: return 8;
    case DType::u64: return 8;
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::utf8: return 1;
  }
  return 0;
}

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::u8: return "u8";
    case DType::i32: return "i32";
    case DType::u32: return "u32";
    case DType::i64: return "i64";
    case DType::u64: return "u64";
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::utf8: return "utf8";
  }
  return "?";
}

std::uint64_t Entry::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void Container::put(Entry entry) {
  if (entry.payload.size() != entry.element_count() * dtype_size(entry.dtype)) {
    fail(Errc::shape_mismatch, "entry '" + entry.name + "': payload size disagrees with dims");
  }
  if (entry.dims.size() > 255) fail(Errc::shape_mismatch, "entry '" + entry.name + "': rank > 255");
  if (entry.name.size() > std::numeric_limits<std::uint16_t>::max()) {
    fail(Errc::invalid_argument, "entry name too long");
  }
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == entry.name; });
  if (it != entries_.end()) {
    *it = std::move(entry);
  } else {
    entries_.push_back(std::move(entry));
  }
}

void Container::put_u8(const std::string& name, std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values) {
  put(Entry{name, DType::u8, std::move(dims), std::move(values)});
}

void Container::put_text(const std::string& name, std::string_view text) {
  put(Entry{name, DType::utf8, {text.size()}, std::vector<std::uint8_t>(text.begin(), text.end())});
}

bool Container::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

const Entry& Container::at(std::string_view name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
  if (it == entries_.end()) fail(Errc::missing_entry, "no entry '" + std::string(name) + "'");
  return *it;
}

std::string Container::text(std::string_view name) const {
  const Entry& e = at(name);
  if (e.dtype != DType::utf8) fail(Errc::shape_mismatch, "entry '" + e.name + "' is not utf8");
  return {e.payload.begin(), e.payload.end()};
}

std::vector<std::string> Container::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::string_view(e.name).starts_with(prefix)) out.push_back(e.name);
  }
  return out;
}

std::vector<std::uint8_t> write_container(const Container& container) {
  detail::ByteWriter out;
  std::size_t total = 10;
  for (const auto& e : container.entries()) total += 2 + e.name.size() + 2 + 8 * e.dims.size() + 8 + e.payload.size();
  out.reserve(total);
  out.write_tag("SNTP");
  out.write_le<std::uint16_t>(kContainerVersion);
  out.write_le<std::uint32_t>(static_cast<std::uint32_t>(container.entries().size()));
  for (const auto& e : container.entries()) {
    out.write_le<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    out.write_tag(e.name);
    out.write_le<std::uint8_t>(static_cast<std::uint8_t>(e.dtype));
    out.write_le<std::uint8_t>(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) out.write_le<std::uint64_t>(d);
    out.write_le<std::uint64_t>(e.payload.size());
  }
  for (const auto& e : container.entries()) out.write_bytes(e.payload);
  return out.take();
}

Container read_container(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  if (!in.has(4) || in.read_tag(4) != "SNTP") fail(Errc::bad_magic, "expected 'SNTP'");
  if (!in.has(6)) fail(Errc::truncated_tensor, "header truncated before entry table");
  const auto version = in.read_le<std::uint16_t>();
  if (version != kContainerVersion) {
    fail(Errc::version_mismatch,
         "container version " + std::to_string(version) + ", reader supports " + std::to_string(kContainerVersion));
  }
  const auto count = in.read_le<std::uint32_t>();

  struct Pending {
    Entry entry;
    std::uint64_t bytes;
  };
  std::vector<Pending> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "entry #" + std::to_string(i);
    if (!in.has(2)) fail(Errc::truncated_tensor, where + ": table truncated");
    const auto name_len = in.read_le<std::uint16_t>();
    if (!in.has(name_len + 2u)) fail(Errc::truncated_tensor, where + ": table truncated");
    Pending p;
    p.entry.name = std::string(in.read_tag(name_len));
    const std::string label = "entry '" + p.entry.name + "'";
    const auto code = in.read_le<std::uint8_t>();
    if (code < 1 || code > 8) fail(Errc::truncated_tensor, label + ": unknown dtype code " + std::to_string(code));
    p.entry.dtype = static_cast<DType>(code);
    const auto rank = in.read_le<std::uint8_t>();
    if (!in.has(8u * rank + 8u)) fail(Errc::truncated_tensor, label + ": table truncated");
    for (std::uint8_t r = 0; r < rank; ++r) p.entry.dims.push_back(in.read_le<std::uint64_t>());
    p.bytes = in.read_le<std::uint64_t>();
    // Guard the product against overflow before comparing with the length.
    long double expected = dtype_size(p.entry.dtype);
    for (auto d : p.entry.dims) expected *= static_cast<long double>(d);
    if (expected != static_cast<long double>(p.bytes)) {
      fail(Errc::truncated_tensor, label + ": length field " + std::to_string(p.bytes) +
                                       " disagrees with dims and dtype");
    }
    table.push_back(std::move(p));
  }
  Container c;
  for (auto& p : table) {
    if (in.remaining() < p.bytes) {
      fail(Errc::truncated_tensor, "entry '" + p.entry.name + "': payload needs " + std::to_string(p.bytes) +
                                       " bytes, " + std::to_string(in.remaining()) + " remain");
    }
    auto span = in.read_span(static_cast<std::size_t>(p.bytes));
    p.entry.payload.assign(span.begin(), span.end());
    c.put(std::move(p.entry));
  }
  if (in.remaining() != 0) {
    fail(Errc::truncated_tensor, std::to_string(in.remaining()) + " trailing bytes after the last payload");
  }
  return c;
}

void write_container_file(const std::filesystem::path& path, const Container& container) {
  write_binary_file(path, write_container(container));
}

Container read_container_file(const std::filesystem::path& path) { return read_container(read_binary_file(path)); }

}  // namespace sonotype
