#include "sonotype/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "bytes.hpp"
#include "sonotype/error.hpp"

namespace sonotype {

namespace {

constexpr std::array<std::string_view, 7> kTaxonNames = {
    "bird", "invertebrate", "mammal", "amphibian", "unknown", "anthropophony", "geophony"};

constexpr std::uint16_t kPcmFormat = 1;

}  // namespace

std::string_view taxon_name(Taxon taxon) noexcept {
  return kTaxonNames[static_cast<std::size_t>(taxon)];
}

bool parse_taxon(std::string_view name, Taxon& out) noexcept {
  for (std::size_t i = 0; i < kTaxonNames.size(); ++i) {
    if (kTaxonNames[i] == name) {
      out = static_cast<Taxon>(i);
      return true;
    }
  }
  return false;
}

void validate(const AudioBuffer& audio) {
  if (audio.samples.empty()) fail(Errc::invalid_argument, "audio buffer is empty");
  if (audio.sample_rate_hz == 0) fail(Errc::invalid_argument, "sample_rate_hz must be positive");
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    float v = audio.samples[i];
    if (!(v >= -1.0f && v < 1.0f)) {
      fail(Errc::invalid_argument, "sample " + std::to_string(i) + " outside [-1, 1)");
    }
  }
}

AudioBuffer parse_wav(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  if (!in.has(12)) fail(Errc::malformed_header, "stream shorter than the RIFF header");
  if (in.read_tag(4) != "RIFF") fail(Errc::malformed_header, "magic: expected 'RIFF'");
  in.read_le<std::uint32_t>();  // riff size; not trusted
  if (in.read_tag(4) != "WAVE") fail(Errc::malformed_header, "format: expected 'WAVE'");

  bool have_fmt = false;
  std::uint32_t sample_rate = 0;

  while (in.has(8)) {
    std::string tag(in.read_tag(4));
    std::uint32_t size = in.read_le<std::uint32_t>();
    if (!in.has(size)) {
      fail(Errc::malformed_header,
           "chunk '" + tag + "' size " + std::to_string(size) + " exceeds stream length");
    }
    if (tag == "fmt ") {
      if (size < 16) fail(Errc::malformed_header, "fmt chunk size " + std::to_string(size) + " < 16");
      auto body = detail::ByteReader(in.read_span(size));
      std::uint16_t audio_format = body.read_le<std::uint16_t>();
      std::uint16_t channels = body.read_le<std::uint16_t>();
      sample_rate = body.read_le<std::uint32_t>();
      body.read_le<std::uint32_t>();  // byte rate
      body.read_le<std::uint16_t>();  // block align
      std::uint16_t bits = body.read_le<std::uint16_t>();
      if (audio_format != kPcmFormat) {
        fail(Errc::unsupported_format, "audio_format=" + std::to_string(audio_format) + " (only PCM=1)");
      }
      if (channels != 1) {
        fail(Errc::unsupported_format, "num_channels=" + std::to_string(channels) + " (only mono)");
      }
      if (bits != 16) {
        fail(Errc::unsupported_format, "bits_per_sample=" + std::to_string(bits) + " (only 16)");
      }
      if (sample_rate == 0) fail(Errc::malformed_header, "sample_rate=0");
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) fail(Errc::malformed_header, "data chunk precedes fmt chunk");
      if (size % 2 != 0) {
        fail(Errc::malformed_header, "data chunk size " + std::to_string(size) + " is not a multiple of 2");
      }
      AudioBuffer audio;
      audio.sample_rate_hz = sample_rate;
      audio.samples.resize(size / 2);
      auto payload = in.read_span(size);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        auto word = static_cast<std::int16_t>(static_cast<std::uint16_t>(payload[2 * i]) |
                                              (static_cast<std::uint16_t>(payload[2 * i + 1]) << 8));
        audio.samples[i] = static_cast<float>(word) / 32768.0f;
      }
      return audio;
    } else {
      in.skip(size);
    }
    if (size % 2 == 1 && in.has(1)) in.skip(1);  // RIFF pad byte
  }
  if (!have_fmt) fail(Errc::malformed_header, "missing fmt chunk");
  fail(Errc::malformed_header, "missing data chunk");
}

std::vector<std::uint8_t> serialize_wav(const AudioBuffer& audio) {
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  detail::ByteWriter out;
  out.reserve(44 + data_bytes);
  out.write_tag("RIFF");
  out.write_le<std::uint32_t>(36 + data_bytes);
  out.write_tag("WAVE");
  out.write_tag("fmt ");
  out.write_le<std::uint32_t>(16);
  out.write_le<std::uint16_t>(kPcmFormat);
  out.write_le<std::uint16_t>(1);
  out.write_le<std::uint32_t>(audio.sample_rate_hz);
  out.write_le<std::uint32_t>(audio.sample_rate_hz * 2);
  out.write_le<std::uint16_t>(2);
  out.write_le<std::uint16_t>(16);
  out.write_tag("data");
  out.write_le<std::uint32_t>(data_bytes);
  auto& buf = out.buffer();
  for (float v : audio.samples) {
    double scaled = std::nearbyint(static_cast<double>(v) * 32768.0);
    auto word = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    auto u = static_cast<std::uint16_t>(word);
    buf.push_back(static_cast<std::uint8_t>(u & 0xFF));
    buf.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out.take();
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <class T>
T parse_number(std::string_view field, std::size_t row, std::string_view column) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(Errc::non_numeric_field, row,
                     std::string(column) + " = '" + std::string(field) + "' is not numeric");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      throw ParseError(Errc::non_numeric_field, row, std::string(column) + " is not finite");
    }
  }
  return value;
}

constexpr std::array<std::string_view, 6> kColumns = {"begin_s", "end_s",       "low_hz",
                                                      "high_hz", "sonotype_id", "taxon"};

}  // namespace

std::vector<AnnotatedClip> parse_annotations(std::string_view text, std::uint32_t sample_rate_hz) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  // Drop trailing blank lines; interior blank lines are skipped below.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(Errc::missing_column, 0, "missing header line");

  auto header = split_fields(lines.front());
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].remove_prefix(3);
  std::array<std::size_t, kColumns.size()> index{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) {
      throw ParseError(Errc::missing_column, 0, "header lacks column '" + std::string(kColumns[c]) + "'");
    }
    index[c] = static_cast<std::size_t>(it - header.begin());
  }

  const double nyquist = sample_rate_hz / 2.0;
  std::vector<AnnotatedClip> clips;
  std::size_t row = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (trim(lines[l]).empty()) continue;
    ++row;
    auto fields = split_fields(lines[l]);
    if (fields.size() < header.size()) {
      throw ParseError(Errc::missing_column, row,
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    AnnotatedClip clip;
    clip.begin_s = parse_number<double>(fields[index[0]], row, kColumns[0]);
    clip.end_s = parse_number<double>(fields[index[1]], row, kColumns[1]);
    clip.low_hz = parse_number<double>(fields[index[2]], row, kColumns[2]);
    clip.high_hz = parse_number<double>(fields[index[3]], row, kColumns[3]);
    clip.sonotype_id = parse_number<std::int32_t>(fields[index[4]], row, kColumns[4]);
    if (!parse_taxon(fields[index[5]], clip.taxon)) {
      throw ParseError(Errc::invalid_taxon, row, "taxon '" + std::string(fields[index[5]]) + "'");
    }
    if (!(clip.begin_s < clip.end_s)) {
      throw ParseError(Errc::non_positive_duration, row, "begin_s must be < end_s");
    }
    if (!(clip.low_hz >= 0.0 && clip.low_hz < clip.high_hz && clip.high_hz <= nyquist)) {
      throw ParseError(Errc::invalid_frequency_bounds, row,
                       "require 0 <= low_hz < high_hz <= " + std::to_string(nyquist));
    }
    clips.push_back(clip);
  }
  return clips;
}

std::string format_annotations(std::span<const AnnotatedClip> clips) {
  std::ostringstream os;
  os.precision(17);
  os << "begin_s,end_s,low_hz,high_hz,sonotype_id,taxon\n";
  for (const auto& c : clips) {
    os << c.begin_s << ',' << c.end_s << ',' << c.low_hz << ',' << c.high_hz << ',' << c.sonotype_id
       << ',' << taxon_name(c.taxon) << '\n';
  }
  return os.str();
}

std::vector<AnnotatedClip> merge_adjacent(std::span<const AnnotatedClip> clips, double gap_s) {
  for (std::size_t i = 1; i < clips.size(); ++i) {
    if (clips[i].begin_s < clips[i - 1].begin_s) {
      fail(Errc::unsorted_input, "clip " + std::to_string(i) + " begins before clip " + std::to_string(i - 1));
    }
  }
  std::vector<AnnotatedClip> merged;
  std::optional<AnnotatedClip> current;
  for (const auto& clip : clips) {
    if (current && current->sonotype_id == clip.sonotype_id && clip.begin_s - current->end_s < gap_s) {
      current->end_s = std::max(current->end_s, clip.end_s);
      current->low_hz = std::min(current->low_hz, clip.low_hz);
      current->high_hz = std::max(current->high_hz, clip.high_hz);
      continue;
    }
    if (current) merged.push_back(*current);
    current = clip;
  }
  if (current) merged.push_back(*current);
  return merged;
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io_error, "short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  out << text;
}

}  // namespace sonotype
