#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sonotype {

enum class Errc {
  // ingest
  malformed_header,
  unsupported_format,
  missing_column,
  non_numeric_field,
  invalid_taxon,
  non_positive_duration,
  invalid_frequency_bounds,
  unsorted_input,
  // spectro
  invalid_framing,
  audio_too_short,
  out_of_bounds,
  // augment
  unknown_noise_id,
  invalid_augment_spec,
  empty_split,
  // dataset / container
  too_few_samples,
  insufficient_eligible_sonotypes,
  bad_magic,
  version_mismatch,
  truncated_tensor,
  missing_entry,
  // nnet
  shape_mismatch,
  corpus_too_small,
  invalid_config,
  // evalstat
  empty_input,
  degenerate_class,
  constant_x,
  too_few_points,
  too_few_groups,
  too_few_observations,
  // plumbing
  io_error,
  invalid_argument,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Error raised while parsing a tabular text input; carries the 1-based data
/// row index (0 denotes the header line).
class ParseError : public Error {
 public:
  ParseError(Errc code, std::size_t row, const std::string& what);

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

}  // namespace sonotype
