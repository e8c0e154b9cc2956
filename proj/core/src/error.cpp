#include "sonotype/error.hpp"

namespace sonotype {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_header: return "MalformedHeader";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::missing_column: return "MissingColumn";
    case Errc::non_numeric_field: return "NonNumericField";
    case Errc::invalid_taxon: return "InvalidTaxon";
    case Errc::non_positive_duration: return "NonPositiveDuration";
    case Errc::invalid_frequency_bounds: return "InvalidFrequencyBounds";
    case Errc::unsorted_input: return "UnsortedInput";
    case Errc::invalid_framing: return "InvalidFraming";
    case Errc::audio_too_short: return "AudioTooShort";
    case Errc::out_of_bounds: return "OutOfBounds";
    case Errc::unknown_noise_id: return "UnknownNoiseId";
    case Errc::invalid_augment_spec: return "InvalidAugmentSpec";
    case Errc::empty_split: return "EmptySplit";
    case Errc::too_few_samples: return "TooFewSamples";
    case Errc::insufficient_eligible_sonotypes: return "InsufficientEligibleSonotypes";
    case Errc::bad_magic: return "BadMagic";
    case Errc::version_mismatch: return "VersionMismatch";
    case Errc::truncated_tensor: return "TruncatedTensor";
    case Errc::missing_entry: return "MissingEntry";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::corpus_too_small: return "CorpusTooSmall";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::empty_input: return "EmptyInput";
    case Errc::degenerate_class: return "DegenerateClass";
    case Errc::constant_x: return "ConstantX";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::too_few_groups: return "TooFewGroups";
    case Errc::too_few_observations: return "TooFewObservations";
    case Errc::io_error: return "IoError";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

ParseError::ParseError(Errc code, std::size_t row, const std::string& what)
    : Error(code, "row " + std::to_string(row) + ": " + what), row_(row) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace sonotype
