#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sonotype/container.hpp"
#include "sonotype/ingest.hpp"
#include "sonotype/spectro.hpp"

namespace sonotype {

enum class SplitTag : std::uint8_t { train = 0, val = 1, test = 2, unassigned = 255 };
enum class Origin : std::uint8_t { original = 0, augmented = 1 };

std::string_view split_name(SplitTag tag) noexcept;

struct SampleRecord {
  EncodedSample sample;
  std::uint64_t id = 0;
  Origin origin = Origin::original;
  /// Id of the original this record derives from; equals id for originals.
  std::uint64_t parent_id = 0;
  SplitTag split = SplitTag::unassigned;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Dataset {
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::vector<SampleRecord> records;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Entries: schema_version, dataset/{images,aux,labels,ids,origin,parent,split}.
Container to_container(const Dataset& dataset);
Dataset dataset_from_container(const Container& container);

std::vector<std::uint8_t> write_dataset(const Dataset& dataset);
Dataset read_dataset(std::span<const std::uint8_t> bytes);

struct ProvenanceViolation {
  std::uint64_t id;
  std::string reason;
};

/// Every augmented record must point at an original with the same label that
/// sits in the same split.
std::vector<ProvenanceViolation> audit_provenance(const Dataset& dataset);

/// Per-sonotype summary; every field is a mean over member clips.
struct SonotypeStats {
  std::size_t count = 0;
  double low_hz = 0.0;
  double high_hz = 0.0;
  double bandwidth_hz = 0.0;
  double duration_s = 0.0;
};

struct CatalogSample {
  EncodedSample sample;
  AnnotatedClip clip;
  std::uint64_t id = 0;
};

struct SonotypeEntry {
  Taxon taxon = Taxon::unknown;
  std::vector<std::size_t> members;  // indices into SonotypeCatalog::samples()
  SonotypeStats stats;
};

/// Immutable sonotype catalog. Sample labels must equal their clip's
/// sonotype_id; ids must be unique.
class SonotypeCatalog {
 public:
  SonotypeCatalog() = default;
  explicit SonotypeCatalog(std::vector<CatalogSample> samples);

  const std::vector<CatalogSample>& samples() const noexcept { return samples_; }
  const std::map<std::int32_t, SonotypeEntry>& sonotypes() const noexcept { return entries_; }
  const SonotypeEntry& entry(std::int32_t sonotype_id) const;
  std::size_t size() const noexcept { return entries_.size(); }
  /// Sonotype ids with at least min_n samples, ascending.
  std::vector<std::int32_t> eligible(std::size_t min_n) const;

  /// Dataset entries plus catalog/clips (f64 [N,4]) and catalog/taxon (u8 [N]).
  Container to_container() const;
  static SonotypeCatalog from_container(const Container& container);

 private:
  std::vector<CatalogSample> samples_;
  std::map<std::int32_t, SonotypeEntry> entries_;
};

SonotypeCatalog filter_min_samples(const SonotypeCatalog& catalog, std::size_t min_n = 3);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

/// val = test = max(1, round_half_up(n / 10)), train = n - val - test.
SplitCounts split_counts(std::size_t n);

struct SplitAssignment {
  SplitCounts counts;
  std::vector<SplitTag> tags;  // per input index
};

/// Uniformly random assignment of n items with split_counts(n) proportions.
SplitAssignment split(std::size_t n, std::uint64_t rng_seed);

struct ExperimentDraw {
  std::vector<std::int32_t> sonotypes;              // ascending
  std::vector<std::vector<std::size_t>> samples;    // per sonotype, catalog sample indices
};

ExperimentDraw select_balanced(const SonotypeCatalog& catalog, std::size_t k, std::size_t s, std::uint64_t rng_seed);

struct ImbalancedDraw {
  ExperimentDraw draw;
  double mean_size = 0.0;
  std::size_t min_size = 0;
};

/// k distinct sonotypes among those with >= min_n samples, all samples kept.
ImbalancedDraw select_imbalanced(const SonotypeCatalog& catalog, std::size_t k, std::uint64_t rng_seed,
                                 std::size_t min_n = 3);

/// Records tagged per sonotype with split(); labels keep the sonotype id.
Dataset build_split_dataset(const SonotypeCatalog& catalog, const ExperimentDraw& draw, std::uint64_t rng_seed);

}  // namespace sonotype
