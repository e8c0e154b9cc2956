#pragma once

// JSON run configuration for the command-line driver.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "sonotype/experiment.hpp"
#include "sonotype/synth.hpp"

namespace sonotype::cli {

struct RunConfig {
  ExperimentConfig experiment;
  BenchmarkConfig benchmark;
  std::uint64_t benchmark_seed = 1;
  /// Catalog container to use instead of a synthetic benchmark.
  std::optional<std::string> catalog_path;
};

/// Unknown keys and wrongly typed values throw InvalidConfig. The network's
/// image side also sets the benchmark and pretext image side.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::string& path);

std::string benchmark_manifest(const BenchmarkConfig& config, std::uint64_t seed);

}  // namespace sonotype::cli
