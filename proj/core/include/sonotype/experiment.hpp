#pragma once

// Trial runner for the sample-size and augmentation/transfer experiments.
//
// A trial draws sonotypes and samples from a catalog, splits the originals,
// optionally augments every split, trains a classifier (from scratch or on a
// frozen pretrained backbone) and scores it on the test split. Every row
// carries the seed that reproduces it.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sonotype/augment.hpp"
#include "sonotype/dataset.hpp"
#include "sonotype/evalstat.hpp"
#include "sonotype/nnet.hpp"
#include "sonotype/synth.hpp"

namespace sonotype {

enum class ExperimentKind : std::uint8_t { vary_k, vary_s_balanced, imbalanced, factors };
std::string_view experiment_name(ExperimentKind kind) noexcept;
ExperimentKind parse_experiment(std::string_view name);

/// The four combinations of augmentation and transfer, in panel order A-D.
enum class Arm : std::uint8_t { none, aug, transfer, aug_transfer };
inline constexpr Arm kAllArms[] = {Arm::none, Arm::aug, Arm::transfer, Arm::aug_transfer};

std::string_view arm_name(Arm arm) noexcept;
Arm parse_arm(std::string_view name);
/// 'A' none, 'B' aug, 'C' transfer, 'D' aug_transfer.
char arm_panel(Arm arm) noexcept;
constexpr bool uses_augmentation(Arm a) noexcept { return a == Arm::aug || a == Arm::aug_transfer; }
constexpr bool uses_transfer(Arm a) noexcept { return a == Arm::transfer || a == Arm::aug_transfer; }
/// Comma-separated arm names; "all" expands to the four arms.
std::vector<Arm> parse_arms(std::string_view list);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::vary_k;
  std::vector<std::size_t> k_values = {2, 3, 4, 5, 6};
  /// vary_k uses s_values.front() (49 by default).
  std::vector<std::size_t> s_values = {49};
  std::size_t k_fixed = 6;          // for vary_s_balanced, imbalanced, factors
  std::size_t trials = 20;          // imbalanced and factors trial count
  std::size_t replicates = 1;
  std::vector<Arm> arms = {Arm::none, Arm::aug, Arm::transfer, Arm::aug_transfer};
  std::uint64_t seed = 0;
  std::size_t min_samples = 3;

  std::size_t fan_out = 16;         // vary_k augmentation
  SplitQuota quota;                 // vary_s_balanced / imbalanced / factors augmentation
  std::size_t factor_bins = 3;      // quantile bins for numeric factors

  nn::NetworkConfig network;        // num_classes and freeze are set per trial
  nn::TrainConfig train;
  PretextConfig pretext;
  nn::TrainConfig pretext_train;
  std::uint64_t noise_seed = 7;
  /// Evaluate the freshly initialized network without training.
  bool skip_training = false;
  std::size_t jobs = 1;

  /// Throws InvalidConfig.
  void validate() const;
  /// Flat key=value echo of every field.
  std::string to_manifest() const;
};

/// Shared, read-only inputs for every trial of one run.
struct ExperimentResources {
  NoiseBank noise;
  /// Pretrained backbone; empty when no arm uses transfer.
  nn::ParameterMap<float> backbone;
};

/// Builds the noise bank and, if any arm needs it, pretrains the backbone.
ExperimentResources prepare_resources(const ExperimentConfig& config);

struct TrialSpec {
  ExperimentKind kind = ExperimentKind::vary_k;
  std::size_t k = 0;
  std::size_t s = 0;          // 0 for imbalanced draws
  Arm arm = Arm::none;
  std::size_t replicate = 0;
  /// Shared by all arms of the same (k, s, replicate), which makes arms paired.
  std::uint64_t seed = 0;
};

struct TrialRow {
  TrialSpec spec;
  std::vector<std::int32_t> sonotypes;
  double mean_size = 0.0;
  std::size_t min_size = 0;
  std::size_t train_count = 0;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  MetricsReport metrics;
};

/// Row seed for (kind, k, s, replicate) under the config's base seed.
std::uint64_t row_seed(const ExperimentConfig& config, std::size_t k, std::size_t s, std::size_t replicate);

/// The dataset a trial trains on: originals and augmented variants with
/// provenance, split tags and labels.
struct TrialData {
  ExperimentDraw draw;
  double mean_size = 0.0;
  std::size_t min_size = 0;
  Dataset dataset;
};

TrialData build_trial_data(const ExperimentConfig& config, const ExperimentResources& resources,
                           const SonotypeCatalog& catalog, const TrialSpec& spec);

/// Adds augmented variants to a split dataset: fan_out_count - 1 variants of
/// every original when set, otherwise each sonotype's splits are topped up to
/// the quota. New ids continue after the largest existing id.
Dataset augment_dataset(const Dataset& dataset, std::optional<std::size_t> fan_out_count, const SplitQuota& quota,
                        std::uint64_t rng_seed, const NoiseBank& bank = {});

struct SplitBatches {
  /// Sonotype id of each class index.
  std::vector<std::int32_t> classes;
  nn::Batch<float> train;
  nn::Batch<float> val;
  nn::Batch<float> test;
};

/// Per-split batches; classes defaults to the dataset's sorted labels.
/// Unassigned records are skipped.
SplitBatches split_batches(const Dataset& dataset, std::vector<std::int32_t> classes = {});
ScoredPredictions score_batch(const nn::Network<float>& model, const nn::Batch<float>& batch);

TrialRow run_trial(const ExperimentConfig& config, const ExperimentResources& resources,
                   const SonotypeCatalog& catalog, const TrialSpec& spec);

/// Every trial of the configured experiment, sorted by (k, s, replicate, arm).
std::vector<TrialSpec> plan_trials(const ExperimentConfig& config);
std::vector<TrialRow> run_trials(const ExperimentConfig& config, const ExperimentResources& resources,
                                 const SonotypeCatalog& catalog, const std::vector<TrialSpec>& specs);

struct FitRow {
  Arm arm = Arm::none;
  std::string x;  // "s", "mean_size" or "min_size"
  OlsFit fit;
};

struct ExperimentResult {
  std::vector<TrialRow> rows;
  std::vector<FitRow> fits;
};

ExperimentResult run_experiment1(const ExperimentConfig& config, const ExperimentResources& resources,
                                 const SonotypeCatalog& catalog);
ExperimentResult run_experiment2(const ExperimentConfig& config, const ExperimentResources& resources,
                                 const SonotypeCatalog& catalog);
ExperimentResult run_experiment3(const ExperimentConfig& config, const ExperimentResources& resources,
                                 const SonotypeCatalog& catalog);

/// Per-fit OLS of accuracy against the named row field, one per arm. Arms
/// with fewer than 3 rows or a constant regressor get no fit.
std::vector<FitRow> fit_accuracy(const std::vector<TrialRow>& rows, const std::string& x);

struct FactorObservation {
  std::int32_t sonotype = 0;
  std::string taxon;
  SonotypeStats stats;
  double accuracy = 0.0;  // per-class recall within the trial
};

struct AnovaRow {
  std::string factor;
  AnovaResult result;
  std::size_t groups = 0;
};

struct FactorResult {
  std::vector<TrialRow> rows;
  std::vector<FactorObservation> observations;
  std::vector<AnovaRow> table;
};

/// Balanced K-sonotype trials; per-sonotype accuracy grouped by taxon and by
/// quantile bins of low, high, bandwidth and duration.
FactorResult run_factors(const ExperimentConfig& config, const ExperimentResources& resources,
                         const SonotypeCatalog& catalog);
std::vector<AnovaRow> factor_anova(const std::vector<FactorObservation>& observations, std::size_t bins);

std::string rows_csv(const std::vector<TrialRow>& rows);
std::string fits_csv(const std::vector<FitRow>& fits);
/// factor,F,df1,df2,p
std::string anova_csv(const std::vector<AnovaRow>& table);
std::string observations_csv(const std::vector<FactorObservation>& observations);

}  // namespace sonotype
