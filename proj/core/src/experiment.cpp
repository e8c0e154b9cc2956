#include "sonotype/experiment.hpp"

#include <algorithm>
#include <functional>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "sonotype/error.hpp"
#include "sonotype/random.hpp"

namespace sonotype {

namespace {

enum SeedStream : std::uint64_t {
  kDrawStream = 1,
  kSplitStream = 2,
  kAugmentStream = 3,
  kInitStream = 4,
  kTrainStream = 5,
  kPretextCorpusStream = 0x70726574,
  kPretextTrainStream = 0x70747261,
};

constexpr std::size_t kImbalancedCandidates = 64;

}  // namespace

std::string_view experiment_name(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::vary_k: return "vary_k";
    case ExperimentKind::vary_s_balanced: return "vary_s_balanced";
    case ExperimentKind::imbalanced: return "imbalanced";
    case ExperimentKind::factors: return "factors";
  }
  return "?";
}

ExperimentKind parse_experiment(std::string_view name) {
  for (auto k : {ExperimentKind::vary_k, ExperimentKind::vary_s_balanced, ExperimentKind::imbalanced,
                 ExperimentKind::factors}) {
    if (experiment_name(k) == name) return k;
  }
  fail(Errc::invalid_config, "unknown experiment '" + std::string(name) + "'");
}

std::string_view arm_name(Arm arm) noexcept {
  switch (arm) {
    case Arm::none: return "none";
    case Arm::aug: return "aug";
    case Arm::transfer: return "transfer";
    case Arm::aug_transfer: return "aug_transfer";
  }
  return "?";
}

Arm parse_arm(std::string_view name) {
  for (auto a : kAllArms) {
    if (arm_name(a) == name) return a;
  }
  fail(Errc::invalid_config, "unknown arm '" + std::string(name) + "'");
}

char arm_panel(Arm arm) noexcept { return static_cast<char>('A' + static_cast<int>(arm)); }

std::vector<Arm> parse_arms(std::string_view list) {
  if (list == "all") return {std::begin(kAllArms), std::end(kAllArms)};
  std::vector<Arm> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    const auto item = list.substr(0, comma);
    if (!item.empty()) {
      const Arm a = parse_arm(item);
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
    }
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  if (out.empty()) fail(Errc::invalid_config, "arm list is empty");
  std::sort(out.begin(), out.end());
  return out;
}

void ExperimentConfig::validate() const {
  if (replicates == 0) fail(Errc::invalid_config, "replicates must be >= 1");
  if (arms.empty()) fail(Errc::invalid_config, "at least one arm is required");
  if (jobs == 0) fail(Errc::invalid_config, "jobs must be >= 1");
  if (fan_out == 0) fail(Errc::invalid_config, "fan_out must be >= 1");
  if (factor_bins < 2) fail(Errc::invalid_config, "factor_bins must be >= 2");
  if (kind == ExperimentKind::vary_k) {
    if (k_values.empty()) fail(Errc::invalid_config, "k_values is empty");
    for (auto k : k_values) {
      if (k < 2) fail(Errc::invalid_config, "every K must be >= 2");
    }
  } else if (k_fixed < 2) {
    fail(Errc::invalid_config, "k_fixed must be >= 2");
  }
  if (kind != ExperimentKind::imbalanced && s_values.empty()) fail(Errc::invalid_config, "s_values is empty");
  if ((kind == ExperimentKind::imbalanced || kind == ExperimentKind::factors) && trials == 0) {
    fail(Errc::invalid_config, "trials must be >= 1");
  }
  network.validate();
  train.validate();
  pretext_train.validate();
}

std::string ExperimentConfig::to_manifest() const {
  std::ostringstream os;
  os.precision(17);
  auto list = [&](const auto& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      if constexpr (std::is_same_v<std::decay_t<decltype(v[i])>, Arm>) out += arm_name(v[i]);
      else out += std::to_string(v[i]);
    }
    return out;
  };
  os << "experiment=" << experiment_name(kind) << "\nk_values=" << list(k_values) << "\ns_values=" << list(s_values)
     << "\nk_fixed=" << k_fixed << "\ntrials=" << trials << "\nreplicates=" << replicates << "\narms=" << list(arms)
     << "\nseed=" << seed << "\nmin_samples=" << min_samples << "\nfan_out=" << fan_out << "\nquota="
     << quota.train << ',' << quota.val << ',' << quota.test << "\nfactor_bins=" << factor_bins
     << "\nnoise_seed=" << noise_seed << "\nskip_training=" << (skip_training ? 1 : 0) << "\njobs=" << jobs;
  auto train_text = [&](const char* prefix, const nn::TrainConfig& t) {
    os << '\n' << prefix << "learning_rate=" << t.learning_rate << '\n' << prefix << "batch_size=" << t.batch_size
       << '\n' << prefix << "max_epochs=" << t.max_epochs << '\n' << prefix << "patience=" << t.patience << '\n'
       << prefix << "optimizer=" << (t.optimizer == nn::Optimizer::adam ? "adam" : "sgd") << '\n' << prefix
       << "beta1=" << t.beta1 << '\n' << prefix << "beta2=" << t.beta2 << '\n' << prefix << "epsilon=" << t.epsilon;
  };
  train_text("train.", train);
  train_text("pretext_train.", pretext_train);
  os << "\npretext.num_classes=" << pretext.num_classes << "\npretext.per_class=" << pretext.per_class
     << "\npretext.snr_db=";
  if (pretext.render.snr_db) os << *pretext.render.snr_db;
  else os << "none";
  os << "\npretext.annotation_jitter=" << pretext.render.annotation_jitter << '\n';
  std::istringstream net(network.to_text());
  std::string line;
  while (std::getline(net, line)) os << "network." << line << '\n';
  return os.str();
}

ExperimentResources prepare_resources(const ExperimentConfig& config) {
  config.validate();
  ExperimentResources r;
  r.noise = make_noise_bank(config.network.image_side, config.noise_seed);
  const bool needs_backbone =
      std::any_of(config.arms.begin(), config.arms.end(), [](Arm a) { return uses_transfer(a); });
  if (needs_backbone) {
    PretextConfig pc = config.pretext;
    pc.image_side = config.network.image_side;
    const auto corpus = make_pretext_corpus(pc, derive_seed(config.seed, {kPretextCorpusStream}));
    std::vector<const EncodedSample*> ptrs;
    for (const auto& s : corpus) ptrs.push_back(&s);
    const auto batch = nn::make_batch<float>(ptrs, [](std::int32_t label) { return static_cast<int>(label); });
    r.backbone = nn::pretext_pretrain(config.network, batch, pc.num_classes, config.pretext_train,
                                      derive_seed(config.seed, {kPretextTrainStream}));
  }
  return r;
}

std::uint64_t row_seed(const ExperimentConfig& config, std::size_t k, std::size_t s, std::size_t replicate) {
  return derive_seed(config.seed, {static_cast<std::uint64_t>(config.kind), k, s, replicate});
}

namespace {

ImbalancedDraw stratified_imbalanced(const ExperimentConfig& config, const SonotypeCatalog& catalog,
                                     const TrialSpec& spec) {
  const auto eligible = catalog.eligible(config.min_samples);
  if (eligible.size() < spec.k) {
    fail(Errc::insufficient_eligible_sonotypes, std::to_string(eligible.size()) + " sonotypes have >= " +
                                                    std::to_string(config.min_samples) + " samples, need " +
                                                    std::to_string(spec.k));
  }
  std::vector<std::size_t> sizes;
  for (auto id : eligible) sizes.push_back(catalog.entry(id).members.size());
  std::sort(sizes.begin(), sizes.end());
  const double lo = std::accumulate(sizes.begin(), sizes.begin() + static_cast<std::ptrdiff_t>(spec.k), 0.0) / spec.k;
  const double hi = std::accumulate(sizes.end() - static_cast<std::ptrdiff_t>(spec.k), sizes.end(), 0.0) / spec.k;
  const double frac = (static_cast<double>(spec.replicate % config.trials) + 0.5) / static_cast<double>(config.trials);
  const double target = lo + (hi - lo) * frac;

  std::optional<ImbalancedDraw> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < kImbalancedCandidates; ++c) {
    auto d = select_imbalanced(catalog, spec.k, derive_seed(spec.seed, {kDrawStream, c}), config.min_samples);
    const double gap = std::fabs(d.mean_size - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = std::move(d);
    }
  }
  return *best;
}

}  // namespace

TrialData build_trial_data(const ExperimentConfig& config, const ExperimentResources& resources,
                           const SonotypeCatalog& catalog, const TrialSpec& spec) {
  TrialData out;
  if (spec.kind == ExperimentKind::imbalanced) {
    auto d = stratified_imbalanced(config, catalog, spec);
    out.draw = std::move(d.draw);
    out.mean_size = d.mean_size;
    out.min_size = d.min_size;
  } else {
    out.draw = select_balanced(catalog, spec.k, spec.s, derive_seed(spec.seed, {kDrawStream}));
    out.mean_size = static_cast<double>(spec.s);
    out.min_size = spec.s;
  }
  out.dataset = build_split_dataset(catalog, out.draw, derive_seed(spec.seed, {kSplitStream}));
  if (!uses_augmentation(spec.arm)) return out;
  std::optional<std::size_t> fan = std::nullopt;
  if (spec.kind == ExperimentKind::vary_k) fan = config.fan_out;
  out.dataset = augment_dataset(out.dataset, fan, config.quota, derive_seed(spec.seed, {kAugmentStream}),
                                resources.noise);
  return out;
}

Dataset augment_dataset(const Dataset& dataset, std::optional<std::size_t> fan_out_count, const SplitQuota& quota,
                        std::uint64_t rng_seed, const NoiseBank& bank) {
  Dataset out = dataset;
  std::uint64_t next_id = 0;
  for (const auto& rec : dataset.records) next_id = std::max(next_id, rec.id);
  ++next_id;
  std::vector<const SampleRecord*> originals;
  for (const auto& rec : dataset.records) {
    if (rec.origin != Origin::original) continue;
    if (rec.split == SplitTag::unassigned) fail(Errc::invalid_argument, "record " + std::to_string(rec.id) + " has no split");
    originals.push_back(&rec);
  }
  auto add_variant = [&](EncodedSample sample, const SampleRecord& parent) {
    out.records.push_back({std::move(sample), next_id++, Origin::augmented, parent.id, parent.split});
  };

  if (fan_out_count) {
    for (const auto* rec : originals) {
      auto variants = fan_out(rec->sample, *fan_out_count, derive_seed(rng_seed, {rec->id}), bank);
      for (std::size_t v = 1; v < variants.size(); ++v) add_variant(std::move(variants[v]), *rec);
    }
    return out;
  }

  std::set<std::int32_t> labels;
  for (const auto* rec : originals) labels.insert(rec->sample.label);
  for (auto sonotype : labels) {
    std::vector<const SampleRecord*> by_split[3];
    std::vector<EncodedSample> samples[3];
    for (const auto* rec : originals) {
      if (rec->sample.label != sonotype) continue;
      const auto idx = static_cast<std::size_t>(rec->split);
      by_split[idx].push_back(rec);
      samples[idx].push_back(rec->sample);
    }
    auto splits = augment_to_quota(samples[0], samples[1], samples[2], quota,
                                   derive_seed(rng_seed, {static_cast<std::uint64_t>(static_cast<std::uint32_t>(sonotype))}),
                                   bank);
    const std::vector<AugmentedItem>* items[3] = {&splits.train, &splits.val, &splits.test};
    for (std::size_t k = 0; k < 3; ++k) {
      for (const auto& item : *items[k]) {
        if (item.augmented) add_variant(item.sample, *by_split[k][item.parent]);
      }
    }
  }
  return out;
}

SplitBatches split_batches(const Dataset& dataset, std::vector<std::int32_t> classes) {
  SplitBatches out;
  if (classes.empty()) {
    std::set<std::int32_t> labels;
    for (const auto& rec : dataset.records) labels.insert(rec.sample.label);
    classes.assign(labels.begin(), labels.end());
  }
  std::map<std::int32_t, int> index;
  for (std::size_t c = 0; c < classes.size(); ++c) index[classes[c]] = static_cast<int>(c);
  std::vector<const EncodedSample*> ptrs[3];
  for (const auto& rec : dataset.records) {
    if (rec.split == SplitTag::unassigned) continue;
    if (!index.count(rec.sample.label)) {
      fail(Errc::shape_mismatch, "label " + std::to_string(rec.sample.label) + " is not among the model's classes");
    }
    ptrs[static_cast<std::size_t>(rec.split)].push_back(&rec.sample);
  }
  auto label_of = [&](std::int32_t id) { return index.at(id); };
  out.train = nn::make_batch<float>(ptrs[0], label_of);
  out.val = nn::make_batch<float>(ptrs[1], label_of);
  out.test = nn::make_batch<float>(ptrs[2], label_of);
  out.classes = std::move(classes);
  return out;
}

ScoredPredictions score_batch(const nn::Network<float>& model, const nn::Batch<float>& batch) {
  const auto probs = model.predict(batch);
  ScoredPredictions preds;
  preds.num_classes = model.config().num_classes;
  preds.labels = batch.labels;
  preds.scores.assign(probs.data(), probs.data() + probs.size());
  return preds;
}

TrialRow run_trial(const ExperimentConfig& config, const ExperimentResources& resources,
                   const SonotypeCatalog& catalog, const TrialSpec& spec) {
  TrialData data = build_trial_data(config, resources, catalog, spec);
  TrialRow row;
  row.spec = spec;
  row.sonotypes = data.draw.sonotypes;
  row.mean_size = data.mean_size;
  row.min_size = data.min_size;

  const auto batches = split_batches(data.dataset, data.draw.sonotypes);
  const auto& train_batch = batches.train;
  const auto& val_batch = batches.val;
  row.train_count = train_batch.size;

  nn::NetworkConfig nc = config.network;
  nc.num_classes = spec.k;
  nc.freeze_backbone = uses_transfer(spec.arm);
  if (data.dataset.image_height != nc.image_side || data.dataset.image_width != nc.image_side) {
    fail(Errc::shape_mismatch, "catalog images are " + std::to_string(data.dataset.image_height) + "x" +
                                   std::to_string(data.dataset.image_width) + ", network expects " +
                                   std::to_string(nc.image_side));
  }
  nn::Network<float> net(nc);
  net.initialize(derive_seed(spec.seed, {kInitStream}));
  if (uses_transfer(spec.arm)) {
    if (resources.backbone.empty()) fail(Errc::invalid_config, "transfer arm requested without a pretrained backbone");
    net.load_backbone(resources.backbone);
  }
  if (!config.skip_training) {
    nn::TrainConfig tc = config.train;
    tc.seed = derive_seed(spec.seed, {kTrainStream});
    const auto result = nn::train(net, train_batch, val_batch, tc);
    row.stopped_epoch = result.stopped_epoch;
    row.best_epoch = result.best.epoch;
  }

  const auto preds = score_batch(net, batches.test);
  row.metrics = evaluate(preds);
  return row;
}

std::vector<TrialSpec> plan_trials(const ExperimentConfig& config) {
  config.validate();
  std::vector<TrialSpec> out;
  auto emit = [&](std::size_t k, std::size_t s, std::size_t rep) {
    const auto seed = row_seed(config, k, s, rep);
    for (Arm a : config.arms) out.push_back({config.kind, k, s, a, rep, seed});
  };
  switch (config.kind) {
    case ExperimentKind::vary_k:
      for (auto k : config.k_values) {
        for (std::size_t r = 0; r < config.replicates; ++r) emit(k, config.s_values.front(), r);
      }
      break;
    case ExperimentKind::vary_s_balanced:
      for (auto s : config.s_values) {
        for (std::size_t r = 0; r < config.replicates; ++r) emit(config.k_fixed, s, r);
      }
      break;
    case ExperimentKind::imbalanced:
      for (std::size_t t = 0; t < config.trials; ++t) emit(config.k_fixed, 0, t);
      break;
    case ExperimentKind::factors:
      for (std::size_t t = 0; t < config.trials; ++t) emit(config.k_fixed, config.s_values.front(), t);
      break;
  }
  std::stable_sort(out.begin(), out.end(), [](const TrialSpec& a, const TrialSpec& b) {
    return std::tie(a.k, a.s, a.replicate, a.arm) < std::tie(b.k, b.s, b.replicate, b.arm);
  });
  return out;
}

std::vector<TrialRow> run_trials(const ExperimentConfig& config, const ExperimentResources& resources,
                                 const SonotypeCatalog& catalog, const std::vector<TrialSpec>& specs) {
  std::vector<TrialRow> rows(specs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        rows[i] = run_trial(config, resources, catalog, specs[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = specs.size();
      }
    }
  };
  const std::size_t jobs = std::min(config.jobs, std::max<std::size_t>(specs.size(), 1));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return rows;
}

std::vector<FitRow> fit_accuracy(const std::vector<TrialRow>& rows, const std::string& x) {
  std::vector<FitRow> out;
  for (Arm arm : kAllArms) {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      if (r.spec.arm != arm) continue;
      if (x == "s") xs.push_back(static_cast<double>(r.spec.s));
      else if (x == "mean_size") xs.push_back(r.mean_size);
      else if (x == "min_size") xs.push_back(static_cast<double>(r.min_size));
      else if (x == "k") xs.push_back(static_cast<double>(r.spec.k));
      else fail(Errc::invalid_argument, "unknown regressor '" + x + "'");
      ys.push_back(r.metrics.accuracy);
    }
    const bool varies = std::adjacent_find(xs.begin(), xs.end(), std::not_equal_to<>()) != xs.end();
    if (xs.size() < 3 || !varies) continue;
    out.push_back({arm, x, ols_ci(xs, ys)});
  }
  return out;
}

ExperimentResult run_experiment1(const ExperimentConfig& config, const ExperimentResources& resources,
                                 const SonotypeCatalog& catalog) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::vary_k;
  ExperimentResult r;
  r.rows = run_trials(c, resources, catalog, plan_trials(c));
  return r;
}

ExperimentResult run_experiment2(const ExperimentConfig& config, const ExperimentResources& resources,
                                 const SonotypeCatalog& catalog) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::vary_s_balanced;
  ExperimentResult r;
  r.rows = run_trials(c, resources, catalog, plan_trials(c));
  r.fits = fit_accuracy(r.rows, "s");
  return r;
}

ExperimentResult run_experiment3(const ExperimentConfig& config, const ExperimentResources& resources,
                                 const SonotypeCatalog& catalog) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::imbalanced;
  ExperimentResult r;
  r.rows = run_trials(c, resources, catalog, plan_trials(c));
  r.fits = fit_accuracy(r.rows, "mean_size");
  auto by_min = fit_accuracy(r.rows, "min_size");
  r.fits.insert(r.fits.end(), by_min.begin(), by_min.end());
  return r;
}

std::vector<AnovaRow> factor_anova(const std::vector<FactorObservation>& obs, std::size_t bins) {
  std::vector<AnovaRow> table;
  auto finish = [&](const std::string& name, std::map<std::string, std::vector<double>> grouped) {
    std::vector<std::vector<double>> groups;
    for (auto& [key, values] : grouped) {
      if (values.size() >= 2) groups.push_back(std::move(values));
    }
    if (groups.size() < 2) return;
    table.push_back({name, anova_oneway(groups), groups.size()});
  };
  std::map<std::string, std::vector<double>> by_taxon;
  for (const auto& o : obs) by_taxon[o.taxon].push_back(o.accuracy);
  finish("taxon", std::move(by_taxon));

  auto numeric = [&](const std::string& name, auto&& value_of) {
    std::vector<std::size_t> order(obs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return value_of(obs[a]) < value_of(obs[b]); });
    std::map<std::string, std::vector<double>> grouped;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const std::size_t bin = rank * bins / order.size();
      char key[16];
      std::snprintf(key, sizeof key, "bin%03zu", bin);
      grouped[key].push_back(obs[order[rank]].accuracy);
    }
    finish(name, std::move(grouped));
  };
  numeric("low_hz", [](const FactorObservation& o) { return o.stats.low_hz; });
  numeric("high_hz", [](const FactorObservation& o) { return o.stats.high_hz; });
  numeric("bandwidth_hz", [](const FactorObservation& o) { return o.stats.bandwidth_hz; });
  numeric("duration_s", [](const FactorObservation& o) { return o.stats.duration_s; });
  return table;
}

FactorResult run_factors(const ExperimentConfig& config, const ExperimentResources& resources,
                         const SonotypeCatalog& catalog) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::factors;
  FactorResult out;
  out.rows = run_trials(c, resources, catalog, plan_trials(c));
  for (const auto& row : out.rows) {
    for (std::size_t i = 0; i < row.sonotypes.size(); ++i) {
      const auto& entry = catalog.entry(row.sonotypes[i]);
      out.observations.push_back(
          {row.sonotypes[i], std::string(taxon_name(entry.taxon)), entry.stats, row.metrics.per_class[i].metrics.recall});
    }
  }
  out.table = factor_anova(out.observations, c.factor_bins);
  return out;
}

std::string rows_csv(const std::vector<TrialRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "experiment,k,s,arm,panel,replicate,seed,mean_size,min_size,train_count,stopped_epoch,best_epoch,"
        "accuracy,map,cmap,auc,recall,specificity,precision,f1,sonotypes\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    os << experiment_name(r.spec.kind) << ',' << r.spec.k << ',' << r.spec.s << ',' << arm_name(r.spec.arm) << ','
       << arm_panel(r.spec.arm) << ',' << r.spec.replicate << ',' << r.spec.seed << ',' << r.mean_size << ','
       << r.min_size << ',' << r.train_count << ',' << r.stopped_epoch << ',' << r.best_epoch << ',' << m.accuracy
       << ',' << m.map << ',' << m.cmap << ',' << m.auc << ',' << m.recall << ',' << m.specificity << ','
       << m.precision << ',' << m.f1 << ',';
    for (std::size_t i = 0; i < r.sonotypes.size(); ++i) os << (i ? ";" : "") << r.sonotypes[i];
    os << '\n';
  }
  return os.str();
}

std::string fits_csv(const std::vector<FitRow>& fits) {
  std::ostringstream os;
  os.precision(17);
  os << "arm,x,n,slope,intercept,slope_stderr,ci_low,ci_high,r_squared\n";
  for (const auto& f : fits) {
    os << arm_name(f.arm) << ',' << f.x << ',' << f.fit.n << ',' << f.fit.slope << ',' << f.fit.intercept << ','
       << f.fit.slope_stderr << ',' << f.fit.ci_low << ',' << f.fit.ci_high << ',' << f.fit.r_squared << '\n';
  }
  return os.str();
}

std::string anova_csv(const std::vector<AnovaRow>& table) {
  std::ostringstream os;
  os.precision(17);
  os << "factor,F,df1,df2,p\n";
  for (const auto& r : table) {
    os << r.factor << ',' << r.result.f << ',' << r.result.df_between << ',' << r.result.df_within << ','
       << r.result.p << '\n';
  }
  return os.str();
}

std::string observations_csv(const std::vector<FactorObservation>& observations) {
  std::ostringstream os;
  os.precision(17);
  os << "sonotype,taxon,low_hz,high_hz,bandwidth_hz,duration_s,accuracy\n";
  for (const auto& o : observations) {
    os << o.sonotype << ',' << o.taxon << ',' << o.stats.low_hz << ',' << o.stats.high_hz << ','
       << o.stats.bandwidth_hz << ',' << o.stats.duration_s << ',' << o.accuracy << '\n';
  }
  return os.str();
}

}  // namespace sonotype
