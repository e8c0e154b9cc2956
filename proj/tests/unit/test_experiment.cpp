#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sonotype/experiment.hpp"

using namespace sonotype;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.network.image_side = 32;
  c.network.conv_filters = {4, 8};
  c.network.dense_sizes = {32, 16};
  c.train.max_epochs = 8;
  c.train.patience = 3;
  c.pretext.image_side = 32;
  c.pretext.per_class = 4;
  c.pretext_train.max_epochs = 2;
  c.quota = {20, 5, 5};
  c.fan_out = 4;
  return c;
}

const SonotypeCatalog& catalog() {
  static const SonotypeCatalog cat = [] {
    BenchmarkConfig b;
    b.image_side = 32;
    b.samples_per = 40;
    return make_benchmark(b, 5);
  }();
  return cat;
}

const ExperimentResources& resources() {
  static const ExperimentResources res = prepare_resources(small_config());
  return res;
}

}  // namespace

TEST(Arms, NamesPanelsAndParsing) {
  EXPECT_EQ(arm_panel(Arm::none), 'A');
  EXPECT_EQ(arm_panel(Arm::aug), 'B');
  EXPECT_EQ(arm_panel(Arm::transfer), 'C');
  EXPECT_EQ(arm_panel(Arm::aug_transfer), 'D');
  EXPECT_EQ(parse_arms("all"), (std::vector<Arm>{Arm::none, Arm::aug, Arm::transfer, Arm::aug_transfer}));
  EXPECT_EQ(parse_arms("transfer,none,transfer"), (std::vector<Arm>{Arm::none, Arm::transfer}));
  for (Arm a : kAllArms) EXPECT_EQ(parse_arm(arm_name(a)), a);
  EXPECT_TRUE(oracle::throws_code([] { parse_arm("mixup"); }, Errc::invalid_config));
  EXPECT_TRUE(uses_transfer(Arm::aug_transfer));
  EXPECT_FALSE(uses_augmentation(Arm::transfer));
}

TEST(Config, Validation) {
  auto bad = [](auto mutate) {
    auto c = small_config();
    mutate(c);
    return oracle::throws_code([&] { c.validate(); }, Errc::invalid_config);
  };
  EXPECT_TRUE(bad([](ExperimentConfig& c) { c.replicates = 0; }));
  EXPECT_TRUE(bad([](ExperimentConfig& c) { c.arms.clear(); }));
  EXPECT_TRUE(bad([](ExperimentConfig& c) { c.k_values = {1, 2}; }));
  EXPECT_TRUE(bad([](ExperimentConfig& c) { c.factor_bins = 1; }));
  EXPECT_TRUE(bad([](ExperimentConfig& c) { c.train.batch_size = 0; }));
  EXPECT_NO_THROW(small_config().validate());
  const auto manifest = small_config().to_manifest();
  EXPECT_NE(manifest.find("fan_out=4"), std::string::npos);
}

TEST(Plan, OrderingAndPairedSeeds) {
  auto c = small_config();
  c.kind = ExperimentKind::vary_s_balanced;
  c.s_values = {3, 12};
  c.replicates = 3;
  const auto plan = plan_trials(c);
  ASSERT_EQ(plan.size(), 2u * 3u * 4u);
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::set<std::uint64_t>> seeds;
  for (const auto& t : plan) {
    EXPECT_EQ(t.k, 6u);
    seeds[{t.k, t.s, t.replicate}].insert(t.seed);
    EXPECT_EQ(t.seed, row_seed(c, t.k, t.s, t.replicate));
  }
  ASSERT_EQ(seeds.size(), 6u);
  std::set<std::uint64_t> distinct;
  for (const auto& [key, s] : seeds) {
    EXPECT_EQ(s.size(), 1u);
    distinct.insert(*s.begin());
  }
  EXPECT_EQ(distinct.size(), 6u);
  for (std::size_t i = 1; i < plan.size(); ++i) {
    EXPECT_LE(std::tie(plan[i - 1].k, plan[i - 1].s, plan[i - 1].replicate),
              std::tie(plan[i].k, plan[i].s, plan[i].replicate));
  }
  c.kind = ExperimentKind::imbalanced;
  c.trials = 7;
  c.arms = {Arm::none};
  EXPECT_EQ(plan_trials(c).size(), 7u);
}

TEST(TrialData, FanOutAddsVariantsPerOriginal) {
  auto c = small_config();
  c.kind = ExperimentKind::vary_k;
  c.fan_out = 16;
  const TrialSpec spec{ExperimentKind::vary_k, 3, 10, Arm::aug, 0, 99};
  const auto data = build_trial_data(c, resources(), catalog(), spec);
  std::map<std::uint64_t, std::size_t> per_parent;
  std::size_t originals = 0;
  for (const auto& r : data.dataset.records) {
    if (r.origin == Origin::original) {
      ++originals;
      EXPECT_EQ(r.parent_id, r.id);
    } else {
      ++per_parent[r.parent_id];
    }
  }
  EXPECT_EQ(originals, 30u);
  EXPECT_EQ(data.dataset.records.size(), 30u * 16u);
  for (const auto& [parent, n] : per_parent) EXPECT_EQ(n, 15u);
  EXPECT_TRUE(audit_provenance(data.dataset).empty());
  std::set<std::uint64_t> ids;
  for (const auto& r : data.dataset.records) EXPECT_TRUE(ids.insert(r.id).second);
}

TEST(TrialData, QuotaTopsUpEverySplit) {
  auto c = small_config();
  c.kind = ExperimentKind::vary_s_balanced;
  const TrialSpec spec{ExperimentKind::vary_s_balanced, 4, 12, Arm::aug_transfer, 0, 7};
  const auto data = build_trial_data(c, resources(), catalog(), spec);
  std::map<std::pair<std::int32_t, SplitTag>, std::size_t> counts;
  for (const auto& r : data.dataset.records) ++counts[{r.sample.label, r.split}];
  for (auto id : data.draw.sonotypes) {
    EXPECT_EQ((counts[{id, SplitTag::train}]), 20u);
    EXPECT_EQ((counts[{id, SplitTag::val}]), 5u);
    EXPECT_EQ((counts[{id, SplitTag::test}]), 5u);
  }
  EXPECT_TRUE(audit_provenance(data.dataset).empty());
  const TrialSpec plain{ExperimentKind::vary_s_balanced, 4, 12, Arm::transfer, 0, 7};
  EXPECT_EQ(build_trial_data(c, resources(), catalog(), plain).dataset.records.size(), 48u);
}

TEST(TrialData, ArmsShareDrawAndSplit) {
  auto c = small_config();
  const TrialSpec a{ExperimentKind::vary_s_balanced, 3, 9, Arm::none, 2, 1234};
  TrialSpec b = a;
  b.arm = Arm::aug;
  const auto da = build_trial_data(c, resources(), catalog(), a);
  const auto db = build_trial_data(c, resources(), catalog(), b);
  EXPECT_EQ(da.draw.sonotypes, db.draw.sonotypes);
  for (const auto& r : da.dataset.records) {
    const auto it = std::find_if(db.dataset.records.begin(), db.dataset.records.end(),
                                 [&](const SampleRecord& x) { return x.id == r.id; });
    ASSERT_NE(it, db.dataset.records.end());
    EXPECT_EQ(*it, r);
  }
}

TEST(NoLeakage, RandomBuildsKeepVariantsInParentSplit) {
  auto c = small_config();
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const bool fan = t % 2 == 0;
    const TrialSpec spec{fan ? ExperimentKind::vary_k : ExperimentKind::vary_s_balanced, 2 + rng() % 4,
                         3 + rng() % 20, Arm::aug, 0, rng()};
    const auto data = build_trial_data(c, resources(), catalog(), spec);
    EXPECT_TRUE(audit_provenance(data.dataset).empty());
  }
}

TEST(Batches, ClassOrderAndUnknownLabel) {
  const auto data = build_trial_data(small_config(), resources(), catalog(),
                                     {ExperimentKind::vary_s_balanced, 3, 6, Arm::none, 0, 4});
  const auto b = split_batches(data.dataset, data.draw.sonotypes);
  EXPECT_EQ(b.classes, data.draw.sonotypes);
  EXPECT_EQ(b.train.size + b.val.size + b.test.size, data.dataset.records.size());
  std::vector<std::int32_t> missing = {data.draw.sonotypes[0]};
  EXPECT_TRUE(oracle::throws_code([&] { split_batches(data.dataset, missing); }, Errc::shape_mismatch));
}

TEST(RunTrial, UntrainedBinaryClassifierIsNearChance) {
  auto c = small_config();
  c.skip_training = true;
  c.arms = {Arm::none};
  c.kind = ExperimentKind::vary_k;
  double total = 0.0;
  constexpr int kReps = 50;
  for (int r = 0; r < kReps; ++r) {
    const TrialSpec spec{ExperimentKind::vary_k, 2, 40, Arm::none, static_cast<std::size_t>(r),
                         row_seed(c, 2, 40, static_cast<std::size_t>(r))};
    total += run_trial(c, resources(), catalog(), spec).metrics.accuracy;
  }
  EXPECT_NEAR(total / kReps, 0.5, 0.1);
}

TEST(RunTrial, RowReproducibleFromSeed) {
  auto c = small_config();
  for (Arm arm : kAllArms) {
    const TrialSpec spec{ExperimentKind::vary_s_balanced, 3, 9, arm, 1, row_seed(c, 3, 9, 1)};
    const auto a = run_trial(c, resources(), catalog(), spec);
    const auto b = run_trial(c, resources(), catalog(), spec);
    EXPECT_EQ(rows_csv({a}), rows_csv({b})) << arm_name(arm);
    EXPECT_EQ(a.metrics.accuracy, b.metrics.accuracy);
  }
}

TEST(RunTrial, ParallelMatchesSerial) {
  auto c = small_config();
  c.kind = ExperimentKind::vary_s_balanced;
  c.s_values = {6};
  c.replicates = 2;
  c.arms = {Arm::none, Arm::aug};
  const auto plan = plan_trials(c);
  const auto serial = run_trials(c, resources(), catalog(), plan);
  c.jobs = 3;
  EXPECT_EQ(rows_csv(run_trials(c, resources(), catalog(), plan)), rows_csv(serial));
}

TEST(Transfer, FrozenBackboneRequiresResources) {
  auto c = small_config();
  const ExperimentResources empty;
  const TrialSpec spec{ExperimentKind::vary_s_balanced, 2, 6, Arm::transfer, 0, 1};
  EXPECT_TRUE(oracle::throws_code([&] { run_trial(c, empty, catalog(), spec); }, Errc::invalid_config));
  EXPECT_FALSE(resources().backbone.empty());
  for (const auto& [name, t] : resources().backbone) EXPECT_TRUE(nn::is_backbone(name));
}

TEST(Fits, OneLinePerArmOnS) {
  auto c = small_config();
  c.skip_training = true;
  c.s_values = {3, 6, 12};
  c.arms = {Arm::none, Arm::aug};
  const auto result = run_experiment2(c, resources(), catalog());
  EXPECT_EQ(result.rows.size(), 6u);
  ASSERT_EQ(result.fits.size(), 2u);
  EXPECT_EQ(result.fits[0].x, "s");
  EXPECT_EQ(result.fits[0].fit.n, 3u);
  const auto csv = fits_csv(result.fits);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "arm,x,n,slope,intercept,slope_stderr,ci_low,ci_high,r_squared");
}

TEST(Fits, UndeterminedFitsAreSkipped) {
  auto c = small_config();
  c.skip_training = true;
  c.s_values = {3, 6};
  c.arms = {Arm::none};
  const auto two = run_experiment2(c, resources(), catalog());
  EXPECT_EQ(two.rows.size(), 2u);
  EXPECT_TRUE(two.fits.empty());
  c.s_values = {5};
  c.replicates = 3;
  const auto flat = run_experiment2(c, resources(), catalog());
  EXPECT_EQ(flat.rows.size(), 3u);
  EXPECT_TRUE(fit_accuracy(flat.rows, "s").empty());
}

TEST(Factors, AnovaOverIdenticalGroupsIsZero) {
  std::vector<FactorObservation> obs;
  const std::vector<double> accs = {0.2, 0.5, 0.9};
  for (const char* taxon : {"bird", "mammal", "amphibian"}) {
    for (std::size_t i = 0; i < accs.size(); ++i) {
      FactorObservation o;
      o.taxon = taxon;
      o.accuracy = accs[i];
      o.stats.low_hz = 100.0 * static_cast<double>(i);
      obs.push_back(o);
    }
  }
  const auto table = factor_anova(obs, 3);
  ASSERT_FALSE(table.empty());
  EXPECT_EQ(table[0].factor, "taxon");
  EXPECT_EQ(table[0].groups, 3u);
  EXPECT_EQ(table[0].result.f, 0.0);
  const auto csv = anova_csv(table);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "factor,F,df1,df2,p");
}

TEST(Csv, RowColumns) {
  TrialRow row;
  row.spec = {ExperimentKind::vary_k, 2, 49, Arm::aug, 0, 42};
  row.sonotypes = {3, 8};
  const auto csv = rows_csv({row});
  const auto header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header,
            "experiment,k,s,arm,panel,replicate,seed,mean_size,min_size,train_count,stopped_epoch,best_epoch,"
            "accuracy,map,cmap,auc,recall,specificity,precision,f1,sonotypes");
  const auto line = csv.substr(header.size() + 1);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::count(header.begin(), header.end(), ','));
  EXPECT_NE(line.find(",B,"), std::string::npos);
  EXPECT_NE(line.find("3;8"), std::string::npos);
}
