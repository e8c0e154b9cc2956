#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "sonotype/error.hpp"
#include "sonotype/experiment.hpp"
#include "sonotype/random.hpp"

namespace fs = std::filesystem;
using namespace sonotype;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string arms;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> jobs;

  std::string wav;
  std::string annotations;
  std::string catalog;
  std::string dataset;
  std::string checkpoint;
  double gap_s = 2.0;
  std::size_t side = kImageSide;
  std::size_t k = 6;
  std::size_t s = 0;
  std::size_t min_samples = 3;
  std::size_t fan_out = 0;
  std::vector<std::size_t> quota = {200, 25, 25};
  std::uint64_t noise_seed = 7;
  std::size_t wav_count = 0;
  bool transfer = false;
  std::string split = "test";
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::io_error, "cannot create '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

cli::RunConfig run_config(const Options& o) {
  cli::RunConfig rc = o.config.empty() ? cli::parse_run_config("{}") : cli::load_run_config(o.config);
  auto& c = rc.experiment;
  if (o.seed) c.seed = *o.seed;
  if (!o.arms.empty()) {
    try {
      c.arms = parse_arms(o.arms);
    } catch (const Error& e) {
      fail(Errc::invalid_config, std::string("--arms: ") + e.what());
    }
  }
  if (o.replicates) c.replicates = *o.replicates;
  if (o.jobs) c.jobs = *o.jobs;
  c.validate();
  return rc;
}

SonotypeCatalog load_catalog(const std::string& path) { return SonotypeCatalog::from_container(read_container_file(path)); }

SonotypeCatalog experiment_catalog(const cli::RunConfig& rc, const std::string& override_path) {
  const std::string path = !override_path.empty() ? override_path : rc.catalog_path.value_or("");
  if (!path.empty()) return load_catalog(path);
  return make_benchmark(rc.benchmark, rc.benchmark_seed);
}

void write_manifest(const std::string& dir, const std::string& command, const cli::RunConfig& rc,
                    const std::string& catalog_source) {
  std::string text = "command=" + command + "\n" + rc.experiment.to_manifest();
  text += "catalog=" + catalog_source + "\n";
  if (catalog_source == "synthetic") text += cli::benchmark_manifest(rc.benchmark, rc.benchmark_seed);
  write_text_file(join(dir, "manifest.txt"), text);
}

int cmd_synth(const Options& o) {
  auto rc = run_config(o);
  if (o.seed) rc.benchmark_seed = *o.seed;
  if (rc.benchmark.templates.empty()) rc.benchmark.templates = draw_templates(rc.benchmark, rc.benchmark_seed);
  ensure_dir(o.out);
  const auto catalog = make_benchmark(rc.benchmark, rc.benchmark_seed);
  write_container_file(join(o.out, "catalog.sntp"), catalog.to_container());
  write_text_file(join(o.out, "templates.txt"), format_templates(rc.benchmark.templates));
  write_text_file(join(o.out, "manifest.txt"), "command=synth\n" + cli::benchmark_manifest(rc.benchmark, rc.benchmark_seed));
  for (std::size_t i = 0; i < o.wav_count; ++i) {
    const auto& t = rc.benchmark.templates[i % rc.benchmark.templates.size()];
    auto r = render(t, derive_seed(rc.benchmark_seed, {0x776176, i}), rc.benchmark.render);
    const std::string stem = "recording_" + std::to_string(i);
    write_binary_file(join(o.out, stem + ".wav"), serialize_wav(r.audio));
    std::vector<AnnotatedClip> clips;
    if (r.clip) {
      r.clip->sonotype_id = static_cast<std::int32_t>(i % rc.benchmark.templates.size()) + 1;
      clips.push_back(*r.clip);
    }
    write_text_file(join(o.out, stem + ".csv"), format_annotations(clips));
  }
  std::printf("catalog: %zu sonotypes, %zu samples\n", catalog.size(), catalog.samples().size());
  return 0;
}

int cmd_ingest(const Options& o) {
  const auto audio = parse_wav(read_binary_file(o.wav));
  const auto clips = merge_adjacent(parse_annotations(read_text_file(o.annotations), audio.sample_rate_hz), o.gap_s);
  const auto spec = spectrogram(audio);
  std::vector<CatalogSample> samples;
  EncodeOptions eo;
  eo.side = o.side;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    auto enc = encode_sample(spec, clips[i], eo);
    samples.push_back({std::move(enc), clips[i], static_cast<std::uint64_t>(i + 1)});
  }
  ensure_dir(o.out);
  write_text_file(join(o.out, "clips.csv"), format_annotations(clips));
  const SonotypeCatalog catalog(std::move(samples));
  write_container_file(join(o.out, "catalog.sntp"), catalog.to_container());
  std::printf("clips: %zu, sonotypes: %zu, spectrogram %zux%zu\n", clips.size(), catalog.size(), spec.height(),
              spec.width());
  return 0;
}

int cmd_spectro(const Options& o) {
  const auto audio = parse_wav(read_binary_file(o.wav));
  const auto spec = spectrogram(audio);
  Container c;
  c.put_scalar<std::uint32_t>("schema_version", kSchemaVersion);
  c.put_tensor<float>("spectro/power", {spec.height(), spec.width()},
                      std::span<const float>(spec.grid.data(), static_cast<std::size_t>(spec.grid.size())));
  c.put_tensor<double>("spectro/freq_hz", {spec.freq_axis_hz.size()}, spec.freq_axis_hz);
  c.put_tensor<double>("spectro/time_s", {spec.time_axis_s.size()}, spec.time_axis_s);
  const fs::path out(o.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path().string());
  write_container_file(out, c);
  std::printf("frames: %zu, bins: %zu\n", spec.width(), spec.height());
  return 0;
}

int cmd_dataset(const Options& o) {
  const auto catalog = load_catalog(o.catalog);
  const std::uint64_t seed = o.seed.value_or(0);
  ExperimentDraw draw;
  if (o.s == 0) {
    draw = select_imbalanced(catalog, o.k, derive_seed(seed, {1}), o.min_samples).draw;
  } else {
    draw = select_balanced(catalog, o.k, o.s, derive_seed(seed, {1}));
  }
  const auto ds = build_split_dataset(catalog, draw, derive_seed(seed, {2}));
  write_binary_file(o.out, write_dataset(ds));
  std::printf("records: %zu\n", ds.records.size());
  return 0;
}

int cmd_augment(const Options& o) {
  const auto ds = read_dataset(read_binary_file(o.dataset));
  if (o.quota.size() != 3) fail(Errc::invalid_config, "--quota takes three counts");
  const SplitQuota quota{o.quota[0], o.quota[1], o.quota[2]};
  std::optional<std::size_t> fan;
  if (o.fan_out > 0) fan = o.fan_out;
  const auto bank = make_noise_bank(ds.image_height, o.noise_seed);
  const auto out = augment_dataset(ds, fan, quota, o.seed.value_or(0), bank);
  const auto violations = audit_provenance(out);
  if (!violations.empty()) fail(Errc::invalid_argument, "provenance audit failed: " + violations.front().reason);
  write_binary_file(o.out, write_dataset(out));
  std::printf("records: %zu\n", out.records.size());
  return 0;
}

int cmd_train(const Options& o) {
  auto rc = run_config(o);
  const auto ds = read_dataset(read_binary_file(o.dataset));
  const auto batches = split_batches(ds);
  nn::NetworkConfig nc = rc.experiment.network;
  nc.image_side = ds.image_height;
  nc.num_classes = batches.classes.size();
  nc.freeze_backbone = o.transfer;
  nn::Network<float> net(nc);
  const std::uint64_t seed = rc.experiment.seed;
  net.initialize(derive_seed(seed, {4}));
  if (o.transfer) {
    auto ec = rc.experiment;
    ec.network.image_side = nc.image_side;
    ec.arms = {Arm::transfer};
    net.load_backbone(prepare_resources(ec).backbone);
  }
  nn::TrainConfig tc = rc.experiment.train;
  tc.seed = derive_seed(seed, {5});
  const auto result = nn::train(net, batches.train, batches.val, tc);
  ensure_dir(o.out);
  Container c = nn::checkpoint_to_container(result.best);
  c.put_tensor<std::int32_t>("model/classes", {batches.classes.size()}, batches.classes);
  write_container_file(join(o.out, "checkpoint.sntp"), c);
  std::string hist = "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& h : result.history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", h.epoch, h.train_loss, h.val_loss);
    hist += buf;
  }
  write_text_file(join(o.out, "history.csv"), hist);
  std::printf("stopped at epoch %zu, best epoch %zu (val loss %.6f)\n", result.stopped_epoch, result.best.epoch,
              result.best.best_val_loss);
  return 0;
}

int cmd_eval(const Options& o) {
  const auto ds = read_dataset(read_binary_file(o.dataset));
  const auto container = read_container_file(o.checkpoint);
  const auto ckpt = nn::checkpoint_from_container<float>(container);
  const auto classes = container.get<std::int32_t>("model/classes");
  nn::Network<float> net(ckpt.config);
  net.parameters() = ckpt.params;
  const auto batches = split_batches(ds, classes);
  const nn::Batch<float>* batch = nullptr;
  if (o.split == "train") batch = &batches.train;
  else if (o.split == "val") batch = &batches.val;
  else if (o.split == "test") batch = &batches.test;
  else fail(Errc::invalid_config, "--split must be train, val or test");
  const auto report = evaluate(score_batch(net, *batch));
  ensure_dir(o.out);
  write_text_file(join(o.out, "metrics.txt"), report.to_text());
  write_text_file(join(o.out, "per_class.csv"), report.per_class_csv());
  std::cout << report.to_text();
  return 0;
}

int cmd_experiment(const Options& o, ExperimentKind kind) {
  auto rc = run_config(o);
  rc.experiment.kind = kind;
  rc.experiment.validate();
  const std::string source = !o.catalog.empty() ? o.catalog : rc.catalog_path.value_or("synthetic");
  const auto catalog = experiment_catalog(rc, o.catalog);
  const auto resources = prepare_resources(rc.experiment);
  ensure_dir(o.out);
  write_manifest(o.out, std::string(experiment_name(kind)), rc, source);
  if (kind == ExperimentKind::factors) {
    const auto result = run_factors(rc.experiment, resources, catalog);
    write_text_file(join(o.out, "rows.csv"), rows_csv(result.rows));
    write_text_file(join(o.out, "observations.csv"), observations_csv(result.observations));
    write_text_file(join(o.out, "anova.csv"), anova_csv(result.table));
    std::cout << anova_csv(result.table);
    return 0;
  }
  ExperimentResult result;
  if (kind == ExperimentKind::vary_k) result = run_experiment1(rc.experiment, resources, catalog);
  else if (kind == ExperimentKind::vary_s_balanced) result = run_experiment2(rc.experiment, resources, catalog);
  else result = run_experiment3(rc.experiment, resources, catalog);
  write_text_file(join(o.out, "rows.csv"), rows_csv(result.rows));
  if (!result.fits.empty()) {
    write_text_file(join(o.out, "fits.csv"), fits_csv(result.fits));
    std::cout << fits_csv(result.fits);
  }
  std::printf("rows: %zu\n", result.rows.size());
  return 0;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::invalid_config:
    case Errc::invalid_argument:
      return kExitConfig;
    default:
      return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sonotype classification pipeline"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--seed", o.seed, "Base seed");
  };
  auto add_experiment = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--arms", o.arms, "Comma-separated arms or 'all'");
    sub->add_option("--replicates", o.replicates, "Replicates per cell");
    sub->add_option("--jobs", o.jobs, "Worker threads");
    sub->add_option("--catalog", o.catalog, "Catalog container (default: synthetic benchmark)");
  };

  auto* synth = app.add_subcommand("synth", "Render a synthetic benchmark catalog");
  add_common(synth);
  synth->add_option("--out", o.out, "Output directory");
  synth->add_option("--wav-count", o.wav_count, "Also write this many example recordings with annotations");

  auto* ingest = app.add_subcommand("ingest", "Encode annotated clips of a recording into a catalog");
  ingest->add_option("--wav", o.wav, "16-bit mono WAV")->required();
  ingest->add_option("--annotations", o.annotations, "Annotation CSV")->required();
  ingest->add_option("--out", o.out, "Output directory");
  ingest->add_option("--gap", o.gap_s, "Merge same-sonotype clips closer than this (s)");
  ingest->add_option("--side", o.side, "Encoded image side");

  auto* spectro = app.add_subcommand("spectro", "Write the power spectrogram of a recording");
  spectro->add_option("--wav", o.wav, "16-bit mono WAV")->required();
  spectro->add_option("--out", o.out, "Output container")->required();

  auto* dataset = app.add_subcommand("dataset", "Draw sonotypes from a catalog and split them");
  dataset->add_option("--catalog", o.catalog, "Catalog container")->required();
  dataset->add_option("--k", o.k, "Number of sonotypes");
  dataset->add_option("--s", o.s, "Samples per sonotype (0 keeps every sample)");
  dataset->add_option("--min-samples", o.min_samples, "Eligibility threshold for --s 0");
  dataset->add_option("--seed", o.seed, "Seed");
  dataset->add_option("--out", o.out, "Output dataset container")->required();

  auto* augment = app.add_subcommand("augment", "Add augmented variants to a split dataset");
  augment->add_option("--dataset", o.dataset, "Dataset container")->required();
  augment->add_option("--fan-out", o.fan_out, "Variants per original, counting the original");
  augment->add_option("--quota", o.quota, "Per-sonotype train,val,test quota")->delimiter(',')->expected(3);
  augment->add_option("--noise-seed", o.noise_seed, "Seed of the synthetic noise bank");
  augment->add_option("--seed", o.seed, "Seed");
  augment->add_option("--out", o.out, "Output dataset container")->required();

  auto* train = app.add_subcommand("train", "Train a classifier on a split dataset");
  add_common(train);
  train->add_option("--dataset", o.dataset, "Dataset container")->required();
  train->add_option("--out", o.out, "Output directory");
  train->add_flag("--transfer", o.transfer, "Freeze a backbone pretrained on the pretext corpus");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on one split");
  eval->add_option("--dataset", o.dataset, "Dataset container")->required();
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint container")->required();
  eval->add_option("--split", o.split, "train, val or test");
  eval->add_option("--out", o.out, "Output directory");

  auto* exp1 = app.add_subcommand("exp1", "Accuracy versus number of sonotypes");
  add_experiment(exp1);
  auto* exp2 = app.add_subcommand("exp2", "Accuracy versus balanced sample size");
  add_experiment(exp2);
  auto* exp3 = app.add_subcommand("exp3", "Accuracy versus imbalanced sample size");
  add_experiment(exp3);
  auto* factors = app.add_subcommand("factors", "ANOVA of per-sonotype accuracy on sonotype properties");
  add_experiment(factors);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*ingest) return cmd_ingest(o);
    if (*spectro) return cmd_spectro(o);
    if (*dataset) return cmd_dataset(o);
    if (*augment) return cmd_augment(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*exp1) return cmd_experiment(o, ExperimentKind::vary_k);
    if (*exp2) return cmd_experiment(o, ExperimentKind::vary_s_balanced);
    if (*exp3) return cmd_experiment(o, ExperimentKind::imbalanced);
    if (*factors) return cmd_experiment(o, ExperimentKind::factors);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}
