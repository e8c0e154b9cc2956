#include "run_config.hpp"

#include <set>
#include <sstream>

#include <json.hpp>

#include "sonotype/error.hpp"
#include "sonotype/ingest.hpp"

namespace sonotype::cli {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  fail(Errc::invalid_config, path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) config_error(path, "expected an object");
  const std::set<std::string_view> keys(allowed);
  for (const auto& [key, value] : obj.items()) {
    if (!keys.count(key)) config_error(path, "unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  const std::string where = path + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) config_error(where, "expected a boolean");
    out = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned())) {
      config_error(where, "expected a non-negative integer");
    }
    out = v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) config_error(where, "expected a number");
    out = v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) config_error(where, "expected a string");
    out = v.get<std::string>();
  } else {
    if (!v.is_array()) config_error(where, "expected an array");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) config_error(where, "expected non-negative integers");
      out.push_back(e.get<typename T::value_type>());
    }
  }
}

void read_train(const json& obj, const std::string& path, nn::TrainConfig& t) {
  check_keys(obj, path, {"learning_rate", "batch_size", "max_epochs", "patience", "optimizer", "beta1", "beta2",
                         "epsilon"});
  read(obj, path, "learning_rate", t.learning_rate);
  read(obj, path, "batch_size", t.batch_size);
  read(obj, path, "max_epochs", t.max_epochs);
  read(obj, path, "patience", t.patience);
  read(obj, path, "beta1", t.beta1);
  read(obj, path, "beta2", t.beta2);
  read(obj, path, "epsilon", t.epsilon);
  std::string opt;
  read(obj, path, "optimizer", opt);
  if (opt == "adam") t.optimizer = nn::Optimizer::adam;
  else if (opt == "sgd") t.optimizer = nn::Optimizer::sgd;
  else if (!opt.empty()) config_error(path + ".optimizer", "expected 'adam' or 'sgd'");
}

void read_snr(const json& obj, const std::string& path, RenderOptions& r) {
  if (!obj.contains("snr_db")) return;
  const json& v = obj.at("snr_db");
  if (v.is_null()) r.snr_db.reset();
  else if (v.is_number()) r.snr_db = v.get<double>();
  else config_error(path + ".snr_db", "expected a number or null");
}

void read_network(const json& obj, const std::string& path, nn::NetworkConfig& n) {
  check_keys(obj, path, {"image_side", "conv_filters", "dense_sizes", "dropout_rate"});
  read(obj, path, "image_side", n.image_side);
  read(obj, path, "conv_filters", n.conv_filters);
  if (obj.contains("dense_sizes")) {
    std::vector<std::size_t> d;
    read(obj, path, "dense_sizes", d);
    if (d.size() != 2) config_error(path + ".dense_sizes", "expected two sizes");
    n.dense_sizes = {d[0], d[1]};
  }
  read(obj, path, "dropout_rate", n.dropout_rate);
}

void read_benchmark(const json& obj, const std::string& path, BenchmarkConfig& b, std::uint64_t& seed) {
  check_keys(obj, path, {"seed", "num_sonotypes", "samples_per", "long_tail", "long_tail_max", "long_tail_min",
                         "long_tail_exponent", "families", "band_low_hz", "band_high_hz", "freq_jitter",
                         "duration_jitter", "amplitude_jitter_db", "snr_db", "annotation_jitter", "lead_min_s",
                         "lead_max_s", "tail_s", "interference_prob", "interference_snr_db", "templates"});
  read(obj, path, "seed", seed);
  read(obj, path, "num_sonotypes", b.num_sonotypes);
  read(obj, path, "samples_per", b.samples_per);
  read(obj, path, "long_tail", b.long_tail);
  read(obj, path, "long_tail_max", b.long_tail_max);
  read(obj, path, "long_tail_min", b.long_tail_min);
  read(obj, path, "long_tail_exponent", b.long_tail_exponent);
  read(obj, path, "band_low_hz", b.band_low_hz);
  read(obj, path, "band_high_hz", b.band_high_hz);
  read(obj, path, "freq_jitter", b.freq_jitter);
  read(obj, path, "duration_jitter", b.duration_jitter);
  read(obj, path, "amplitude_jitter_db", b.amplitude_jitter_db);
  read(obj, path, "annotation_jitter", b.render.annotation_jitter);
  read(obj, path, "lead_min_s", b.render.lead_min_s);
  read(obj, path, "lead_max_s", b.render.lead_max_s);
  read(obj, path, "tail_s", b.render.tail_s);
  read(obj, path, "interference_prob", b.render.interference_prob);
  read(obj, path, "interference_snr_db", b.render.interference_snr_db);
  read_snr(obj, path, b.render);
  if (obj.contains("families")) {
    const json& f = obj.at("families");
    if (!f.is_array() || f.empty()) config_error(path + ".families", "expected a non-empty array of names");
    b.families.clear();
    for (const auto& e : f) {
      if (!e.is_string()) config_error(path + ".families", "expected family names");
      try {
        b.families.push_back(parse_family(e.get<std::string>()));
      } catch (const Error& err) {
        config_error(path + ".families", err.what());
      }
    }
  }
  if (obj.contains("templates")) {
    std::string file;
    read(obj, path, "templates", file);
    b.templates = parse_templates(read_text_file(file));
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(Errc::invalid_config, std::string("config is not valid JSON: ") + e.what());
  }
  const std::string path = "config";
  check_keys(root, path, {"experiment", "k_values", "s_values", "k_fixed", "trials", "replicates", "arms", "seed",
                          "min_samples", "fan_out", "quota", "factor_bins", "noise_seed", "skip_training", "jobs",
                          "network", "train", "pretext", "pretext_train", "benchmark", "catalog"});
  RunConfig rc;
  ExperimentConfig& c = rc.experiment;
  if (root.contains("experiment")) {
    std::string name;
    read(root, path, "experiment", name);
    try {
      c.kind = parse_experiment(name);
    } catch (const Error& e) {
      config_error(path + ".experiment", e.what());
    }
  }
  read(root, path, "k_values", c.k_values);
  read(root, path, "s_values", c.s_values);
  read(root, path, "k_fixed", c.k_fixed);
  read(root, path, "trials", c.trials);
  read(root, path, "replicates", c.replicates);
  read(root, path, "seed", c.seed);
  read(root, path, "min_samples", c.min_samples);
  read(root, path, "fan_out", c.fan_out);
  read(root, path, "factor_bins", c.factor_bins);
  read(root, path, "noise_seed", c.noise_seed);
  read(root, path, "skip_training", c.skip_training);
  read(root, path, "jobs", c.jobs);
  if (root.contains("arms")) {
    const json& a = root.at("arms");
    std::string list;
    if (a.is_string()) {
      list = a.get<std::string>();
    } else if (a.is_array()) {
      for (const auto& e : a) {
        if (!e.is_string()) config_error(path + ".arms", "expected arm names");
        if (!list.empty()) list += ',';
        list += e.get<std::string>();
      }
    } else {
      config_error(path + ".arms", "expected a string or an array");
    }
    try {
      c.arms = parse_arms(list);
    } catch (const Error& e) {
      config_error(path + ".arms", e.what());
    }
  }
  if (root.contains("quota")) {
    const json& q = root.at("quota");
    check_keys(q, path + ".quota", {"train", "val", "test"});
    read(q, path + ".quota", "train", c.quota.train);
    read(q, path + ".quota", "val", c.quota.val);
    read(q, path + ".quota", "test", c.quota.test);
  }
  if (root.contains("network")) read_network(root.at("network"), path + ".network", c.network);
  if (root.contains("train")) read_train(root.at("train"), path + ".train", c.train);
  if (root.contains("pretext_train")) read_train(root.at("pretext_train"), path + ".pretext_train", c.pretext_train);
  if (root.contains("pretext")) {
    const json& p = root.at("pretext");
    check_keys(p, path + ".pretext", {"num_classes", "per_class", "snr_db", "annotation_jitter"});
    read(p, path + ".pretext", "num_classes", c.pretext.num_classes);
    read(p, path + ".pretext", "per_class", c.pretext.per_class);
    read(p, path + ".pretext", "annotation_jitter", c.pretext.render.annotation_jitter);
    read_snr(p, path + ".pretext", c.pretext.render);
  }
  if (root.contains("benchmark")) read_benchmark(root.at("benchmark"), path + ".benchmark", rc.benchmark, rc.benchmark_seed);
  if (root.contains("catalog")) {
    std::string file;
    read(root, path, "catalog", file);
    rc.catalog_path = file;
  }
  rc.benchmark.image_side = c.network.image_side;
  c.pretext.image_side = c.network.image_side;
  c.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    fail(Errc::invalid_config, "cannot read config '" + path + "': " + e.what());
  }
  return parse_run_config(text);
}

std::string benchmark_manifest(const BenchmarkConfig& b, std::uint64_t seed) {
  std::ostringstream os;
  os.precision(17);
  os << "benchmark.seed=" << seed << "\nbenchmark.num_sonotypes=" << b.num_sonotypes
     << "\nbenchmark.samples_per=" << b.samples_per << "\nbenchmark.long_tail=" << (b.long_tail ? 1 : 0)
     << "\nbenchmark.long_tail_max=" << b.long_tail_max << "\nbenchmark.long_tail_min=" << b.long_tail_min
     << "\nbenchmark.long_tail_exponent=" << b.long_tail_exponent << "\nbenchmark.image_side=" << b.image_side
     << "\nbenchmark.families=";
  for (std::size_t i = 0; i < b.families.size(); ++i) os << (i ? "," : "") << family_name(b.families[i]);
  os << "\nbenchmark.band_low_hz=" << b.band_low_hz << "\nbenchmark.band_high_hz=" << b.band_high_hz
     << "\nbenchmark.freq_jitter=" << b.freq_jitter << "\nbenchmark.duration_jitter=" << b.duration_jitter
     << "\nbenchmark.amplitude_jitter_db=" << b.amplitude_jitter_db << "\nbenchmark.snr_db=";
  if (b.render.snr_db) os << *b.render.snr_db;
  else os << "none";
  os << "\nbenchmark.annotation_jitter=" << b.render.annotation_jitter
     << "\nbenchmark.interference_prob=" << b.render.interference_prob
     << "\nbenchmark.interference_snr_db=" << b.render.interference_snr_db << "\nbenchmark.templates="
     << (b.templates.empty() ? "drawn" : "supplied") << '\n';
  return os.str();
}

}  // namespace sonotype::cli
