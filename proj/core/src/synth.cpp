#include "sonotype/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sonotype/error.hpp"
#include "sonotype/random.hpp"
#include "sonotype/spectro.hpp"

namespace sonotype {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEnvelopeTaper = 0.2;
constexpr std::size_t kBandComponents = 48;

double bin_width(std::uint32_t sample_rate_hz) { return static_cast<double>(sample_rate_hz) / kWindowSize; }

double log_uniform(Rng& rng, double lo, double hi) { return std::exp(uniform(rng, std::log(lo), std::log(hi))); }

}  // namespace

std::string_view family_name(Family f) noexcept {
  switch (f) {
    case Family::chirp: return "chirp";
    case Family::harmonic: return "harmonic";
    case Family::pulse_train: return "pulse_train";
    case Family::noise_band: return "noise_band";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyCount; ++i) {
    if (family_name(static_cast<Family>(i)) == name) return static_cast<Family>(i);
  }
  fail(Errc::invalid_argument, "unknown family '" + std::string(name) + "'");
}

Taxon family_taxon(Family f) noexcept {
  switch (f) {
    case Family::chirp: return Taxon::bird;
    case Family::harmonic: return Taxon::mammal;
    case Family::pulse_train: return Taxon::amphibian;
    case Family::noise_band: return Taxon::invertebrate;
  }
  return Taxon::unknown;
}

void SonotypeTemplate::validate(std::uint32_t sample_rate_hz) const {
  const double nyquist = sample_rate_hz / 2.0;
  for (double f : {f_start_hz, f_end_hz}) {
    if (!(f > 0.0 && f < nyquist)) {
      fail(Errc::invalid_argument, "template frequency " + std::to_string(f) + " Hz outside (0, nyquist)");
    }
  }
  if (!(duration_s > 0.0)) fail(Errc::invalid_argument, "template duration must be positive");
  if (!(amplitude >= 0.0)) fail(Errc::invalid_argument, "template amplitude must be non-negative");
  if (family == Family::harmonic && harmonics == 0) fail(Errc::invalid_argument, "harmonic stack needs >= 1 harmonic");
  if (family == Family::pulse_train && !(pulse_rate_hz > 0.0)) fail(Errc::invalid_argument, "pulse rate must be positive");
  if (freq_jitter < 0.0 || freq_jitter >= 1.0 || duration_jitter < 0.0 || duration_jitter >= 1.0 ||
      amplitude_jitter_db < 0.0) {
    fail(Errc::invalid_argument, "jitter parameters out of range");
  }
}

std::vector<float> pink_noise(std::size_t n, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr std::size_t kWarmup = 4096;
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n + kWarmup; ++i) {
    const double w = gauss(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    const double pink = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
    if (i >= kWarmup) raw[i - kWarmup] = pink;
  }
  double mean = 0.0, var = 0.0;
  for (double v : raw) mean += v;
  mean /= std::max<std::size_t>(n, 1);
  for (double v : raw) var += (v - mean) * (v - mean);
  const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n)) : 1.0;
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>((raw[i] - mean) / (sd > 0 ? sd : 1.0));
  return out;
}

namespace {

/// Audio-rate generator behind each standard noise-bank class.
std::vector<double> environmental_noise(const std::string& name, std::size_t n, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto pink = pink_noise(n, splitmix64(rng()));
  std::vector<double> x(n, 0.0);
  auto droplets = [&](double rate_hz, double gain) {
    const double p = rate_hz / kDefaultSampleRateHz;
    for (std::size_t i = 0; i < n; ++i) {
      if (uniform(rng, 0.0, 1.0) >= p) continue;
      const double f = uniform(rng, 2000.0, 12000.0);
      for (std::size_t j = 0; j < 220 && i + j < n; ++j) {
        x[i + j] += gain * std::exp(-static_cast<double>(j) / 40.0) * std::sin(kTwoPi * f * j / kDefaultSampleRateHz);
      }
    }
  };
  auto harmonic_drone = [&](double f0, std::size_t count, double gain) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (std::size_t h = 1; h <= count; ++h) v += std::sin(kTwoPi * f0 * h * i / kDefaultSampleRateHz) / std::sqrt(double(h));
      x[i] += gain * v;
    }
  };
  if (name == "rain_light" || name == "rain_medium" || name == "rain_heavy") {
    const double level = name == "rain_light" ? 0.02 : name == "rain_medium" ? 0.05 : 0.12;
    const double rate = name == "rain_light" ? 40.0 : name == "rain_medium" ? 200.0 : 1200.0;
    for (std::size_t i = 0; i < n; ++i) x[i] = level * gauss(rng);
    droplets(rate, 0.2);
  } else if (name == "thunder") {
    double brown = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      brown = 0.998 * brown + 0.05 * gauss(rng);
      const double t = static_cast<double>(i) / n;
      x[i] = brown * std::exp(-3.0 * t) * (1.0 - std::exp(-30.0 * t));
    }
  } else if (name == "aircraft") {
    harmonic_drone(85.0, 20, 0.03);
    for (std::size_t i = 0; i < n; ++i) x[i] += 0.05 * pink[i];
  } else if (name == "chainsaw") {
    harmonic_drone(130.0, 60, 0.02);
    for (std::size_t i = 0; i < n; ++i) x[i] *= 0.75 + 0.25 * std::sin(kTwoPi * 6.0 * i / kDefaultSampleRateHz);
  } else {
    double brown = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      brown = 0.99 * brown + 0.05 * gauss(rng);
      x[i] = brown;
    }
    harmonic_drone(42.0, 8, 0.02);
  }
  return x;
}

}  // namespace

Rendering render(const SonotypeTemplate& tmpl, std::uint64_t rng_seed, const RenderOptions& options) {
  tmpl.validate(options.sample_rate_hz);
  if (options.lead_min_s < 0.0 || options.lead_max_s < options.lead_min_s || options.tail_s < 0.0) {
    fail(Errc::invalid_argument, "render padding out of range");
  }
  if (!(options.interference_prob >= 0.0 && options.interference_prob <= 1.0)) {
    fail(Errc::invalid_argument, "interference_prob must lie in [0, 1]");
  }
  const double sr = options.sample_rate_hz;
  const double nyquist = sr / 2.0;
  const double bin = bin_width(options.sample_rate_hz);
  Rng rng(rng_seed);

  const double margin = 2.0 * bin;
  auto jitter_f = [&](double f) {
    return std::clamp(f * (1.0 + uniform(rng, -tmpl.freq_jitter, tmpl.freq_jitter)), margin, nyquist - margin);
  };
  const double f0 = jitter_f(tmpl.f_start_hz);
  const double f1 = jitter_f(tmpl.f_end_hz);
  const double duration = std::max(0.05, tmpl.duration_s * (1.0 + uniform(rng, -tmpl.duration_jitter, tmpl.duration_jitter)));
  const double amp = tmpl.amplitude * std::pow(10.0, uniform(rng, -tmpl.amplitude_jitter_db, tmpl.amplitude_jitter_db) / 20.0);
  const double lead = uniform(rng, options.lead_min_s, std::nextafter(options.lead_max_s, 1e300));

  const auto n0 = static_cast<std::size_t>(std::llround(lead * sr));
  const auto nc = static_cast<std::size_t>(std::llround(duration * sr));
  const auto total = n0 + nc + static_cast<std::size_t>(std::llround(options.tail_s * sr));

  Rendering out;
  out.audio.sample_rate_hz = options.sample_rate_hz;
  out.audio.samples.assign(total, 0.0f);
  out.call.assign(total, 0.0f);
  if (amp <= 0.0) return out;

  const double true_dur = static_cast<double>(nc) / sr;
  auto phase = [&](double t) { return kTwoPi * (f0 * t + (f1 - f0) * t * t / (2.0 * true_dur)); };
  double f_min = std::min(f0, f1), f_max = std::max(f0, f1);

  std::vector<double> wave(nc, 0.0);
  switch (tmpl.family) {
    case Family::chirp:
      for (std::size_t i = 0; i < nc; ++i) wave[i] = std::sin(phase(i / sr));
      break;
    case Family::harmonic: {
      std::size_t h_count = tmpl.harmonics;
      while (h_count > 1 && static_cast<double>(h_count) * f_max > nyquist - margin) --h_count;
      for (std::size_t i = 0; i < nc; ++i) {
        const double ph = phase(i / sr);
        double v = 0.0;
        for (std::size_t h = 1; h <= h_count; ++h) v += std::sin(static_cast<double>(h) * ph) / static_cast<double>(h);
        wave[i] = v;
      }
      f_max *= static_cast<double>(h_count);
      break;
    }
    case Family::pulse_train: {
      const double period = 1.0 / tmpl.pulse_rate_hz;
      const double on = period / 2.0;
      for (std::size_t i = 0; i < nc; ++i) {
        const double t = i / sr;
        const double local = std::fmod(t, period);
        const double gate = local < on ? 0.5 - 0.5 * std::cos(kTwoPi * local / on) : 0.0;
        wave[i] = gate * std::sin(phase(t));
      }
      break;
    }
    case Family::noise_band: {
      std::vector<double> freqs(kBandComponents), phases(kBandComponents);
      for (std::size_t k = 0; k < kBandComponents; ++k) {
        freqs[k] = uniform(rng, f_min, f_max);
        phases[k] = uniform(rng, 0.0, kTwoPi);
      }
      for (std::size_t i = 0; i < nc; ++i) {
        const double t = i / sr;
        double v = 0.0;
        for (std::size_t k = 0; k < kBandComponents; ++k) v += std::sin(kTwoPi * freqs[k] * t + phases[k]);
        wave[i] = v;
      }
      break;
    }
  }

  double power = 0.0;
  for (double v : wave) power += v * v;
  power /= static_cast<double>(std::max<std::size_t>(nc, 1));
  const double gain = power > 0.0 ? amp / std::sqrt(2.0 * power) : 0.0;
  const auto envelope = tukey_window(nc, kEnvelopeTaper, WindowSymmetry::symmetric);
  double call_power = 0.0;
  for (std::size_t i = 0; i < nc; ++i) {
    const double v = wave[i] * gain * envelope[i];
    out.call[n0 + i] = static_cast<float>(v);
    call_power += v * v;
  }
  call_power /= static_cast<double>(std::max<std::size_t>(nc, 1));

  std::copy(out.call.begin(), out.call.end(), out.audio.samples.begin());
  if (options.snr_db) {
    const double noise_sd = std::sqrt(call_power / std::pow(10.0, *options.snr_db / 10.0));
    const auto noise = pink_noise(total, splitmix64(rng()));
    for (std::size_t i = 0; i < total; ++i) {
      out.audio.samples[i] = static_cast<float>(out.audio.samples[i] + noise_sd * noise[i]);
    }
  }
  if (options.interference_prob > 0.0 && uniform(rng, 0.0, 1.0) < options.interference_prob) {
    const auto& names = NoiseBank::standard_names();
    const std::string& name = names[static_cast<std::size_t>(rng() % names.size())];
    const auto event = environmental_noise(name, total, splitmix64(rng()));
    double power = 0.0;
    for (double v : event) power += v * v;
    power /= static_cast<double>(std::max<std::size_t>(total, 1));
    if (power > 0.0) {
      const double g = std::sqrt(call_power / std::pow(10.0, options.interference_snr_db / 10.0) / power);
      for (std::size_t i = 0; i < total; ++i) out.audio.samples[i] = static_cast<float>(out.audio.samples[i] + g * event[i]);
    }
  }
  for (auto& v : out.audio.samples) v = std::clamp(v, -1.0f, 32767.0f / 32768.0f);

  AnnotatedClip clip;
  clip.begin_s = static_cast<double>(n0) / sr;
  clip.end_s = static_cast<double>(n0 + nc) / sr;
  clip.low_hz = std::max(0.0, f_min - bin);
  clip.high_hz = std::min(nyquist, f_max + bin);
  clip.taxon = family_taxon(tmpl.family);
  if (options.annotation_jitter > 0.0) {
    const double j = options.annotation_jitter;
    const double dur = clip.end_s - clip.begin_s;
    const double bw = clip.high_hz - clip.low_hz;
    const double rec = static_cast<double>(total) / sr;
    const double b = std::clamp(clip.begin_s + uniform(rng, -j, j) * dur, 0.0, rec);
    const double e = std::clamp(clip.end_s + uniform(rng, -j, j) * dur, 0.0, rec);
    const double lo = std::clamp(clip.low_hz + uniform(rng, -j, j) * bw, 0.0, nyquist);
    const double hi = std::clamp(clip.high_hz + uniform(rng, -j, j) * bw, 0.0, nyquist);
    const double min_dur = 4.0 * static_cast<double>(kWindowSize - kWindowOverlap) / sr;
    if (e - b >= min_dur && hi - lo >= 2.0 * bin) {
      clip.begin_s = b;
      clip.end_s = e;
      clip.low_hz = lo;
      clip.high_hz = hi;
    }
  }
  out.clip = clip;
  return out;
}

std::string format_templates(const std::vector<SonotypeTemplate>& templates) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& t : templates) {
    os << "[template]\nfamily=" << family_name(t.family) << "\nf_start_hz=" << t.f_start_hz
       << "\nf_end_hz=" << t.f_end_hz << "\nduration_s=" << t.duration_s << "\namplitude=" << t.amplitude
       << "\nharmonics=" << t.harmonics << "\npulse_rate_hz=" << t.pulse_rate_hz << "\nfreq_jitter=" << t.freq_jitter
       << "\nduration_jitter=" << t.duration_jitter << "\namplitude_jitter_db=" << t.amplitude_jitter_db << "\n\n";
  }
  return os.str();
}

std::vector<SonotypeTemplate> parse_templates(std::string_view text) {
  std::vector<SonotypeTemplate> out;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto number = [&](const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) {
      fail(Errc::invalid_argument, "line " + std::to_string(line_no) + ": '" + v + "' is not a number");
    }
    return d;
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first);
    if (line == "[template]") {
      out.emplace_back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || out.empty()) {
      fail(Errc::invalid_argument, "line " + std::to_string(line_no) + ": expected key=value inside [template]");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    auto& t = out.back();
    if (key == "family") t.family = parse_family(value);
    else if (key == "f_start_hz") t.f_start_hz = number(value);
    else if (key == "f_end_hz") t.f_end_hz = number(value);
    else if (key == "duration_s") t.duration_s = number(value);
    else if (key == "amplitude") t.amplitude = number(value);
    else if (key == "harmonics") t.harmonics = static_cast<std::size_t>(number(value));
    else if (key == "pulse_rate_hz") t.pulse_rate_hz = number(value);
    else if (key == "freq_jitter") t.freq_jitter = number(value);
    else if (key == "duration_jitter") t.duration_jitter = number(value);
    else if (key == "amplitude_jitter_db") t.amplitude_jitter_db = number(value);
    else fail(Errc::invalid_argument, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  for (const auto& t : out) t.validate();
  return out;
}

namespace {

SonotypeTemplate random_template(Family family, double lo_hz, double hi_hz, Rng& rng) {
  SonotypeTemplate t;
  t.family = family;
  t.duration_s = uniform(rng, 0.2, 0.6);
  t.amplitude = 0.3;
  switch (family) {
    case Family::chirp: {
      const double span = uniform(rng, 0.3, 1.0);
      const double a = log_uniform(rng, lo_hz, hi_hz / std::exp2(span));
      const double b = a * std::exp2(span);
      if (uniform(rng, 0.0, 1.0) < 0.5) {
        t.f_start_hz = a;
        t.f_end_hz = b;
      } else {
        t.f_start_hz = b;
        t.f_end_hz = a;
      }
      break;
    }
    case Family::harmonic: {
      t.harmonics = 3 + uniform_index(rng, 3);
      const double top = hi_hz / static_cast<double>(t.harmonics);
      const double f = log_uniform(rng, std::min(lo_hz / 2.0, top / 1.2), top / 1.1);
      t.f_start_hz = f;
      t.f_end_hz = f * uniform(rng, 0.9, 1.1);
      break;
    }
    case Family::pulse_train: {
      const double f = log_uniform(rng, lo_hz, hi_hz / 1.1);
      t.f_start_hz = f;
      t.f_end_hz = f * uniform(rng, 0.9, 1.1);
      t.pulse_rate_hz = uniform(rng, 10.0, 40.0);
      break;
    }
    case Family::noise_band: {
      const double width = uniform(rng, 0.3, 0.8);
      const double a = log_uniform(rng, lo_hz, hi_hz / std::exp2(width));
      t.f_start_hz = a;
      t.f_end_hz = a * std::exp2(width);
      break;
    }
  }
  return t;
}

}  // namespace

std::vector<SonotypeTemplate> draw_templates(const BenchmarkConfig& config, std::uint64_t rng_seed) {
  if (!config.templates.empty()) return config.templates;
  if (!(config.band_low_hz > 0.0 && config.band_high_hz > config.band_low_hz * 2.0)) {
    fail(Errc::invalid_config, "benchmark band must span at least an octave");
  }
  if (config.families.empty()) fail(Errc::invalid_config, "benchmark needs at least one family");
  Rng rng(derive_seed(rng_seed, {0x746d706cULL}));
  std::vector<SonotypeTemplate> out;
  for (std::size_t i = 0; i < config.num_sonotypes; ++i) {
    const Family family = config.families[i % config.families.size()];
    auto t = random_template(family, config.band_low_hz, config.band_high_hz, rng);
    t.freq_jitter = config.freq_jitter;
    t.duration_jitter = config.duration_jitter;
    t.amplitude_jitter_db = config.amplitude_jitter_db;
    out.push_back(t);
  }
  return out;
}

std::vector<std::size_t> sample_plan(const BenchmarkConfig& config) {
  std::vector<std::size_t> plan;
  for (std::size_t r = 0; r < config.num_sonotypes; ++r) {
    if (!config.long_tail) {
      plan.push_back(config.samples_per);
      continue;
    }
    const double size = static_cast<double>(config.long_tail_max) * std::pow(static_cast<double>(r + 1), -config.long_tail_exponent);
    plan.push_back(std::max(config.long_tail_min, static_cast<std::size_t>(std::llround(size))));
  }
  return plan;
}

CatalogSample render_sample(const SonotypeTemplate& tmpl, std::int32_t sonotype_id, std::uint64_t sample_id,
                            std::uint64_t rng_seed, std::size_t image_side, const RenderOptions& options) {
  auto r = render(tmpl, rng_seed, options);
  if (!r.clip) fail(Errc::invalid_argument, "silent template cannot produce an annotated sample");
  r.clip->sonotype_id = sonotype_id;
  const auto spec = spectrogram(r.audio);
  EncodeOptions eo;
  eo.side = image_side;
  eo.recording_duration_s = r.audio.duration_s();
  CatalogSample s;
  s.sample = encode_sample(spec, *r.clip, eo);
  s.clip = *r.clip;
  s.id = sample_id;
  return s;
}

SonotypeCatalog make_benchmark(const BenchmarkConfig& config, std::uint64_t rng_seed) {
  if (config.num_sonotypes < 2 && config.templates.empty()) fail(Errc::invalid_config, "benchmark needs >= 2 sonotypes");
  auto templates = draw_templates(config, rng_seed);
  BenchmarkConfig sized = config;
  sized.num_sonotypes = templates.size();
  const auto plan = sample_plan(sized);
  std::vector<CatalogSample> samples;
  std::uint64_t next_id = 1;
  for (std::size_t s = 0; s < templates.size(); ++s) {
    for (std::size_t j = 0; j < plan[s]; ++j) {
      samples.push_back(render_sample(templates[s], static_cast<std::int32_t>(s + 1), next_id++,
                                      derive_seed(rng_seed, {s, j}), config.image_side, config.render));
    }
  }
  return SonotypeCatalog(std::move(samples));
}

std::vector<EncodedSample> make_pretext_corpus(const PretextConfig& config, std::uint64_t rng_seed) {
  if (config.num_classes < 2 || config.num_classes > kFamilyCount * 3) {
    fail(Errc::corpus_too_small, "pretext corpus needs between 2 and 12 classes");
  }
  if (config.per_class < 2) fail(Errc::corpus_too_small, "pretext corpus needs >= 2 samples per class");
  constexpr double kLow = 600.0, kHigh = 14000.0;
  const double third = std::cbrt(kHigh / kLow);
  std::vector<EncodedSample> out;
  for (std::size_t i = 0; i < config.per_class; ++i) {
    for (std::size_t c = 0; c < config.num_classes; ++c) {
      Rng rng(derive_seed(rng_seed, {c, i}));
      const double lo = kLow * std::pow(third, static_cast<double>(c / kFamilyCount));
      auto t = random_template(static_cast<Family>(c % kFamilyCount), lo, lo * third, rng);
      t.amplitude_jitter_db = 3.0;
      auto s = render_sample(t, static_cast<std::int32_t>(c), 0, splitmix64(rng()), config.image_side, config.render);
      out.push_back(std::move(s.sample));
    }
  }
  return out;
}

NoiseBank make_noise_bank(std::size_t image_side, std::uint64_t rng_seed) {
  constexpr std::uint32_t kRate = kDefaultSampleRateHz;
  constexpr double kSeconds = 1.5;
  const auto n = static_cast<std::size_t>(kSeconds * kRate);
  NoiseBank bank;
  const auto& names = NoiseBank::standard_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string& name = names[k];
    const auto x = environmental_noise(name, n, derive_seed(rng_seed, {k}));
    AudioBuffer audio;
    audio.sample_rate_hz = kRate;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) audio.samples[i] = static_cast<float>(std::clamp(x[i], -1.0, 0.99));
    const auto spec = spectrogram(audio);
    AnnotatedClip whole;
    whole.begin_s = 0.0;
    whole.end_s = audio.duration_s();
    whole.low_hz = 0.0;
    whole.high_hz = audio.nyquist_hz();
    EncodeOptions eo;
    eo.side = image_side;
    bank.add(name, channel_as_gray(encode_sample(spec, whole, eo).image));
  }
  return bank;
}

}  // namespace sonotype
