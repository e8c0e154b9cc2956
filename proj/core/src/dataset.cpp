#include "sonotype/dataset.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "sonotype/error.hpp"
#include "sonotype/random.hpp"

namespace sonotype {

std::string_view split_name(SplitTag tag) noexcept {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    case SplitTag::unassigned: return "unassigned";
  }
  return "?";
}

namespace {

void put_samples(Container& c, std::size_t height, std::size_t width, std::span<const EncodedSample* const> samples,
                 std::span<const std::uint64_t> ids) {
  const std::size_t n = samples.size();
  const std::size_t pixels = height * width * Image8::kChannels;
  std::vector<std::uint8_t> images;
  images.reserve(n * pixels);
  std::vector<float> aux;
  aux.reserve(n * kAuxSize);
  std::vector<std::int32_t> labels;
  labels.reserve(n);
  for (const auto* s : samples) {
    if (s->image.height != height || s->image.width != width || s->image.data.size() != pixels) {
      fail(Errc::shape_mismatch, "all images in a dataset must share one shape");
    }
    images.insert(images.end(), s->image.data.begin(), s->image.data.end());
    aux.insert(aux.end(), s->aux.begin(), s->aux.end());
    labels.push_back(s->label);
  }
  c.put_scalar<std::uint32_t>("schema_version", kSchemaVersion);
  c.put_u8("dataset/images", {n, height, width, Image8::kChannels}, std::move(images));
  c.put_tensor<float>("dataset/aux", {n, kAuxSize}, aux);
  c.put_tensor<std::int32_t>("dataset/labels", {n}, labels);
  c.put_tensor<std::uint64_t>("dataset/ids", {n}, ids);
}

struct DecodedSamples {
  std::size_t height = 0, width = 0;
  std::vector<EncodedSample> samples;
  std::vector<std::uint64_t> ids;
};

DecodedSamples get_samples(const Container& c) {
  const auto version = c.scalar<std::uint32_t>("schema_version");
  if (version != kSchemaVersion) {
    fail(Errc::version_mismatch, "schema_version " + std::to_string(version) + " unsupported");
  }
  const Entry& images = c.at("dataset/images");
  if (images.dtype != DType::u8 || images.dims.size() != 4 || images.dims[3] != Image8::kChannels) {
    fail(Errc::shape_mismatch, "dataset/images must be u8 [N, H, W, 3]");
  }
  DecodedSamples out;
  const std::size_t n = images.dims[0];
  out.height = images.dims[1];
  out.width = images.dims[2];
  auto aux = c.get<float>("dataset/aux");
  auto labels = c.get<std::int32_t>("dataset/labels");
  out.ids = c.get<std::uint64_t>("dataset/ids");
  if (aux.size() != n * kAuxSize || labels.size() != n || out.ids.size() != n) {
    fail(Errc::shape_mismatch, "dataset entries disagree on sample count");
  }
  const std::size_t pixels = out.height * out.width * Image8::kChannels;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out.samples[i];
    s.image.height = out.height;
    s.image.width = out.width;
    s.image.data.assign(images.payload.begin() + static_cast<std::ptrdiff_t>(i * pixels),
                        images.payload.begin() + static_cast<std::ptrdiff_t>((i + 1) * pixels));
    std::copy_n(aux.begin() + static_cast<std::ptrdiff_t>(i * kAuxSize), kAuxSize, s.aux.begin());
    s.label = labels[i];
  }
  return out;
}

}  // namespace

Container to_container(const Dataset& dataset) {
  Container c;
  std::vector<const EncodedSample*> samples;
  std::vector<std::uint64_t> ids, parents;
  std::vector<std::uint8_t> origin, split;
  for (const auto& r : dataset.records) {
    samples.push_back(&r.sample);
    ids.push_back(r.id);
    parents.push_back(r.parent_id);
    origin.push_back(static_cast<std::uint8_t>(r.origin));
    split.push_back(static_cast<std::uint8_t>(r.split));
  }
  const std::uint64_t n = dataset.records.size();
  put_samples(c, dataset.image_height, dataset.image_width, samples, ids);
  c.put_u8("dataset/origin", {n}, std::move(origin));
  c.put_tensor<std::uint64_t>("dataset/parent", {n}, parents);
  c.put_u8("dataset/split", {n}, std::move(split));
  return c;
}

Dataset dataset_from_container(const Container& c) {
  auto decoded = get_samples(c);
  const std::size_t n = decoded.samples.size();
  auto origin = c.get<std::uint8_t>("dataset/origin");
  auto parent = c.get<std::uint64_t>("dataset/parent");
  auto split = c.get<std::uint8_t>("dataset/split");
  if (origin.size() != n || parent.size() != n || split.size() != n) {
    fail(Errc::shape_mismatch, "provenance entries disagree on sample count");
  }
  Dataset d;
  d.image_height = decoded.height;
  d.image_width = decoded.width;
  d.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (origin[i] > 1) fail(Errc::shape_mismatch, "dataset/origin holds an unknown code");
    if (split[i] > 2 && split[i] != 255) fail(Errc::shape_mismatch, "dataset/split holds an unknown code");
    d.records[i] = {std::move(decoded.samples[i]), decoded.ids[i], static_cast<Origin>(origin[i]), parent[i],
                    static_cast<SplitTag>(split[i])};
  }
  return d;
}

std::vector<std::uint8_t> write_dataset(const Dataset& dataset) { return write_container(to_container(dataset)); }

Dataset read_dataset(std::span<const std::uint8_t> bytes) { return dataset_from_container(read_container(bytes)); }

std::vector<ProvenanceViolation> audit_provenance(const Dataset& dataset) {
  std::unordered_map<std::uint64_t, const SampleRecord*> by_id;
  std::vector<ProvenanceViolation> out;
  for (const auto& r : dataset.records) {
    if (!by_id.emplace(r.id, &r).second) out.push_back({r.id, "duplicate id"});
  }
  for (const auto& r : dataset.records) {
    if (r.origin == Origin::original) {
      if (r.parent_id != r.id) out.push_back({r.id, "original with a foreign parent"});
      continue;
    }
    auto it = by_id.find(r.parent_id);
    if (it == by_id.end()) {
      out.push_back({r.id, "parent " + std::to_string(r.parent_id) + " missing"});
      continue;
    }
    const SampleRecord& p = *it->second;
    if (p.origin != Origin::original) out.push_back({r.id, "parent is itself augmented"});
    if (p.split != r.split) {
      out.push_back({r.id, "variant in " + std::string(split_name(r.split)) + ", parent in " +
                               std::string(split_name(p.split))});
    }
    if (p.sample.label != r.sample.label) out.push_back({r.id, "label differs from parent"});
  }
  return out;
}

SonotypeCatalog::SonotypeCatalog(std::vector<CatalogSample> samples) : samples_(std::move(samples)) {
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!ids.insert(s.id).second) fail(Errc::invalid_argument, "duplicate sample id " + std::to_string(s.id));
    if (s.sample.label != s.clip.sonotype_id) {
      fail(Errc::invalid_argument, "sample " + std::to_string(s.id) + " label disagrees with its clip");
    }
    auto [it, inserted] = entries_.try_emplace(s.clip.sonotype_id);
    if (inserted) it->second.taxon = s.clip.taxon;
    it->second.members.push_back(i);
  }
  for (auto& [id, e] : entries_) {
    SonotypeStats st;
    st.count = e.members.size();
    for (auto m : e.members) {
      const auto& c = samples_[m].clip;
      st.low_hz += c.low_hz;
      st.high_hz += c.high_hz;
      st.bandwidth_hz += c.bandwidth_hz();
      st.duration_s += c.duration_s();
    }
    const double n = static_cast<double>(st.count);
    st.low_hz /= n;
    st.high_hz /= n;
    st.bandwidth_hz /= n;
    st.duration_s /= n;
    e.stats = st;
  }
}

const SonotypeEntry& SonotypeCatalog::entry(std::int32_t sonotype_id) const {
  auto it = entries_.find(sonotype_id);
  if (it == entries_.end()) fail(Errc::invalid_argument, "sonotype " + std::to_string(sonotype_id) + " not in catalog");
  return it->second;
}

std::vector<std::int32_t> SonotypeCatalog::eligible(std::size_t min_n) const {
  std::vector<std::int32_t> out;
  for (const auto& [id, e] : entries_) {
    if (e.members.size() >= min_n) out.push_back(id);
  }
  return out;
}

Container SonotypeCatalog::to_container() const {
  Container c;
  std::vector<const EncodedSample*> samples;
  std::vector<std::uint64_t> ids;
  std::vector<double> clips;
  std::vector<std::uint8_t> taxa;
  std::size_t h = 0, w = 0;
  if (!samples_.empty()) {
    h = samples_.front().sample.image.height;
    w = samples_.front().sample.image.width;
  }
  for (const auto& s : samples_) {
    samples.push_back(&s.sample);
    ids.push_back(s.id);
    clips.insert(clips.end(), {s.clip.begin_s, s.clip.end_s, s.clip.low_hz, s.clip.high_hz});
    taxa.push_back(static_cast<std::uint8_t>(s.clip.taxon));
  }
  put_samples(c, h, w, samples, ids);
  const std::uint64_t n = samples_.size();
  c.put_tensor<double>("catalog/clips", {n, 4}, clips);
  c.put_u8("catalog/taxon", {n}, std::move(taxa));
  return c;
}

SonotypeCatalog SonotypeCatalog::from_container(const Container& c) {
  auto decoded = get_samples(c);
  const std::size_t n = decoded.samples.size();
  auto clips = c.get<double>("catalog/clips");
  auto taxa = c.get<std::uint8_t>("catalog/taxon");
  if (clips.size() != 4 * n || taxa.size() != n) fail(Errc::shape_mismatch, "catalog entries disagree on count");
  std::vector<CatalogSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (taxa[i] > static_cast<std::uint8_t>(Taxon::geophony)) fail(Errc::shape_mismatch, "unknown taxon code");
    samples[i].sample = std::move(decoded.samples[i]);
    samples[i].id = decoded.ids[i];
    samples[i].clip = {clips[4 * i], clips[4 * i + 1], clips[4 * i + 2], clips[4 * i + 3],
                       samples[i].sample.label, static_cast<Taxon>(taxa[i])};
  }
  return SonotypeCatalog(std::move(samples));
}

SonotypeCatalog filter_min_samples(const SonotypeCatalog& catalog, std::size_t min_n) {
  std::vector<CatalogSample> kept;
  for (const auto& s : catalog.samples()) {
    if (catalog.entry(s.clip.sonotype_id).members.size() >= min_n) kept.push_back(s);
  }
  return SonotypeCatalog(std::move(kept));
}

SplitCounts split_counts(std::size_t n) {
  if (n < 3) fail(Errc::too_few_samples, "split needs n >= 3, got " + std::to_string(n));
  const std::size_t tenth = std::max<std::size_t>(1, (n + 5) / 10);
  return {n - 2 * tenth, tenth, tenth};
}

SplitAssignment split(std::size_t n, std::uint64_t rng_seed) {
  SplitAssignment out;
  out.counts = split_counts(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(rng_seed);
  std::shuffle(order.begin(), order.end(), rng);
  out.tags.assign(n, SplitTag::train);
  for (std::size_t i = 0; i < out.counts.val; ++i) out.tags[order[i]] = SplitTag::val;
  for (std::size_t i = 0; i < out.counts.test; ++i) out.tags[order[out.counts.val + i]] = SplitTag::test;
  return out;
}

namespace {

std::vector<std::int32_t> draw_sonotypes(const std::vector<std::int32_t>& eligible, std::size_t k, Rng& rng) {
  std::vector<std::int32_t> pool = eligible;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

ExperimentDraw select_balanced(const SonotypeCatalog& catalog, std::size_t k, std::size_t s, std::uint64_t rng_seed) {
  if (k == 0) fail(Errc::invalid_argument, "k must be >= 1");
  const auto eligible = catalog.eligible(s);
  if (eligible.size() < k) {
    fail(Errc::insufficient_eligible_sonotypes, std::to_string(eligible.size()) + " sonotypes have >= " +
                                                    std::to_string(s) + " samples, need " + std::to_string(k));
  }
  Rng rng(rng_seed);
  ExperimentDraw draw;
  draw.sonotypes = draw_sonotypes(eligible, k, rng);
  for (auto id : draw.sonotypes) {
    auto members = catalog.entry(id).members;
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(s);
    std::sort(members.begin(), members.end());
    draw.samples.push_back(std::move(members));
  }
  return draw;
}

ImbalancedDraw select_imbalanced(const SonotypeCatalog& catalog, std::size_t k, std::uint64_t rng_seed,
                                 std::size_t min_n) {
  if (k == 0) fail(Errc::invalid_argument, "k must be >= 1");
  const auto eligible = catalog.eligible(min_n);
  if (eligible.size() < k) {
    fail(Errc::insufficient_eligible_sonotypes, std::to_string(eligible.size()) + " sonotypes have >= " +
                                                    std::to_string(min_n) + " samples, need " + std::to_string(k));
  }
  Rng rng(rng_seed);
  ImbalancedDraw out;
  out.draw.sonotypes = draw_sonotypes(eligible, k, rng);
  std::size_t total = 0;
  out.min_size = std::numeric_limits<std::size_t>::max();
  for (auto id : out.draw.sonotypes) {
    const auto& members = catalog.entry(id).members;
    out.draw.samples.push_back(members);
    total += members.size();
    out.min_size = std::min(out.min_size, members.size());
  }
  out.mean_size = static_cast<double>(total) / static_cast<double>(k);
  return out;
}

Dataset build_split_dataset(const SonotypeCatalog& catalog, const ExperimentDraw& draw, std::uint64_t rng_seed) {
  Dataset d;
  for (std::size_t c = 0; c < draw.sonotypes.size(); ++c) {
    const auto& members = draw.samples[c];
    auto assignment = split(members.size(), derive_seed(rng_seed, {static_cast<std::uint64_t>(draw.sonotypes[c])}));
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto& s = catalog.samples()[members[i]];
      d.records.push_back({s.sample, s.id, Origin::original, s.id, assignment.tags[i]});
    }
  }
  if (!d.records.empty()) {
    d.image_height = d.records.front().sample.image.height;
    d.image_width = d.records.front().sample.image.width;
  }
  return d;
}

}  // namespace sonotype
