#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sonotype/nnet.hpp"

using namespace sonotype;
using namespace sonotype::nn;

namespace {

NetworkConfig small_config(std::size_t classes = 3) {
  NetworkConfig c;
  c.image_side = 8;
  c.conv_filters = {2, 3};
  c.dense_sizes = {6, 5};
  c.dropout_rate = 0.25;
  c.num_classes = classes;
  return c;
}

template <class T>
Batch<T> random_batch(std::size_t n, std::size_t side, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Batch<T> b;
  b.size = n;
  b.images.resize(n * side * side * 3);
  for (auto& v : b.images) v = static_cast<T>(u(rng));
  b.aux.resize(n * kAuxSize);
  for (auto& v : b.aux) v = static_cast<T>(u(rng));
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % classes));
  return b;
}

double loss_at(const Network<double>& net, const Batch<double>& b, std::uint64_t dropout_seed) {
  return mean_cross_entropy(net.forward(b, Mode::training, dropout_seed).probs, b.labels);
}

}  // namespace

TEST(Network, ParameterShapes) {
  Network<float> net(small_config());
  const auto& p = net.parameters();
  EXPECT_EQ(p.at("backbone/conv0/kernel").shape, (std::vector<std::size_t>{27, 2}));
  EXPECT_EQ(p.at("backbone/conv1/kernel").shape, (std::vector<std::size_t>{18, 3}));
  // 8 -> 4 -> 2 after two pooling blocks: 2 * 2 * 3 features plus 4 aux values.
  EXPECT_EQ(net.config().feature_size(), 12u);
  EXPECT_EQ(p.at("head/dense0/kernel").shape, (std::vector<std::size_t>{16, 6}));
  EXPECT_EQ(p.at("head/logits/kernel").shape, (std::vector<std::size_t>{5, 3}));
  EXPECT_TRUE(is_backbone("backbone/conv0/bias"));
  EXPECT_FALSE(is_backbone("head/logits/bias"));
}

TEST(Network, ConfigValidation) {
  auto bad = [](auto mutate) {
    NetworkConfig c = small_config();
    mutate(c);
    return oracle::throws_code([&] { Network<float> n(c); }, Errc::invalid_config);
  };
  EXPECT_TRUE(bad([](NetworkConfig& c) { c.num_classes = 1; }));
  EXPECT_TRUE(bad([](NetworkConfig& c) { c.conv_filters.clear(); }));
  EXPECT_TRUE(bad([](NetworkConfig& c) { c.dropout_rate = 1.0; }));
  EXPECT_TRUE(bad([](NetworkConfig& c) { c.image_side = 2; }));
  const auto c = small_config();
  EXPECT_EQ(NetworkConfig::from_text(c.to_text()).hash(), c.hash());
  auto frozen = c;
  frozen.freeze_backbone = true;
  EXPECT_EQ(frozen.hash(), c.hash());
  auto wider = c;
  wider.dense_sizes[0] = 7;
  EXPECT_NE(wider.hash(), c.hash());
}

TEST(Network, SoftmaxRowsSumToOne) {
  Network<float> net(small_config(5));
  net.initialize(3);
  const auto probs = net.predict(random_batch<float>(17, 8, 5, 4));
  ASSERT_EQ(probs.rows(), 17);
  ASSERT_EQ(probs.cols(), 5);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    EXPECT_NEAR(probs.row(r).sum(), 1.0f, 1e-5f);
    for (Eigen::Index c = 0; c < probs.cols(); ++c) EXPECT_GE(probs(r, c), 0.0f);
  }
}

TEST(Network, ZeroWeightsGiveUniform) {
  Network<double> net(small_config(4));
  const auto probs = net.predict(random_batch<double>(5, 8, 4, 1));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(probs(r, c), 0.25);
  }
  EXPECT_NEAR(mean_cross_entropy(probs, random_batch<double>(5, 8, 4, 1).labels), std::log(4.0), 1e-12);
}

TEST(Network, InferenceDeterministic) {
  Network<float> net(small_config());
  net.initialize(11);
  const auto b = random_batch<float>(9, 8, 3, 2);
  const auto a = net.predict(b);
  const auto c = net.predict(b);
  EXPECT_TRUE(a == c);
  Network<float> twin(small_config());
  twin.initialize(11);
  EXPECT_TRUE(twin.predict(b) == a);
}

TEST(Network, ShapeMismatch) {
  Network<float> net(small_config());
  auto b = random_batch<float>(3, 8, 3, 2);
  b.images.pop_back();
  EXPECT_TRUE(oracle::throws_code([&] { net.predict(b); }, Errc::shape_mismatch));
  auto wrong_side = random_batch<float>(3, 16, 3, 2);
  EXPECT_TRUE(oracle::throws_code([&] { net.predict(wrong_side); }, Errc::shape_mismatch));
  const auto good = random_batch<float>(3, 8, 3, 2);
  const auto pass = net.forward(good, Mode::inference, 0, true);
  const std::vector<int> labels = {0, 1};
  EXPECT_TRUE(oracle::throws_code([&] { net.backward(pass, labels); }, Errc::shape_mismatch));
  const std::vector<int> out_of_range = {0, 1, 3};
  EXPECT_TRUE(oracle::throws_code([&] { net.backward(pass, out_of_range); }, Errc::shape_mismatch));
}

TEST(Network, LoadBackboneChecksShapes) {
  Network<float> a(small_config()), b(small_config(7));
  a.initialize(1);
  b.load_backbone(a.backbone());
  EXPECT_EQ(b.parameters().at("backbone/conv1/kernel"), a.parameters().at("backbone/conv1/kernel"));
  auto other = small_config();
  other.conv_filters = {2, 4};
  Network<float> c(other);
  EXPECT_TRUE(oracle::throws_code([&] { c.load_backbone(a.backbone()); }, Errc::shape_mismatch));
  auto partial = a.backbone();
  partial.erase("backbone/conv0/bias");
  EXPECT_TRUE(oracle::throws_code([&] { b.load_backbone(partial); }, Errc::shape_mismatch));
}

TEST(CrossEntropy, Examples) {
  const std::vector<double> uniform(6, 1.0 / 6.0);
  EXPECT_NEAR(cross_entropy<double>(uniform, 2), std::log(6.0), 1e-12);
  EXPECT_NEAR(std::log(6.0), 1.791759, 1e-6);
  const std::vector<double> sure = {0.0, 1.0};
  EXPECT_EQ(cross_entropy<double>(sure, 1), 0.0);
  EXPECT_NEAR(cross_entropy<double>(sure, 0), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, MeanMatchesLoop) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix<double> p(20, 4);
  std::vector<int> labels;
  for (Eigen::Index r = 0; r < 20; ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) p(r, c) = u(rng);
    p.row(r) /= p.row(r).sum();
    labels.push_back(static_cast<int>(rng() % 4));
  }
  double total = 0.0;
  for (int r = 0; r < 20; ++r) total += -std::log(p(r, labels[static_cast<std::size_t>(r)]));
  EXPECT_NEAR(mean_cross_entropy(p, labels), total / 20.0, 1e-12);
}

class FiniteDifference : public ::testing::TestWithParam<const char*> {};

TEST_P(FiniteDifference, AnalyticGradientMatches) {
  const std::string name = GetParam();
  Network<double> net(small_config());
  net.initialize(21);
  // Non-zero biases so that bias gradients are exercised away from zero.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> small(-0.05, 0.05);
  for (auto& [n, t] : net.parameters()) {
    if (n.ends_with("/bias")) {
      for (auto& v : t.values) v = small(rng);
    }
  }
  const auto batch = random_batch<double>(4, 8, 3, 9);
  constexpr std::uint64_t kDropout = 77;
  const auto pass = net.forward(batch, Mode::training, kDropout, true);
  const auto grads = net.backward(pass, batch.labels);
  ASSERT_TRUE(grads.count(name));
  auto& values = net.parameters().at(name).values;
  const auto& g = grads.at(name).values;
  ASSERT_EQ(g.size(), values.size());
  const std::size_t checks = std::min<std::size_t>(10, values.size());
  const double h = 1e-6;
  for (std::size_t j = 0; j < checks; ++j) {
    const std::size_t idx = (j * 7919) % values.size();
    const double saved = values[idx];
    values[idx] = saved + h;
    const double up = loss_at(net, batch, kDropout);
    values[idx] = saved - h;
    const double down = loss_at(net, batch, kDropout);
    values[idx] = saved;
    const double numeric = (up - down) / (2 * h);
    EXPECT_NEAR(g[idx], numeric, 1e-5) << name << "[" << idx << "]";
  }
}

INSTANTIATE_TEST_SUITE_P(AllLayers, FiniteDifference,
                         ::testing::Values("backbone/conv0/kernel", "backbone/conv0/bias", "backbone/conv1/kernel",
                                           "backbone/conv1/bias", "head/dense0/kernel", "head/dense0/bias",
                                           "head/dense1/kernel", "head/dense1/bias", "head/logits/kernel",
                                           "head/logits/bias"),
                         [](const auto& info) {
                           std::string s = info.param;
                           for (auto& ch : s) {
                             if (ch == '/') ch = '_';
                           }
                           return s;
                         });

TEST(Backward, FrozenBackboneOmitsBackboneGradients) {
  auto c = small_config();
  c.freeze_backbone = true;
  Network<double> net(c);
  net.initialize(2);
  const auto batch = random_batch<double>(3, 8, 3, 4);
  const auto grads = net.backward(net.forward(batch, Mode::training, 1, true), batch.labels);
  for (const auto& [name, t] : grads) EXPECT_FALSE(is_backbone(name)) << name;
  EXPECT_TRUE(grads.count("head/logits/kernel"));
}

TEST(Backward, LogitBiasGradientSumsToZero) {
  Network<double> net(small_config(4));
  net.initialize(6);
  const auto batch = random_batch<double>(6, 8, 4, 3);
  const auto grads = net.backward(net.forward(batch, Mode::inference, 0, true), batch.labels);
  double sum = 0.0;
  for (double v : grads.at("head/logits/bias").values) sum += v;
  EXPECT_NEAR(sum, 0.0, 1e-12);
}

TEST(Dropout, InactiveAtInferenceAndSeeded) {
  Network<double> net(small_config());
  net.initialize(12);
  const auto batch = random_batch<double>(5, 8, 3, 6);
  const auto a = net.forward(batch, Mode::training, 4).probs;
  const auto b = net.forward(batch, Mode::training, 4).probs;
  const auto c = net.forward(batch, Mode::training, 5).probs;
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  EXPECT_TRUE(net.forward(batch, Mode::inference, 4).probs == net.forward(batch, Mode::inference, 5).probs);
}

TEST(Network, HeadOnlyMatchesFullForward) {
  Network<double> net(small_config());
  net.initialize(13);
  const auto batch = random_batch<double>(5, 8, 3, 7);
  const auto feats = net.features(batch);
  const auto head = net.forward_head(feats, batch.aux, Mode::inference);
  EXPECT_LT((head.probs - net.predict(batch)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Batch, GatherAndMakeBatch) {
  const auto b = random_batch<float>(5, 8, 3, 1);
  const std::vector<std::size_t> rows = {4, 0};
  const auto g = gather(b, rows);
  ASSERT_EQ(g.size, 2u);
  EXPECT_EQ(g.labels, (std::vector<int>{b.labels[4], b.labels[0]}));
  EXPECT_EQ(g.aux[0], b.aux[16]);
  const auto s = oracle::random_sample(3, 8, 52);
  const EncodedSample* ptrs[] = {&s};
  const auto mb = make_batch<float>(std::span<const EncodedSample* const>(ptrs), [](std::int32_t id) { return id == 52 ? 1 : 0; });
  EXPECT_EQ(mb.labels, std::vector<int>{1});
  EXPECT_EQ(mb.images[5], static_cast<float>(s.image.data[5]) / 255.0f);
}
