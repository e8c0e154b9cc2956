#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sonotype/nnet.hpp"

using namespace sonotype;
using namespace sonotype::nn;

namespace {

NetworkConfig tiny(std::size_t classes = 2) {
  NetworkConfig c;
  c.image_side = 8;
  c.conv_filters = {4, 4};
  c.dense_sizes = {16, 8};
  c.dropout_rate = 0.1;
  c.num_classes = classes;
  return c;
}

/// Class c fills quadrant c of the image; aux carries no signal.
Batch<float> quadrant_batch(std::size_t n, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.2f);
  Batch<float> b;
  b.size = n;
  b.images.resize(n * 8 * 8 * 3);
  b.aux.assign(n * kAuxSize, 0.5f);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % classes);
    b.labels.push_back(c);
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        const int q = static_cast<int>((y / 4) * 2 + x / 4);
        const float v = (q == c ? 0.8f : 0.0f) + noise(rng);
        for (std::size_t ch = 0; ch < 3; ++ch) b.images[((i * 8 + y) * 8 + x) * 3 + ch] = v;
      }
    }
  }
  return b;
}

TrainConfig quick(std::uint64_t seed = 1) {
  TrainConfig t;
  t.max_epochs = 40;
  t.patience = 5;
  t.batch_size = 8;
  t.learning_rate = 1e-2;
  t.seed = seed;
  return t;
}

}  // namespace

TEST(EarlyStopping, PlateauAfterTwentyEpochs) {
  std::vector<double> losses;
  for (int e = 1; e <= 20; ++e) losses.push_back(1.0 / e);
  losses.resize(100, 1.0 / 20);
  const auto out = replay_early_stopping(losses, 15);
  EXPECT_EQ(out.stopped_epoch, 35u);
  EXPECT_EQ(out.best_epoch, 20u);
}

TEST(EarlyStopping, StrictlyDecreasingRunsToMax) {
  std::vector<double> losses;
  for (int e = 1; e <= 300; ++e) losses.push_back(10.0 - 0.01 * e);
  const auto out = replay_early_stopping(losses, 15, 200);
  EXPECT_EQ(out.stopped_epoch, 200u);
  EXPECT_EQ(out.best_epoch, 200u);
}

TEST(EarlyStopping, PatienceOneStopsAtFirstNonImprovement) {
  const std::vector<double> losses = {3.0, 2.0, 2.0, 1.0};
  const auto out = replay_early_stopping(losses, 1);
  EXPECT_EQ(out.stopped_epoch, 3u);
  EXPECT_EQ(out.best_epoch, 2u);
  EXPECT_TRUE(oracle::throws_code([] { EarlyStopping bad(0); }, Errc::invalid_config));
}

TEST(EarlyStopping, MatchesDirectScanOnRandomSequences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> losses(150);
    double level = 2.0;
    for (auto& l : losses) {
      level *= 0.97 + 0.06 * u(rng);
      l = std::round(level * 100.0) / 100.0;  // ties happen
    }
    const std::size_t patience = 1 + rng() % 20;
    // Reference: stop at the first epoch that is `patience` epochs past the
    // running minimum, ties counting as no improvement.
    std::size_t best = 1, stop = losses.size();
    double best_loss = losses[0];
    for (std::size_t e = 2; e <= losses.size(); ++e) {
      if (losses[e - 1] < best_loss) {
        best_loss = losses[e - 1];
        best = e;
      }
      if (e - best >= patience) {
        stop = e;
        break;
      }
    }
    const auto out = replay_early_stopping(losses, patience);
    EXPECT_EQ(out.stopped_epoch, stop) << trial;
    EXPECT_EQ(out.best_epoch, best) << trial;
  }
}

TEST(TrainConfig, Validation) {
  auto bad = [](auto mutate) {
    TrainConfig t;
    mutate(t);
    return oracle::throws_code([&] { t.validate(); }, Errc::invalid_config);
  };
  EXPECT_TRUE(bad([](TrainConfig& t) { t.learning_rate = 0; }));
  EXPECT_TRUE(bad([](TrainConfig& t) { t.batch_size = 0; }));
  EXPECT_TRUE(bad([](TrainConfig& t) { t.max_epochs = 0; }));
  EXPECT_TRUE(bad([](TrainConfig& t) { t.beta2 = 1.0; }));
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(Train, EmptySplitsRejected) {
  Network<float> net(tiny());
  net.initialize(1);
  const auto data = quadrant_batch(8, 2, 1);
  const Batch<float> empty;
  EXPECT_TRUE(oracle::throws_code([&] { train(net, empty, data, quick()); }, Errc::empty_split));
  EXPECT_TRUE(oracle::throws_code([&] { train(net, data, empty, quick()); }, Errc::empty_split));
}

TEST(Train, LearnsSeparableTask) {
  Network<float> net(tiny(4));
  net.initialize(3);
  const auto tr = quadrant_batch(64, 4, 1), va = quadrant_batch(16, 4, 2), te = quadrant_batch(40, 4, 3);
  const auto result = train(net, tr, va, quick());
  EXPECT_LT(result.best.best_val_loss, result.history.front().val_loss);
  const auto probs = net.predict(te);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index arg = 0;
    probs.row(r).maxCoeff(&arg);
    correct += arg == te.labels[static_cast<std::size_t>(r)];
  }
  EXPECT_GE(correct, 36u);
}

TEST(Train, RestoresBestCheckpoint) {
  Network<float> net(tiny());
  net.initialize(5);
  const auto tr = quadrant_batch(32, 2, 4), va = quadrant_batch(8, 2, 5);
  const auto result = train(net, tr, va, quick());
  EXPECT_EQ(net.parameters(), result.best.params);
  ASSERT_GE(result.history.size(), result.best.epoch);
  double min_loss = INFINITY;
  std::size_t arg = 0;
  for (const auto& h : result.history) {
    if (h.val_loss < min_loss) {
      min_loss = h.val_loss;
      arg = h.epoch;
    }
  }
  EXPECT_EQ(result.best.epoch, arg);
  EXPECT_EQ(result.best.best_val_loss, min_loss);
  EXPECT_EQ(result.stopped_epoch, result.history.size());
  EXPECT_NEAR(mean_cross_entropy(net.predict(va), va.labels), min_loss, 1e-6);
}

TEST(Train, BitReproducible) {
  const auto tr = quadrant_batch(24, 3, 7), va = quadrant_batch(6, 3, 8);
  auto run = [&](std::uint64_t seed) {
    Network<float> net(tiny(3));
    net.initialize(9);
    train(net, tr, va, quick(seed));
    return net.parameters();
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_NE(a, run(2));
}

TEST(Train, FrozenBackboneUnchanged) {
  Network<float> net(tiny());
  net.initialize(10);
  const auto before = net.backbone();
  const auto head_before = net.parameters().at("head/logits/kernel");
  net.set_frozen(true);
  train(net, quadrant_batch(16, 2, 1), quadrant_batch(4, 2, 2), quick());
  EXPECT_EQ(net.backbone(), before);
  EXPECT_NE(net.parameters().at("head/logits/kernel"), head_before);
}

TEST(Train, FrozenRunsToEpochCap) {
  auto cfg = tiny();
  cfg.freeze_backbone = true;
  Network<float> cached(cfg);
  cached.initialize(4);
  const auto tr = quadrant_batch(16, 2, 3), va = quadrant_batch(4, 2, 4);
  auto tc = quick();
  tc.max_epochs = 3;
  const auto r = train(cached, tr, va, tc);
  EXPECT_EQ(r.history.size(), 3u);
  for (const auto& h : r.history) EXPECT_TRUE(std::isfinite(h.val_loss));
}

TEST(Checkpoint, RoundTripAndHash) {
  Network<float> net(tiny());
  net.initialize(2);
  const auto result = train(net, quadrant_batch(16, 2, 1), quadrant_batch(4, 2, 2), quick());
  const auto c = checkpoint_to_container(result.best);
  const auto back = checkpoint_from_container<float>(read_container(write_container(c)));
  EXPECT_EQ(back.params, result.best.params);
  EXPECT_EQ(back.epoch, result.best.epoch);
  EXPECT_EQ(back.best_val_loss, result.best.best_val_loss);
  EXPECT_EQ(back.rng_state, result.best.rng_state);
  EXPECT_EQ(back.optimizer.step, result.best.optimizer.step);
  EXPECT_EQ(back.optimizer.m, result.best.optimizer.m);
  EXPECT_EQ(back.config_hash, tiny().hash());

  auto tampered = c;
  tampered.put_scalar<std::uint64_t>("state/config_hash", 1234);
  EXPECT_TRUE(oracle::throws_code([&] { checkpoint_from_container<float>(tampered); }, Errc::shape_mismatch));
  Container missing;
  for (const auto& name : c.names_with_prefix("")) {
    if (name != "param/head/logits/bias") missing.put(c.at(name));
  }
  EXPECT_TRUE(oracle::throws_code([&] { checkpoint_from_container<float>(missing); }, Errc::missing_entry));
}

TEST(Pretext, CorpusTooSmall) {
  auto corpus = quadrant_batch(7, 4, 1);
  EXPECT_TRUE(oracle::throws_code([&] { pretext_pretrain(tiny(), corpus, 4, quick(), 1); }, Errc::corpus_too_small));
  EXPECT_TRUE(oracle::throws_code([&] { pretext_pretrain(tiny(), corpus, 1, quick(), 1); }, Errc::corpus_too_small));
  const auto ok = pretext_pretrain(tiny(), quadrant_batch(16, 4, 1), 4, quick(), 1);
  for (const auto& [name, t] : ok) EXPECT_TRUE(is_backbone(name));
  Network<float> target(tiny(6));
  EXPECT_NO_THROW(target.load_backbone(ok));
}
