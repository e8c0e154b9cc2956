#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sonotype/spectro.hpp"

using namespace sonotype;

TEST(FrameCount, Examples) {
  EXPECT_EQ(frame_count(79'159'274, 256, 32), 353'389u);
  EXPECT_EQ(frame_count(256, 256, 32), 1u);
  EXPECT_EQ(frame_count(2272, 256, 32), 10u);
}

TEST(FrameCount, InvalidFraming) {
  EXPECT_TRUE(oracle::throws_code([] { frame_count(100, 256, 32); }, Errc::invalid_framing));
  EXPECT_TRUE(oracle::throws_code([] { frame_count(1000, 32, 32); }, Errc::invalid_framing));
  EXPECT_TRUE(oracle::throws_code([] { frame_count(1000, 16, 40); }, Errc::invalid_framing));
}

TEST(FrameCount, MatchesWindowWalkExhaustiveSmall) {
  for (std::size_t w = 1; w <= 24; ++w) {
    for (std::size_t o = 0; o < w; ++o) {
      for (std::size_t n = w; n <= 600; ++n) {
        ASSERT_EQ(frame_count(n, w, o), oracle::frames_by_walk(n, w, o)) << n << ' ' << w << ' ' << o;
      }
    }
  }
}

TEST(FrameCount, MatchesWindowWalkRandomUpTo10000) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20000; ++i) {
    const std::size_t n = 1 + rng() % 10000;
    const std::size_t w = 1 + rng() % n;
    const std::size_t o = rng() % w;
    ASSERT_EQ(frame_count(n, w, o), oracle::frames_by_walk(n, w, o));
  }
}

TEST(Tukey, EndpointAndPlateau) {
  for (auto sym : {WindowSymmetry::symmetric, WindowSymmetry::periodic}) {
    const auto w = tukey_window(256, 0.25, sym);
    ASSERT_EQ(w.size(), 256u);
    EXPECT_EQ(w[0], 0.0);
    EXPECT_EQ(w[127], 1.0);
  }
}

TEST(Tukey, RectangularWhenAlphaZero) {
  for (double v : tukey_window(256, 0.0)) EXPECT_EQ(v, 1.0);
  for (double v : tukey_window(9, 0.0, WindowSymmetry::periodic)) EXPECT_EQ(v, 1.0);
}

TEST(Tukey, TaperMidpointIsHalf) {
  // The periodic 256-point window is the first 256 points of the 257-point
  // symmetric taper, whose ramp spans alpha * 256 / 2 = 32 samples.
  const auto w = tukey_window(256, 0.25, WindowSymmetry::periodic);
  EXPECT_NEAR(w[16], 0.5, 1e-9);
  EXPECT_NEAR(w[256 - 16], 0.5, 1e-9);
}

TEST(Tukey, MatchesClosedForm) {
  for (double alpha : {0.1, 0.25, 0.5, 0.9, 1.0}) {
    const auto sym = tukey_window(256, alpha);
    const auto per = tukey_window(256, alpha, WindowSymmetry::periodic);
    for (std::size_t i = 0; i < 256; ++i) {
      EXPECT_NEAR(sym[i], oracle::tukey_closed_form(i, 256, alpha), 1e-12);
      EXPECT_NEAR(per[i], oracle::tukey_closed_form(i, 257, alpha), 1e-12);
    }
  }
}

namespace {
AudioBuffer tone(double hz, std::size_t n, double amp = 0.5) {
  AudioBuffer a;
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / 44100.0));
  }
  return a;
}
}  // namespace

TEST(Spectrogram, Shape) {
  const auto s = spectrogram(tone(1000, 2272));
  EXPECT_EQ(s.height(), 129u);
  EXPECT_EQ(s.width(), 10u);
  EXPECT_EQ(s.freq_axis_hz.size(), 129u);
  EXPECT_EQ(s.freq_axis_hz.back(), 22050.0);
  EXPECT_EQ(s.time_axis_s.size(), 10u);
}

TEST(Spectrogram, TooShort) {
  EXPECT_TRUE(oracle::throws_code([] { spectrogram(tone(1000, 255)); }, Errc::audio_too_short));
}

TEST(Spectrogram, ConstantSignalPeaksAtDc) {
  AudioBuffer a;
  a.samples.assign(4096, 0.25f);
  const auto s = spectrogram(a);
  double wsum = 0.0;
  for (std::size_t i = 0; i < 256; ++i) wsum += oracle::tukey_closed_form(i, 257, 0.25);
  const double dc = (0.25 * wsum) * (0.25 * wsum);
  for (Eigen::Index c = 0; c < s.grid.cols(); ++c) {
    Eigen::Index arg = 0;
    s.grid.col(c).maxCoeff(&arg);
    EXPECT_EQ(arg, 0);
    EXPECT_NEAR(s.grid(0, c), dc, 1e-4 * dc);
  }
}

TEST(Spectrogram, SineArgmaxBin32) {
  const auto s = spectrogram(tone(5512.5, 44100));
  for (Eigen::Index c = 0; c < s.grid.cols(); ++c) {
    Eigen::Index arg = 0;
    s.grid.col(c).maxCoeff(&arg);
    ASSERT_EQ(arg, 32);
  }
}

TEST(Spectrogram, MatchesDirectDft) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-0.9f, 0.9f);
  AudioBuffer a;
  a.samples.resize(1000);
  for (auto& v : a.samples) v = u(rng);
  const auto s = spectrogram(a);
  const auto w = tukey_window(256, 0.25, WindowSymmetry::periodic);
  ASSERT_EQ(s.width(), 4u);
  for (std::size_t f = 0; f < s.width(); ++f) {
    std::vector<double> frame(a.samples.begin() + static_cast<long>(f * 224),
                              a.samples.begin() + static_cast<long>(f * 224 + 256));
    const auto ref = oracle::dft_power(frame, w);
    for (std::size_t k = 0; k < 129; ++k) {
      EXPECT_NEAR(s.grid(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(f)), ref[k], 1e-4 * (1.0 + ref[k]));
    }
  }
}

TEST(Spectrogram, DoublingAmplitudeQuadruplesPower) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> word(-8000, 8000);
  AudioBuffer a, b;
  a.samples.resize(3000);
  b.samples.resize(3000);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const int w = word(rng);
    a.samples[i] = static_cast<float>(w) / 32768.0f;
    b.samples[i] = static_cast<float>(2 * w) / 32768.0f;
  }
  const auto sa = spectrogram(a), sb = spectrogram(b);
  for (Eigen::Index i = 0; i < sa.grid.size(); ++i) {
    EXPECT_NEAR(sb.grid.data()[i], 4.0f * sa.grid.data()[i], 1e-4f * (1.0f + sb.grid.data()[i]));
    EXPECT_GE(sa.grid.data()[i], 0.0f);
  }
}

TEST(Spectrogram, FullScaleGrid) {
  AudioBuffer a;
  a.samples.assign(79'159'274, 0.0f);
  for (std::size_t i = 0; i < a.samples.size(); i += 97) a.samples[i] = 0.01f;
  const auto s = spectrogram(a);
  EXPECT_EQ(s.height(), 129u);
  EXPECT_EQ(s.width(), 353'389u);
}

TEST(Normalize, Examples) {
  GrayImage roi(1, 3);
  roi << 10, 15, 20;
  const auto n = normalize(roi);
  EXPECT_FLOAT_EQ(n(0, 1), 127.5f);
  EXPECT_EQ(n(0, 0), 0.0f);
  EXPECT_EQ(n(0, 2), 255.0f);
  GrayImage flat = GrayImage::Constant(4, 5, 3.5f);
  EXPECT_TRUE((normalize(flat).array() == 0.0f).all());
}

TEST(Normalize, RangeAndAffineInvariance) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<float> v(-100.0f, 100.0f), a(0.01f, 50.0f), b(-1000.0f, 1000.0f);
  for (int t = 0; t < 2000; ++t) {
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng() % 12), c = 1 + static_cast<Eigen::Index>(rng() % 12);
    GrayImage roi(r, c);
    for (Eigen::Index i = 0; i < roi.size(); ++i) roi.data()[i] = v(rng);
    const auto n = normalize(roi);
    EXPECT_GE(n.minCoeff(), 0.0f);
    EXPECT_LE(n.maxCoeff(), 255.0f);
    const float sa = a(rng), sb = b(rng);
    const GrayImage moved = (roi.array() * sa + sb).matrix();
    EXPECT_LE((normalize(moved) - n).cwiseAbs().maxCoeff(), 0.05f);
  }
}

TEST(Resize, IdentityAndCorners) {
  std::mt19937_64 rng(4);
  GrayImage in(7, 5);
  for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = static_cast<float>(rng() % 256);
  EXPECT_EQ(resize_bilinear(in, 7, 5), in);
  const auto out = resize_bilinear(in, 31, 17);
  EXPECT_EQ(out(0, 0), in(0, 0));
  EXPECT_EQ(out(0, 16), in(0, 4));
  EXPECT_EQ(out(30, 0), in(6, 0));
  EXPECT_EQ(out(30, 16), in(6, 4));
  // Align-corners sampling hits every input node when (out - 1) is a multiple of (in - 1).
  const auto up = resize_bilinear(in, 13, 9);
  for (Eigen::Index r = 0; r < 7; ++r) {
    for (Eigen::Index c = 0; c < 5; ++c) EXPECT_FLOAT_EQ(up(2 * r, 2 * c), in(r, c));
  }
  EXPECT_FLOAT_EQ(up(1, 0), 0.5f * (in(0, 0) + in(1, 0)));
}

namespace {
Spectrogram synthetic_spec(std::size_t rows, std::size_t cols) {
  Spectrogram s;
  s.grid.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < s.grid.size(); ++i) s.grid.data()[i] = static_cast<float>((i * 37) % 101);
  s.freq_axis_hz.resize(rows);
  for (std::size_t k = 0; k < rows; ++k) s.freq_axis_hz[k] = 22050.0 * static_cast<double>(k) / static_cast<double>(rows - 1);
  s.time_axis_s.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) s.time_axis_s[j] = 0.01 * static_cast<double>(j) + 0.005;
  s.source_duration_s = 0.01 * static_cast<double>(cols);
  return s;
}
}  // namespace

TEST(Encode, ExactSizeCropIsNormalizedFlip) {
  const auto s = synthetic_spec(129, 40);
  AnnotatedClip clip{0.0, 0.4, 0.0, 22050.0, 3, Taxon::bird};
  const auto e = encode_sample(s, clip, {.side = 40, .recording_duration_s = std::nullopt});
  EXPECT_EQ(e.image.height, 40u);
  // Full-range crop at native width: expect normalized grid rows reversed and resized to 40 rows.
  const GrayImage ref = resize_bilinear(normalize(s.grid).colwise().reverse(), 40, 40);
  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t c = 0; c < 40; ++c) {
      const float v = std::clamp(std::nearbyint(ref(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))), 0.0f, 255.0f);
      ASSERT_EQ(e.image.at(r, c, 0), static_cast<std::uint8_t>(v));
    }
  }
  EXPECT_EQ(e.aux[3], 1.0f);
  EXPECT_EQ(e.aux[2], 0.0f);
  EXPECT_EQ(e.label, 3);
}

TEST(Encode, IdentityResizeWhenCropMatchesSide) {
  const auto s = synthetic_spec(129, 60);
  // Rows 10..33 (24 bins) and columns 5..28 (24 frames).
  AnnotatedClip clip{0.05, 0.2855, s.freq_axis_hz[10], s.freq_axis_hz[33], 1, Taxon::mammal};
  const auto e = encode_sample(s, clip, {.side = 24, .recording_duration_s = std::nullopt});
  const GrayImage crop = s.grid.block(10, 5, 24, 24);
  const GrayImage ref = normalize(crop).colwise().reverse();
  for (std::size_t r = 0; r < 24; ++r) {
    for (std::size_t c = 0; c < 24; ++c) {
      const float v = std::nearbyint(ref(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      ASSERT_EQ(e.image.at(r, c, 0), static_cast<std::uint8_t>(v));
    }
  }
  EXPECT_EQ(e.image.at(0, 0, 0), static_cast<std::uint8_t>(std::nearbyint(ref(0, 0))));
  EXPECT_FLOAT_EQ(e.aux[0], static_cast<float>(0.05 / 0.6));
}

TEST(Encode, ChannelsBitIdenticalAndAuxBounded) {
  std::mt19937_64 rng(21);
  AudioBuffer a;
  a.samples.resize(44100);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  for (auto& v : a.samples) v = u(rng);
  const auto s = spectrogram(a);
  for (int t = 0; t < 50; ++t) {
    std::uniform_real_distribution<double> tb(0.0, 0.8), fb(0.0, 20000.0);
    const double b = tb(rng), lo = fb(rng);
    AnnotatedClip clip{b, b + 0.05 + 0.04 * (t % 3), lo, std::min(22050.0, lo + 500 + 50.0 * t), 1, Taxon::bird};
    const auto e = encode_sample(s, clip, {.side = 32, .recording_duration_s = std::nullopt});
    for (std::size_t i = 0; i < 32 * 32; ++i) {
      ASSERT_EQ(e.image.data[i * 3], e.image.data[i * 3 + 1]);
      ASSERT_EQ(e.image.data[i * 3], e.image.data[i * 3 + 2]);
    }
    for (float v : e.aux) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(Encode, OutOfBounds) {
  const auto s = synthetic_spec(129, 40);
  auto bad = [&](AnnotatedClip c) { return oracle::throws_code([&] { encode_sample(s, c); }, Errc::out_of_bounds); };
  EXPECT_TRUE(bad({-0.1, 0.2, 100, 200, 1, Taxon::bird}));
  EXPECT_TRUE(bad({0.1, 0.9, 100, 200, 1, Taxon::bird}));
  EXPECT_TRUE(bad({0.1, 0.2, 100, 23000, 1, Taxon::bird}));
  EXPECT_TRUE(bad({0.1, 0.2, -5, 200, 1, Taxon::bird}));
}

TEST(Image8, ReplicateRoundsAndClamps) {
  GrayImage g(1, 4);
  g << -3.0f, 0.5f, 254.6f, 300.0f;
  const auto img = replicate_channels(g);
  EXPECT_EQ(img.at(0, 0, 0), 0);
  EXPECT_EQ(img.at(0, 2, 1), 255);
  EXPECT_EQ(img.at(0, 3, 2), 255);
  EXPECT_EQ(channel_as_gray(img, 1)(0, 2), 255.0f);
}
