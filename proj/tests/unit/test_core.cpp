#include "doctest_torch.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "mjnd/cam_map.hpp"
#include "mjnd/config.hpp"
#include "mjnd/container.hpp"
#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/jnd_image.hpp"
#include "mjnd/labels.hpp"
#include "mjnd/loss_types.hpp"
#include "mjnd/losses_oracle.hpp"
#include "mjnd/metrics.hpp"
#include "mjnd/png.hpp"
#include "test_support.hpp"

using namespace mjnd;

namespace {

CamMap constant_cam(int h, int w, float v) {
  CamMap c;
  c.height = h;
  c.width = w;
  c.values.assign(static_cast<std::size_t>(h) * w, v);
  return c;
}

CamMap random_cam(std::mt19937_64& rng, int h = kImageSize, int w = kImageSize) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  CamMap c = constant_cam(h, w, 0.0f);
  for (auto& v : c.values) v = u(rng);
  return c;
}

JndImage noise_image(int h, int w, float v) {
  JndImage e;
  e.height = h;
  e.width = w;
  e.values.assign(static_cast<std::size_t>(h) * w * kChannels, v);
  return e;
}

ImageTensor random_tensor(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  ImageTensor t;
  t.values.resize(kValuesPerImage);
  for (auto& v : t.values) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("normalize_min_max rescales and handles zero range") {
  std::vector<float> v{2.0f, 4.0f, 6.0f};
  normalize_min_max(v);
  CHECK(v[0] == 0.0f);
  CHECK(v[1] == doctest::Approx(0.5));
  CHECK(v[2] == 1.0f);
  std::vector<float> flat(5, 3.0f);
  normalize_min_max(flat);
  for (float x : flat) CHECK(x == 0.5f);
}

TEST_CASE("merge_cams arithmetic") {
  std::mt19937_64 rng(1);
  const CamMap m = random_cam(rng);
  std::vector<CamMap> same(4, m);
  CHECK(merge_cams(same).values == m.values);
  CHECK(merge_cams(same).source == "merged");

  std::vector<CamMap> quad;
  for (float v : {0.2f, 0.4f, 0.6f, 0.8f}) quad.push_back(constant_cam(2, 2, v));
  for (float x : merge_cams(quad).values) CHECK(x == doctest::Approx(0.5).epsilon(1e-7));

  CHECK_THROWS_AS(merge_cams(std::vector<CamMap>{}), ArgumentError);
  std::vector<CamMap> mismatched{constant_cam(2, 2, 0.0f), constant_cam(3, 2, 0.0f)};
  CHECK_THROWS_AS(merge_cams(mismatched), ArgumentError);
}

TEST_CASE("mean_attention") {
  CHECK(mean_attention(constant_cam(4, 4, 1.0f)) == 1.0);
  CHECK(mean_attention(constant_cam(4, 4, 0.0f)) == 0.0);
  CamMap c = constant_cam(2, 2, 0.0f);
  c.values[0] = 1.0f;
  CHECK(mean_attention(c) == doctest::Approx(0.25));
}

TEST_CASE("stack_inputs and unstack_inputs") {
  std::mt19937_64 rng(2);
  const ImageTensor x = random_tensor(rng);
  const CamMap c = random_cam(rng);
  const StackedInput s = stack_inputs(x, c);
  REQUIRE(s.values.size() == kPixelsPerImage * 4);
  for (std::size_t i = 0; i < kValuesPerImage; ++i) CHECK(s.values[i] == x.values[i]);
  for (std::size_t i = 0; i < kPixelsPerImage; ++i) {
    CHECK(s.values[kValuesPerImage + i] == doctest::Approx(2.0 * c.values[i] - 1.0));
  }
  const auto [x2, c2] = unstack_inputs(s);
  CHECK(x2.values == x.values);
  for (std::size_t i = 0; i < kPixelsPerImage; ++i) CHECK(c2.values[i] == doctest::Approx(c.values[i]).epsilon(1e-6));
  CHECK_THROWS_AS(stack_inputs(x, constant_cam(8, 8, 0.0f)), ArgumentError);
}

TEST_CASE("apply_jnd and scale_jnd") {
  std::mt19937_64 rng(3);
  const ImageTensor x = random_tensor(rng);
  JndImage zero = noise_image(kImageSize, kImageSize, 0.0f);
  CHECK(apply_jnd(x, zero).values == x.values);

  JndImage e = noise_image(kImageSize, kImageSize, 0.0f);
  std::uniform_real_distribution<float> u(-0.9f, 0.9f);
  for (auto& v : e.values) v = u(rng);
  const ImageTensor xh = apply_jnd(x, e);
  for (std::size_t i = 0; i < e.values.size(); ++i) CHECK(xh.values[i] == x.values[i] + e.values[i]);

  for (float v : scale_jnd(e, 0.0).values) CHECK(v == 0.0f);
  CHECK(scale_jnd(e, 1.0).values == e.values);
  const JndImage composed = scale_jnd(scale_jnd(e, 8.0 / 9.0), 7.0 / 8.0);
  const JndImage direct = scale_jnd(e, 7.0 / 9.0);
  for (std::size_t i = 0; i < e.values.size(); ++i) CHECK(std::abs(composed.values[i] - direct.values[i]) <= 1e-7);
  CHECK_THROWS_AS(scale_jnd(e, 1.5), ArgumentError);

  // Unclipped: values may leave [-1,1].
  ImageTensor bright;
  bright.values.assign(kValuesPerImage, 1.0f);
  CHECK(apply_jnd(bright, noise_image(kImageSize, kImageSize, 0.5f)).values[0] == 1.5f);
}

TEST_CASE("assign_label argmax and ties") {
  ProbVector p;
  p.probs = {0.1, 0.7, 0.2, 0, 0, 0, 0, 0, 0, 0};
  CHECK(assign_label(p) == 1);
  ProbVector uniform;
  uniform.probs.fill(0.1);
  CHECK(assign_label(uniform) == 0);
  ProbVector tie;
  tie.probs = {0, 0, 0.4, 0, 0, 0.4, 0.2, 0, 0, 0};
  CHECK(assign_label(tie) == 2);
}

TEST_CASE("label set persistence and digests") {
  LabelSet s;
  s.add(5, {1, 2, 3, 4});
  s.add(9, {0, 0, 9, 9});
  s.split_digest = 77;
  s.classifier_digests = {1, 2, 3, 4};
  s.run_id = "r";
  CHECK_THROWS_AS(s.add(5, {0, 0, 0, 0}), ArgumentError);
  CHECK(s.at(9)[2] == 9);

  test::TempDir dir("mjnd-labels");
  s.save(dir.path() / "l.lbl");
  const LabelSet t = LabelSet::load(dir.path() / "l.lbl");
  CHECK(t == s);
  CHECK(t.ids() == s.ids());
  CHECK(t.matches(77, {1, 2, 3, 4}));
  CHECK_FALSE(t.matches(77, {1, 2, 3, 5}));
  CHECK_FALSE(t.matches(78, {1, 2, 3, 4}));
}

TEST_CASE("psnr closed forms") {
  std::mt19937_64 rng(4);
  const ImageTensor x = random_tensor(rng);
  CHECK(psnr(x, x) == kPsnrCapDb);

  ImageTensor a;
  ImageTensor b;
  a.values.resize(kValuesPerImage);
  b.values.resize(kValuesPerImage);
  for (std::size_t i = 0; i < kValuesPerImage; ++i) {
    a.values[i] = normalize_value(static_cast<std::uint8_t>(100 + i % 50));
    b.values[i] = normalize_value(static_cast<std::uint8_t>(116 + i % 50));
  }
  const double expected = 10.0 * std::log10(255.0 * 255.0 / 256.0);
  CHECK(psnr(a, b) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(std::abs(psnr(a, b) - 24.05) <= 0.01);

  ImageTensor small;
  CHECK_THROWS_AS(psnr(a, small), ArgumentError);
}

TEST_CASE("psnr strictly decreases as noise is scaled up") {
  std::mt19937_64 rng(5);
  const ImageTensor x = random_tensor(rng);
  JndImage e = noise_image(kImageSize, kImageSize, 0.0f);
  std::normal_distribution<float> g(0.0f, 0.05f);
  for (auto& v : e.values) v = g(rng);
  double last = psnr(x, apply_jnd(x, e));
  for (double factor : {1.5, 2.0, 3.0, 5.0}) {
    JndImage big = e;
    for (auto& v : big.values) v = static_cast<float>(v * factor);
    const double now = psnr(x, apply_jnd(x, big));
    CHECK(now < last);
    last = now;
  }
}

TEST_CASE("rca from labels") {
  LabelSet refs;
  std::vector<std::uint32_t> ids;
  std::vector<LabelSet::Labels> same;
  std::vector<LabelSet::Labels> half;
  for (std::uint32_t i = 0; i < 10; ++i) {
    const LabelSet::Labels l{static_cast<std::uint8_t>(i % 10), 1, 2, 3};
    refs.add(i, l);
    ids.push_back(i);
    same.push_back(l);
    LabelSet::Labels h = l;
    if (i % 2 == 0) {
      for (auto& v : h) v = static_cast<std::uint8_t>((v + 1) % 10);
    }
    half.push_back(h);
  }
  const auto full = rca_from_labels(ids, same, refs);
  CHECK(full.acc == 100.0);
  CHECK(full.count == 10);
  const auto r = rca_from_labels(ids, half, refs);
  CHECK(r.acc == 50.0);
  for (double a : r.acc_n) CHECK(a == 50.0);

  // Order invariance.
  std::vector<std::uint32_t> rev(ids.rbegin(), ids.rend());
  std::vector<LabelSet::Labels> half_rev(half.rbegin(), half.rend());
  CHECK(rca_from_labels(rev, half_rev, refs).acc == r.acc);

  std::vector<std::uint32_t> bad{99};
  std::vector<LabelSet::Labels> one{{0, 0, 0, 0}};
  CHECK_THROWS_AS(rca_from_labels(bad, one, refs), ArgumentError);
}

TEST_CASE("oracle Loss1 examples") {
  std::vector<LabelSet::Labels> refs{{3, 3, 3, 3}, {7, 1, 0, 9}};
  std::array<std::vector<ProbVector>, kNumClassifiers> perfect;
  std::array<std::vector<ProbVector>, kNumClassifiers> uniform;
  std::array<std::vector<ProbVector>, kNumClassifiers> mixed;
  ProbVector flat;
  flat.probs.fill(0.1);
  for (int n = 0; n < kNumClassifiers; ++n) {
    for (const auto& r : refs) {
      ProbVector hot;
      hot.probs[r[n]] = 1.0;
      perfect[n].push_back(hot);
      uniform[n].push_back(flat);
      mixed[n].push_back(n < 2 ? hot : flat);
    }
  }
  CHECK(oracle::cross_entropy(perfect, refs) == doctest::Approx(0.0));
  CHECK(oracle::cross_entropy(uniform, refs) == doctest::Approx(std::log(10.0)));
  CHECK(oracle::cross_entropy(uniform, refs) == doctest::Approx(2.3026).epsilon(1e-4));
  CHECK(oracle::cross_entropy(mixed, refs) == doctest::Approx(1.1513).epsilon(1e-4));
}

TEST_CASE("oracle Loss2 examples") {
  const double q = kDefaultQ;
  CHECK(std::abs(oracle::magnitude_from_levels(0.5, 0.5, q)) < 1e-9);
  CHECK(oracle::magnitude_from_levels(0.3, 0.6, q) == doctest::Approx(std::log(1.25)));
  CHECK(oracle::magnitude_from_levels(0.3, 0.6, q) == doctest::Approx(0.2231).epsilon(1e-4));
  const double at_zero = oracle::magnitude_from_levels(0.7, 0.0, q);
  CHECK(std::isfinite(at_zero));
  CHECK(at_zero == doctest::Approx(std::log(0.49 / 1e-10 + 1.0)));
  CHECK(at_zero == doctest::Approx(22.31).epsilon(1e-3));

  // Levels through the image types: c = 0.5 everywhere gives N = 0.5.
  const CamMap c = constant_cam(kImageSize, kImageSize, 0.5f);
  const JndImage e = noise_image(kImageSize, kImageSize, -0.5f);
  CHECK(oracle::target_level(c) == doctest::Approx(0.5));
  CHECK(oracle::actual_level(e) == doctest::Approx(0.5));
  CHECK(std::abs(oracle::magnitude_loss(c, e, q)) < 1e-9);
}

TEST_CASE("oracle Loss2 grid is nonnegative and zero only on the diagonal") {
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const double n = i / 20.0;
      const double n0 = j / 20.0;
      const double v = oracle::magnitude_from_levels(n, n0, kDefaultQ);
      CHECK(v >= -1e-12);
      if (i == j) {
        CHECK(std::abs(v) <= 1e-9);
      } else {
        CHECK(v > 1e-9);
      }
    }
  }
}

TEST_CASE("oracle Loss3 examples") {
  const CamMap flat = constant_cam(kImageSize, kImageSize, 0.3f);
  CHECK(oracle::spatial_loss(flat, noise_image(kImageSize, kImageSize, 0.0f)) == 0.0);
  JndImage e = noise_image(kImageSize, kImageSize, 0.0f);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : e.values) v = u(rng);
  CHECK(oracle::spatial_loss(flat, e) == doctest::Approx(oracle::actual_level(e)).epsilon(1e-9));

  CamMap c = constant_cam(2, 2, 0.0f);
  c.values[0] = 1.0f;
  JndImage small = noise_image(2, 2, 0.1f);
  for (int ch = 0; ch < kChannels; ++ch) small.values[ch * 4] = ch == 1 ? -0.4f : 0.4f;
  const auto v = oracle::spatial_weights(c);
  CHECK(v[0] == doctest::Approx(0.4754).epsilon(1e-4));
  CHECK(v[1] == doctest::Approx(0.1749).epsilon(1e-3));
  CHECK(oracle::spatial_loss(c, small) == doctest::Approx(0.2426).epsilon(1e-3));
  const double e1 = std::exp(1.0);
  CHECK(oracle::spatial_loss(c, small) == doctest::Approx((e1 * 0.4 + 0.3) / (e1 + 3.0)));
  // Signed form sees the negative channel.
  CHECK(oracle::spatial_loss(c, small, Loss3Mode::kSigned) ==
        doctest::Approx((e1 * 0.4 / 3.0 + 0.3) / (e1 + 3.0)));
}

TEST_CASE("total_loss arithmetic") {
  CHECK(total_loss(1, 2, 3, 1, 1).total == 6.0);
  CHECK(total_loss(1, 2, 3, 0, 0).total == 1.0);
  const auto b = total_loss(0.1, 0.2, 0.3, 0.7, 1.3);
  CHECK(b.total == b.loss1 + b.alpha * b.loss2 + b.beta * b.loss3);
  CHECK_THROWS_AS(total_loss(1, 2, 3, -1, 1), ArgumentError);
  CHECK(parse_loss3_mode("signed") == Loss3Mode::kSigned);
  CHECK(loss3_mode_name(Loss3Mode::kMagnitude) == "magnitude");
  CHECK_THROWS_AS(parse_loss3_mode("abs"), ConfigError);
}

TEST_CASE("digest hex round trip") {
  Fnv1a h;
  h.update("abc");
  CHECK(from_hex(to_hex(h.value())) == h.value());
  CHECK(to_hex(0).size() == 16);
  CHECK_THROWS_AS(from_hex("xyz"), ArgumentError);
  Fnv1a other;
  other.update("abd");
  CHECK(other.value() != h.value());
}

TEST_CASE("container round trip and validation") {
  test::TempDir dir("mjnd-container");
  Container c;
  c.header = {{"k", 3}};
  c.payload = std::string("\0\1\2binary", 9);
  write_container(dir.path() / "a.bin", "MJNDTEST", c);
  const auto back = read_container(dir.path() / "a.bin", "MJNDTEST");
  CHECK(back.header == c.header);
  CHECK(back.payload == c.payload);
  CHECK(read_container_header(dir.path() / "a.bin", "MJNDTEST")["k"] == 3);
  CHECK_THROWS_AS(read_container(dir.path() / "a.bin", "MJNDOTHR"), IoError);
  CHECK_THROWS_AS(read_container(dir.path() / "missing.bin", "MJNDTEST"), IoError);
}

TEST_CASE("png round trip") {
  test::TempDir dir("mjnd-png");
  RasterImage img;
  img.height = 4;
  img.width = 5;
  img.channels = 3;
  for (int i = 0; i < 60; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 4));
  write_png(dir.path() / "x.png", img);
  const auto back = read_png(dir.path() / "x.png");
  CHECK(back.height == 4);
  CHECK(back.width == 5);
  CHECK(back.channels == 3);
  CHECK(back.pixels == img.pixels);
  CHECK_THROWS_AS(write_png(dir.path() / "no" / "such" / "dir" / "x.png", img), IoError);
}

TEST_CASE("empty config yields training defaults") {
  for (const char* text : {"", "{}", "  \n"}) {
    const PipelineConfig c = parse_config_text(text);
    CHECK(c.train.batch_size == 50);
    CHECK(c.train.learning_rate == 1e-5);
    CHECK(c.train.weight_decay == 1e-3);
    CHECK(c.train.weight_decay_mode == WeightDecayMode::kCoupled);
    CHECK(c.train.alpha == 1.0);
    CHECK(c.train.beta == 1.0);
    CHECK(c.train.q == 1e-10);
    CHECK(c.train.flip_probability == 0.5);
    CHECK(c.train.epochs == 200);
    CHECK(c.train.loss3_mode == Loss3Mode::kMagnitude);
    CHECK(c.subset_fraction == 1.0);
    CHECK(c.train.generator.encoder_widths == std::vector<int>({64, 128, 256}));
  }
}

TEST_CASE("config strictness") {
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"learning_rte": 0.1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"batch_size": "50"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"batch_size": 2.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": []})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"learning_rate": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"weight_decay_mode": "sometimes"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train": {"generator": {"depth": 3}}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
  try {
    parse_config_text(R"({"train": {"learning_rte": 0.1}})");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.learning_rte") != std::string::npos);
  }
}

TEST_CASE("config values, ablation and seeds") {
  const auto c = parse_config_text(R"({"seed": 9, "train": {"alpha": 0, "beta": 0, "learning_rate": 1e-4,
                                      "loss3_mode": "signed", "generator": {"encoder_widths": [8, 16],
                                      "decoder_widths": [8]}}, "eval": {"wgn_seed": 3}})");
  CHECK(c.train.alpha == 0.0);
  CHECK(c.train.beta == 0.0);
  CHECK(c.train.learning_rate == 1e-4);
  CHECK(c.train.loss3_mode == Loss3Mode::kSigned);
  CHECK(c.train.seed == 9);
  CHECK(c.train.generator.seed == 9);
  CHECK(c.classifiers.train.seed == 9);
  CHECK(c.eval.wgn_seed == 3);
  CHECK(c.train.generator.decoder_widths == std::vector<int>{8});

  // Effective values round-trip and digest deterministically.
  const auto again = config_from_json(to_json(c));
  CHECK(to_json(again) == to_json(c));
  CHECK(config_digest(again) == config_digest(c));
  CHECK(config_digest(parse_config_text("{}")) != config_digest(c));
}

TEST_CASE("load_config reads files") {
  test::TempDir dir("mjnd-config");
  {
    std::ofstream(dir.path() / "empty.json");
    std::ofstream(dir.path() / "bad.json") << R"({"train": {"learning_rte": 1}})";
  }
  CHECK(load_config(dir.path() / "empty.json").train.batch_size == 50);
  CHECK_THROWS_AS(load_config(dir.path() / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_config(dir.path() / "missing.json"), ConfigError);
}
