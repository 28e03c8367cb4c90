#include "doctest_torch.hpp"

#include <set>

#include "mjnd/cam.hpp"
#include "mjnd/classifiers.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/generator.hpp"
#include "mjnd/torch_bridge.hpp"
#include "test_support.hpp"
#include "torch_fixture.hpp"

using namespace mjnd;

TEST_CASE("classifiers produce distributions and differ in structure") {
  const auto x = torch::rand({3, 3, 32, 32}) * 2 - 1;
  std::set<std::int64_t> counts;
  for (Arch a : kAllArchs) {
    auto m = build_classifier(a, kNumClasses, ClassifierOptions{4}, 1);
    m.freeze();
    const auto p = m.softmax(x);
    CHECK((p.sizes() == torch::IntArrayRef({3, 10})));
    CHECK((p.scalar_type() == torch::kFloat64));
    CHECK(torch::allclose(p.sum(1), torch::ones({3}, torch::kFloat64), 1e-9, 1e-9));
    CHECK(m.class_weights().size(1) == m.feature_channels());
    counts.insert(m.parameter_count());
  }
  CHECK(counts.size() == kAllArchs.size());
  CHECK_THROWS_AS(parse_arch("lenet"), ConfigError);
  CHECK(parse_arch("vgg-style") == Arch::kVgg);
}

TEST_CASE("classifier construction is seeded and batch inference matches single images") {
  auto a = build_classifier(Arch::kResNet, kNumClasses, ClassifierOptions{4}, 9);
  auto b = build_classifier(Arch::kResNet, kNumClasses, ClassifierOptions{4}, 9);
  auto c = build_classifier(Arch::kResNet, kNumClasses, ClassifierOptions{4}, 10);
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() != c.digest());
  a.freeze();
  const auto x = torch::rand({4, 3, 32, 32}) * 2 - 1;
  const auto batch = predict_softmax_batch(a, x);
  for (int i = 0; i < 4; ++i) {
    const auto single = predict_softmax(a, image_from_tensor(x[i], static_cast<std::uint32_t>(i)));
    for (int k = 0; k < kNumClasses; ++k) CHECK(single.probs[k] == doctest::Approx(batch[i][k].item<double>()).epsilon(1e-5));
  }
  CHECK_THROWS_AS(a.logits(torch::zeros({1, 3, 16, 16})), ArgumentError);
}

TEST_CASE("classifier checkpoints round-trip and load frozen") {
  test::TempDir dir("mjnd-ckpt");
  auto m = build_classifier(Arch::kDenseNet, kNumClasses, ClassifierOptions{4}, 2);
  m.meta.accuracy = 42.5;
  m.freeze();
  save_classifier(m, dir.path() / "d.ckpt");
  auto r = load_classifier(dir.path() / "d.ckpt");
  CHECK(r.frozen());
  CHECK(r.arch() == Arch::kDenseNet);
  CHECK(r.digest() == m.digest());
  CHECK(r.meta.accuracy == 42.5);
  const auto x = torch::rand({2, 3, 32, 32});
  CHECK(torch::equal(r.logits(x), m.logits(x)));
}

TEST_CASE("CAM equals the normalized class-weighted feature map") {
  auto m = build_classifier(Arch::kVgg, kNumClasses, ClassifierOptions{4}, 3);
  m.freeze();
  const auto x = torch::rand({2, 3, 32, 32}) * 2 - 1;
  const auto targets = torch::tensor({3, 7}, torch::kInt64);
  const auto cam = compute_cam_batch(m, x, targets);
  CHECK((cam.sizes() == torch::IntArrayRef({2, 32, 32})));
  CHECK(cam.min().item<double>() >= 0.0);
  CHECK(cam.max().item<double>() <= 1.0);

  torch::NoGradGuard no_grad;
  const auto f = m.feature_maps(x).to(torch::kFloat64);
  const auto w = m.class_weights().to(torch::kFloat64);
  for (int b = 0; b < 2; ++b) {
    auto raw = (w[targets[b].item<int64_t>()].view({-1, 1, 1}) * f[b]).sum(0, true).unsqueeze(0);
    raw = torch::nn::functional::interpolate(
              raw, torch::nn::functional::InterpolateFuncOptions().size(std::vector<int64_t>{32, 32}).mode(torch::kBilinear).align_corners(false))
              .squeeze();
    const auto expected = (raw - raw.min()) / (raw.max() - raw.min());
    CHECK(torch::allclose(cam[b].to(torch::kFloat64), expected, 1e-4, 1e-4));
  }
}

TEST_CASE("CAM degenerate maps and readiness checks") {
  const auto flat = normalize_min_max_batch(torch::full({1, 4, 4}, 3.0));
  CHECK(torch::allclose(flat, torch::full({1, 4, 4}, 0.5)));

  auto m = build_classifier(Arch::kAlexNet, kNumClasses, ClassifierOptions{4}, 4);
  const auto x = torch::zeros({1, 3, 32, 32});
  const auto t = torch::zeros({1}, torch::kInt64);
  CHECK_THROWS_AS(compute_cam_batch(m, x, t), ArgumentError);
  m.freeze();
  CHECK_THROWS_AS(compute_cam_batch(m, x, torch::full({1}, 10, torch::kInt64)), ArgumentError);
  m.net()->head() = torch::nn::Linear(m.feature_channels() + 1, kNumClasses);
  CHECK_THROWS_AS(compute_cam_batch(m, x, t), ConfigError);
}

TEST_CASE("merged CAM cache matches the mean of the four maps") {
  auto& p = test::tiny_pipeline();
  REQUIRE(p.cams.size() == p.split.size());
  const auto& rec = p.split.records[17];
  const auto x = normalized_batch(std::vector<const PixelImage*>{&rec});
  torch::Tensor sum = torch::zeros({32, 32});
  const auto& labels = p.refs.at(rec.id);
  for (int n = 0; n < kNumClassifiers; ++n) {
    sum += compute_cam_batch(p.classifiers[n], x, torch::tensor({static_cast<int64_t>(labels[n])}))[0];
  }
  CHECK(torch::allclose(p.cams.map(rec.id), sum / 4.0, 1e-6, 1e-6));

  test::TempDir dir("mjnd-cams");
  p.cams.save(dir.path() / "c.cam");
  const auto loaded = CamCache::load(dir.path() / "c.cam");
  CHECK(loaded.ids() == p.cams.ids());
  CHECK(torch::equal(loaded.map(rec.id), p.cams.map(rec.id)));
  CHECK(loaded.matches(p.split.digest(), classifier_digests(p.classifiers)));
}

TEST_CASE("generator output shape, bound and seeding") {
  GeneratorConfig c;
  c.encoder_widths = {4, 8};
  c.decoder_widths = {4};
  c.convs_per_stage = 2;
  c.seed = 5;
  auto g = build_generator(c);
  auto h = build_generator(c);
  CHECK(g.digest() == h.digest());
  c.seed = 6;
  CHECK(build_generator(c).digest() != g.digest());

  const auto x = torch::rand({2, 3, 32, 32}) * 2 - 1;
  const auto cam = torch::rand({2, 32, 32});
  const auto e = generate_jnd_batch(g, x, cam);
  CHECK((e.sizes() == torch::IntArrayRef({2, 3, 32, 32})));
  CHECK(e.abs().max().item<double>() < 1.0);
  CHECK_THROWS_AS(generate_jnd_batch(g, torch::zeros({1, 3, 16, 16}), torch::zeros({1, 16, 16})), ArgumentError);

  const auto stacked = stack_batch(x, cam);
  CHECK((stacked.sizes() == torch::IntArrayRef({2, 4, 32, 32})));
  CHECK(torch::allclose(stacked.select(1, 3), cam * 2 - 1));

  GeneratorConfig bad = c;
  bad.decoder_widths = {};
  CHECK_THROWS_AS(build_generator(bad), ConfigError);
  bad = c;
  bad.convs_per_stage = 0;
  CHECK_THROWS_AS(build_generator(bad), ConfigError);
}

TEST_CASE("generator checkpoints keep parameters, header and optimizer bytes") {
  test::TempDir dir("mjnd-gen");
  GeneratorConfig c;
  c.encoder_widths = {4, 8};
  c.decoder_widths = {4};
  auto g = build_generator(c);
  save_generator(g, dir.path() / "g.gen", {{"epoch", 3}}, "opaque");
  const auto loaded = load_generator(dir.path() / "g.gen");
  CHECK(loaded.model.config() == c);
  CHECK(loaded.header.at("epoch") == 3);
  CHECK(loaded.optimizer_state == "opaque");
  CHECK(loaded.model.digest() == g.digest());
}
