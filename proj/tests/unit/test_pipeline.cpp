#include "doctest_torch.hpp"

#include <fstream>
#include <sstream>

#include "mjnd/cli.hpp"
#include "mjnd/config.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/evaluator.hpp"
#include "mjnd/png.hpp"
#include "mjnd/torch_bridge.hpp"
#include "mjnd/trainer.hpp"
#include "../support/checks.hpp"
#include "test_support.hpp"
#include "torch_fixture.hpp"

using namespace mjnd;

namespace {

JndSource zero_source() {
  return [](const torch::Tensor& x, std::span<const std::uint32_t>) { return torch::zeros_like(x); };
}

JndSource constant_source(float v) {
  return [v](const torch::Tensor& x, std::span<const std::uint32_t>) { return torch::full_like(x, v); };
}

TrainConfig tiny_train_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = 1e-3;
  c.seed = 4;
  c.generator.encoder_widths = {4, 8};
  c.generator.decoder_widths = {4};
  c.generator.convs_per_stage = 1;
  c.generator.seed = 4;
  return c;
}

TrainingInputs inputs(test::TinyPipeline& p) { return TrainingInputs{p.classifiers, p.split, p.cams, p.refs}; }

int run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("differentiable losses agree with the scalar oracle") {
  const auto r = test::loss_equivalence(50, 21);
  CHECK(r.fixtures == 50);
  CHECK(r.loss1_probs <= 1e-6);
  CHECK(r.loss1_logits <= 1e-6);
  CHECK(r.loss2 <= 1e-6);
  CHECK(r.loss3 <= 1e-6);
  CHECK(r.loss3_signed <= 1e-6);
}

TEST_CASE("loss gradients match central differences") {
  const auto r = test::gradient_check(5, 22);
  CHECK(r.loss1 <= 1e-3);
  CHECK(r.loss2 <= 1e-3);
  CHECK(r.loss3 <= 1e-3);
}

TEST_CASE("clean images keep every reference label") {
  auto& p = test::tiny_pipeline();
  const auto e = evaluate_jnd(p.classifiers, zero_source(), p.split, p.refs);
  CHECK(e.rca.acc == 100.0);
  CHECK(e.count == p.split.size());
  CHECK(e.mean_psnr == 100.0);
  const auto w = wgn_baseline(p.classifiers, zero_source(), p.split, p.refs, 1);
  CHECK(w.wgn.acc == 100.0);
  const auto h = homogeneity_test(p.classifiers, constant_source(0.3f), p.split, p.refs);
  CHECK(h.by_step[0].acc == 100.0);
}

TEST_CASE("PSNR of a constant offset") {
  const auto x = torch::zeros({1, 3, 32, 32});
  // 16 levels is 16 / 127.5 normalized units.
  const auto psnr = psnr_batch(x, x + 16.0 / 127.5);
  CHECK(std::abs(psnr[0].item<double>() - 24.05) <= 0.01);
}

TEST_CASE("RMS-matched noise is reproducible per image") {
  const auto e = torch::rand({3, 3, 32, 32}) - 0.5;
  const std::vector<std::uint32_t> ids{5, 6, 7};
  const auto n1 = rms_matched_noise(e, ids, 9);
  const auto n2 = rms_matched_noise(e, ids, 9);
  CHECK(torch::equal(n1, n2));
  for (int b = 0; b < 3; ++b) {
    CHECK(n1[b].pow(2).mean().sqrt().item<double>() == doctest::Approx(e[b].pow(2).mean().sqrt().item<double>()).epsilon(1e-4));
  }
  const std::vector<std::uint32_t> one{6};
  CHECK(torch::allclose(rms_matched_noise(e.slice(0, 1, 2), one, 9)[0], n1[1]));
  CHECK(rms_matched_noise(torch::zeros_like(e), ids, 9).abs().max().item<double>() == 0.0);
}

TEST_CASE("spatial report follows CAM rank") {
  auto& p = test::tiny_pipeline();
  // Noise magnitude equal to 1 - cam puts the largest values on the least attended pixels.
  JndSource inverse = [&](const torch::Tensor& x, std::span<const std::uint32_t> ids) {
    return (1.0 - p.cams.gather(ids)).unsqueeze(1).expand_as(x).contiguous();
  };
  const auto r = spatial_distribution(inverse, p.split, p.cams);
  CHECK(r.count == p.split.size());
  CHECK(r.bottom_decile_mean > r.top_decile_mean);
}

TEST_CASE("visual export writes four rasters") {
  test::TempDir dir("mjnd-vis");
  ImageTensor x;
  x.values.assign(kValuesPerImage, 0.0f);
  CamMap c;
  c.height = c.width = kImageSize;
  c.values.assign(kPixelsPerImage, 1.0f);
  JndImage e;
  e.values.assign(kValuesPerImage, 0.0f);
  const auto paths = export_visuals(x, c, e, x, dir.path(), "img0");
  const auto jnd = read_png(paths.jnd);
  for (auto v : jnd.pixels) CHECK(v == 125);
  CHECK(std::filesystem::exists(paths.cam));
  CHECK(std::filesystem::exists(paths.original));
  CHECK(std::filesystem::exists(paths.distorted));
}

TEST_CASE("training lowers the loss, leaves classifiers intact and resumes exactly") {
  auto& p = test::tiny_pipeline();
  const auto before = classifier_digests(p.classifiers);
  test::TempDir a("mjnd-train-a");
  const auto full = train(tiny_train_config(4), inputs(p), a.path(), std::nullopt);
  REQUIRE(full.records.size() == 4);
  CHECK(full.records.back().loss < full.records.front().loss);
  CHECK(classifier_digests(p.classifiers) == before);
  for (const auto& r : full.records) {
    CHECK(r.loss == doctest::Approx(r.loss1 + r.loss2 + r.loss3).epsilon(1e-9));
  }

  test::TempDir b("mjnd-train-b");
  train(tiny_train_config(2), inputs(p), b.path(), std::nullopt);
  const auto resumed =
      train(tiny_train_config(4), inputs(p), b.path(), train_paths(b.path()).final_checkpoint);
  REQUIRE(resumed.records.size() == 4);
  const auto ga = load_generator(train_paths(a.path()).final_checkpoint);
  const auto gb = load_generator(train_paths(b.path()).final_checkpoint);
  CHECK(ga.model.digest() == gb.model.digest());
  CHECK(read_metrics_csv(full.paths.metrics).size() == 4);
  CHECK(metrics_csv_row(full.records.back()) == metrics_csv_row(resumed.records.back()));
}

TEST_CASE("cli exit codes") {
  std::string err;
  CHECK(run({"frobnicate"}, &err) == kExitUsage);
  CHECK(err.find("train-classifiers") != std::string::npos);
  CHECK(run({}) == kExitUsage);

  test::TempDir dir("mjnd-cli");
  const auto run_dir = (dir.path() / "run").string();
  const auto root = test::shared_archive().string();
  CHECK(run({"homogeneity", "--run-dir", run_dir, "--data-root", root}, &err) == kExitPrerequisite);
  CHECK(err.find("train-classifiers") != std::string::npos);

  {
    std::ofstream cfg(dir.path() / "bad.json");
    cfg << R"({"train": {"learning_rte": 0.1}})";
  }
  CHECK(run({"report", "--run-dir", run_dir, "--config", (dir.path() / "bad.json").string()}, &err) == kExitFailure);
  CHECK(err.find("learning_rte") != std::string::npos);
}
