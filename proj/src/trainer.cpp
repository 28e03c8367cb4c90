#include "mjnd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/evaluator.hpp"
#include "mjnd/log.hpp"
#include "mjnd/torch_bridge.hpp"

namespace mjnd {
namespace {

namespace fs = std::filesystem;

constexpr int kCsvColumns = 11;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x4a4e44u};
  return std::mt19937_64(seq);
}

std::unique_ptr<torch::optim::Optimizer> make_optimizer(GeneratorModel& g, const TrainConfig& c) {
  auto params = g.net()->parameters();
  if (c.weight_decay_mode == WeightDecayMode::kCoupled) {
    return std::make_unique<torch::optim::Adam>(
        params, torch::optim::AdamOptions(c.learning_rate).weight_decay(c.weight_decay));
  }
  return std::make_unique<torch::optim::AdamW>(
      params, torch::optim::AdamWOptions(c.learning_rate).weight_decay(c.weight_decay));
}

torch::Tensor reference_batch(const LabelSet& refs, std::span<const std::uint32_t> ids) {
  auto out = torch::empty({static_cast<std::int64_t>(ids.size()), kNumClassifiers}, torch::kInt64);
  auto acc = out.accessor<std::int64_t, 2>();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!refs.contains(ids[i])) {
      throw PrerequisiteError("gen-labels", "no reference labels for image " + std::to_string(ids[i]));
    }
    const auto& row = refs.at(ids[i]);
    for (int n = 0; n < kNumClassifiers; ++n) acc[i][n] = row[n];
  }
  return out;
}

}  // namespace

std::string metrics_csv_header() { return "epoch,loss,loss1,loss2,loss3,rca,rca_1,rca_2,rca_3,rca_4,psnr"; }

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.epoch);
  for (double v : {r.loss, r.loss1, r.loss2, r.loss3, r.rca.acc, r.rca.acc_n[0], r.rca.acc_n[1], r.rca.acc_n[2],
                   r.rca.acc_n[3], r.psnr}) {
    row += ',';
    row += format_double(v);
  }
  return row;
}

std::vector<MetricsRecord> read_metrics_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read metrics log " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) {
    throw IoError("unexpected metrics header in " + file.string());
  }
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("malformed metrics row in " + file.string() + ": " + line);
      }
    }
    if (v.size() != kCsvColumns) throw IoError("malformed metrics row in " + file.string() + ": " + line);
    MetricsRecord r;
    r.epoch = static_cast<int>(v[0]);
    r.loss = v[1];
    r.loss1 = v[2];
    r.loss2 = v[3];
    r.loss3 = v[4];
    r.rca.acc = v[5];
    for (int n = 0; n < kNumClassifiers; ++n) r.rca.acc_n[n] = v[6 + n];
    r.psnr = v[10];
    out.push_back(r);
  }
  return out;
}

void write_metrics_csv(const fs::path& file, std::span<const MetricsRecord> records) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write metrics log " + file.string());
    out << metrics_csv_header() << '\n';
    for (const auto& r : records) out << metrics_csv_row(r) << '\n';
    if (!out) throw IoError("cannot write metrics log " + file.string());
  }
  fs::rename(tmp, file);
}

JndTrainer::JndTrainer(GeneratorModel& g, const TrainConfig& config)
    : g_(g), config_(config), optimizer_(make_optimizer(g, config)) {}

losses::LossTerms JndTrainer::batch_losses(std::span<ClassifierModel> classifiers, const torch::Tensor& x,
                                           const torch::Tensor& cam, const torch::Tensor& refs) {
  const auto e = g_.forward(x, cam);
  const auto distorted = x + e;
  std::vector<torch::Tensor> logits;
  logits.reserve(classifiers.size());
  for (auto& m : classifiers) logits.push_back(m.logits(distorted));
  return losses::combine(losses::cross_entropy_from_logits(logits, refs),
                         losses::magnitude_loss(cam, e, config_.q),
                         losses::spatial_loss(cam, e, config_.loss3_mode), config_.alpha, config_.beta, config_.q);
}

EpochLosses JndTrainer::train_epoch(const TrainingInputs& inputs, int epoch) {
  for (const auto& m : inputs.classifiers) {
    if (!m.frozen()) throw TrainingError("classifiers must be frozen before generator training");
  }
  const auto before = classifier_digests(inputs.classifiers);

  auto rng = epoch_rng(config_.seed, epoch);
  std::vector<std::size_t> order(inputs.split.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution flip(config_.flip_probability);

  g_.net()->train();
  EpochLosses sums;
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  std::vector<const PixelImage*> ptrs;
  std::vector<std::uint32_t> ids;
  std::vector<std::uint8_t> flips;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(order.size(), start + batch);
    ptrs.clear();
    ids.clear();
    flips.clear();
    for (std::size_t i = start; i < end; ++i) {
      const auto& rec = inputs.split.records[order[i]];
      ptrs.push_back(&rec);
      ids.push_back(rec.id);
      flips.push_back(flip(rng) ? 1 : 0);
    }
    const auto x = normalized_batch(ptrs, flips);
    auto cam = inputs.cams.gather(ids);
    const auto mask = torch::from_blob(flips.data(), {static_cast<std::int64_t>(flips.size()), 1, 1}, torch::kUInt8)
                          .to(torch::kBool);
    cam = torch::where(mask, cam.flip({2}), cam);
    const auto refs = reference_batch(inputs.refs, ids);

    auto terms = batch_losses(inputs.classifiers, x, cam, refs);
    const auto snapshot = terms.bundle();
    if (!std::isfinite(snapshot.total)) {
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(sums.batches + 1));
    }
    optimizer_->zero_grad();
    terms.total.backward();
    optimizer_->step();

    sums.loss += snapshot.total;
    sums.loss1 += snapshot.loss1;
    sums.loss2 += snapshot.loss2;
    sums.loss3 += snapshot.loss3;
    ++sums.batches;
  }
  if (classifier_digests(inputs.classifiers) != before) {
    throw TrainingError("classifier parameters changed during generator training");
  }
  if (sums.batches) {
    const auto n = static_cast<double>(sums.batches);
    sums.loss1 /= n;
    sums.loss2 /= n;
    sums.loss3 /= n;
    sums.loss = total_loss(sums.loss1, sums.loss2, sums.loss3, config_.alpha, config_.beta, config_.q).total;
  }
  return sums;
}

std::string JndTrainer::optimizer_state() {
  torch::serialize::OutputArchive archive;
  optimizer_->save(archive);
  std::ostringstream out;
  archive.save_to(out);
  return out.str();
}

void JndTrainer::load_optimizer_state(const std::string& bytes) {
  std::istringstream in(bytes);
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(in);
    optimizer_->load(archive);
  } catch (const c10::Error& e) {
    throw IoError(std::string("cannot restore optimizer state: ") + e.what_without_backtrace());
  }
}

std::vector<std::size_t> eval_indices(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("eval fraction must lie in (0,1]");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::floor(static_cast<double>(i + 1) * fraction) > std::floor(static_cast<double>(i) * fraction)) {
      out.push_back(i);
    }
  }
  return out;
}

MetricsRecord train_epoch(JndTrainer& trainer, const TrainingInputs& inputs, int epoch, bool full_eval) {
  const auto losses = trainer.train_epoch(inputs, epoch);
  std::vector<std::size_t> indices;
  if (!full_eval && trainer.config().eval_fraction < 1.0) {
    indices = eval_indices(inputs.split.size(), trainer.config().eval_fraction);
  }
  const auto eval = evaluate_jnd(inputs.classifiers, generator_source(trainer.generator(), inputs.cams), inputs.split,
                                 inputs.refs, indices);
  MetricsRecord r;
  r.epoch = epoch;
  r.loss = losses.loss;
  r.loss1 = losses.loss1;
  r.loss2 = losses.loss2;
  r.loss3 = losses.loss3;
  r.rca = eval.rca;
  r.psnr = eval.mean_psnr;
  return r;
}

TrainPaths train_paths(const fs::path& out_dir) {
  return {out_dir / "best.gen", out_dir / "final.gen", out_dir / "metrics.csv"};
}

TrainResult train(const TrainConfig& config, const TrainingInputs& inputs, const fs::path& out_dir,
                  const std::optional<fs::path>& resume, const nlohmann::json& header) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create " + out_dir.string());
  TrainResult result{train_paths(out_dir), {}};

  std::optional<GeneratorModel> g;
  std::string optimizer_bytes;
  int start_epoch = 1;
  double best_rca = -1.0;
  if (resume) {
    auto loaded = load_generator(*resume);
    if (to_json(loaded.model.config()) != to_json(config.generator)) {
      throw ConfigError("checkpoint " + resume->string() + " was trained with a different generator layout");
    }
    if (loaded.optimizer_state.empty()) {
      throw ArgumentError("checkpoint " + resume->string() + " holds no optimizer state; resume from final.gen");
    }
    const int done = loaded.header.value("epoch", 0);
    g.emplace(std::move(loaded.model));
    optimizer_bytes = std::move(loaded.optimizer_state);
    if (fs::exists(result.paths.metrics)) {
      for (const auto& r : read_metrics_csv(result.paths.metrics)) {
        if (r.epoch <= done) result.records.push_back(r);
      }
    }
    if (static_cast<int>(result.records.size()) != done) {
      throw IoError("metrics log " + result.paths.metrics.string() + " does not cover the " + std::to_string(done) +
                    " epochs recorded in " + resume->string());
    }
    for (const auto& r : result.records) best_rca = std::max(best_rca, r.rca.acc);
    start_epoch = done + 1;
    log_info("resuming after epoch ", done);
  } else {
    g.emplace(build_generator(config.generator));
  }

  JndTrainer trainer(*g, config);
  if (!optimizer_bytes.empty()) trainer.load_optimizer_state(optimizer_bytes);

  auto checkpoint_header = [&](int epoch) {
    nlohmann::json h = header.is_object() ? header : nlohmann::json::object();
    h["epoch"] = epoch;
    h["train_config"] = to_json(config);
    return h;
  };

  for (int epoch = start_epoch; epoch <= config.epochs; ++epoch) {
    const auto record = train_epoch(trainer, inputs, epoch, epoch == config.epochs);
    result.records.push_back(record);
    log_info("epoch ", epoch, "/", config.epochs, " loss ", record.loss, " (", record.loss1, ", ", record.loss2, ", ",
             record.loss3, ") rca ", record.rca.acc, " psnr ", record.psnr);
    if (record.rca.acc > best_rca) {
      best_rca = record.rca.acc;
      auto h = checkpoint_header(epoch);
      h["rca"] = record.rca.acc;
      save_generator(*g, result.paths.best, h);
    }
    save_generator(*g, result.paths.final_checkpoint, checkpoint_header(epoch), trainer.optimizer_state());
    write_metrics_csv(result.paths.metrics, result.records);
  }
  return result;
}

}  // namespace mjnd
