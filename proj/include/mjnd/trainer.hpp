#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mjnd/cam.hpp"
#include "mjnd/classifiers.hpp"
#include "mjnd/config.hpp"
#include "mjnd/generator.hpp"
#include "mjnd/losses.hpp"
#include "mjnd/metrics.hpp"

namespace mjnd {

struct MetricsRecord {
  int epoch = 0;
  double loss = 0.0;
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  RcaReport rca;
  double psnr = 0.0;
};

/// "epoch,loss,loss1,loss2,loss3,rca,rca_1,rca_2,rca_3,rca_4,psnr"
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);
/// Throws IoError on a missing file or a header that does not match.
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& file);
void write_metrics_csv(const std::filesystem::path& file, std::span<const MetricsRecord> records);

/// Everything a training run reads but never modifies.
struct TrainingInputs {
  std::span<ClassifierModel> classifiers;
  const DatasetSplit& split;
  const CamCache& cams;
  const LabelSet& refs;
};

/// Batch-mean losses averaged over one pass.
struct EpochLosses {
  double loss = 0.0;
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  std::size_t batches = 0;
};

/// Generator plus its optimizer. Only generator parameters are stepped.
class JndTrainer {
 public:
  JndTrainer(GeneratorModel& g, const TrainConfig& config);

  /// One shuffled, flip-augmented pass. The order and flips of epoch k depend
  /// only on (seed, k). Raises TrainingError on a non-finite loss or if any
  /// classifier parameter changes.
  EpochLosses train_epoch(const TrainingInputs& inputs, int epoch);

  /// Losses of one batch with gradients attached. x [B,3,32,32],
  /// cam [B,32,32], refs [B,4] int64.
  losses::LossTerms batch_losses(std::span<ClassifierModel> classifiers, const torch::Tensor& x,
                                 const torch::Tensor& cam, const torch::Tensor& refs);

  std::string optimizer_state();
  void load_optimizer_state(const std::string& bytes);

  GeneratorModel& generator() noexcept { return g_; }
  const TrainConfig& config() const noexcept { return config_; }

 private:
  GeneratorModel& g_;
  TrainConfig config_;
  std::unique_ptr<torch::optim::Optimizer> optimizer_;
};

/// Record indices scored after a non-final epoch: an evenly spaced
/// `fraction` of [0, n).
std::vector<std::size_t> eval_indices(std::size_t n, double fraction);

/// Training metrics of one epoch: losses from the pass, RCA and PSNR on the
/// clean training split (or its eval subset).
MetricsRecord train_epoch(JndTrainer& trainer, const TrainingInputs& inputs, int epoch, bool full_eval);

struct TrainPaths {
  std::filesystem::path best;
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics;
};

TrainPaths train_paths(const std::filesystem::path& out_dir);

struct TrainResult {
  TrainPaths paths;
  std::vector<MetricsRecord> records;
};

/// Runs config.epochs epochs (continuing after the last completed one when
/// resuming from a final checkpoint), appending one metrics row per epoch and
/// rewriting best.gen / final.gen. `header` is merged into every checkpoint.
TrainResult train(const TrainConfig& config, const TrainingInputs& inputs, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume, const nlohmann::json& header = {});

}  // namespace mjnd
