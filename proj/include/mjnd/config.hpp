#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mjnd/classifiers.hpp"
#include "mjnd/generator.hpp"
#include "mjnd/loss_types.hpp"

namespace mjnd {

enum class WeightDecayMode { kCoupled, kDecoupled };

std::string_view weight_decay_mode_name(WeightDecayMode mode);
WeightDecayMode parse_weight_decay_mode(std::string_view text);

struct TrainConfig {
  int batch_size = 50;
  double learning_rate = 1e-5;
  double weight_decay = 1e-3;
  /// kCoupled adds the L2 penalty to the gradient before the moment
  /// estimates; kDecoupled shrinks the weights directly.
  WeightDecayMode weight_decay_mode = WeightDecayMode::kCoupled;
  int epochs = 200;
  double alpha = 1.0;
  double beta = 1.0;
  double q = kDefaultQ;
  Loss3Mode loss3_mode = Loss3Mode::kMagnitude;
  double flip_probability = 0.5;
  /// Share of the training split scored after each epoch; the final epoch
  /// is always scored in full.
  double eval_fraction = 1.0;
  std::uint64_t seed = 0;
  GeneratorConfig generator;
};

struct ClassifierStageConfig {
  ClassifierOptions options;
  ClassifierTrainConfig train;
};

struct EvalConfig {
  std::uint64_t wgn_seed = 0;
  /// Images exported by `visualize`.
  int visual_count = 8;
};

struct PipelineConfig {
  /// Empty means "use the command line or the environment".
  std::string data_root;
  double subset_fraction = 1.0;
  std::uint64_t seed = 0;
  ClassifierStageConfig classifiers;
  TrainConfig train;
  EvalConfig eval;
};

/// Strict parse: every key is optional, unknown keys and wrongly typed
/// values are ConfigErrors, and absent keys keep their defaults. Seeds left
/// unset in a section are derived from the top-level seed.
PipelineConfig config_from_json(const nlohmann::json& j);
/// An empty file is the same as `{}`.
PipelineConfig load_config(const std::filesystem::path& file);
PipelineConfig parse_config_text(std::string_view text);

/// Every effective value.
nlohmann::json to_json(const PipelineConfig& c);
nlohmann::json to_json(const TrainConfig& c);
std::uint64_t config_digest(const PipelineConfig& c);

}  // namespace mjnd
