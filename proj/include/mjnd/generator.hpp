#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mjnd/cam_map.hpp"
#include "mjnd/data.hpp"
#include "mjnd/jnd_image.hpp"

namespace mjnd {

/// Layer stack of the convolutional autoencoder. Encoder stage i is
/// convs_per_stage x (conv3x3(pad 1) -> BN -> ReLU) with a 2x2 max pool
/// between consecutive stages; each decoder entry is a stride-2 transposed conv -> BN -> ReLU.
/// The decoder must undo every pool so the output is 32x32 again.
struct GeneratorConfig {
  std::vector<int> encoder_widths{64, 128, 256};
  std::vector<int> decoder_widths{128, 64};
  int convs_per_stage = 3;
  /// Multiplier on the randomly initialized output-layer weights; 1 keeps
  /// the stock initialization.
  double output_init_scale = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

nlohmann::json to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

/// Keeps float tanh saturation strictly inside (-1,1).
inline constexpr double kOutputBound = 1.0 - 1e-6;

class JndNetImpl : public torch::nn::Module {
 public:
  explicit JndNetImpl(const GeneratorConfig& config);
  /// [B,4,32,32] stacked input -> [B,3,32,32] noise in (-1,1).
  torch::Tensor forward(const torch::Tensor& stacked);

 private:
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
  torch::nn::Conv2d output_{nullptr};
};
TORCH_MODULE(JndNet);

class GeneratorModel {
 public:
  GeneratorModel(GeneratorConfig config, JndNet net);

  const GeneratorConfig& config() const noexcept { return config_; }
  JndNet& net() noexcept { return net_; }
  std::uint64_t digest() const;
  std::int64_t parameter_count() const;

  /// e for a batch: x [B,3,32,32], cam [B,32,32] in [0,1]. Runs in the
  /// network's current mode and records gradients when enabled.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cam);

 private:
  GeneratorConfig config_;
  JndNet net_;
};

/// Seeds torch's generator from config.seed and builds a randomly
/// initialized model. A stack that cannot restore 32x32 is a ConfigError.
GeneratorModel build_generator(const GeneratorConfig& config);

/// [B,3,H,W] + [B,H,W] -> [B,4,H,W] with the CAM rescaled to [-1,1].
torch::Tensor stack_batch(const torch::Tensor& x, const torch::Tensor& cam);

/// Inference-mode batch generation (eval mode, no gradient).
torch::Tensor generate_jnd_batch(GeneratorModel& g, const torch::Tensor& x, const torch::Tensor& cam);

JndImage generate_jnd(GeneratorModel& g, const ImageTensor& x, const CamMap& c);

/// Parameters plus a caller-supplied JSON header (config and provenance are
/// added automatically). A non-empty optimizer state is stored after the
/// parameters so training can resume.
void save_generator(GeneratorModel& g, const std::filesystem::path& file, nlohmann::json extra = {},
                    std::string_view optimizer_state = {});

struct LoadedGenerator {
  GeneratorModel model;
  nlohmann::json header;
  /// Empty unless the checkpoint was saved with optimizer state.
  std::string optimizer_state;
};
LoadedGenerator load_generator(const std::filesystem::path& file);

}  // namespace mjnd
