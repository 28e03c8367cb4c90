#include "mjnd/generator.hpp"

#include "mjnd/container.hpp"
#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/torch_bridge.hpp"

namespace mjnd {
namespace {

namespace nn = torch::nn;
namespace fs = std::filesystem;

constexpr std::string_view kMagic = "MJNDGENR";

void validate(const GeneratorConfig& c) {
  if (c.encoder_widths.empty()) throw ConfigError("generator needs at least one encoder stage");
  for (int w : c.encoder_widths) {
    if (w <= 0) throw ConfigError("generator widths must be positive");
  }
  for (int w : c.decoder_widths) {
    if (w <= 0) throw ConfigError("generator widths must be positive");
  }
  const auto pools = c.encoder_widths.size() - 1;
  if ((kImageSize >> pools) << pools != kImageSize || (kImageSize >> pools) == 0) {
    throw ConfigError("generator encoder pools 32x32 below 1x1");
  }
  if (c.decoder_widths.size() != pools) {
    int out = kImageSize >> pools;
    out <<= c.decoder_widths.size();
    throw ConfigError("generator stack restores " + std::to_string(out) + "x" + std::to_string(out) +
                      " instead of 32x32: " + std::to_string(pools) + " pooling stages but " +
                      std::to_string(c.decoder_widths.size()) + " stride-2 deconvolutions");
  }
  if (c.convs_per_stage < 1) throw ConfigError("convs_per_stage must be at least 1");
  if (!(c.output_init_scale > 0.0)) throw ConfigError("output_init_scale must be positive");
}

}  // namespace

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"encoder_widths", c.encoder_widths},
          {"decoder_widths", c.decoder_widths},
          {"convs_per_stage", c.convs_per_stage},
          {"output_init_scale", c.output_init_scale},
          {"seed", c.seed}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
    c.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
    c.decoder_widths = j.at("decoder_widths").get<std::vector<int>>();
    c.convs_per_stage = j.at("convs_per_stage").get<int>();
    c.output_init_scale = j.at("output_init_scale").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed generator config: ") + e.what());
  }
  return c;
}

JndNetImpl::JndNetImpl(const GeneratorConfig& config) {
  nn::Sequential encoder;
  int channels = kChannels + 1;
  for (std::size_t i = 0; i < config.encoder_widths.size(); ++i) {
    if (i > 0) encoder->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2)));
    const int width = config.encoder_widths[i];
    for (int k = 0; k < config.convs_per_stage; ++k) {
      encoder->push_back(nn::Conv2d(nn::Conv2dOptions(channels, width, 3).stride(1).padding(1).bias(false)));
      encoder->push_back(nn::BatchNorm2d(width));
      encoder->push_back(nn::ReLU(nn::ReLUOptions(true)));
      channels = width;
    }
  }
  nn::Sequential decoder;
  for (int width : config.decoder_widths) {
    decoder->push_back(nn::ConvTranspose2d(
        nn::ConvTranspose2dOptions(channels, width, 4).stride(2).padding(1).bias(false)));
    decoder->push_back(nn::BatchNorm2d(width));
    decoder->push_back(nn::ReLU(nn::ReLUOptions(true)));
    channels = width;
  }
  encoder_ = register_module("encoder", encoder);
  decoder_ = register_module("decoder", decoder);
  output_ = register_module("output", nn::Conv2d(nn::Conv2dOptions(channels, kChannels, 3).padding(1)));
  if (config.output_init_scale != 1.0) {
    torch::NoGradGuard no_grad;
    output_->weight.mul_(config.output_init_scale);
    output_->bias.mul_(config.output_init_scale);
  }
}

torch::Tensor JndNetImpl::forward(const torch::Tensor& stacked) {
  return kOutputBound * torch::tanh(output_(decoder_->forward(encoder_->forward(stacked))));
}

GeneratorModel::GeneratorModel(GeneratorConfig config, JndNet net)
    : config_(std::move(config)), net_(std::move(net)) {}

std::uint64_t GeneratorModel::digest() const { return module_digest(*net_); }

std::int64_t GeneratorModel::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : net_->parameters()) n += p.numel();
  return n;
}

torch::Tensor stack_batch(const torch::Tensor& x, const torch::Tensor& cam) {
  if (x.dim() != 4 || x.size(1) != kChannels || cam.dim() != 3 || cam.size(0) != x.size(0) ||
      cam.size(1) != x.size(2) || cam.size(2) != x.size(3)) {
    throw ArgumentError("stack_batch: expected x [B,3,H,W] and cam [B,H,W], got " + c10::str(x.sizes()) +
                        " and " + c10::str(cam.sizes()));
  }
  return torch::cat({x, (2.0 * cam - 1.0).unsqueeze(1).to(x.dtype())}, 1);
}

torch::Tensor GeneratorModel::forward(const torch::Tensor& x, const torch::Tensor& cam) {
  if (x.size(2) != kImageSize || x.size(3) != kImageSize) {
    throw ArgumentError("generator expects 32x32 inputs");
  }
  return net_->forward(stack_batch(x, cam));
}

GeneratorModel build_generator(const GeneratorConfig& config) {
  validate(config);
  torch::manual_seed(config.seed);
  return GeneratorModel(config, JndNet(config));
}

torch::Tensor generate_jnd_batch(GeneratorModel& g, const torch::Tensor& x, const torch::Tensor& cam) {
  torch::NoGradGuard no_grad;
  const bool was_training = g.net()->is_training();
  g.net()->eval();
  auto e = g.forward(x, cam);
  if (was_training) g.net()->train();
  return e;
}

JndImage generate_jnd(GeneratorModel& g, const ImageTensor& x, const CamMap& c) {
  if (x.height != c.height || x.width != c.width) {
    throw ArgumentError("generate_jnd: image and CAM dimensions differ");
  }
  const auto e = generate_jnd_batch(g, to_tensor(x).unsqueeze(0), to_tensor(c).unsqueeze(0));
  return jnd_from_tensor(e[0], x.id);
}

void save_generator(GeneratorModel& g, const fs::path& file, nlohmann::json extra,
                    std::string_view optimizer_state) {
  Container c;
  c.header = extra.is_object() ? std::move(extra) : nlohmann::json::object();
  c.header["format_version"] = 1;
  c.header["generator"] = to_json(g.config());
  c.header["parameter_digest"] = to_hex(g.digest());
  c.payload = serialize_module(*g.net());
  c.header["module_bytes"] = c.payload.size();
  c.header["optimizer_bytes"] = optimizer_state.size();
  c.payload.append(optimizer_state);
  write_container(file, kMagic, c);
}

LoadedGenerator load_generator(const fs::path& file) {
  Container c = read_container(file, kMagic);
  GeneratorModel g = build_generator(generator_config_from_json(c.header.at("generator")));
  const auto module_bytes = c.header.value("module_bytes", c.payload.size());
  if (module_bytes > c.payload.size()) throw IoError("truncated generator checkpoint " + file.string());
  deserialize_module(*g.net(), c.payload.substr(0, module_bytes));
  if (to_hex(g.digest()) != c.header.value("parameter_digest", "")) {
    throw IoError("parameter digest mismatch in " + file.string());
  }
  std::string optimizer_state = c.payload.substr(module_bytes);
  return {std::move(g), std::move(c.header), std::move(optimizer_state)};
}

}  // namespace mjnd
