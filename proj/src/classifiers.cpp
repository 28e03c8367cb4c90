#include "mjnd/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mjnd/container.hpp"
#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/log.hpp"
#include "mjnd/torch_bridge.hpp"

namespace mjnd {
namespace {

namespace nn = torch::nn;
namespace fs = std::filesystem;

constexpr std::string_view kMagic = "MJNDCLSF";

nn::Conv2d conv(int in, int out, int kernel, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(false));
}

nn::Conv2d conv_bias(int in, int out, int kernel) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).padding(kernel / 2));
}

void conv_bn_relu(nn::Sequential& seq, int in, int out) {
  seq->push_back(conv(in, out, 3));
  seq->push_back(nn::BatchNorm2d(out));
  seq->push_back(nn::ReLU(nn::ReLUOptions(true)));
}

class BasicBlockImpl : public nn::Module {
 public:
  BasicBlockImpl(int in, int out, int stride)
      : conv1_(register_module("conv1", conv(in, out, 3, stride))),
        bn1_(register_module("bn1", nn::BatchNorm2d(out))),
        conv2_(register_module("conv2", conv(out, out, 3))),
        bn2_(register_module("bn2", nn::BatchNorm2d(out))) {
    if (stride != 1 || in != out) {
      shortcut_ = register_module(
          "shortcut", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)),
                                     nn::BatchNorm2d(out)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1_(conv1_(x)));
    y = bn2_(conv2_(y));
    return torch::relu(y + (shortcut_ ? shortcut_->forward(x) : x));
  }

 private:
  nn::Conv2d conv1_;
  nn::BatchNorm2d bn1_;
  nn::Conv2d conv2_;
  nn::BatchNorm2d bn2_;
  nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(BasicBlock);

// Bottleneck dense layer: BN-ReLU-1x1(4g)-BN-ReLU-3x3(g), output concatenated
// onto its input.
class DenseLayerImpl : public nn::Module {
 public:
  DenseLayerImpl(int in, int growth)
      : body_(register_module(
            "body", nn::Sequential(nn::BatchNorm2d(in), nn::ReLU(nn::ReLUOptions(true)),
                                   nn::Conv2d(nn::Conv2dOptions(in, 4 * growth, 1).bias(false)),
                                   nn::BatchNorm2d(4 * growth), nn::ReLU(nn::ReLUOptions(true)),
                                   conv(4 * growth, growth, 3)))) {}

  torch::Tensor forward(const torch::Tensor& x) { return torch::cat({x, body_->forward(x)}, 1); }

 private:
  nn::Sequential body_;
};
TORCH_MODULE(DenseLayer);

// Every stack ends at 8x8 so CAM has the same coarse resolution for all four.
std::pair<nn::Sequential, int> alexnet_features(int w) {
  nn::Sequential f;
  f->push_back(conv_bias(3, w, 5));
  f->push_back(nn::ReLU(nn::ReLUOptions(true)));
  f->push_back(nn::MaxPool2d(2));
  f->push_back(conv_bias(w, 2 * w, 5));
  f->push_back(nn::ReLU(nn::ReLUOptions(true)));
  f->push_back(nn::MaxPool2d(2));
  f->push_back(conv_bias(2 * w, 4 * w, 3));
  f->push_back(nn::ReLU(nn::ReLUOptions(true)));
  f->push_back(conv_bias(4 * w, 4 * w, 3));
  f->push_back(nn::ReLU(nn::ReLUOptions(true)));
  f->push_back(conv_bias(4 * w, 4 * w, 3));
  f->push_back(nn::ReLU(nn::ReLUOptions(true)));
  return {f, 4 * w};
}

std::pair<nn::Sequential, int> vgg_features(int w) {
  nn::Sequential f;
  conv_bn_relu(f, 3, w);
  conv_bn_relu(f, w, w);
  f->push_back(nn::MaxPool2d(2));
  conv_bn_relu(f, w, 2 * w);
  conv_bn_relu(f, 2 * w, 2 * w);
  f->push_back(nn::MaxPool2d(2));
  conv_bn_relu(f, 2 * w, 4 * w);
  conv_bn_relu(f, 4 * w, 4 * w);
  conv_bn_relu(f, 4 * w, 4 * w);
  return {f, 4 * w};
}

std::pair<nn::Sequential, int> resnet_features(int w) {
  nn::Sequential f;
  conv_bn_relu(f, 3, w);
  f->push_back(BasicBlock(w, w, 1));
  f->push_back(BasicBlock(w, w, 1));
  f->push_back(BasicBlock(w, 2 * w, 2));
  f->push_back(BasicBlock(2 * w, 2 * w, 1));
  f->push_back(BasicBlock(2 * w, 4 * w, 2));
  f->push_back(BasicBlock(4 * w, 4 * w, 1));
  return {f, 4 * w};
}

std::pair<nn::Sequential, int> densenet_features(int w) {
  constexpr int kLayersPerBlock = 4;
  const int growth = std::max(4, w / 2);
  nn::Sequential f;
  int channels = 2 * growth;
  f->push_back(conv(3, channels, 3));
  for (int block = 0; block < 3; ++block) {
    for (int l = 0; l < kLayersPerBlock; ++l) {
      f->push_back(DenseLayer(channels, growth));
      channels += growth;
    }
    if (block < 2) {
      const int reduced = channels / 2;
      f->push_back(nn::BatchNorm2d(channels));
      f->push_back(nn::ReLU(nn::ReLUOptions(true)));
      f->push_back(nn::Conv2d(nn::Conv2dOptions(channels, reduced, 1).bias(false)));
      f->push_back(nn::AvgPool2d(2));
      channels = reduced;
    }
  }
  f->push_back(nn::BatchNorm2d(channels));
  f->push_back(nn::ReLU(nn::ReLUOptions(true)));
  return {f, channels};
}

void save_with_meta(ClassifierModel& model, const fs::path& file) {
  Container c;
  c.header = {
      {"format_version", 1},
      {"arch_id", std::string(arch_id(model.arch()))},
      {"width", model.options().width},
      {"num_classes", kNumClasses},
      {"seed", model.meta.seed},
      {"dataset_digest", to_hex(model.meta.dataset_digest)},
      {"accuracy", model.meta.accuracy},
      {"epochs_trained", model.meta.epochs_trained},
      {"recipe", model.meta.recipe},
      {"run_id", model.meta.run_id},
      {"parameter_digest", to_hex(model.digest())},
      {"parameter_count", model.parameter_count()},
  };
  c.payload = serialize_module(*model.net());
  write_container(file, kMagic, c);
}

}  // namespace

std::string_view arch_id(Arch arch) {
  switch (arch) {
    case Arch::kAlexNet: return "alexnet-style";
    case Arch::kVgg: return "vgg-style";
    case Arch::kResNet: return "resnet-style";
    case Arch::kDenseNet: return "densenet-style";
  }
  return "unknown";
}

Arch parse_arch(std::string_view id) {
  for (Arch a : kAllArchs) {
    if (arch_id(a) == id) return a;
  }
  throw ConfigError("unknown arch id '" + std::string(id) +
                    "' (expected alexnet-style|vgg-style|resnet-style|densenet-style)");
}

CamNetImpl::CamNetImpl(nn::Sequential features, int feature_channels, int num_classes)
    : features_(register_module("features", std::move(features))),
      head_(register_module("head", nn::Linear(feature_channels, num_classes))),
      feature_channels_(feature_channels) {}

torch::Tensor CamNetImpl::features(const torch::Tensor& x) { return features_->forward(x); }

torch::Tensor CamNetImpl::classify(const torch::Tensor& feature_maps) {
  return head_(feature_maps.mean({2, 3}));
}

torch::Tensor CamNetImpl::forward(const torch::Tensor& x) { return classify(features(x)); }

ClassifierModel::ClassifierModel(Arch arch, ClassifierOptions options, CamNet net)
    : arch_(arch), options_(options), net_(std::move(net)) {}

std::int64_t ClassifierModel::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : net_->parameters()) n += p.numel();
  return n;
}

void ClassifierModel::freeze() {
  net_->eval();
  for (auto& p : net_->parameters()) p.set_requires_grad(false);
  frozen_ = true;
}

std::uint64_t ClassifierModel::digest() const { return module_digest(*net_); }

void check_image_batch(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != kChannels || x.size(2) != kImageSize || x.size(3) != kImageSize) {
    throw ArgumentError("expected a [B,3,32,32] image batch, got " + c10::str(x.sizes()));
  }
}

torch::Tensor ClassifierModel::logits(const torch::Tensor& x) {
  check_image_batch(x);
  return net_->forward(x);
}

torch::Tensor ClassifierModel::softmax(const torch::Tensor& x) {
  return logits(x).to(torch::kFloat64).softmax(1);
}

torch::Tensor ClassifierModel::feature_maps(const torch::Tensor& x) {
  check_image_batch(x);
  return net_->features(x);
}

torch::Tensor ClassifierModel::class_weights() const { return net_->head()->weight; }

ClassifierModel build_classifier(Arch arch, int num_classes, const ClassifierOptions& options,
                                 std::uint64_t seed) {
  if (num_classes != kNumClasses) {
    throw ConfigError("classifiers are built for 10 classes, got " + std::to_string(num_classes));
  }
  if (options.width < 2) throw ConfigError("classifier width must be at least 2");
  torch::manual_seed(seed);
  std::pair<nn::Sequential, int> stack{nullptr, 0};
  switch (arch) {
    case Arch::kAlexNet: stack = alexnet_features(options.width); break;
    case Arch::kVgg: stack = vgg_features(options.width); break;
    case Arch::kResNet: stack = resnet_features(options.width); break;
    case Arch::kDenseNet: stack = densenet_features(options.width); break;
  }
  ClassifierModel model(arch, options, CamNet(stack.first, stack.second, num_classes));
  model.meta.seed = seed;
  return model;
}

ProbVector predict_softmax(ClassifierModel& model, const ImageTensor& x) {
  if (x.height != kImageSize || x.width != kImageSize ||
      x.values.size() != kValuesPerImage) {
    throw ArgumentError("predict_softmax expects a normalized 32x32x3 image");
  }
  const auto probs = predict_softmax_batch(model, to_tensor(x).unsqueeze(0));
  ProbVector p;
  auto acc = probs.accessor<double, 2>();
  for (int k = 0; k < kNumClasses; ++k) p.probs[k] = acc[0][k];
  return p;
}

torch::Tensor predict_softmax_batch(ClassifierModel& model, const torch::Tensor& x) {
  torch::NoGradGuard no_grad;
  const bool was_training = model.net()->is_training();
  model.net()->eval();
  auto probs = model.softmax(x);
  if (was_training) model.net()->train();
  return probs;
}

double evaluate_accuracy(ClassifierModel& model, const DatasetSplit& split) {
  if (split.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<const PixelImage*> ptrs;
  for (std::size_t start = 0; start < split.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(split.size(), start + kInferenceChunk);
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&split.records[i]);
    const auto pred = predict_softmax_batch(model, normalized_batch(ptrs)).argmax(1);
    auto acc = pred.accessor<std::int64_t, 1>();
    for (std::size_t i = start; i < end; ++i) {
      correct += acc[static_cast<std::int64_t>(i - start)] == split.records[i].class_index ? 1 : 0;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(split.size());
}

fs::path pretrain_classifier(ClassifierModel& model, const DatasetSplit& train,
                             const DatasetSplit& validation, const ClassifierTrainConfig& config,
                             const fs::path& checkpoint, const std::string& run_id) {
  if (model.frozen()) throw ArgumentError("pretrain_classifier: model is frozen");
  if (train.size() == 0) throw ArgumentError("pretrain_classifier: empty training split");

  torch::manual_seed(config.seed);
  torch::optim::Adam optimizer(
      model.net()->parameters(),
      torch::optim::AdamOptions(config.learning_rate).weight_decay(config.weight_decay));

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution coin(config.flip_probability);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  model.meta.run_id = run_id;
  model.meta.dataset_digest = train.digest();
  model.meta.recipe = "adam lr=" + std::to_string(config.learning_rate) +
                      " wd=" + std::to_string(config.weight_decay) +
                      " batch=" + std::to_string(config.batch_size) +
                      " flip=" + std::to_string(config.flip_probability) +
                      " patience=" + std::to_string(config.patience);

  double best_acc = -1.0;
  std::string best_state;
  int since_best = 0;
  int epoch = 0;
  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    model.net()->train();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const PixelImage*> ptrs;
    std::vector<std::uint8_t> flips;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      ptrs.clear();
      flips.clear();
      std::vector<std::int64_t> targets;
      for (std::size_t i = start; i < end; ++i) {
        const auto& rec = train.records[order[i]];
        ptrs.push_back(&rec);
        flips.push_back(coin(rng) ? 1 : 0);
        targets.push_back(rec.class_index);
      }
      const auto x = normalized_batch(ptrs, flips);
      const auto y = torch::tensor(targets, torch::kInt64);
      optimizer.zero_grad();
      auto loss = torch::nn::functional::cross_entropy(model.net()->forward(x), y);
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        throw TrainingError(std::string(arch_id(model.arch())) + " pretraining diverged at epoch " +
                            std::to_string(epoch) + "; last good checkpoint kept at " +
                            checkpoint.string());
      }
      loss.backward();
      optimizer.step();
      loss_sum += value;
      ++batches;
    }
    const double acc = evaluate_accuracy(model, validation.size() ? validation : train);
    log_info(arch_id(model.arch()), " epoch ", epoch, " loss ", loss_sum / static_cast<double>(batches),
             " val-acc ", acc, "%");
    if (acc > best_acc) {
      best_acc = acc;
      best_state = serialize_module(*model.net());
      since_best = 0;
      model.meta.accuracy = acc;
      model.meta.epochs_trained = epoch;
      save_with_meta(model, checkpoint);
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  deserialize_module(*model.net(), best_state);
  model.freeze();
  save_with_meta(model, checkpoint);
  return checkpoint;
}

void save_classifier(ClassifierModel& model, const fs::path& file) { save_with_meta(model, file); }

ClassifierModel load_classifier(const fs::path& file) {
  const Container c = read_container(file, kMagic);
  try {
    const Arch arch = parse_arch(c.header.at("arch_id").get<std::string>());
    ClassifierOptions options;
    options.width = c.header.at("width").get<int>();
    const auto seed = c.header.at("seed").get<std::uint64_t>();
    ClassifierModel model = build_classifier(arch, c.header.at("num_classes").get<int>(), options, seed);
    deserialize_module(*model.net(), c.payload);
    model.meta.seed = seed;
    model.meta.dataset_digest = from_hex(c.header.at("dataset_digest").get<std::string>());
    model.meta.accuracy = c.header.at("accuracy").get<double>();
    model.meta.epochs_trained = c.header.value("epochs_trained", 0);
    model.meta.recipe = c.header.value("recipe", "");
    model.meta.run_id = c.header.value("run_id", "");
    if (to_hex(model.digest()) != c.header.at("parameter_digest").get<std::string>()) {
      throw IoError("parameter digest mismatch in " + file.string());
    }
    model.freeze();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt classifier checkpoint " + file.string() + ": " + e.what());
  }
}

std::array<std::uint64_t, kNumClassifiers> classifier_digests(std::span<ClassifierModel> models) {
  if (models.size() != kNumClassifiers) throw ArgumentError("expected four classifiers");
  std::array<std::uint64_t, kNumClassifiers> out{};
  for (int n = 0; n < kNumClassifiers; ++n) out[n] = models[n].digest();
  return out;
}

LabelSet generate_reference_labels(std::span<ClassifierModel> models, const DatasetSplit& split) {
  if (models.size() != kNumClassifiers) throw ArgumentError("reference labels need four classifiers");
  for (const auto& m : models) {
    if (!m.frozen()) throw ArgumentError("reference labels require frozen classifiers");
  }
  LabelSet labels;
  labels.split_digest = split.digest();
  labels.classifier_digests = classifier_digests(models);

  std::vector<const PixelImage*> ptrs;
  for (std::size_t start = 0; start < split.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(split.size(), start + kInferenceChunk);
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&split.records[i]);
    const auto x = normalized_batch(ptrs);
    std::array<torch::Tensor, kNumClassifiers> probs;
    for (int n = 0; n < kNumClassifiers; ++n) probs[n] = predict_softmax_batch(models[n], x);
    for (std::size_t i = start; i < end; ++i) {
      LabelSet::Labels row{};
      for (int n = 0; n < kNumClassifiers; ++n) {
        const auto r = probs[n][static_cast<std::int64_t>(i - start)].contiguous();
        row[n] = static_cast<std::uint8_t>(
            assign_label(std::span<const double>(r.data_ptr<double>(), kNumClasses)));
      }
      labels.add(split.records[i].id, row);
    }
  }
  return labels;
}

LabelSet load_or_generate_labels(const fs::path& file, std::span<ClassifierModel> models,
                                 const DatasetSplit& split, const std::string& run_id,
                                 bool* regenerated) {
  if (regenerated) *regenerated = false;
  const auto digests = classifier_digests(models);
  if (fs::exists(file)) {
    try {
      LabelSet cached = LabelSet::load(file);
      if (cached.matches(split.digest(), digests)) return cached;
      log_info("label cache ", file.string(), " is stale, regenerating");
    } catch (const IoError& e) {
      log_info("label cache unreadable (", e.what(), "), regenerating");
    }
  }
  LabelSet labels = generate_reference_labels(models, split);
  labels.run_id = run_id;
  labels.save(file);
  if (regenerated) *regenerated = true;
  return labels;
}

}  // namespace mjnd
