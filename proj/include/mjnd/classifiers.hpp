#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "mjnd/data.hpp"
#include "mjnd/labels.hpp"

namespace mjnd {

enum class Arch { kAlexNet, kVgg, kResNet, kDenseNet };

inline constexpr std::array<Arch, kNumClassifiers> kAllArchs{Arch::kAlexNet, Arch::kVgg,
                                                             Arch::kResNet, Arch::kDenseNet};

/// "alexnet-style", "vgg-style", "resnet-style", "densenet-style".
std::string_view arch_id(Arch arch);
/// Throws ConfigError on an unknown id.
Arch parse_arch(std::string_view id);

struct ClassifierOptions {
  /// Channel count of the first stage; later stages scale from it.
  int width = 64;
};

/// Convolutional feature stack followed by global average pooling and a
/// single linear layer. The same weights serve both as classifier (softmax
/// of the logits) and as CAM network (class weights over the feature maps).
class CamNetImpl : public torch::nn::Module {
 public:
  CamNetImpl(torch::nn::Sequential features, int feature_channels, int num_classes);

  /// Last convolutional feature maps, [B,K,h,w].
  torch::Tensor features(const torch::Tensor& x);
  /// Class logits, [B,num_classes].
  torch::Tensor forward(const torch::Tensor& x);
  /// Logits from precomputed feature maps.
  torch::Tensor classify(const torch::Tensor& feature_maps);

  torch::nn::Linear& head() { return head_; }
  const torch::nn::Linear& head() const { return head_; }
  int feature_channels() const noexcept { return feature_channels_; }

 private:
  torch::nn::Sequential features_{nullptr};
  torch::nn::Linear head_{nullptr};
  int feature_channels_;
};
TORCH_MODULE(CamNet);

/// Provenance stored in every classifier checkpoint.
struct ClassifierMeta {
  std::uint64_t seed = 0;
  std::uint64_t dataset_digest = 0;
  double accuracy = 0.0;
  int epochs_trained = 0;
  std::string recipe;
  std::string run_id;
};

/// A classifier S_n and its CAM read path C_n. Copies share the underlying
/// network (torch module handles are reference types).
class ClassifierModel {
 public:
  ClassifierModel(Arch arch, ClassifierOptions options, CamNet net);

  Arch arch() const noexcept { return arch_; }
  const ClassifierOptions& options() const noexcept { return options_; }
  bool frozen() const noexcept { return frozen_; }
  bool cam_ready() const noexcept { return true; }
  int feature_channels() const { return net_->feature_channels(); }
  std::int64_t parameter_count() const;

  /// Inference mode and no parameter gradients, permanently.
  void freeze();
  /// Digest of every parameter and buffer.
  std::uint64_t digest() const;

  /// x must be [B,3,32,32]. Gradients flow to x when it requires them.
  torch::Tensor logits(const torch::Tensor& x);
  /// Double-precision softmax, [B,10].
  torch::Tensor softmax(const torch::Tensor& x);
  torch::Tensor feature_maps(const torch::Tensor& x);
  /// Linear-layer weights, [10,K].
  torch::Tensor class_weights() const;

  CamNet& net() noexcept { return net_; }
  ClassifierMeta meta;

 private:
  Arch arch_;
  ClassifierOptions options_;
  CamNet net_;
  bool frozen_ = false;
};

/// Seeds torch's generator, then builds an initialized, trainable model.
ClassifierModel build_classifier(Arch arch, int num_classes, const ClassifierOptions& options,
                                 std::uint64_t seed);

/// Batch size of every inference pass over a split. Shared so clean images
/// see identical batches wherever they are classified.
inline constexpr std::size_t kInferenceChunk = 100;

/// Throws ArgumentError on a tensor that is not [B,3,32,32].
void check_image_batch(const torch::Tensor& x);

ProbVector predict_softmax(ClassifierModel& model, const ImageTensor& x);
/// Batch inference, [B,10] doubles.
torch::Tensor predict_softmax_batch(ClassifierModel& model, const torch::Tensor& x);

struct ClassifierTrainConfig {
  int max_epochs = 60;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;
  /// Stop after this many epochs without a validation improvement.
  int patience = 5;
  double flip_probability = 0.5;
  std::uint64_t seed = 0;
};

/// Percent of records whose predicted label equals the human annotation.
double evaluate_accuracy(ClassifierModel& model, const DatasetSplit& split);

/// Trains on human annotations with Adam until validation accuracy stops
/// improving, keeps the best epoch, persists it to `checkpoint` and freezes
/// the model. A NaN loss raises TrainingError; the last good checkpoint on
/// disk is left untouched.
std::filesystem::path pretrain_classifier(ClassifierModel& model, const DatasetSplit& train,
                                          const DatasetSplit& validation,
                                          const ClassifierTrainConfig& config,
                                          const std::filesystem::path& checkpoint,
                                          const std::string& run_id);

void save_classifier(ClassifierModel& model, const std::filesystem::path& file);
/// Loads and freezes.
ClassifierModel load_classifier(const std::filesystem::path& file);

/// l_n = M(S_n(x)) for every record and each of the four frozen models.
LabelSet generate_reference_labels(std::span<ClassifierModel> models, const DatasetSplit& split);

/// Reuses the label file at `file` only when its digests match the split and
/// models; otherwise regenerates and rewrites it.
LabelSet load_or_generate_labels(const std::filesystem::path& file,
                                 std::span<ClassifierModel> models, const DatasetSplit& split,
                                 const std::string& run_id, bool* regenerated = nullptr);

std::array<std::uint64_t, kNumClassifiers> classifier_digests(std::span<ClassifierModel> models);

}  // namespace mjnd
