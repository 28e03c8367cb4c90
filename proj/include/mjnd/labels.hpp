#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mjnd/data.hpp"

namespace mjnd {

inline constexpr int kNumClassifiers = 4;

/// Softmax output over the ten classes.
struct ProbVector {
  std::array<double, kNumClasses> probs{};
};

/// Index of the largest probability; ties go to the lowest index.
int assign_label(const ProbVector& p);
int assign_label(std::span<const double> probs);

/// Classifier-generated reference labels: for each image id, the label each
/// of the four frozen classifiers assigns to the clean image.
class LabelSet {
 public:
  using Labels = std::array<std::uint8_t, kNumClassifiers>;

  void add(std::uint32_t id, const Labels& labels);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::uint32_t>& ids() const noexcept { return ids_; }
  const Labels& at(std::uint32_t id) const;
  bool contains(std::uint32_t id) const { return index_.contains(id); }
  /// Labels in insertion order, parallel to ids().
  const std::vector<Labels>& rows() const noexcept { return rows_; }

  std::uint64_t split_digest = 0;
  std::array<std::uint64_t, kNumClassifiers> classifier_digests{};
  std::string run_id;

  /// Binary container: magic, JSON header, then (id, 4 labels) rows.
  void save(const std::filesystem::path& file) const;
  static LabelSet load(const std::filesystem::path& file);

  /// True when the stored digests match the given split and classifiers.
  bool matches(std::uint64_t split_digest,
               const std::array<std::uint64_t, kNumClassifiers>& classifier_digests) const;

  friend bool operator==(const LabelSet& a, const LabelSet& b) {
    return a.ids_ == b.ids_ && a.rows_ == b.rows_ && a.split_digest == b.split_digest &&
           a.classifier_digests == b.classifier_digests;
  }

 private:
  std::vector<std::uint32_t> ids_;
  std::vector<Labels> rows_;
  std::unordered_map<std::uint32_t, std::size_t> index_;
};

}  // namespace mjnd
