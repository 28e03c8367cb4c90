#include "mjnd/labels.hpp"

#include <cstring>

#include "mjnd/container.hpp"
#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"

namespace mjnd {
namespace {
constexpr std::string_view kMagic = "MJNDLBLS";
}

int assign_label(std::span<const double> probs) {
  if (probs.empty()) throw ArgumentError("assign_label: empty probability vector");
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

int assign_label(const ProbVector& p) { return assign_label(std::span<const double>(p.probs)); }

void LabelSet::add(std::uint32_t id, const Labels& labels) {
  for (auto l : labels) {
    if (l >= kNumClasses) throw ArgumentError("label " + std::to_string(l) + " outside [0,9]");
  }
  if (!index_.emplace(id, ids_.size()).second) {
    throw ArgumentError("duplicate image id " + std::to_string(id) + " in label set");
  }
  ids_.push_back(id);
  rows_.push_back(labels);
}

const LabelSet::Labels& LabelSet::at(std::uint32_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ArgumentError("image id " + std::to_string(id) + " has no reference labels");
  return rows_[it->second];
}

bool LabelSet::matches(std::uint64_t split,
                       const std::array<std::uint64_t, kNumClassifiers>& digests) const {
  return split_digest == split && classifier_digests == digests;
}

void LabelSet::save(const std::filesystem::path& file) const {
  Container c;
  c.header["split_digest"] = to_hex(split_digest);
  auto& digests = c.header["classifier_digests"] = nlohmann::json::array();
  for (auto d : classifier_digests) digests.push_back(to_hex(d));
  c.header["count"] = ids_.size();
  c.header["run_id"] = run_id;
  c.payload.resize(ids_.size() * (sizeof(std::uint32_t) + kNumClassifiers));
  char* p = c.payload.data();
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    std::memcpy(p, &ids_[i], sizeof(std::uint32_t));
    p += sizeof(std::uint32_t);
    std::memcpy(p, rows_[i].data(), kNumClassifiers);
    p += kNumClassifiers;
  }
  write_container(file, kMagic, c);
}

LabelSet LabelSet::load(const std::filesystem::path& file) {
  const Container c = read_container(file, kMagic);
  LabelSet out;
  try {
    out.split_digest = from_hex(c.header.at("split_digest").get<std::string>());
    const auto& digests = c.header.at("classifier_digests");
    for (int n = 0; n < kNumClassifiers; ++n) {
      out.classifier_digests[n] = from_hex(digests.at(n).get<std::string>());
    }
    out.run_id = c.header.value("run_id", "");
    const auto count = c.header.at("count").get<std::size_t>();
    constexpr std::size_t row = sizeof(std::uint32_t) + kNumClassifiers;
    if (c.payload.size() != count * row) throw IoError("label payload size mismatch in " + file.string());
    const char* p = c.payload.data();
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t id;
      Labels labels;
      std::memcpy(&id, p, sizeof id);
      std::memcpy(labels.data(), p + sizeof id, kNumClassifiers);
      p += row;
      out.add(id, labels);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt label set " + file.string() + ": " + e.what());
  }
  return out;
}

}  // namespace mjnd
