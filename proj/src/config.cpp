#include "mjnd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"

namespace mjnd {
namespace {

using nlohmann::json;

// Walks one JSON object, consuming known keys and rejecting the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void read(const std::string& key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) mismatch(key, "an integer");
      out = v->get<int>();
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        mismatch(key, "a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) mismatch(key, "a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) mismatch(key, "a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, std::vector<int>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) mismatch(key, "an array of integers");
      std::vector<int> values;
      for (const auto& item : *v) {
        if (!item.is_number_integer()) mismatch(key, "an array of integers");
        values.push_back(item.get<int>());
      }
      out = std::move(values);
    }
  }
  Section child(const std::string& key) {
    static const json empty = json::object();
    const json* v = take(key);
    return Section(v ? *v : empty, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
    }
  }

 private:
  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  [[noreturn]] void mismatch(const std::string& key, const std::string& expected) const {
    throw ConfigError("config key '" + qualified(key) + "' must be " + expected);
  }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : "config section '" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void validate(const PipelineConfig& c) {
  require(c.subset_fraction > 0.0 && c.subset_fraction <= 1.0, "subset_fraction must lie in (0,1]");
  const auto& ct = c.classifiers.train;
  require(c.classifiers.options.width > 0, "classifiers.width must be positive");
  require(ct.max_epochs > 0, "classifiers.max_epochs must be positive");
  require(ct.batch_size > 0, "classifiers.batch_size must be positive");
  require(ct.learning_rate > 0.0, "classifiers.learning_rate must be positive");
  require(ct.weight_decay >= 0.0, "classifiers.weight_decay must be non-negative");
  require(ct.patience > 0, "classifiers.patience must be positive");
  require(ct.flip_probability >= 0.0 && ct.flip_probability <= 1.0, "classifiers.flip_probability must lie in [0,1]");
  const auto& t = c.train;
  require(t.batch_size > 0, "train.batch_size must be positive");
  require(t.learning_rate > 0.0, "train.learning_rate must be positive");
  require(t.weight_decay >= 0.0, "train.weight_decay must be non-negative");
  require(t.epochs > 0, "train.epochs must be positive");
  require(t.alpha >= 0.0 && t.beta >= 0.0, "train.alpha and train.beta must be non-negative");
  require(t.q > 0.0, "train.q must be positive");
  require(t.flip_probability >= 0.0 && t.flip_probability <= 1.0, "train.flip_probability must lie in [0,1]");
  require(t.eval_fraction > 0.0 && t.eval_fraction <= 1.0, "train.eval_fraction must lie in (0,1]");
  require(c.eval.visual_count >= 0, "eval.visual_count must be non-negative");
}

}  // namespace

std::string_view weight_decay_mode_name(WeightDecayMode mode) {
  return mode == WeightDecayMode::kCoupled ? "coupled" : "decoupled";
}

WeightDecayMode parse_weight_decay_mode(std::string_view text) {
  if (text == "coupled") return WeightDecayMode::kCoupled;
  if (text == "decoupled") return WeightDecayMode::kDecoupled;
  throw ConfigError("unknown weight_decay_mode '" + std::string(text) + "' (expected coupled or decoupled)");
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  Section root(j, "");
  root.read("data_root", c.data_root);
  root.read("subset_fraction", c.subset_fraction);
  root.read("seed", c.seed);

  {
    Section s = root.child("classifiers");
    auto& t = c.classifiers.train;
    t.seed = c.seed;
    s.read("width", c.classifiers.options.width);
    s.read("max_epochs", t.max_epochs);
    s.read("batch_size", t.batch_size);
    s.read("learning_rate", t.learning_rate);
    s.read("weight_decay", t.weight_decay);
    s.read("patience", t.patience);
    s.read("flip_probability", t.flip_probability);
    s.read("seed", t.seed);
    s.finish();
  }
  {
    Section s = root.child("train");
    auto& t = c.train;
    t.seed = c.seed;
    std::string mode(weight_decay_mode_name(t.weight_decay_mode));
    std::string loss3(loss3_mode_name(t.loss3_mode));
    s.read("batch_size", t.batch_size);
    s.read("learning_rate", t.learning_rate);
    s.read("weight_decay", t.weight_decay);
    s.read("weight_decay_mode", mode);
    s.read("epochs", t.epochs);
    s.read("alpha", t.alpha);
    s.read("beta", t.beta);
    s.read("q", t.q);
    s.read("loss3_mode", loss3);
    s.read("flip_probability", t.flip_probability);
    s.read("eval_fraction", t.eval_fraction);
    s.read("seed", t.seed);
    t.weight_decay_mode = parse_weight_decay_mode(mode);
    t.loss3_mode = parse_loss3_mode(loss3);
    t.generator.seed = t.seed;
    Section g = s.child("generator");
    g.read("encoder_widths", t.generator.encoder_widths);
    g.read("decoder_widths", t.generator.decoder_widths);
    g.read("convs_per_stage", t.generator.convs_per_stage);
    g.read("output_init_scale", t.generator.output_init_scale);
    g.read("seed", t.generator.seed);
    g.finish();
    s.finish();
  }
  {
    Section s = root.child("eval");
    c.eval.wgn_seed = c.seed;
    s.read("wgn_seed", c.eval.wgn_seed);
    s.read("visual_count", c.eval.visual_count);
    s.finish();
  }
  root.finish();
  validate(c);
  return c;
}

PipelineConfig parse_config_text(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return config_from_json(json::object());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config_text(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay},
          {"weight_decay_mode", weight_decay_mode_name(t.weight_decay_mode)},
          {"epochs", t.epochs},
          {"alpha", t.alpha},
          {"beta", t.beta},
          {"q", t.q},
          {"loss3_mode", loss3_mode_name(t.loss3_mode)},
          {"flip_probability", t.flip_probability},
          {"eval_fraction", t.eval_fraction},
          {"seed", t.seed},
          {"generator", to_json(t.generator)}};
}

nlohmann::json to_json(const PipelineConfig& c) {
  const auto& ct = c.classifiers.train;
  return {{"data_root", c.data_root},
          {"subset_fraction", c.subset_fraction},
          {"seed", c.seed},
          {"classifiers",
           {{"width", c.classifiers.options.width},
            {"max_epochs", ct.max_epochs},
            {"batch_size", ct.batch_size},
            {"learning_rate", ct.learning_rate},
            {"weight_decay", ct.weight_decay},
            {"patience", ct.patience},
            {"flip_probability", ct.flip_probability},
            {"seed", ct.seed}}},
          {"train", to_json(c.train)},
          {"eval", {{"wgn_seed", c.eval.wgn_seed}, {"visual_count", c.eval.visual_count}}}};
}

std::uint64_t config_digest(const PipelineConfig& c) {
  Fnv1a h;
  h.update(to_json(c).dump());
  return h.value();
}

}  // namespace mjnd
