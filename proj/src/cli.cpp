#include "mjnd/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "mjnd/cam.hpp"
#include "mjnd/classifiers.hpp"
#include "mjnd/config.hpp"
#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/evaluator.hpp"
#include "mjnd/log.hpp"
#include "mjnd/torch_bridge.hpp"
#include "mjnd/trainer.hpp"

namespace mjnd {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string run_dir = "runs/default";
  std::string data_root;
  std::string config;
  std::optional<double> subset;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string resume;
  std::string arch;
  bool force = false;
  bool quiet = false;
  bool loss3_signed = false;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string stamp_of(const json& j) {
  Fnv1a h;
  h.update(j.dump());
  return to_hex(h.value());
}

std::string fmt(double v, int precision = 2) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::error_code ec;
  fs::create_directories(file.parent_path(), ec);
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + file.string());
    out << text;
    if (!out) throw IoError("cannot write " + file.string());
  }
  fs::rename(tmp, file);
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string rca_cells(const RcaReport& r) {
  std::string s = fmt(r.acc, 4);
  for (double a : r.acc_n) s += "," + fmt(a, 4);
  return s;
}

class Run {
 public:
  Run(const Options& opt, std::ostream& out) : opt_(opt), out_(out), layout_{opt.run_dir} {
    if (fs::exists(layout_.manifest())) {
      try {
        manifest_ = json::parse(read_text(layout_.manifest()));
      } catch (const json::parse_error& e) {
        throw IoError("corrupt manifest " + layout_.manifest().string() + ": " + e.what());
      }
    }
    json base = json::object();
    if (!opt.config.empty()) {
      const std::string text = read_text(opt.config);
      if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
        try {
          base = json::parse(text);
        } catch (const json::parse_error& e) {
          throw ConfigError(opt.config + ": not valid JSON: " + e.what());
        }
      }
    } else if (manifest_.contains("config")) {
      base = manifest_["config"];
    }
    try {
      config_ = config_from_json(apply_overrides(base));
    } catch (const ConfigError& e) {
      throw ConfigError((opt.config.empty() ? layout_.manifest().string() : opt.config) + ": " + e.what());
    }
    data_root_ = resolve_data_root();
    if (!manifest_.contains("run_id")) {
      manifest_["run_id"] = stamp_of({{"created", utc_now()}, {"root", fs::absolute(layout_.root).string()}});
      manifest_["created"] = utc_now();
    }
    manifest_["tool_version"] = kToolVersion;
  }

  const PipelineConfig& config() const { return config_; }
  const RunLayout& layout() const { return layout_; }
  std::string run_id() const { return manifest_["run_id"].get<std::string>(); }
  std::ostream& out() { return out_; }
  bool force() const { return opt_.force; }

  const DatasetSplit& split(SplitName s) {
    auto& slot = s == SplitName::kTrain ? train_ : test_;
    if (!slot) {
      if (data_root_.empty()) {
        throw IngestError(std::string("no data root: pass --data-root, set ") + kDataRootEnv +
                          ", or set data_root in the config");
      }
      slot = load_dataset(data_root_, s, config_.subset_fraction, config_.seed);
      manifest_["dataset"][std::string(split_label(s))] = {{"digest", to_hex(slot->digest())},
                                                           {"records", slot->size()},
                                                           {"root", data_root_.string()}};
    }
    return *slot;
  }

  std::string classifier_stamp(Arch arch) {
    return stamp_of({{"arch", arch_id(arch)},
                     {"classifiers", to_json(config_)["classifiers"]},
                     {"train", to_hex(split(SplitName::kTrain).digest())},
                     {"test", to_hex(split(SplitName::kTest).digest())}});
  }

  /// The four frozen classifiers; exit 3 when any is missing or stale.
  std::vector<ClassifierModel>& classifiers() {
    if (!classifiers_.empty()) return classifiers_;
    std::vector<ClassifierModel> models;
    for (Arch arch : kAllArchs) {
      const std::string id(arch_id(arch));
      const auto file = layout_.classifier(id);
      if (!fs::exists(file) || stage_stamp("train-classifiers:" + id) != classifier_stamp(arch)) {
        throw PrerequisiteError("train-classifiers", "classifier " + id + " is missing or out of date at " +
                                                         file.string() + "; run `mjnd train-classifiers` first");
      }
      models.push_back(load_classifier(file));
      if (to_hex(models.back().digest()) != manifest_["classifiers"][id]["digest"].get<std::string>()) {
        throw PrerequisiteError("train-classifiers",
                                "classifier " + id + " does not match the manifest; run `mjnd train-classifiers`");
      }
    }
    classifiers_ = std::move(models);
    return classifiers_;
  }

  LabelSet labels(SplitName s) {
    const std::string name(split_label(s));
    const auto file = layout_.labels(name);
    auto& models = classifiers();
    const auto& data = split(s);
    if (fs::exists(file)) {
      LabelSet set = LabelSet::load(file);
      if (set.matches(data.digest(), classifier_digests(models))) return set;
    }
    throw PrerequisiteError("gen-labels", "reference labels for the " + name +
                                              " split are missing or stale; run `mjnd gen-labels` first");
  }

  CamCache cams(SplitName s) {
    const std::string name(split_label(s));
    const auto file = layout_.cams(name);
    auto& models = classifiers();
    const auto& data = split(s);
    if (fs::exists(file)) {
      CamCache cache = CamCache::load(file);
      if (cache.matches(data.digest(), classifier_digests(models))) return cache;
    }
    throw PrerequisiteError("cache-cams", "merged CAM cache for the " + name +
                                              " split is missing or stale; run `mjnd cache-cams` first");
  }

  std::string jnd_stamp() {
    labels(SplitName::kTrain);
    return stamp_of({{"train", to_json(config_.train)},
                     {"split", to_hex(split(SplitName::kTrain).digest())},
                     {"classifiers", json(classifier_digests(classifiers()))}});
  }

  /// The generator at its final epoch; exit 3 when training is missing,
  /// incomplete or stale.
  GeneratorModel generator() {
    const auto stamp = jnd_stamp();
    cams(SplitName::kTrain);
    const auto file = train_paths(layout_.jnd_dir()).final_checkpoint;
    if (!fs::exists(file)) {
      throw PrerequisiteError("train-jnd", "no trained generator at " + file.string() + "; run `mjnd train-jnd` first");
    }
    auto loaded = load_generator(file);
    if (loaded.header.value("stamp", "") != stamp || loaded.header.value("epoch", 0) != config_.train.epochs) {
      throw PrerequisiteError("train-jnd", "generator at " + file.string() +
                                               " is incomplete or out of date; run `mjnd train-jnd` first");
    }
    return std::move(loaded.model);
  }

  std::string stage_stamp(const std::string& stage) const {
    if (!manifest_.contains("stages") || !manifest_["stages"].contains(stage)) return {};
    return manifest_["stages"][stage].value("stamp", "");
  }

  bool up_to_date(const std::string& stage, const std::string& stamp, std::initializer_list<fs::path> outputs) {
    if (opt_.force || stage_stamp(stage) != stamp) return false;
    for (const auto& p : outputs) {
      if (!fs::exists(p)) return false;
    }
    out_ << stage << ": up to date (use --force to rerun)\n";
    return true;
  }

  void complete(const std::string& stage, const std::string& stamp, const std::vector<fs::path>& outputs) {
    json paths = json::array();
    for (const auto& p : outputs) paths.push_back(fs::relative(p, layout_.root).generic_string());
    manifest_["stages"][stage] = {{"stamp", stamp}, {"completed", utc_now()}, {"outputs", paths}};
    save();
  }

  json& manifest() { return manifest_; }

  void save() {
    manifest_["config"] = to_json(config_);
    manifest_["config_digest"] = to_hex(config_digest(config_));
    manifest_["updated"] = utc_now();
    write_text(layout_.manifest(), manifest_.dump(2) + "\n");
  }

  /// Checkpoint / artifact header fields tying an artifact to this run.
  json provenance() const {
    return {{"run_id", manifest_["run_id"]}, {"config_digest", to_hex(config_digest(config_))}};
  }

 private:
  json apply_overrides(json j) const {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (opt_.seed) {
      j["seed"] = *opt_.seed;
      // Re-derive section seeds unless the config pins them explicitly.
      if (opt_.config.empty()) {
        for (const char* section : {"classifiers", "train"}) {
          if (j.contains(section)) j[section].erase("seed");
        }
        if (j.contains("train") && j["train"].contains("generator")) j["train"]["generator"].erase("seed");
        if (j.contains("eval")) j["eval"].erase("wgn_seed");
      }
    }
    if (opt_.subset) j["subset_fraction"] = *opt_.subset;
    if (opt_.epochs) j["train"]["epochs"] = *opt_.epochs;
    if (opt_.loss3_signed) j["train"]["loss3_mode"] = "signed";
    if (!opt_.data_root.empty()) j["data_root"] = opt_.data_root;
    return j;
  }

  fs::path resolve_data_root() const {
    if (!opt_.data_root.empty()) return opt_.data_root;
    if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
    return config_.data_root;
  }

  Options opt_;
  std::ostream& out_;
  RunLayout layout_;
  json manifest_ = json::object();
  PipelineConfig config_;
  fs::path data_root_;
  std::optional<DatasetSplit> train_;
  std::optional<DatasetSplit> test_;
  std::vector<ClassifierModel> classifiers_;
};

// -- stages -------------------------------------------------------------------

void train_classifiers(Run& run, const std::string& only) {
  std::vector<Arch> archs(kAllArchs.begin(), kAllArchs.end());
  if (!only.empty()) archs = {parse_arch(only)};
  const auto& train = run.split(SplitName::kTrain);
  const auto& test = run.split(SplitName::kTest);
  for (Arch arch : archs) {
    const std::string id(arch_id(arch));
    const std::string stage = "train-classifiers:" + id;
    const auto file = run.layout().classifier(id);
    const auto stamp = run.classifier_stamp(arch);
    if (run.up_to_date(stage, stamp, {file})) continue;
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    auto cfg = run.config().classifiers.train;
    const auto index = static_cast<std::uint64_t>(arch);
    cfg.seed += index;
    auto model = build_classifier(arch, kNumClasses, run.config().classifiers.options, cfg.seed);
    model.meta.seed = cfg.seed;
    pretrain_classifier(model, train, test, cfg, file, run.run_id());
    run.manifest()["classifiers"][id] = {{"digest", to_hex(model.digest())},
                                         {"accuracy", model.meta.accuracy},
                                         {"epochs", model.meta.epochs_trained},
                                         {"parameters", model.parameter_count()}};
    run.complete(stage, stamp, {file});
    run.out() << id << ": test accuracy " << fmt(model.meta.accuracy) << "% after " << model.meta.epochs_trained
              << " epochs -> " << file.string() << "\n";
  }
}

void gen_labels(Run& run) {
  auto& models = run.classifiers();
  for (SplitName s : {SplitName::kTrain, SplitName::kTest}) {
    const std::string name(split_label(s));
    const auto file = run.layout().labels(name);
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (run.force()) fs::remove(file, ec);
    bool regenerated = false;
    const auto labels = load_or_generate_labels(file, models, run.split(s), run.run_id(), &regenerated);
    run.complete("gen-labels:" + name, stamp_of(json(labels.classifier_digests)), {file});
    run.out() << "gen-labels " << name << ": " << labels.size() << " images "
              << (regenerated ? "labelled" : "up to date") << " -> " << file.string() << "\n";
  }
}

void cache_cams(Run& run) {
  auto& models = run.classifiers();
  for (SplitName s : {SplitName::kTrain, SplitName::kTest}) {
    const std::string name(split_label(s));
    const auto labels = run.labels(s);
    const auto file = run.layout().cams(name);
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (run.force()) fs::remove(file, ec);
    bool rebuilt = false;
    const auto cache = load_or_build_cam_cache(file, models, run.split(s), labels, run.run_id(), &rebuilt);
    run.complete("cache-cams:" + name, stamp_of(json(cache.classifier_digests)), {file});
    run.out() << "cache-cams " << name << ": " << cache.size() << " merged maps "
              << (rebuilt ? "computed" : "up to date") << " -> " << file.string() << "\n";
  }
}

void train_jnd(Run& run, const std::string& resume) {
  const auto& train = run.split(SplitName::kTrain);
  const auto labels = run.labels(SplitName::kTrain);
  const auto cams = run.cams(SplitName::kTrain);
  const auto paths = train_paths(run.layout().jnd_dir());
  const auto stamp = run.jnd_stamp();
  if (resume.empty() && run.up_to_date("train-jnd", stamp, {paths.final_checkpoint, paths.metrics})) return;

  std::optional<fs::path> from;
  if (!resume.empty()) {
    from = fs::path(resume);
    const auto header = load_generator(*from).header;
    if (header.value("stamp", "") != stamp) {
      throw ConfigError("checkpoint " + resume + " belongs to a different configuration or classifier set");
    }
  }
  json header = run.provenance();
  header["stamp"] = stamp;
  TrainingInputs inputs{run.classifiers(), train, cams, labels};
  const auto result = mjnd::train(run.config().train, inputs, run.layout().jnd_dir(), from, header);
  GeneratorModel g = load_generator(paths.final_checkpoint).model;
  run.manifest()["generator"] = {{"digest", to_hex(g.digest())}, {"parameters", g.parameter_count()}};
  run.complete("train-jnd", stamp, {paths.best, paths.final_checkpoint, paths.metrics});
  const auto& last = result.records.back();
  run.out() << "train-jnd: " << result.records.size() << " epochs, final RCA " << fmt(last.rca.acc) << "%, PSNR "
            << fmt(last.psnr) << " dB -> " << paths.metrics.string() << "\n";
}

std::string downstream_stamp(Run& run, GeneratorModel& g) {
  return stamp_of({{"generator", to_hex(g.digest())}, {"eval", to_json(run.config())["eval"]}});
}

void eval_stage(Run& run) {
  auto g = run.generator();
  const auto file = run.layout().eval_dir() / "eval.csv";
  const auto spatial_file = run.layout().eval_dir() / "spatial.csv";
  const auto stamp = downstream_stamp(run, g);
  if (run.up_to_date("eval", stamp, {file, spatial_file})) return;
  std::string csv = "split,count,acc,acc_1,acc_2,acc_3,acc_4,psnr,mean_abs_e\n";
  std::string spatial = "split,count,bottom_decile_mean,top_decile_mean,ratio\n";
  for (SplitName s : {SplitName::kTrain, SplitName::kTest}) {
    const std::string name(split_label(s));
    const auto labels = run.labels(s);
    const auto cams = run.cams(s);
    const auto source = generator_source(g, cams);
    const auto r = evaluate_jnd(run.classifiers(), source, run.split(s), labels);
    csv += name + "," + std::to_string(r.count) + "," + rca_cells(r.rca) + "," + fmt(r.mean_psnr, 4) + "," +
           fmt(r.mean_actual_level, 6) + "\n";
    const auto sp = spatial_distribution(source, run.split(s), cams);
    spatial += name + "," + std::to_string(sp.count) + "," + fmt(sp.bottom_decile_mean, 6) + "," +
               fmt(sp.top_decile_mean, 6) + "," + fmt(sp.ratio(), 4) + "\n";
    run.out() << "eval " << name << ": RCA " << fmt(r.rca.acc) << "%, PSNR " << fmt(r.mean_psnr)
              << " dB, low/high-attention noise ratio " << fmt(sp.ratio(), 3) << "\n";
  }
  write_text(file, csv);
  write_text(spatial_file, spatial);
  run.complete("eval", stamp, {file, spatial_file});
}

void wgn_stage(Run& run) {
  auto g = run.generator();
  const auto file = run.layout().eval_dir() / "wgn.csv";
  const auto stamp = downstream_stamp(run, g);
  if (run.up_to_date("wgn-baseline", stamp, {file})) return;
  const auto labels = run.labels(SplitName::kTrain);
  const auto cams = run.cams(SplitName::kTrain);
  const auto r = wgn_baseline(run.classifiers(), generator_source(g, cams), run.split(SplitName::kTrain), labels,
                              run.config().eval.wgn_seed);
  std::string csv = "noise,acc,acc_1,acc_2,acc_3,acc_4,psnr\n";
  csv += "jnd," + rca_cells(r.jnd) + "," + fmt(r.mean_psnr_jnd, 4) + "\n";
  csv += "wgn," + rca_cells(r.wgn) + "," + fmt(r.mean_psnr_wgn, 4) + "\n";
  write_text(file, csv);
  run.complete("wgn-baseline", stamp, {file});
  run.out() << "wgn-baseline: RCA " << fmt(r.jnd.acc) << "% with JND vs " << fmt(r.wgn.acc)
            << "% with matched Gaussian noise (gap " << fmt(r.jnd.acc - r.wgn.acc) << " points)\n";
}

void homogeneity_stage(Run& run) {
  auto g = run.generator();
  const auto file = run.layout().eval_dir() / "homogeneity.csv";
  const auto stamp = downstream_stamp(run, g);
  if (run.up_to_date("homogeneity", stamp, {file})) return;
  const auto labels = run.labels(SplitName::kTrain);
  const auto cams = run.cams(SplitName::kTrain);
  const auto r = homogeneity_test(run.classifiers(), generator_source(g, cams), run.split(SplitName::kTrain), labels);
  std::string csv = "k,fraction,acc,acc_1,acc_2,acc_3,acc_4\n";
  for (int k = 0; k <= kHomogeneitySteps; ++k) {
    csv += std::to_string(k) + "," + fmt(HomogeneityReport::fraction(k), 6) + "," + rca_cells(r.by_step[k]) + "\n";
    run.out() << "homogeneity k=" << k << "/9: RCA " << fmt(r.by_step[k].acc) << "%\n";
  }
  write_text(file, csv);
  run.complete("homogeneity", stamp, {file});
}

void visualize_stage(Run& run) {
  auto g = run.generator();
  const auto cams = run.cams(SplitName::kTrain);
  const auto& train = run.split(SplitName::kTrain);
  const auto count = std::min<std::size_t>(train.size(), static_cast<std::size_t>(run.config().eval.visual_count));
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& rec = train.records[i];
    const ImageTensor x = normalize(rec);
    const CamMap c = cams.cam_map(rec.id);
    const JndImage e = generate_jnd(g, x, c);
    const ImageTensor distorted = apply_jnd(x, e);
    const auto paths = export_visuals(x, c, e, distorted, run.layout().visuals_dir(), "img" + std::to_string(rec.id));
    written.insert(written.end(), {paths.cam, paths.jnd, paths.original, paths.distorted});
  }
  run.complete("visualize", downstream_stamp(run, g), written);
  run.out() << "visualize: " << count << " images -> " << run.layout().visuals_dir().string() << "\n";
}

std::string csv_as_table(const fs::path& file) {
  std::istringstream in(read_text(file));
  std::string line;
  std::string table;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::string row = "|";
    std::stringstream cells(line);
    std::string cell;
    int columns = 0;
    while (std::getline(cells, cell, ',')) {
      row += " " + cell + " |";
      ++columns;
    }
    table += row + "\n";
    if (header) {
      table += "|";
      for (int i = 0; i < columns; ++i) table += "---|";
      table += "\n";
      header = false;
    }
  }
  return table;
}

void report_stage(Run& run) {
  const auto paths = train_paths(run.layout().jnd_dir());
  if (!fs::exists(paths.metrics)) {
    throw PrerequisiteError("train-jnd", "no metrics log at " + paths.metrics.string() + "; run `mjnd train-jnd` first");
  }
  const auto records = read_metrics_csv(paths.metrics);
  std::ostringstream md;
  md << "# Run report\n\n";
  md << "- run id: " << run.run_id() << "\n";
  md << "- config digest: " << to_hex(config_digest(run.config())) << "\n";
  md << "- generated: " << utc_now() << "\n\n";
  md << "## Training\n\n";
  if (!records.empty()) {
    const auto& first = records.front();
    const auto& last = records.back();
    md << "Epochs: " << records.size() << ". RCA " << fmt(first.rca.acc) << "% -> " << fmt(last.rca.acc)
       << "%, PSNR " << fmt(first.psnr) << " dB -> " << fmt(last.psnr) << " dB, loss " << fmt(first.loss, 4)
       << " -> " << fmt(last.loss, 4) << ".\n\n";
  }
  md << csv_as_table(paths.metrics) << "\n";
  const std::vector<std::pair<std::string, std::string>> sections{{"eval.csv", "eval"},
                                                                  {"spatial.csv", "eval"},
                                                                  {"wgn.csv", "wgn-baseline"},
                                                                  {"homogeneity.csv", "homogeneity"}};
  for (const auto& [name, stage] : sections) {
    const auto file = run.layout().eval_dir() / name;
    md << "## " << name << "\n\n";
    if (fs::exists(file)) {
      md << csv_as_table(file) << "\n";
    } else {
      md << "Not available; run `mjnd " << stage << "`.\n\n";
    }
  }
  const auto wgn = run.layout().eval_dir() / "wgn.csv";
  if (fs::exists(wgn)) {
    std::istringstream in(read_text(wgn));
    std::string line;
    std::map<std::string, double> acc;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      acc[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    md << "WGN gap: " << fmt(acc["jnd"] - acc["wgn"]) << " RCA points.\n";
  }
  write_text(run.layout().report(), md.str());
  run.out() << md.str();
  run.out() << "report -> " << run.layout().report().string() << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Machine-perception JND pipeline", "mjnd"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Options opt;
  app.add_option("--run-dir", opt.run_dir, "Run directory holding every artifact")->capture_default_str();
  app.add_option("--data-root", opt.data_root, std::string("CIFAR-10 binary archive (overrides ") + kDataRootEnv + ")");
  app.add_option("--config", opt.config, "JSON config file");
  app.add_option("--subset", opt.subset, "Stratified fraction of each split to use")->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", opt.seed, "Top-level seed");
  app.add_option("--epochs", opt.epochs, "Override train.epochs")->check(CLI::PositiveNumber);
  app.add_flag("--force", opt.force, "Rerun a stage even when its outputs are up to date");
  app.add_flag("--quiet", opt.quiet, "Suppress progress lines");

  std::map<std::string, std::string> help{
      {"train-classifiers", "Pretrain the four classifiers on human annotations"},
      {"gen-labels", "Assign classifier-generated reference labels to clean images"},
      {"cache-cams", "Compute and cache merged CAMs"},
      {"train-jnd", "Train the JND generator"},
      {"eval", "RCA, PSNR and spatial noise statistics on both splits"},
      {"wgn-baseline", "Compare JND against RMS-matched Gaussian noise"},
      {"homogeneity", "RCA of x + (k/9) e for k = 0..9"},
      {"visualize", "Export CAM, JND, original and distorted PNGs"},
      {"report", "Render every CSV of the run into one summary"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, text] : help) subs[name] = app.add_subcommand(name, text);
  subs["train-classifiers"]->add_option("--arch", opt.arch, "Train only this architecture");
  subs["train-jnd"]->add_option("--resume", opt.resume, "Continue from a final.gen checkpoint");
  subs["train-jnd"]->add_flag("--loss3-signed", opt.loss3_signed, "Use the signed spatial loss");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mjnd: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::string stage;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) stage = name;
  }
  set_log_enabled(!opt.quiet);
  at::globalContext().setFlushDenormal(true);
  try {
    Run run(opt, out);
    if (stage == "train-classifiers") {
      train_classifiers(run, opt.arch);
    } else if (stage == "gen-labels") {
      gen_labels(run);
    } else if (stage == "cache-cams") {
      cache_cams(run);
    } else if (stage == "train-jnd") {
      train_jnd(run, opt.resume);
    } else if (stage == "eval") {
      eval_stage(run);
    } else if (stage == "wgn-baseline") {
      wgn_stage(run);
    } else if (stage == "homogeneity") {
      homogeneity_stage(run);
    } else if (stage == "visualize") {
      visualize_stage(run);
    } else if (stage == "report") {
      report_stage(run);
    }
    run.save();
    return kExitOk;
  } catch (const PrerequisiteError& e) {
    err << "mjnd " << stage << ": " << e.what() << "\n";
    err << "prerequisite stage: " << e.missing_stage() << "\n";
    return kExitPrerequisite;
  } catch (const Error& e) {
    err << "mjnd " << stage << ": " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "mjnd " << stage << ": internal error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace mjnd
