#include "fedcpu/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fedcpu/errors.hpp"

namespace fedcpu {
namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(section) + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (std::string_view k : allowed) known = known || item.key() == k;
    if (!known) {
      const std::string where = section.empty() ? item.key() : std::string(section) + "." + item.key();
      throw ConfigError("unknown config key '" + where + "'");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

double read_extended(const json& v) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError("expected a number or \"inf\", got \"" + s + "\"");
  }
  return v.get<double>();
}

json write_extended(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

json parse_value(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return std::string(text);
  }
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::fedcpu ? "fedcpu" : "ideal_fedavg";
}

Scheme scheme_from_string(std::string_view name) {
  if (name == "fedcpu") return Scheme::fedcpu;
  if (name == "ideal_fedavg") return Scheme::ideal_fedavg;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

ExperimentConfig::ExperimentConfig() : seeds(20) {
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  channel.validate();
  training.validate();
  selection.validate();
  bound.validate();
  if (theta && !(*theta > 0.0)) throw ConfigError("selection.theta must be > 0");
  if (!(lattice.scale > 0.0)) throw ConfigError("lattice.scale must be > 0");
  if (lattice.name != "identity" && lattice.name != "hexagonal" && lattice.name != "e8")
    throw ConfigError("lattice.name must be identity, hexagonal or e8");
  if (lattice.mc_samples < kMinSecondMomentSamples)
    throw ConfigError("lattice.mc_samples must be >= " + std::to_string(kMinSecondMomentSamples));
  if (dataset.kind != "blobs" && dataset.kind != "idx")
    throw ConfigError("dataset.kind must be blobs or idx");
  if (dataset.train_samples < channel.devices)
    throw ConfigError("dataset.train_samples must be at least channel.devices");
  if (dataset.test_samples < 1) throw ConfigError("dataset.test_samples must be >= 1");
  if (dataset.kind == "idx" && (dataset.train_images.empty() || dataset.train_labels.empty()))
    throw ConfigError("idx datasets need dataset.train_images and dataset.train_labels");
  if (dataset.test_images.empty() != dataset.test_labels.empty())
    throw ConfigError("dataset.test_images and dataset.test_labels must be given together");
  if (!(dataset.dirichlet_alpha > 0.0)) throw ConfigError("dataset.dirichlet_alpha must be > 0");
  if (model == ModelKind::mlp_1hidden && hidden < 1) throw ConfigError("model.hidden must be >= 1");
  if (jobs < 0) throw ConfigError("jobs must be >= 0");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["scheme"] = to_string(c.scheme);
  j["seeds"] = c.seeds;
  j["channel"] = {{"antennas", c.channel.antennas},
                  {"devices", c.channel.devices},
                  {"snr", c.channel.snr},
                  {"power", c.channel.power},
                  {"fading", to_string(c.channel.law)},
                  {"fading_rate", c.channel.fading_rate}};
  j["lattice"] = {{"name", c.lattice.name},
                  {"scale", c.lattice.scale},
                  {"mc_samples", c.lattice.mc_samples},
                  {"mc_seed", c.lattice.mc_seed}};
  j["training"] = {{"local_steps", c.training.local_steps},
                   {"lr", c.training.lr},
                   {"lr_decay", c.training.lr_decay},
                   {"batch", c.training.batch},
                   {"rounds", c.training.rounds}};
  j["selection"] = {{"theta", c.theta ? write_extended(*c.theta) : json(nullptr)},
                    {"epsilon", c.selection.epsilon},
                    {"max_iters", c.selection.max_iters},
                    {"qp_tolerance", c.selection.qp_tolerance}};
  j["dataset"] = {{"kind", c.dataset.kind},
                  {"classes", c.dataset.blobs.classes},
                  {"feature_dim", c.dataset.blobs.feature_dim},
                  {"separation", c.dataset.blobs.separation},
                  {"anisotropy", c.dataset.blobs.anisotropy},
                  {"problem_seed", c.dataset.problem_seed},
                  {"train_samples", c.dataset.train_samples},
                  {"test_samples", c.dataset.test_samples},
                  {"train_images", c.dataset.train_images},
                  {"train_labels", c.dataset.train_labels},
                  {"test_images", c.dataset.test_images},
                  {"test_labels", c.dataset.test_labels},
                  {"partition", to_string(c.dataset.partition)},
                  {"dirichlet_alpha", c.dataset.dirichlet_alpha}};
  j["model"] = {{"kind", to_string(c.model)}, {"hidden", c.hidden}};
  j["bound"] = {{"smoothness", c.bound.smoothness},
                {"pl", c.bound.pl},
                {"grad_var", c.bound.grad_var},
                {"initial_gap", c.bound.initial_gap}};
  j["output"] = c.output;
  j["jobs"] = c.jobs;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    check_keys(j, "", {"scheme", "seeds", "channel", "lattice", "training", "selection", "dataset",
                       "model", "bound", "output", "jobs"});
    if (j.contains("scheme")) c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    read(j, "seeds", c.seeds);
    read(j, "output", c.output);
    read(j, "jobs", c.jobs);

    if (j.contains("channel")) {
      const json& s = j.at("channel");
      check_keys(s, "channel", {"antennas", "devices", "snr", "power", "fading", "fading_rate"});
      read(s, "antennas", c.channel.antennas);
      read(s, "devices", c.channel.devices);
      read(s, "snr", c.channel.snr);
      read(s, "power", c.channel.power);
      read(s, "fading_rate", c.channel.fading_rate);
      if (s.contains("fading")) c.channel.law = fading_law_from_string(s.at("fading").get<std::string>());
    }
    if (j.contains("lattice")) {
      const json& s = j.at("lattice");
      check_keys(s, "lattice", {"name", "scale", "mc_samples", "mc_seed"});
      read(s, "name", c.lattice.name);
      read(s, "scale", c.lattice.scale);
      read(s, "mc_samples", c.lattice.mc_samples);
      read(s, "mc_seed", c.lattice.mc_seed);
    }
    if (j.contains("training")) {
      const json& s = j.at("training");
      check_keys(s, "training", {"local_steps", "lr", "lr_decay", "batch", "rounds"});
      read(s, "local_steps", c.training.local_steps);
      read(s, "lr", c.training.lr);
      read(s, "lr_decay", c.training.lr_decay);
      read(s, "batch", c.training.batch);
      read(s, "rounds", c.training.rounds);
    }
    if (j.contains("selection")) {
      const json& s = j.at("selection");
      check_keys(s, "selection", {"theta", "epsilon", "max_iters", "qp_tolerance"});
      if (s.contains("theta") && !s.at("theta").is_null()) c.theta = read_extended(s.at("theta"));
      read(s, "epsilon", c.selection.epsilon);
      read(s, "max_iters", c.selection.max_iters);
      read(s, "qp_tolerance", c.selection.qp_tolerance);
    }
    if (j.contains("dataset")) {
      const json& s = j.at("dataset");
      check_keys(s, "dataset",
                 {"kind", "classes", "feature_dim", "separation", "anisotropy", "problem_seed",
                  "train_samples", "test_samples", "train_images", "train_labels", "test_images",
                  "test_labels", "partition", "dirichlet_alpha"});
      read(s, "kind", c.dataset.kind);
      read(s, "classes", c.dataset.blobs.classes);
      read(s, "feature_dim", c.dataset.blobs.feature_dim);
      read(s, "separation", c.dataset.blobs.separation);
      read(s, "anisotropy", c.dataset.blobs.anisotropy);
      read(s, "problem_seed", c.dataset.problem_seed);
      read(s, "train_samples", c.dataset.train_samples);
      read(s, "test_samples", c.dataset.test_samples);
      read(s, "train_images", c.dataset.train_images);
      read(s, "train_labels", c.dataset.train_labels);
      read(s, "test_images", c.dataset.test_images);
      read(s, "test_labels", c.dataset.test_labels);
      read(s, "dirichlet_alpha", c.dataset.dirichlet_alpha);
      if (s.contains("partition"))
        c.dataset.partition = partition_mode_from_string(s.at("partition").get<std::string>());
    }
    if (j.contains("model")) {
      const json& s = j.at("model");
      check_keys(s, "model", {"kind", "hidden"});
      if (s.contains("kind")) c.model = model_kind_from_string(s.at("kind").get<std::string>());
      read(s, "hidden", c.hidden);
    }
    if (j.contains("bound")) {
      const json& s = j.at("bound");
      check_keys(s, "bound", {"smoothness", "pl", "grad_var", "initial_gap"});
      read(s, "smoothness", c.bound.smoothness);
      read(s, "pl", c.bound.pl);
      read(s, "grad_var", c.bound.grad_var);
      read(s, "initial_gap", c.bound.initial_gap);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' must look like key=value");
  const std::string_view key = assignment.substr(0, eq);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part(key.substr(start, dot == std::string_view::npos ? key.size() - start : dot - start));
    if (part.empty()) throw ConfigError("override key '" + std::string(key) + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + std::string(key) + "' descends into a value");
    node = &(*node)[part];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  *node = parse_value(assignment.substr(eq + 1));
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output");
  j.erase("jobs");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<Preset>& presets() {
  // Desk-scale problem shared by every sweep.
  static const json desk = {
      {"seeds", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19}},
      {"channel", {{"devices", 10}, {"antennas", 30}, {"snr", 10.0}}},
      {"training", {{"rounds", 50}, {"local_steps", 3}, {"batch", 100}, {"lr", 0.05}}},
      {"lattice", {{"name", "e8"}, {"scale", 2.5}}},
      {"dataset",
       {{"kind", "blobs"},
        {"classes", 3},
        {"feature_dim", 7},
        {"separation", 1.5},
        {"anisotropy", 10.0},
        {"train_samples", 3000},
        {"test_samples", 1000},
        {"partition", "noniid"}}},
  };
  auto with = [](json base, const json& extra) {
    base.merge_patch(extra);
    return base;
  };
  static const std::vector<Preset> all = {
      {"baseline", "FedCPU against ideal FedAvg", desk, "scheme", {"fedcpu", "ideal_fedavg"}},
      {"fig5_tau", "local iterations, iid", with(desk, {{"dataset", {{"partition", "iid"}}}}),
       "training.local_steps", {1, 2, 3}},
      {"fig6_antennas", "server antennas, non-iid", desk, "channel.antennas", {5, 15, 30}},
      {"fig7_devices", "participating devices, non-iid", desk, "channel.devices", {5, 10, 20, 30}},
      {"fig8_rho", "lattice scale, non-iid", desk, "lattice.scale", {0.25, 0.5, 1.0}},
      {"fig11_lattice", "lattice family, non-iid", desk, "lattice.name", {"identity", "hexagonal", "e8"}},
  };
  return all;
}

const Preset& find_preset(std::string_view name) {
  for (const Preset& p : presets())
    if (p.name == name) return p;
  std::string known;
  for (const Preset& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

std::string sweep_label(const Preset& preset, const json& value) {
  std::string key = preset.sweep_key;
  if (const auto dot = key.rfind('.'); dot != std::string::npos) key = key.substr(dot + 1);
  return key + "_" + (value.is_string() ? value.get<std::string>() : value.dump());
}

}  // namespace fedcpu
