#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedcpu/bound.hpp"
#include "fedcpu/channel.hpp"
#include "fedcpu/coeff_select.hpp"
#include "fedcpu/learning.hpp"

namespace fedcpu {

enum class Scheme { fedcpu, ideal_fedavg };

std::string_view to_string(Scheme scheme);
Scheme scheme_from_string(std::string_view name);

struct LatticeConfig {
  std::string name = "e8";
  double scale = 1.0;  ///< rho
  std::size_t mc_samples = 100000;
  std::uint64_t mc_seed = 1;
};

struct DatasetConfig {
  std::string kind = "blobs";  ///< "blobs" or "idx"
  BlobConfig blobs;
  /// Seed of the blob geometry; sampling and partitioning follow the run seed.
  std::uint64_t problem_seed = 7;
  int train_samples = 3000;
  int test_samples = 1000;
  std::string train_images, train_labels;
  /// Optional; without them the test set is cut from the end of the train files.
  std::string test_images, test_labels;
  PartitionMode partition = PartitionMode::iid;
  double dirichlet_alpha = 1.0;
};

struct ExperimentConfig {
  Scheme scheme = Scheme::fedcpu;
  std::vector<std::uint64_t> seeds;
  ChannelConfig channel;
  LatticeConfig lattice;
  TrainingConfig training;
  SelectionConfig selection;
  /// Unset means default_theta(lattice).
  std::optional<double> theta;
  DatasetConfig dataset;
  ModelKind model = ModelKind::softmax_linear;
  int hidden = 16;
  BoundConstants bound;
  std::string output = "results";
  /// Worker threads for seeds; 0 picks the hardware concurrency.
  int jobs = 0;

  ExperimentConfig();
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict: unknown keys are rejected. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value"; the value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& j, std::string_view assignment);

/// FNV-1a over the canonical JSON of everything that affects results.
std::string config_hash(const ExperimentConfig& cfg);

/// A named sweep: base overrides plus one key varied over several values.
struct Preset {
  std::string name;
  std::string description;
  nlohmann::json overrides;
  std::string sweep_key;
  std::vector<nlohmann::json> sweep_values;
};

const std::vector<Preset>& presets();
const Preset& find_preset(std::string_view name);

/// Label used for a sweep value in directory names and logs.
std::string sweep_label(const Preset& preset, const nlohmann::json& value);

}  // namespace fedcpu
