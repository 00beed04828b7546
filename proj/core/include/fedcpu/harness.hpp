#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedcpu/config.hpp"
#include "fedcpu/lattice.hpp"
#include "fedcpu/learning.hpp"

namespace fedcpu {

struct RoundMetrics {
  std::uint64_t seed = 0;
  int round = 0;
  Scheme scheme = Scheme::fedcpu;
  double lr = 0.0;
  double dmse = 0.0;
  double qmse = 0.0;
  double metric = 0.0;
  bool decode_error = false;
  int sum_a = 0;
  double mismatch = 0.0;  ///< ||a||^2 / (1^T a)^2
  bool selection_fallback = false;
  bool constraint_violated = false;
  int degenerate_devices = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double gap_bound = 0.0;
};

/// Everything a single seed needs across rounds.
struct SeedState {
  std::uint64_t seed = 0;
  ModelParams global;
  ShardedDataset shards;
  Dataset test;
  LatticeSpec lattice = LatticeSpec::identity(1.0);
  double sigma_q2 = 0.0;
  double theta = 0.0;
  /// Model length rounded up to a multiple of the lattice block size.
  Eigen::Index padded_size = 0;
  double gap_bound = 0.0;
};

/// Dataset pair shared by all seeds of an IDX experiment.
struct DataSource {
  std::optional<Dataset> train;
  std::optional<Dataset> test;
};

DataSource load_data_source(const ExperimentConfig& cfg);

/// Lattice with its second moment resolved (Monte Carlo, seeded by the config).
LatticeSpec prepare_lattice(const ExperimentConfig& cfg);

SeedState init_seed(const ExperimentConfig& cfg, std::uint64_t seed, const LatticeSpec& lattice,
                    const DataSource& source);

/// One communication round; advances state.global. Errors carry the round index.
RoundMetrics run_round(SeedState& state, const ExperimentConfig& cfg, int round);

struct RoundSummary {
  int round = 0;
  int seeds = 0;
  double test_accuracy_mean = 0.0, test_accuracy_se = 0.0;
  double test_loss_mean = 0.0, test_loss_se = 0.0;
  double train_loss_mean = 0.0;
  double dmse_mean = 0.0, qmse_mean = 0.0, metric_mean = 0.0;
  double decode_error_rate = 0.0;
  double sum_a_mean = 0.0, mismatch_mean = 0.0;
  double fallback_rate = 0.0;
  double gap_bound_mean = 0.0;
};

struct ExperimentResult {
  std::string config_hash;
  double sigma_q2 = 0.0;
  double theta = 0.0;
  /// rounds[i] holds the metrics of cfg.seeds[i].
  std::vector<std::vector<RoundMetrics>> rounds;
  std::vector<RoundSummary> summary;

  double decode_error_rate() const;
  /// Final-round test accuracy of each seed.
  std::vector<double> final_accuracies() const;
};

std::vector<RoundSummary> summarize(const std::vector<std::vector<RoundMetrics>>& rounds);

/// Runs every seed (in parallel when cfg.jobs allows) and, when out_dir is
/// given, writes rounds.csv, summary.csv and config.json there.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

void write_rounds_csv(std::ostream& out, const ExperimentResult& result);
void write_summary_csv(std::ostream& out, const ExperimentResult& result);

extern const char* const kRoundsHeader;
extern const char* const kSummaryHeader;

}  // namespace fedcpu
