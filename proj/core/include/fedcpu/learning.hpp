#pragma once

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

#include "fedcpu/encoder.hpp"
#include "fedcpu/rng.hpp"

namespace fedcpu {

/// Row-per-sample features with integer labels in [0, num_classes).
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  int num_classes = 0;

  Eigen::Index size() const { return features.rows(); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  /// Rows selected in the given order.
  Dataset subset(std::span<const Eigen::Index> rows) const;
};

enum class ModelKind { softmax_linear, mlp_1hidden };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::softmax_linear;
  int feature_dim = 0;
  int num_classes = 0;
  int hidden = 16;  ///< mlp_1hidden only

  /// s, the flattened parameter count.
  Eigen::Index param_count() const;
  void validate() const;
};

struct ModelParams {
  ModelSpec spec;
  Eigen::VectorXd w;
};

/// Zeros for softmax regression, scaled Gaussian weights for the MLP.
ModelParams init_params(const ModelSpec& spec, Rng& rng);

/// Mean cross-entropy over the selected rows (all rows when `rows` is empty).
/// Writes the gradient when `grad` is non-null.
double loss_and_gradient(const ModelSpec& spec, const Eigen::VectorXd& w, const Dataset& data,
                         std::span<const Eigen::Index> rows, Eigen::VectorXd* grad);

/// Class scores, one row per sample.
Eigen::MatrixXd predict_logits(const ModelSpec& spec, const Eigen::VectorXd& w,
                               const Eigen::MatrixXd& features);

struct TrainingConfig {
  int local_steps = 3;  ///< tau
  double lr = 0.01;     ///< mu_0
  /// mu_t = lr / (1 + lr_decay * t)
  double lr_decay = 0.0;
  int batch = 100;  ///< B
  int rounds = 50;  ///< T

  double learning_rate(int round) const { return lr / (1.0 + lr_decay * round); }
  void validate() const;
};

/// tau mini-batch SGD steps (batches drawn uniformly with replacement) from w0;
/// returns w_tau - w0.
LocalUpdate local_sgd_steps(const ModelParams& w0, const Dataset& shard, const TrainingConfig& cfg,
                            double lr, Rng& rng, int device_id = 0);

/// (1/K) sum_k delta_w_k
Eigen::VectorXd ideal_aggregate(std::span<const LocalUpdate> updates);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const ModelParams& w, const Dataset& test);

/// Sample-count weighted loss over shards, i.e. the global objective.
Evaluation evaluate_weighted(const ModelParams& w, std::span<const Dataset> shards);

enum class PartitionMode { iid, noniid };

std::string_view to_string(PartitionMode mode);
PartitionMode partition_mode_from_string(std::string_view name);

struct ShardedDataset {
  std::vector<Dataset> shards;
  /// Row indices of each shard in the source dataset.
  std::vector<std::vector<Eigen::Index>> source_rows;
  int num_classes = 0;
  int feature_dim = 0;
};

/// iid: shuffled near-equal split. noniid: each device holds at most two
/// labels; each label's samples are split among its holders with
/// Dirichlet(alpha) proportions, so shard sizes differ.
ShardedDataset partition_dataset(const Dataset& data, int devices, PartitionMode mode, Rng& rng,
                                 double dirichlet_alpha = 1.0);

/// Gaussian class blobs with a shared diagonal covariance whose per-axis
/// scales are log-spaced over [1/anisotropy, 1]. Class means are drawn per
/// axis proportional to that axis' scale, so low-variance axes carry as much
/// signal as high-variance ones but are slow for plain SGD.
struct BlobConfig {
  int classes = 3;
  int feature_dim = 7;
  double separation = 1.0;
  double anisotropy = 1.0;
};

struct BlobProblem {
  Eigen::MatrixXd means;   ///< classes x feature_dim
  Eigen::VectorXd scales;  ///< per-axis std
  int classes = 0;
};

BlobProblem make_blob_problem(const BlobConfig& cfg, Rng& rng);

/// Balanced draw of n samples (label i % classes for the i-th sample).
Dataset sample_blobs(const BlobProblem& problem, Eigen::Index n, Rng& rng);

}  // namespace fedcpu
