#include "fedcpu/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedcpu/errors.hpp"

namespace fedcpu {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-wise softmax probabilities; returns mean cross-entropy.
double softmax_cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                             Eigen::MatrixXd* probs) {
  const Eigen::Index n = logits.rows();
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double peak = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - peak).exp();
    const double z = p.row(i).sum();
    p.row(i) /= z;
    loss -= logits(i, labels[static_cast<std::size_t>(i)]) - peak - std::log(z);
  }
  if (probs) *probs = std::move(p);
  return loss / static_cast<double>(n);
}

double loss_grad_dense(const ModelSpec& spec, const Eigen::VectorXd& w, const Eigen::MatrixXd& x,
                       std::span<const int> labels, Eigen::VectorXd* grad) {
  const Eigen::Index n = x.rows();
  const int d = spec.feature_dim;
  const int c = spec.num_classes;
  const double inv_n = 1.0 / static_cast<double>(n);

  if (spec.kind == ModelKind::softmax_linear) {
    Eigen::Map<const RowMajor> wm(w.data(), c, d + 1);
    Eigen::MatrixXd logits = x * wm.leftCols(d).transpose();
    logits.rowwise() += wm.col(d).transpose();
    Eigen::MatrixXd probs;
    const double loss = softmax_cross_entropy(logits, labels, grad ? &probs : nullptr);
    if (grad) {
      for (Eigen::Index i = 0; i < n; ++i) probs(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
      probs *= inv_n;
      grad->resize(w.size());
      Eigen::Map<RowMajor> gm(grad->data(), c, d + 1);
      gm.leftCols(d) = probs.transpose() * x;
      gm.col(d) = probs.colwise().sum().transpose();
    }
    return loss;
  }

  const int h = spec.hidden;
  Eigen::Map<const RowMajor> w1(w.data(), h, d + 1);
  Eigen::Map<const RowMajor> w2(w.data() + static_cast<Eigen::Index>(h) * (d + 1), c, h + 1);
  Eigen::MatrixXd hidden = x * w1.leftCols(d).transpose();
  hidden.rowwise() += w1.col(d).transpose();
  hidden = hidden.array().tanh();
  Eigen::MatrixXd logits = hidden * w2.leftCols(h).transpose();
  logits.rowwise() += w2.col(h).transpose();
  Eigen::MatrixXd probs;
  const double loss = softmax_cross_entropy(logits, labels, grad ? &probs : nullptr);
  if (grad) {
    for (Eigen::Index i = 0; i < n; ++i) probs(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    probs *= inv_n;
    grad->resize(w.size());
    Eigen::Map<RowMajor> g1(grad->data(), h, d + 1);
    Eigen::Map<RowMajor> g2(grad->data() + static_cast<Eigen::Index>(h) * (d + 1), c, h + 1);
    g2.leftCols(h) = probs.transpose() * hidden;
    g2.col(h) = probs.colwise().sum().transpose();
    const Eigen::MatrixXd dz =
        ((probs * w2.leftCols(h)).array() * (1.0 - hidden.array().square())).matrix();
    g1.leftCols(d) = dz.transpose() * x;
    g1.col(d) = dz.colwise().sum().transpose();
  }
  return loss;
}

void check_shapes(const ModelSpec& spec, const Eigen::VectorXd& w, const Dataset& data) {
  if (w.size() != spec.param_count())
    throw ConfigError("parameter vector has length " + std::to_string(w.size()) + ", model expects " +
                      std::to_string(spec.param_count()));
  if (data.feature_dim() != spec.feature_dim)
    throw ConfigError("dataset feature dimension " + std::to_string(data.feature_dim()) +
                      " does not match model " + std::to_string(spec.feature_dim));
}

}  // namespace

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::softmax_linear ? "softmax_linear" : "mlp_1hidden";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "softmax_linear") return ModelKind::softmax_linear;
  if (name == "mlp_1hidden") return ModelKind::mlp_1hidden;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

Eigen::Index ModelSpec::param_count() const {
  const Eigen::Index d = feature_dim;
  const Eigen::Index c = num_classes;
  if (kind == ModelKind::softmax_linear) return c * (d + 1);
  return static_cast<Eigen::Index>(hidden) * (d + 1) + c * (hidden + 1);
}

void ModelSpec::validate() const {
  if (feature_dim < 1) throw ConfigError("model feature dimension must be >= 1");
  if (num_classes < 2) throw ConfigError("model needs at least two classes");
  if (kind == ModelKind::mlp_1hidden && hidden < 1) throw ConfigError("model.hidden must be >= 1");
}

ModelParams init_params(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  ModelParams p{spec, Eigen::VectorXd::Zero(spec.param_count())};
  if (spec.kind == ModelKind::mlp_1hidden) {
    std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(static_cast<double>(spec.feature_dim)));
    std::normal_distribution<double> n2(0.0, 1.0 / std::sqrt(static_cast<double>(spec.hidden)));
    const Eigen::Index first = static_cast<Eigen::Index>(spec.hidden) * (spec.feature_dim + 1);
    for (Eigen::Index i = 0; i < first; ++i) p.w(i) = n1(rng);
    for (Eigen::Index i = first; i < p.w.size(); ++i) p.w(i) = n2(rng);
  }
  return p;
}

double loss_and_gradient(const ModelSpec& spec, const Eigen::VectorXd& w, const Dataset& data,
                         std::span<const Eigen::Index> rows, Eigen::VectorXd* grad) {
  check_shapes(spec, w, data);
  if (rows.empty()) {
    if (data.size() == 0) throw ConfigError("loss_and_gradient: empty dataset");
    return loss_grad_dense(spec, w, data.features, data.labels, grad);
  }
  const Dataset batch = data.subset(rows);
  return loss_grad_dense(spec, w, batch.features, batch.labels, grad);
}

Eigen::MatrixXd predict_logits(const ModelSpec& spec, const Eigen::VectorXd& w,
                               const Eigen::MatrixXd& features) {
  const int d = spec.feature_dim;
  const int c = spec.num_classes;
  if (spec.kind == ModelKind::softmax_linear) {
    Eigen::Map<const RowMajor> wm(w.data(), c, d + 1);
    Eigen::MatrixXd logits = features * wm.leftCols(d).transpose();
    logits.rowwise() += wm.col(d).transpose();
    return logits;
  }
  const int h = spec.hidden;
  Eigen::Map<const RowMajor> w1(w.data(), h, d + 1);
  Eigen::Map<const RowMajor> w2(w.data() + static_cast<Eigen::Index>(h) * (d + 1), c, h + 1);
  Eigen::MatrixXd hidden = features * w1.leftCols(d).transpose();
  hidden.rowwise() += w1.col(d).transpose();
  hidden = hidden.array().tanh();
  Eigen::MatrixXd logits = hidden * w2.leftCols(h).transpose();
  logits.rowwise() += w2.col(h).transpose();
  return logits;
}

void TrainingConfig::validate() const {
  if (local_steps < 1) throw ConfigError("training.local_steps must be >= 1");
  if (batch < 1) throw ConfigError("training.batch must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("training.lr must be >= 0");
  if (!(lr_decay >= 0.0)) throw ConfigError("training.lr_decay must be >= 0");
  if (rounds < 0) throw ConfigError("training.rounds must be >= 0");
}

LocalUpdate local_sgd_steps(const ModelParams& w0, const Dataset& shard, const TrainingConfig& cfg,
                            double lr, Rng& rng, int device_id) {
  if (shard.size() == 0)
    throw ConfigError("local_sgd_steps: device " + std::to_string(device_id) + " has an empty shard");
  check_shapes(w0.spec, w0.w, shard);
  std::uniform_int_distribution<Eigen::Index> pick(0, shard.size() - 1);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(cfg.batch));
  Eigen::VectorXd w = w0.w;
  Eigen::VectorXd grad;
  for (int step = 0; step < cfg.local_steps; ++step) {
    for (auto& r : rows) r = pick(rng);
    loss_and_gradient(w0.spec, w, shard, rows, &grad);
    w -= lr * grad;
  }
  return LocalUpdate{w - w0.w, device_id};
}

Eigen::VectorXd ideal_aggregate(std::span<const LocalUpdate> updates) {
  if (updates.empty()) throw ConfigError("ideal_aggregate: no updates");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(updates.front().delta_w.size());
  for (const LocalUpdate& u : updates) {
    if (u.delta_w.size() != sum.size()) throw ConfigError("ideal_aggregate: update lengths differ");
    sum += u.delta_w;
  }
  return sum / static_cast<double>(updates.size());
}

Evaluation evaluate(const ModelParams& w, const Dataset& test) {
  if (test.size() == 0) throw ConfigError("evaluate: empty test set");
  check_shapes(w.spec, w.w, test);
  const Eigen::MatrixXd logits = predict_logits(w.spec, w.w, test.features);
  Evaluation e;
  e.loss = softmax_cross_entropy(logits, test.labels, nullptr);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    if (arg == test.labels[static_cast<std::size_t>(i)]) ++hits;
  }
  e.accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
  return e;
}

Evaluation evaluate_weighted(const ModelParams& w, std::span<const Dataset> shards) {
  Evaluation total;
  double count = 0.0;
  for (const Dataset& shard : shards) {
    if (shard.size() == 0) continue;
    const Evaluation e = evaluate(w, shard);
    const double n = static_cast<double>(shard.size());
    total.loss += n * e.loss;
    total.accuracy += n * e.accuracy;
    count += n;
  }
  if (count == 0.0) throw ConfigError("evaluate_weighted: all shards are empty");
  total.loss /= count;
  total.accuracy /= count;
  return total;
}

std::string_view to_string(PartitionMode mode) { return mode == PartitionMode::iid ? "iid" : "noniid"; }

PartitionMode partition_mode_from_string(std::string_view name) {
  if (name == "iid") return PartitionMode::iid;
  if (name == "noniid") return PartitionMode::noniid;
  throw ConfigError("unknown partition mode '" + std::string(name) + "'");
}

ShardedDataset partition_dataset(const Dataset& data, int devices, PartitionMode mode, Rng& rng,
                                 double dirichlet_alpha) {
  if (devices < 1) throw ConfigError("partition_dataset: need at least one device");
  if (data.size() < devices)
    throw ConfigError("partition_dataset: " + std::to_string(data.size()) +
                      " samples cannot fill " + std::to_string(devices) + " shards");
  ShardedDataset out;
  out.num_classes = data.num_classes;
  out.feature_dim = data.feature_dim();
  out.source_rows.assign(static_cast<std::size_t>(devices), {});

  if (mode == PartitionMode::iid) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t base = order.size() / static_cast<std::size_t>(devices);
    const std::size_t extra = order.size() % static_cast<std::size_t>(devices);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(devices); ++k) {
      const std::size_t len = base + (k < extra ? 1 : 0);
      out.source_rows[k].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                order.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
  } else {
    if (!(dirichlet_alpha > 0.0)) throw ConfigError("partition_dataset: dirichlet alpha must be > 0");
    std::vector<std::vector<Eigen::Index>> by_label(static_cast<std::size_t>(data.num_classes));
    for (Eigen::Index i = 0; i < data.size(); ++i)
      by_label[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);
    std::vector<int> present;
    for (int c = 0; c < data.num_classes; ++c)
      if (!by_label[static_cast<std::size_t>(c)].empty()) present.push_back(c);
    const int c_count = static_cast<int>(present.size());
    if (2 * devices < c_count)
      throw ConfigError("partition_dataset: " + std::to_string(devices) +
                        " devices cannot cover " + std::to_string(c_count) +
                        " labels with two labels each");

    // Device slot j holds labels present[q % C] and present[(q + 1) % C] with
    // q = j, or q = 2j when there are fewer devices than labels so that every
    // label keeps a holder. Slots are dealt to devices in random order.
    const int step = devices >= c_count ? 1 : 2;
    std::vector<int> slot_of_device(static_cast<std::size_t>(devices));
    std::iota(slot_of_device.begin(), slot_of_device.end(), 0);
    std::shuffle(slot_of_device.begin(), slot_of_device.end(), rng);
    std::vector<std::vector<int>> holders(static_cast<std::size_t>(c_count));
    for (int k = 0; k < devices; ++k) {
      const int q = step * slot_of_device[static_cast<std::size_t>(k)];
      holders[static_cast<std::size_t>(q % c_count)].push_back(k);
      if (c_count > 1 && (q + 1) % c_count != q % c_count)
        holders[static_cast<std::size_t>((q + 1) % c_count)].push_back(k);
    }

    std::gamma_distribution<double> gamma(dirichlet_alpha, 1.0);
    for (int ci = 0; ci < c_count; ++ci) {
      std::vector<Eigen::Index>& pool = by_label[static_cast<std::size_t>(present[static_cast<std::size_t>(ci)])];
      std::shuffle(pool.begin(), pool.end(), rng);
      const std::vector<int>& owners = holders[static_cast<std::size_t>(ci)];
      const std::size_t h = owners.size();
      if (h == 0) throw ConfigError("partition_dataset: a label has no holder");
      std::vector<double> weight(h);
      double wsum = 0.0;
      for (double& v : weight) wsum += (v = gamma(rng));
      // One guaranteed sample per holder when possible, the rest by largest remainder.
      const std::size_t guaranteed = pool.size() >= h ? 1 : 0;
      const std::size_t spread = pool.size() - guaranteed * h;
      std::vector<std::size_t> counts(h, guaranteed);
      std::vector<std::pair<double, std::size_t>> remainders;
      std::size_t assigned = 0;
      for (std::size_t i = 0; i < h; ++i) {
        const double exact = static_cast<double>(spread) * weight[i] / wsum;
        const auto whole = static_cast<std::size_t>(std::floor(exact));
        counts[i] += whole;
        assigned += whole;
        remainders.emplace_back(exact - static_cast<double>(whole), i);
      }
      std::stable_sort(remainders.begin(), remainders.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t r = 0; assigned < spread; ++r, ++assigned) ++counts[remainders[r % h].second];
      std::size_t pos = 0;
      for (std::size_t i = 0; i < h; ++i) {
        auto& dst = out.source_rows[static_cast<std::size_t>(owners[i])];
        dst.insert(dst.end(), pool.begin() + static_cast<std::ptrdiff_t>(pos),
                   pool.begin() + static_cast<std::ptrdiff_t>(pos + counts[i]));
        pos += counts[i];
      }
    }
    for (int k = 0; k < devices; ++k)
      if (out.source_rows[static_cast<std::size_t>(k)].empty())
        throw ConfigError("partition_dataset: device " + std::to_string(k) +
                          " received no samples; use more samples or fewer devices");
  }

  out.shards.reserve(static_cast<std::size_t>(devices));
  for (const auto& rows : out.source_rows) out.shards.push_back(data.subset(rows));
  return out;
}

BlobProblem make_blob_problem(const BlobConfig& cfg, Rng& rng) {
  if (cfg.classes < 2) throw ConfigError("blobs need at least two classes");
  if (cfg.feature_dim < 1) throw ConfigError("blobs need feature_dim >= 1");
  if (!(cfg.anisotropy >= 1.0)) throw ConfigError("blob anisotropy must be >= 1");
  BlobProblem p;
  p.classes = cfg.classes;
  p.scales.resize(cfg.feature_dim);
  for (int j = 0; j < cfg.feature_dim; ++j) {
    const double frac = cfg.feature_dim > 1 ? static_cast<double>(j) / (cfg.feature_dim - 1) : 0.0;
    p.scales(j) = std::pow(cfg.anisotropy, -frac);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  p.means.resize(cfg.classes, cfg.feature_dim);
  for (int c = 0; c < cfg.classes; ++c)
    for (int j = 0; j < cfg.feature_dim; ++j) p.means(c, j) = cfg.separation * p.scales(j) * normal(rng);
  return p;
}

Dataset sample_blobs(const BlobProblem& problem, Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset out;
  out.num_classes = problem.classes;
  out.features.resize(n, problem.means.cols());
  out.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % problem.classes);
    out.labels[static_cast<std::size_t>(i)] = label;
    for (Eigen::Index j = 0; j < problem.means.cols(); ++j)
      out.features(i, j) = problem.means(label, j) + problem.scales(j) * normal(rng);
  }
  return out;
}

}  // namespace fedcpu
