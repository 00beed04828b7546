#include "fedcpu/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <ostream>
#include <thread>

#include "fedcpu/channel.hpp"
#include "fedcpu/encoder.hpp"
#include "fedcpu/errors.hpp"
#include "fedcpu/idx.hpp"
#include "fedcpu/receiver.hpp"

namespace fedcpu {

const char* const kRoundsHeader =
    "seed,round,scheme,lr,dmse,qmse,metric,decode_error,sum_a,mismatch,selection_fallback,"
    "constraint_violated,degenerate_devices,train_loss,test_loss,test_accuracy,gap_bound";
const char* const kSummaryHeader =
    "round,seeds,test_accuracy_mean,test_accuracy_se,test_loss_mean,test_loss_se,train_loss_mean,"
    "dmse_mean,qmse_mean,metric_mean,decode_error_rate,sum_a_mean,mismatch_mean,fallback_rate,"
    "gap_bound_mean";

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

Dataset take_rows(const Dataset& data, Eigen::Index begin, Eigen::Index count) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) rows[static_cast<std::size_t>(i)] = begin + i;
  Dataset out = data.subset(rows);
  out.num_classes = data.num_classes;
  return out;
}

std::vector<RoundMetrics> run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                   const LatticeSpec& lattice, const DataSource& source) {
  SeedState state = init_seed(cfg, seed, lattice, source);
  std::vector<RoundMetrics> out;
  out.reserve(static_cast<std::size_t>(cfg.training.rounds));
  for (int t = 0; t < cfg.training.rounds; ++t) out.push_back(run_round(state, cfg, t));
  return out;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  body(out);
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace

DataSource load_data_source(const ExperimentConfig& cfg) {
  DataSource src;
  if (cfg.dataset.kind != "idx") return src;
  const auto train_n = static_cast<std::size_t>(cfg.dataset.train_samples);
  const auto test_n = static_cast<std::size_t>(cfg.dataset.test_samples);
  if (!cfg.dataset.test_images.empty()) {
    src.train = load_idx_dataset(cfg.dataset.train_images, cfg.dataset.train_labels, train_n);
    src.test = load_idx_dataset(cfg.dataset.test_images, cfg.dataset.test_labels, test_n);
    const int classes = std::max(src.train->num_classes, src.test->num_classes);
    src.train->num_classes = src.test->num_classes = classes;
  } else {
    const Dataset all = load_idx_dataset(cfg.dataset.train_images, cfg.dataset.train_labels, train_n + test_n);
    if (all.size() < static_cast<Eigen::Index>(train_n + test_n))
      throw ConfigError(cfg.dataset.train_images + ": has " + std::to_string(all.size()) +
                        " samples, need train_samples + test_samples = " +
                        std::to_string(train_n + test_n));
    src.train = take_rows(all, 0, static_cast<Eigen::Index>(train_n));
    src.test = take_rows(all, static_cast<Eigen::Index>(train_n), static_cast<Eigen::Index>(test_n));
  }
  return src;
}

LatticeSpec prepare_lattice(const ExperimentConfig& cfg) {
  LatticeSpec lattice = LatticeSpec::from_name(cfg.lattice.name, cfg.lattice.scale);
  Rng rng = make_rng(derive_seed(cfg.lattice.mc_seed, {static_cast<std::uint64_t>(Stream::kLatticeMoment)}));
  second_moment(lattice, cfg.lattice.mc_samples, rng);
  return lattice;
}

SeedState init_seed(const ExperimentConfig& cfg, std::uint64_t seed, const LatticeSpec& lattice,
                    const DataSource& source) {
  SeedState st;
  st.seed = seed;
  Dataset train;
  if (cfg.dataset.kind == "blobs") {
    Rng geometry = make_rng(derive_seed(cfg.dataset.problem_seed, {}));
    const BlobProblem problem = make_blob_problem(cfg.dataset.blobs, geometry);
    Rng draw = make_rng(stream_seed(seed, -1, -1, Stream::kDataset));
    train = sample_blobs(problem, cfg.dataset.train_samples, draw);
    st.test = sample_blobs(problem, cfg.dataset.test_samples, draw);
  } else {
    if (!source.train || !source.test) throw ConfigError("idx dataset was not loaded");
    train = *source.train;
    st.test = *source.test;
  }
  Rng part = make_rng(stream_seed(seed, -1, -1, Stream::kPartition));
  st.shards = partition_dataset(train, cfg.channel.devices, cfg.dataset.partition, part,
                                cfg.dataset.dirichlet_alpha);

  ModelSpec spec{cfg.model, train.feature_dim(), train.num_classes, cfg.hidden};
  Rng init = make_rng(stream_seed(seed, -1, -1, Stream::kModelInit));
  st.global = init_params(spec, init);

  st.lattice = lattice;
  const auto moment = lattice.cached_second_moment();
  if (!moment) throw ConfigError("init_seed: lattice second moment is not resolved");
  st.sigma_q2 = *moment;
  st.theta = cfg.theta ? *cfg.theta : default_theta(lattice);
  const Eigen::Index n = lattice.block_dim();
  st.padded_size = (spec.param_count() + n - 1) / n * n;
  st.gap_bound = cfg.bound.initial_gap;
  return st;
}

RoundMetrics run_round(SeedState& st, const ExperimentConfig& cfg, int round) {
  try {
    const int k_devices = cfg.channel.devices;
    const Eigen::Index s = st.global.w.size();
    const Eigen::Index s_pad = st.padded_size;
    const double lr = cfg.training.learning_rate(round);

    RoundMetrics m;
    m.seed = st.seed;
    m.round = round;
    m.scheme = cfg.scheme;
    m.lr = lr;

    std::vector<LocalUpdate> updates;
    updates.reserve(static_cast<std::size_t>(k_devices));
    for (int k = 0; k < k_devices; ++k) {
      Rng rng = make_rng(stream_seed(st.seed, round, k, Stream::kLocalSgd));
      updates.push_back(local_sgd_steps(st.global, st.shards.shards[static_cast<std::size_t>(k)],
                                        cfg.training, lr, rng, k));
    }

    const LearningTerms learning{lr, cfg.bound.grad_var, cfg.training.batch, cfg.training.local_steps};
    Eigen::VectorXd delta;
    Eigen::VectorXd a_used;
    if (cfg.scheme == Scheme::ideal_fedavg) {
      delta = ideal_aggregate(updates);
      a_used = Eigen::VectorXd::Ones(k_devices);
      m.sum_a = k_devices;
      m.mismatch = 1.0 / k_devices;
      m.metric = learning.weight() * m.mismatch;
    } else {
      const double sq2 = st.sigma_q2;
      Eigen::VectorXd means(k_devices), sigmas(k_devices);
      Eigen::MatrixXd x(k_devices, s_pad);
      Eigen::MatrixXd w_bar(k_devices, s_pad);
      for (int k = 0; k < k_devices; ++k) {
        bool degenerate = false;
        NormalizedUpdate nu = normalize_update_or_floor(updates[static_cast<std::size_t>(k)], &degenerate);
        m.degenerate_devices += degenerate ? 1 : 0;
        nu.w_hat.conservativeResize(s_pad);
        nu.w_hat.tail(s_pad - s).setZero();
        Rng rng = make_rng(stream_seed(st.seed, round, k, Stream::kDither));
        DitherVector dither = sample_dither(st.lattice, s_pad, rng);
        Eigen::VectorXd quantized = dithered_quantize(nu, st.lattice, dither);
        const TransmitSignal sig =
            scale_for_transmit(std::move(quantized), std::move(dither), cfg.channel.power, sq2);
        x.row(k) = sig.x.transpose();
        w_bar.row(k) = sig.quantized_point.transpose();
        means(k) = nu.mean;
        sigmas(k) = nu.std;
      }

      Rng channel_rng = make_rng(stream_seed(st.seed, round, -1, Stream::kChannel));
      const ChannelRealization h = sample_channel(cfg.channel, channel_rng);

      SelectionConfig sel = cfg.selection;
      sel.theta = st.theta;
      const MetricInputs inputs{learning, sigmas, sq2, static_cast<double>(s_pad)};
      const CoefficientVector coeffs = select_coefficients(h, cfg.channel.snr, sq2, sel, inputs);
      a_used = coeffs.a.cast<double>();
      m.metric = coeffs.metric;
      m.selection_fallback = coeffs.fallback;
      m.constraint_violated = coeffs.constraint_violated;
      m.sum_a = coeffs.a.sum();
      m.mismatch = mismatch(a_used);

      Rng noise_rng = make_rng(stream_seed(st.seed, round, -1, Stream::kNoise));
      const Eigen::MatrixXd y = propagate(h, x, cfg.channel.noise_variance(), noise_rng);
      const EqualizerWeights b = optimal_equalizer(h, a_used, cfg.channel.snr);
      const Eigen::VectorXd true_point = w_bar.transpose() * a_used;
      const DecodedCombination decoded =
          decode_combination(y, b, st.lattice, cfg.channel.power, sq2, coeffs.a, true_point);
      m.decode_error = decoded.decode_error.value_or(false);

      // The server rebuilds every dither from the shared seeds.
      Eigen::MatrixXd dithers(k_devices, s_pad);
      for (int k = 0; k < k_devices; ++k) {
        Rng rng = make_rng(stream_seed(st.seed, round, k, Stream::kDither));
        dithers.row(k) = sample_dither(st.lattice, s_pad, rng).values.transpose();
      }
      m.dmse = decoding_mse(h, a_used, cfg.channel.snr, sq2, static_cast<double>(s_pad));
      const double eta = optimal_eta(a_used, sigmas, sq2);
      const GlobalUpdateEstimate est =
          estimate_global_update(decoded, dithers, means, sigmas, eta, sq2, m.dmse);
      m.qmse = est.qmse;
      delta = est.delta_w_g.head(s);
    }

    if (!delta.allFinite()) throw NumericalError("global update is not finite");
    st.global.w += delta;

    const RoundTerms terms = round_terms(lr, cfg.training.local_steps, cfg.bound, cfg.training.batch,
                                         a_used, m.qmse);
    st.gap_bound = advance_gap(st.gap_bound, terms, cfg.bound);
    m.gap_bound = st.gap_bound;

    m.train_loss = evaluate_weighted(st.global, st.shards.shards).loss;
    const Evaluation test = evaluate(st.global, st.test);
    m.test_loss = test.loss;
    m.test_accuracy = test.accuracy;
    return m;
  } catch (const RoundError&) {
    throw;
  } catch (const std::exception& e) {
    throw RoundError(round, e.what());
  }
}

double ExperimentResult::decode_error_rate() const {
  std::size_t errors = 0, total = 0;
  for (const auto& seed_rounds : rounds)
    for (const RoundMetrics& m : seed_rounds) {
      errors += m.decode_error ? 1 : 0;
      ++total;
    }
  return total == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(total);
}

std::vector<double> ExperimentResult::final_accuracies() const {
  std::vector<double> out;
  for (const auto& seed_rounds : rounds)
    if (!seed_rounds.empty()) out.push_back(seed_rounds.back().test_accuracy);
  return out;
}

std::vector<RoundSummary> summarize(const std::vector<std::vector<RoundMetrics>>& rounds) {
  std::vector<RoundSummary> out;
  if (rounds.empty()) return out;
  const std::size_t t_count = rounds.front().size();
  for (std::size_t t = 0; t < t_count; ++t) {
    std::vector<double> acc, loss, train, dmse, qmse, metric, err, sum_a, mis, fb, gap;
    for (const auto& seed_rounds : rounds) {
      const RoundMetrics& m = seed_rounds.at(t);
      acc.push_back(m.test_accuracy);
      loss.push_back(m.test_loss);
      train.push_back(m.train_loss);
      dmse.push_back(m.dmse);
      qmse.push_back(m.qmse);
      metric.push_back(m.metric);
      err.push_back(m.decode_error ? 1.0 : 0.0);
      sum_a.push_back(m.sum_a);
      mis.push_back(m.mismatch);
      fb.push_back(m.selection_fallback ? 1.0 : 0.0);
      gap.push_back(m.gap_bound);
    }
    RoundSummary r;
    r.round = static_cast<int>(t);
    r.seeds = static_cast<int>(rounds.size());
    r.test_accuracy_mean = mean_of(acc);
    r.test_accuracy_se = se_of(acc);
    r.test_loss_mean = mean_of(loss);
    r.test_loss_se = se_of(loss);
    r.train_loss_mean = mean_of(train);
    r.dmse_mean = mean_of(dmse);
    r.qmse_mean = mean_of(qmse);
    r.metric_mean = mean_of(metric);
    r.decode_error_rate = mean_of(err);
    r.sum_a_mean = mean_of(sum_a);
    r.mismatch_mean = mean_of(mis);
    r.fallback_rate = mean_of(fb);
    r.gap_bound_mean = mean_of(gap);
    out.push_back(r);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  ExperimentResult result;
  result.config_hash = config_hash(cfg);
  const LatticeSpec lattice = prepare_lattice(cfg);
  result.sigma_q2 = *lattice.cached_second_moment();
  result.theta = cfg.theta ? *cfg.theta : default_theta(lattice);
  const DataSource source = load_data_source(cfg);

  const std::size_t n_seeds = cfg.seeds.size();
  result.rounds.assign(n_seeds, {});
  std::vector<std::exception_ptr> failures(n_seeds);
  unsigned workers = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs) : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(n_seeds));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n_seeds; i = next++) {
      try {
        result.rounds[i] = run_seed(cfg, cfg.seeds[i], lattice, source);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  result.summary = summarize(result.rounds);

  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    if (ec) throw std::runtime_error(out_dir->string() + ": " + ec.message());
    write_file(*out_dir / "rounds.csv", [&](std::ostream& o) { write_rounds_csv(o, result); });
    write_file(*out_dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, result); });
    write_file(*out_dir / "config.json", [&](std::ostream& o) { o << to_json(cfg).dump(2) << '\n'; });
  }
  return result;
}

void write_rounds_csv(std::ostream& out, const ExperimentResult& result) {
  out << "# config_hash=" << result.config_hash << '\n' << kRoundsHeader << '\n';
  for (const auto& seed_rounds : result.rounds)
    for (const RoundMetrics& m : seed_rounds)
      out << m.seed << ',' << m.round << ',' << to_string(m.scheme) << ',' << num(m.lr) << ','
          << num(m.dmse) << ',' << num(m.qmse) << ',' << num(m.metric) << ',' << int{m.decode_error}
          << ',' << m.sum_a << ',' << num(m.mismatch) << ',' << int{m.selection_fallback} << ','
          << int{m.constraint_violated} << ',' << m.degenerate_devices << ',' << num(m.train_loss)
          << ',' << num(m.test_loss) << ',' << num(m.test_accuracy) << ',' << num(m.gap_bound)
          << '\n';
}

void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
  out << "# config_hash=" << result.config_hash << '\n' << kSummaryHeader << '\n';
  for (const RoundSummary& r : result.summary)
    out << r.round << ',' << r.seeds << ',' << num(r.test_accuracy_mean) << ','
        << num(r.test_accuracy_se) << ',' << num(r.test_loss_mean) << ',' << num(r.test_loss_se)
        << ',' << num(r.train_loss_mean) << ',' << num(r.dmse_mean) << ',' << num(r.qmse_mean)
        << ',' << num(r.metric_mean) << ',' << num(r.decode_error_rate) << ','
        << num(r.sum_a_mean) << ',' << num(r.mismatch_mean) << ',' << num(r.fallback_rate) << ','
        << num(r.gap_bound_mean) << '\n';
}

}  // namespace fedcpu
