#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fedcpu/coeff_select.hpp"
#include "fedcpu/config.hpp"
#include "fedcpu/errors.hpp"
#include "fedcpu/harness.hpp"
#include "fedcpu/lattice.hpp"
#include "fedcpu/oracles.hpp"

using namespace fedcpu;
using nlohmann::json;

namespace {

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string preset;
  std::string seeds;
  std::string out;
  int jobs = -1;
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const unsigned long long v = std::stoull(item, &used);
    if (used != item.size()) throw ConfigError("bad seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("--seeds needs at least one value");
  return seeds;
}

json base_config(const RunArgs& args) {
  json j = json::object();
  if (!args.config.empty()) {
    std::ifstream in(args.config);
    if (!in) throw ConfigError(args.config + ": cannot open config file");
    try {
      j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError(args.config + ": " + e.what());
    }
  }
  return j;
}

ExperimentConfig finish(json j, const RunArgs& args) {
  for (const std::string& s : args.sets) apply_override(j, s);
  ExperimentConfig cfg = config_from_json(j);
  if (!args.seeds.empty()) cfg.seeds = parse_seeds(args.seeds);
  if (args.jobs >= 0) cfg.jobs = args.jobs;
  cfg.validate();
  return cfg;
}

void report(const std::string& label, const ExperimentResult& r, const std::filesystem::path& dir) {
  const std::vector<double> acc = r.final_accuracies();
  double mean = 0.0, var = 0.0;
  for (double a : acc) mean += a;
  if (!acc.empty()) mean /= static_cast<double>(acc.size());
  for (double a : acc) var += (a - mean) * (a - mean);
  const double se =
      acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1) / static_cast<double>(acc.size())) : 0.0;
  std::printf("%-24s final_acc=%.4f se=%.4f decode_err=%.4f sigma_q2=%.6g theta=%.6g -> %s\n",
              label.c_str(), mean, se, r.decode_error_rate(), r.sigma_q2, r.theta, dir.string().c_str());
}

int cmd_run(const RunArgs& args) {
  const json file = base_config(args);
  if (args.preset.empty()) {
    const ExperimentConfig cfg = finish(file, args);
    const std::filesystem::path out = args.out.empty() ? cfg.output : args.out;
    report("run", run_experiment(cfg, out), out);
    return 0;
  }
  const Preset& preset = find_preset(args.preset);
  json base = preset.overrides;
  base.merge_patch(file);
  const std::filesystem::path root =
      args.out.empty() ? std::filesystem::path("results") / preset.name : std::filesystem::path(args.out);
  std::printf("preset %s: %s\n", preset.name.c_str(), preset.description.c_str());
  for (const json& value : preset.sweep_values) {
    json j = base;
    apply_override(j, preset.sweep_key + "=" + value.dump());
    const ExperimentConfig cfg = finish(j, args);
    const std::string label = sweep_label(preset, value);
    report(label, run_experiment(cfg, root / label), root / label);
  }
  return 0;
}

int cmd_oracle_lattice(const std::string& name, double scale, int trials, std::uint64_t seed) {
  const LatticeSpec lattice = LatticeSpec::from_name(name, scale);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 2.0 * scale);
  int mismatches = 0;
  for (int i = 0; i < trials; ++i) {
    Eigen::VectorXd x(lattice.block_dim());
    for (auto& v : x) v = normal(rng);
    const Eigen::VectorXd fast = lattice.nearest_point(x).point;
    const Eigen::VectorXd slow = oracle::enumerate_nearest_point(lattice, x);
    // Equidistant ties may legitimately pick different points.
    if (!fast.isApprox(slow, 1e-12) && std::abs((x - fast).norm() - (x - slow).norm()) > 1e-12)
      ++mismatches;
  }
  std::printf("lattice=%s scale=%g trials=%d mismatches=%d -> %s\n", name.c_str(), scale, trials,
              mismatches, mismatches == 0 ? "PASS" : "FAIL");
  return mismatches == 0 ? 0 : 1;
}

int cmd_oracle_coeffs(int devices, int antennas, double snr, const std::string& lattice_name,
                      double scale, double theta, int bound, int trials, std::uint64_t seed) {
  if (devices > kBruteForceMaxDevices)
    throw ConfigError("oracle coeffs: devices must be <= " + std::to_string(kBruteForceMaxDevices));
  LatticeSpec lattice = LatticeSpec::from_name(lattice_name, scale);
  Rng moment_rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kLatticeMoment)}));
  const double sq2 = second_moment(lattice, 100000, moment_rng);
  if (!(theta > 0.0)) theta = default_theta(lattice);
  ChannelConfig ch;
  ch.devices = devices;
  ch.antennas = antennas;
  ch.snr = snr;
  SelectionConfig sel;
  sel.theta = theta;
  MetricInputs in;
  in.sigmas = Eigen::VectorXd::Constant(devices, 0.01);
  in.sigma_q2 = sq2;
  in.model_size = 24;
  std::printf("trial,a_select,metric_select,select_feasible,a_oracle,metric_oracle,oracle_feasible,ratio\n");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = make_rng(stream_seed(seed, t, -1, Stream::kChannel));
    const ChannelRealization h = sample_channel(ch, rng);
    const CoefficientVector got = select_coefficients(h, snr, sq2, sel, in);
    const CoefficientVector best = brute_force_oracle(h, snr, sq2, theta, in, bound);
    const double ratio = got.metric / best.metric;
    // Ratios against an infeasible selection are not comparable.
    if (!got.constraint_violated || best.constraint_violated) worst = std::max(worst, ratio);
    std::ostringstream a1, a2;
    a1 << got.a.transpose();
    a2 << best.a.transpose();
    std::printf("%d,%s,%.10g,%d,%s,%.10g,%d,%.6f\n", t, a1.str().c_str(), got.metric,
                got.constraint_violated ? 0 : 1, a2.str().c_str(), best.metric, best.constraint_violated ? 0 : 1,
                ratio);
  }
  std::printf("# worst comparable ratio %.6f\n", worst);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice-coded over-the-air federated learning simulator"};
  app.require_subcommand(1);

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Run an experiment or a preset sweep");
  run_cmd->add_option("--config", run.config, "JSON experiment config")->check(CLI::ExistingFile);
  run_cmd->add_option("--set", run.sets, "Override a dotted key, e.g. channel.snr=20");
  run_cmd->add_option("--preset", run.preset, "Named sweep (see `presets`)");
  run_cmd->add_option("--seeds", run.seeds, "Comma-separated seed list");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--jobs", run.jobs, "Worker threads (0 = all cores)");

  app.add_subcommand("presets", "List bundled presets");

  CLI::App* oracle_cmd = app.add_subcommand("oracle", "Brute-force reference checks");
  oracle_cmd->require_subcommand(1);
  std::string lattice_name = "e8";
  double scale = 1.0;
  int trials = 1000;
  std::uint64_t seed = 1;
  CLI::App* lat_cmd = oracle_cmd->add_subcommand("lattice", "Fast decoder against exhaustive enumeration");
  lat_cmd->add_option("--lattice", lattice_name, "identity, hexagonal or e8");
  lat_cmd->add_option("--scale", scale, "rho");
  lat_cmd->add_option("--trials", trials, "Random inputs");
  lat_cmd->add_option("--seed", seed, "RNG seed");

  int devices = 3, antennas = 30, bound = 5, coeff_trials = 20;
  double snr = 10.0, theta = 0.0;
  CLI::App* coeff_cmd = oracle_cmd->add_subcommand("coeffs", "Coefficient selection against brute force");
  coeff_cmd->add_option("--devices", devices, "K (<= 6)");
  coeff_cmd->add_option("--antennas", antennas, "M");
  coeff_cmd->add_option("--snr", snr, "Linear SNR");
  coeff_cmd->add_option("--lattice", lattice_name, "identity, hexagonal or e8");
  coeff_cmd->add_option("--scale", scale, "rho");
  coeff_cmd->add_option("--theta", theta, "DMSE threshold (default from the lattice)");
  coeff_cmd->add_option("--bound", bound, "Largest coefficient searched");
  coeff_cmd->add_option("--trials", coeff_trials, "Random channels");
  coeff_cmd->add_option("--seed", seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (run.config.empty() && run.preset.empty()) throw ConfigError("run needs --config or --preset");
      return cmd_run(run);
    }
    if (app.got_subcommand("presets")) {
      for (const Preset& p : presets()) {
        std::printf("%-14s %-34s sweep %s over", p.name.c_str(), p.description.c_str(), p.sweep_key.c_str());
        for (const json& v : p.sweep_values) std::printf(" %s", v.dump().c_str());
        std::printf("\n");
      }
      return 0;
    }
    if (*lat_cmd) return cmd_oracle_lattice(lattice_name, scale, trials, seed);
    if (*coeff_cmd)
      return cmd_oracle_coeffs(devices, antennas, snr, lattice_name, scale, theta, bound, coeff_trials, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
