// Command-line driver for the simulation-and-training laboratory: builds
// latent models, trains invariance-regularized encoders, and reports
// identifiability metrics. See README.md for the config schema.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crlab/config.hpp"
#include "crlab/csv.hpp"
#include "crlab/harness.hpp"
#include "crlab/random.hpp"

namespace fs = std::filesystem;
using crlab::ExperimentConfig;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string outdir;
  std::vector<std::uint64_t> seeds;
  std::optional<double> lambda;
  std::optional<int> epochs;
  std::optional<int> samples;
  std::optional<int> batch;
  std::optional<double> learning_rate;
  bool dry_run = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("-c,--config", flags.config_path, "Experiment config file (JSON, // comments ok)");
  cmd->add_option("-o,--outdir", flags.outdir, "Output root (falls back to config, then $CRLAB_OUTDIR)");
  cmd->add_option("--seeds", flags.seeds, "Override the seed list");
  cmd->add_option("--lambda", flags.lambda, "Override the invariance weight");
  cmd->add_option("--epochs", flags.epochs, "Override the epoch count");
  cmd->add_option("--samples", flags.samples, "Override samples per environment");
  cmd->add_option("--batch", flags.batch, "Override the batch size");
  cmd->add_option("--lr", flags.learning_rate, "Override the learning rate");
  cmd->add_flag("--dry-run", flags.dry_run, "Validate and print the resolved plan; write nothing");
}

// Flag > file > default.
ExperimentConfig resolve_config(const CommonFlags& flags, const std::string& scenario) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty())
    cfg = ExperimentConfig::from_json(crlab::load_config_file(flags.config_path));
  if (!scenario.empty()) cfg.scenario = scenario;
  cfg.train.scenario = cfg.scenario;
  if (!flags.seeds.empty()) cfg.seeds = flags.seeds;
  if (flags.lambda) cfg.train.lambda_invariance = *flags.lambda;
  if (flags.epochs) cfg.train.n_epochs = *flags.epochs;
  if (flags.samples) cfg.train.n_samples = *flags.samples;
  if (flags.batch) cfg.train.batch_size = *flags.batch;
  if (flags.learning_rate) cfg.train.learning_rate = *flags.learning_rate;
  cfg.validate();
  return cfg;
}

bool announce_dry_run(const CommonFlags& flags, const ExperimentConfig& cfg) {
  if (!flags.dry_run) return false;
  json plan = cfg.to_json();
  plan["config_hash"] = crlab::config_hash(cfg.to_json());
  std::cout << plan.dump(2) << '\n';
  return true;
}

int run_scenario(const CommonFlags& flags, const std::string& scenario) {
  ExperimentConfig cfg = resolve_config(flags, scenario);
  if (announce_dry_run(flags, cfg)) return 0;
  crlab::RunRecord record;
  if (cfg.scenario == "nintervention")
    record = crlab::run_nintervention(cfg);
  else if (cfg.scenario == "multiview")
    record = crlab::run_multiview(cfg);
  else if (cfg.scenario == "vrex")
    record = crlab::run_vrex(cfg);
  else if (cfg.scenario == "variant_demo")
    record = crlab::run_variant_demo(cfg);
  else
    throw std::invalid_argument("unknown scenario: " + cfg.scenario);
  const fs::path dir = crlab::write_run_record(record, crlab::resolve_outdir(flags.outdir, cfg));
  std::cout << "wrote " << dir.string() << " (" << record.wall_clock_seconds << " s)\n";
  if (!record.reports.empty()) std::cout << crlab::aggregate(record.reports).to_csv();
  return 0;
}

int cmd_simulate(const CommonFlags& flags, int n, std::uint64_t seed) {
  ExperimentConfig cfg = resolve_config(flags, "");
  if (announce_dry_run(flags, cfg)) return 0;
  const crlab::LinearGaussianScm scm = cfg.resolved_scm();
  std::vector<crlab::EnvironmentModel> envs{{scm, crlab::InterventionSpec{}, 0}};
  int env_id = 1;
  for (const auto& spec : cfg.interventions) envs.push_back({scm, spec, env_id++});
  const fs::path dir = crlab::resolve_outdir(flags.outdir, cfg);
  fs::create_directories(dir);
  crlab::MixingNet mixer = crlab::random_mixing(scm.n_nodes(), cfg.mixing.n_layers,
                                                crlab::derive_seed(seed, 12), cfg.mixing.slope);
  for (const auto& env : envs) {
    crlab::LatentBatch z = crlab::sample(env, n, crlab::derive_seed(seed, 13 + env.env_id));
    std::ofstream latents(dir / ("latents_env" + std::to_string(env.env_id) + ".csv"));
    crlab::write_batch_csv(latents, z.values, "z", env.env_id);
    std::ofstream obs(dir / ("observations_env" + std::to_string(env.env_id) + ".csv"));
    crlab::write_batch_csv(obs, crlab::mix(mixer, z).values, "x", env.env_id);
  }
  std::cout << "wrote " << envs.size() << " environments to " << dir.string() << '\n';
  return 0;
}

int cmd_eval(const std::string& zhat_path, const std::string& z_path, const std::string& block,
             const std::string& out_path) {
  std::ifstream zhat_file(zhat_path), z_file(z_path);
  if (!zhat_file || !z_file) throw std::invalid_argument("eval: cannot open input CSVs");
  crlab::CsvTable zhat = crlab::read_csv(zhat_file);
  crlab::CsvTable z = crlab::read_csv(z_file);
  auto strip_env = [](crlab::CsvTable& t) {
    if (!t.header.empty() && t.header.back() == "env_id")
      t.values.conservativeResize(t.values.rows(), t.values.cols() - 1);
  };
  strip_env(zhat);
  strip_env(z);

  crlab::IntVector mask = crlab::IntVector::Ones(zhat.values.cols());
  if (!block.empty()) {
    mask.setZero();
    std::stringstream ss(block);
    std::string tok;
    while (std::getline(ss, tok, ',')) mask(std::stoi(tok) - 1) = 1;
  }

  crlab::IdentifiabilityReport report;
  report.meta.scenario = "eval";
  report.meta.n_samples = static_cast<int>(z.values.rows());
  const crlab::Matrix features = crlab::select_columns(mask, zhat.values);
  report.block_r2.resize(z.values.cols());
  for (Eigen::Index j = 0; j < z.values.cols(); ++j)
    report.block_r2(j) = crlab::krr_r2(features, z.values.col(j));
  report.affine_r2 = crlab::affine_fit_r2(zhat.values, z.values).r2;
  if (zhat.values.cols() == z.values.cols())
    report.element = crlab::matched_correlation(zhat.values, z.values);

  const std::string text = crlab::report_to_json(report);
  if (out_path.empty()) {
    std::cout << text << '\n';
  } else {
    std::ofstream(out_path) << text;
    std::cout << "wrote " << out_path << '\n';
  }
  return 0;
}

int cmd_oracle(const CommonFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags, "oracle");
  if (announce_dry_run(flags, cfg)) return 0;
  const auto rows = crlab::run_oracle(cfg);
  std::cout << crlab::oracle_table_to_string(rows);
  for (const auto& row : rows)
    if (!row.verified) return 2;
  return 0;
}

int cmd_aggregate(const std::vector<std::string>& report_paths, const std::string& dir_path) {
  std::vector<crlab::IdentifiabilityReport> reports;
  auto load = [&](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::invalid_argument("aggregate: cannot open " + p.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    reports.push_back(crlab::report_from_json(text));
  };
  if (!dir_path.empty())
    for (const auto& entry : fs::recursive_directory_iterator(dir_path))
      if (entry.path().filename() == "report.json") load(entry.path());
  for (const auto& p : report_paths) load(p);
  const crlab::AggregateSummary summary = crlab::aggregate(reports);
  std::cout << summary.to_csv();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariance-principle laboratory for causal representation learning"};
  app.require_subcommand(1);

  CommonFlags flags;
  int sim_n = 1000;
  std::uint64_t sim_seed = 0;
  std::string eval_zhat, eval_z, eval_block, eval_out;
  std::vector<std::string> agg_paths;
  std::string agg_dir;

  auto* simulate = app.add_subcommand("simulate", "Sample latents and observations to CSV");
  add_common_flags(simulate, flags);
  simulate->add_option("-n,--n", sim_n, "Draws per environment");
  simulate->add_option("--seed", sim_seed, "Sampling seed");

  auto* train = app.add_subcommand("train", "Run the configured scenario end to end");
  add_common_flags(train, flags);

  auto* eval = app.add_subcommand("eval", "Score an encoding CSV against a latent CSV");
  eval->add_option("--zhat", eval_zhat, "Estimated latents CSV")->required();
  eval->add_option("--z", eval_z, "Ground-truth latents CSV")->required();
  eval->add_option("--block", eval_block, "1-based encoding columns forming the block, e.g. 1,3");
  eval->add_option("--out", eval_out, "Report path (stdout when omitted)");

  auto* oracle = app.add_subcommand("oracle", "Print analytic invariant partitions");
  add_common_flags(oracle, flags);

  auto* rep_nint = app.add_subcommand("reproduce-nintervention",
                                      "Chain SCM + nintervention reproduction");
  add_common_flags(rep_nint, flags);
  auto* rep_multi = app.add_subcommand("reproduce-multiview", "Partially overlapping views");
  add_common_flags(rep_multi, flags);
  auto* rep_vrex = app.add_subcommand("reproduce-vrex", "Risk-invariance lambda sweep");
  add_common_flags(rep_vrex, flags);

  auto* aggregate = app.add_subcommand("aggregate", "Summarize per-seed reports");
  aggregate->add_option("reports", agg_paths, "report.json files");
  aggregate->add_option("--dir", agg_dir, "Directory searched recursively for report.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(flags, sim_n, sim_seed);
    if (train->parsed()) return run_scenario(flags, "");
    if (eval->parsed()) return cmd_eval(eval_zhat, eval_z, eval_block, eval_out);
    if (oracle->parsed()) return cmd_oracle(flags);
    if (rep_nint->parsed()) return run_scenario(flags, "nintervention");
    if (rep_multi->parsed()) return run_scenario(flags, "multiview");
    if (rep_vrex->parsed()) return run_scenario(flags, "vrex");
    if (aggregate->parsed()) return cmd_aggregate(agg_paths, agg_dir);
  } catch (const crlab::TrainDivergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
