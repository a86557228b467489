#include "crlab/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "crlab/csv.hpp"
#include "crlab/random.hpp"

namespace crlab {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

IntVector mask_from_config(const ExperimentConfig& cfg, int width) {
  IntVector mask;
  if (cfg.selector_mask.empty()) {
    // Default: invariant block on the first and last coordinate.
    mask = IntVector::Zero(width);
    mask(0) = 1;
    mask(width - 1) = 1;
  } else {
    if (static_cast<int>(cfg.selector_mask.size()) != width)
      throw std::invalid_argument("selector_mask width must equal the encoding width");
    mask.resize(width);
    for (int i = 0; i < width; ++i) mask(i) = cfg.selector_mask[i];
  }
  return mask;
}

InterventionSpec nintervention_spec(const ExperimentConfig& cfg) {
  for (const auto& spec : cfg.interventions)
    if (spec.kind != InterventionKind::observational) return spec;
  InterventionSpec spec;
  spec.kind = InterventionKind::nintervention;
  spec.target = 1;
  spec.new_std = 0.02;
  return spec;
}

KrrOptions krr_options(const ExperimentConfig& cfg, std::uint64_t seed) {
  KrrOptions opts;
  opts.ridge = cfg.eval.krr_ridge;
  opts.bandwidth = cfg.eval.krr_bandwidth;
  opts.max_points = cfg.eval.krr_max_points;
  opts.split_seed = derive_seed(seed, 900);
  return opts;
}

IdentifiabilityReport evaluate_encoding(const Matrix& encodings, const Matrix& latents,
                                        const IntVector& block_mask, const KrrOptions& opts,
                                        const std::string& scenario, std::uint64_t seed) {
  IdentifiabilityReport report;
  report.meta.scenario = scenario;
  report.meta.seed = seed;
  report.meta.n_samples = static_cast<int>(latents.rows());
  const Matrix block = select_columns(block_mask, encodings);
  report.block_r2.resize(latents.cols());
  for (Eigen::Index j = 0; j < latents.cols(); ++j)
    report.block_r2(j) = krr_r2(block, latents.col(j), opts);
  report.affine_r2 = affine_fit_r2(encodings, latents, opts.split_seed).r2;
  if (encodings.cols() == latents.cols())
    report.element = matched_correlation(encodings, latents);
  return report;
}

}  // namespace

RunRecord run_nintervention(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const LinearGaussianScm scm = cfg.resolved_scm();
  const int n_latents = scm.n_nodes();
  InterventionSpec spec = nintervention_spec(cfg);
  validate_spec(scm, spec);

  RunRecord record;
  record.scenario = cfg.scenario;
  record.config = cfg.to_json();
  record.config_hash = config_hash(record.config);
  record.extra["per_seed"] = json::array();

  for (std::uint64_t seed : cfg.seeds) {
    InterventionSpec seed_spec = spec;
    if (!cfg.nint_mean_fixed) {
      CounterRng rng(derive_seed(seed, 11));
      seed_spec.new_intercept = rng.uniform(cfg.nint_mean_range.first, cfg.nint_mean_range.second);
    }
    const std::uint64_t mixing_seed = derive_seed(seed, 12);
    MixingNet mixer = random_mixing(n_latents, cfg.mixing.n_layers, mixing_seed, cfg.mixing.slope);

    EnvironmentModel obs_env{scm, InterventionSpec{}, 0};
    EnvironmentModel int_env{scm, seed_spec, 1};
    std::vector<ObservationBatch> data{
        mix(mixer, sample(obs_env, cfg.train.n_samples, derive_seed(seed, 13))),
        mix(mixer, sample(int_env, cfg.train.n_samples, derive_seed(seed, 14)))};

    const int enc_width = cfg.train.encoding_width > 0 ? cfg.train.encoding_width : n_latents;
    Selector sel;
    sel.mask = mask_from_config(cfg, enc_width);
    sel.property_id = 0;
    sel.env_group = {0, 1};

    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;
    TrainedModel model = train_marginal_invariance(data, {sel}, train_cfg);

    LatentBatch z_obs = sample(obs_env, cfg.train.n_eval, derive_seed(seed, 15));
    LatentBatch z_int = sample(int_env, cfg.train.n_eval, derive_seed(seed, 16));
    Matrix latents(z_obs.values.rows() + z_int.values.rows(), n_latents);
    latents << z_obs.values, z_int.values;
    Matrix encodings(latents.rows(), enc_width);
    encodings << encode(model, mix(mixer, z_obs).values), encode(model, mix(mixer, z_int).values);

    IdentifiabilityReport report = evaluate_encoding(encodings, latents, sel.mask,
                                                     krr_options(cfg, seed), cfg.scenario, seed);
    const double target_r2 = report.block_r2(seed_spec.target);
    IntVector complement_mask = IntVector::Ones(enc_width) - sel.mask;
    double complement_r2 = std::numeric_limits<double>::quiet_NaN();
    if (complement_mask.sum() > 0)
      complement_r2 = krr_r2(select_columns(complement_mask, encodings),
                             latents.col(seed_spec.target), krr_options(cfg, seed));

    json seed_extra;
    seed_extra["seed"] = seed;
    seed_extra["nint_mean"] = seed_spec.new_intercept;
    seed_extra["mixing_seed"] = mixing_seed;
    seed_extra["target_block_r2"] = target_r2;
    seed_extra["target_suppressed"] = target_r2 <= kSuppressionThreshold;
    seed_extra["complement_r2"] = complement_r2;
    record.extra["per_seed"].push_back(std::move(seed_extra));
    record.reports.push_back(std::move(report));
    record.histories.push_back(model.history);
  }
  record.wall_clock_seconds = seconds_since(start);
  return record;
}

RunRecord run_multiview(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();

  RunRecord record;
  record.scenario = cfg.scenario;
  record.config = cfg.to_json();
  record.config_hash = config_hash(record.config);
  record.extra["per_seed"] = json::array();

  // Three independent latents; view 0 sees (z1, z2), view 1 sees (z1, z3).
  Dag dag(3, {});
  Vector zero3 = Vector::Zero(3), one3 = Vector::Ones(3);
  LinearGaussianScm scm{dag, Matrix::Zero(3, 3), zero3, one3};
  const std::vector<std::vector<int>> view_latents{{0, 1}, {0, 2}};

  for (std::uint64_t seed : cfg.seeds) {
    LatentBatch z = sample(scm, cfg.train.n_samples, derive_seed(seed, 13));
    std::vector<MixingNet> mixers;
    std::vector<ObservationBatch> views;
    for (int v = 0; v < 2; ++v) {
      mixers.push_back(random_mixing(2, cfg.mixing.n_layers, derive_seed(seed, 40 + v), cfg.mixing.slope));
      Matrix vz(z.values.rows(), 2);
      vz << z.values.col(view_latents[v][0]), z.values.col(view_latents[v][1]);
      ObservationBatch view = mix(mixers[v], LatentBatch{std::move(vz), v});
      views.push_back(std::move(view));
    }

    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;
    TrainedModel model = train_multiview(views, cfg.shared_block_size, train_cfg);

    LatentBatch z_eval = sample(scm, cfg.train.n_eval, derive_seed(seed, 15));
    json seed_extra;
    seed_extra["seed"] = seed;
    const KrrOptions opts = krr_options(cfg, seed);
    std::vector<Matrix> shared_blocks;
    for (int v = 0; v < 2; ++v) {
      Matrix vz(z_eval.values.rows(), 2);
      vz << z_eval.values.col(view_latents[v][0]), z_eval.values.col(view_latents[v][1]);
      Matrix enc = encode(model, mix(mixers[v], LatentBatch{std::move(vz), v}).values, v);
      shared_blocks.push_back(enc.leftCols(cfg.shared_block_size));
      json r2 = json::array();
      for (int j = 0; j < 3; ++j)
        r2.push_back(krr_r2(shared_blocks[v], z_eval.values.col(j), opts));
      seed_extra["shared_block_r2_view" + std::to_string(v)] = std::move(r2);
    }

    IdentifiabilityReport report;
    report.meta.scenario = cfg.scenario;
    report.meta.seed = seed;
    report.meta.n_samples = static_cast<int>(z_eval.values.rows());
    report.block_r2.resize(3);
    for (int j = 0; j < 3; ++j)
      report.block_r2(j) = krr_r2(shared_blocks[0], z_eval.values.col(j), opts);
    Matrix both(z_eval.values.rows(), 2 * cfg.shared_block_size);
    both << shared_blocks[0], shared_blocks[1];
    report.affine_r2 = affine_fit_r2(both, z_eval.values, opts.split_seed).r2;
    record.reports.push_back(std::move(report));
    record.histories.push_back(model.history);
    record.extra["per_seed"].push_back(std::move(seed_extra));
  }
  record.wall_clock_seconds = seconds_since(start);
  return record;
}

namespace {

// Labels depend on z1 only; z2 leaks the label with an environment-specific
// noise scale, making it spuriously predictive under pooled risk.
struct VrexWorld {
  LinearGaussianScm scm;
  MixingNet mixer;
  std::vector<double> leak_scales;
  double label_noise = 0.5;

  static VrexWorld make(std::uint64_t seed, int mixing_layers, double slope) {
    Dag dag(2, {});
    Vector zero2 = Vector::Zero(2), one2 = Vector::Ones(2);
    return {LinearGaussianScm{dag, Matrix::Zero(2, 2), zero2, one2},
            random_mixing(2, mixing_layers, derive_seed(seed, 41), slope),
            {0.1, 0.25, 0.4}};
  }

  // Environment e: z1 ~ N(0,1), y = z1 + noise, z2 = y + leak_e * noise.
  std::pair<ObservationBatch, Vector> make_env(int e, int n, std::uint64_t seed) const {
    CounterRng rng(derive_seed(seed, 300 + static_cast<std::uint64_t>(e)));
    Matrix z(n, 2);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      const double z1 = rng.normal();
      y(i) = z1 + label_noise * rng.normal();
      z(i, 0) = z1;
      z(i, 1) = y(i) + leak_scales[e] * rng.normal();
    }
    ObservationBatch obs = mix(mixer, LatentBatch{std::move(z), e});
    return {std::move(obs), std::move(y)};
  }
};

// Mean absolute finite-difference of the prediction along one latent axis.
double latent_sensitivity(const TrainedModel& model, const MixingNet& mixer, const Matrix& probes,
                          int axis, double h = 0.05) {
  Matrix plus = probes, minus = probes;
  plus.col(axis).array() += h;
  minus.col(axis).array() -= h;
  auto predict = [&](const Matrix& z) {
    ObservationBatch x = mix(mixer, LatentBatch{z, 0});
    return forward(model.head, encode(model, x.values));
  };
  return (predict(plus) - predict(minus)).array().abs().mean() / (2.0 * h);
}

}  // namespace

RunRecord run_vrex(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();

  RunRecord record;
  record.scenario = cfg.scenario;
  record.config = cfg.to_json();
  record.config_hash = config_hash(record.config);
  record.extra["sweep"] = json::array();

  const int n_envs = 3;
  for (std::uint64_t seed : cfg.seeds) {
    VrexWorld world = VrexWorld::make(seed, cfg.mixing.n_layers, cfg.mixing.slope);
    std::vector<std::pair<ObservationBatch, Vector>> env_data;
    for (int e = 0; e < n_envs; ++e)
      env_data.push_back(world.make_env(e, cfg.train.n_samples, seed));

    // Probe points from environment 0's latent distribution.
    CounterRng probe_rng(derive_seed(seed, 500));
    Matrix probes(256, 2);
    for (int i = 0; i < probes.rows(); ++i) {
      const double z1 = probe_rng.normal();
      const double y = z1 + world.label_noise * probe_rng.normal();
      probes(i, 0) = z1;
      probes(i, 1) = y + world.leak_scales[0] * probe_rng.normal();
    }

    const TrainedModel* last_model = nullptr;
    std::vector<TrainedModel> models;
    for (double lambda : cfg.lambda_grid) {
      TrainConfig train_cfg = cfg.train;
      train_cfg.seed = seed;
      train_cfg.lambda_invariance = lambda;
      models.push_back(train_vrex(env_data, train_cfg));
      const TrainedModel& model = models.back();
      const auto& final_row = model.history.rows.back();
      // Columns: epoch, risk_env..., mean_risk, risk_variance, total.
      const int k = n_envs;
      json row;
      row["seed"] = seed;
      row["lambda"] = lambda;
      row["pooled_risk"] = final_row[1 + k];
      row["risk_variance"] = final_row[2 + k];
      row["sensitivity_z1"] = latent_sensitivity(model, world.mixer, probes, 0);
      row["sensitivity_z2"] = latent_sensitivity(model, world.mixer, probes, 1);
      record.extra["sweep"].push_back(std::move(row));
      last_model = &model;
    }

    // Report from the strongest-regularized cell.
    if (last_model) {
      LatentBatch z_eval{Matrix(cfg.train.n_eval, 2), 0};
      CounterRng eval_rng(derive_seed(seed, 501));
      for (int i = 0; i < cfg.train.n_eval; ++i) {
        const double z1 = eval_rng.normal();
        const double y = z1 + world.label_noise * eval_rng.normal();
        z_eval.values(i, 0) = z1;
        z_eval.values(i, 1) = y + world.leak_scales[0] * eval_rng.normal();
      }
      Matrix enc = encode(*last_model, mix(world.mixer, z_eval).values);
      IntVector all_mask = IntVector::Ones(enc.cols());
      record.reports.push_back(evaluate_encoding(enc, z_eval.values, all_mask,
                                                 krr_options(cfg, seed), cfg.scenario, seed));
      record.histories.push_back(last_model->history);
    }
  }
  record.wall_clock_seconds = seconds_since(start);
  return record;
}

RunRecord run_variant_demo(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();

  RunRecord record;
  record.scenario = cfg.scenario;
  record.config = cfg.to_json();
  record.config_hash = config_hash(record.config);
  record.extra["per_seed"] = json::array();

  const bool independent = cfg.variant == "independent";
  for (std::uint64_t seed : cfg.seeds) {
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;
    VariantDemoReport demo = demo_variant_latents(independent, train_cfg);
    json seed_extra;
    seed_extra["seed"] = seed;
    seed_extra["complement_r2"] = demo.complement_r2;
    seed_extra["selected_r2"] = demo.selected_r2;
    seed_extra["independent"] = demo.independent_scenario;
    record.extra["per_seed"].push_back(std::move(seed_extra));
    record.reports.push_back(std::move(demo.report));
  }
  record.wall_clock_seconds = seconds_since(start);
  return record;
}

std::vector<OracleRow> run_oracle(const ExperimentConfig& cfg) {
  cfg.validate();
  const LinearGaussianScm scm = cfg.resolved_scm();
  std::vector<InterventionSpec> specs = cfg.interventions;
  if (specs.empty()) {
    for (auto kind : {InterventionKind::perfect, InterventionKind::imperfect,
                      InterventionKind::nintervention})
      for (int t = 0; t < scm.n_nodes(); ++t) {
        InterventionSpec spec;
        spec.kind = kind;
        spec.target = t;
        spec.new_intercept = scm.intercepts()(t) + 2.0;
        spec.new_std = 1.5 * scm.noise_std()(t);
        specs.push_back(spec);
      }
  }
  std::vector<OracleRow> rows;
  int env_id = 1;
  for (const auto& spec : specs) {
    if (spec.kind == InterventionKind::observational) continue;
    EnvironmentModel env{scm, spec, env_id++};
    InvariantPartition part = invariant_partition(env);
    InvarianceCheck check = verify_invariance_oracle(scm, env);
    rows.push_back({spec.kind, spec.target, part.marginal, part.score, check.agrees_with_partition});
  }
  return rows;
}

std::string oracle_table_to_string(const std::vector<OracleRow>& rows) {
  std::ostringstream out;
  out << "kind,target,marginal_invariant,score_invariant,verified\n";
  auto set_to_string = [](const IndexSet& s) {
    std::string text = "{";
    for (std::size_t i = 0; i < s.size(); ++i)
      text += (i ? " " : "") + std::to_string(s[i] + 1);
    return text + "}";
  };
  for (const auto& row : rows)
    out << to_string(row.kind) << ',' << row.target + 1 << ',' << set_to_string(row.marginal)
        << ',' << set_to_string(row.score) << ',' << (row.verified ? "yes" : "NO") << '\n';
  return out.str();
}

AggregateSummary aggregate(const std::vector<IdentifiabilityReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate: empty input");
  for (const auto& r : reports)
    if (r.meta.scenario != reports.front().meta.scenario)
      throw std::invalid_argument("aggregate: mixed scenarios");

  AggregateSummary summary;
  summary.scenario = reports.front().meta.scenario;
  const auto n_block = reports.front().block_r2.size();
  const auto n_affine = reports.front().affine_r2.size();
  for (Eigen::Index j = 0; j < n_block; ++j)
    summary.metrics.push_back("block_r2_z" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < n_affine; ++j)
    summary.metrics.push_back("affine_r2_z" + std::to_string(j + 1));
  summary.metrics.push_back("mean_abs_rho");

  auto metric_value = [&](const IdentifiabilityReport& r, std::size_t m) -> double {
    if (m < static_cast<std::size_t>(n_block)) return r.block_r2(m);
    m -= n_block;
    if (m < static_cast<std::size_t>(n_affine)) return r.affine_r2(m);
    return r.element.mean_abs_rho;
  };

  for (std::size_t m = 0; m < summary.metrics.size(); ++m) {
    Vector values(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) values(i) = metric_value(reports[i], m);
    const double mean = values.mean();
    summary.mean.push_back(mean);
    summary.sd.push_back(std::sqrt((values.array() - mean).square().sum() / values.size()));
    summary.min.push_back(values.minCoeff());
    summary.max.push_back(values.maxCoeff());
  }
  return summary;
}

json AggregateSummary::to_json() const {
  json doc;
  doc["schema_version"] = 1;
  doc["scenario"] = scenario;
  json metrics_doc;
  for (std::size_t m = 0; m < metrics.size(); ++m)
    metrics_doc[metrics[m]] = {{"mean", mean[m]}, {"sd", sd[m]}, {"min", min[m]}, {"max", max[m]}};
  doc["metrics"] = std::move(metrics_doc);
  return doc;
}

std::string AggregateSummary::to_csv() const {
  std::ostringstream out;
  out << "metric,mean,sd,min,max\n";
  for (std::size_t m = 0; m < metrics.size(); ++m)
    out << metrics[m] << ',' << mean[m] << ',' << sd[m] << ',' << min[m] << ',' << max[m] << '\n';
  return out.str();
}

std::filesystem::path write_run_record(const RunRecord& record,
                                       const std::filesystem::path& outdir) {
  namespace fs = std::filesystem;
  const fs::path base = outdir / record.scenario / record.config_hash;
  fs::create_directories(base);

  for (std::size_t i = 0; i < record.reports.size(); ++i) {
    const fs::path seed_dir = base / ("seed_" + std::to_string(record.reports[i].meta.seed));
    fs::create_directories(seed_dir);
    std::ofstream(seed_dir / "report.json") << report_to_json(record.reports[i]);
    if (i < record.histories.size()) {
      std::ofstream losses(seed_dir / "losses.csv");
      write_csv(losses, record.histories[i].columns, record.histories[i].rows);
    }
  }

  if (!record.reports.empty()) {
    const AggregateSummary summary = aggregate(record.reports);
    std::ofstream(base / "summary.json") << summary.to_json().dump(2) << '\n';
    std::ofstream(base / "summary.csv") << summary.to_csv();
  }

  json record_doc;
  record_doc["schema_version"] = 1;
  record_doc["config"] = record.config;
  record_doc["config_hash"] = record.config_hash;
  record_doc["scenario"] = record.scenario;
  record_doc["wall_clock_seconds"] = record.wall_clock_seconds;
  record_doc["library_version"] = record.library_version;
  record_doc["extra"] = record.extra;
  std::ofstream(base / "record.json") << record_doc.dump(2) << '\n';
  return base;
}

std::string resolve_outdir(const std::string& flag_value, const ExperimentConfig& cfg) {
  if (!flag_value.empty()) return flag_value;
  if (!cfg.outdir.empty()) return cfg.outdir;
  if (const char* env = std::getenv("CRLAB_OUTDIR"); env && *env) return env;
  return "out";
}

}  // namespace crlab
