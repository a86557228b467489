#include "crlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crlab/random.hpp"
#include "crlab/scm.hpp"

namespace crlab {

void TrainConfig::validate() const {
  if (lambda_invariance < 0.0)
    throw std::invalid_argument("TrainConfig: lambda_invariance must be nonnegative");
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
  if (n_epochs < 1) throw std::invalid_argument("TrainConfig: n_epochs must be >= 1");
  if (depth < 1) throw std::invalid_argument("TrainConfig: depth must be >= 1");
}

std::vector<int> TrainConfig::encoder_sizes(int in_dim) const {
  const int width = encoding_width > 0 ? encoding_width : in_dim;
  std::vector<int> sizes{in_dim};
  for (int l = 0; l + 1 < depth; ++l) sizes.push_back(hidden_dim);
  sizes.push_back(width);
  return sizes;
}

std::vector<int> TrainConfig::decoder_sizes(int in_dim) const {
  std::vector<int> sizes = encoder_sizes(in_dim);
  std::reverse(sizes.begin(), sizes.end());
  return sizes;
}

Matrix encode(const TrainedModel& model, const Matrix& x, int env_index) {
  return forward(model.encoder_for(env_index), x);
}

namespace {

std::vector<int> shuffled_indices(int n, CounterRng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.uniform01() * (i + 1));
    std::swap(idx[i], idx[std::min(j, i)]);
  }
  return idx;
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& idx, int begin, int count) {
  Matrix out(count, m.cols());
  for (int i = 0; i < count; ++i) out.row(i) = m.row(idx[begin + i]);
  return out;
}

std::vector<double> mixture_bandwidths(const Matrix& a, const Matrix& b) {
  const double base = median_heuristic_bandwidth(a, b);
  return {0.5 * base, base, 2.0 * base};
}

void check_finite(double loss, int epoch, LossHistory& history) {
  if (!std::isfinite(loss))
    throw TrainDivergence("training diverged (non-finite loss) in epoch " + std::to_string(epoch),
                          history);
}

}  // namespace

TrainedModel train_marginal_invariance(const std::vector<ObservationBatch>& env_data,
                                       const std::vector<Selector>& selectors,
                                       const TrainConfig& cfg) {
  cfg.validate();
  if (env_data.size() < 2)
    throw std::invalid_argument("train_marginal_invariance: need >= 2 environments");
  const int dim = static_cast<int>(env_data.front().values.cols());
  const int enc_width = cfg.encoding_width > 0 ? cfg.encoding_width : dim;
  std::vector<int> env_ids;
  for (const auto& batch : env_data) {
    if (batch.values.cols() != dim)
      throw std::invalid_argument("train_marginal_invariance: environment widths differ");
    env_ids.push_back(batch.env_id);
  }
  auto env_index = [&](int env_id) {
    auto it = std::find(env_ids.begin(), env_ids.end(), env_id);
    if (it == env_ids.end())
      throw std::invalid_argument("selector references unknown env_id " + std::to_string(env_id));
    return static_cast<int>(it - env_ids.begin());
  };
  for (const auto& sel : selectors) {
    if (sel.mask.size() != enc_width)
      throw std::invalid_argument("selector mask width must equal the encoding width");
    if (sel.env_group.size() < 2)
      throw std::invalid_argument("selector env group needs at least two environments");
    for (int id : sel.env_group) env_index(id);
  }

  TrainedModel model;
  model.shared_encoder = true;
  model.selectors = selectors;
  model.encoders.emplace_back(cfg.encoder_sizes(dim), derive_seed(cfg.seed, 1), cfg.slope);
  model.decoders.emplace_back(cfg.decoder_sizes(dim), derive_seed(cfg.seed, 2), cfg.slope);
  Mlp& enc = model.encoders.front();
  Mlp& dec = model.decoders.front();
  AdamState enc_opt(enc, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  AdamState dec_opt(dec, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);

  const int n_envs = static_cast<int>(env_data.size());
  int min_rows = static_cast<int>(env_data.front().values.rows());
  for (const auto& batch : env_data) min_rows = std::min(min_rows, (int)batch.values.rows());
  const int batch = std::min(cfg.batch_size, min_rows);
  const int steps = std::max(1, min_rows / batch);
  const int mmd_rows = std::max(2, std::min(cfg.mmd_batch, batch));

  model.history.columns = {"epoch"};
  for (int e = 0; e < n_envs; ++e)
    model.history.columns.push_back("recon_env" + std::to_string(env_ids[e]));
  model.history.columns.push_back("invariance");
  model.history.columns.push_back("total");

  std::vector<CounterRng> shuffle_rngs;
  for (int e = 0; e < n_envs; ++e)
    shuffle_rngs.emplace_back(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(e)));

  std::vector<ForwardCache> enc_caches(n_envs), dec_caches(n_envs);
  std::vector<Matrix> encodings(n_envs), input_batches(n_envs), enc_grads_out(n_envs);

  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    std::vector<std::vector<int>> perms;
    for (int e = 0; e < n_envs; ++e)
      perms.push_back(shuffled_indices((int)env_data[e].values.rows(), shuffle_rngs[e]));

    std::vector<double> recon_sums(n_envs, 0.0);
    double invariance_sum = 0.0, total_sum = 0.0;

    for (int step = 0; step < steps; ++step) {
      Gradients enc_grads = Gradients::zeros_like(enc);
      Gradients dec_grads = Gradients::zeros_like(dec);
      double step_total = 0.0;

      for (int e = 0; e < n_envs; ++e) {
        input_batches[e] = gather_rows(env_data[e].values, perms[e], step * batch, batch);
        encodings[e] = forward(enc, input_batches[e], &enc_caches[e]);
        Matrix recon = forward(dec, encodings[e], &dec_caches[e]);
        const double recon_loss = mse_reconstruction(recon, input_batches[e]);
        recon_sums[e] += recon_loss;
        step_total += recon_loss;
        Gradients dg;
        enc_grads_out[e] = backward(dec, dec_caches[e], mse_reconstruction_grad(recon, input_batches[e]), &dg);
        dec_grads += dg;
      }

      for (const auto& sel : selectors) {
        for (std::size_t a = 0; a < sel.env_group.size(); ++a) {
          for (std::size_t b = a + 1; b < sel.env_group.size(); ++b) {
            const int ia = env_index(sel.env_group[a]);
            const int ib = env_index(sel.env_group[b]);
            Matrix za = select_columns(sel.mask, encodings[ia].topRows(mmd_rows));
            Matrix zb = select_columns(sel.mask, encodings[ib].topRows(mmd_rows));
            Matrix ga, gb;
            const double mmd = mmd_rbf_with_grad(za, zb, mixture_bandwidths(za, zb), &ga, &gb);
            invariance_sum += mmd;
            step_total += cfg.lambda_invariance * mmd;
            if (cfg.lambda_invariance > 0.0) {
              int col = 0;
              for (int j = 0; j < sel.mask.size(); ++j) {
                if (sel.mask(j) == 0) continue;
                enc_grads_out[ia].col(j).head(mmd_rows) += cfg.lambda_invariance * ga.col(col);
                enc_grads_out[ib].col(j).head(mmd_rows) += cfg.lambda_invariance * gb.col(col);
                ++col;
              }
            }
          }
        }
      }

      for (int e = 0; e < n_envs; ++e) {
        Gradients eg;
        backward(enc, enc_caches[e], enc_grads_out[e], &eg);
        enc_grads += eg;
      }

      check_finite(step_total, epoch, model.history);
      total_sum += step_total;
      enc_opt.step(enc, enc_grads);
      dec_opt.step(dec, dec_grads);
    }

    std::vector<double> row{static_cast<double>(epoch)};
    for (int e = 0; e < n_envs; ++e) row.push_back(recon_sums[e] / steps);
    row.push_back(invariance_sum / steps);
    row.push_back(total_sum / steps);
    model.history.rows.push_back(std::move(row));
  }
  return model;
}

TrainedModel train_multiview(const std::vector<ObservationBatch>& views, int shared_block_size,
                             const TrainConfig& cfg) {
  cfg.validate();
  if (views.size() < 2) throw std::invalid_argument("train_multiview: need >= 2 views");
  const int n_rows = static_cast<int>(views.front().values.rows());
  for (const auto& v : views)
    if (v.values.rows() != n_rows)
      throw std::invalid_argument("train_multiview: views must be row-paired");
  const int n_views = static_cast<int>(views.size());

  TrainedModel model;
  model.shared_encoder = false;
  std::vector<AdamState> enc_opts, dec_opts;
  std::vector<int> enc_widths;
  for (int v = 0; v < n_views; ++v) {
    const int dim = static_cast<int>(views[v].values.cols());
    const int width = cfg.encoding_width > 0 ? cfg.encoding_width : dim;
    if (shared_block_size < 1 || shared_block_size > width)
      throw std::invalid_argument("train_multiview: shared_block_size out of range");
    enc_widths.push_back(width);
    model.encoders.emplace_back(cfg.encoder_sizes(dim), derive_seed(cfg.seed, 1 + v), cfg.slope);
    model.decoders.emplace_back(cfg.decoder_sizes(dim), derive_seed(cfg.seed, 50 + v), cfg.slope);
    enc_opts.emplace_back(model.encoders[v], cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                          cfg.adam_epsilon);
    dec_opts.emplace_back(model.decoders[v], cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                          cfg.adam_epsilon);
    Selector sel;
    sel.mask = IntVector::Zero(width);
    sel.mask.head(shared_block_size).setOnes();
    sel.property_id = 0;
    sel.env_group.push_back(views[v].env_id);
    model.selectors.push_back(std::move(sel));
  }

  const int batch = std::min(cfg.batch_size, n_rows);
  const int steps = std::max(1, n_rows / batch);
  CounterRng shuffle_rng(derive_seed(cfg.seed, 100));

  model.history.columns = {"epoch"};
  for (int v = 0; v < n_views; ++v)
    model.history.columns.push_back("recon_view" + std::to_string(v));
  model.history.columns.push_back("alignment");
  model.history.columns.push_back("total");

  std::vector<ForwardCache> enc_caches(n_views), dec_caches(n_views);
  std::vector<Matrix> encodings(n_views), input_batches(n_views), enc_grads_out(n_views);

  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    // One permutation for all views: rows are paired samples.
    std::vector<int> perm = shuffled_indices(n_rows, shuffle_rng);
    std::vector<double> recon_sums(n_views, 0.0);
    double align_sum = 0.0, total_sum = 0.0;

    for (int step = 0; step < steps; ++step) {
      double step_total = 0.0;
      std::vector<Gradients> enc_grads, dec_grads;

      for (int v = 0; v < n_views; ++v) {
        input_batches[v] = gather_rows(views[v].values, perm, step * batch, batch);
        encodings[v] = forward(model.encoders[v], input_batches[v], &enc_caches[v]);
        Matrix recon = forward(model.decoders[v], encodings[v], &dec_caches[v]);
        const double recon_loss = mse_reconstruction(recon, input_batches[v]);
        recon_sums[v] += recon_loss;
        step_total += recon_loss;
        Gradients dg;
        enc_grads_out[v] =
            backward(model.decoders[v], dec_caches[v], mse_reconstruction_grad(recon, input_batches[v]), &dg);
        dec_grads.push_back(std::move(dg));
      }

      for (int a = 0; a < n_views; ++a) {
        for (int b = a + 1; b < n_views; ++b) {
          Matrix block_a = encodings[a].leftCols(shared_block_size);
          Matrix block_b = encodings[b].leftCols(shared_block_size);
          const double align = l2_alignment(block_a, block_b);
          align_sum += align;
          step_total += cfg.lambda_invariance * align;
          Matrix ga, gb;
          l2_alignment_grad(block_a, block_b, &ga, &gb);
          enc_grads_out[a].leftCols(shared_block_size) += cfg.lambda_invariance * ga;
          enc_grads_out[b].leftCols(shared_block_size) += cfg.lambda_invariance * gb;
        }
      }

      for (int v = 0; v < n_views; ++v) {
        Gradients eg;
        backward(model.encoders[v], enc_caches[v], enc_grads_out[v], &eg);
        enc_grads.push_back(std::move(eg));
      }

      check_finite(step_total, epoch, model.history);
      total_sum += step_total;
      for (int v = 0; v < n_views; ++v) {
        enc_opts[v].step(model.encoders[v], enc_grads[v]);
        dec_opts[v].step(model.decoders[v], dec_grads[v]);
      }
    }

    std::vector<double> row{static_cast<double>(epoch)};
    for (int v = 0; v < n_views; ++v) row.push_back(recon_sums[v] / steps);
    row.push_back(align_sum / steps);
    row.push_back(total_sum / steps);
    model.history.rows.push_back(std::move(row));
  }
  return model;
}

TrainedModel train_vrex(const std::vector<std::pair<ObservationBatch, Vector>>& env_data,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (env_data.size() < 2) throw std::invalid_argument("train_vrex: need >= 2 labeled environments");
  const int n_envs = static_cast<int>(env_data.size());
  const int dim = static_cast<int>(env_data.front().first.values.cols());
  const int enc_width = cfg.encoding_width > 0 ? cfg.encoding_width : dim;
  int min_rows = static_cast<int>(env_data.front().first.values.rows());
  for (const auto& [obs, labels] : env_data) {
    if (obs.values.cols() != dim) throw std::invalid_argument("train_vrex: widths differ");
    if (labels.size() != obs.values.rows())
      throw std::invalid_argument("train_vrex: label/observation row mismatch");
    min_rows = std::min(min_rows, (int)obs.values.rows());
  }

  TrainedModel model;
  model.shared_encoder = true;
  model.encoders.emplace_back(cfg.encoder_sizes(dim), derive_seed(cfg.seed, 1), cfg.slope);
  model.head = Mlp({enc_width, 1}, derive_seed(cfg.seed, 2), cfg.slope);
  Mlp& enc = model.encoders.front();
  AdamState enc_opt(enc, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  AdamState head_opt(model.head, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                     cfg.adam_epsilon);

  const int batch = std::min(cfg.batch_size, min_rows);
  const int steps = std::max(1, min_rows / batch);

  model.history.columns = {"epoch"};
  for (int e = 0; e < n_envs; ++e) model.history.columns.push_back("risk_env" + std::to_string(e));
  model.history.columns.push_back("mean_risk");
  model.history.columns.push_back("risk_variance");
  model.history.columns.push_back("total");

  std::vector<CounterRng> shuffle_rngs;
  for (int e = 0; e < n_envs; ++e)
    shuffle_rngs.emplace_back(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(e)));

  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    std::vector<std::vector<int>> perms;
    for (int e = 0; e < n_envs; ++e)
      perms.push_back(shuffled_indices((int)env_data[e].first.values.rows(), shuffle_rngs[e]));

    Vector risk_sums = Vector::Zero(n_envs);
    double total_sum = 0.0;

    for (int step = 0; step < steps; ++step) {
      std::vector<ForwardCache> enc_caches(n_envs), head_caches(n_envs);
      std::vector<Matrix> encodings(n_envs), predictions(n_envs), input_batches(n_envs);
      std::vector<Vector> label_batches(n_envs);
      Vector risks(n_envs);

      for (int e = 0; e < n_envs; ++e) {
        input_batches[e] = gather_rows(env_data[e].first.values, perms[e], step * batch, batch);
        label_batches[e].resize(batch);
        for (int i = 0; i < batch; ++i)
          label_batches[e](i) = env_data[e].second(perms[e][step * batch + i]);
        encodings[e] = forward(enc, input_batches[e], &enc_caches[e]);
        predictions[e] = forward(model.head, encodings[e], &head_caches[e]);
        risks(e) = mean_squared_risk(predictions[e].col(0), label_batches[e]);
      }

      const double mean_risk = risks.mean();
      const double variance = risk_variance(risks);
      const double step_total = mean_risk + cfg.lambda_invariance * variance;
      risk_sums += risks;
      check_finite(step_total, epoch, model.history);
      total_sum += step_total;

      Gradients enc_grads = Gradients::zeros_like(enc);
      Gradients head_grads = Gradients::zeros_like(model.head);
      for (int e = 0; e < n_envs; ++e) {
        // d total / d risk_e for the mean and variance terms.
        const double factor =
            1.0 / n_envs + cfg.lambda_invariance * 2.0 * (risks(e) - mean_risk) / n_envs;
        Matrix dpred = factor * 2.0 / batch * (predictions[e].col(0) - label_batches[e]);
        Gradients hg;
        Matrix dz = backward(model.head, head_caches[e], dpred, &hg);
        head_grads += hg;
        Gradients eg;
        backward(enc, enc_caches[e], dz, &eg);
        enc_grads += eg;
      }
      enc_opt.step(enc, enc_grads);
      head_opt.step(model.head, head_grads);
    }

    Vector epoch_risks = risk_sums / steps;
    std::vector<double> row{static_cast<double>(epoch)};
    for (int e = 0; e < n_envs; ++e) row.push_back(epoch_risks(e));
    row.push_back(epoch_risks.mean());
    row.push_back(risk_variance(epoch_risks));
    row.push_back(epoch_risks.mean() + cfg.lambda_invariance * risk_variance(epoch_risks));
    model.history.rows.push_back(std::move(row));
  }
  return model;
}

VariantDemoReport demo_variant_latents(bool independent_variant, const TrainConfig& cfg) {
  cfg.validate();
  LinearGaussianScm scm = [&]() -> LinearGaussianScm {
    if (!independent_variant) return three_chain_scm();
    // Same marginal scales as the chain, but no edges: the variant latent is
    // independent of the invariant pair.
    Dag dag(3, {});
    Vector intercepts(3), noise_std(3);
    intercepts << 10.5, 0.21, 3.21;
    noise_std << 0.8, 0.5, 1.118;
    return {std::move(dag), Matrix::Zero(3, 3), std::move(intercepts), std::move(noise_std)};
  }();

  CounterRng rng(derive_seed(cfg.seed, 7));
  InterventionSpec spec;
  spec.kind = InterventionKind::nintervention;
  spec.target = 1;
  spec.new_intercept = rng.uniform(2.0, 5.0);
  spec.new_std = 0.02;

  EnvironmentModel obs_env{scm, InterventionSpec{}, 0};
  EnvironmentModel nint_env{scm, spec, 1};
  MixingNet mixer = random_mixing(3, 3, derive_seed(cfg.seed, 8), cfg.slope);

  LatentBatch z_obs = sample(obs_env, cfg.n_samples, derive_seed(cfg.seed, 20));
  LatentBatch z_nint = sample(nint_env, cfg.n_samples, derive_seed(cfg.seed, 21));
  std::vector<ObservationBatch> data{mix(mixer, z_obs), mix(mixer, z_nint)};

  Selector sel;
  sel.mask = IntVector::Zero(3);
  sel.mask(0) = sel.mask(2) = 1;
  sel.property_id = 0;
  sel.env_group = {0, 1};

  TrainedModel model = train_marginal_invariance(data, {sel}, cfg);

  LatentBatch z_eval_obs = sample(obs_env, cfg.n_eval, derive_seed(cfg.seed, 30));
  LatentBatch z_eval_nint = sample(nint_env, cfg.n_eval, derive_seed(cfg.seed, 31));
  Matrix latents(z_eval_obs.values.rows() + z_eval_nint.values.rows(), 3);
  latents << z_eval_obs.values, z_eval_nint.values;
  Matrix encodings(latents.rows(), 3);
  encodings << encode(model, mix(mixer, z_eval_obs).values),
      encode(model, mix(mixer, z_eval_nint).values);

  IntVector complement_mask = IntVector::Ones(3) - sel.mask;
  VariantDemoReport out;
  out.independent_scenario = independent_variant;
  out.complement_r2 = krr_r2(select_columns(complement_mask, encodings), latents.col(1));
  out.selected_r2 = krr_r2(select_columns(sel.mask, encodings), latents.col(1));

  out.report.meta.scenario = independent_variant ? "variant_demo_independent" : "variant_demo_dependent";
  out.report.meta.seed = cfg.seed;
  out.report.meta.n_samples = cfg.n_samples;
  Matrix selected = select_columns(sel.mask, encodings);
  out.report.block_r2.resize(3);
  for (int j = 0; j < 3; ++j) out.report.block_r2(j) = krr_r2(selected, latents.col(j));
  out.report.affine_r2 = affine_fit_r2(encodings, latents).r2;
  out.report.element = matched_correlation(encodings, latents);
  return out;
}

}  // namespace crlab
