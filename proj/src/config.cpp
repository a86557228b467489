#include "crlab/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace crlab {

using nlohmann::json;

json scm_to_json(const LinearGaussianScm& scm) {
  json doc;
  doc["n_nodes"] = scm.n_nodes();
  json edges = json::array();
  for (auto [p, c] : scm.dag().edges())
    edges.push_back({{"from", p + 1}, {"to", c + 1}, {"weight", scm.weights()(c, p)}});
  doc["edges"] = std::move(edges);
  doc["intercepts"] = std::vector<double>(scm.intercepts().begin(), scm.intercepts().end());
  doc["noise_std"] = std::vector<double>(scm.noise_std().begin(), scm.noise_std().end());
  return doc;
}

LinearGaussianScm scm_from_json(const json& doc) {
  const int n = doc.at("n_nodes").get<int>();
  std::vector<std::pair<int, int>> edges;
  Matrix weights = Matrix::Zero(n, n);
  for (const auto& e : doc.at("edges")) {
    const int p = e.at("from").get<int>() - 1;
    const int c = e.at("to").get<int>() - 1;
    edges.emplace_back(p, c);
    if (p >= 0 && p < n && c >= 0 && c < n) weights(c, p) = e.at("weight").get<double>();
  }
  auto intercepts = doc.at("intercepts").get<std::vector<double>>();
  auto noise = doc.at("noise_std").get<std::vector<double>>();
  return {Dag(n, std::move(edges)), std::move(weights),
          Eigen::Map<Vector>(intercepts.data(), intercepts.size()),
          Eigen::Map<Vector>(noise.data(), noise.size())};
}

json spec_to_json(const InterventionSpec& spec) {
  json doc;
  doc["kind"] = to_string(spec.kind);
  if (spec.kind != InterventionKind::observational) {
    doc["target"] = spec.target + 1;
    doc["new_intercept"] = spec.new_intercept;
    doc["new_std"] = spec.new_std;
    if (spec.new_weights) doc["new_weights"] = *spec.new_weights;
  }
  return doc;
}

InterventionSpec spec_from_json(const json& doc) {
  InterventionSpec spec;
  spec.kind = intervention_kind_from_string(doc.at("kind").get<std::string>());
  if (spec.kind != InterventionKind::observational) {
    spec.target = doc.at("target").get<int>() - 1;
    spec.new_intercept = doc.value("new_intercept", 0.0);
    spec.new_std = doc.value("new_std", 1.0);
    if (doc.contains("new_weights"))
      spec.new_weights = doc.at("new_weights").get<std::vector<double>>();
  }
  return spec;
}

namespace {

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_rows(const json& rows) {
  const auto r = rows.size();
  const auto c = r ? rows.at(0).size() : 0;
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  return m;
}

}  // namespace

json mixing_to_json(const MixingNet& net) {
  json doc;
  doc["slope"] = net.slope();
  json layers = json::array();
  for (int l = 0; l < net.n_layers(); ++l) {
    json layer;
    layer["weights"] = matrix_rows(net.weights()[l]);
    layer["bias"] = std::vector<double>(net.biases()[l].begin(), net.biases()[l].end());
    layers.push_back(std::move(layer));
  }
  doc["layers"] = std::move(layers);
  return doc;
}

MixingNet mixing_from_json(const json& doc) {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  for (const auto& layer : doc.at("layers")) {
    weights.push_back(matrix_from_rows(layer.at("weights")));
    auto b = layer.at("bias").get<std::vector<double>>();
    biases.push_back(Eigen::Map<Vector>(b.data(), b.size()));
  }
  return {std::move(weights), std::move(biases), doc.at("slope").get<double>()};
}

std::string config_hash(const json& doc) {
  const std::string canonical = doc.dump();
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

json parse_config_text(const std::string& text) {
  return json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  ExperimentConfig cfg;
  cfg.scenario = doc.value("scenario", cfg.scenario);
  if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  cfg.outdir = doc.value("outdir", cfg.outdir);
  if (doc.contains("scm")) cfg.scm = scm_from_json(doc.at("scm"));
  if (doc.contains("interventions"))
    for (const auto& s : doc.at("interventions")) cfg.interventions.push_back(spec_from_json(s));
  if (doc.contains("nint_mean_range")) {
    auto range = doc.at("nint_mean_range").get<std::vector<double>>();
    if (range.size() != 2) throw std::invalid_argument("nint_mean_range must be [lo, hi]");
    cfg.nint_mean_range = {range[0], range[1]};
  }
  cfg.nint_mean_fixed = doc.value("nint_mean_fixed", false);
  if (doc.contains("mixing")) {
    cfg.mixing.n_layers = doc.at("mixing").value("n_layers", cfg.mixing.n_layers);
    cfg.mixing.slope = doc.at("mixing").value("slope", cfg.mixing.slope);
  }
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.n_epochs = t.value("n_epochs", cfg.train.n_epochs);
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.lambda_invariance = t.value("lambda_invariance", cfg.train.lambda_invariance);
    cfg.train.encoding_width = t.value("encoding_width", cfg.train.encoding_width);
    cfg.train.n_samples = t.value("n_samples", cfg.train.n_samples);
    cfg.train.n_eval = t.value("n_eval", cfg.train.n_eval);
    cfg.train.hidden_dim = t.value("hidden_dim", cfg.train.hidden_dim);
    cfg.train.depth = t.value("depth", cfg.train.depth);
    cfg.train.slope = t.value("slope", cfg.train.slope);
    cfg.train.adam_beta1 = t.value("adam_beta1", cfg.train.adam_beta1);
    cfg.train.adam_beta2 = t.value("adam_beta2", cfg.train.adam_beta2);
    cfg.train.adam_epsilon = t.value("adam_epsilon", cfg.train.adam_epsilon);
    cfg.train.mmd_batch = t.value("mmd_batch", cfg.train.mmd_batch);
  }
  if (doc.contains("eval")) {
    const json& e = doc.at("eval");
    cfg.eval.krr_max_points = e.value("krr_max_points", cfg.eval.krr_max_points);
    cfg.eval.krr_ridge = e.value("krr_ridge", cfg.eval.krr_ridge);
    cfg.eval.krr_bandwidth = e.value("krr_bandwidth", cfg.eval.krr_bandwidth);
  }
  if (doc.contains("selector_mask"))
    cfg.selector_mask = doc.at("selector_mask").get<std::vector<int>>();
  cfg.shared_block_size = doc.value("shared_block_size", cfg.shared_block_size);
  cfg.variant = doc.value("variant", cfg.variant);
  if (doc.contains("lambda_grid")) cfg.lambda_grid = doc.at("lambda_grid").get<std::vector<double>>();
  cfg.train.scenario = cfg.scenario;
  return cfg;
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["scenario"] = scenario;
  doc["seeds"] = seeds;
  doc["outdir"] = outdir;
  doc["scm"] = scm_to_json(resolved_scm());
  json specs = json::array();
  for (const auto& s : interventions) specs.push_back(spec_to_json(s));
  doc["interventions"] = std::move(specs);
  doc["nint_mean_range"] = std::vector<double>{nint_mean_range.first, nint_mean_range.second};
  doc["nint_mean_fixed"] = nint_mean_fixed;
  doc["mixing"] = {{"n_layers", mixing.n_layers}, {"slope", mixing.slope}};
  doc["train"] = {{"batch_size", train.batch_size},
                  {"n_epochs", train.n_epochs},
                  {"learning_rate", train.learning_rate},
                  {"lambda_invariance", train.lambda_invariance},
                  {"encoding_width", train.encoding_width},
                  {"n_samples", train.n_samples},
                  {"n_eval", train.n_eval},
                  {"hidden_dim", train.hidden_dim},
                  {"depth", train.depth},
                  {"slope", train.slope},
                  {"adam_beta1", train.adam_beta1},
                  {"adam_beta2", train.adam_beta2},
                  {"adam_epsilon", train.adam_epsilon},
                  {"mmd_batch", train.mmd_batch}};
  doc["eval"] = {{"krr_max_points", eval.krr_max_points},
                 {"krr_ridge", eval.krr_ridge},
                 {"krr_bandwidth", eval.krr_bandwidth}};
  doc["selector_mask"] = selector_mask;
  doc["shared_block_size"] = shared_block_size;
  doc["variant"] = variant;
  doc["lambda_grid"] = lambda_grid;
  return doc;
}

LinearGaussianScm ExperimentConfig::resolved_scm() const {
  return scm ? *scm : three_chain_scm();
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("config: seed list must not be empty");
  train.validate();
  const LinearGaussianScm model = resolved_scm();
  for (const auto& spec : interventions) validate_spec(model, spec);
  if (variant != "independent" && variant != "dependent")
    throw std::invalid_argument("config: variant must be independent or dependent");
  for (int m : selector_mask)
    if (m != 0 && m != 1) throw std::invalid_argument("config: selector_mask entries must be 0/1");
}

}  // namespace crlab
