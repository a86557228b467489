#include "crlab/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "crlab/random.hpp"

namespace crlab {

using nlohmann::json;

Mlp::Mlp(const std::vector<int>& sizes, std::uint64_t seed, double slope)
    : sizes_(sizes), slope_(slope) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
  CounterRng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l], fan_out = sizes_[l + 1];
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-a, a);
    weights_.push_back(std::move(w));
    biases_.push_back(Vector::Zero(fan_out));
  }
}

Gradients Gradients::zeros_like(const Mlp& mlp) {
  Gradients g;
  for (int l = 0; l < mlp.n_layers(); ++l) {
    g.weights.push_back(Matrix::Zero(mlp.weights()[l].rows(), mlp.weights()[l].cols()));
    g.biases.push_back(Vector::Zero(mlp.biases()[l].size()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

Gradients& Gradients::operator*=(double factor) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= factor;
    biases[l] *= factor;
  }
  return *this;
}

bool Gradients::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

Matrix forward(const Mlp& mlp, const Matrix& batch, ForwardCache* cache) {
  if (batch.cols() != mlp.in_dim()) throw std::invalid_argument("forward: input width mismatch");
  if (cache) {
    cache->input = batch;
    cache->pre_activations.clear();
  }
  Matrix h = batch;
  for (int l = 0; l < mlp.n_layers(); ++l) {
    h = (h * mlp.weights()[l].transpose()).rowwise() + mlp.biases()[l].transpose();
    if (cache) cache->pre_activations.push_back(h);
    if (l + 1 < mlp.n_layers())
      h = h.array().max(0.0) + mlp.slope() * h.array().min(0.0);
  }
  return h;
}

Matrix backward(const Mlp& mlp, const ForwardCache& cache, const Matrix& output_gradient,
                Gradients* grads) {
  const int n_layers = mlp.n_layers();
  if (static_cast<int>(cache.pre_activations.size()) != n_layers)
    throw std::invalid_argument("backward: cache does not match network depth");
  if (output_gradient.rows() != cache.input.rows() ||
      output_gradient.cols() != mlp.out_dim())
    throw std::invalid_argument("backward: output gradient shape mismatch");
  if (!grads) throw std::invalid_argument("backward: grads must not be null");

  grads->weights.resize(n_layers);
  grads->biases.resize(n_layers);

  Matrix delta = output_gradient;  // dLoss/dPre for the current layer
  Matrix activated;
  for (int l = n_layers - 1; l >= 0; --l) {
    if (l + 1 < n_layers) {
      // Entering layer l's output: undo the activation applied after it.
      delta.array() *= mlp.slope() + (1.0 - mlp.slope()) *
                                         (cache.pre_activations[l].array() >= 0.0).cast<double>();
    }
    const Matrix* layer_input = &cache.input;
    if (l > 0) {
      activated = cache.pre_activations[l - 1].array().max(0.0) +
                  mlp.slope() * cache.pre_activations[l - 1].array().min(0.0);
      layer_input = &activated;
    }
    grads->weights[l].noalias() = delta.transpose() * (*layer_input);
    grads->biases[l] = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * mlp.weights()[l];
  }
  return delta * mlp.weights()[0];
}

AdamState::AdamState(const Mlp& mlp, double learning_rate, double beta1, double beta2,
                     double epsilon)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (int l = 0; l < mlp.n_layers(); ++l) {
    m_w_.push_back(Matrix::Zero(mlp.weights()[l].rows(), mlp.weights()[l].cols()));
    v_w_.push_back(Matrix::Zero(mlp.weights()[l].rows(), mlp.weights()[l].cols()));
    m_b_.push_back(Vector::Zero(mlp.biases()[l].size()));
    v_b_.push_back(Vector::Zero(mlp.biases()[l].size()));
  }
}

void AdamState::step(Mlp& mlp, const Gradients& grads) {
  if (grads.weights.size() != m_w_.size())
    throw std::invalid_argument("adam: gradient/state layer count mismatch");
  if (!grads.all_finite())
    throw std::runtime_error("adam: non-finite gradient at step " +
                             std::to_string(step_count_ + 1));
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  const double scale = learning_rate_ / bc1;
  for (std::size_t l = 0; l < m_w_.size(); ++l) {
    m_w_[l] = beta1_ * m_w_[l] + (1.0 - beta1_) * grads.weights[l];
    v_w_[l] = beta2_ * v_w_[l].array() + (1.0 - beta2_) * grads.weights[l].array().square();
    mlp.weights()[l].array() -=
        scale * m_w_[l].array() / ((v_w_[l].array() / bc2).sqrt() + epsilon_);
    m_b_[l] = beta1_ * m_b_[l] + (1.0 - beta1_) * grads.biases[l];
    v_b_[l] = beta2_ * v_b_[l].array() + (1.0 - beta2_) * grads.biases[l].array().square();
    mlp.biases()[l].array() -=
        scale * m_b_[l].array() / ((v_b_[l].array() / bc2).sqrt() + epsilon_);
  }
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  const auto r = rows.size();
  const auto c = r ? rows.at(0).size() : 0;
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr.at(i).get<double>();
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Mlp& mlp, const AdamState* opt) {
  json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "mlp_checkpoint";
  doc["sizes"] = mlp.sizes();
  doc["slope"] = mlp.slope();
  json weights = json::array(), biases = json::array();
  for (int l = 0; l < mlp.n_layers(); ++l) {
    weights.push_back(matrix_to_json(mlp.weights()[l]));
    biases.push_back(vector_to_json(mlp.biases()[l]));
  }
  doc["weights"] = std::move(weights);
  doc["biases"] = std::move(biases);
  if (opt) {
    json adam;
    adam["learning_rate"] = opt->learning_rate_;
    adam["beta1"] = opt->beta1_;
    adam["beta2"] = opt->beta2_;
    adam["epsilon"] = opt->epsilon_;
    adam["step_count"] = opt->step_count_;
    json mw = json::array(), vw = json::array(), mb = json::array(), vb = json::array();
    for (std::size_t l = 0; l < opt->m_w_.size(); ++l) {
      mw.push_back(matrix_to_json(opt->m_w_[l]));
      vw.push_back(matrix_to_json(opt->v_w_[l]));
      mb.push_back(vector_to_json(opt->m_b_[l]));
      vb.push_back(vector_to_json(opt->v_b_[l]));
    }
    adam["m_w"] = std::move(mw);
    adam["v_w"] = std::move(vw);
    adam["m_b"] = std::move(mb);
    adam["v_b"] = std::move(vb);
    doc["adam"] = std::move(adam);
  }
  out << doc.dump(2) << '\n';
}

void load_checkpoint(std::istream& in, Mlp& mlp, AdamState* opt) {
  json doc = json::parse(in);
  if (doc.at("schema_version").get<int>() != 1)
    throw std::runtime_error("checkpoint: unsupported schema_version");
  if (doc.at("kind").get<std::string>() != "mlp_checkpoint")
    throw std::runtime_error("checkpoint: unexpected document kind");
  Mlp restored(doc.at("sizes").get<std::vector<int>>(), /*seed=*/0,
               doc.at("slope").get<double>());
  for (int l = 0; l < restored.n_layers(); ++l) {
    restored.weights()[l] = matrix_from_json(doc.at("weights").at(l));
    restored.biases()[l] = vector_from_json(doc.at("biases").at(l));
  }
  mlp = std::move(restored);
  if (opt) {
    if (!doc.contains("adam")) throw std::runtime_error("checkpoint: no optimizer state stored");
    const json& adam = doc.at("adam");
    AdamState state(mlp, adam.at("learning_rate").get<double>(), adam.at("beta1").get<double>(),
                    adam.at("beta2").get<double>(), adam.at("epsilon").get<double>());
    state.step_count_ = adam.at("step_count").get<std::int64_t>();
    for (std::size_t l = 0; l < state.m_w_.size(); ++l) {
      state.m_w_[l] = matrix_from_json(adam.at("m_w").at(l));
      state.v_w_[l] = matrix_from_json(adam.at("v_w").at(l));
      state.m_b_[l] = vector_from_json(adam.at("m_b").at(l));
      state.v_b_[l] = vector_from_json(adam.at("v_b").at(l));
    }
    *opt = std::move(state);
  }
}

}  // namespace crlab
