#include "crlab/scm.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <stdexcept>

#include "crlab/random.hpp"

namespace crlab {

Dag::Dag(int n_nodes, std::vector<std::pair<int, int>> edges)
    : n_(n_nodes), edges_(std::move(edges)) {
  if (n_ <= 0) throw std::invalid_argument("Dag: n_nodes must be positive");
  parents_.resize(n_);
  children_.resize(n_);
  std::set<std::pair<int, int>> seen;
  for (auto [p, c] : edges_) {
    if (p < 0 || p >= n_ || c < 0 || c >= n_)
      throw std::invalid_argument("Dag: edge index out of range");
    if (p == c) throw std::invalid_argument("Dag: self-loop");
    if (!seen.insert({p, c}).second) throw std::invalid_argument("Dag: duplicate edge");
    parents_[c].push_back(p);
    children_[p].push_back(c);
  }
  for (auto& v : parents_) std::sort(v.begin(), v.end());
  for (auto& v : children_) std::sort(v.begin(), v.end());
  topological_order(*this);  // throws on cycles
}

bool Dag::has_edge(int parent, int child) const {
  const auto& ch = children_[parent];
  return std::binary_search(ch.begin(), ch.end(), child);
}

std::vector<int> topological_order(const Dag& dag) {
  const int n = dag.n_nodes();
  std::vector<int> in_degree(n, 0);
  for (int i = 0; i < n; ++i) in_degree[i] = static_cast<int>(dag.parents(i).size());
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < n; ++i)
    if (in_degree[i] == 0) ready.push(i);
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    int node = ready.top();
    ready.pop();
    order.push_back(node);
    for (int c : dag.children(node))
      if (--in_degree[c] == 0) ready.push(c);
  }
  if (static_cast<int>(order.size()) != n)
    throw std::invalid_argument("Dag: cycle detected");
  return order;
}

IndexSet transitive_closure_of(const Dag& dag, const IndexSet& targets) {
  std::vector<bool> reached(dag.n_nodes(), false);
  std::queue<int> frontier;
  for (int t : targets) {
    if (t < 0 || t >= dag.n_nodes())
      throw std::invalid_argument("transitive_closure_of: target out of range");
    if (!reached[t]) {
      reached[t] = true;
      frontier.push(t);
    }
  }
  while (!frontier.empty()) {
    int node = frontier.front();
    frontier.pop();
    for (int c : dag.children(node))
      if (!reached[c]) {
        reached[c] = true;
        frontier.push(c);
      }
  }
  IndexSet out;
  for (int i = 0; i < dag.n_nodes(); ++i)
    if (reached[i]) out.push_back(i);
  return out;
}

IndexSet closed_parent_set(const Dag& dag, const IndexSet& targets) {
  std::set<int> out;
  for (int t : targets) {
    if (t < 0 || t >= dag.n_nodes())
      throw std::invalid_argument("closed_parent_set: target out of range");
    out.insert(t);
    for (int p : dag.parents(t)) out.insert(p);
  }
  return {out.begin(), out.end()};
}

IndexSet markov_blanket(const Dag& dag, int node) {
  std::set<int> out;
  for (int p : dag.parents(node)) out.insert(p);
  for (int c : dag.children(node)) {
    out.insert(c);
    for (int cp : dag.parents(c)) out.insert(cp);
  }
  out.erase(node);
  return {out.begin(), out.end()};
}

IndexSet complement(const IndexSet& subset, int n) {
  std::vector<bool> in(n, false);
  for (int i : subset) in[i] = true;
  IndexSet out;
  for (int i = 0; i < n; ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

LinearGaussianScm::LinearGaussianScm(Dag dag, Matrix weights, Vector intercepts,
                                     Vector noise_std)
    : dag_(std::move(dag)),
      weights_(std::move(weights)),
      intercepts_(std::move(intercepts)),
      noise_std_(std::move(noise_std)) {
  const int n = dag_.n_nodes();
  if (weights_.rows() != n || weights_.cols() != n)
    throw std::invalid_argument("LinearGaussianScm: weights must be N x N");
  if (intercepts_.size() != n || noise_std_.size() != n)
    throw std::invalid_argument("LinearGaussianScm: intercepts/noise_std must have length N");
  for (int child = 0; child < n; ++child)
    for (int parent = 0; parent < n; ++parent) {
      const bool edge = dag_.has_edge(parent, child);
      const double w = weights_(child, parent);
      if (edge && w == 0.0)
        throw std::invalid_argument("LinearGaussianScm: declared edge has zero weight");
      if (!edge && w != 0.0)
        throw std::invalid_argument("LinearGaussianScm: nonzero weight off the edge set");
    }
  if (!(noise_std_.array() > 0.0).all())
    throw std::invalid_argument("LinearGaussianScm: noise_std must be strictly positive");
}

std::string to_string(InterventionKind kind) {
  switch (kind) {
    case InterventionKind::observational: return "observational";
    case InterventionKind::perfect: return "perfect";
    case InterventionKind::imperfect: return "imperfect";
    case InterventionKind::nintervention: return "nintervention";
  }
  throw std::invalid_argument("unknown InterventionKind");
}

InterventionKind intervention_kind_from_string(const std::string& name) {
  if (name == "observational") return InterventionKind::observational;
  if (name == "perfect") return InterventionKind::perfect;
  if (name == "imperfect") return InterventionKind::imperfect;
  if (name == "nintervention") return InterventionKind::nintervention;
  throw std::invalid_argument("unknown intervention kind: " + name);
}

void validate_spec(const LinearGaussianScm& scm, const InterventionSpec& spec) {
  if (spec.kind == InterventionKind::observational) return;
  if (spec.target < 0 || spec.target >= scm.n_nodes())
    throw std::invalid_argument("InterventionSpec: target out of range");
  if (!(spec.new_std > 0.0))
    throw std::invalid_argument("InterventionSpec: new_std must be positive");
  if (spec.new_weights) {
    if (spec.kind != InterventionKind::imperfect)
      throw std::invalid_argument("InterventionSpec: only imperfect interventions carry parent weights");
    if (spec.new_weights->size() != scm.dag().parents(spec.target).size())
      throw std::invalid_argument("InterventionSpec: new_weights arity mismatch with parents");
  }
}

LinearGaussianScm intervened_scm(const LinearGaussianScm& scm, const InterventionSpec& spec) {
  validate_spec(scm, spec);
  if (spec.kind == InterventionKind::observational) return scm;
  if (spec.kind == InterventionKind::nintervention)
    throw std::invalid_argument("intervened_scm: ninterventions are not SCMs over the same graph");

  const int n = scm.n_nodes();
  const int t = spec.target;
  Matrix weights = scm.weights();
  Vector intercepts = scm.intercepts();
  Vector noise_std = scm.noise_std();
  intercepts(t) = spec.new_intercept;
  noise_std(t) = spec.new_std;

  std::vector<std::pair<int, int>> edges = scm.dag().edges();
  if (spec.kind == InterventionKind::perfect) {
    std::erase_if(edges, [t](const auto& e) { return e.second == t; });
    weights.row(t).setZero();
  } else if (spec.new_weights) {
    const auto& parents = scm.dag().parents(t);
    for (std::size_t i = 0; i < parents.size(); ++i) weights(t, parents[i]) = (*spec.new_weights)[i];
    // A replacement weight of zero severs that parent edge.
    std::erase_if(edges, [&](const auto& e) { return e.second == t && weights(t, e.first) == 0.0; });
  }
  return {Dag(n, std::move(edges)), std::move(weights), std::move(intercepts), std::move(noise_std)};
}

Moments joint_moments(const LinearGaussianScm& scm) {
  const int n = scm.n_nodes();
  Matrix a = Matrix::Identity(n, n) - scm.weights();  // invertible: acyclic => unit triangular up to permutation
  auto lu = a.partialPivLu();
  Vector mean = lu.solve(scm.intercepts());
  Matrix noise_cov = scm.noise_std().array().square().matrix().asDiagonal();
  Matrix half = lu.solve(noise_cov);                   // (I-W)^-1 D
  Matrix cov = lu.solve(half.transpose()).transpose();  // (I-W)^-1 D (I-W)^-T
  cov = 0.5 * (cov + cov.transpose());
  return {std::move(mean), std::move(cov)};
}

Moments environment_moments(const EnvironmentModel& env) {
  validate_spec(env.base, env.spec);
  switch (env.spec.kind) {
    case InterventionKind::observational:
      return joint_moments(env.base);
    case InterventionKind::perfect:
    case InterventionKind::imperfect:
      return joint_moments(intervened_scm(env.base, env.spec));
    case InterventionKind::nintervention: {
      Moments m = joint_moments(env.base);
      const int t = env.spec.target;
      m.mean(t) = env.spec.new_intercept;
      m.cov.row(t).setZero();
      m.cov.col(t).setZero();
      m.cov(t, t) = env.spec.new_std * env.spec.new_std;
      return m;
    }
  }
  throw std::invalid_argument("unknown InterventionKind");
}

namespace {

// Evaluates the structural equations for one row of noise draws.
void propagate(const LinearGaussianScm& scm, const std::vector<int>& order,
               const Vector& noise, Eigen::Ref<Eigen::RowVectorXd> z) {
  for (int i : order) {
    double value = scm.intercepts()(i) + scm.noise_std()(i) * noise(i);
    for (int p : scm.dag().parents(i)) value += scm.weights()(i, p) * z(p);
    z(i) = value;
  }
}

}  // namespace

LatentBatch sample(const EnvironmentModel& env, int n, std::uint64_t seed) {
  validate_spec(env.base, env.spec);
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  const bool nint = env.spec.kind == InterventionKind::nintervention;
  const LinearGaussianScm scm =
      nint ? env.base : intervened_scm(env.base, env.spec);
  const int dim = scm.n_nodes();
  const std::vector<int> order = topological_order(scm.dag());

  CounterRng rng(seed);
  Matrix values(n, dim);
  Vector noise(dim);
  for (int row = 0; row < n; ++row) {
    for (int i = 0; i < dim; ++i) noise(i) = rng.normal();
    propagate(scm, order, noise, values.row(row));
    if (nint)
      values(row, env.spec.target) = env.spec.new_intercept + env.spec.new_std * rng.normal();
  }
  return {std::move(values), env.env_id};
}

LatentBatch sample(const LinearGaussianScm& scm, int n, std::uint64_t seed) {
  return sample(EnvironmentModel{scm, InterventionSpec{}, 0}, n, seed);
}

Vector gaussian_score(const Moments& moments, const Vector& z) {
  return -moments.cov.llt().solve(z - moments.mean);
}

Vector score(const LinearGaussianScm& scm, const Vector& z) {
  if (z.size() != scm.n_nodes()) throw std::invalid_argument("score: dimension mismatch");
  return gaussian_score(joint_moments(scm), z);
}

InvariantPartition invariant_partition(const EnvironmentModel& env) {
  validate_spec(env.base, env.spec);
  if (env.spec.kind == InterventionKind::observational)
    throw std::invalid_argument("invariant_partition: no intervention to partition against");
  const Dag& dag = env.base.dag();
  const int n = dag.n_nodes();
  const int t = env.spec.target;
  InvariantPartition out;
  if (env.spec.kind == InterventionKind::nintervention) {
    out.marginal = complement({t}, n);
    IndexSet blanket = markov_blanket(dag, t);
    blanket.push_back(t);
    std::sort(blanket.begin(), blanket.end());
    out.score = complement(blanket, n);
  } else {
    out.marginal = complement(transitive_closure_of(dag, {t}), n);
    out.score = complement(closed_parent_set(dag, {t}), n);
  }
  return out;
}

InvarianceCheck verify_invariance_oracle(const LinearGaussianScm& base,
                                         const EnvironmentModel& env) {
  constexpr double kTol = 1e-9;
  constexpr int kProbes = 25;
  const int n = base.n_nodes();

  const Moments base_m = joint_moments(base);
  const Moments env_m = environment_moments(env);

  InvarianceCheck check;
  check.marginal_invariant.resize(n);
  check.score_invariant.assign(n, true);

  for (int j = 0; j < n; ++j) {
    check.marginal_invariant[j] = std::abs(base_m.mean(j) - env_m.mean(j)) < kTol &&
                                  std::abs(base_m.cov(j, j) - env_m.cov(j, j)) < kTol;
  }

  const LatentBatch probes = sample(base, kProbes, /*seed=*/0);
  for (int p = 0; p < kProbes; ++p) {
    Vector z = probes.values.row(p).transpose();
    Vector s_base = gaussian_score(base_m, z);
    Vector s_env = gaussian_score(env_m, z);
    for (int j = 0; j < n; ++j)
      if (std::abs(s_base(j) - s_env(j)) >= kTol) check.score_invariant[j] = false;
  }

  std::vector<bool> expect_marginal(n, true), expect_score(n, true);
  if (env.spec.kind != InterventionKind::observational) {
    const InvariantPartition part = invariant_partition(env);
    expect_marginal.assign(n, false);
    expect_score.assign(n, false);
    for (int j : part.marginal) expect_marginal[j] = true;
    for (int j : part.score) expect_score[j] = true;
  }
  check.agrees_with_partition =
      check.marginal_invariant == expect_marginal && check.score_invariant == expect_score;
  return check;
}

LinearGaussianScm three_chain_scm() {
  Dag dag(3, {{0, 1}, {1, 2}});
  Matrix weights = Matrix::Zero(3, 3);
  weights(1, 0) = 0.02;
  weights(2, 1) = 1.0;
  Vector intercepts(3), noise_std(3);
  intercepts << 10.5, 0.0, 3.0;
  noise_std << 0.8, 0.5, 1.0;
  return {std::move(dag), std::move(weights), std::move(intercepts), std::move(noise_std)};
}

}  // namespace crlab
