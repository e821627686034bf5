#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "lapmrf/model.hpp"
#include "lapmrf/table.hpp"

namespace lapmrf {

struct InferenceResult {
  double log_z = 0.0;
  std::vector<double> feature_means;  // aligned with model.cliques().blocks()
};

enum class Backend { automatic, brute, ve };

inline const char* to_string(Backend b) {
  switch (b) {
    case Backend::automatic: return "auto";
    case Backend::brute: return "brute";
    case Backend::ve: return "ve";
  }
  return "?";
}

inline Backend backend_from_string(const std::string& s) {
  if (s == "auto") return Backend::automatic;
  if (s == "brute") return Backend::brute;
  if (s == "ve") return Backend::ve;
  throw DimensionError("unknown backend: " + s);
}

struct InferenceOptions {
  Backend backend = Backend::automatic;
  int brute_force_cap = 25;                          // hard limit on 2^n enumeration
  std::size_t table_entry_cap = std::size_t{1} << 26;  // per-factor limit for elimination
  int auto_brute_limit = 20;  // automatic picks brute force at or below this size
};

namespace detail {

// log unnormalized probability of every joint state, index bit v = value of
// variable v.  Built by a zeta transform of the sparse weight vector, so the
// cost is n 2^n instead of (#blocks) 2^n.
inline std::vector<double> log_weight_table(const LogLinearModel& m) {
  const int n = m.num_vars();
  if (n > 25) throw TooLargeError(n, 25);
  std::vector<double> w(std::size_t{1} << n, 0.0);
  for (int b = 0; b < m.cliques().num_blocks(); ++b) {
    std::size_t mask = 0;
    for (int v : m.cliques().block(b)) mask |= std::size_t{1} << v;
    w[mask] += m.params()[static_cast<std::size_t>(b)];
  }
  for (int j = 0; j < n; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    for (std::size_t k = 0; k < w.size(); ++k)
      if (k & bit) w[k] += w[k ^ bit];
  }
  return w;
}

}  // namespace detail

// Exact inference by full enumeration.
inline InferenceResult brute_force(const LogLinearModel& m, const InferenceOptions& opts = {}) {
  const int n = m.num_vars();
  if (n > opts.brute_force_cap) throw TooLargeError(n, opts.brute_force_cap);
  std::vector<double> w = detail::log_weight_table(m);

  InferenceResult res;
  res.log_z = logsumexp(w);
  if (!std::isfinite(res.log_z)) throw NumericalError("partition function is not finite");

  // turn the table into probabilities once; block means are then plain sums
  for (double& lw : w) lw = std::exp(lw - res.log_z);

  const std::size_t full = w.size() - 1;
  res.feature_means.resize(static_cast<std::size_t>(m.cliques().num_blocks()));
  for (int b = 0; b < m.cliques().num_blocks(); ++b) {
    std::size_t mask = 0;
    for (int v : m.cliques().block(b)) mask |= std::size_t{1} << v;
    const std::size_t comp = full & ~mask;
    // enumerate supersets of mask as mask | t, t a submask of the complement
    double s = 0.0;
    for (std::size_t t = comp;; t = (t - 1) & comp) {
      s += w[mask | t];
      if (t == 0) break;
    }
    res.feature_means[static_cast<std::size_t>(b)] = s;
  }
  return res;
}

// Full normalized joint, index bit v = value of variable v.
inline JointTable joint_table(const LogLinearModel& m) {
  std::vector<double> w = detail::log_weight_table(m);
  const double log_z = logsumexp(w);
  if (!std::isfinite(log_z)) throw NumericalError("partition function is not finite");
  VarSet vars(static_cast<std::size_t>(m.num_vars()));
  for (int v = 0; v < m.num_vars(); ++v) vars[static_cast<std::size_t>(v)] = v;
  JointTable t = make_joint_table(std::move(vars));
  for (std::size_t k = 0; k < w.size(); ++k) t.probs[k] = std::exp(w[k] - log_z);
  return t;
}

// Greedy minimum-fill elimination order; ties go to the smallest index.
inline std::vector<int> min_fill_order(const Graph& g) {
  const int n = g.num_vars();
  std::vector<std::vector<char>> adj(static_cast<std::size_t>(n),
                                     std::vector<char>(static_cast<std::size_t>(n), 0));
  for (auto [u, v] : g.edges()) {
    adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
    adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1;
  }
  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  std::vector<int> nb;
  for (int step = 0; step < n; ++step) {
    int best = -1;
    long best_fill = 0;
    for (int v = 0; v < n; ++v) {
      if (!alive[static_cast<std::size_t>(v)]) continue;
      nb.clear();
      for (int u = 0; u < n; ++u)
        if (alive[static_cast<std::size_t>(u)] && adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)])
          nb.push_back(u);
      long fill = 0;
      for (std::size_t i = 0; i < nb.size(); ++i)
        for (std::size_t j = i + 1; j < nb.size(); ++j)
          if (!adj[static_cast<std::size_t>(nb[i])][static_cast<std::size_t>(nb[j])]) ++fill;
      if (best < 0 || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    nb.clear();
    for (int u = 0; u < n; ++u)
      if (alive[static_cast<std::size_t>(u)] && adj[static_cast<std::size_t>(best)][static_cast<std::size_t>(u)])
        nb.push_back(u);
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        adj[static_cast<std::size_t>(nb[i])][static_cast<std::size_t>(nb[j])] = 1;
        adj[static_cast<std::size_t>(nb[j])][static_cast<std::size_t>(nb[i])] = 1;
      }
    alive[static_cast<std::size_t>(best)] = 0;
    order.push_back(best);
  }
  return order;
}

// Exact inference by bucket elimination with a downward pass, so every
// bucket ends up holding an exact (unnormalized, log-scale) marginal and all
// block feature means come out of the single tree.
inline InferenceResult variable_elimination(const LogLinearModel& m,
                                            const std::vector<int>& order,
                                            const InferenceOptions& opts = {}) {
  const int n = m.num_vars();
  const CliqueSystem& cs = m.cliques();
  {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    if (order.size() != static_cast<std::size_t>(n))
      throw DimensionError("elimination order must list every variable once");
    for (int v : order) {
      if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)])
        throw DimensionError("elimination order is not a permutation of the variables");
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }
  std::vector<int> when(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) when[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;

  auto bucket_of = [&](const VarSet& scope) {
    int b = -1;
    for (int v : scope) {
      int w = when[static_cast<std::size_t>(v)];
      if (b < 0 || w < b) b = w;
    }
    return b;
  };

  std::vector<std::vector<int>> bucket_blocks(static_cast<std::size_t>(n));
  for (int b = 0; b < cs.num_blocks(); ++b)
    bucket_blocks[static_cast<std::size_t>(bucket_of(cs.block(b)))].push_back(b);

  std::vector<LogTable> joints(static_cast<std::size_t>(n));   // psi per bucket
  std::vector<LogTable> lambdas(static_cast<std::size_t>(n));  // upward message
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<int>> incoming(static_cast<std::size_t>(n));
  double log_z = 0.0;

  for (int i = 0; i < n; ++i) {
    const int v = order[static_cast<std::size_t>(i)];
    VarSet scope{v};
    for (int b : bucket_blocks[static_cast<std::size_t>(i)])
      scope = vs::set_union(scope, cs.block(b));
    for (int c : incoming[static_cast<std::size_t>(i)])
      scope = vs::set_union(scope, lambdas[static_cast<std::size_t>(c)].vars);
    if (scope.size() > 60 || (std::size_t{1} << scope.size()) > opts.table_entry_cap)
      throw WidthExceededError(scope.size() > 60 ? opts.table_entry_cap + 1
                                                 : std::size_t{1} << scope.size(),
                               opts.table_entry_cap);

    LogTable joint = make_log_table(scope);
    for (int b : bucket_blocks[static_cast<std::size_t>(i)]) {
      LogTable f = make_log_table(cs.block(b));
      f.vals.back() = m.params()[static_cast<std::size_t>(b)];  // all-ones entry
      add_into(joint, f);
    }
    for (int c : incoming[static_cast<std::size_t>(i)])
      add_into(joint, lambdas[static_cast<std::size_t>(c)]);

    LogTable lam = sum_out_to(joint, vs::set_difference(scope, {v}));
    if (lam.vars.empty()) {
      log_z += lam.vals[0];  // one constant per connected component
    } else {
      int p = bucket_of(lam.vars);
      parent[static_cast<std::size_t>(i)] = p;
      incoming[static_cast<std::size_t>(p)].push_back(i);
    }
    joints[static_cast<std::size_t>(i)] = std::move(joint);
    lambdas[static_cast<std::size_t>(i)] = std::move(lam);
  }
  if (!std::isfinite(log_z)) throw NumericalError("partition function is not finite");

  // downward pass, in reverse elimination order: parent belief restricted to
  // the message scope, minus the upward message, turns each bucket joint into
  // an exact marginal.  Tables are released as soon as their last consumer is
  // done so peak memory stays near the largest few buckets.
  InferenceResult res;
  res.log_z = log_z;
  res.feature_means.resize(static_cast<std::size_t>(cs.num_blocks()));
  std::vector<int> pending(static_cast<std::size_t>(n), 0);  // children not yet served
  for (int i = 0; i < n; ++i)
    if (parent[static_cast<std::size_t>(i)] >= 0)
      ++pending[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
  std::vector<double> acc;
  for (int i = n - 1; i >= 0; --i) {
    const int p = parent[static_cast<std::size_t>(i)];
    if (p >= 0) {
      LogTable down = sum_out_to(joints[static_cast<std::size_t>(p)],
                                 lambdas[static_cast<std::size_t>(i)].vars);
      for (std::size_t k = 0; k < down.size(); ++k)
        down.vals[k] -= lambdas[static_cast<std::size_t>(i)].vals[k];
      add_into(joints[static_cast<std::size_t>(i)], down);
      lambdas[static_cast<std::size_t>(i)].vals = {};
      if (--pending[static_cast<std::size_t>(p)] == 0)
        joints[static_cast<std::size_t>(p)].vals = {};
    }
    const LogTable& belief = joints[static_cast<std::size_t>(i)];
    if (!bucket_blocks[static_cast<std::size_t>(i)].empty()) {
      // normalize by the belief's own mass: on a disconnected graph a root
      // bucket only carries its component's share of log Z
      const double belief_total = logsumexp(belief.vals);
      for (int b : bucket_blocks[static_cast<std::size_t>(i)]) {
        std::size_t mask = 0;
        for (int v : cs.block(b)) {
          std::size_t j = std::lower_bound(belief.vars.begin(), belief.vars.end(), v) -
                          belief.vars.begin();
          mask |= std::size_t{1} << j;
        }
        const std::size_t comp = (belief.size() - 1) & ~mask;
        acc.clear();
        for (std::size_t t = comp;; t = (t - 1) & comp) {
          acc.push_back(belief.vals[mask | t]);
          if (t == 0) break;
        }
        res.feature_means[static_cast<std::size_t>(b)] = std::exp(logsumexp(acc) - belief_total);
      }
    }
    if (pending[static_cast<std::size_t>(i)] == 0) joints[static_cast<std::size_t>(i)].vals = {};
  }
  return res;
}

inline InferenceResult variable_elimination(const LogLinearModel& m,
                                            const InferenceOptions& opts = {}) {
  return variable_elimination(m, min_fill_order(m.graph()), opts);
}

inline InferenceResult infer(const LogLinearModel& m, const InferenceOptions& opts = {}) {
  switch (opts.backend) {
    case Backend::brute: return brute_force(m, opts);
    case Backend::ve: return variable_elimination(m, opts);
    case Backend::automatic:
      return m.num_vars() <= opts.auto_brute_limit ? brute_force(m, opts)
                                                   : variable_elimination(m, opts);
  }
  throw DimensionError("unknown backend");
}

// The closed-form local maximum-likelihood table for the neighborhood of q:
// p-hat(x) = p(x_{A_q}) p(x_{S \ q}) / p(x_{A_q \ q}).  Exact when the input
// distribution is Markov with respect to the graph; used to cross-check that
// joint fitting and marginalization commute.
inline JointTable explicit_ml_estimate(const JointTable& table, const VarSet& q,
                                       const CliqueSystem& cliques, const Graph& graph) {
  for (std::size_t k = 0; k < table.size(); ++k)
    if (!(table.probs[k] > 0.0))
      throw PositivityError("joint table entry " + std::to_string(k) +
                            " is not strictly positive");
  const VarSet a = one_neighborhood(graph, cliques, q);
  const VarSet rest = vs::set_difference(table.vars, q);
  const VarSet boundary = vs::set_difference(a, q);
  const JointTable pa = marginalize(table, a);
  const JointTable prest = marginalize(table, rest);
  const JointTable pboundary = marginalize(table, boundary);
  const auto pos_a = detail::scope_positions(table.vars, a);
  const auto pos_rest = detail::scope_positions(table.vars, rest);
  const auto pos_boundary = detail::scope_positions(table.vars, boundary);
  JointTable out = make_joint_table(table.vars);
  for (std::size_t k = 0; k < out.size(); ++k)
    out.probs[k] = pa.probs[detail::project_bits(k, pos_a)] *
                   prest.probs[detail::project_bits(k, pos_rest)] /
                   pboundary.probs[detail::project_bits(k, pos_boundary)];
  return out;
}

}  // namespace lapmrf
