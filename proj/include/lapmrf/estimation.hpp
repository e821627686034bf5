#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lapmrf/inference.hpp"
#include "lapmrf/model.hpp"
#include "lapmrf/optimize.hpp"
#include "lapmrf/sampling.hpp"
#include "lapmrf/table.hpp"

namespace lapmrf {

struct SufficientStats {
  std::vector<double> block_means;  // aligned with the clique system's blocks
  long long n = 0;
};

// Empirical block means in one pass over the data.
inline SufficientStats sufficient_stats(const CliqueSystem& cs, const Dataset& data) {
  if (data.empty()) throw EmptyDatasetError("cannot compute statistics of an empty dataset");
  SufficientStats s;
  s.n = static_cast<long long>(data.size());
  s.block_means.assign(static_cast<std::size_t>(cs.num_blocks()), 0.0);
  for (const Configuration& x : data)
    for (int b = 0; b < cs.num_blocks(); ++b) {
      bool on = true;
      for (int v : cs.block(b))
        if (!x[static_cast<std::size_t>(v)]) {
          on = false;
          break;
        }
      if (on) s.block_means[static_cast<std::size_t>(b)] += 1.0;
    }
  for (double& m : s.block_means) m /= static_cast<double>(s.n);
  return s;
}

// Same, but block variable i refers to data column columns[i].  LAP workers
// use this so a sub-problem touches only its own columns.
inline SufficientStats sufficient_stats_columns(const CliqueSystem& cs, const VarSet& columns,
                                                const Dataset& data) {
  if (data.empty()) throw EmptyDatasetError("cannot compute statistics of an empty dataset");
  SufficientStats s;
  s.n = static_cast<long long>(data.size());
  s.block_means.assign(static_cast<std::size_t>(cs.num_blocks()), 0.0);
  for (const Configuration& x : data)
    for (int b = 0; b < cs.num_blocks(); ++b) {
      bool on = true;
      for (int v : cs.block(b))
        if (!x[static_cast<std::size_t>(columns[static_cast<std::size_t>(v)])]) {
          on = false;
          break;
        }
      if (on) s.block_means[static_cast<std::size_t>(b)] += 1.0;
    }
  for (double& m : s.block_means) m /= static_cast<double>(s.n);
  return s;
}

// Population block means from an explicit joint table.  Block variables are
// matched to table scope positions by id.
inline SufficientStats stats_from_table(const CliqueSystem& cs, const JointTable& t) {
  SufficientStats s;
  s.n = 0;  // population statistics carry no sample count
  s.block_means.assign(static_cast<std::size_t>(cs.num_blocks()), 0.0);
  const std::size_t full = t.size() - 1;
  for (int b = 0; b < cs.num_blocks(); ++b) {
    std::size_t mask = 0;
    for (int v : cs.block(b)) {
      auto it = std::lower_bound(t.vars.begin(), t.vars.end(), v);
      if (it == t.vars.end() || *it != v)
        throw DimensionError("block variable " + std::to_string(v) + " not in table scope");
      mask |= std::size_t{1} << (it - t.vars.begin());
    }
    const std::size_t comp = full & ~mask;
    double acc = 0.0;
    for (std::size_t u = comp;; u = (u - 1) & comp) {
      acc += t.probs[mask | u];
      if (u == 0) break;
    }
    s.block_means[static_cast<std::size_t>(b)] = acc;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Objectives.

// Scaled log-likelihood up to the data constant: theta . means - log Z.
// Gradient: means - model feature means.
inline std::pair<double, std::vector<double>> ml_objective_grad(const LogLinearModel& model,
                                                                const SufficientStats& stats,
                                                                const InferenceOptions& opts = {}) {
  if (stats.block_means.size() != model.params().size())
    throw DimensionError("statistics not aligned with model blocks");
  InferenceResult inf = infer(model, opts);
  double value = -inf.log_z;
  std::vector<double> grad(model.params().size());
  for (std::size_t b = 0; b < grad.size(); ++b) {
    value += model.params()[b] * stats.block_means[b];
    grad[b] = stats.block_means[b] - inf.feature_means[b];
  }
  return {value, std::move(grad)};
}

// Precomputed per-(sample, variable) structure for the pseudo-likelihood.
// Site (n, m) stores x_mn and the blocks containing m whose other members are
// all on in x_n; the conditional logit is the sum of their weights, and the
// contrastive gradient term of each such block is (1 - sigma) for x_mn = 1
// and -sigma for x_mn = 0.
class PlWorkspace {
 public:
  PlWorkspace(const LogLinearModel& model, const Dataset& data)
      : num_params_(model.params().size()), num_samples_(data.size()) {
    if (data.empty()) throw EmptyDatasetError("cannot build a workspace from an empty dataset");
    const int nv = model.num_vars();
    offsets_.reserve(data.size() * static_cast<std::size_t>(nv) + 1);
    offsets_.push_back(0);
    for (const Configuration& x : data) {
      if (x.size() != static_cast<std::size_t>(nv))
        throw DimensionError("sample length does not match model");
      for (int m = 0; m < nv; ++m) {
        for (int b : model.blocks_of_var(m)) {
          bool others_on = true;
          for (int v : model.cliques().block(b))
            if (v != m && !x[static_cast<std::size_t>(v)]) {
              others_on = false;
              break;
            }
          if (others_on) active_.push_back(b);
        }
        offsets_.push_back(active_.size());
        bits_.push_back(x[static_cast<std::size_t>(m)]);
      }
    }
  }

  std::size_t num_samples() const { return num_samples_; }

  std::pair<double, std::vector<double>> value_grad(const std::vector<double>& theta) const {
    if (theta.size() != num_params_) throw DimensionError("parameter length mismatch");
    double value = 0.0;
    std::vector<double> grad(num_params_, 0.0);
    const std::size_t sites = bits_.size();
    for (std::size_t s = 0; s < sites; ++s) {
      double delta = 0.0;
      for (std::size_t k = offsets_[s]; k < offsets_[s + 1]; ++k)
        delta += theta[static_cast<std::size_t>(active_[k])];
      const double sig = sigmoid(delta);
      double coef;
      if (bits_[s]) {
        value -= softplus(-delta);  // log sigma(delta)
        coef = 1.0 - sig;
      } else {
        value -= softplus(delta);  // log (1 - sigma(delta))
        coef = -sig;
      }
      for (std::size_t k = offsets_[s]; k < offsets_[s + 1]; ++k)
        grad[static_cast<std::size_t>(active_[k])] += coef;
    }
    const double inv_n = 1.0 / static_cast<double>(num_samples_);
    value *= inv_n;
    for (double& g : grad) g *= inv_n;
    return {value, std::move(grad)};
  }

 private:
  std::size_t num_params_;
  std::size_t num_samples_;
  std::vector<std::size_t> offsets_;
  std::vector<int> active_;
  std::vector<std::uint8_t> bits_;
};

// Scaled pseudo-log-likelihood and its gradient at the model's parameters.
inline std::pair<double, std::vector<double>> pl_objective_grad(const LogLinearModel& model,
                                                                const Dataset& data) {
  PlWorkspace ws(model, data);
  return ws.value_grad(model.params());
}

// ---------------------------------------------------------------------------
// Auxiliary models for LAP.

enum class AuxStrategy { exact, dense, pairwise };

inline const char* to_string(AuxStrategy s) {
  switch (s) {
    case AuxStrategy::exact: return "exact";
    case AuxStrategy::dense: return "dense";
    case AuxStrategy::pairwise: return "pairwise";
  }
  return "?";
}

enum class MergeRule { owner_read, average };

struct AuxiliarySpec {
  VarSet variables;            // A_q in global ids; local variable i is variables[i]
  Graph local_graph;           // on local ids
  CliqueSystem local_cliques;  // on local ids
  std::vector<int> block_map;  // local block -> joint block id, -1 if strategy-induced
  AuxStrategy strategy = AuxStrategy::exact;
};

inline AuxiliarySpec build_auxiliary(const Graph& graph, const CliqueSystem& cliques,
                                     const VarSet& q, AuxStrategy strategy) {
  AuxiliarySpec spec;
  spec.strategy = strategy;
  spec.variables = one_neighborhood(graph, cliques, q);
  const VarSet& a = spec.variables;
  std::vector<int> to_local(static_cast<std::size_t>(graph.num_vars()), -1);
  for (std::size_t i = 0; i < a.size(); ++i)
    to_local[static_cast<std::size_t>(a[i])] = static_cast<int>(i);
  auto localize = [&](const VarSet& s) {
    VarSet out;
    out.reserve(s.size());
    for (int v : s) out.push_back(to_local[static_cast<std::size_t>(v)]);
    return out;  // already sorted: localization preserves order
  };

  // original blocks inside A_q keep their joint parameterization
  std::map<VarSet, int> chosen;  // local block -> joint id (or -1)
  for (int b = 0; b < cliques.num_blocks(); ++b)
    if (vs::is_subset(cliques.block(b), a)) chosen.emplace(localize(cliques.block(b)), b);

  // strategy blocks live on the boundary R = A_q \ q
  const VarSet r = vs::set_difference(a, q);
  auto add_block = [&](const VarSet& local_b) { chosen.emplace(local_b, -1); };
  switch (strategy) {
    case AuxStrategy::exact: {
      Graph mg = marginal_graph(graph, a);
      const VarSet r_local = localize(r);
      Graph rg(static_cast<int>(r_local.size()));
      for (std::size_t i = 0; i < r_local.size(); ++i)
        for (std::size_t j = i + 1; j < r_local.size(); ++j)
          if (mg.adjacent(r_local[i], r_local[j]))
            rg.add_edge(static_cast<int>(i), static_cast<int>(j));
      for (const VarSet& c : maximal_cliques(rg)) {
        VarSet c_local;
        for (int i : c) c_local.push_back(r_local[static_cast<std::size_t>(i)]);
        detail::for_each_nonempty_subset(c_local, add_block);
      }
      break;
    }
    case AuxStrategy::dense: {
      if (!r.empty()) detail::for_each_nonempty_subset(localize(r), add_block);
      break;
    }
    case AuxStrategy::pairwise: {
      const VarSet r_local = localize(r);
      for (std::size_t i = 0; i < r_local.size(); ++i) {
        add_block({r_local[i]});
        for (std::size_t j = i + 1; j < r_local.size(); ++j)
          add_block({r_local[i], r_local[j]});
      }
      break;
    }
  }

  Graph lg(static_cast<int>(a.size()));
  std::vector<VarSet> blocks;
  blocks.reserve(chosen.size());
  for (const auto& [local_b, joint_id] : chosen) {
    (void)joint_id;
    blocks.push_back(local_b);
    for (std::size_t i = 0; i < local_b.size(); ++i)
      for (std::size_t j = i + 1; j < local_b.size(); ++j)
        lg.add_edge(local_b[i], local_b[j]);
  }
  spec.local_cliques = CliqueSystem::with_blocks(lg, maximal_cliques(lg), std::move(blocks));
  spec.local_graph = std::move(lg);

  spec.block_map.assign(static_cast<std::size_t>(spec.local_cliques.num_blocks()), -1);
  for (int lb = 0; lb < spec.local_cliques.num_blocks(); ++lb) {
    auto it = chosen.find(spec.local_cliques.block(lb));
    if (it != chosen.end()) spec.block_map[static_cast<std::size_t>(lb)] = it->second;
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Estimators.

struct EstimationResult {
  std::vector<double> params;  // aligned with the joint clique system's blocks
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double seconds = 0.0;
};

namespace detail {

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::pair<std::vector<double>, OptimizeDiagnostics> run_ml(
    const Graph& graph, const CliqueSystem& cliques, const std::vector<double>& means,
    const InferenceOptions& inf_opts, const OptimizerConfig& opt_cfg) {
  LogLinearModel model(graph, cliques);
  auto objective = [&](const std::vector<double>& x, std::vector<double>& grad) {
    model.set_params(x);
    InferenceResult inf = infer(model, inf_opts);
    double value = -inf.log_z;
    grad.resize(x.size());
    for (std::size_t b = 0; b < x.size(); ++b) {
      value += x[b] * means[b];
      grad[b] = means[b] - inf.feature_means[b];
    }
    return value;
  };
  std::vector<double> x0(means.size(), 0.0);
  return maximize(objective, std::move(x0), opt_cfg);
}

}  // namespace detail

inline EstimationResult fit_ml_from_stats(const Graph& graph, const CliqueSystem& cliques,
                                          const SufficientStats& stats,
                                          const InferenceOptions& inf_opts = {},
                                          const OptimizerConfig& opt_cfg = {}) {
  detail::StopWatch watch;
  if (stats.block_means.size() != static_cast<std::size_t>(cliques.num_blocks()))
    throw DimensionError("statistics not aligned with clique system");
  auto [params, diag] = detail::run_ml(graph, cliques, stats.block_means, inf_opts, opt_cfg);
  EstimationResult res;
  res.params = std::move(params);
  res.converged = diag.converged;
  res.iterations = diag.iterations;
  res.final_grad_norm = diag.final_grad_norm;
  res.seconds = watch.seconds();
  return res;
}

inline EstimationResult fit_ml(const Graph& graph, const CliqueSystem& cliques,
                               const Dataset& data, const InferenceOptions& inf_opts = {},
                               const OptimizerConfig& opt_cfg = {}) {
  detail::StopWatch watch;
  EstimationResult res = fit_ml_from_stats(graph, cliques, sufficient_stats(cliques, data),
                                           inf_opts, opt_cfg);
  res.seconds = watch.seconds();
  return res;
}

inline EstimationResult fit_pl(const Graph& graph, const CliqueSystem& cliques,
                               const Dataset& data, const OptimizerConfig& opt_cfg = {}) {
  detail::StopWatch watch;
  LogLinearModel model(graph, cliques);
  PlWorkspace ws(model, data);
  auto objective = [&](const std::vector<double>& x, std::vector<double>& grad) {
    auto [value, g] = ws.value_grad(x);
    grad = std::move(g);
    return value;
  };
  std::vector<double> x0(model.params().size(), 0.0);
  auto [params, diag] = maximize(objective, std::move(x0), opt_cfg);
  EstimationResult res;
  res.params = std::move(params);
  res.converged = diag.converged;
  res.iterations = diag.iterations;
  res.final_grad_norm = diag.final_grad_norm;
  res.seconds = watch.seconds();
  return res;
}

// ---------------------------------------------------------------------------
// LAP: one exact-ML sub-problem per maximal clique, solved independently,
// results merged by the owner rule (or averaged).

struct LapOptions {
  AuxStrategy strategy = AuxStrategy::exact;
  MergeRule merge = MergeRule::owner_read;
  int workers = 1;
  InferenceOptions inference;
  OptimizerConfig optimizer;
};

struct LapSubproblem {
  int clique_index = -1;  // into cliques.maximal()
  AuxiliarySpec spec;
};

inline std::vector<LapSubproblem> build_lap_subproblems(const Graph& graph,
                                                        const CliqueSystem& cliques,
                                                        AuxStrategy strategy) {
  std::vector<LapSubproblem> subs;
  subs.reserve(cliques.maximal().size());
  for (std::size_t c = 0; c < cliques.maximal().size(); ++c) {
    LapSubproblem sp;
    sp.clique_index = static_cast<int>(c);
    try {
      sp.spec = build_auxiliary(graph, cliques, cliques.maximal()[c], strategy);
    } catch (const std::exception& e) {
      throw SubproblemError("clique " + vs::to_string(cliques.maximal()[c]) + ": " + e.what());
    }
    subs.push_back(std::move(sp));
  }
  return subs;
}

// Local exact ML from sufficient statistics only; returns local parameters.
inline std::pair<std::vector<double>, OptimizeDiagnostics> solve_lap_subproblem(
    const AuxiliarySpec& spec, const SufficientStats& local_stats,
    const InferenceOptions& inf_opts, const OptimizerConfig& opt_cfg) {
  return detail::run_ml(spec.local_graph, spec.local_cliques, local_stats.block_means, inf_opts,
                        opt_cfg);
}

namespace detail {

template <class StatsFn>
EstimationResult fit_lap_impl(const Graph& graph, const CliqueSystem& cliques,
                              const LapOptions& opts, StatsFn&& local_stats_for) {
  StopWatch watch;
  if (opts.workers < 1) throw DimensionError("worker count must be at least 1");
  std::vector<LapSubproblem> subs = build_lap_subproblems(graph, cliques, opts.strategy);
  std::vector<std::vector<double>> local(subs.size());
  std::vector<OptimizeDiagnostics> diags(subs.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::vector<std::exception_ptr> errors(subs.size());
  auto work = [&] {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= subs.size() || failed.load()) return;
      try {
        SufficientStats st = local_stats_for(subs[k].spec);
        auto [params, diag] =
            solve_lap_subproblem(subs[k].spec, st, opts.inference, opts.optimizer);
        local[k] = std::move(params);
        diags[k] = diag;
      } catch (...) {
        errors[k] = std::current_exception();
        failed.store(true);
      }
    }
  };
  if (opts.workers == 1 || subs.size() <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    int nw = std::min<int>(opts.workers, static_cast<int>(subs.size()));
    pool.reserve(static_cast<std::size_t>(nw));
    for (int w = 0; w < nw; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t k = 0; k < subs.size(); ++k)
    if (errors[k]) {
      try {
        std::rethrow_exception(errors[k]);
      } catch (const SubproblemError&) {
        throw;
      } catch (const std::exception& e) {
        throw SubproblemError("clique " +
                              vs::to_string(cliques.maximal()[static_cast<std::size_t>(
                                  subs[k].clique_index)]) +
                              ": " + e.what());
      }
    }

  // merge: a sub-problem for clique q reports every joint block inside q
  EstimationResult res;
  res.params.assign(static_cast<std::size_t>(cliques.num_blocks()), 0.0);
  std::vector<int> count(static_cast<std::size_t>(cliques.num_blocks()), 0);
  res.converged = true;
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const AuxiliarySpec& spec = subs[k].spec;
    const int c = subs[k].clique_index;
    const VarSet& q = cliques.maximal()[static_cast<std::size_t>(c)];
    for (int lb = 0; lb < spec.local_cliques.num_blocks(); ++lb) {
      int j = spec.block_map[static_cast<std::size_t>(lb)];
      if (j < 0 || !vs::is_subset(cliques.block(j), q)) continue;
      if (opts.merge == MergeRule::owner_read && cliques.owner(j) != c) continue;
      res.params[static_cast<std::size_t>(j)] += local[k][static_cast<std::size_t>(lb)];
      count[static_cast<std::size_t>(j)] += 1;
    }
    res.converged = res.converged && diags[k].converged;
    res.iterations = std::max(res.iterations, diags[k].iterations);
    res.final_grad_norm = std::max(res.final_grad_norm, diags[k].final_grad_norm);
  }
  for (std::size_t j = 0; j < res.params.size(); ++j) {
    if (count[j] == 0)
      throw SubproblemError("block " + vs::to_string(cliques.block(static_cast<int>(j))) +
                            " was not read back from any sub-problem");
    if (opts.merge == MergeRule::average) res.params[j] /= static_cast<double>(count[j]);
  }
  res.seconds = watch.seconds();
  return res;
}

}  // namespace detail

inline EstimationResult fit_lap(const Graph& graph, const CliqueSystem& cliques,
                                const Dataset& data, const LapOptions& opts = {}) {
  if (data.empty()) throw EmptyDatasetError("cannot fit on an empty dataset");
  return detail::fit_lap_impl(graph, cliques, opts, [&](const AuxiliarySpec& spec) {
    return sufficient_stats_columns(spec.local_cliques, spec.variables, data);
  });
}

// Population-level LAP: local statistics taken from an explicit joint table
// instead of samples (the N -> infinity limit).
inline EstimationResult fit_lap_population(const Graph& graph, const CliqueSystem& cliques,
                                           const JointTable& joint, const LapOptions& opts = {}) {
  return detail::fit_lap_impl(graph, cliques, opts, [&](const AuxiliarySpec& spec) {
    // translate local blocks to global variable ids and sum the table
    std::vector<VarSet> global_blocks;
    global_blocks.reserve(static_cast<std::size_t>(spec.local_cliques.num_blocks()));
    for (int lb = 0; lb < spec.local_cliques.num_blocks(); ++lb) {
      VarSet g;
      for (int v : spec.local_cliques.block(lb))
        g.push_back(spec.variables[static_cast<std::size_t>(v)]);
      global_blocks.push_back(std::move(g));
    }
    SufficientStats st;
    st.n = 0;
    st.block_means.resize(global_blocks.size());
    const std::size_t full = joint.size() - 1;
    for (std::size_t i = 0; i < global_blocks.size(); ++i) {
      std::size_t mask = 0;
      for (int v : global_blocks[i]) {
        auto it = std::lower_bound(joint.vars.begin(), joint.vars.end(), v);
        if (it == joint.vars.end() || *it != v)
          throw DimensionError("auxiliary variable missing from joint table scope");
        mask |= std::size_t{1} << (it - joint.vars.begin());
      }
      double acc = 0.0;
      const std::size_t comp = full & ~mask;
      for (std::size_t u = comp;; u = (u - 1) & comp) {
        acc += joint.probs[mask | u];
        if (u == 0) break;
      }
      st.block_means[i] = acc;
    }
    return st;
  });
}

// ---------------------------------------------------------------------------
// Result serialization: model text plus one diagnostics line.

inline void write_result(std::ostream& os, const Graph& graph, const CliqueSystem& cliques,
                         const EstimationResult& res) {
  LogLinearModel m(graph, cliques, res.params);
  write_model(os, m);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "diag converged=%d iters=%d gradnorm=%.17g seconds=%.6f",
                res.converged ? 1 : 0, res.iterations, res.final_grad_norm, res.seconds);
  os << buf << "\n";
}

}  // namespace lapmrf
