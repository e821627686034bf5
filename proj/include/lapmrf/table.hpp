#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "lapmrf/graph.hpp"

namespace lapmrf {

inline double logsumexp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v)
    if (x > m) m = x;
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x), overflow-safe
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Dense probability table over a variable subset.  Entry k encodes the
// assignment whose bit j (of k) is the value of vars[j].
struct JointTable {
  VarSet vars;
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }

  double& at_bits(std::size_t bits) { return probs[bits]; }
  double at_bits(std::size_t bits) const { return probs[bits]; }
};

inline JointTable make_joint_table(VarSet vars) {
  if (!vs::is_sorted_unique(vars)) throw DimensionError("table scope must be sorted and unique");
  if (vars.size() > 25) throw TooLargeError(static_cast<int>(vars.size()), 25);
  JointTable t;
  t.vars = std::move(vars);
  t.probs.assign(std::size_t{1} << t.vars.size(), 0.0);
  return t;
}

// Sum out everything not in keep; keep must be a subset of t.vars.
inline JointTable marginalize(const JointTable& t, const VarSet& keep) {
  if (!vs::is_subset(keep, t.vars))
    throw DimensionError("marginal scope is not a subset of the table scope");
  JointTable out = make_joint_table(keep);
  std::vector<std::size_t> pos;
  for (int v : keep) {
    std::size_t j = std::lower_bound(t.vars.begin(), t.vars.end(), v) - t.vars.begin();
    pos.push_back(j);
  }
  for (std::size_t bits = 0; bits < t.size(); ++bits) {
    std::size_t kept = 0;
    for (std::size_t j = 0; j < pos.size(); ++j)
      if (bits & (std::size_t{1} << pos[j])) kept |= std::size_t{1} << j;
    out.probs[kept] += t.probs[bits];
  }
  return out;
}

// Weights of the normalized-with-respect-to-zero parameterization that
// reproduce a strictly positive table: the subset (Moebius) transform of
// log p.  Entry for bitmask b (over t.vars) is the weight of that subset;
// entry 0 is -log p(all zeros), the negated log partition of the local model.
struct MobiusPotentials {
  VarSet vars;
  std::vector<double> weights;  // indexed by subset bitmask

  double weight_of(const VarSet& subset) const {
    std::size_t bits = 0;
    for (int v : subset) {
      auto it = std::lower_bound(vars.begin(), vars.end(), v);
      if (it == vars.end() || *it != v)
        throw DimensionError("subset variable " + std::to_string(v) + " not in table scope");
      bits |= std::size_t{1} << (it - vars.begin());
    }
    return weights[bits];
  }
};

inline MobiusPotentials mobius_weights(const JointTable& t) {
  MobiusPotentials out;
  out.vars = t.vars;
  out.weights.resize(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t.probs[k] > 0.0) || !std::isfinite(t.probs[k]))
      throw PositivityError("joint table entry " + std::to_string(k) +
                            " is not strictly positive");
    out.weights[k] = std::log(t.probs[k]);
  }
  // in-place subset transform: after pass j, each entry holds the alternating
  // subset sum over coordinate j
  for (std::size_t j = 0; j < t.vars.size(); ++j) {
    const std::size_t bit = std::size_t{1} << j;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (k & bit) out.weights[k] -= out.weights[k ^ bit];
  }
  return out;
}

// Inverse of mobius_weights: theta (plus a constant at the empty set) back to
// the table.  Used in tests and for explicit local models.
inline JointTable table_from_weights(const MobiusPotentials& w) {
  JointTable t = make_joint_table(w.vars);
  std::vector<double> logp = w.weights;
  for (std::size_t j = 0; j < w.vars.size(); ++j) {
    const std::size_t bit = std::size_t{1} << j;
    for (std::size_t k = 0; k < logp.size(); ++k)
      if (k & bit) logp[k] += logp[k ^ bit];
  }
  for (std::size_t k = 0; k < logp.size(); ++k) t.probs[k] = std::exp(logp[k]);
  return t;
}

// ---------------------------------------------------------------------------
// Log-domain factor for variable elimination.

struct LogTable {
  VarSet vars;
  std::vector<double> vals;  // log scale, bit j of the index = value of vars[j]

  std::size_t size() const { return vals.size(); }
};

inline LogTable make_log_table(VarSet vars, double fill = 0.0) {
  if (!vs::is_sorted_unique(vars)) throw DimensionError("factor scope must be sorted and unique");
  LogTable t;
  t.vars = std::move(vars);
  t.vals.assign(std::size_t{1} << t.vars.size(), fill);
  return t;
}

namespace detail {

// bit positions of src.vars within dst.vars (src.vars must be a subset)
inline std::vector<std::size_t> scope_positions(const VarSet& dst, const VarSet& src) {
  std::vector<std::size_t> pos;
  pos.reserve(src.size());
  for (int v : src) {
    auto it = std::lower_bound(dst.begin(), dst.end(), v);
    if (it == dst.end() || *it != v)
      throw DimensionError("factor scope is not contained in the accumulator scope");
    pos.push_back(static_cast<std::size_t>(it - dst.begin()));
  }
  return pos;
}

inline std::size_t project_bits(std::size_t bits, const std::vector<std::size_t>& pos) {
  std::size_t out = 0;
  for (std::size_t j = 0; j < pos.size(); ++j)
    if (bits & (std::size_t{1} << pos[j])) out |= std::size_t{1} << j;
  return out;
}

}  // namespace detail

// acc += sign * t, scopes aligned by variable id
inline void add_into(LogTable& acc, const LogTable& t, double sign = 1.0) {
  auto pos = detail::scope_positions(acc.vars, t.vars);
  for (std::size_t bits = 0; bits < acc.size(); ++bits)
    acc.vals[bits] += sign * t.vals[detail::project_bits(bits, pos)];
}

// log-sum-exp over the variables of t not in keep
inline LogTable sum_out_to(const LogTable& t, const VarSet& keep) {
  if (!vs::is_subset(keep, t.vars))
    throw DimensionError("marginal scope is not a subset of the factor scope");
  LogTable out = make_log_table(keep, -std::numeric_limits<double>::infinity());
  auto pos = detail::scope_positions(t.vars, keep);
  // two passes: max, then shifted accumulation
  std::vector<double> mx(out.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t bits = 0; bits < t.size(); ++bits) {
    std::size_t k = detail::project_bits(bits, pos);
    if (t.vals[bits] > mx[k]) mx[k] = t.vals[bits];
  }
  std::vector<double> acc(out.size(), 0.0);
  for (std::size_t bits = 0; bits < t.size(); ++bits) {
    std::size_t k = detail::project_bits(bits, pos);
    if (std::isfinite(mx[k])) acc[k] += std::exp(t.vals[bits] - mx[k]);
  }
  for (std::size_t k = 0; k < out.size(); ++k)
    out.vals[k] = std::isfinite(mx[k]) ? mx[k] + std::log(acc[k]) : mx[k];
  return out;
}

}  // namespace lapmrf
