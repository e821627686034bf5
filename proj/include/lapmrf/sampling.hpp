#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lapmrf/model.hpp"
#include "lapmrf/rng.hpp"
#include "lapmrf/table.hpp"

namespace lapmrf {

using Dataset = std::vector<Configuration>;

struct SamplerConfig {
  int burn_in_sweeps = 1000;
  int thin_sweeps = 10;
  std::uint64_t seed = 0;
};

// p(x_m = 1 | x_{-m}) = sigma(sum of weights of blocks containing m whose
// other members are all on).  Only neighbors of m matter.
inline double full_conditional(const LogLinearModel& model, const Configuration& x, int m) {
  if (m < 0 || m >= model.num_vars())
    throw DimensionError("variable index " + std::to_string(m) + " out of range");
  if (x.size() != static_cast<std::size_t>(model.num_vars()))
    throw DimensionError("configuration length does not match model");
  double delta = 0.0;
  for (int b : model.blocks_of_var(m)) {
    bool others_on = true;
    for (int v : model.cliques().block(b))
      if (v != m && !x[static_cast<std::size_t>(v)]) {
        others_on = false;
        break;
      }
    if (others_on) delta += model.params()[static_cast<std::size_t>(b)];
  }
  return sigmoid(delta);
}

// Systematic-sweep Gibbs sampler from the all-zeros state.  One uniform draw
// per variable update, so the stream layout is fixed by (model size, config).
inline Dataset gibbs_sample(const LogLinearModel& model, int n, const SamplerConfig& cfg) {
  if (n < 1) throw DimensionError("sample count must be at least 1");
  if (cfg.burn_in_sweeps < 0) throw DimensionError("burn-in must be non-negative");
  if (cfg.thin_sweeps < 1) throw DimensionError("thinning must be at least 1");
  const int nv = model.num_vars();
  Rng rng(cfg.seed);
  Configuration x(static_cast<std::size_t>(nv), 0);
  auto sweep = [&] {
    for (int m = 0; m < nv; ++m)
      x[static_cast<std::size_t>(m)] =
          rng.uniform01() < full_conditional(model, x, m) ? 1 : 0;
  };
  for (int s = 0; s < cfg.burn_in_sweeps; ++s) sweep();
  Dataset out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    for (int s = 0; s < cfg.thin_sweeps; ++s) sweep();
    out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset CSV: one row per sample, comma-separated bits, no header.

inline void write_dataset(std::ostream& os, const Dataset& data) {
  for (const Configuration& x : data) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i) os << ',';
      os << static_cast<int>(x[i]);
    }
    os << '\n';
  }
}

inline Dataset read_dataset(std::istream& is) {
  Dataset out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    Configuration x;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      std::size_t a = cell.find_first_not_of(" \t\r");
      std::size_t b = cell.find_last_not_of(" \t\r");
      if (a == std::string::npos || !(cell[a] == '0' || cell[a] == '1') || a != b)
        throw DimensionError("dataset line " + std::to_string(lineno) +
                             ": entries must be 0 or 1");
      x.push_back(cell[a] == '1' ? 1 : 0);
    }
    if (x.empty())
      throw DimensionError("dataset line " + std::to_string(lineno) + ": empty row");
    if (!out.empty() && x.size() != out.front().size())
      throw DimensionError("dataset line " + std::to_string(lineno) +
                           ": row length differs from first row");
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace lapmrf
