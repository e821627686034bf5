#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lapmrf/graph.hpp"

namespace lapmrf {

// One joint assignment, x[i] in {0,1}.
using Configuration = std::vector<std::uint8_t>;

inline std::string format_weight(double w) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", w);
  return buf;
}

// Log-linear model normalized with respect to the all-zeros state:
// p(x) proportional to exp(sum_b theta_b * prod_{i in b} x_i).
// params[i] is the weight of cliques().block(i).
class LogLinearModel {
 public:
  LogLinearModel(Graph graph, CliqueSystem cliques)
      : graph_(std::move(graph)),
        cliques_(std::move(cliques)),
        params_(static_cast<std::size_t>(cliques_.num_blocks()), 0.0) {
    build_by_var();
  }

  LogLinearModel(Graph graph, CliqueSystem cliques, std::vector<double> params)
      : graph_(std::move(graph)), cliques_(std::move(cliques)), params_(std::move(params)) {
    if (params_.size() != static_cast<std::size_t>(cliques_.num_blocks()))
      throw DimensionError("parameter vector length does not match block count");
    build_by_var();
  }

  explicit LogLinearModel(ModelStructure s)
      : LogLinearModel(std::move(s.graph), std::move(s.cliques)) {}

  int num_vars() const { return graph_.num_vars(); }
  const Graph& graph() const { return graph_; }
  const CliqueSystem& cliques() const { return cliques_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& params() { return params_; }

  void set_params(std::vector<double> p) {
    if (p.size() != params_.size())
      throw DimensionError("parameter vector length does not match block count");
    params_ = std::move(p);
  }

  // ids of blocks containing variable v
  const std::vector<int>& blocks_of_var(int v) const {
    return by_var_[static_cast<std::size_t>(v)];
  }

  bool block_feature(int block_index, const Configuration& x) const {
    for (int v : cliques_.block(block_index))
      if (!x[static_cast<std::size_t>(v)]) return false;
    return true;
  }

  // physics sign convention: p(x) proportional to exp(-energy(x))
  double energy(const Configuration& x) const {
    if (x.size() != static_cast<std::size_t>(num_vars()))
      throw DimensionError("configuration length does not match model");
    double e = 0.0;
    for (int b = 0; b < cliques_.num_blocks(); ++b)
      if (block_feature(b, x)) e -= params_[static_cast<std::size_t>(b)];
    return e;
  }

 private:
  void build_by_var() {
    by_var_.assign(static_cast<std::size_t>(graph_.num_vars()), {});
    for (int b = 0; b < cliques_.num_blocks(); ++b)
      for (int v : cliques_.block(b)) by_var_[static_cast<std::size_t>(v)].push_back(b);
  }

  Graph graph_;
  CliqueSystem cliques_;
  std::vector<double> params_;
  std::vector<std::vector<int>> by_var_;
};

// ---------------------------------------------------------------------------
// Text format.
//
//   mrf <num_vars>
//   clique <i> <j> ...      one line per maximal clique
//   param <i> <j> ... <w>   one line per block, weight last
//
// '#' lines are comments; 'diag' lines carry fit diagnostics and are ignored
// on read.  Weights are printed with 17 significant digits so a write/read
// round trip is exact.

inline void write_model(std::ostream& os, const LogLinearModel& m) {
  os << "mrf " << m.num_vars() << "\n";
  for (const VarSet& c : m.cliques().maximal()) {
    os << "clique";
    for (int v : c) os << " " << v;
    os << "\n";
  }
  for (int b = 0; b < m.cliques().num_blocks(); ++b) {
    os << "param";
    for (int v : m.cliques().block(b)) os << " " << v;
    os << " " << format_weight(m.params()[static_cast<std::size_t>(b)]) << "\n";
  }
}

inline std::string model_to_string(const LogLinearModel& m) {
  std::ostringstream os;
  write_model(os, m);
  return os.str();
}

inline LogLinearModel read_model(std::istream& is) {
  int num_vars = -1;
  std::vector<VarSet> maximal;
  std::vector<std::pair<VarSet, double>> params;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    auto fail = [&](const std::string& msg) {
      throw DimensionError("model line " + std::to_string(lineno) + ": " + msg);
    };
    if (tag == "mrf") {
      if (!(ls >> num_vars) || num_vars < 0) fail("bad variable count");
    } else if (tag == "clique" || tag == "param") {
      if (num_vars < 0) fail("header missing");
      std::vector<std::string> tok;
      std::string t;
      while (ls >> t) tok.push_back(t);
      std::size_t nvar = tok.size() - (tag == "param" ? 1 : 0);
      if (nvar == 0 || nvar > tok.size()) fail("no variables listed");
      VarSet s;
      for (std::size_t i = 0; i < nvar; ++i) {
        std::size_t used = 0;
        int v = -1;
        try {
          v = std::stoi(tok[i], &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != tok[i].size()) fail("bad variable index '" + tok[i] + "'");
        if (v < 0 || v >= num_vars) fail("variable index " + tok[i] + " out of range");
        s.push_back(v);
      }
      std::sort(s.begin(), s.end());
      if (!vs::is_sorted_unique(s)) fail("duplicate variable in set");
      if (tag == "clique") {
        maximal.push_back(std::move(s));
      } else {
        std::size_t used = 0;
        double w = 0.0;
        try {
          w = std::stod(tok.back(), &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != tok.back().size()) fail("bad weight '" + tok.back() + "'");
        params.emplace_back(std::move(s), w);
      }
    } else if (tag == "diag") {
      continue;
    } else {
      fail("unknown tag '" + tag + "'");
    }
  }
  if (num_vars < 0) throw DimensionError("model text has no 'mrf' header");

  Graph g(num_vars);
  for (const VarSet& c : maximal)
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j) g.add_edge(c[i], c[j]);
  CliqueSystem cs = CliqueSystem::from_maximal(g, maximal);
  LogLinearModel m(std::move(g), std::move(cs));
  for (const auto& [s, w] : params)
    m.params()[static_cast<std::size_t>(m.cliques().require_index(s))] = w;
  return m;
}

inline LogLinearModel model_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_model(is);
}

}  // namespace lapmrf
