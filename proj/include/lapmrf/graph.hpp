#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lapmrf/errors.hpp"

namespace lapmrf {

// Variable subsets (cliques, blocks, neighborhoods): sorted ascending, no duplicates.
using VarSet = std::vector<int>;

namespace vs {

inline bool is_sorted_unique(const VarSet& s) {
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i - 1] >= s[i]) return false;
  return true;
}

inline bool contains(const VarSet& s, int v) {
  return std::binary_search(s.begin(), s.end(), v);
}

// a subset of b
inline bool is_subset(const VarSet& a, const VarSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline bool intersects(const VarSet& a, const VarSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j)
      ++i;
    else if (*j < *i)
      ++j;
    else
      return true;
  }
  return false;
}

inline VarSet set_union(const VarSet& a, const VarSet& b) {
  VarSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline VarSet set_intersection(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline VarSet set_difference(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// size first, then lexicographic: the canonical block ordering
inline bool shortlex_less(const VarSet& a, const VarSet& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

inline std::string to_string(const VarSet& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

}  // namespace vs

// Undirected graph over dense variable indices.  Immutable once built
// (add_edge is for construction only).
class Graph {
 public:
  Graph() = default;

  explicit Graph(int num_vars) {
    if (num_vars < 0) throw DimensionError("negative variable count");
    adj_.resize(static_cast<std::size_t>(num_vars));
  }

  int num_vars() const { return static_cast<int>(adj_.size()); }

  void add_edge(int u, int v) {
    check_var(u);
    check_var(v);
    if (u == v) throw DimensionError("self-loop on variable " + std::to_string(u));
    insert_sorted(adj_[u], v);
    insert_sorted(adj_[v], u);
  }

  bool adjacent(int u, int v) const {
    check_var(u);
    check_var(v);
    return std::binary_search(adj_[u].begin(), adj_[u].end(), v);
  }

  const std::vector<int>& neighbors(int v) const {
    check_var(v);
    return adj_[v];
  }

  std::size_t num_edges() const {
    std::size_t deg = 0;
    for (const auto& a : adj_) deg += a.size();
    return deg / 2;
  }

  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < num_vars(); ++u)
      for (int v : adj_[u])
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  bool is_clique(const VarSet& c) const {
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j)
        if (!adjacent(c[i], c[j])) return false;
    return true;
  }

  bool connected() const {
    if (num_vars() <= 1) return true;
    std::vector<char> seen(adj_.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj_[u])
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
    }
    return count == adj_.size();
  }

 private:
  void check_var(int v) const {
    if (v < 0 || v >= num_vars())
      throw DimensionError("variable index " + std::to_string(v) + " out of range");
  }

  static void insert_sorted(std::vector<int>& list, int v) {
    auto it = std::lower_bound(list.begin(), list.end(), v);
    if (it == list.end() || *it != v) list.insert(it, v);
  }

  std::vector<std::vector<int>> adj_;
};

namespace detail {

template <class Fn>
void for_each_nonempty_subset(const VarSet& c, Fn&& fn) {
  if (c.size() > 20)
    throw AuxiliaryTooLargeError("refusing to enumerate subsets of a clique with " +
                                 std::to_string(c.size()) + " variables");
  const std::uint32_t total = 1u << c.size();
  VarSet sub;
  for (std::uint32_t mask = 1; mask < total; ++mask) {
    sub.clear();
    for (std::size_t j = 0; j < c.size(); ++j)
      if (mask & (1u << j)) sub.push_back(c[j]);
    fn(sub);
  }
}

}  // namespace detail

// The factorization cliques plus every parameter-carrying sub-block.
// Each block is owned by exactly one maximal clique (the lexicographically
// smallest one containing it), which makes parameter read-back deterministic.
class CliqueSystem {
 public:
  const std::vector<VarSet>& maximal() const { return maximal_; }
  const std::vector<VarSet>& blocks() const { return blocks_; }
  const VarSet& block(int i) const { return blocks_[static_cast<std::size_t>(i)]; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }

  // index into maximal() of the owning clique
  int owner(int block_index) const { return owner_[static_cast<std::size_t>(block_index)]; }

  int index_of(const VarSet& b) const {
    auto it = index_.find(b);
    return it == index_.end() ? -1 : it->second;
  }

  int require_index(const VarSet& b) const {
    int i = index_of(b);
    if (i < 0) throw InvalidCliqueError("unknown block " + vs::to_string(b));
    return i;
  }

  // Blocks are the full subset closure of the maximal cliques.
  static CliqueSystem from_maximal(const Graph& g, std::vector<VarSet> maximal) {
    std::vector<VarSet> blocks;
    std::map<VarSet, char> seen;
    for (const VarSet& c : maximal)
      detail::for_each_nonempty_subset(c, [&](const VarSet& b) {
        if (seen.emplace(b, 1).second) blocks.push_back(b);
      });
    return with_blocks(g, std::move(maximal), std::move(blocks));
  }

  // Explicit block list (auxiliary models prune or extend the closure).
  static CliqueSystem with_blocks(const Graph& g, std::vector<VarSet> maximal,
                                  std::vector<VarSet> blocks) {
    CliqueSystem cs;
    std::sort(maximal.begin(), maximal.end(), vs::shortlex_less);
    maximal.erase(std::unique(maximal.begin(), maximal.end()), maximal.end());
    validate_maximal(g, maximal);
    cs.maximal_ = std::move(maximal);

    std::sort(blocks.begin(), blocks.end(), vs::shortlex_less);
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
    cs.blocks_ = std::move(blocks);

    cs.owner_.reserve(cs.blocks_.size());
    for (std::size_t i = 0; i < cs.blocks_.size(); ++i) {
      const VarSet& b = cs.blocks_[i];
      if (b.empty() || !vs::is_sorted_unique(b))
        throw InvalidCliqueError("block must be a non-empty sorted set");
      if (!g.is_clique(b))
        throw InvalidCliqueError("block " + vs::to_string(b) + " is not a clique");
      int own = -1;
      for (std::size_t c = 0; c < cs.maximal_.size(); ++c) {
        if (!vs::is_subset(b, cs.maximal_[c])) continue;
        if (own < 0 || cs.maximal_[c] < cs.maximal_[own]) own = static_cast<int>(c);
      }
      if (own < 0)
        throw InvalidCliqueError("block " + vs::to_string(b) +
                                 " is not contained in any maximal clique");
      cs.owner_.push_back(own);
      cs.index_.emplace(b, static_cast<int>(i));
    }
    return cs;
  }

 private:
  static void validate_maximal(const Graph& g, const std::vector<VarSet>& maximal) {
    std::vector<char> covered(static_cast<std::size_t>(g.num_vars()), 0);
    for (const VarSet& c : maximal) {
      if (c.empty() || !vs::is_sorted_unique(c))
        throw InvalidCliqueError("clique must be a non-empty sorted set");
      if (!g.is_clique(c))
        throw InvalidCliqueError("set " + vs::to_string(c) + " is not a clique");
      // maximality: nothing outside c is adjacent to all of c
      for (int v = 0; v < g.num_vars(); ++v) {
        if (vs::contains(c, v)) continue;
        bool extends = true;
        for (int u : c)
          if (!g.adjacent(u, v)) {
            extends = false;
            break;
          }
        if (extends)
          throw InvalidCliqueError("clique " + vs::to_string(c) +
                                   " is not maximal (extendable by " + std::to_string(v) + ")");
      }
      for (int u : c) covered[static_cast<std::size_t>(u)] = 1;
    }
    for (int v = 0; v < g.num_vars(); ++v)
      if (!covered[static_cast<std::size_t>(v)])
        throw InvalidCliqueError("variable " + std::to_string(v) +
                                 " is not covered by any maximal clique");
  }

  std::vector<VarSet> maximal_;
  std::vector<VarSet> blocks_;
  std::vector<int> owner_;
  std::map<VarSet, int> index_;
};

// A_q: the union of all maximal cliques that intersect q.
inline VarSet one_neighborhood(const Graph& /*graph*/, const CliqueSystem& cliques,
                               const VarSet& q) {
  bool found = false;
  for (const VarSet& c : cliques.maximal())
    if (c == q) {
      found = true;
      break;
    }
  if (!found) throw InvalidCliqueError("clique " + vs::to_string(q) + " is not maximal");
  VarSet a;
  for (const VarSet& c : cliques.maximal())
    if (vs::intersects(c, q)) a = vs::set_union(a, c);
  return a;
}

// Markov structure of the marginal over `keep`: u,v adjacent iff the original
// graph connects them by an edge or by a path whose interior vertices all lie
// outside `keep`.  Vertex i of the result is keep[i].
inline Graph marginal_graph(const Graph& g, const VarSet& keep) {
  if (!vs::is_sorted_unique(keep)) throw DimensionError("keep set must be sorted and unique");
  std::vector<int> local(static_cast<std::size_t>(g.num_vars()), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= g.num_vars())
      throw DimensionError("keep contains out-of-range variable " + std::to_string(keep[i]));
    local[static_cast<std::size_t>(keep[i])] = static_cast<int>(i);
  }
  Graph out(static_cast<int>(keep.size()));
  std::vector<char> seen(static_cast<std::size_t>(g.num_vars()), 0);
  std::vector<int> stack;
  for (int u : keep) {
    std::fill(seen.begin(), seen.end(), 0);
    seen[static_cast<std::size_t>(u)] = 1;
    stack.assign(1, u);
    bool first = true;
    while (!stack.empty()) {
      int w = stack.back();
      stack.pop_back();
      // expand through exterior vertices only; kept vertices terminate the path
      if (!first && local[static_cast<std::size_t>(w)] >= 0) continue;
      first = false;
      for (int x : g.neighbors(w)) {
        if (seen[static_cast<std::size_t>(x)]) continue;
        seen[static_cast<std::size_t>(x)] = 1;
        if (local[static_cast<std::size_t>(x)] >= 0) {
          if (x != u)
            out.add_edge(local[static_cast<std::size_t>(u)], local[static_cast<std::size_t>(x)]);
          stack.push_back(x);  // marked kept; not expanded
        } else {
          stack.push_back(x);
        }
      }
    }
  }
  return out;
}

namespace detail {

inline void bron_kerbosch(const Graph& g, VarSet& r, VarSet p, VarSet x,
                          std::vector<VarSet>& out) {
  if (p.empty() && x.empty()) {
    VarSet c = r;
    std::sort(c.begin(), c.end());
    out.push_back(std::move(c));
    return;
  }
  // pivot: vertex of p ∪ x with the most neighbors in p
  int pivot = -1;
  std::size_t best = 0;
  for (const VarSet* side : {&p, &x})
    for (int u : *side) {
      std::size_t k = vs::set_intersection(p, g.neighbors(u)).size();
      if (pivot < 0 || k > best) {
        pivot = u;
        best = k;
      }
    }
  VarSet candidates = vs::set_difference(p, g.neighbors(pivot));
  for (int v : candidates) {
    VarSet nv(g.neighbors(v).begin(), g.neighbors(v).end());
    r.push_back(v);
    bron_kerbosch(g, r, vs::set_intersection(p, nv), vs::set_intersection(x, nv), out);
    r.pop_back();
    p.erase(std::find(p.begin(), p.end(), v));
    auto it = std::lower_bound(x.begin(), x.end(), v);
    x.insert(it, v);
  }
}

}  // namespace detail

// All maximal cliques (isolated vertices come back as singletons).
inline std::vector<VarSet> maximal_cliques(const Graph& g) {
  VarSet all(static_cast<std::size_t>(g.num_vars()));
  for (int v = 0; v < g.num_vars(); ++v) all[static_cast<std::size_t>(v)] = v;
  std::vector<VarSet> out;
  VarSet r;
  detail::bron_kerbosch(g, r, all, {}, out);
  std::sort(out.begin(), out.end(), vs::shortlex_less);
  return out;
}

// ---------------------------------------------------------------------------
// Builders.  All produce pairwise models: maximal cliques are edges (plus
// singletons for isolated vertices), blocks are singletons and edges.

struct ModelStructure {
  Graph graph;
  CliqueSystem cliques;
};

namespace detail {

inline ModelStructure finish_structure(Graph g) {
  std::vector<VarSet> maximal;
  for (auto [u, v] : g.edges()) maximal.push_back({u, v});
  for (int v = 0; v < g.num_vars(); ++v)
    if (g.neighbors(v).empty()) maximal.push_back({v});
  CliqueSystem cs = CliqueSystem::from_maximal(g, std::move(maximal));
  return {std::move(g), std::move(cs)};
}

inline void check_dim(int d, const char* name) {
  if (d < 1) throw DimensionError(std::string(name) + " must be at least 1");
}

}  // namespace detail

inline ModelStructure build_chain(int n) {
  detail::check_dim(n, "chain length");
  Graph g(n);
  for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
  return detail::finish_structure(std::move(g));
}

// row-major indices, 4-neighborhoods
inline ModelStructure build_grid2d(int rows, int cols) {
  detail::check_dim(rows, "rows");
  detail::check_dim(cols, "cols");
  Graph g(rows * cols);
  auto at = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) g.add_edge(at(r, c), at(r, c + 1));
      if (r + 1 < rows) g.add_edge(at(r, c), at(r + 1, c));
    }
  return detail::finish_structure(std::move(g));
}

// 6-neighborhoods
inline ModelStructure build_grid3d(int nx, int ny, int nz) {
  detail::check_dim(nx, "nx");
  detail::check_dim(ny, "ny");
  detail::check_dim(nz, "nz");
  Graph g(nx * ny * nz);
  auto at = [ny, nz](int x, int y, int z) { return (x * ny + y) * nz + z; };
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z) {
        if (x + 1 < nx) g.add_edge(at(x, y, z), at(x + 1, y, z));
        if (y + 1 < ny) g.add_edge(at(x, y, z), at(x, y + 1, z));
        if (z + 1 < nz) g.add_edge(at(x, y, z), at(x, y, z + 1));
      }
  return detail::finish_structure(std::move(g));
}

// m x n grid of complete-bipartite K_{l,l} cells; couplers join corresponding
// vertices of vertically adjacent cells on the left shore and horizontally
// adjacent cells on the right shore.
inline ModelStructure build_chimera(int m, int n, int l) {
  detail::check_dim(m, "m");
  detail::check_dim(n, "n");
  detail::check_dim(l, "l");
  Graph g(m * n * 2 * l);
  auto at = [n, l](int i, int j, int side, int k) { return ((i * n + j) * 2 + side) * l + k; };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      for (int a = 0; a < l; ++a)
        for (int b = 0; b < l; ++b) g.add_edge(at(i, j, 0, a), at(i, j, 1, b));
      for (int k = 0; k < l; ++k) {
        if (i + 1 < m) g.add_edge(at(i, j, 0, k), at(i + 1, j, 0, k));
        if (j + 1 < n) g.add_edge(at(i, j, 1, k), at(i, j + 1, 1, k));
      }
    }
  return detail::finish_structure(std::move(g));
}

// complete bipartite: visible 0..v-1, hidden v..v+h-1
inline ModelStructure build_rbm(int visible, int hidden) {
  detail::check_dim(visible, "visible units");
  detail::check_dim(hidden, "hidden units");
  Graph g(visible + hidden);
  for (int i = 0; i < visible; ++i)
    for (int j = 0; j < hidden; ++j) g.add_edge(i, visible + j);
  return detail::finish_structure(std::move(g));
}

enum class ModelKind { chain, grid2d, grid3d, chimera, rbm };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::chain: return "chain";
    case ModelKind::grid2d: return "grid2d";
    case ModelKind::grid3d: return "grid3d";
    case ModelKind::chimera: return "chimera";
    case ModelKind::rbm: return "rbm";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "chain") return ModelKind::chain;
  if (s == "grid2d") return ModelKind::grid2d;
  if (s == "grid3d") return ModelKind::grid3d;
  if (s == "chimera") return ModelKind::chimera;
  if (s == "rbm") return ModelKind::rbm;
  throw DimensionError("unknown model kind: " + s);
}

inline ModelStructure build_model(ModelKind kind, const std::vector<int>& dims) {
  auto need = [&](std::size_t k) {
    if (dims.size() != k)
      throw DimensionError(std::string(to_string(kind)) + " takes " + std::to_string(k) +
                           " dimension(s), got " + std::to_string(dims.size()));
  };
  switch (kind) {
    case ModelKind::chain: need(1); return build_chain(dims[0]);
    case ModelKind::grid2d: need(2); return build_grid2d(dims[0], dims[1]);
    case ModelKind::grid3d: need(3); return build_grid3d(dims[0], dims[1], dims[2]);
    case ModelKind::chimera: need(3); return build_chimera(dims[0], dims[1], dims[2]);
    case ModelKind::rbm: need(2); return build_rbm(dims[0], dims[1]);
  }
  throw DimensionError("unknown model kind");
}

}  // namespace lapmrf
