#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "test_support.hpp"

using namespace lapmrf;
using Catch::Matchers::WithinAbs;

namespace {

LogLinearModel single_node(double theta) {
  Graph g(1);
  CliqueSystem cs = CliqueSystem::from_maximal(g, {{0}});
  return LogLinearModel(std::move(g), std::move(cs), {theta});
}

LogLinearModel ln2_edge() {
  ModelStructure st = build_chain(2);
  LogLinearModel m(std::move(st.graph), std::move(st.cliques));
  m.params()[static_cast<std::size_t>(m.cliques().require_index({0, 1}))] = std::log(2.0);
  return m;
}

}  // namespace

TEST_CASE("brute force on tiny models", "[inference]") {
  SECTION("single free node") {
    InferenceResult r = brute_force(single_node(0.0));
    CHECK_THAT(r.log_z, WithinAbs(std::log(2.0), 1e-15));
    CHECK_THAT(r.feature_means[0], WithinAbs(0.5, 1e-15));
  }
  SECTION("edge with weight ln 2") {
    LogLinearModel m = ln2_edge();
    InferenceResult r = brute_force(m);
    CHECK_THAT(r.log_z, WithinAbs(std::log(5.0), 1e-14));
    CHECK_THAT(r.feature_means[static_cast<std::size_t>(m.cliques().require_index({0, 1}))],
               WithinAbs(0.4, 1e-14));
    CHECK_THAT(r.feature_means[static_cast<std::size_t>(m.cliques().require_index({0}))],
               WithinAbs(0.6, 1e-14));
  }
  SECTION("cap") {
    InferenceOptions opts;
    opts.brute_force_cap = 5;
    CHECK_THROWS_AS(brute_force(ts::seeded_model(build_chain(6), 1), opts), TooLargeError);
  }
}

TEST_CASE("joint table", "[inference]") {
  SECTION("single node") {
    JointTable t = joint_table(single_node(0.0));
    CHECK_THAT(t.probs[0], WithinAbs(0.5, 1e-15));
    CHECK_THAT(t.probs[1], WithinAbs(0.5, 1e-15));
  }
  SECTION("edge with weight ln 2") {
    JointTable t = joint_table(ln2_edge());
    CHECK_THAT(t.probs[0], WithinAbs(0.2, 1e-14));
    CHECK_THAT(t.probs[1], WithinAbs(0.2, 1e-14));
    CHECK_THAT(t.probs[2], WithinAbs(0.2, 1e-14));
    CHECK_THAT(t.probs[3], WithinAbs(0.4, 1e-14));
  }
  SECTION("normalization and positivity") {
    JointTable t = joint_table(ts::seeded_model(ts::cycle(4), 2));
    double sum = std::accumulate(t.probs.begin(), t.probs.end(), 0.0);
    CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
    for (double p : t.probs) CHECK(p > 0.0);
  }
}

TEST_CASE("min-fill elimination order", "[inference]") {
  SECTION("chain eliminates left to right under the tie-break") {
    ModelStructure st = build_chain(5);
    CHECK(min_fill_order(st.graph) == std::vector<int>{0, 1, 2, 3, 4});
  }
  SECTION("four-cycle") {
    ModelStructure st = ts::cycle(4);
    CHECK(min_fill_order(st.graph) == std::vector<int>{0, 1, 2, 3});
  }
  SECTION("always a permutation") {
    for (auto& item : ts::model_zoo(16)) {
      std::vector<int> order = min_fill_order(item.st.graph);
      std::vector<int> sorted = order;
      std::sort(sorted.begin(), sorted.end());
      std::vector<int> expect(static_cast<std::size_t>(item.st.graph.num_vars()));
      std::iota(expect.begin(), expect.end(), 0);
      CHECK(sorted == expect);
    }
  }
}

TEST_CASE("variable elimination", "[inference]") {
  SECTION("chain of independent uniform bits") {
    ModelStructure st = build_chain(50);
    LogLinearModel m(std::move(st.graph), std::move(st.cliques));
    InferenceResult r = variable_elimination(m);
    CHECK_THAT(r.log_z, WithinAbs(50.0 * std::log(2.0), 1e-9));
    for (double fm : r.feature_means) CHECK((fm > 0.0 && fm < 1.0));
  }
  SECTION("explicit order is honored and validated") {
    LogLinearModel m = ts::seeded_model(build_chain(4), 3);
    InferenceResult a = brute_force(m);
    InferenceResult b = variable_elimination(m, {3, 1, 0, 2});
    CHECK_THAT(b.log_z, WithinAbs(a.log_z, 1e-12));
    CHECK_THROWS_AS(variable_elimination(m, {0, 1, 2}), DimensionError);
    CHECK_THROWS_AS(variable_elimination(m, {0, 1, 2, 2}), DimensionError);
    CHECK_THROWS_AS(variable_elimination(m, {0, 1, 2, 4}), DimensionError);
  }
  SECTION("width cap") {
    InferenceOptions opts;
    opts.table_entry_cap = 8;
    CHECK_THROWS_AS(variable_elimination(ts::seeded_model(build_grid2d(3, 3), 4), opts),
                    WidthExceededError);
  }
  SECTION("disconnected models multiply components") {
    Graph g(3);
    g.add_edge(0, 1);
    CliqueSystem cs = CliqueSystem::from_maximal(g, {{0, 1}, {2}});
    LogLinearModel m(std::move(g), std::move(cs), {0.3, -0.2, 0.4, 0.7});
    InferenceResult a = brute_force(m);
    InferenceResult b = variable_elimination(m);
    CHECK_THAT(b.log_z, WithinAbs(a.log_z, 1e-12));
    CHECK_THAT(ts::max_abs_diff(a.feature_means, b.feature_means), WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("backends agree across the zoo", "[inference]") {
  int seed = 100;
  for (auto& item : ts::model_zoo(16)) {
    LogLinearModel m = ts::seeded_model(std::move(item.st), static_cast<std::uint64_t>(seed++));
    InferenceResult a = brute_force(m);
    InferenceResult b = variable_elimination(m);
    INFO(item.name);
    CHECK_THAT(b.log_z, WithinAbs(a.log_z, 1e-10));
    CHECK(ts::max_abs_diff(a.feature_means, b.feature_means) < 1e-10);
    for (double fm : b.feature_means) CHECK((fm >= 0.0 && fm <= 1.0));
  }
}

TEST_CASE("automatic backend dispatch", "[inference]") {
  // 26 variables exceed the brute-force cap, so only elimination can serve
  ModelStructure st = build_chain(26);
  LogLinearModel m(std::move(st.graph), std::move(st.cliques));
  InferenceResult r = infer(m);
  CHECK_THAT(r.log_z, WithinAbs(26.0 * std::log(2.0), 1e-10));
  InferenceOptions brute_only;
  brute_only.backend = Backend::brute;
  CHECK_THROWS_AS(infer(m, brute_only), TooLargeError);

  LogLinearModel small = ts::seeded_model(build_chain(3), 5);
  InferenceResult x = infer(small);
  InferenceResult y = brute_force(small);
  CHECK(x.log_z == y.log_z);  // automatic picks brute force below the limit
}

TEST_CASE("three-dimensional lattice through elimination", "[inference]") {
  LogLinearModel m = ts::seeded_model(build_grid3d(4, 4, 4), 6);
  InferenceResult r = variable_elimination(m);
  CHECK(std::isfinite(r.log_z));
  CHECK(r.log_z > 64.0 * std::log(2.0) - 64.0);  // sanity bracket
  for (double fm : r.feature_means) CHECK((fm >= 0.0 && fm <= 1.0));

  // cross-check a handful of singleton means against a long Gibbs run
  SamplerConfig cfg;
  cfg.seed = 77;
  cfg.burn_in_sweeps = 500;
  cfg.thin_sweeps = 5;
  const int n = 20000;
  Dataset data = gibbs_sample(m, n, cfg);
  for (int v : {0, 21, 42, 63}) {
    double mean = 0.0;
    for (const Configuration& x : data) mean += x[static_cast<std::size_t>(v)];
    mean /= n;
    double exact = r.feature_means[static_cast<std::size_t>(m.cliques().require_index({v}))];
    double sigma = std::sqrt(exact * (1.0 - exact) / n);
    INFO("variable " << v << ": exact " << exact << ", sampled " << mean);
    CHECK(std::abs(mean - exact) < 3.0 * sigma * 3.0);  // 3 sigma, tripled for chain correlation
  }
}

TEST_CASE("explicit local maximum-likelihood table", "[inference]") {
  SECTION("neighborhood covering everything returns the input") {
    LogLinearModel m = ts::seeded_model(build_chain(3), 7);
    JointTable t = joint_table(m);
    JointTable est = explicit_ml_estimate(t, {1, 2}, m.cliques(), m.graph());
    for (std::size_t k = 0; k < t.size(); ++k)
      CHECK_THAT(est.probs[k], WithinAbs(t.probs[k], 1e-14));
  }
  SECTION("clique marginals are preserved on a four-cycle") {
    LogLinearModel m = ts::seeded_model(ts::cycle(4), 8);
    JointTable t = joint_table(m);
    JointTable est = explicit_ml_estimate(t, {0, 1}, m.cliques(), m.graph());
    double total = std::accumulate(est.probs.begin(), est.probs.end(), 0.0);
    CHECK_THAT(total, WithinAbs(1.0, 1e-12));
    for (const VarSet& c : m.cliques().maximal()) {
      JointTable a = marginalize(t, c);
      JointTable b = marginalize(est, c);
      for (std::size_t k = 0; k < a.size(); ++k) CHECK_THAT(b.probs[k], WithinAbs(a.probs[k], 1e-12));
    }
  }
  SECTION("positivity required") {
    ModelStructure st = build_chain(2);
    JointTable t = make_joint_table({0, 1});
    t.probs = {0.5, 0.5, 0.0, 0.0};
    CHECK_THROWS_AS(explicit_ml_estimate(t, {0, 1}, st.cliques, st.graph), PositivityError);
  }
}

TEST_CASE("marginal potentials match the joint model inside each clique", "[inference]") {
  int seed = 300;
  for (auto& item : ts::model_zoo(10)) {
    LogLinearModel m = ts::seeded_model(std::move(item.st), static_cast<std::uint64_t>(seed++));
    JointTable joint = joint_table(m);
    for (const VarSet& q : m.cliques().maximal()) {
      VarSet a = one_neighborhood(m.graph(), m.cliques(), q);
      MobiusPotentials w = mobius_weights(marginalize(joint, a));
      for (int b = 0; b < m.cliques().num_blocks(); ++b) {
        if (!vs::is_subset(m.cliques().block(b), q)) continue;
        INFO(item.name << " q=" << vs::to_string(q)
                       << " block=" << vs::to_string(m.cliques().block(b)));
        CHECK_THAT(w.weight_of(m.cliques().block(b)),
                   WithinAbs(m.params()[static_cast<std::size_t>(b)], 1e-8));
      }
    }
  }
}

TEST_CASE("mobius recovers model weights and zeros elsewhere", "[inference]") {
  int seed = 400;
  for (auto& item : ts::model_zoo(8)) {
    LogLinearModel m = ts::seeded_model(std::move(item.st), static_cast<std::uint64_t>(seed++));
    MobiusPotentials w = mobius_weights(joint_table(m));
    INFO(item.name);
    for (std::size_t mask = 1; mask < w.weights.size(); ++mask) {
      VarSet sub;
      for (int v = 0; v < m.num_vars(); ++v)
        if (mask & (std::size_t{1} << v)) sub.push_back(v);
      int b = m.cliques().index_of(sub);
      double expect = b >= 0 ? m.params()[static_cast<std::size_t>(b)] : 0.0;
      CHECK_THAT(w.weights[mask], WithinAbs(expect, 1e-10));
    }
  }
}
