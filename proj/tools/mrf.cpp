// mrf: experiment driver and utility front-end.
//
//   mrf [flags]            run a synthetic-data experiment, emit metrics CSV
//   mrf sample [flags]     draw a Gibbs dataset from a model
//   mrf fit [flags]        fit one estimator to a dataset file
//   mrf check              run a quick invariant suite

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lapmrf/lapmrf.hpp"

namespace {

using namespace lapmrf;

struct ModelFlags {
  std::string kind = "grid2d";
  std::vector<int> dims{4, 4};
  std::string model_file;
};

void add_model_flags(CLI::App* app, ModelFlags& mf) {
  app->add_option("--model", mf.kind, "topology: chain, grid2d, grid3d, chimera, rbm")
      ->capture_default_str();
  app->add_option("--dims", mf.dims, "dimensions, e.g. 4,4")->delimiter(',')
      ->capture_default_str();
  app->add_option("--model-file", mf.model_file,
                  "read structure (and weights, where relevant) from a model text file");
}

LogLinearModel load_model(const ModelFlags& mf) {
  if (!mf.model_file.empty()) {
    std::ifstream in(mf.model_file);
    if (!in) throw std::runtime_error("cannot open model file: " + mf.model_file);
    return read_model(in);
  }
  return LogLinearModel(build_model(model_kind_from_string(mf.kind), mf.dims));
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open output file: " + path);
  return file;
}

std::string summary_path_for(const std::string& out) {
  if (out.size() > 4 && out.substr(out.size() - 4) == ".csv")
    return out.substr(0, out.size() - 4) + ".summary.csv";
  return out + ".summary.csv";
}

int cmd_experiment(const ExperimentConfig& cfg, const std::string& out) {
  std::vector<MetricsRow> rows = run_experiment(cfg);
  std::vector<SummaryRow> summary = aggregate(rows);
  const std::string label = model_label(cfg);
  if (out.empty() || out == "-") {
    write_metrics_csv(std::cout, label, rows);
    write_summary_csv(std::cout, label, summary);
  } else {
    std::ofstream mf(out);
    if (!mf) throw std::runtime_error("cannot open output file: " + out);
    write_metrics_csv(mf, label, rows);
    std::ofstream sf(summary_path_for(out));
    if (!sf) throw std::runtime_error("cannot open output file: " + summary_path_for(out));
    write_summary_csv(sf, label, summary);
    std::cerr << "wrote " << rows.size() << " rows to " << out << " and summary to "
              << summary_path_for(out) << "\n";
  }
  return 0;
}

int cmd_sample(const ModelFlags& mf, int n, std::uint64_t seed, int burnin, int thin,
               const std::string& out) {
  LogLinearModel model = load_model(mf);
  if (mf.model_file.empty()) {
    // no explicit weights: draw them the same way the harness does for run 0
    Rng rng(derive_seed(seed, 1, 0));
    for (double& t : model.params()) t = rng.uniform(-1.0, 1.0);
  }
  SamplerConfig cfg;
  cfg.burn_in_sweeps = burnin;
  cfg.thin_sweeps = thin;
  cfg.seed = derive_seed(seed, 2, 0);
  Dataset data = gibbs_sample(model, n, cfg);
  std::ofstream file;
  write_dataset(open_output(file, out), data);
  return 0;
}

int cmd_fit(const ModelFlags& mf, const std::string& data_path, const std::string& est_name,
            const std::string& merge_name, const std::string& backend_name, double tol,
            int workers, const std::string& out) {
  LogLinearModel model = load_model(mf);
  std::ifstream in(data_path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + data_path);
  Dataset data = read_dataset(in);

  OptimizerConfig opt;
  opt.tol_grad_inf = tol;
  InferenceOptions inf;
  inf.backend = backend_from_string(backend_name);

  EstimationResult res;
  switch (estimator_from_string(est_name)) {
    case Estimator::ml:
      res = fit_ml(model.graph(), model.cliques(), data, inf, opt);
      break;
    case Estimator::pl:
      res = fit_pl(model.graph(), model.cliques(), data, opt);
      break;
    default: {
      LapOptions lo;
      Estimator e = estimator_from_string(est_name);
      lo.strategy = e == Estimator::lap_e   ? AuxStrategy::exact
                    : e == Estimator::lap_d ? AuxStrategy::dense
                                            : AuxStrategy::pairwise;
      lo.merge = merge_name == "average" ? MergeRule::average : MergeRule::owner_read;
      lo.workers = workers;
      lo.inference = inf;
      lo.optimizer = opt;
      res = fit_lap(model.graph(), model.cliques(), data, lo);
      break;
    }
  }
  std::ofstream file;
  write_result(open_output(file, out), model.graph(), model.cliques(), res);
  return 0;
}

// ---------------------------------------------------------------------------
// mrf check: fast self-contained invariant suite.

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
  if (ok) {
    std::cout << "ok   " << name << "\n";
  } else {
    std::cout << "FAIL " << name << (detail.empty() ? "" : " (" + detail + ")") << "\n";
    ++failures;
  }
}

LogLinearModel seeded(ModelStructure st, std::uint64_t seed) {
  LogLinearModel m(std::move(st));
  Rng rng(seed);
  for (double& t : m.params()) t = rng.uniform(-1.0, 1.0);
  return m;
}

void check_mobius_roundtrip() {
  LogLinearModel m = seeded(build_chain(5), 11);
  MobiusPotentials w = mobius_weights(joint_table(m));
  double worst = 0.0;
  for (int b = 0; b < m.cliques().num_blocks(); ++b)
    worst = std::max(worst, std::abs(w.weight_of(m.cliques().block(b)) -
                                     m.params()[static_cast<std::size_t>(b)]));
  // a non-block subset: {0, 2} is no clique of the chain
  worst = std::max(worst, std::abs(w.weight_of({0, 2})));
  report("mobius round trip", worst < 1e-10, "max deviation " + std::to_string(worst));
}

void check_backends_agree() {
  LogLinearModel m = seeded(build_grid2d(3, 3), 12);
  InferenceOptions brute, ve;
  brute.backend = Backend::brute;
  ve.backend = Backend::ve;
  InferenceResult a = infer(m, brute), b = infer(m, ve);
  double worst = std::abs(a.log_z - b.log_z);
  for (std::size_t i = 0; i < a.feature_means.size(); ++i)
    worst = std::max(worst, std::abs(a.feature_means[i] - b.feature_means[i]));
  report("brute force and elimination agree", worst < 1e-10,
         "max deviation " + std::to_string(worst));
}

template <class Value>
double max_fd_gap(const LogLinearModel& base, Value&& value,
                  const std::vector<double>& grad) {
  const double h = 1e-5;
  double worst = 0.0;
  std::vector<double> theta = base.params();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    std::vector<double> lo = theta, hi = theta;
    lo[i] -= h;
    hi[i] += h;
    double fd = (value(hi) - value(lo)) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

void check_gradients() {
  LogLinearModel m = seeded(build_chain(3), 13);
  SamplerConfig sc;
  sc.seed = 7;
  sc.burn_in_sweeps = 50;
  sc.thin_sweeps = 2;
  Dataset data = gibbs_sample(m, 200, sc);
  SufficientStats stats = sufficient_stats(m.cliques(), data);

  auto [mlv, mlg] = ml_objective_grad(m, stats);
  (void)mlv;
  double worst_ml = max_fd_gap(m, [&](const std::vector<double>& th) {
    LogLinearModel t(m.graph(), m.cliques(), th);
    return ml_objective_grad(t, stats).first;
  }, mlg);
  report("likelihood gradient matches finite differences", worst_ml < 1e-6,
         "max relative gap " + std::to_string(worst_ml));

  auto [plv, plg] = pl_objective_grad(m, data);
  (void)plv;
  double worst_pl = max_fd_gap(m, [&](const std::vector<double>& th) {
    LogLinearModel t(m.graph(), m.cliques(), th);
    return pl_objective_grad(t, data).first;
  }, plg);
  report("pseudo-likelihood gradient matches finite differences", worst_pl < 1e-6,
         "max relative gap " + std::to_string(worst_pl));
}

void check_marginal_potentials() {
  LogLinearModel m = seeded(build_grid2d(2, 3), 14);
  JointTable joint = joint_table(m);
  double worst = 0.0;
  for (const VarSet& q : m.cliques().maximal()) {
    VarSet a = one_neighborhood(m.graph(), m.cliques(), q);
    MobiusPotentials w = mobius_weights(marginalize(joint, a));
    for (int b = 0; b < m.cliques().num_blocks(); ++b)
      if (vs::is_subset(m.cliques().block(b), q))
        worst = std::max(worst, std::abs(w.weight_of(m.cliques().block(b)) -
                                         m.params()[static_cast<std::size_t>(b)]));
  }
  report("marginal potentials match joint weights inside each clique", worst < 1e-8,
         "max deviation " + std::to_string(worst));
}

void check_lap_equals_ml_on_chain() {
  LogLinearModel m = seeded(build_chain(4), 15);
  SamplerConfig sc;
  sc.seed = 9;
  sc.burn_in_sweeps = 100;
  sc.thin_sweeps = 2;
  Dataset data = gibbs_sample(m, 500, sc);
  EstimationResult ml = fit_ml(m.graph(), m.cliques(), data);
  LapOptions lo;
  EstimationResult lap = fit_lap(m.graph(), m.cliques(), data, lo);
  double worst = 0.0;
  for (std::size_t i = 0; i < ml.params.size(); ++i)
    worst = std::max(worst, std::abs(ml.params[i] - lap.params[i]));
  report("exact-strategy estimate equals full likelihood on a chain", worst < 1e-4,
         "max deviation " + std::to_string(worst));
}

void check_determinism() {
  LogLinearModel m = seeded(build_grid2d(2, 2), 16);
  SamplerConfig sc;
  sc.seed = 21;
  sc.burn_in_sweeps = 20;
  sc.thin_sweeps = 1;
  bool same = gibbs_sample(m, 100, sc) == gibbs_sample(m, 100, sc);
  std::string text = model_to_string(m);
  bool round = model_to_string(model_from_string(text)) == text;
  report("sampler deterministic and model text round-trips", same && round);
}

int cmd_check() {
  check_mobius_roundtrip();
  check_backends_agree();
  check_gradients();
  check_marginal_potentials();
  check_lap_equals_ml_on_chain();
  check_determinism();
  std::cout << (failures == 0 ? "all checks passed\n"
                              : std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parameter estimation for binary log-linear Markov random fields"};
  app.require_subcommand(0, 1);

  // experiment flags (top level)
  ModelFlags emf;
  ExperimentConfig cfg;
  std::string out, estimators = "ml,pl,lap_e,lap_d,lap_p";
  std::string merge = "owner", backend = "auto";
  app.add_option("--model", emf.kind, "topology: chain, grid2d, grid3d, chimera, rbm")
      ->capture_default_str();
  app.add_option("--dims", emf.dims, "dimensions, e.g. 4,4")->delimiter(',')
      ->capture_default_str();
  app.add_option("--samples", cfg.sample_sizes, "sample sizes, ascending")->delimiter(',')
      ->capture_default_str();
  app.add_option("--runs", cfg.runs, "independent runs")->capture_default_str();
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--estimators", estimators, "comma list of ml,pl,lap_e,lap_d,lap_p")
      ->capture_default_str();
  app.add_option("--merge", merge, "owner or average")->capture_default_str();
  app.add_option("--burnin", cfg.sampler.burn_in_sweeps, "burn-in sweeps")
      ->capture_default_str();
  app.add_option("--thin", cfg.sampler.thin_sweeps, "sweeps between kept samples")
      ->capture_default_str();
  app.add_option("--tol", cfg.optimizer.tol_grad_inf, "gradient tolerance")
      ->capture_default_str();
  app.add_option("--out", out, "metrics CSV path (summary goes next to it); stdout if absent");
  app.add_option("--backend", backend, "brute, ve, or auto")->capture_default_str();
  app.add_option("--workers", cfg.workers, "parallel sub-problems")->capture_default_str();

  // sample
  auto* sample = app.add_subcommand("sample", "draw a Gibbs dataset");
  ModelFlags smf;
  int sample_n = 1000, sample_burnin = 1000, sample_thin = 10;
  std::uint64_t sample_seed = 0;
  std::string sample_out;
  add_model_flags(sample, smf);
  sample->add_option("--n", sample_n, "number of samples")->capture_default_str();
  sample->add_option("--seed", sample_seed, "master seed")->capture_default_str();
  sample->add_option("--burnin", sample_burnin, "burn-in sweeps")->capture_default_str();
  sample->add_option("--thin", sample_thin, "sweeps between kept samples")
      ->capture_default_str();
  sample->add_option("--out", sample_out, "dataset CSV path; stdout if absent");

  // fit
  auto* fit = app.add_subcommand("fit", "fit one estimator to a dataset");
  ModelFlags fmf;
  std::string fit_data, fit_est = "ml", fit_merge = "owner", fit_backend = "auto", fit_out;
  double fit_tol = 1e-6;
  int fit_workers = 1;
  add_model_flags(fit, fmf);
  fit->add_option("--data", fit_data, "dataset CSV file")->required();
  fit->add_option("--estimator", fit_est, "one of ml, pl, lap_e, lap_d, lap_p")
      ->capture_default_str();
  fit->add_option("--merge", fit_merge, "owner or average")->capture_default_str();
  fit->add_option("--backend", fit_backend, "brute, ve, or auto")->capture_default_str();
  fit->add_option("--tol", fit_tol, "gradient tolerance")->capture_default_str();
  fit->add_option("--workers", fit_workers, "parallel sub-problems")->capture_default_str();
  fit->add_option("--out", fit_out, "output path; stdout if absent");

  auto* check = app.add_subcommand("check", "run the invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed())
      return cmd_sample(smf, sample_n, sample_seed, sample_burnin, sample_thin, sample_out);
    if (fit->parsed())
      return cmd_fit(fmf, fit_data, fit_est, fit_merge, fit_backend, fit_tol, fit_workers,
                     fit_out);
    if (check->parsed()) return cmd_check();

    cfg.kind = model_kind_from_string(emf.kind);
    cfg.dims = emf.dims;
    cfg.merge = merge == "average" ? MergeRule::average : MergeRule::owner_read;
    cfg.inference.backend = backend_from_string(backend);
    cfg.estimators.clear();
    std::istringstream es(estimators);
    std::string tok;
    while (std::getline(es, tok, ','))
      if (!tok.empty()) cfg.estimators.push_back(estimator_from_string(tok));
    if (cfg.estimators.empty()) throw std::runtime_error("no estimators requested");
    return cmd_experiment(cfg, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
