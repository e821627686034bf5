#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "lapmrf/estimation.hpp"
#include "lapmrf/rng.hpp"

namespace lapmrf {

enum class Estimator { ml, pl, lap_e, lap_d, lap_p };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::ml: return "ml";
    case Estimator::pl: return "pl";
    case Estimator::lap_e: return "lap_e";
    case Estimator::lap_d: return "lap_d";
    case Estimator::lap_p: return "lap_p";
  }
  return "?";
}

inline Estimator estimator_from_string(const std::string& s) {
  if (s == "ml") return Estimator::ml;
  if (s == "pl") return Estimator::pl;
  if (s == "lap_e") return Estimator::lap_e;
  if (s == "lap_d") return Estimator::lap_d;
  if (s == "lap_p") return Estimator::lap_p;
  throw DimensionError("unknown estimator: " + s);
}

struct ExperimentConfig {
  ModelKind kind = ModelKind::grid2d;
  std::vector<int> dims{4, 4};
  std::vector<int> sample_sizes{100, 1000, 10000};
  int runs = 10;
  std::uint64_t seed = 0;
  std::vector<Estimator> estimators{Estimator::ml, Estimator::pl, Estimator::lap_e,
                                    Estimator::lap_d, Estimator::lap_p};
  MergeRule merge = MergeRule::owner_read;
  SamplerConfig sampler;  // per-run seed is derived, the seed field is ignored
  OptimizerConfig optimizer;
  InferenceOptions inference;
  int workers = 1;
};

inline std::string model_label(const ExperimentConfig& cfg) {
  std::string s = to_string(cfg.kind);
  s += "(";
  for (std::size_t i = 0; i < cfg.dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(cfg.dims[i]);
  }
  return s + ")";
}

struct MetricsRow {
  Estimator estimator = Estimator::ml;
  int n = 0;
  int run = 0;
  double err = 0.0;
  double seconds = 0.0;
  std::vector<double> params;  // kept for variance aggregation
};

struct SummaryRow {
  Estimator estimator = Estimator::ml;
  int n = 0;
  double mean_err = 0.0;
  double std_err = 0.0;
  double mean_param_var = 0.0;
};

// err(theta) = |theta - theta_ml| / |theta_ml| in the Euclidean norm.
inline double relative_error(const std::vector<double>& theta,
                             const std::vector<double>& theta_ml) {
  if (theta.size() != theta_ml.size())
    throw DimensionError("parameter vectors of different length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    num += (theta[i] - theta_ml[i]) * (theta[i] - theta_ml[i]);
    den += theta_ml[i] * theta_ml[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num) / std::sqrt(den);
}

namespace detail {

// seed streams: 1 = generating parameters, 2 = sampler
constexpr std::uint64_t kParamStream = 1;
constexpr std::uint64_t kSamplerStream = 2;

}  // namespace detail

inline std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw DimensionError("run count must be at least 1");
  if (cfg.sample_sizes.empty()) throw DimensionError("no sample sizes given");
  for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i) {
    if (cfg.sample_sizes[i] < 1) throw DimensionError("sample sizes must be positive");
    if (i && cfg.sample_sizes[i] <= cfg.sample_sizes[i - 1])
      throw DimensionError("sample sizes must be strictly ascending");
  }

  const ModelStructure st = build_model(cfg.kind, cfg.dims);
  const int max_n = cfg.sample_sizes.back();
  std::vector<MetricsRow> rows;

  for (int run = 0; run < cfg.runs; ++run) {
    Rng param_rng(derive_seed(cfg.seed, detail::kParamStream, static_cast<std::uint64_t>(run)));
    std::vector<double> theta_true(static_cast<std::size_t>(st.cliques.num_blocks()));
    for (double& t : theta_true) t = param_rng.uniform(-1.0, 1.0);
    LogLinearModel truth(st.graph, st.cliques, theta_true);

    SamplerConfig sampler = cfg.sampler;
    sampler.seed = derive_seed(cfg.seed, detail::kSamplerStream, static_cast<std::uint64_t>(run));
    const Dataset stream = gibbs_sample(truth, max_n, sampler);

    for (int n : cfg.sample_sizes) {
      const Dataset data(stream.begin(), stream.begin() + n);
      const EstimationResult ml = fit_ml(st.graph, st.cliques, data, cfg.inference,
                                         cfg.optimizer);
      for (Estimator est : cfg.estimators) {
        MetricsRow row;
        row.estimator = est;
        row.n = n;
        row.run = run;
        switch (est) {
          case Estimator::ml:
            row.err = 0.0;
            row.seconds = ml.seconds;
            row.params = ml.params;
            break;
          case Estimator::pl: {
            EstimationResult r = fit_pl(st.graph, st.cliques, data, cfg.optimizer);
            row.err = relative_error(r.params, ml.params);
            row.seconds = r.seconds;
            row.params = std::move(r.params);
            break;
          }
          case Estimator::lap_e:
          case Estimator::lap_d:
          case Estimator::lap_p: {
            LapOptions lo;
            lo.strategy = est == Estimator::lap_e   ? AuxStrategy::exact
                          : est == Estimator::lap_d ? AuxStrategy::dense
                                                    : AuxStrategy::pairwise;
            lo.merge = cfg.merge;
            lo.workers = cfg.workers;
            lo.inference = cfg.inference;
            lo.optimizer = cfg.optimizer;
            EstimationResult r = fit_lap(st.graph, st.cliques, data, lo);
            row.err = relative_error(r.params, ml.params);
            row.seconds = r.seconds;
            row.params = std::move(r.params);
            break;
          }
        }
        rows.push_back(std::move(row));
      }
    }
  }

  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    if (a.estimator != b.estimator) return a.estimator < b.estimator;
    if (a.n != b.n) return a.n < b.n;
    return a.run < b.run;
  });
  return rows;
}

// Per (estimator, N): mean err, population standard deviation of err, and the
// mean over parameters of the population variance of each parameter estimate.
inline std::vector<SummaryRow> aggregate(const std::vector<MetricsRow>& rows) {
  std::vector<SummaryRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].estimator == rows[i].estimator && rows[j].n == rows[i].n)
      ++j;
    const double count = static_cast<double>(j - i);
    SummaryRow s;
    s.estimator = rows[i].estimator;
    s.n = rows[i].n;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t k = i; k < j; ++k) {
      sum += rows[k].err;
      sumsq += rows[k].err * rows[k].err;
    }
    s.mean_err = sum / count;
    const double var = std::max(0.0, sumsq / count - s.mean_err * s.mean_err);
    s.std_err = std::sqrt(var);
    const std::size_t dim = rows[i].params.size();
    double var_acc = 0.0;
    for (std::size_t p = 0; p < dim; ++p) {
      double m = 0.0, m2 = 0.0;
      for (std::size_t k = i; k < j; ++k) {
        if (rows[k].params.size() != dim)
          throw DimensionError("inconsistent parameter lengths in aggregation group");
        m += rows[k].params[p];
        m2 += rows[k].params[p] * rows[k].params[p];
      }
      m /= count;
      var_acc += std::max(0.0, m2 / count - m * m);
    }
    s.mean_param_var = dim ? var_acc / static_cast<double>(dim) : 0.0;
    out.push_back(s);
    i = j;
  }
  return out;
}

inline void write_metrics_csv(std::ostream& os, const std::string& model,
                              const std::vector<MetricsRow>& rows) {
  os << "estimator,model,N,run,err,seconds\n";
  char buf[64];
  for (const MetricsRow& r : rows) {
    os << to_string(r.estimator) << "," << model << "," << r.n << "," << r.run << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.err);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.6f", r.seconds);
    os << buf << "\n";
  }
}

inline void write_summary_csv(std::ostream& os, const std::string& model,
                              const std::vector<SummaryRow>& rows) {
  os << "# std_err is the population standard deviation over runs (divide by run count)\n";
  os << "estimator,model,N,mean_err,std_err,mean_param_var\n";
  char buf[64];
  for (const SummaryRow& r : rows) {
    os << to_string(r.estimator) << "," << model << "," << r.n << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.mean_err);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.std_err);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.mean_param_var);
    os << buf << "\n";
  }
}

}  // namespace lapmrf
