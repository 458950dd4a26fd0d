#pragma once

// Reproducible numerical studies over the estimators:
//
//   vs-N        input norm / final error as the number of experiments grows
//   vs-n        the same as the state dimension grows (T = n, N = mT + 20)
//   noise-bias  bias of the data-driven inputs under Gaussian measurement noise
//   demo-2d     trajectories of a planar plant for N = 1..4 experiments
//
// Each trial draws its random streams from derive_seed(master_seed, study,
// trial, point), so a study is a pure function of its configuration. Records
// are kept per trial; aggregates are computed from the records afterwards.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mecontrol/datagen.hpp"
#include "mecontrol/estimators.hpp"
#include "mecontrol/io.hpp"

namespace mecontrol::bench {

enum class Study { kVsN, kVsn, kNoiseBias, kDemo2d };

inline const char* to_string(Study s) {
  switch (s) {
    case Study::kVsN: return "vs-N";
    case Study::kVsn: return "vs-n";
    case Study::kNoiseBias: return "noise-bias";
    case Study::kDemo2d: return "demo-2d";
  }
  return "?";
}

inline std::optional<Study> parse_study(const std::string& name) {
  for (Study s : {Study::kVsN, Study::kVsn, Study::kNoiseBias, Study::kDemo2d}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> methods = {"ctrb", "gramian", "dd-kernel", "dd-pinv",
                                                   "dd-asymptotic"};
  return methods;
}

inline const std::vector<std::string>& data_methods() {
  static const std::vector<std::string> methods = {"dd-kernel", "dd-pinv", "dd-asymptotic"};
  return methods;
}

inline std::optional<DataMethod> parse_data_method(const std::string& tag) {
  if (tag == "dd-kernel") return DataMethod::kKernel;
  if (tag == "dd-pinv") return DataMethod::kPinv;
  if (tag == "dd-asymptotic") return DataMethod::kAsymptotic;
  return std::nullopt;
}

struct BenchConfig {
  Study study = Study::kVsN;
  Eigen::Index n = 20;
  Eigen::Index m = 2;
  Eigen::Index T = 40;
  Eigen::Index N = 10;        // noise-bias experiment count
  Eigen::Index N_extra = 20;  // vs-n: N = mT + N_extra
  std::vector<Eigen::Index> sweep;  // N values (vs-N) or n values (vs-n)
  std::vector<double> sigmas;       // noise-bias
  int trials = 100;
  std::uint64_t master_seed = 1;
  std::vector<std::string> methods;
  double entry_scale = 1.0;  // std-dev of B, x0, xf entries

  static BenchConfig defaults(Study study) {
    BenchConfig c;
    c.study = study;
    switch (study) {
      case Study::kVsN:
        c.n = 20;
        c.m = 2;
        c.T = 40;
        c.sweep = {5, 10, 20, 30, 40, 50, 60, 70, 80, 81, 90, 100, 120, 160, 200};
        c.trials = 100;
        c.methods = all_methods();
        break;
      case Study::kVsn:
        c.m = 2;
        c.N_extra = 20;
        c.sweep = {5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
        c.trials = 1000;
        c.methods = all_methods();
        break;
      case Study::kNoiseBias:
        c.n = 3;
        c.m = 1;
        c.T = 8;
        c.N = 10;
        c.sigmas = {0.0, 0.005, 0.01, 0.02, 0.05, 0.1};
        c.trials = 100;
        c.methods = data_methods();
        break;
      case Study::kDemo2d:
        c.n = 2;
        c.m = 1;
        c.T = 4;
        c.sweep = {1, 2, 3, 4};
        c.trials = 1;
        c.methods = {"dd-kernel"};
        break;
    }
    return c;
  }

  void validate() const {
    if (trials < 1) throw InvalidInput("trials must be >= 1");
    if (study == Study::kNoiseBias) {
      if (sigmas.empty()) throw InvalidInput("noise-bias needs a nonempty sigma sweep");
      for (double s : sigmas) {
        if (!(s >= 0.0)) throw InvalidInput("noise sigma must be >= 0");
      }
    } else if (sweep.empty()) {
      throw InvalidInput("sweep range must be nonempty");
    }
    for (auto v : sweep) {
      if (v < 1) throw InvalidInput("sweep values must be >= 1");
    }
    if (methods.empty()) throw InvalidInput("at least one method is required");
    for (const auto& tag : methods) {
      if (std::find(all_methods().begin(), all_methods().end(), tag) == all_methods().end()) {
        throw InvalidInput("unknown method '" + tag + "'");
      }
      if (study == Study::kNoiseBias && !parse_data_method(tag)) {
        throw InvalidInput("noise-bias only evaluates data-driven methods");
      }
    }
  }

  nlohmann::json to_json() const {
    return {{"study", to_string(study)}, {"n", n},          {"m", m},
            {"T", T},                    {"N", N},          {"N_extra", N_extra},
            {"sweep", sweep},            {"sigmas", sigmas}, {"trials", trials},
            {"master_seed", master_seed}, {"methods", methods},
            {"entry_scale", entry_scale}};
  }
};

struct BenchRecord {
  std::string study;
  int trial = 0;  // -1 marks an aggregate over all trials of a sweep point
  std::uint64_t seed = 0;
  Eigen::Index n = 0, m = 0, T = 0, N = 0;
  std::string method;
  double input_norm = 0.0;
  double final_error = 0.0;
  bool overflow = false;
  std::map<std::string, double> extra;

  bool finite() const {
    return !overflow && std::isfinite(input_norm) && std::isfinite(final_error);
  }
};

struct StudyResult {
  BenchConfig config;
  std::vector<BenchRecord> records;
  std::vector<Trajectory> trajectories;  // demo-2d only, one per N
};

// ---------------------------------------------------------------------------
// Fixed plants

/// The 3-state single-input plant of the noise study.
inline LtiSystem noise_study_system() {
  Matrix A(3, 3);
  // clang-format off
  A << -0.8, 0,   0,
        2,   0.1, 0,
        0.2, 1,   0.5;
  // clang-format on
  Matrix B(3, 1);
  B << 1, 0, 0;
  return LtiSystem(A, B);
}

inline Vector noise_study_target() {
  Vector xf(3);
  xf << 0.3, 1, 0.5;
  return xf;
}

/// Planar single-input stand-in plant for the two-dimensional demo: a lightly
/// damped rotation driven through its second state.
inline LtiSystem demo_system() {
  Matrix A(2, 2);
  A << 0.9, 0.4, -0.4, 0.9;
  Matrix B(2, 1);
  B << 0.0, 1.0;
  return LtiSystem(A, B);
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t study_tag(Study s) { return 0xBE7C0 + static_cast<std::uint64_t>(s); }

inline BenchRecord overflow_record(BenchRecord r) {
  r.overflow = true;
  r.input_norm = std::numeric_limits<double>::quiet_NaN();
  r.final_error = std::numeric_limits<double>::quiet_NaN();
  return r;
}

inline BenchRecord to_record(BenchRecord base, const ControlSolution& sol) {
  if (!sol.finite() || !sol.final_error || !std::isfinite(*sol.final_error)) {
    return overflow_record(std::move(base));
  }
  base.input_norm = sol.input_norm;
  base.final_error = *sol.final_error;
  for (const auto& [k, v] : sol.diagnostics.assumptions) {
    if (k == "kernel_reaches_ones") base.extra["ones_ok"] = v ? 1.0 : 0.0;
  }
  return base;
}

/// Runs every configured method on one instance with a nonzero initial state;
/// the data-driven methods use the augmented forms without enforcing the
/// design assumptions, so under-determined points are still recorded.
inline void run_methods(const BenchConfig& cfg, const LtiSystem& sys, const ControlTask& task,
                        const std::optional<ExperimentSet>& data, const BenchRecord& base,
                        std::vector<BenchRecord>& out) {
  DataOptions opts;
  opts.enforce_assumptions = false;
  for (const auto& tag : cfg.methods) {
    BenchRecord rec = base;
    rec.method = tag;
    try {
      ControlSolution sol;
      if (tag == "ctrb") {
        sol = me_ctrb(sys, task);
      } else if (tag == "gramian") {
        sol = me_gramian(sys, task);
      } else {
        if (!data) throw InvalidInput("no data");
        sol = dd_x0(*parse_data_method(tag), *data, task.target, opts);
        evaluate(sys, task, sol);
      }
      out.push_back(to_record(std::move(rec), sol));
    } catch (const InvalidInput&) {
      // Non-finite intermediates (A^T overflow at large n*T).
      out.push_back(overflow_record(std::move(rec)));
    }
  }
}

struct Instance {
  LtiSystem sys;
  Vector x0;
  Vector xf;
};

inline Instance draw_instance(Eigen::Index n, Eigen::Index m, double scale, std::uint64_t seed) {
  LtiSystem sys = random_system(n, m, derive_seed(seed, 1), scale);
  Rng rng(derive_seed(seed, 2));
  Vector x0 = scale * standard_normal(n, rng);
  Vector xf = scale * standard_normal(n, rng);
  return {std::move(sys), std::move(x0), std::move(xf)};
}

inline std::optional<ExperimentSet> try_experiments(const LtiSystem& sys, const Vector& x0,
                                                    const Matrix& U, Eigen::Index T) {
  ExperimentSet data = run_experiments(sys, x0, U, T);
  if (!data.X.allFinite()) return std::nullopt;
  return data;
}

}  // namespace detail

/// Number of experiments varies at fixed (n, m, T). Inputs for the sweep are
/// nested: point N uses the first N columns of one draw per trial.
inline StudyResult study_vs_N(const BenchConfig& cfg) {
  cfg.validate();
  StudyResult res{cfg, {}, {}};
  const Eigen::Index n_max = *std::max_element(cfg.sweep.begin(), cfg.sweep.end());
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = derive_seed(cfg.master_seed, detail::study_tag(cfg.study), trial);
    const auto inst = detail::draw_instance(cfg.n, cfg.m, cfg.entry_scale, seed);
    const Matrix U_all =
        design_inputs(InputDesign::iid_gaussian(n_max, derive_seed(seed, 3)), cfg.m, cfg.T).U;
    const auto task = ControlTask::to_state(inst.x0, inst.xf, cfg.T);
    const auto full = detail::try_experiments(inst.sys, inst.x0, U_all, cfg.T);
    for (const Eigen::Index N : cfg.sweep) {
      BenchRecord base{to_string(cfg.study), trial, seed, cfg.n, cfg.m, cfg.T, N};
      std::optional<ExperimentSet> data;
      if (full) {
        data = *full;
        data->U = full->U.leftCols(N);
        data->X = full->X.leftCols(N);
      }
      detail::run_methods(cfg, inst.sys, task, data, base, res.records);
    }
  }
  return res;
}

/// State dimension varies with T = n and N = mT + N_extra.
inline StudyResult study_vs_n(const BenchConfig& cfg) {
  cfg.validate();
  StudyResult res{cfg, {}, {}};
  for (const Eigen::Index n : cfg.sweep) {
    const Eigen::Index T = n;
    const Eigen::Index N = cfg.m * T + cfg.N_extra;
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t seed =
          derive_seed(cfg.master_seed, detail::study_tag(cfg.study), trial, n);
      const auto inst = detail::draw_instance(n, cfg.m, cfg.entry_scale, seed);
      const Matrix U =
          design_inputs(InputDesign::iid_gaussian(N, derive_seed(seed, 3)), cfg.m, T).U;
      const auto task = ControlTask::to_state(inst.x0, inst.xf, T);
      BenchRecord base{to_string(cfg.study), trial, seed, n, cfg.m, T, N};
      detail::run_methods(cfg, inst.sys, task, detail::try_experiments(inst.sys, inst.x0, U, T),
                          base, res.records);
    }
  }
  return res;
}

/// Bias of the data-driven inputs on the fixed 3-state plant (x0 = 0). One
/// noiseless data set (U, X) is drawn once; each realization perturbs both U
/// and X with fresh N(0, sigma^2) noise. The reference u* of each method is
/// its own output on the noiseless data (the asymptotic form is not the
/// minimum-energy input at N > mT). Per-realization records carry
/// ||u_hat - u*|| as extra "dev"; the aggregate record (trial = -1) carries
/// the bias ||mean(u_hat) - u*|| as "bias" and the distance of the mean to
/// the minimum-energy input as "bias_opt".
inline StudyResult study_noise_bias(const BenchConfig& cfg) {
  cfg.validate();
  StudyResult res{cfg, {}, {}};
  const LtiSystem sys = noise_study_system();
  const Vector xf = noise_study_target();
  const Eigen::Index T = cfg.T;
  const std::uint64_t base_seed = derive_seed(cfg.master_seed, detail::study_tag(cfg.study));
  const Matrix U =
      design_inputs(InputDesign::iid_gaussian(cfg.N, derive_seed(base_seed, 3)), sys.m(), T).U;
  const ExperimentSet clean = run_experiments(sys, Vector::Zero(sys.n()), U, T);
  const auto task = ControlTask::to_state(Vector::Zero(sys.n()), xf, T);
  const Vector optimal = me_ctrb(sys, task).u;
  std::map<std::string, Vector> reference;
  for (const auto& tag : cfg.methods) {
    reference[tag] = mecontrol::detail::plain(*parse_data_method(tag), clean, xf, std::nullopt).u;
  }

  for (std::size_t si = 0; si < cfg.sigmas.size(); ++si) {
    const double sigma = cfg.sigmas[si];
    std::map<std::string, Vector> sums;
    std::map<std::string, int> counts;
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t seed = derive_seed(base_seed, trial, si);
      const ExperimentSet noisy =
          add_noise(clean, NoiseModel::gaussian(sigma, NoiseModel::Target::kBoth, seed));
      for (const auto& tag : cfg.methods) {
        BenchRecord rec{to_string(cfg.study), trial, seed, sys.n(), sys.m(), T, cfg.N, tag};
        rec.extra["sigma"] = sigma;
        auto sol = mecontrol::detail::plain(*parse_data_method(tag), noisy, xf, std::nullopt);
        evaluate(sys, task, sol);
        if (sol.finite()) {
          rec.extra["dev"] = (sol.u - reference[tag]).norm();
          auto [it, fresh] = sums.try_emplace(tag, Vector::Zero(sol.u.size()));
          it->second += sol.u;
          ++counts[tag];
        }
        res.records.push_back(detail::to_record(std::move(rec), sol));
      }
    }
    for (const auto& tag : cfg.methods) {
      BenchRecord agg{to_string(cfg.study), -1, base_seed, sys.n(), sys.m(), T, cfg.N, tag};
      agg.extra["sigma"] = sigma;
      if (counts[tag] == 0) {
        res.records.push_back(detail::overflow_record(std::move(agg)));
        continue;
      }
      const Vector mean = sums[tag] / counts[tag];
      ControlSolution sol;
      sol.u = mean;
      sol.m = sys.m();
      sol.input_norm = mean.norm();
      evaluate(sys, task, sol);
      agg.input_norm = sol.input_norm;
      agg.final_error = *sol.final_error;
      agg.extra["bias"] = (mean - reference[tag]).norm();
      agg.extra["bias_opt"] = (mean - optimal).norm();
      res.records.push_back(std::move(agg));
    }
  }
  return res;
}

/// Planar demo: dd-kernel inputs from the first N of four fixed experiments,
/// plus the model-based minimum-energy input for reference.
inline StudyResult demo_2d(const BenchConfig& cfg) {
  cfg.validate();
  StudyResult res{cfg, {}, {}};
  const LtiSystem sys = demo_system();
  const Eigen::Index T = cfg.T;
  const Vector x0 = Vector::Zero(2);
  Vector xf(2);
  xf << 0.0, 1.0;
  const std::uint64_t seed = derive_seed(cfg.master_seed, detail::study_tag(cfg.study));
  const Eigen::Index n_max = *std::max_element(cfg.sweep.begin(), cfg.sweep.end());
  const Matrix U_all = design_inputs(InputDesign::iid_gaussian(n_max, seed), sys.m(), T).U;
  const auto task = ControlTask::to_state(x0, xf, T);
  for (const Eigen::Index N : cfg.sweep) {
    const ExperimentSet data = run_experiments(sys, x0, U_all.leftCols(N), T);
    auto sol = dd_kernel(data, xf);
    evaluate(sys, task, sol);
    res.trajectories.push_back(simulate(sys, x0, sol.stacked()));
    BenchRecord rec{to_string(cfg.study), 0, seed, 2, sys.m(), T, N, "dd-kernel"};
    rec.extra["data_residual"] = *sol.diagnostics.data_residual;
    res.records.push_back(detail::to_record(std::move(rec), sol));
  }
  const auto mb = me_ctrb(sys, task);
  BenchRecord rec{to_string(cfg.study), 0, seed, 2, sys.m(), T, 0, "ctrb"};
  res.records.push_back(detail::to_record(std::move(rec), mb));
  return res;
}

inline StudyResult run_study(const BenchConfig& cfg) {
  switch (cfg.study) {
    case Study::kVsN: return study_vs_N(cfg);
    case Study::kVsn: return study_vs_n(cfg);
    case Study::kNoiseBias: return study_noise_bias(cfg);
    case Study::kDemo2d: return demo_2d(cfg);
  }
  throw InvalidInput("unknown study");
}

// ---------------------------------------------------------------------------
// Scalar bias oracle

struct ScalarBias {
  double empirical = 0.0;
  double standard_error = 0.0;
  double closed_form = 0.0;
  long realizations = 0;
};

/// (u1 / (2 eps)) ln((u1 + eps) / (u1 - eps)) - 1, times xf; requires
/// 0 < eps < |u1|.
inline double scalar_bias_closed_form(double u1, double eps, double xf) {
  if (!(eps > 0.0) || !(eps < std::abs(u1))) {
    throw InvalidInput("closed-form bias needs 0 < eps < |u1|");
  }
  return (u1 / (2.0 * eps) * std::log((u1 + eps) / (u1 - eps)) - 1.0) * xf;
}

/// Monte Carlo bias of the asymptotic expression on x(t+1) = a x(t) + u(t),
/// T = N = 1, x0 = 0, with uniform noise of half-width eps on the measured
/// final state only. The exact input is u* = xf (x1 = u1 for any a).
inline ScalarBias scalar_noise_bias(double u1, double eps, double xf, long realizations,
                                    std::uint64_t seed, double a = 1.0) {
  const LtiSystem sys(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, 1.0));
  const ExperimentSet clean =
      run_experiments(sys, Vector::Zero(1), Matrix::Constant(1, 1, u1), 1);
  const Vector target = Vector::Constant(1, xf);
  const double optimal = xf;
  Rng rng(derive_seed(seed, 0x5CA1A));
  std::uniform_real_distribution<double> noise(-eps, eps);
  double sum = 0.0, sumsq = 0.0;
  Matrix x_noisy(1, 1);
  for (long r = 0; r < realizations; ++r) {
    x_noisy(0, 0) = clean.X(0, 0) + noise(rng);
    const double dev = formulas::asymptotic_form(clean.U, x_noisy, target)(0) - optimal;
    sum += dev;
    sumsq += dev * dev;
  }
  ScalarBias out;
  out.realizations = realizations;
  out.empirical = sum / realizations;
  const double var = (sumsq - realizations * out.empirical * out.empirical) / (realizations - 1);
  out.standard_error = std::sqrt(var / realizations);
  out.closed_form = scalar_bias_closed_form(u1, eps, xf);
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and output

inline void canonicalize(std::vector<BenchRecord>& records) {
  const auto method_rank = [](const std::string& m) {
    const auto& all = all_methods();
    return std::find(all.begin(), all.end(), m) - all.begin();
  };
  std::stable_sort(records.begin(), records.end(), [&](const BenchRecord& a, const BenchRecord& b) {
    const double sa = a.extra.count("sigma") ? a.extra.at("sigma") : 0.0;
    const double sb = b.extra.count("sigma") ? b.extra.at("sigma") : 0.0;
    return std::make_tuple(a.n, sa, a.N, a.trial < 0, a.trial, method_rank(a.method)) <
           std::make_tuple(b.n, sb, b.N, b.trial < 0, b.trial, method_rank(b.method));
  });
}

inline std::string format_extra(const BenchRecord& r) {
  std::string out = r.overflow ? "overflow" : "";
  for (const auto& [k, v] : r.extra) {
    if (!out.empty()) out += ';';
    out += k + "=" + format_real(v);
  }
  return out;
}

inline constexpr const char* kCsvHeader =
    "study,trial,seed,n,m,T,N,method,input_norm,final_error,extra";

inline void write_records_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.study << ',' << r.trial << ',' << r.seed << ',' << r.n << ',' << r.m << ','
        << r.T << ',' << r.N << ',' << r.method << ','
        << (r.overflow ? std::string("nan") : format_real(r.input_norm)) << ','
        << (r.overflow ? std::string("nan") : format_real(r.final_error)) << ','
        << format_extra(r) << '\n';
  }
}

struct PointSummary {
  double key = 0.0;  // N (vs-N, demo-2d), n (vs-n) or sigma (noise-bias)
  std::string method;
  int count = 0;
  int finite = 0;
  double median_input_norm = std::numeric_limits<double>::quiet_NaN();
  double mean_input_norm = std::numeric_limits<double>::quiet_NaN();
  double median_final_error = std::numeric_limits<double>::quiet_NaN();
  double mean_final_error = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> bias;  // noise-bias only
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sweep_key(Study study, const BenchRecord& r) {
  switch (study) {
    case Study::kVsn: return static_cast<double>(r.n);
    case Study::kNoiseBias: return r.extra.count("sigma") ? r.extra.at("sigma") : 0.0;
    default: return static_cast<double>(r.N);
  }
}

/// Per (sweep point, method) medians and means over the per-trial records.
inline std::vector<PointSummary> summarize(Study study, const std::vector<BenchRecord>& records) {
  std::map<std::pair<double, std::ptrdiff_t>, PointSummary> points;
  std::map<std::pair<double, std::ptrdiff_t>, std::pair<std::vector<double>, std::vector<double>>>
      values;
  const auto& all = all_methods();
  for (const auto& r : records) {
    const auto key = std::make_pair(
        sweep_key(study, r), std::find(all.begin(), all.end(), r.method) - all.begin());
    auto& p = points[key];
    p.key = key.first;
    p.method = r.method;
    if (r.trial < 0) {
      if (r.extra.count("bias")) p.bias = r.extra.at("bias");
      continue;
    }
    ++p.count;
    if (!r.finite()) continue;
    ++p.finite;
    values[key].first.push_back(r.input_norm);
    values[key].second.push_back(r.final_error);
  }
  std::vector<PointSummary> out;
  for (auto& [key, p] : points) {
    const auto& [norms, errors] = values[key];
    p.median_input_norm = median(norms);
    p.mean_input_norm = mean(norms);
    p.median_final_error = median(errors);
    p.mean_final_error = mean(errors);
    out.push_back(p);
  }
  return out;
}

inline nlohmann::json summary_json(const StudyResult& res) {
  auto to_json_number = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : summarize(res.config.study, res.records)) {
    nlohmann::json j = {{"key", p.key},
                        {"method", p.method},
                        {"count", p.count},
                        {"finite", p.finite},
                        {"median_input_norm", to_json_number(p.median_input_norm)},
                        {"mean_input_norm", to_json_number(p.mean_input_norm)},
                        {"median_final_error", to_json_number(p.median_final_error)},
                        {"mean_final_error", to_json_number(p.mean_final_error)}};
    if (p.bias) j["bias"] = *p.bias;
    points.push_back(std::move(j));
  }
  const char* key_name = res.config.study == Study::kVsn         ? "n"
                         : res.config.study == Study::kNoiseBias ? "sigma"
                                                                 : "N";
  return {{"study", to_string(res.config.study)},
          {"seed", res.config.master_seed},
          {"config", res.config.to_json()},
          {"key", key_name},
          {"records", res.records.size()},
          {"points", std::move(points)}};
}

inline void write_trajectories_csv(std::ostream& out, const StudyResult& res) {
  out << "N,t";
  const Eigen::Index n = res.trajectories.empty() ? 0 : res.trajectories.front().states[0].size();
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << (i + 1);
  out << '\n';
  for (std::size_t k = 0; k < res.trajectories.size(); ++k) {
    const auto& traj = res.trajectories[k];
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      out << res.config.sweep[k] << ',' << t;
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_real(traj.states[t](i));
      out << '\n';
    }
  }
}

/// Writes <dir>/<study>.csv, <dir>/<study>_summary.json and, for demo-2d,
/// <dir>/<study>_trajectories.csv. Records are canonicalized first.
inline std::vector<std::filesystem::path> write_study(const std::filesystem::path& dir,
                                                      StudyResult& res) {
  std::filesystem::create_directories(dir);
  canonicalize(res.records);
  const std::string stem = to_string(res.config.study);
  std::vector<std::filesystem::path> written;
  {
    const auto path = dir / (stem + ".csv");
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    write_records_csv(out, res.records);
    written.push_back(path);
  }
  {
    const auto path = dir / (stem + "_summary.json");
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << summary_json(res).dump(2) << '\n';
    written.push_back(path);
  }
  if (!res.trajectories.empty()) {
    const auto path = dir / (stem + "_trajectories.csv");
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    write_trajectories_csv(out, res);
    written.push_back(path);
  }
  return written;
}

}  // namespace mecontrol::bench
