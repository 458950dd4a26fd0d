// mectl: command-line front end for the mecontrol library.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 estimator
// assumption violated, 4 any other failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mecontrol/benchsuite.hpp"
#include "mecontrol/datagen.hpp"
#include "mecontrol/estimators.hpp"
#include "mecontrol/io.hpp"
#include "mecontrol/sysmodel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mecontrol;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitAssumption = 3;
constexpr int kExitFailure = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cout << "seed: " << seed << '\n';
  return seed;
}

/// Exactly one of an inline comma list and a CSV file (any shape, flattened
/// column-major); neither is allowed only when `required` is false.
std::optional<Vector> vector_source(const std::string& name, const std::string& inline_value,
                                    const std::string& file, bool required) {
  if (!inline_value.empty() && !file.empty()) {
    throw UsageError("--" + name + " and --" + name + "-file are mutually exclusive");
  }
  if (!inline_value.empty()) return parse_vector(inline_value);
  if (!file.empty()) {
    const Matrix m = read_csv(file);
    return Eigen::Map<const Vector>(m.data(), m.size());
  }
  if (required) throw UsageError("one of --" + name + " or --" + name + "-file is required");
  return std::nullopt;
}

void require_file(const std::string& path, const char* what) {
  if (!path.empty() && !fs::exists(path)) {
    throw UsageError(std::string(what) + " '" + path + "' does not exist");
  }
}

json solution_json(const ControlSolution& sol) {
  json j;
  j["method"] = sol.method;
  j["T"] = sol.horizon();
  j["m"] = sol.m;
  j["input_norm"] = sol.input_norm;
  j["u"] = vector_to_json(sol.u);
  if (sol.achieved_final) j["achieved_final"] = vector_to_json(*sol.achieved_final);
  if (sol.final_error) {
    j["final_error"] =
        std::isfinite(*sol.final_error) ? json(*sol.final_error) : json("overflow");
  }
  const Diagnostics& d = sol.diagnostics;
  json diag = json::object();
  if (d.rank_U) diag["rank_U"] = *d.rank_U;
  if (d.rank_X) diag["rank_X"] = *d.rank_X;
  if (d.u_full_row_rank) diag["u_full_row_rank"] = *d.u_full_row_rank;
  if (d.x_full_row_rank) diag["x_full_row_rank"] = *d.x_full_row_rank;
  diag["tolerance"] = d.tolerance ? json(*d.tolerance) : json("default");
  if (d.data_residual) diag["data_residual"] = *d.data_residual;
  if (d.reach_residual) diag["reach_residual"] = *d.reach_residual;
  for (const auto& [k, v] : d.assumptions) diag["assumptions"][k] = v;
  j["diagnostics"] = diag;
  return j;
}

void emit_report(const std::string& prefix, const ControlSolution& sol, const json& report) {
  if (prefix.empty()) {
    std::cout << report.dump(2) << '\n';
    return;
  }
  const fs::path base(prefix);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  write_csv(fs::path(prefix + ".csv"), Matrix(sol.u));
  std::ofstream out(prefix + ".json");
  if (!out) throw InvalidInput("cannot write " + prefix + ".json");
  out << report.dump(2) << '\n';
  std::cout << "wrote " << prefix << ".csv and " << prefix << ".json\n";
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string method;
  std::string system, data;
  std::string xf, xf_file, yf, yf_file, x0_value;
  std::string target = "auto";
  std::string x0_mode = "auto";
  std::optional<Eigen::Index> T;
  std::optional<double> tol;
  bool no_enforce = false;
  std::string out;
};

int cmd_estimate(const EstimateArgs& a) {
  require_file(a.system, "system file");
  require_file(a.data, "data directory");
  const bool model_based = a.method == "gramian" || a.method == "ctrb";
  const auto data_method = bench::parse_data_method(a.method);
  if (!model_based && !data_method) throw UsageError("unknown method '" + a.method + "'");
  if (model_based && a.system.empty()) {
    throw UsageError("method '" + a.method + "' needs --system");
  }
  if (!model_based && a.data.empty()) {
    throw UsageError("method '" + a.method + "' needs --data");
  }

  const auto xf = vector_source("xf", a.xf, a.xf_file, false);
  const auto yf = vector_source("yf", a.yf, a.yf_file, false);
  if (xf && yf) throw UsageError("give either a state target (--xf) or an output target (--yf)");
  if (!xf && !yf) throw UsageError("a target is required: --xf/--xf-file or --yf/--yf-file");
  const bool output = a.target == "output" || (a.target == "auto" && yf.has_value());
  if (output != yf.has_value()) {
    throw UsageError("--target " + a.target + " does not match the target flag given");
  }
  const Vector target = output ? *yf : *xf;

  std::optional<LtiSystem> sys;
  if (!a.system.empty()) sys = read_system(a.system);
  std::optional<ExperimentSet> data;
  if (!a.data.empty()) data = load_experiment_set(a.data);

  Eigen::Index T = 0;
  if (a.T) {
    T = *a.T;
    if (data && data->T != T) throw UsageError("--T disagrees with the data horizon");
  } else if (data) {
    T = data->T;
  } else {
    throw UsageError("--T is required without --data");
  }

  Vector x0;
  if (!a.x0_value.empty()) {
    x0 = parse_vector(a.x0_value);
    if (data && x0 != data->x0) throw UsageError("--x0-value disagrees with the data x0");
  } else if (data) {
    x0 = data->x0;
  } else {
    x0 = Vector::Zero(sys->n());
  }
  const ControlTask task =
      output ? ControlTask::to_output(x0, target, T) : ControlTask::to_state(x0, target, T);

  ControlSolution sol;
  if (model_based) {
    if (output && a.method != "ctrb") {
      throw UsageError("output targets use --method ctrb or a data-driven method");
    }
    if (output) {
      sol = me_output_ctrb(*sys, task, a.tol);
    } else {
      sol = a.method == "gramian" ? me_gramian(*sys, task, a.tol) : me_ctrb(*sys, task, a.tol);
    }
  } else {
    DataOptions opts;
    opts.tol = a.tol;
    opts.enforce_assumptions = !a.no_enforce;
    if (a.x0_mode == "zero") {
      if (!data->x0_known_zero) throw UsageError("--x0 zero, but the data has x0 != 0");
      data->x0_known_zero = true;
    } else if (a.x0_mode == "nonzero") {
      data->x0_known_zero = false;
    }
    if (output) {
      sol = dd_output(*data, target, *data_method, opts);
    } else if (data->x0_known_zero) {
      sol = mecontrol::detail::plain(*data_method, *data, target, a.tol);
    } else {
      sol = dd_x0(*data_method, *data, target, opts);
    }
    if (sys) evaluate(*sys, task, sol);
  }

  json report = solution_json(sol);
  report["seed"] = data && data->seed ? json(*data->seed) : json(nullptr);
  report["config"] = {{"method", a.method},
                      {"system", a.system},
                      {"data", a.data},
                      {"target_kind", output ? "output" : "state"},
                      {"target", vector_to_json(target)},
                      {"x0", vector_to_json(x0)},
                      {"x0_mode", a.x0_mode},
                      {"T", T},
                      {"tol", a.tol ? json(*a.tol) : json("default")},
                      {"enforce_assumptions", !a.no_enforce}};
  emit_report(a.out, sol, report);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string system;
  std::vector<Eigen::Index> random_system;
  std::optional<Eigen::Index> T, N;
  std::string inputs = "gaussian";
  std::string inputs_file;
  std::string x0_value;
  std::optional<double> noise_sigma, noise_eps;
  std::string noise_on = "both";
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
};

int cmd_experiment(const ExperimentArgs& a) {
  if (a.system.empty() == a.random_system.empty()) {
    throw UsageError("give exactly one of --system or --random-system n m");
  }
  require_file(a.system, "system file");
  require_file(a.inputs_file, "inputs file");
  if (a.noise_sigma && a.noise_eps) {
    throw UsageError("--noise-sigma and --noise-eps are mutually exclusive");
  }
  const fs::path out(a.out);
  if (fs::exists(out) && !(fs::is_directory(out) && fs::is_empty(out)) && !a.force) {
    throw UsageError("output '" + a.out + "' exists and is not empty (use --force)");
  }
  const std::uint64_t seed = resolve_seed(a.seed);

  const LtiSystem sys = a.system.empty()
                            ? random_system(a.random_system[0], a.random_system[1],
                                            derive_seed(seed, 1))
                            : read_system(a.system);
  const Eigen::Index T = *a.T;
  const Eigen::Index mT = sys.m() * T;
  InputDesign design;
  if (!a.inputs_file.empty()) {
    design = InputDesign::user_supplied(read_csv(a.inputs_file));
  } else if (a.inputs == "identity") {
    design = InputDesign::identity_basis(a.N.value_or(mT));
  } else {
    design = InputDesign::iid_gaussian(a.N.value_or(mT), derive_seed(seed, 2));
  }
  if (!a.inputs_file.empty() && a.N && *a.N != design.user.cols()) {
    throw UsageError("--N disagrees with the columns of --inputs-file");
  }
  const Matrix U = design_inputs(design, sys.m(), T).U;
  const Vector x0 = a.x0_value.empty() ? Vector::Zero(sys.n()) : parse_vector(a.x0_value);
  if (x0.size() != sys.n()) throw UsageError("--x0-value must have length n");

  ExperimentSet data = run_experiments(sys, x0, U, T);
  data.seed = seed;
  NoiseModel::Target on = NoiseModel::Target::kBoth;
  if (a.noise_on == "inputs") on = NoiseModel::Target::kInputs;
  if (a.noise_on == "states") on = NoiseModel::Target::kStates;
  if (a.noise_sigma) data = add_noise(data, NoiseModel::gaussian(*a.noise_sigma, on, derive_seed(seed, 3)));
  if (a.noise_eps) data = add_noise(data, NoiseModel::uniform(*a.noise_eps, on, derive_seed(seed, 3)));

  if (fs::exists(out) && a.force) fs::remove_all(out);
  json config = {{"system", a.system.empty() ? json("random") : json(a.system)},
                 {"n", sys.n()},
                 {"m", sys.m()},
                 {"T", T},
                 {"N", U.cols()},
                 {"inputs", a.inputs_file.empty() ? a.inputs : "file:" + a.inputs_file},
                 {"x0", vector_to_json(x0)},
                 {"seed", seed}};
  save_experiment_set(out, data, {{"config", config}});
  write_system(out / "system.json", sys);
  std::cout << "wrote " << U.cols() << " experiments (n=" << sys.n() << ", m=" << sys.m()
            << ", T=" << T << ") to " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string study;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::vector<Eigen::Index> sweep;
  std::vector<double> sigmas;
  std::vector<std::string> methods;
  std::string out = "bench_out";
};

int cmd_bench(const BenchArgs& a) {
  const auto study = bench::parse_study(a.study);
  if (!study) {
    throw UsageError("unknown study '" + a.study +
                     "'; valid studies: vs-N, vs-n, noise-bias, demo-2d");
  }
  bench::BenchConfig cfg = bench::BenchConfig::defaults(*study);
  if (a.trials) cfg.trials = *a.trials;
  if (!a.sweep.empty()) cfg.sweep = a.sweep;
  if (!a.sigmas.empty()) cfg.sigmas = a.sigmas;
  if (!a.methods.empty()) cfg.methods = a.methods;
  cfg.master_seed = resolve_seed(a.seed);
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }

  bench::StudyResult res = bench::run_study(cfg);
  const auto files = bench::write_study(a.out, res);

  const char* key = *study == bench::Study::kVsn         ? "n"
                    : *study == bench::Study::kNoiseBias ? "sigma"
                                                         : "N";
  std::cout << std::left << std::setw(8) << key << std::setw(15) << "method" << std::right
            << std::setw(8) << "finite" << std::setw(14) << "med |u|" << std::setw(14)
            << "med error" << std::setw(14) << (*study == bench::Study::kNoiseBias ? "bias" : "")
            << '\n';
  for (const auto& p : bench::summarize(cfg.study, res.records)) {
    std::ostringstream k;
    k << p.key;
    std::cout << std::left << std::setw(8) << k.str() << std::setw(15) << p.method << std::right
              << std::setw(8) << (std::to_string(p.finite) + "/" + std::to_string(p.count))
              << std::setw(14) << std::setprecision(4) << p.median_input_norm << std::setw(14)
              << p.median_final_error;
    if (p.bias) std::cout << std::setw(14) << *p.bias;
    std::cout << '\n';
  }
  for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_ctrb(const std::string& system, Eigen::Index T, const std::string& what,
             const std::string& out) {
  require_file(system, "system file");
  const LtiSystem sys = read_system(system);
  Matrix m;
  if (what == "ctrb") {
    m = ctrb_matrix(sys, T);
  } else if (what == "gramian") {
    m = gramian(sys, T);
  } else {
    m = output_ctrb_matrix(sys, T);
  }
  if (out.empty()) {
    write_csv(std::cout, m);
  } else {
    write_csv(fs::path(out), m);
  }
  return kExitOk;
}

int cmd_simulate(const std::string& system, const std::string& u_inline,
                 const std::string& u_file, const std::string& x0_value, const std::string& out) {
  require_file(system, "system file");
  const LtiSystem sys = read_system(system);
  const Vector u = *vector_source("u", u_inline, u_file, true);
  if (u.size() % sys.m() != 0) throw UsageError("input length must be a multiple of m");
  const Vector x0 = x0_value.empty() ? Vector::Zero(sys.n()) : parse_vector(x0_value);
  const Trajectory traj = simulate(sys, x0, u);
  Matrix states(static_cast<Eigen::Index>(traj.states.size()), sys.n());
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    states.row(static_cast<Eigen::Index>(t)) = traj.states[t].transpose();
  }
  if (out.empty()) {
    write_csv(std::cout, states);
  } else {
    write_csv(fs::path(out), states);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-energy control from model or experiment data"};
  app.require_subcommand(1);
  int status = kExitOk;

  // estimate
  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "compute a control input");
  e->add_option("--method", est.method, "gramian|ctrb|dd-kernel|dd-pinv|dd-asymptotic")
      ->required()
      ->check(CLI::IsMember({"gramian", "ctrb", "dd-kernel", "dd-pinv", "dd-asymptotic"}));
  e->add_option("--system", est.system, "system JSON (A, B, optional C)");
  e->add_option("--data", est.data, "experiment directory");
  e->add_option("--xf", est.xf, "target state, comma separated");
  e->add_option("--xf-file", est.xf_file, "target state CSV");
  e->add_option("--yf", est.yf, "target output, comma separated");
  e->add_option("--yf-file", est.yf_file, "target output CSV");
  e->add_option("--target", est.target, "state|output|auto")
      ->check(CLI::IsMember({"state", "output", "auto"}));
  e->add_option("--x0", est.x0_mode, "data-driven form: zero|nonzero|auto")
      ->check(CLI::IsMember({"zero", "nonzero", "auto"}));
  e->add_option("--x0-value", est.x0_value, "initial state, comma separated");
  e->add_option("--T", est.T, "horizon")->check(CLI::PositiveNumber);
  e->add_option("--tol", est.tol, "rank tolerance")->check(CLI::PositiveNumber);
  e->add_flag("--no-enforce", est.no_enforce, "skip the augmented-form assumption check");
  e->add_option("--out", est.out, "write PREFIX.csv and PREFIX.json");
  e->callback([&] { status = cmd_estimate(est); });

  // experiment
  ExperimentArgs exp;
  auto* x = app.add_subcommand("experiment", "run and record control experiments");
  x->add_option("--system", exp.system, "system JSON");
  x->add_option("--random-system", exp.random_system, "random plant with n states, m inputs")
      ->expected(2);
  x->add_option("--T", exp.T, "horizon")->required()->check(CLI::PositiveNumber);
  x->add_option("--N", exp.N, "number of experiments (default mT)")->check(CLI::PositiveNumber);
  x->add_option("--inputs", exp.inputs, "gaussian|identity")
      ->check(CLI::IsMember({"gaussian", "identity"}));
  x->add_option("--inputs-file", exp.inputs_file, "mT x N input CSV")->excludes("--inputs");
  x->add_option("--x0-value", exp.x0_value, "initial state, comma separated");
  x->add_option("--noise-sigma", exp.noise_sigma, "Gaussian noise std-dev")
      ->check(CLI::NonNegativeNumber);
  x->add_option("--noise-eps", exp.noise_eps, "uniform noise half-width")
      ->check(CLI::NonNegativeNumber);
  x->add_option("--noise-on", exp.noise_on, "inputs|states|both")
      ->check(CLI::IsMember({"inputs", "states", "both"}));
  x->add_option("--seed", exp.seed, "master seed (default: drawn and printed)");
  x->add_option("--out", exp.out, "output directory")->required();
  x->add_flag("--force", exp.force, "replace an existing output directory");
  x->callback([&] { status = cmd_experiment(exp); });

  // bench
  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "run a numerical study");
  b->add_option("study", bn.study, "vs-N|vs-n|noise-bias|demo-2d")->required();
  b->add_option("--trials", bn.trials, "trials per sweep point");
  b->add_option("--seed", bn.seed, "master seed (default: drawn and printed)");
  b->add_option("--sweep", bn.sweep, "N values (vs-N) or n values (vs-n)")->delimiter(',');
  b->add_option("--sigmas", bn.sigmas, "noise levels (noise-bias)")->delimiter(',');
  b->add_option("--methods", bn.methods, "method tags")->delimiter(',');
  b->add_option("--out", bn.out, "output directory");
  b->callback([&] { status = cmd_bench(bn); });

  // ctrb
  std::string c_system, c_what = "ctrb", c_out;
  Eigen::Index c_T = 0;
  auto* c = app.add_subcommand("ctrb", "dump C_T, W_T or the output controllability matrix");
  c->add_option("--system", c_system, "system JSON")->required();
  c->add_option("--T", c_T, "horizon")->required()->check(CLI::PositiveNumber);
  c->add_option("--what", c_what, "ctrb|gramian|output")
      ->check(CLI::IsMember({"ctrb", "gramian", "output"}));
  c->add_option("--out", c_out, "CSV path (default stdout)");
  c->callback([&] { status = cmd_ctrb(c_system, c_T, c_what, c_out); });

  // simulate
  std::string s_system, s_u, s_u_file, s_x0, s_out;
  auto* s = app.add_subcommand("simulate", "simulate a stacked input, print x(0..T)");
  s->add_option("--system", s_system, "system JSON")->required();
  s->add_option("--u", s_u, "stacked input [u(T-1); ...; u(0)], comma separated");
  s->add_option("--u-file", s_u_file, "stacked input CSV");
  s->add_option("--x0-value", s_x0, "initial state, comma separated");
  s->add_option("--out", s_out, "CSV path (default stdout)");
  s->callback([&] { status = cmd_simulate(s_system, s_u, s_u_file, s_x0, s_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const AssumptionViolated& err) {
    std::cerr << "assumption violated: " << err.what() << '\n';
    return kExitAssumption;
  } catch (const ConfigurationError& err) {
    std::cerr << "configuration error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const DimensionMismatch& err) {
    std::cerr << "dimension mismatch: " << err.what() << '\n';
    return kExitUsage;
  } catch (const InvalidHorizon& err) {
    std::cerr << "invalid horizon: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitFailure;
  }
  return status;
}
