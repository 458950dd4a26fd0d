#pragma once

// Random plants, experimental input design, batches of control experiments
// and measurement noise. Every generator is a pure function of its
// parameters and seed.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "mecontrol/io.hpp"
#include "mecontrol/matops.hpp"
#include "mecontrol/sysmodel.hpp"

namespace mecontrol {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based child seed: mixes the master seed with each counter in turn.
/// Streams derived from distinct counter tuples are independent of the order
/// in which they are consumed.
template <typename... Counters>
std::uint64_t derive_seed(std::uint64_t master, Counters... counters) {
  std::uint64_t s = mix64(master);
  ((s = mix64(s ^ mix64(static_cast<std::uint64_t>(counters) + 0x632be59bd9b4e019ULL))), ...);
  return s;
}

using Rng = std::mt19937_64;

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

inline Vector standard_normal(Eigen::Index size, Rng& rng) {
  return standard_normal(size, 1, rng);
}

/// A with i.i.d. N(0,1)/sqrt(n) entries (possibly unstable), B with i.i.d.
/// N(0, b_scale^2) entries.
inline LtiSystem random_system(Eigen::Index n, Eigen::Index m, std::uint64_t seed,
                               double b_scale = 1.0) {
  if (n < 1 || m < 1) throw InvalidInput("random_system needs n, m >= 1");
  Rng rng(derive_seed(seed, 0x5157));
  Matrix a = standard_normal(n, n, rng) / std::sqrt(static_cast<double>(n));
  Matrix b = b_scale * standard_normal(n, m, rng);
  return LtiSystem(std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// Input design

struct InputDesign {
  enum class Kind { kIidGaussian, kIdentityBasis, kUserSupplied };

  Kind kind = Kind::kIidGaussian;
  Eigen::Index N = 1;
  std::uint64_t seed = 0;
  Matrix user;  // only for kUserSupplied

  static InputDesign iid_gaussian(Eigen::Index n_exp, std::uint64_t seed) {
    return {Kind::kIidGaussian, n_exp, seed, {}};
  }
  static InputDesign identity_basis(Eigen::Index n_exp) {
    return {Kind::kIdentityBasis, n_exp, 0, {}};
  }
  static InputDesign user_supplied(Matrix u) {
    const auto cols = u.cols();
    return {Kind::kUserSupplied, cols, 0, std::move(u)};
  }
};

struct DesignedInputs {
  Matrix U;  // mT x N
  RankInfo rank;

  bool full_row_rank() const { return rank.full_row_rank(); }
};

inline DesignedInputs design_inputs(const InputDesign& design, Eigen::Index m,
                                    Eigen::Index horizon) {
  require_horizon(horizon);
  if (m < 1) throw InvalidInput("m must be at least 1");
  if (design.N < 1) throw InvalidInput("input design needs N >= 1");
  const Eigen::Index mt = m * horizon;
  DesignedInputs out;
  switch (design.kind) {
    case InputDesign::Kind::kIidGaussian: {
      Rng rng(derive_seed(design.seed, 0x1A9));
      out.U = standard_normal(mt, design.N, rng);
      break;
    }
    case InputDesign::Kind::kIdentityBasis:
      if (design.N != mt) {
        throw DimensionMismatch("identity input design needs N = mT = " +
                                std::to_string(mt));
      }
      out.U = Matrix::Identity(mt, mt);
      break;
    case InputDesign::Kind::kUserSupplied:
      if (design.user.rows() != mt) {
        throw DimensionMismatch("user input matrix has " +
                                std::to_string(design.user.rows()) +
                                " rows, expected mT = " + std::to_string(mt));
      }
      require_finite(design.user, "input matrix");
      out.U = design.user;
      break;
  }
  out.rank = rank_info(out.U);
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

struct NoiseModel {
  enum class Kind { kNone, kGaussian, kUniform };
  enum class Target { kInputs, kStates, kBoth };

  Kind kind = Kind::kNone;
  double level = 0.0;  // sigma for gaussian, epsilon for uniform
  Target applies_to = Target::kBoth;
  std::uint64_t seed = 0;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma, Target target, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw InvalidInput("noise sigma must be finite and >= 0");
    }
    return {Kind::kGaussian, sigma, target, seed};
  }
  static NoiseModel uniform(double eps, Target target, std::uint64_t seed) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
      throw InvalidInput("noise epsilon must be finite and >= 0");
    }
    return {Kind::kUniform, eps, target, seed};
  }

  bool is_silent() const { return kind == Kind::kNone || level == 0.0; }
  bool hits_inputs() const { return applies_to != Target::kStates; }
  bool hits_states() const { return applies_to != Target::kInputs; }

  nlohmann::json to_json() const {
    static const char* kinds[] = {"none", "gaussian", "uniform"};
    static const char* targets[] = {"inputs", "states", "both"};
    return {{"kind", kinds[static_cast<int>(kind)]},
            {"level", level},
            {"applies_to", targets[static_cast<int>(applies_to)]},
            {"seed", seed}};
  }
};

struct ExperimentSet {
  Eigen::Index T = 0;
  Matrix U;                 // mT x N, column i is the stacked input u_i
  Matrix X;                 // n x N, column i is the final state x_i
  std::optional<Matrix> Y;  // p x N
  Vector x0;
  bool x0_known_zero = true;
  std::optional<std::uint64_t> seed;
  NoiseModel noise;

  Eigen::Index N() const { return U.cols(); }
  Eigen::Index n() const { return X.rows(); }
  Eigen::Index m() const { return T > 0 ? U.rows() / T : 0; }

  void validate() const {
    require_horizon(T);
    if (U.cols() != X.cols()) throw DimensionMismatch("U and X differ in column count");
    if (U.rows() % T != 0) throw DimensionMismatch("rows(U) is not a multiple of T");
    if (x0.size() != X.rows()) throw DimensionMismatch("x0 length differs from rows(X)");
    if (Y && Y->cols() != U.cols()) throw DimensionMismatch("Y and U differ in column count");
    require_finite(U, "U");
    require_finite(X, "X");
    if (Y) require_finite(*Y, "Y");
  }
};

inline ExperimentSet run_experiments(const LtiSystem& sys, const Vector& x0,
                                     const Matrix& U, Eigen::Index horizon) {
  require_horizon(horizon);
  if (U.rows() != sys.m() * horizon) {
    throw DimensionMismatch("rows(U) must equal m*T = " +
                            std::to_string(sys.m() * horizon));
  }
  if (x0.size() != sys.n()) throw DimensionMismatch("x0 has wrong length");
  ExperimentSet data;
  data.T = horizon;
  data.U = U;
  data.X.resize(sys.n(), U.cols());
  for (Eigen::Index i = 0; i < U.cols(); ++i) {
    data.X.col(i) = simulate(sys, x0, Vector(U.col(i))).final_state();
  }
  if (sys.has_output()) data.Y = *sys.C() * data.X;
  data.x0 = x0;
  data.x0_known_zero = (x0.array() == 0.0).all();
  return data;
}

namespace detail {

inline Matrix draw_noise(const NoiseModel& noise, Eigen::Index rows,
                         Eigen::Index cols, std::uint64_t stream) {
  Rng rng(derive_seed(noise.seed, stream));
  Matrix w(rows, cols);
  if (noise.kind == NoiseModel::Kind::kGaussian) {
    std::normal_distribution<double> dist(0.0, noise.level);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = dist(rng);
  } else {
    std::uniform_real_distribution<double> dist(-noise.level, noise.level);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = dist(rng);
  }
  return w;
}

}  // namespace detail

/// Perturbs the measured quantities: U + W on inputs, X + V (and Y + V_y) on
/// states. Silent models return the data unchanged.
inline ExperimentSet add_noise(const ExperimentSet& data, const NoiseModel& noise) {
  ExperimentSet out = data;
  out.noise = noise;
  if (noise.is_silent()) return out;
  if (noise.hits_inputs()) {
    out.U += detail::draw_noise(noise, data.U.rows(), data.U.cols(), 1);
  }
  if (noise.hits_states()) {
    out.X += detail::draw_noise(noise, data.X.rows(), data.X.cols(), 2);
    if (out.Y) *out.Y += detail::draw_noise(noise, out.Y->rows(), out.Y->cols(), 3);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: U.csv, X.csv, optional Y.csv, meta.json

inline void save_experiment_set(const std::filesystem::path& dir,
                                const ExperimentSet& data,
                                const nlohmann::json& extra_meta = {}) {
  std::filesystem::create_directories(dir);
  write_csv(dir / "U.csv", data.U);
  write_csv(dir / "X.csv", data.X);
  if (data.Y) write_csv(dir / "Y.csv", *data.Y);
  nlohmann::json meta = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
  meta["T"] = data.T;
  meta["N"] = data.N();
  meta["n"] = data.n();
  meta["m"] = data.m();
  meta["x0"] = vector_to_json(data.x0);
  meta["x0_known_zero"] = data.x0_known_zero;
  meta["seed"] = data.seed ? nlohmann::json(*data.seed) : nlohmann::json(nullptr);
  meta["noise"] = data.noise.to_json();
  std::ofstream out(dir / "meta.json");
  if (!out) throw InvalidInput("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

inline ExperimentSet load_experiment_set(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw InvalidInput("cannot open " + meta_path.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(meta_path.string() + ": " + e.what());
  }
  if (!meta.contains("T") || !meta.contains("x0")) {
    throw InvalidInput(meta_path.string() + ": needs \"T\" and \"x0\"");
  }
  ExperimentSet data;
  data.T = meta["T"].get<Eigen::Index>();
  data.U = read_csv(dir / "U.csv");
  data.X = read_csv(dir / "X.csv");
  if (std::filesystem::exists(dir / "Y.csv")) data.Y = read_csv(dir / "Y.csv");
  data.x0 = vector_from_json(meta["x0"], "x0");
  data.x0_known_zero = meta.value("x0_known_zero", (data.x0.array() == 0.0).all());
  if (meta.contains("seed") && meta["seed"].is_number_unsigned()) {
    data.seed = meta["seed"].get<std::uint64_t>();
  }
  data.validate();
  return data;
}

}  // namespace mecontrol
