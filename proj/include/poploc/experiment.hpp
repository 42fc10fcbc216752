#ifndef POPLOC_EXPERIMENT_HPP
#define POPLOC_EXPERIMENT_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poploc/engine.hpp"
#include "poploc/epidemics.hpp"
#include "poploc/leader_loc.hpp"
#include "poploc/rng.hpp"
#include "poploc/scaling.hpp"
#include "poploc/selfstab.hpp"
#include "poploc/vector_loc.hpp"

namespace poploc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ProtocolKind { kKContact, kLeaderLoc, kImproved1d, kSelfStab, kVector };

inline ProtocolKind parse_protocol(const std::string& name) {
  if (name == "kcontact") return ProtocolKind::kKContact;
  if (name == "leaderloc") return ProtocolKind::kLeaderLoc;
  if (name == "improved1d") return ProtocolKind::kImproved1d;
  if (name == "selfstab") return ProtocolKind::kSelfStab;
  if (name == "vector") return ProtocolKind::kVector;
  throw ConfigError("unknown protocol: " + name);
}

inline const char* protocol_name(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kKContact: return "kcontact";
    case ProtocolKind::kLeaderLoc: return "leaderloc";
    case ProtocolKind::kImproved1d: return "improved1d";
    case ProtocolKind::kSelfStab: return "selfstab";
    case ProtocolKind::kVector: return "vector";
  }
  return "?";
}

enum class SilenceCheck { kOff, kConverged, kAll };

struct ExperimentConfig {
  ProtocolKind protocol = ProtocolKind::kKContact;
  std::vector<std::size_t> n_grid;
  std::size_t k = 1;          // spatial dimension
  std::size_t k_contact = 1;  // epidemic threshold (kcontact only)
  std::size_t trials = 1;
  std::uint64_t base_seed = 1;
  double tol = 1e-9;          // geometric tolerance inside the protocols
  double oracle_tol = 1e-6;   // convergence oracle tolerance (labels vs truth)
  double budget_multiplier = 64.0;
  std::size_t buffer_d = 3;   // selfstab buffer constant D
  double deadline_c = 16.0;   // selfstab deadline constant C_d
  std::string recipe;         // selfstab/vector initial-state recipe
  std::string positions_source = "uniform";  // "uniform" or a file path
  std::string output_path;    // CSV target; empty = caller's choice
  SilenceCheck silence = SilenceCheck::kOff;
};

struct ResultRow {
  std::string protocol;
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t trial = 0;
  std::uint64_t interactions = 0;
  double parallel_time = 0.0;
  bool converged = false;
  bool silence_verified = false;
  std::map<std::string, std::string> extras;
};

inline bool any_aborted(const std::vector<ResultRow>& rows) {
  for (const ResultRow& r : rows) {
    if (r.extras.count("error")) return true;
  }
  return false;
}

// Stop budget: multiplier times the protocol's theoretical parallel-time
// bound (constant 1), in interactions.
inline double theoretical_parallel_bound(ProtocolKind kind, std::size_t n, std::size_t k,
                                         std::size_t k_contact) {
  const double nd = static_cast<double>(n);
  const double ln_n = std::log(nd);
  switch (kind) {
    case ProtocolKind::kKContact: {
      const double kc = static_cast<double>(k_contact);
      return std::pow(nd, 1.0 - 1.0 / kc) * std::pow(ln_n, 1.0 / kc);
    }
    case ProtocolKind::kLeaderLoc: {
      const double kd = static_cast<double>(k);
      return std::pow(nd, kd / (kd + 1.0)) * std::pow(ln_n, 1.0 / (kd + 1.0));
    }
    case ProtocolKind::kImproved1d:
      return std::cbrt(nd * ln_n);
    case ProtocolKind::kSelfStab: {
      const double kd = static_cast<double>(k);
      return std::pow(nd, kd / (kd + 1.0)) * std::pow(ln_n, 1.0 / (kd + 1.0)) * ln_n;
    }
    case ProtocolKind::kVector:
      return ln_n;
  }
  return 0.0;
}

inline std::uint64_t interaction_budget(const ExperimentConfig& cfg, std::size_t n) {
  const double bound =
      theoretical_parallel_bound(cfg.protocol, n, cfg.k, cfg.k_contact);
  const double b = std::ceil(cfg.budget_multiplier * bound * static_cast<double>(n));
  return b < 1.0 ? 1 : static_cast<std::uint64_t>(b);
}

// Polylog correction exponent q used when fitting this protocol's medians
// as a power law in n.
inline double polylog_exponent(ProtocolKind kind, std::size_t k, std::size_t k_contact) {
  switch (kind) {
    case ProtocolKind::kKContact: return 1.0 / static_cast<double>(k_contact);
    case ProtocolKind::kLeaderLoc: return 1.0 / static_cast<double>(k + 1);
    case ProtocolKind::kImproved1d: return 1.0 / 3.0;
    case ProtocolKind::kSelfStab: return 1.0 / static_cast<double>(k + 1);
    case ProtocolKind::kVector: return 0.0;
  }
  return 0.0;
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.n_grid.empty()) throw ConfigError("at least one population size is required");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.k < 1 || cfg.k > kMaxDim) {
    throw ConfigError("dimension k must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  if (cfg.protocol == ProtocolKind::kImproved1d && cfg.k != 1) {
    throw ConfigError("improved1d runs in one dimension only");
  }
  if (cfg.protocol == ProtocolKind::kKContact &&
      (cfg.k_contact < 1 || cfg.k_contact > kMaxContactThreshold)) {
    throw ConfigError("k-contact threshold must be in [1, " +
                      std::to_string(kMaxContactThreshold) + "]");
  }
  if (cfg.tol <= 0.0 || cfg.oracle_tol <= 0.0) throw ConfigError("tolerances must be positive");
  if (cfg.budget_multiplier <= 0.0) throw ConfigError("budget multiplier must be positive");
  if (cfg.buffer_d < 1) throw ConfigError("buffer constant D must be >= 1");
  if (cfg.deadline_c <= 0.0) throw ConfigError("deadline constant must be positive");
  for (std::size_t n : cfg.n_grid) {
    const std::size_t floor = std::max<std::size_t>(2, cfg.k + 2);
    if (n < floor) {
      throw ConfigError("population size " + std::to_string(n) + " below minimum " +
                        std::to_string(floor));
    }
    if (cfg.protocol == ProtocolKind::kKContact && n < cfg.k_contact) {
      throw ConfigError("population smaller than the k-contact threshold");
    }
  }
  if (!cfg.recipe.empty()) {
    if (cfg.protocol == ProtocolKind::kSelfStab) {
      parse_selfstab_recipe(cfg.recipe);
    } else if (cfg.protocol == ProtocolKind::kVector) {
      if (cfg.recipe != "uniform" && cfg.recipe != "all-equal" && cfg.recipe != "single-outlier") {
        throw ConfigError("unknown vector recipe: " + cfg.recipe);
      }
    } else {
      throw ConfigError("recipe is only meaningful for selfstab and vector protocols");
    }
  }
}

// Positions drawn i.i.d. uniform over [0,1]^k on a dyadic grid (2^-36
// steps). The grid keeps vector-query arithmetic exact in double
// precision; duplicate draws are rejected and redrawn so positions are
// pairwise distinct. General position is enforced lazily: the geometry
// layer rejects anchor sets past its condition threshold.
inline std::vector<Vec> draw_uniform_positions(std::size_t n, std::size_t k, SplitMix64& rng) {
  const double scale = static_cast<double>(std::uint64_t{1} << kCoordinateGridBits);
  std::vector<Vec> pts(n, Vec(k));
  auto draw_point = [&](Vec& p) {
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = static_cast<double>(rng.bounded(std::uint64_t{1} << kCoordinateGridBits)) / scale;
    }
  };
  for (Vec& p : pts) draw_point(p);

  std::vector<std::size_t> idx(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      for (std::size_t c = 0; c < k; ++c) {
        if (pts[a][c] != pts[b][c]) return pts[a][c] < pts[b][c];
      }
      return false;
    });
    bool clean = true;
    for (std::size_t i = 1; i < n; ++i) {
      if (pts[idx[i - 1]] == pts[idx[i]]) {
        draw_point(pts[idx[i]]);
        clean = false;
      }
    }
    if (clean) return pts;
  }
}

inline std::vector<Vec> parse_position_file(const std::string& path, std::size_t k) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open positions file: " + path);
  std::vector<Vec> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Vec p(k);
    for (std::size_t j = 0; j < k; ++j) {
      if (!(ls >> p[j])) {
        throw ConfigError("positions file " + path + ": line " + std::to_string(lineno) +
                          ": expected " + std::to_string(k) + " coordinates");
      }
    }
    double extra;
    if (ls >> extra) {
      throw ConfigError("positions file " + path + ": line " + std::to_string(lineno) +
                        ": more than " + std::to_string(k) + " coordinates");
    }
    pts.push_back(p);
  }
  return pts;
}

// Builds the hidden ground truth. Agent 0 is the leader whenever the
// protocol needs one (matching the position-file convention).
inline GroundTruth generate_positions(std::size_t n, std::size_t k, const std::string& source,
                                      SplitMix64& rng, bool with_leader) {
  std::optional<std::size_t> leader;
  if (with_leader) leader = 0;
  if (source == "uniform") {
    try {
      return GroundTruth(k, draw_uniform_positions(n, k, rng), leader);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  std::vector<Vec> pts = parse_position_file(source, k);
  if (pts.size() != n) {
    throw ConfigError("positions file " + source + " holds " + std::to_string(pts.size()) +
                      " agents, expected " + std::to_string(n));
  }
  try {
    return GroundTruth(k, std::move(pts), leader);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

template <Protocol P, ConvergenceMonitor M>
ResultRow run_one_trial(const ExperimentConfig& cfg, const P& proto, const GroundTruth& gt,
                        Configuration<P>& states, M& monitor, SplitMix64& sched_rng,
                        std::uint64_t budget) {
  ResultRow row;
  row.protocol = protocol_name(cfg.protocol);
  row.n = gt.size();
  row.k = cfg.k;
  try {
    const TrialResult tr = run_trial(proto, gt, states, sched_rng, monitor, budget);
    row.interactions = tr.interactions;
    row.parallel_time = tr.parallel_time;
    row.converged = tr.converged;
    if (cfg.silence == SilenceCheck::kAll ||
        (cfg.silence == SilenceCheck::kConverged && tr.converged)) {
      row.silence_verified = verify_silence(proto, gt, states);
    }
  } catch (const TrialAbortError& e) {
    row.extras["error"] = e.what();
  }
  return row;
}

}  // namespace detail

// Runs the configured trial batch. Each (n, trial) pair owns a derived
// random stream, so rows depend only on the configuration, not on
// execution order.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<ResultRow> rows;
  rows.reserve(cfg.n_grid.size() * cfg.trials);

  const bool with_leader = cfg.protocol == ProtocolKind::kLeaderLoc ||
                           cfg.protocol == ProtocolKind::kImproved1d;

  for (const std::size_t n : cfg.n_grid) {
    const std::uint64_t n_seed = SplitMix64::stream(cfg.base_seed, n).next();
    const std::uint64_t budget = interaction_budget(cfg, n);
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t trial_seed = SplitMix64::stream(n_seed, trial).next();
      SplitMix64 pos_rng = SplitMix64::stream(trial_seed, 0);
      SplitMix64 init_rng = SplitMix64::stream(trial_seed, 1);
      SplitMix64 sched_rng = SplitMix64::stream(trial_seed, 2);

      const GroundTruth gt =
          generate_positions(n, cfg.k, cfg.positions_source, pos_rng, with_leader);

      ResultRow row;
      switch (cfg.protocol) {
        case ProtocolKind::kKContact: {
          const KContactProtocol proto(cfg.k_contact);
          auto states = make_kcontact_config(n, cfg.k_contact, init_rng);
          EpidemicCompleteMonitor monitor(states);
          row = detail::run_one_trial(cfg, proto, gt, states, monitor, sched_rng, budget);
          break;
        }
        case ProtocolKind::kLeaderLoc: {
          const PositioningProtocol proto(cfg.k, cfg.tol);
          auto states = make_positioning_config(n, *gt.leader_index());
          LocalizedMonitor monitor(states, gt, cfg.oracle_tol);
          row = detail::run_one_trial(cfg, proto, gt, states, monitor, sched_rng, budget);
          break;
        }
        case ProtocolKind::kImproved1d: {
          const ImprovedLineProtocol proto(cfg.tol);
          auto states = make_positioning_config(n, *gt.leader_index());
          LocalizedMonitor monitor(states, gt, cfg.oracle_tol);
          row = detail::run_one_trial(cfg, proto, gt, states, monitor, sched_rng, budget);
          break;
        }
        case ProtocolKind::kSelfStab: {
          const SelfStabParams params =
              SelfStabParams::make(n, cfg.k, cfg.buffer_d, cfg.deadline_c, cfg.tol);
          const SelfStabProtocol proto(params);
          const SelfStabRecipe recipe =
              parse_selfstab_recipe(cfg.recipe.empty() ? "uniform-random" : cfg.recipe);
          auto states = make_selfstab_config(recipe, gt, params, init_rng);
          SelfStabConvergedMonitor monitor(states, gt, cfg.oracle_tol);
          row = detail::run_one_trial(cfg, proto, gt, states, monitor, sched_rng, budget);
          row.extras["resets"] = std::to_string(monitor.resets());
          row.extras["leaders"] = std::to_string(count_leaders(states));
          break;
        }
        case ProtocolKind::kVector: {
          const VectorProtocol proto(cfg.k);
          VectorInitRecipe recipe = VectorInitRecipe::kUniform;
          if (cfg.recipe == "all-equal") recipe = VectorInitRecipe::kAllEqual;
          if (cfg.recipe == "single-outlier") recipe = VectorInitRecipe::kSingleOutlier;
          auto states = make_vector_config(n, cfg.k, recipe, init_rng);
          VectorConvergedMonitor monitor(states, gt, cfg.oracle_tol);
          row = detail::run_one_trial(cfg, proto, gt, states, monitor, sched_rng, budget);
          break;
        }
      }
      row.seed = trial_seed;
      row.trial = trial;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline void write_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "protocol,n,k,seed,trial,interactions,parallel_time,converged,silence_verified,extras\n";
  for (const ResultRow& r : rows) {
    out << r.protocol << ',' << r.n << ',' << r.k << ',' << r.seed << ',' << r.trial << ','
        << r.interactions << ',' << detail::format_double(r.parallel_time) << ','
        << (r.converged ? "true" : "false") << ',' << (r.silence_verified ? "true" : "false")
        << ',';
    bool first = true;
    for (const auto& [key, value] : r.extras) {
      if (!first) out << ';';
      out << key << '=' << value;
      first = false;
    }
    out << '\n';
  }
}

inline std::vector<TrialPoint> to_trial_points(const std::vector<ResultRow>& rows) {
  std::vector<TrialPoint> pts;
  pts.reserve(rows.size());
  for (const ResultRow& r : rows) {
    pts.push_back(TrialPoint{r.n, r.parallel_time, r.converged});
  }
  return pts;
}

inline ScalingReport fit_scaling(const std::vector<ResultRow>& rows, FitModel model,
                                 double polylog_q, double target, double tolerance) {
  return fit_scaling(to_trial_points(rows), model, polylog_q, target, tolerance);
}

}  // namespace poploc

#endif  // POPLOC_EXPERIMENT_HPP
