// Experiment harness: runs seeded trial batches for the localisation
// protocols, writes one CSV row per trial, and optionally fits the
// scaling of per-n median stabilisation times.

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poploc/poploc.hpp"

namespace {

void print_summary(const std::vector<poploc::ResultRow>& rows, std::ostream& out) {
  std::map<std::size_t, std::vector<double>> converged;
  std::map<std::size_t, std::size_t> failed;
  for (const auto& r : rows) {
    if (r.converged) {
      converged[r.n].push_back(r.parallel_time);
    } else {
      ++failed[r.n];
    }
  }
  out << "n,converged,nonconverged,median_time,q90_time\n";
  std::map<std::size_t, bool> all_n;
  for (const auto& [n, _] : converged) all_n[n] = true;
  for (const auto& [n, _] : failed) all_n[n] = true;
  for (const auto& [n, _] : all_n) {
    const std::size_t ok = converged.count(n) ? converged[n].size() : 0;
    const std::size_t bad = failed.count(n) ? failed[n] : 0;
    out << n << ',' << ok << ',' << bad;
    if (ok > 0) {
      out << ',' << poploc::median(converged[n]) << ',' << poploc::quantile90(converged[n]);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

void print_fit(const poploc::ScalingReport& rep, std::ostream& out) {
  if (rep.model == poploc::FitModel::kPowerLaw) {
    out << "fit: model=power-law q=" << rep.polylog_q << " exponent=" << rep.fitted
        << " stderr=" << rep.std_error << " target=" << rep.target << "+-" << rep.tolerance
        << " => " << (rep.pass ? "PASS" : "FAIL") << '\n';
  } else {
    out << "fit: model=log-affine slope=" << rep.fitted << " intercept=" << rep.intercept
        << " max_rel_residual=" << rep.max_rel_residual << " threshold=" << rep.tolerance
        << " => " << (rep.pass ? "PASS" : "FAIL") << '\n';
  }
  for (const auto& p : rep.per_n) {
    out << "  n=" << p.n << " converged=" << p.converged << " nonconverged=" << p.nonconverged
        << " median=" << p.median << " q90=" << p.q90 << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"population-protocol localisation experiments"};
  app.set_config("--config", "", "key=value config file; command-line flags take precedence");

  std::string protocol;
  std::vector<std::size_t> n_grid;
  poploc::ExperimentConfig cfg;
  std::string silence = "off";
  double fit_target = std::nan("");
  double fit_tol = 0.1;
  bool summary = false;

  app.add_option("--protocol", protocol, "kcontact | leaderloc | improved1d | selfstab | vector")
      ->required();
  app.add_option("--n", n_grid, "population sizes (repeatable or comma-separated)")
      ->required()
      ->delimiter(',');
  app.add_option("--k", cfg.k, "spatial dimension");
  app.add_option("--k-contact", cfg.k_contact, "epidemic threshold (kcontact)");
  app.add_option("--trials", cfg.trials, "trials per population size");
  app.add_option("--seed", cfg.base_seed, "base seed");
  app.add_option("--tol", cfg.tol, "geometric tolerance");
  app.add_option("--oracle-tol", cfg.oracle_tol, "convergence-oracle tolerance");
  app.add_option("--budget-mult", cfg.budget_multiplier, "stop budget as a multiple of the theoretical bound");
  app.add_option("--buffer-d", cfg.buffer_d, "buffer line constant D (selfstab)");
  app.add_option("--deadline-c", cfg.deadline_c, "deadline constant C_d (selfstab)");
  app.add_option("--recipe", cfg.recipe, "initial-state recipe (selfstab, vector)");
  app.add_option("--positions", cfg.positions_source, "'uniform' or a positions file path");
  app.add_option("--out", cfg.output_path, "CSV output path (stdout when omitted)");
  app.add_option("--silence", silence, "verify silence: off | converged | all");
  auto* fit_opt = app.add_option("--fit", fit_target, "fit scaling and compare the exponent to this target");
  app.add_option("--fit-tol", fit_tol, "allowed deviation from the fit target");
  app.add_flag("--summary", summary, "print a per-n summary");

  try {
    app.parse(argc, argv);

    cfg.protocol = poploc::parse_protocol(protocol);
    cfg.n_grid = n_grid;
    if (silence == "off") {
      cfg.silence = poploc::SilenceCheck::kOff;
    } else if (silence == "converged") {
      cfg.silence = poploc::SilenceCheck::kConverged;
    } else if (silence == "all") {
      cfg.silence = poploc::SilenceCheck::kAll;
    } else {
      throw poploc::ConfigError("unknown --silence mode: " + silence);
    }

    const std::vector<poploc::ResultRow> rows = poploc::run_experiment(cfg);

    if (cfg.output_path.empty()) {
      poploc::write_csv(rows, std::cout);
    } else {
      std::ofstream out(cfg.output_path, std::ios::binary);
      if (!out) throw poploc::ConfigError("cannot open output file: " + cfg.output_path);
      poploc::write_csv(rows, out);
    }

    std::ostream& info = cfg.output_path.empty() ? std::cerr : std::cout;
    if (summary) print_summary(rows, info);
    if (!fit_opt->empty()) {
      const poploc::FitModel model = cfg.protocol == poploc::ProtocolKind::kVector
                                         ? poploc::FitModel::kLogAffine
                                         : poploc::FitModel::kPowerLaw;
      const double q = poploc::polylog_exponent(cfg.protocol, cfg.k, cfg.k_contact);
      print_fit(poploc::fit_scaling(rows, model, q, fit_target, fit_tol), info);
    }

    return poploc::any_aborted(rows) ? 3 : 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const poploc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const poploc::InsufficientDataError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
}
