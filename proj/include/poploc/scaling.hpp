#ifndef POPLOC_SCALING_HPP
#define POPLOC_SCALING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

namespace poploc {

struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One trial's contribution to a scaling fit.
struct TrialPoint {
  std::size_t n = 0;
  double parallel_time = 0.0;
  bool converged = false;
};

enum class FitModel {
  kPowerLaw,   // log(median / (ln n)^q) ~ exponent * log n + c
  kLogAffine,  // median ~ a + b * ln n
};

struct ScalingReport {
  FitModel model = FitModel::kPowerLaw;
  double fitted = 0.0;  // exponent (power law) or slope b (log-affine)
  double std_error = 0.0;
  double intercept = 0.0;
  double polylog_q = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  double max_rel_residual = 0.0;  // of the median fit, log-affine model
  bool pass = false;

  struct PerN {
    std::size_t n = 0;
    std::size_t converged = 0;
    std::size_t nonconverged = 0;
    double median = 0.0;
    double q90 = 0.0;
  };
  std::vector<PerN> per_n;
  std::size_t total_nonconverged = 0;
};

// Median of a sample (mean of the central pair for even sizes).
inline double median(std::vector<double> xs) {
  if (xs.empty()) throw InsufficientDataError("median of empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size();
  if (m % 2 == 1) return xs[m / 2];
  return 0.5 * (xs[m / 2 - 1] + xs[m / 2]);
}

// Nearest-rank 0.9-quantile.
inline double quantile90(std::vector<double> xs) {
  if (xs.empty()) throw InsufficientDataError("quantile of empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.9 * static_cast<double>(xs.size())));
  return xs[std::max<std::size_t>(rank, 1) - 1];
}

// Least-squares fit of the per-n medians of converged trials against the
// model's theoretical form. Non-converged trials never enter the medians;
// they are tallied per n. Needs at least 4 distinct n values with at
// least 10 converged trials each.
//
// Power-law pass criterion: |exponent - target| <= tolerance.
// Log-affine pass criterion: max relative residual of the median fit is
// below `tolerance` (`target` is not used).
inline ScalingReport fit_scaling(const std::vector<TrialPoint>& points, FitModel model,
                                 double polylog_q, double target, double tolerance) {
  std::map<std::size_t, std::vector<double>> times;
  std::map<std::size_t, std::size_t> failures;
  for (const TrialPoint& p : points) {
    if (p.converged) {
      times[p.n].push_back(p.parallel_time);
    } else {
      ++failures[p.n];
    }
  }
  if (times.size() < 4) {
    throw InsufficientDataError("fit_scaling: need at least 4 distinct population sizes");
  }
  for (const auto& [n, ts] : times) {
    if (ts.size() < 10) {
      throw InsufficientDataError("fit_scaling: need at least 10 converged trials per n");
    }
  }

  ScalingReport report;
  report.model = model;
  report.polylog_q = polylog_q;
  report.target = target;
  report.tolerance = tolerance;

  std::vector<double> xs, ys;
  for (const auto& [n, ts] : times) {
    ScalingReport::PerN row;
    row.n = n;
    row.converged = ts.size();
    row.nonconverged = failures.count(n) ? failures[n] : 0;
    row.median = median(ts);
    row.q90 = quantile90(ts);
    report.per_n.push_back(row);

    const double ln_n = std::log(static_cast<double>(n));
    if (model == FitModel::kPowerLaw) {
      if (row.median <= 0.0) {
        throw InsufficientDataError("fit_scaling: nonpositive median under power-law model");
      }
      xs.push_back(ln_n);
      ys.push_back(std::log(row.median / std::pow(ln_n, polylog_q)));
    } else {
      xs.push_back(ln_n);
      ys.push_back(row.median);
    }
  }
  for (const auto& [n, c] : failures) {
    report.total_nonconverged += c;
    if (!times.count(n)) {
      ScalingReport::PerN row;
      row.n = n;
      row.nonconverged = c;
      report.per_n.push_back(row);
    }
  }
  std::sort(report.per_n.begin(), report.per_n.end(),
            [](const auto& a, const auto& b) { return a.n < b.n; });

  const std::size_t m = xs.size();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / static_cast<double>(m);
  const double my = sy / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;

  double ssr = 0.0;
  double max_rel = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double fit = intercept + slope * xs[i];
    const double r = ys[i] - fit;
    ssr += r * r;
    if (model == FitModel::kLogAffine && ys[i] != 0.0) {
      max_rel = std::max(max_rel, std::abs(r / ys[i]));
    }
  }
  report.fitted = slope;
  report.intercept = intercept;
  report.std_error = m > 2 ? std::sqrt(ssr / static_cast<double>(m - 2) / sxx) : 0.0;
  report.max_rel_residual = max_rel;
  report.pass = model == FitModel::kPowerLaw ? std::abs(slope - target) <= tolerance
                                             : max_rel < tolerance;
  return report;
}

}  // namespace poploc

#endif  // POPLOC_SCALING_HPP
