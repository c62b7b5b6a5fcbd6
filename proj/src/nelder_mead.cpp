#include "simix/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace simix {

namespace {

struct Simplex {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> values;
};

double safe_eval(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

NelderMeadResult run_once(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& start, double start_value, double step,
                          const NelderMeadOptions& options, int budget) {
  const Eigen::Index d = start.size();
  Simplex s;
  s.points.push_back(start);
  s.values.push_back(start_value);
  int evals = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd v = start;
    v[i] += step;
    s.points.push_back(v);
    s.values.push_back(safe_eval(f, v));
    ++evals;
  }

  std::vector<std::size_t> order(s.points.size());
  bool converged = false;
  while (evals < budget) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    double spread = 0.0;
    double diameter = 0.0;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      spread = std::max(spread, std::abs(s.values[i] - s.values[best]));
      diameter = std::max(diameter, (s.points[i] - s.points[best]).cwiseAbs().maxCoeff());
    }
    if (spread <= options.f_tol * (1.0 + std::abs(s.values[best])) && diameter <= options.x_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (i != worst) centroid += s.points[i];
    }
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd reflected = centroid + (centroid - s.points[worst]);
    const double fr = safe_eval(f, reflected);
    ++evals;
    if (fr < s.values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - s.points[worst]);
      const double fe = safe_eval(f, expanded);
      ++evals;
      if (fe < fr) {
        s.points[worst] = expanded;
        s.values[worst] = fe;
      } else {
        s.points[worst] = reflected;
        s.values[worst] = fr;
      }
      continue;
    }
    if (fr < s.values[second_worst]) {
      s.points[worst] = reflected;
      s.values[worst] = fr;
      continue;
    }
    const bool outside = fr < s.values[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (s.points[worst] - centroid));
    const double fc = safe_eval(f, contracted);
    ++evals;
    if (fc < (outside ? fr : s.values[worst])) {
      s.points[worst] = contracted;
      s.values[worst] = fc;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (i == best) continue;
      s.points[i] = s.points[best] + 0.5 * (s.points[i] - s.points[best]);
      s.values[i] = safe_eval(f, s.points[i]);
      ++evals;
    }
  }

  const auto best_it = std::min_element(s.values.begin(), s.values.end());
  const auto b = static_cast<std::size_t>(best_it - s.values.begin());
  return {s.points[b], s.values[b], evals, converged};
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& options) {
  NelderMeadResult result{start, safe_eval(f, start), 1, true};
  if (start.size() == 0) return result;

  double step = options.initial_step;
  for (int round = 0; round <= options.restarts; ++round) {
    const int budget = options.max_evaluations - result.evaluations;
    if (budget <= static_cast<int>(start.size()) + 1) {
      result.converged = false;
      break;
    }
    NelderMeadResult next = run_once(f, result.x, result.value, step, options, budget);
    result.evaluations += next.evaluations;
    result.converged = next.converged;
    const bool moved = next.value < result.value;
    if (moved) {
      result.x = next.x;
      result.value = next.value;
    }
    // A restart that finds nothing better confirms the optimum.
    if (round > 0 && !moved) break;
    step *= 0.1;
  }
  return result;
}

}  // namespace simix
