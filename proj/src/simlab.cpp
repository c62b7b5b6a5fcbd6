#include "simix/simlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "simix/error.hpp"
#include "simix/mrsip.hpp"
#include "simix/msim.hpp"
#include "simix/parallel.hpp"
#include "simix/rng.hpp"
#include "simix/selection.hpp"

namespace simix {

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt3 = std::sqrt(3.0);

Eigen::RowVectorXd pair(double a, double b) {
  Eigen::RowVectorXd out(2);
  out << a, b;
  return out;
}

std::string fmt_number(double x) {
  if (!std::isfinite(x)) return "";
  std::ostringstream s;
  s.precision(10);
  s << x;
  return s.str();
}

}  // namespace

IndexVector example_index() { return normalize_index(Eigen::VectorXd::Ones(3)); }

Eigen::RowVectorXd example1_proportions(double z) {
  const double p1 = 0.5 + 0.3 * std::sin(kPi * z);
  return pair(p1, 1.0 - p1);
}

Eigen::RowVectorXd example1_means(double z) {
  return pair(3.0 - std::sin(2.0 * kPi * z / kSqrt3), std::cos(kSqrt3 * kPi * z));
}

Eigen::RowVectorXd example1_sds(double z) {
  return pair(0.7 + std::sin(3.0 * kPi * z) / 15.0, 0.3 + std::cos(1.3 * kPi * z) / 10.0);
}

Eigen::RowVectorXd example1_variances(double z) { return example1_sds(z).array().square(); }

Eigen::RowVectorXd example2_proportions(double z) {
  const double p1 = 0.5 - 0.35 * std::sin(kPi * z);
  return pair(p1, 1.0 - p1);
}

LinearMixtureParams example2_linear() {
  LinearMixtureParams p;
  p.coefficients.resize(2, 4);
  p.coefficients << 1.0, 0.0, 3.0, 0.0,
                   -1.0, 2.0, 0.0, 3.0;
  p.variances = Eigen::Vector2d(0.7, 0.6);
  p.proportions = Eigen::Vector2d(0.5, 0.5);
  p.intercept = true;
  return p;
}

namespace {

Simulated generate(int example, std::size_t n, std::uint64_t seed) {
  Simulated out;
  auto& truth = out.truth;
  truth.example = example;
  truth.seed = seed;
  truth.index = example_index();
  if (example == 1) {
    truth.proportions = example1_proportions;
    truth.means = example1_means;
    truth.variances = example1_variances;
  } else {
    truth.proportions = example2_proportions;
    truth.linear = example2_linear();
  }
  const auto rows = static_cast<Eigen::Index>(n);
  out.data.X.resize(rows, 3);
  out.data.y.resize(rows);
  truth.labels.resize(n);

  Rng rng = make_stream(seed, example == 1 ? "example1" : "example2");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd& a = truth.index.coefficients();
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) out.data.X(i, c) = unit(rng);
    const double z = out.data.X.row(i).dot(a);
    const int label = unit(rng) < truth.proportions(z)[0] ? 0 : 1;
    truth.labels[static_cast<std::size_t>(i)] = label;
    double mean = 0.0, sd = 0.0;
    if (example == 1) {
      mean = example1_means(z)[label];
      sd = example1_sds(z)[label];
    } else {
      const auto beta = truth.linear.coefficients.row(label);
      mean = beta[0] + out.data.X.row(i).dot(beta.tail(3));
      sd = std::sqrt(truth.linear.variances[label]);
    }
    out.data.y[i] = mean + sd * normal(rng);
  }
  return out;
}

}  // namespace

Simulated gen_example1(std::size_t n, std::uint64_t seed) {
  if (n < 1) fail(ErrorKind::invalid_argument, "need at least one observation");
  return generate(1, n, seed);
}

Simulated gen_example2(std::size_t n, std::uint64_t seed) {
  if (n < 1) fail(ErrorKind::invalid_argument, "need at least one observation");
  return generate(2, n, seed);
}

double rase(const Eigen::MatrixXd& estimated, const Grid& grid, const TruthFunction& truth) {
  if (static_cast<std::size_t>(estimated.rows()) != grid.size() || grid.size() == 0) {
    fail(ErrorKind::shape, "estimated curves do not match the grid");
  }
  double total = 0.0;
  for (Eigen::Index t = 0; t < estimated.rows(); ++t) {
    const Eigen::RowVectorXd g = truth(grid[static_cast<std::size_t>(t)]);
    if (g.size() != estimated.cols()) {
      fail(ErrorKind::shape, "estimate has " + std::to_string(estimated.cols()) +
                                 " components, truth has " + std::to_string(g.size()));
    }
    total += (estimated.row(t) - g).squaredNorm();
  }
  return std::sqrt(total / static_cast<double>(estimated.rows()));
}

double rase(const CurveSet& curves, const TruthFunction& truth, CurveFamily family) {
  switch (family) {
    case CurveFamily::proportions: return rase(curves.proportions, curves.grid, truth);
    case CurveFamily::means: return rase(curves.means, curves.grid, truth);
    case CurveFamily::variances: return rase(curves.variances, curves.grid, truth);
  }
  fail(ErrorKind::invalid_argument, "unknown curve family");
}

std::vector<int> best_permutation(const std::function<double(const std::vector<int>&)>& cost,
                                  int k) {
  if (k < 1 || k > 6) fail(ErrorKind::invalid_argument, "component matching supports 1 <= k <= 6");
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) perm[static_cast<std::size_t>(j)] = j;
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    const double c = cost(perm);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

CurveSet permute_components(const CurveSet& curves, const std::vector<int>& perm) {
  const auto k = static_cast<Eigen::Index>(perm.size());
  if (k != curves.components()) fail(ErrorKind::shape, "permutation length does not match curves");
  CurveSet out = curves;
  for (Eigen::Index l = 0; l < k; ++l) {
    const Eigen::Index j = perm[static_cast<std::size_t>(l)];
    out.proportions.col(l) = curves.proportions.col(j);
    if (curves.has_means()) {
      out.means.col(l) = curves.means.col(j);
      out.variances.col(l) = curves.variances.col(j);
    }
  }
  return out;
}

LinearMixtureParams permute_components(const LinearMixtureParams& params,
                                       const std::vector<int>& perm) {
  const auto k = static_cast<Eigen::Index>(perm.size());
  if (k != params.components()) fail(ErrorKind::shape, "permutation length does not match components");
  LinearMixtureParams out = params;
  for (Eigen::Index l = 0; l < k; ++l) {
    const Eigen::Index j = perm[static_cast<std::size_t>(l)];
    out.coefficients.row(l) = params.coefficients.row(j);
    out.variances[l] = params.variances[j];
    if (params.proportions.size() == k) out.proportions[l] = params.proportions[j];
  }
  return out;
}

std::vector<int> match_components(const CurveSet& curves, const SyntheticTruth& truth) {
  const int k = static_cast<int>(curves.components());
  return best_permutation(
      [&](const std::vector<int>& perm) {
        const CurveSet p = permute_components(curves, perm);
        double total = 0.0;
        if (truth.proportions) total += rase(p, truth.proportions, CurveFamily::proportions);
        if (p.has_means() && truth.means) total += rase(p, truth.means, CurveFamily::means);
        if (p.has_means() && truth.variances) total += rase(p, truth.variances, CurveFamily::variances);
        return total;
      },
      k);
}

std::vector<int> match_components(const LinearMixtureParams& estimated,
                                  const LinearMixtureParams& truth) {
  if (estimated.components() != truth.components() ||
      estimated.coefficients.cols() != truth.coefficients.cols()) {
    fail(ErrorKind::shape, "estimated and true linear components differ in shape");
  }
  return best_permutation(
      [&](const std::vector<int>& perm) {
        double total = 0.0;
        for (Eigen::Index l = 0; l < truth.components(); ++l) {
          total += (estimated.coefficients.row(perm[static_cast<std::size_t>(l)]) -
                    truth.coefficients.row(l))
                       .squaredNorm();
        }
        return total;
      },
      static_cast<int>(truth.components()));
}

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::sir: return "SIR";
    case Estimator::os: return "OS";
    case Estimator::fib_sir: return "FIB(S)";
    case Estimator::fib_true: return "FIB(T)";
    case Estimator::mrsip_sir: return "MRSIP(S)";
    case Estimator::mrsip_true: return "MRSIP(T)";
    case Estimator::mixlin: return "MixLinReg";
  }
  return "?";
}

std::string estimator_key(Estimator e) {
  switch (e) {
    case Estimator::sir: return "sir";
    case Estimator::os: return "os";
    case Estimator::fib_sir: return "fib_sir";
    case Estimator::fib_true: return "fib_true";
    case Estimator::mrsip_sir: return "mrsip_sir";
    case Estimator::mrsip_true: return "mrsip_true";
    case Estimator::mixlin: return "mixlin";
  }
  return "?";
}

std::optional<Estimator> parse_estimator(const std::string& key) {
  if (key == "fib") return Estimator::fib_sir;
  if (key == "mrsip") return Estimator::mrsip_sir;
  for (Estimator e : {Estimator::sir, Estimator::os, Estimator::fib_sir, Estimator::fib_true,
                      Estimator::mrsip_sir, Estimator::mrsip_true, Estimator::mixlin}) {
    if (key == estimator_key(e)) return e;
  }
  return std::nullopt;
}

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::none: return "none";
    case Policy::under: return "under";
    case Policy::appropriate: return "appropriate";
    case Policy::over: return "over";
  }
  return "?";
}

const TableCell* ReplicationTable::find(std::size_t n, Estimator e, Policy p,
                                        const std::string& quantity) const {
  for (const auto& c : cells) {
    if (c.n == n && c.estimator == e && c.policy == p && c.quantity == quantity) return &c;
  }
  return nullptr;
}

double ReplicationTable::seconds(Estimator e) const {
  double total = 0.0;
  for (const auto& r : records) {
    if (r.estimator == e) total += r.seconds;
  }
  return total;
}

namespace {

struct Job {
  Estimator estimator;
  Policy policy;
};

bool uses_bandwidth_policy(Estimator e) {
  return e == Estimator::fib_sir || e == Estimator::fib_true || e == Estimator::mrsip_sir ||
         e == Estimator::mrsip_true;
}

bool valid_for(int example, Estimator e) {
  if (e == Estimator::sir) return true;
  if (example == 1) {
    return e == Estimator::os || e == Estimator::fib_sir || e == Estimator::fib_true;
  }
  return e == Estimator::mrsip_sir || e == Estimator::mrsip_true || e == Estimator::mixlin;
}

double quantity_scale(int example, const std::string& q) {
  if (q.rfind("rase", 0) == 0) return example == 2 ? 100.0 : 1.0;
  return 100.0;
}

void record_alpha(const IndexVector& estimate, const IndexVector& truth,
                  std::map<std::string, double>& values) {
  for (Eigen::Index c = 0; c < truth.size(); ++c) {
    const double d = estimate[c] - truth[c];
    values["alpha" + std::to_string(c + 1)] = d * d;
  }
}

void record_linear(const LinearMixtureParams& estimate, const LinearMixtureParams& truth,
                   std::map<std::string, double>& values) {
  for (Eigen::Index j = 0; j < truth.components(); ++j) {
    for (Eigen::Index c = 0; c < truth.coefficients.cols(); ++c) {
      const double d = estimate.coefficients(j, c) - truth.coefficients(j, c);
      values["beta" + std::to_string(j + 1) + std::to_string(c)] = d * d;
    }
    const double d = estimate.variances[j] - truth.variances[j];
    values["sigma2_" + std::to_string(j + 1)] = d * d;
  }
}

ReplicationRecord run_one(const ReplicationConfig& config, const Simulated& sim, std::size_t n,
                          int rep, const Job& job, double bandwidth, std::uint64_t data_seed) {
  ReplicationRecord rec;
  rec.n = n;
  rec.replication = rep;
  rec.estimator = job.estimator;
  rec.policy = job.policy;
  rec.bandwidth = bandwidth;
  rec.data_seed = data_seed;
  const auto& X = sim.data.X;
  const auto& y = sim.data.y;
  const auto& truth = sim.truth;
  const std::uint64_t fit_seed =
      substream_seed(config.seed, "fit", {n, static_cast<std::uint64_t>(rep),
                                          static_cast<std::uint64_t>(job.estimator)});
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (job.estimator) {
      case Estimator::sir: {
        record_alpha(sir_direction(X, y), truth.index, rec.values);
        break;
      }
      case Estimator::os:
      case Estimator::fib_sir:
      case Estimator::fib_true: {
        MsimOptions o;
        o.mode = job.estimator == Estimator::os ? MsimMode::one_step : MsimMode::fib;
        o.grid_size = config.grid_size;
        o.seed = fit_seed;
        if (job.estimator == Estimator::fib_true) o.init_index = truth.index;
        const MsimFit fit = fit_msim(X, y, 2, bandwidth, o);
        rec.notes = fit.notes;
        if (!fit.converged) rec.notes.push_back("did not converge");
        record_alpha(fit.index, truth.index, rec.values);
        const CurveSet curves = permute_components(fit.curves, match_components(fit.curves, truth));
        rec.values["rase_pi"] = rase(curves, truth.proportions, CurveFamily::proportions);
        rec.values["rase_m"] = rase(curves, truth.means, CurveFamily::means);
        rec.values["rase_sigma2"] = rase(curves, truth.variances, CurveFamily::variances);
        break;
      }
      case Estimator::mrsip_sir:
      case Estimator::mrsip_true: {
        MrsipOptions o;
        o.grid_size = config.grid_size;
        o.seed = fit_seed;
        if (job.estimator == Estimator::mrsip_true) {
          o.init_index = truth.index;
          o.init_linear = truth.linear;
        }
        const MrsipFit fit = fit_mrsip(X, y, 2, bandwidth, o);
        rec.notes = fit.notes;
        if (!fit.converged) rec.notes.push_back("did not converge");
        const std::vector<int> perm = match_components(fit.linear, truth.linear);
        record_alpha(fit.index, truth.index, rec.values);
        record_linear(permute_components(fit.linear, perm), truth.linear, rec.values);
        rec.values["rase_pi"] =
            rase(permute_components(fit.curves, perm), truth.proportions, CurveFamily::proportions);
        break;
      }
      case Estimator::mixlin: {
        MixLinOptions o;
        o.seed = fit_seed;
        const MixLinFit fit = fit_mixlinreg(X, y, 2, o);
        if (!fit.converged) rec.notes.push_back("did not converge");
        const LinearMixtureParams p =
            permute_components(fit.params, match_components(fit.params, truth.linear));
        record_linear(p, truth.linear, rec.values);
        const Grid grid = build_grid(truth.index.project(X), config.grid_size);
        const Eigen::MatrixXd constant =
            p.proportions.transpose().replicate(static_cast<Eigen::Index>(grid.size()), 1);
        rec.values["rase_pi"] = rase(constant, grid, truth.proportions);
        break;
      }
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.values.clear();
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

double pilot_bandwidth(const ReplicationConfig& config, std::size_t n) {
  const Simulated sim = config.example == 1
                            ? gen_example1(n, substream_seed(config.seed, "pilot-data", {n}))
                            : gen_example2(n, substream_seed(config.seed, "pilot-data", {n}));
  ModelSpec spec;
  spec.kind = config.example == 1 ? ModelKind::msim : ModelKind::mrsip;
  spec.k = 2;
  spec.grid_size = config.grid_size;
  CvOptions cv;
  cv.repetitions = config.pilot_repetitions;
  cv.seed = substream_seed(config.seed, "pilot-cv", {n});
  cv.workers = config.workers;
  return cv_bandwidth(sim.data.X, sim.data.y, spec,
                      default_bandwidth_candidates(sim.data.X, sim.data.y), cv)
      .selected;
}

}  // namespace

ReplicationTable run_replications(const ReplicationConfig& config) {
  if (config.example != 1 && config.example != 2) {
    fail(ErrorKind::invalid_argument, "example must be 1 or 2");
  }
  if (config.replications < 1) fail(ErrorKind::invalid_argument, "need at least one replication");
  if (config.n_values.empty()) fail(ErrorKind::invalid_argument, "no sample sizes");
  for (std::size_t n : config.n_values) {
    if (n < 20) fail(ErrorKind::invalid_argument, "sample sizes below 20 are not supported");
  }
  std::vector<Estimator> estimators = config.estimators;
  if (estimators.empty()) {
    estimators = config.example == 1
                     ? std::vector<Estimator>{Estimator::sir, Estimator::os, Estimator::fib_true,
                                              Estimator::fib_sir}
                     : std::vector<Estimator>{Estimator::mrsip_sir, Estimator::mrsip_true,
                                              Estimator::mixlin};
  }
  for (Estimator e : estimators) {
    if (!valid_for(config.example, e)) {
      fail(ErrorKind::invalid_argument, "estimator " + estimator_key(e) +
                                            " does not apply to example " +
                                            std::to_string(config.example));
    }
  }
  if (config.policies.empty()) fail(ErrorKind::invalid_argument, "no bandwidth policies");

  std::vector<Job> jobs;
  for (Estimator e : estimators) {
    if (uses_bandwidth_policy(e)) {
      for (Policy p : config.policies) jobs.push_back({e, p});
    } else {
      jobs.push_back({e, Policy::none});
    }
  }

  ReplicationTable table;
  table.example = config.example;
  table.replications = config.replications;
  const bool smoothing = std::any_of(jobs.begin(), jobs.end(), [](const Job& j) {
    return j.estimator == Estimator::os || uses_bandwidth_policy(j.estimator);
  });
  for (std::size_t n : config.n_values) {
    if (!smoothing) break;
    auto it = config.h_hat.find(n);
    table.h_hat[n] = it != config.h_hat.end() ? it->second : pilot_bandwidth(config, n);
    auto os = config.os_bandwidth.find(n);
    table.os_bandwidth[n] = os != config.os_bandwidth.end() ? os->second : table.h_hat[n];
  }

  auto bandwidth_for = [&](std::size_t n, const Job& job) {
    if (job.estimator == Estimator::os) return table.os_bandwidth[n];
    if (job.policy == Policy::none) return 0.0;
    const SmoothingPolicy sp = smoothing_policy(table.h_hat[n], n);
    switch (job.policy) {
      case Policy::under: return sp.under;
      case Policy::over: return sp.over;
      case Policy::appropriate: return sp.appropriate;
      case Policy::none: return 0.0;
    }
    return 0.0;
  };

  const std::size_t reps = static_cast<std::size_t>(config.replications);
  const std::size_t units = config.n_values.size() * reps;
  std::vector<std::vector<ReplicationRecord>> slots(units);
  parallel_for(units, config.workers, [&](std::size_t unit) {
    const std::size_t n = config.n_values[unit / reps];
    const int rep = static_cast<int>(unit % reps);
    const std::uint64_t data_seed =
        substream_seed(config.seed, "replication", {n, static_cast<std::uint64_t>(rep)});
    const Simulated sim = config.example == 1 ? gen_example1(n, data_seed) : gen_example2(n, data_seed);
    for (const Job& job : jobs) {
      slots[unit].push_back(run_one(config, sim, n, rep, job, bandwidth_for(n, job), data_seed));
    }
  });
  for (auto& s : slots) {
    for (auto& r : s) table.records.push_back(std::move(r));
  }

  for (std::size_t n : config.n_values) {
    for (const Job& job : jobs) {
      std::map<std::string, std::vector<double>> values;
      std::vector<std::string> order;
      int failures = 0;
      const ReplicationRecord* first_failure = nullptr;
      for (const auto& r : table.records) {
        if (r.n != n || r.estimator != job.estimator || r.policy != job.policy) continue;
        if (!r.ok) {
          ++failures;
          if (!first_failure) first_failure = &r;
          continue;
        }
        for (const auto& [q, v] : r.values) {
          if (!values.count(q)) order.push_back(q);
          values[q].push_back(v);
        }
      }
      if (static_cast<double>(failures) > config.max_failure_fraction * config.replications) {
        fail(ErrorKind::too_many_failures,
             std::to_string(failures) + " of " + std::to_string(config.replications) + " " +
                 estimator_name(job.estimator) + " fits failed at n=" + std::to_string(n) +
                 "; first failure (data seed " + std::to_string(first_failure->data_seed) +
                 "): " + first_failure->error);
      }
      for (const auto& q : order) {
        const auto& v = values[q];
        TableCell cell;
        cell.n = n;
        cell.estimator = job.estimator;
        cell.policy = job.policy;
        cell.bandwidth = bandwidth_for(n, job);
        cell.quantity = q;
        cell.scale = quantity_scale(config.example, q);
        cell.count = static_cast<int>(v.size());
        cell.failures = failures;
        double sum = 0.0;
        for (double x : v) sum += x;
        const double mean = sum / static_cast<double>(v.size());
        cell.mean = mean * cell.scale;
        if (v.size() >= 2) {
          double ss = 0.0;
          for (double x : v) ss += (x - mean) * (x - mean);
          cell.sd = std::sqrt(ss / static_cast<double>(v.size() - 1)) * cell.scale;
        }
        table.cells.push_back(std::move(cell));
      }
    }
  }
  return table;
}

namespace {

struct Column {
  Estimator estimator;
  Policy policy;
};

std::string column_label(const Column& c) {
  return c.policy == Policy::none ? estimator_name(c.estimator)
                                  : estimator_name(c.estimator) + " " + policy_name(c.policy);
}

// (estimator, policy) pairs in order of first appearance that report `quantity`.
std::vector<Column> columns_with(const ReplicationTable& table, const std::string& quantity) {
  std::vector<Column> out;
  for (const auto& c : table.cells) {
    if (c.quantity != quantity) continue;
    const bool seen = std::any_of(out.begin(), out.end(), [&](const Column& col) {
      return col.estimator == c.estimator && col.policy == c.policy;
    });
    if (!seen) out.push_back({c.estimator, c.policy});
  }
  return out;
}

std::vector<std::size_t> sizes(const ReplicationTable& table) {
  std::vector<std::size_t> out;
  for (const auto& c : table.cells) {
    if (std::find(out.begin(), out.end(), c.n) == out.end()) out.push_back(c.n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double cell_bandwidth(const ReplicationTable& table, std::size_t n, const Column& col,
                      const std::string& quantity) {
  const TableCell* c = table.find(n, col.estimator, col.policy, quantity);
  return c && col.policy != Policy::none ? c->bandwidth
         : c && col.estimator == Estimator::os ? c->bandwidth
                                               : std::numeric_limits<double>::quiet_NaN();
}

// Rows are (n, estimator) pairs; columns are quantities.
void write_by_estimator(const ReplicationTable& table, const std::vector<std::string>& quantities,
                        std::ostream& out) {
  out << "n,estimator,h";
  for (const auto& q : quantities) out << ',' << q;
  out << '\n';
  const std::vector<Column> cols = columns_with(table, quantities.back());
  for (std::size_t n : sizes(table)) {
    for (const Column& col : cols) {
      out << n << ',' << column_label(col) << ','
          << fmt_number(cell_bandwidth(table, n, col, quantities.back()));
      for (const auto& q : quantities) {
        const TableCell* c = table.find(n, col.estimator, col.policy, q);
        out << ',' << (c ? fmt_number(c->mean) : std::string());
      }
      out << '\n';
    }
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  for (char ch : line) {
    if (ch == ',') {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  return out;
}

void print_aligned(const std::string& title, const std::string& csv, std::ostream& out) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) rows.push_back(split_csv_line(line));
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  out << title << '\n';
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out << (c ? "  " : "") << r[c] << std::string(width[c] - r[c].size(), ' ');
    }
    out << '\n';
  }
  out << '\n';
}

}  // namespace

void write_cells_csv(const ReplicationTable& table, std::ostream& out) {
  out << "example,n,estimator,policy,h,quantity,scale,mean,sd,count,failures\n";
  for (const auto& c : table.cells) {
    out << table.example << ',' << c.n << ',' << estimator_key(c.estimator) << ','
        << policy_name(c.policy) << ',' << fmt_number(c.bandwidth) << ',' << c.quantity << ','
        << fmt_number(c.scale) << ',' << fmt_number(c.mean) << ','
        << (c.sd ? fmt_number(*c.sd) : std::string()) << ',' << c.count << ',' << c.failures
        << '\n';
  }
}

void write_alpha_table_csv(const ReplicationTable& table, std::ostream& out) {
  const std::vector<Column> cols = columns_with(table, "alpha1");
  out << "n,row";
  for (const auto& c : cols) out << ',' << column_label(c);
  out << '\n';
  for (std::size_t n : sizes(table)) {
    out << n << ",h";
    for (const auto& c : cols) out << ',' << fmt_number(cell_bandwidth(table, n, c, "alpha1"));
    out << '\n';
    for (int a = 1; a <= 3; ++a) {
      const std::string q = "alpha" + std::to_string(a);
      out << n << ',' << q;
      for (const auto& c : cols) {
        const TableCell* cell = table.find(n, c.estimator, c.policy, q);
        out << ',' << (cell ? fmt_number(cell->mean) : std::string());
      }
      out << '\n';
    }
  }
}

void write_rase_table_csv(const ReplicationTable& table, std::ostream& out) {
  const std::vector<Column> cols = columns_with(table, "rase_m");
  out << "n,row";
  for (const auto& c : cols) out << ',' << column_label(c);
  out << '\n';
  for (std::size_t n : sizes(table)) {
    out << n << ",h";
    for (const auto& c : cols) out << ',' << fmt_number(cell_bandwidth(table, n, c, "rase_m"));
    out << '\n';
    for (const char* q : {"rase_pi", "rase_m", "rase_sigma2"}) {
      for (const char* stat : {"mean", "sd"}) {
        out << n << ',' << q << ' ' << stat;
        for (const auto& c : cols) {
          const TableCell* cell = table.find(n, c.estimator, c.policy, q);
          std::string v;
          if (cell) v = std::string(stat) == "mean" ? fmt_number(cell->mean)
                        : cell->sd                  ? fmt_number(*cell->sd)
                                                    : std::string();
          out << ',' << v;
        }
        out << '\n';
      }
    }
  }
}

void write_parameter_table_csv(const ReplicationTable& table, std::ostream& out) {
  write_by_estimator(table,
                     {"beta10", "beta11", "beta12", "beta13", "beta20", "beta21", "beta22",
                      "beta23", "sigma2_1", "sigma2_2"},
                     out);
}

void write_index_table_csv(const ReplicationTable& table, std::ostream& out) {
  write_by_estimator(table, {"alpha1", "alpha2", "alpha3", "rase_pi"}, out);
}

void write_table_text(const ReplicationTable& table, std::ostream& out) {
  std::ostringstream a, b;
  if (table.example == 1) {
    write_alpha_table_csv(table, a);
    write_rase_table_csv(table, b);
    print_aligned("MSE of the index estimate (x100)", a.str(), out);
    print_aligned("RASE of the curve estimates: mean and sd", b.str(), out);
  } else {
    write_parameter_table_csv(table, a);
    write_index_table_csv(table, b);
    print_aligned("MSE of the component parameters (x100)", a.str(), out);
    print_aligned("MSE of the index estimate and RASE of the proportions (x100)", b.str(), out);
  }
  int failed = 0;
  for (const auto& r : table.records) failed += r.ok ? 0 : 1;
  out << "replications per cell: " << table.replications << ", failed fits: " << failed << '\n';
}

void write_records_ndjson(const ReplicationTable& table, std::ostream& out, bool with_timing) {
  for (const auto& r : table.records) {
    nlohmann::ordered_json j;
    j["example"] = table.example;
    j["n"] = r.n;
    j["replication"] = r.replication;
    j["estimator"] = estimator_key(r.estimator);
    j["policy"] = policy_name(r.policy);
    j["h"] = r.bandwidth;
    j["data_seed"] = r.data_seed;
    j["ok"] = r.ok;
    if (!r.ok) j["error"] = r.error;
    j["values"] = r.values;
    if (!r.notes.empty()) j["notes"] = r.notes;
    if (with_timing) j["seconds"] = r.seconds;
    out << j.dump() << '\n';
  }
}

}  // namespace simix
