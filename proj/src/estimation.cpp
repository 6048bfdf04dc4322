#include "mcmiss/estimation.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcmiss {

namespace {

// atanh(rho) stays below this so tanh never rounds to +-1.
constexpr double kAtanhCap = 18.0;
constexpr double kLogCap = 690.0;

inline double cap(double x, double lim) {
  return x > lim ? lim : (x < -lim ? -lim : x);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double expit(double t) { return 1.0 / (1.0 + std::exp(-cap(t, kLogCap))); }

}  // namespace

ParamTransform::ParamTransform(const ModelVariant& model, LikelihoodKind kind)
    : model_(model), kind_(kind) {
  names_ = {"mu1", "mu2", "log_sigma1", "log_sigma2", "atanh_rho"};
  const auto causes = model_causes(model);
  estimated_.resize(causes.size(), false);
  for (std::size_t rank = 0; rank < causes.size(); ++rank) {
    const CauseEntry& e = causes[rank];
    bool est;
    switch (kind) {
      case LikelihoodKind::direct:
        est = false;
        break;
      case LikelihoodKind::semi_direct:
        est = classify_mechanism(e.mechanism) == MechanismClass::nmar;
        break;
      default:
        est = true;
    }
    estimated_[rank] = est;
    if (!est) continue;
    const std::string tag = "cause" + std::to_string(e.code);
    if (std::holds_alternative<Mcar>(e.mechanism)) {
      names_.push_back(tag + "_logit_p");
    } else {
      names_.push_back(tag + "_tau_a");
      names_.push_back(tag + "_tau_b");
    }
  }
}

std::vector<double> ParamTransform::pack(const Xi& xi) const {
  std::vector<double> v;
  v.reserve(dim());
  v.push_back(xi.theta.mu1());
  v.push_back(xi.theta.mu2());
  v.push_back(std::log(xi.theta.sigma1()));
  v.push_back(std::log(xi.theta.sigma2()));
  v.push_back(std::atanh(xi.theta.rho()));
  const auto causes = model_causes(model_);
  for (std::size_t rank = 0; rank < causes.size(); ++rank) {
    if (!estimated_[rank]) continue;
    const CauseMechanismSpec& m = xi.taus[rank];
    if (const auto* mc = std::get_if<Mcar>(&m)) {
      v.push_back(logit(mc->p));
    } else if (const auto* c = std::get_if<MarLogisticCentered>(&m)) {
      v.push_back(c->tau_a);
      v.push_back(c->tau_b);
    } else if (const auto* a = std::get_if<MarLogisticAffine>(&m)) {
      v.push_back(a->tau_a);
      v.push_back(a->tau_b);
    } else {
      const auto& nm = std::get<NmarLogisticCentered>(m);
      v.push_back(nm.tau_a);
      v.push_back(nm.tau_b);
    }
  }
  return v;
}

Xi ParamTransform::unpack(std::span<const double> v) const {
  if (v.size() != dim())
    throw std::invalid_argument("ParamTransform::unpack: wrong dimension");
  const ThetaParams theta(v[0], v[1], std::exp(cap(v[2], kLogCap)),
                          std::exp(cap(v[3], kLogCap)),
                          std::tanh(cap(v[4], kAtanhCap)));
  std::vector<CauseMechanismSpec> taus;
  const auto causes = model_causes(model_);
  std::size_t pos = 5;
  for (std::size_t rank = 0; rank < causes.size(); ++rank) {
    CauseMechanismSpec m = causes[rank].mechanism;
    if (estimated_[rank]) {
      if (auto* mc = std::get_if<Mcar>(&m)) {
        mc->p = expit(v[pos++]);
      } else if (auto* c = std::get_if<MarLogisticCentered>(&m)) {
        c->tau_a = v[pos++];
        c->tau_b = v[pos++];
      } else if (auto* a = std::get_if<MarLogisticAffine>(&m)) {
        a->tau_a = v[pos++];
        a->tau_b = v[pos++];
      } else {
        auto& nm = std::get<NmarLogisticCentered>(m);
        nm.tau_a = v[pos++];
        nm.tau_b = v[pos++];
      }
    }
    taus.push_back(std::move(m));
  }
  return Xi{theta, std::move(taus)};
}

namespace {

struct SimplexRun {
  std::vector<double> best;
  double best_value;
  bool converged;
  long iterations;
  long evaluations;
  double spread;
  double diameter;
};

// One Nelder-Mead run (maximization via standard reflect/expand/contract
// with the usual coefficients).
SimplexRun nelder_mead_run(const Objective& f, const std::vector<double>& x0,
                           const MaximizeOptions& opts) {
  const std::size_t d = x0.size();
  const std::size_t np = d + 1;
  long evals = 0;
  const auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : -HUGE_VAL;
  };

  std::vector<std::vector<double>> pts(np, x0);
  std::vector<double> vals(np);
  for (std::size_t k = 0; k < d; ++k)
    pts[k + 1][k] += opts.initial_step * (1.0 + std::abs(x0[k]));
  for (std::size_t i = 0; i < np; ++i) vals[i] = eval(pts[i]);

  const long max_iter = static_cast<long>(opts.max_iter_per_dim) *
                        static_cast<long>(std::max<std::size_t>(d, 1));
  long iter = 0;
  double spread = HUGE_VAL, diameter = HUGE_VAL;
  bool converged = false;

  std::vector<std::size_t> order(np);
  std::vector<double> centroid(d), cand(d), cand2(d);

  while (iter < max_iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });

    const double fbest = vals[order.front()];
    const double fworst = vals[order.back()];
    spread = std::isfinite(fworst) ? fbest - fworst : HUGE_VAL;
    diameter = 0.0;
    for (std::size_t i = 1; i < np; ++i)
      for (std::size_t k = 0; k < d; ++k)
        diameter = std::max(diameter, std::abs(pts[order[i]][k] -
                                               pts[order[0]][k]));
    if (spread < opts.spread_tol || diameter < opts.diameter_tol) {
      converged = true;
      break;
    }
    ++iter;

    const std::size_t worst = order.back();
    const std::size_t second = order[np - 2];
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < np; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < d; ++k) centroid[k] += pts[i][k];
    }
    for (double& c : centroid) c /= static_cast<double>(d);

    // Reflection.
    for (std::size_t k = 0; k < d; ++k)
      cand[k] = centroid[k] + (centroid[k] - pts[worst][k]);
    const double fr = eval(cand);
    if (fr > vals[order[0]]) {
      // Expansion.
      for (std::size_t k = 0; k < d; ++k)
        cand2[k] = centroid[k] + 2.0 * (centroid[k] - pts[worst][k]);
      const double fe = eval(cand2);
      if (fe > fr) {
        pts[worst] = cand2;
        vals[worst] = fe;
      } else {
        pts[worst] = cand;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr > vals[second]) {
      pts[worst] = cand;
      vals[worst] = fr;
      continue;
    }
    // Contraction (outside when the reflection improved on the worst).
    if (fr > vals[worst]) {
      for (std::size_t k = 0; k < d; ++k)
        cand2[k] = centroid[k] + 0.5 * (cand[k] - centroid[k]);
      const double fc = eval(cand2);
      if (fc >= fr) {
        pts[worst] = cand2;
        vals[worst] = fc;
        continue;
      }
    } else {
      for (std::size_t k = 0; k < d; ++k)
        cand2[k] = centroid[k] + 0.5 * (pts[worst][k] - centroid[k]);
      const double fc = eval(cand2);
      if (fc > vals[worst]) {
        pts[worst] = cand2;
        vals[worst] = fc;
        continue;
      }
    }
    // Shrink toward the best vertex.
    const std::size_t bi = order[0];
    for (std::size_t i = 0; i < np; ++i) {
      if (i == bi) continue;
      for (std::size_t k = 0; k < d; ++k)
        pts[i][k] = pts[bi][k] + 0.5 * (pts[i][k] - pts[bi][k]);
      vals[i] = eval(pts[i]);
    }
  }

  std::size_t bi = 0;
  for (std::size_t i = 1; i < np; ++i)
    if (vals[i] > vals[bi]) bi = i;
  return {pts[bi], vals[bi], converged, iter, evals, spread, diameter};
}

}  // namespace

MaximizeResult maximize(const Objective& f, std::vector<double> start,
                        const MaximizeOptions& opts) {
  if (start.empty())
    throw std::invalid_argument("maximize: empty start vector");
  if (!std::isfinite(f(start)))
    throw std::invalid_argument("maximize: objective not finite at start");

  MaximizeResult result;
  result.argmax = start;
  result.value = -HUGE_VAL;
  bool best_converged = false;

  std::vector<double> run_start = start;
  for (int run = 0; run <= opts.restarts; ++run) {
    if (run > 0) {
      // Deterministic +-10% perturbation of the best point so far, with a
      // small absolute floor for near-zero coordinates.
      run_start = result.argmax;
      for (std::size_t k = 0; k < run_start.size(); ++k) {
        const double sign = ((k + static_cast<std::size_t>(run)) % 2 == 0)
                                ? 1.0
                                : -1.0;
        run_start[k] += sign * opts.restart_scale *
                        std::max(std::abs(run_start[k]), 0.1);
      }
    }
    const SimplexRun sr = nelder_mead_run(f, run_start, opts);
    result.diag.iterations += sr.iterations;
    result.diag.evaluations += sr.evaluations;
    if (sr.best_value > result.value) {
      result.value = sr.best_value;
      result.argmax = sr.best;
      best_converged = sr.converged;
      result.diag.final_spread = sr.spread;
      result.diag.final_diameter = sr.diameter;
    }
  }
  result.diag.converged = best_converged;
  if (!best_converged)
    result.diag.message = "iteration cap reached before simplex tolerance";

  // The reported optimum never falls below the start.
  const double f0 = f(start);
  if (f0 > result.value) {
    result.value = f0;
    result.argmax = start;
  }
  return result;
}

HessianSummary hessian_probe(const Objective& f,
                             std::span<const double> point) {
  const std::size_t d = point.size();
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> h(d);
  for (std::size_t i = 0; i < d; ++i) h[i] = 1e-4 * (1.0 + std::abs(x[i]));

  const double f0 = f(x);
  Eigen::MatrixXd H(d, d);
  bool finite = std::isfinite(f0);

  const auto at = [&](std::vector<double> p) { return f(p); };

  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    const double fp = at(xp), fm = at(xm);
    H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
        (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (std::size_t j = i + 1; j < d; ++j) {
      std::vector<double> xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += h[i]; xpp[j] += h[j];
      xpm[i] += h[i]; xpm[j] -= h[j];
      xmp[i] -= h[i]; xmp[j] += h[j];
      xmm[i] -= h[i]; xmm[j] -= h[j];
      const double v =
          (at(xpp) - at(xpm) - at(xmp) + at(xmm)) / (4.0 * h[i] * h[j]);
      H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  finite = finite && H.allFinite();

  HessianSummary summary;
  summary.finite = finite;
  if (!finite) {
    summary.eigenvalues.assign(d, std::nan(""));
    summary.min_eigenvalue = summary.max_eigenvalue = std::nan("");
    summary.condition_number = std::nan("");
    return summary;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(H);
  summary.eigenvalues.assign(solver.eigenvalues().data(),
                             solver.eigenvalues().data() + d);
  summary.min_eigenvalue = summary.eigenvalues.front();
  summary.max_eigenvalue = summary.eigenvalues.back();
  double amin = HUGE_VAL, amax = 0.0;
  for (const double e : summary.eigenvalues) {
    amin = std::min(amin, std::abs(e));
    amax = std::max(amax, std::abs(e));
  }
  summary.condition_number = amin > 0.0 ? amax / amin : HUGE_VAL;
  summary.weakly_identified = amin < 1e-6;
  return summary;
}

std::vector<double> default_start(const Dataset& dataset,
                                  const ModelVariant& model,
                                  LikelihoodKind kind) {
  std::vector<double> y1o, y2o, y1all;
  std::vector<std::size_t> cause_counts(
      static_cast<std::size_t>(cause_count(model)), 0);
  std::size_t n_missing = 0;
  for (const Observation& r : dataset.records) {
    y1all.push_back(r.y1);
    if (r.m2 == 0) {
      y1o.push_back(r.y1);
      y2o.push_back(*r.y2);
    } else {
      ++n_missing;
      if (r.m2 - 1 < static_cast<int>(cause_counts.size()))
        ++cause_counts[static_cast<std::size_t>(r.m2 - 1)];
    }
  }
  const std::size_t n0 = y1o.size();
  if (n0 < 2)
    throw std::invalid_argument(
        "default_start: at least 2 complete records required");

  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
  };
  const auto sd = [&](const std::vector<double>& v, double m) {
    double s = 0.0;
    for (const double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };

  const double m1 = mean(y1o), m2 = mean(y2o);
  double s1 = sd(y1o, m1), s2 = sd(y2o, m2);
  if (s1 <= 0.0) s1 = 1.0;
  if (s2 <= 0.0) s2 = 1.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < n0; ++i) cov += (y1o[i] - m1) * (y2o[i] - m2);
  cov /= static_cast<double>(n0);
  double rho = cov / (s1 * s2);
  rho = std::clamp(rho, -0.99, 0.99);

  const double y1_spread = std::max(sd(y1all, mean(y1all)), 1e-6);
  const double y2_spread = std::max(s2, 1e-6);
  const double y1_median = median(y1all);
  const double y2_median = median(y2o);
  const double n_total = static_cast<double>(dataset.records.size());

  Xi xi{ThetaParams(m1, m2, s1, s2, rho), {}};
  const auto causes = model_causes(model);
  const bool merged = kind == LikelihoodKind::merged_full;
  for (std::size_t rank = 0; rank < causes.size(); ++rank) {
    CauseMechanismSpec mech = causes[rank].mechanism;
    if (auto* mc = std::get_if<Mcar>(&mech)) {
      // Observed cause frequency; under merged fitting the cause labels are
      // unknown, so the missing mass is split evenly across causes.
      double freq =
          merged ? static_cast<double>(n_missing) /
                       (n_total * static_cast<double>(causes.size()))
                 : static_cast<double>(
                       cause_counts[static_cast<std::size_t>(
                           causes[rank].code - 1)]) /
                       n_total;
      freq = std::clamp(freq, 1.0 / (n_total + 2.0), 1.0 - 1.0 / (n_total + 2.0));
      mc->p = freq;
    } else if (auto* c = std::get_if<MarLogisticCentered>(&mech)) {
      c->tau_a = 0.1 / y1_spread;
      c->tau_b = y1_median;
    } else if (auto* a = std::get_if<MarLogisticAffine>(&mech)) {
      a->tau_a = 0.1 / y1_spread;
      a->tau_b = -a->tau_a * y1_median;
    } else {
      auto& nm = std::get<NmarLogisticCentered>(mech);
      nm.tau_a = 0.1 / y2_spread;
      nm.tau_b = y2_median;
    }
    xi.taus.push_back(std::move(mech));
  }
  return ParamTransform(model, kind).pack(xi);
}

FitResult fit(const ModelVariant& model, LikelihoodKind kind,
              const Dataset& dataset, const FitOptions& opts) {
  const LikelihoodEvaluator evaluator(model, kind, dataset,
                                      gauss_hermite(opts.quadrature_order));
  const ParamTransform transform(model, kind);

  const Objective objective = [&](std::span<const double> v) {
    const Xi xi = transform.unpack(v);
    return evaluator(xi.theta, xi.taus);
  };

  const std::vector<double> start =
      opts.start ? *opts.start : default_start(dataset, model, kind);
  if (start.size() != transform.dim())
    throw std::invalid_argument("fit: start vector has wrong dimension");

  const MaximizeResult mr = maximize(objective, start, opts.maximize);

  FitResult result{transform.unpack(mr.argmax), mr.value, mr.diag.converged,
                   mr.diag.iterations, kind, std::nullopt, mr.diag};
  if (opts.probe) result.hessian = hessian_probe(objective, mr.argmax);
  return result;
}

}  // namespace mcmiss
