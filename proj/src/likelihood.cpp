#include "mcmiss/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "mcmiss/kernels.hpp"

namespace mcmiss {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

// Affine view of one cause's probability: P = sigma(a*cov + b) with cov
// either y1 or y2, or a constant (MCAR).
struct FactorView {
  bool is_const = false;
  double const_val = 0.0;
  bool uses_y2 = false;
  double a = 0.0, b = 0.0;
};

FactorView factor_view(const CauseMechanismSpec& mech) {
  struct Visitor {
    FactorView operator()(const Mcar& m) const {
      return {true, m.p, false, 0.0, 0.0};
    }
    FactorView operator()(const MarLogisticCentered& m) const {
      return {false, 0.0, false, m.tau_a, -m.tau_a * m.tau_b};
    }
    FactorView operator()(const MarLogisticAffine& m) const {
      return {false, 0.0, false, m.tau_a, m.tau_b};
    }
    FactorView operator()(const NmarLogisticCentered& m) const {
      return {false, 0.0, true, m.tau_a, -m.tau_a * m.tau_b};
    }
  };
  return std::visit(Visitor{}, mech);
}

inline double logistic_scalar(double t) {
  if (t >= kernels::kExpOverflow) return 0.0;
  if (t <= kernels::kExpUnderflow) return 1.0;
  return 1.0 / (1.0 + std::exp(t));
}

inline double factor_at(const FactorView& f, double y1, double y2) {
  if (f.is_const) return f.const_val;
  return logistic_scalar(f.a * (f.uses_y2 ? y2 : y1) + f.b);
}

}  // namespace

double univ_normal_logpdf(double mu, double sigma, double y) {
  const double u = (y - mu) / sigma;
  return -0.5 * kLog2Pi - std::log(sigma) - 0.5 * u * u;
}

double biv_normal_logpdf(const ThetaParams& theta, double y1, double y2) {
  const double r = theta.rho();
  const double om = 1.0 - r * r;
  const double u = (y1 - theta.mu1()) / theta.sigma1();
  const double v = (y2 - theta.mu2()) / theta.sigma2();
  return -kLog2Pi - std::log(theta.sigma1()) - std::log(theta.sigma2()) -
         0.5 * std::log(om) - 0.5 / om * (u * u - 2.0 * r * u * v + v * v);
}

ConditionalY2 conditional_y2(const ThetaParams& theta, double y1) {
  const double mean = theta.mu2() + theta.rho() * (theta.sigma2() / theta.sigma1()) *
                                        (y1 - theta.mu1());
  const double sd = theta.sigma2() * std::sqrt(1.0 - theta.rho() * theta.rho());
  return {mean, sd};
}

double expected_mech_given_y1(const CauseMechanismSpec& mech,
                              const ThetaParams& theta, double y1,
                              const QuadratureRule& quad) {
  const FactorView f = factor_view(mech);
  if (f.is_const) return f.const_val;
  if (!f.uses_y2) return logistic_scalar(f.a * y1 + f.b);
  const ConditionalY2 c = conditional_y2(theta, y1);
  // sigma(a*(mean + sd*z) + b) is affine in the standardized variable z.
  return kernels::weighted_logistic_sum(f.a * c.sd, f.a * c.mean + f.b,
                                        quad.nodes, quad.weights);
}

LikelihoodEvaluator::LikelihoodEvaluator(ModelVariant model,
                                         LikelihoodKind kind,
                                         const Dataset& dataset,
                                         QuadratureRule quad)
    : model_(std::move(model)), kind_(kind), quad_(std::move(quad)) {
  if (kind_ == LikelihoodKind::semi_direct &&
      std::holds_alternative<FlatModel>(model_))
    throw structure_error(
        "semi-direct likelihood requires a hierarchical model");

  const int model_c = cause_count(model_);
  const ValidationReport report = validate_dataset(dataset);
  if (!report.valid())
    throw std::invalid_argument("LikelihoodEvaluator: invalid dataset (" +
                                report.issues.front().message + ")");
  if (kind_ != LikelihoodKind::direct && dataset.cause_count > model_c)
    throw std::invalid_argument(
        "LikelihoodEvaluator: dataset declares more causes than the model");

  y1_miss_.resize(static_cast<std::size_t>(std::max(model_c, dataset.cause_count)));
  for (const Observation& r : dataset.records) {
    if (r.m2 == 0) {
      y1_obs_.push_back(r.y1);
      y2_obs_.push_back(*r.y2);
    } else {
      y1_miss_[static_cast<std::size_t>(r.m2 - 1)].push_back(r.y1);
      y1_miss_all_.push_back(r.y1);
    }
  }

  std::size_t maxn = std::max(y1_obs_.size(), y1_miss_all_.size());
  for (const auto& v : y1_miss_) maxn = std::max(maxn, v.size());
  buf_a_.resize(maxn);
  buf_b_.resize(maxn);
  buf_c_.resize(maxn);
  node_y2_.resize(quad_.nodes.size());
}

double LikelihoodEvaluator::operator()(
    const ThetaParams& theta, std::span<const CauseMechanismSpec> taus) const {
  const int model_c = cause_count(model_);
  if (static_cast<int>(taus.size()) != model_c)
    throw std::invalid_argument(
        "LikelihoodEvaluator: tau count does not match the model");
  switch (kind_) {
    case LikelihoodKind::direct:
      return eval_direct(theta);
    case LikelihoodKind::merged_full:
      return eval_merged(theta, taus);
    case LikelihoodKind::semi_direct:
      return eval_hierarchical(std::get<HierarchicalModel>(model_), theta,
                               taus, /*drop_ignorable=*/true);
    case LikelihoodKind::full:
      if (const auto* h = std::get_if<HierarchicalModel>(&model_))
        return eval_hierarchical(*h, theta, taus, /*drop_ignorable=*/false);
      return eval_flat(std::get<FlatModel>(model_), theta, taus);
  }
  return 0.0;
}

double LikelihoodEvaluator::eval_hierarchical(
    const HierarchicalModel& model, const ThetaParams& theta,
    std::span<const CauseMechanismSpec> taus, bool drop_ignorable) const {
  const double r = theta.rho();
  const double om = 1.0 - r * r;
  const double s1 = theta.sigma1(), s2 = theta.sigma2();
  const double cs = s2 * std::sqrt(om);
  const double cond_slope = r * s2 / s1;
  const double logc2 = -kLog2Pi - std::log(s1) - std::log(s2) - 0.5 * std::log(om);
  const double logc1 = -0.5 * kLog2Pi - std::log(s1);

  const auto causes = model.causes();
  // taus are aligned with the model's priority order.
  const auto is_ignorable = [&](std::size_t rank) {
    return classify_mechanism(taus[rank]) != MechanismClass::nmar;
  };

  double loglik = 0.0;

  // Pattern 0: log(observe probability) + joint log-density.
  const std::size_t n0 = y1_obs_.size();
  if (n0 > 0) {
    std::span<double> survival(buf_a_.data(), n0);
    for (double& s : survival) s = 1.0;
    std::span<double> probs(buf_b_.data(), n0);
    for (std::size_t rank = 0; rank < causes.size(); ++rank) {
      if (drop_ignorable && is_ignorable(rank)) continue;
      const FactorView f = factor_view(taus[rank]);
      if (f.is_const) {
        for (std::size_t i = 0; i < n0; ++i) survival[i] *= 1.0 - f.const_val;
      } else {
        // 1 - sigma(t) = sigma(-t)
        kernels::logistic_affine_batch(
            -f.a, -f.b,
            f.uses_y2 ? std::span<const double>(y2_obs_)
                      : std::span<const double>(y1_obs_),
            probs);
        for (std::size_t i = 0; i < n0; ++i) survival[i] *= probs[i];
      }
    }
    for (std::size_t i = 0; i < n0; ++i) {
      const double u = (y1_obs_[i] - theta.mu1()) / s1;
      const double v = (y2_obs_[i] - theta.mu2()) / s2;
      const double lpdf = logc2 - 0.5 / om * (u * u - 2.0 * r * u * v + v * v);
      loglik += std::log(clamp_prob(survival[i])) + lpdf;
    }
  }

  // Missing patterns, in cause-code order. Each record contributes
  //   log f(y1) + log( A(y1) * E[ B(Y2) | y1 ] )
  // where A collects the y1-only factors of the pattern probability and B
  // the y2-dependent ones.
  for (std::size_t rank = 0; rank < causes.size(); ++rank) {
    const CauseEntry& entry = causes[rank];
    const auto& y1s = y1_miss_[static_cast<std::size_t>(entry.code - 1)];
    const std::size_t np = y1s.size();
    if (np == 0) continue;

    // Collect the pattern's factors: the firing probability of this cause
    // plus the survival factors of every stronger cause. negate = survival.
    struct PatternFactor {
      FactorView view;
      bool negate;
    };
    std::vector<PatternFactor> factors;
    if (!(drop_ignorable && is_ignorable(rank)))
      factors.push_back({factor_view(taus[rank]), false});
    for (std::size_t b = 0; b < rank; ++b) {
      if (drop_ignorable && is_ignorable(b)) continue;
      factors.push_back({factor_view(taus[b]), true});
    }

    std::span<double> amul(buf_a_.data(), np);
    for (double& a : amul) a = 1.0;
    std::span<double> probs(buf_b_.data(), np);
    bool any_y2 = false;
    for (const PatternFactor& pf : factors) {
      if (pf.view.uses_y2 && !pf.view.is_const) {
        any_y2 = true;
        continue;
      }
      if (pf.view.is_const) {
        const double v = pf.negate ? 1.0 - pf.view.const_val : pf.view.const_val;
        for (std::size_t i = 0; i < np; ++i) amul[i] *= v;
      } else {
        const double sgn = pf.negate ? -1.0 : 1.0;
        kernels::logistic_affine_batch(sgn * pf.view.a, sgn * pf.view.b,
                                       std::span<const double>(y1s), probs);
        for (std::size_t i = 0; i < np; ++i) amul[i] *= probs[i];
      }
    }

    for (std::size_t i = 0; i < np; ++i) {
      const double u = (y1s[i] - theta.mu1()) / s1;
      loglik += logc1 - 0.5 * u * u;

      double term = amul[i];
      if (any_y2) {
        const double cm = theta.mu2() + cond_slope * (y1s[i] - theta.mu1());
        term *= [&] {
          // Fast path: a single y2 factor reduces to one fused kernel call.
          const PatternFactor* single = nullptr;
          int count = 0;
          for (const PatternFactor& pf : factors)
            if (pf.view.uses_y2 && !pf.view.is_const) {
              single = &pf;
              ++count;
            }
          if (count == 1) {
            const double sgn = single->negate ? -1.0 : 1.0;
            return kernels::weighted_logistic_sum(
                sgn * single->view.a * cs,
                sgn * (single->view.a * cm + single->view.b), quad_.nodes,
                quad_.weights);
          }
          // General path: product of y2 factors over the node grid.
          const std::size_t nq = quad_.nodes.size();
          for (std::size_t j = 0; j < nq; ++j)
            node_y2_[j] = cm + cs * quad_.nodes[j];
          std::span<double> acc(buf_c_.data(), nq);
          for (double& v : acc) v = 1.0;
          std::vector<double> tmp(nq);
          for (const PatternFactor& pf : factors) {
            if (!pf.view.uses_y2 || pf.view.is_const) continue;
            const double sgn = pf.negate ? -1.0 : 1.0;
            kernels::logistic_affine_batch(sgn * pf.view.a, sgn * pf.view.b,
                                           node_y2_, tmp);
            for (std::size_t j = 0; j < nq; ++j) acc[j] *= tmp[j];
          }
          return kernels::dot(quad_.weights, acc);
        }();
      }
      loglik += std::log(clamp_prob(term));
    }
  }
  return loglik;
}

double LikelihoodEvaluator::eval_flat(
    const FlatModel& model, const ThetaParams& theta,
    std::span<const CauseMechanismSpec> taus) const {
  const double r = theta.rho();
  const double om = 1.0 - r * r;
  const double s1 = theta.sigma1(), s2 = theta.sigma2();
  const double cs = s2 * std::sqrt(om);
  const double cond_slope = r * s2 / s1;
  const double logc2 = -kLog2Pi - std::log(s1) - std::log(s2) - 0.5 * std::log(om);
  const double logc1 = -0.5 * kLog2Pi - std::log(s1);

  const auto causes = model.causes();
  double loglik = 0.0;

  // Pattern 0: observe probability is the complement of the cause sum;
  // validity is checked at each observed point.
  const std::size_t n0 = y1_obs_.size();
  if (n0 > 0) {
    std::span<double> total(buf_a_.data(), n0);
    for (double& t : total) t = 0.0;
    std::span<double> probs(buf_b_.data(), n0);
    for (std::size_t rank = 0; rank < causes.size(); ++rank) {
      const FactorView f = factor_view(taus[rank]);
      if (f.is_const) {
        for (std::size_t i = 0; i < n0; ++i) total[i] += f.const_val;
      } else {
        kernels::logistic_affine_batch(
            f.a, f.b,
            f.uses_y2 ? std::span<const double>(y2_obs_)
                      : std::span<const double>(y1_obs_),
            probs);
        for (std::size_t i = 0; i < n0; ++i) total[i] += probs[i];
      }
    }
    for (std::size_t i = 0; i < n0; ++i) {
      if (total[i] >= 1.0)
        throw flat_model_error(
            "full_loglik: flat-model cause probabilities sum to >= 1 at an "
            "observed record");
      const double u = (y1_obs_[i] - theta.mu1()) / s1;
      const double v = (y2_obs_[i] - theta.mu2()) / s2;
      const double lpdf = logc2 - 0.5 / om * (u * u - 2.0 * r * u * v + v * v);
      loglik += std::log(clamp_prob(1.0 - total[i])) + lpdf;
    }
  }

  // Missing pattern l: P_l(y1) f(y1) for MAR causes, f(y1) E[P_l | y1] for
  // NMAR causes.
  for (std::size_t rank = 0; rank < causes.size(); ++rank) {
    const CauseEntry& entry = causes[rank];
    const auto& y1s = y1_miss_[static_cast<std::size_t>(entry.code - 1)];
    if (y1s.empty()) continue;
    const FactorView f = factor_view(taus[rank]);
    for (const double y1 : y1s) {
      const double u = (y1 - theta.mu1()) / s1;
      loglik += logc1 - 0.5 * u * u;
      double p;
      if (f.is_const) {
        p = f.const_val;
      } else if (!f.uses_y2) {
        p = logistic_scalar(f.a * y1 + f.b);
      } else {
        const double cm = theta.mu2() + cond_slope * (y1 - theta.mu1());
        p = kernels::weighted_logistic_sum(f.a * cs, f.a * cm + f.b,
                                           quad_.nodes, quad_.weights);
      }
      loglik += std::log(clamp_prob(p));
    }
  }
  return loglik;
}

double LikelihoodEvaluator::eval_direct(const ThetaParams& theta) const {
  double loglik = 0.0;
  for (std::size_t i = 0; i < y1_obs_.size(); ++i)
    loglik += biv_normal_logpdf(theta, y1_obs_[i], y2_obs_[i]);
  for (const double y1 : y1_miss_all_)
    loglik += univ_normal_logpdf(theta.mu1(), theta.sigma1(), y1);
  return loglik;
}

double LikelihoodEvaluator::eval_merged(
    const ThetaParams& theta, std::span<const CauseMechanismSpec> taus) const {
  const double r = theta.rho();
  const double om = 1.0 - r * r;
  const double s1 = theta.sigma1(), s2 = theta.sigma2();
  const double cs = s2 * std::sqrt(om);
  const double cond_slope = r * s2 / s1;
  const double logc1 = -0.5 * kLog2Pi - std::log(s1);

  const bool hierarchical = std::holds_alternative<HierarchicalModel>(model_);
  const auto causes = model_causes(model_);

  double loglik = 0.0;

  // Observed records: identical to the cause-coded full likelihood.
  const std::size_t n0 = y1_obs_.size();
  if (n0 > 0) {
    for (std::size_t i = 0; i < n0; ++i) {
      const double y1 = y1_obs_[i], y2 = y2_obs_[i];
      double observe;
      if (hierarchical) {
        observe = 1.0;
        for (std::size_t rank = 0; rank < causes.size(); ++rank)
          observe *= 1.0 - factor_at(factor_view(taus[rank]), y1, y2);
      } else {
        double total = 0.0;
        for (std::size_t rank = 0; rank < causes.size(); ++rank)
          total += factor_at(factor_view(taus[rank]), y1, y2);
        if (total >= 1.0)
          throw flat_model_error(
              "merged_full_loglik: flat-model cause probabilities sum to >= "
              "1 at an observed record");
        observe = 1.0 - total;
      }
      loglik += std::log(clamp_prob(observe)) +
                biv_normal_logpdf(theta, y1, y2);
    }
  }

  // Missing records (cause unknown): f(y1) * (1 - E[observe | y1]).
  for (const double y1 : y1_miss_all_) {
    const double u = (y1 - theta.mu1()) / s1;
    loglik += logc1 - 0.5 * u * u;

    const double cm = theta.mu2() + cond_slope * (y1 - theta.mu1());
    double e_observe;
    if (hierarchical) {
      // E[prod_c (1 - P_c) | y1]: y1-only survival factors scale the
      // conditional expectation of the y2-dependent ones.
      double a_part = 1.0;
      int n_y2 = 0;
      const FactorView* single = nullptr;
      std::vector<FactorView> views;
      views.reserve(causes.size());
      for (std::size_t rank = 0; rank < causes.size(); ++rank) {
        views.push_back(factor_view(taus[rank]));
        const FactorView& f = views.back();
        if (f.is_const)
          a_part *= 1.0 - f.const_val;
        else if (!f.uses_y2)
          a_part *= logistic_scalar(-(f.a * y1 + f.b));
        else {
          ++n_y2;
          single = &views.back();
        }
      }
      if (n_y2 == 0) {
        e_observe = a_part;
      } else if (n_y2 == 1) {
        e_observe = a_part * kernels::weighted_logistic_sum(
                                 -single->a * cs, -(single->a * cm + single->b),
                                 quad_.nodes, quad_.weights);
      } else {
        const std::size_t nq = quad_.nodes.size();
        for (std::size_t j = 0; j < nq; ++j)
          node_y2_[j] = cm + cs * quad_.nodes[j];
        std::span<double> acc(buf_c_.data(), nq);
        for (double& v : acc) v = 1.0;
        std::vector<double> tmp(nq);
        for (const FactorView& f : views) {
          if (!f.uses_y2 || f.is_const) continue;
          kernels::logistic_affine_batch(-f.a, -f.b, node_y2_, tmp);
          for (std::size_t j = 0; j < nq; ++j) acc[j] *= tmp[j];
        }
        e_observe = a_part * kernels::dot(quad_.weights, acc);
      }
    } else {
      // Flat model: E[1 - sum_c P_c | y1].
      double total = 0.0;
      for (std::size_t rank = 0; rank < causes.size(); ++rank) {
        const FactorView f = factor_view(taus[rank]);
        if (f.is_const)
          total += f.const_val;
        else if (!f.uses_y2)
          total += logistic_scalar(f.a * y1 + f.b);
        else
          total += kernels::weighted_logistic_sum(
              f.a * cs, f.a * cm + f.b, quad_.nodes, quad_.weights);
      }
      if (total >= 1.0)
        throw flat_model_error(
            "merged_full_loglik: flat-model cause probabilities integrate to "
            ">= 1 at a missing record");
      e_observe = 1.0 - total;
    }
    loglik += std::log(clamp_prob(1.0 - e_observe));
  }
  return loglik;
}

namespace {

LoglikValue eval_once(const ModelVariant& model, LikelihoodKind kind,
                      const ThetaParams& theta, const Dataset& dataset,
                      const QuadratureRule& quad,
                      std::span<const CauseMechanismSpec> taus) {
  const LikelihoodEvaluator eval(model, kind, dataset, quad);
  return {eval(theta, taus), kind};
}

std::vector<CauseMechanismSpec> model_taus(const ModelVariant& model) {
  std::vector<CauseMechanismSpec> taus;
  for (const CauseEntry& e : model_causes(model)) taus.push_back(e.mechanism);
  return taus;
}

}  // namespace

LoglikValue full_loglik(const ModelVariant& model, const ThetaParams& theta,
                        const Dataset& dataset, const QuadratureRule& quad) {
  return eval_once(model, LikelihoodKind::full, theta, dataset, quad,
                   model_taus(model));
}

LoglikValue semi_direct_loglik(const HierarchicalModel& model,
                               const ThetaParams& theta,
                               const Dataset& dataset,
                               const QuadratureRule& quad) {
  return eval_once(ModelVariant(model), LikelihoodKind::semi_direct, theta,
                   dataset, quad, model_taus(ModelVariant(model)));
}

LoglikValue direct_loglik(const ThetaParams& theta, const Dataset& dataset) {
  // The mechanism model is irrelevant for the direct likelihood; a trivial
  // placeholder keeps the evaluator interface uniform.
  const HierarchicalModel placeholder{std::vector<CauseEntry>{}};
  const QuadratureRule quad = gauss_hermite(1);
  const LikelihoodEvaluator eval(ModelVariant(placeholder),
                                 LikelihoodKind::direct, dataset, quad);
  return {eval(theta, {}), LikelihoodKind::direct};
}

LoglikValue merged_full_loglik(const ModelVariant& model,
                               const ThetaParams& theta,
                               const Dataset& dataset,
                               const QuadratureRule& quad) {
  return eval_once(model, LikelihoodKind::merged_full, theta, dataset, quad,
                   model_taus(model));
}

}  // namespace mcmiss
