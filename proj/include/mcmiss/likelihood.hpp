#pragma once

// Bivariate-normal densities, conditional quadrature, and the observed-data
// log-likelihoods:
//
//   full        joint likelihood of outcomes and the cause-coded indicator,
//               integrating over missing y2 where a mechanism reads it
//   semi_direct full likelihood with every ignorable (MAR/MCAR) cause's own
//               probability factor deleted; hierarchical models only
//   direct      outcome density only, no mechanism terms
//   merged_full full likelihood when causes are unknown: every missing
//               record contributes f(y1) * P(missing | y1) with the cause
//               patterns marginalized out
//
// All values are natural-log scale; per-record contributions are summed in
// record order so results are reproducible.

#include <span>
#include <stdexcept>
#include <vector>

#include "mcmiss/mechanisms.hpp"
#include "mcmiss/quadrature.hpp"
#include "mcmiss/types.hpp"

namespace mcmiss {

struct structure_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class LikelihoodKind { full, semi_direct, direct, merged_full };

struct LoglikValue {
  double value = 0.0;
  LikelihoodKind kind = LikelihoodKind::full;
};

double biv_normal_logpdf(const ThetaParams& theta, double y1, double y2);

double univ_normal_logpdf(double mu, double sigma, double y);

struct ConditionalY2 {
  double mean;
  double sd;
};

// Law of y2 given y1: mean = mu2 + rho*(sigma2/sigma1)*(y1 - mu1),
// sd = sigma2*sqrt(1 - rho^2).
ConditionalY2 conditional_y2(const ThetaParams& theta, double y1);

// E[ P(mech | y2) | y1 ] under the conditional normal law, evaluated with
// the quadrature rule in the standardized variable. Constant and MAR
// mechanisms integrate exactly to their value at y1.
double expected_mech_given_y1(const CauseMechanismSpec& mech,
                              const ThetaParams& theta, double y1,
                              const QuadratureRule& quad);

// Reusable evaluator: pattern arrays are prepared once per dataset, so an
// optimizer can re-evaluate the objective cheaply. Mechanism parameters are
// supplied per call, aligned with the model's cause order.
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(ModelVariant model, LikelihoodKind kind,
                      const Dataset& dataset, QuadratureRule quad);

  double operator()(const ThetaParams& theta,
                    std::span<const CauseMechanismSpec> taus) const;

  const ModelVariant& model() const { return model_; }
  LikelihoodKind kind() const { return kind_; }

 private:
  double eval_hierarchical(const HierarchicalModel& model,
                           const ThetaParams& theta,
                           std::span<const CauseMechanismSpec> taus,
                           bool drop_ignorable) const;
  double eval_flat(const FlatModel& model, const ThetaParams& theta,
                   std::span<const CauseMechanismSpec> taus) const;
  double eval_direct(const ThetaParams& theta) const;
  double eval_merged(const ThetaParams& theta,
                     std::span<const CauseMechanismSpec> taus) const;

  ModelVariant model_;
  LikelihoodKind kind_;
  QuadratureRule quad_;

  // Complete records.
  std::vector<double> y1_obs_, y2_obs_;
  // Missing records grouped by cause pattern (index = cause code - 1).
  std::vector<std::vector<double>> y1_miss_;
  // All missing records in record order (merged likelihood).
  std::vector<double> y1_miss_all_;

  // Scratch buffers sized once; operator() is safe to call from one thread
  // at a time per evaluator instance.
  mutable std::vector<double> buf_a_, buf_b_, buf_c_, node_y2_;
};

LoglikValue full_loglik(const ModelVariant& model, const ThetaParams& theta,
                        const Dataset& dataset, const QuadratureRule& quad);

LoglikValue semi_direct_loglik(const HierarchicalModel& model,
                               const ThetaParams& theta,
                               const Dataset& dataset,
                               const QuadratureRule& quad);

LoglikValue direct_loglik(const ThetaParams& theta, const Dataset& dataset);

// Causes-unknown full likelihood; cause codes in the dataset are read only
// as missing/observed.
LoglikValue merged_full_loglik(const ModelVariant& model,
                               const ThetaParams& theta,
                               const Dataset& dataset,
                               const QuadratureRule& quad);

}  // namespace mcmiss
