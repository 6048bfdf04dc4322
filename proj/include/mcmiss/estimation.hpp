#pragma once

// Maximum-likelihood fitting: parameter transforms to an unconstrained
// space, a derivative-free simplex maximizer with deterministic restarts,
// and a finite-difference Hessian probe for identifiability diagnostics.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcmiss/likelihood.hpp"
#include "mcmiss/types.hpp"

namespace mcmiss {

using Objective = std::function<double(std::span<const double>)>;

// Free-space coordinates: means unconstrained, sigma via log, rho via
// atanh, MCAR p via logit, logistic slopes/intercepts unconstrained.
// Which mechanism parameters are free depends on the likelihood kind:
// full/merged estimate every cause's parameters, semi_direct only the
// non-ignorable (NMAR) causes', direct none.
class ParamTransform {
 public:
  ParamTransform(const ModelVariant& model, LikelihoodKind kind);

  std::size_t dim() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  std::vector<double> pack(const Xi& xi) const;
  Xi unpack(std::span<const double> v) const;

  // True when the cause's parameters are part of the free vector.
  bool cause_estimated(std::size_t rank) const { return estimated_[rank]; }

 private:
  ModelVariant model_;
  LikelihoodKind kind_;
  std::vector<std::string> names_;
  std::vector<bool> estimated_;  // per cause rank
};

struct MaximizeOptions {
  double spread_tol = 1e-10;    // on function values across the simplex
  double diameter_tol = 1e-8;   // on the simplex extent
  int max_iter_per_dim = 5000;  // per run
  int restarts = 3;             // deterministic +-10% perturbed restarts
  double restart_scale = 0.10;
  double initial_step = 0.05;
};

struct MaximizeDiagnostics {
  bool converged = false;  // the run producing the best point met tolerance
  long iterations = 0;     // total across runs
  long evaluations = 0;
  double final_spread = 0.0;
  double final_diameter = 0.0;
  std::string message;
};

struct MaximizeResult {
  std::vector<double> argmax;
  double value = 0.0;
  MaximizeDiagnostics diag;
};

// Nelder-Mead ascent. Deterministic for fixed inputs; throws
// std::invalid_argument when the objective is not finite at the start.
MaximizeResult maximize(const Objective& f, std::vector<double> start,
                        const MaximizeOptions& opts = {});

struct HessianSummary {
  std::vector<double> eigenvalues;  // ascending
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double condition_number = 0.0;  // max|l| / min|l|
  bool finite = true;
  // min |eigenvalue| below 1e-6 signals a numerically flat direction.
  bool weakly_identified = false;
};

// Central-finite-difference Hessian with step h_i = 1e-4 * (1 + |x_i|).
HessianSummary hessian_probe(const Objective& f, std::span<const double> point);

struct FitOptions {
  MaximizeOptions maximize;
  bool probe = false;
  int quadrature_order = kDefaultQuadratureOrder;
  // Optional explicit start in transformed coordinates (defaults to
  // moment-based starting values).
  std::optional<std::vector<double>> start;
};

struct FitResult {
  Xi xi_hat;
  double loglik = 0.0;
  bool converged = false;
  long iterations = 0;
  LikelihoodKind kind = LikelihoodKind::full;
  std::optional<HessianSummary> hessian;
  MaximizeDiagnostics diag;
};

// Moment-based starting values in transformed coordinates: theta from
// complete-case moments, logistic slopes 0.1 scaled by the covariate
// spread, midpoints at the covariate median, MCAR p at the observed cause
// frequency. Throws std::invalid_argument with fewer than 2 complete
// records.
std::vector<double> default_start(const Dataset& dataset,
                                  const ModelVariant& model,
                                  LikelihoodKind kind);

FitResult fit(const ModelVariant& model, LikelihoodKind kind,
              const Dataset& dataset, const FitOptions& opts = {});

}  // namespace mcmiss
