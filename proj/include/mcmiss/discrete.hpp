#pragma once

// Exact enumeration on small finite outcome models, used to verify the
// ignorability propositions and the PMAR factorization independently of
// quadrature and optimization. Argmax comparisons use expected (population)
// log-likelihoods so verdicts carry no sampling noise.

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcmiss/types.hpp"

namespace mcmiss::discrete {

// Log-linear pmf on a small grid:
//   pmf(i, j; t) = exp(t0*u_i + t1*v_j + t2*u_i*v_j) / Z(t)
// with u, v the support points. Nonnegative and normalized for every t.
class GridOutcomeModel {
 public:
  GridOutcomeModel(std::vector<double> y1_support,
                   std::vector<double> y2_support);

  std::size_t n1() const { return y1_.size(); }
  std::size_t n2() const { return y2_.size(); }
  double y1(std::size_t i) const { return y1_[i]; }
  double y2(std::size_t j) const { return y2_[j]; }

  // Row-major (i * n2 + j) pmf table for parameters t = (t0, t1, t2).
  std::vector<double> pmf(std::span<const double> theta_d) const;

 private:
  std::vector<double> y1_, y2_;
};

// Missingness table P(M2 = l | y1_i, y2_j) for l in 0..C.
struct DiscreteMechanism {
  // probs[l][i * n2 + j]
  std::vector<std::vector<double>> probs;
  int cause_count() const { return static_cast<int>(probs.size()) - 1; }

  // Materialize a table from a continuous-style mechanism model evaluated at
  // the support points.
  static DiscreteMechanism from_model(const ModelVariant& model,
                                      const GridOutcomeModel& grid);
};

// A coarse observed record: y1 index, y2 index when observed, pattern l.
struct DiscreteRecord {
  std::size_t i1;
  std::optional<std::size_t> i2;
  int pattern;
};

// Exact observed-data log-likelihood: missing y2 is summed out over the
// support. Throws when a record is off-support or inconsistent.
double exact_loglik(const GridOutcomeModel& grid,
                    std::span<const double> theta_d,
                    const DiscreteMechanism& mech,
                    std::span<const DiscreteRecord> records);

struct GridArgmax {
  std::vector<double> point;
  double value;
  bool tie = false;  // another grid point attains the same value
};

// Exhaustive maximization over a cartesian grid (axes = per-dimension
// candidate values); ties are broken lexicographically and flagged.
GridArgmax argmax_grid(
    const std::function<double(std::span<const double>)>& objective,
    std::span<const std::vector<double>> axes);

struct PropertyVerdict {
  std::string proposition;
  bool holds = false;
  double max_deviation = 0.0;
  // For counterexample propositions: the argmax shift and the point found.
  std::map<std::string, double> witness;
  std::string detail;
};

// id in {"1", "2", "3", "4", "pmar"}; default study configurations.
// Expected polarity: 1, 3, pmar hold; 2 and 4 produce counterexamples.
PropertyVerdict check_proposition(const std::string& id);

}  // namespace mcmiss::discrete
