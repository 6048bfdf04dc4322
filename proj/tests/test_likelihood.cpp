#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mcmiss/likelihood.hpp"
#include "mcmiss/simulation.hpp"

using namespace mcmiss;

namespace {

const ThetaParams kTruth(50.0, 50.0, 15.0, 15.0, 0.6);

HierarchicalModel study_model() {
  return HierarchicalModel{
      {{1, Mcar{0.25}}, {2, NmarLogisticCentered{1.0 / 7.0, 50.0}}}};
}

double normal_pdf(double mu, double sd, double y) {
  const double u = (y - mu) / sd;
  return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * 3.14159265358979323846));
}

// Test-side oracle: trapezoid integration of P(mech | y2) f(y2 | y1) over
// mean +- 10 sd with 10^4 points.
double trapezoid_expected(const CauseMechanismSpec& mech,
                          const ThetaParams& theta, double y1) {
  const ConditionalY2 c = conditional_y2(theta, y1);
  const int n = 10000;
  const double lo = c.mean - 10.0 * c.sd, hi = c.mean + 10.0 * c.sd;
  const double h = (hi - lo) / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y2 = lo + h * static_cast<double>(i);
    const double f = cause_prob(mech, y1, y2) * normal_pdf(c.mean, c.sd, y2);
    acc += (i == 0 || i == n - 1) ? 0.5 * f : f;
  }
  return acc * h;
}

}  // namespace

TEST_CASE("bivariate normal log-density at the mean (frozen oracle value)") {
  // -log(2 pi s1 s2 sqrt(1-rho^2)) evaluated in extended precision.
  CHECK(biv_normal_logpdf(kTruth, 50.0, 50.0) ==
        doctest::Approx(-7.030833917299556).epsilon(1e-12));
}

TEST_CASE("independence factorization at rho = 0") {
  const ThetaParams t(1.0, -2.0, 3.0, 4.0, 0.0);
  for (const auto [y1, y2] : {std::pair{1.0, -2.0}, {4.0, 0.5}, {-7.0, 3.0}}) {
    const double joint = biv_normal_logpdf(t, y1, y2);
    const double split = univ_normal_logpdf(1.0, 3.0, y1) +
                         univ_normal_logpdf(-2.0, 4.0, y2);
    CHECK(joint == doctest::Approx(split).epsilon(1e-14));
  }
}

TEST_CASE("translation invariance of the joint density") {
  const double base = biv_normal_logpdf(kTruth, 47.0, 55.0);
  const ThetaParams shifted(57.0, 57.0, 15.0, 15.0, 0.6);
  CHECK(biv_normal_logpdf(shifted, 54.0, 62.0) ==
        doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("conditional law of y2 given y1") {
  const ConditionalY2 c = conditional_y2(kTruth, 65.0);
  CHECK(c.mean == doctest::Approx(59.0).epsilon(1e-14));
  CHECK(c.sd == doctest::Approx(12.0).epsilon(1e-14));
  const ThetaParams indep(3.0, 7.0, 2.0, 5.0, 0.0);
  const ConditionalY2 ci = conditional_y2(indep, -4.0);
  CHECK(ci.mean == 7.0);
  CHECK(ci.sd == 5.0);
  CHECK(conditional_y2(kTruth, 50.0).mean == doctest::Approx(50.0));
}

TEST_CASE("expected mechanism: NMAR midpoint at the conditional mean gives 1/2") {
  const QuadratureRule quad = gauss_hermite(40);
  // y1 = 50 so the conditional mean is 50 = tau_b.
  CHECK(expected_mech_given_y1(NmarLogisticCentered{1.0 / 7.0, 50.0}, kTruth,
                               50.0, quad) ==
        doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("expected mechanism: constants integrate to themselves") {
  const QuadratureRule quad = gauss_hermite(40);
  CHECK(expected_mech_given_y1(Mcar{0.3}, kTruth, 12.0, quad) == 0.3);
  // MAR mechanisms integrate to their value at y1.
  CHECK(expected_mech_given_y1(MarLogisticCentered{0.5, 53.0}, kTruth, 53.0,
                               quad) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("expected mechanism matches the trapezoid oracle (frozen value)") {
  const QuadratureRule quad = gauss_hermite(40);
  const CauseMechanismSpec mech = NmarLogisticCentered{1.0 / 7.0, 50.0};
  const double got = expected_mech_given_y1(mech, kTruth, 65.0, quad);
  // Trapezoid oracle over mean +- 10 sd, 10^4 points: 0.29766014496591586.
  CHECK(got == doctest::Approx(0.2976601449659159).epsilon(3e-8));
  CHECK(std::abs(got - trapezoid_expected(mech, kTruth, 65.0)) < 1e-8);
}

TEST_CASE("quadrature convergence: order 40 agrees with order 80") {
  const QuadratureRule q40 = gauss_hermite(40);
  const QuadratureRule q80 = gauss_hermite(80);
  std::mt19937_64 eng(31);
  std::uniform_real_distribution<double> mu(30.0, 70.0);
  std::uniform_real_distribution<double> sig(8.0, 16.0);
  std::uniform_real_distribution<double> rho(-0.85, 0.85);
  std::uniform_real_distribution<double> scaled_slope(0.05, 1.65);
  std::uniform_real_distribution<double> mid(30.0, 70.0);
  std::uniform_real_distribution<double> y1d(20.0, 80.0);
  std::uniform_int_distribution<int> sign(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const ThetaParams theta(mu(eng), mu(eng), sig(eng), sig(eng), rho(eng));
    const double y1 = y1d(eng);
    const double cond_sd = conditional_y2(theta, y1).sd;
    const double a = (sign(eng) ? 1.0 : -1.0) * scaled_slope(eng) / cond_sd;
    const CauseMechanismSpec mech = NmarLogisticCentered{a, mid(eng)};
    const double e40 = expected_mech_given_y1(mech, theta, y1, q40);
    const double e80 = expected_mech_given_y1(mech, theta, y1, q80);
    CHECK(std::abs(e40 - e80) < 1e-10);
    CHECK(e40 >= 0.0);
    CHECK(e40 <= 1.0);
  }
}

TEST_CASE("full likelihood of a single MCAR-missing record (frozen value)") {
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({50.0, std::nullopt, 1});
  const QuadratureRule quad = gauss_hermite(40);
  // log 0.25 + log f_Y1(50) = log 0.25 - log(15 sqrt(2 pi)).
  CHECK(full_loglik(ModelVariant(study_model()), kTruth, d, quad).value ==
        doctest::Approx(-5.0132830954267735).epsilon(1e-12));
}

TEST_CASE("complete record under a no-missingness limit reduces to the joint density") {
  const HierarchicalModel model{{{1, MarLogisticCentered{1.0, -1e9}},
                                 {2, MarLogisticCentered{1.0, -1e9}}}};
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({47.0, 58.0, 0});
  const QuadratureRule quad = gauss_hermite(40);
  CHECK(full_loglik(ModelVariant(model), kTruth, d, quad).value ==
        doctest::Approx(biv_normal_logpdf(kTruth, 47.0, 58.0)).epsilon(1e-12));
}

TEST_CASE("full likelihood matches dense enumeration on a mixed-pattern dataset") {
  // Independent oracle: each record's contribution evaluated directly, the
  // NMAR integral by a dense midpoint sum over the conditional support.
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({47.0, 58.0, 0});
  d.records.push_back({55.0, std::nullopt, 1});
  d.records.push_back({61.0, std::nullopt, 2});
  const HierarchicalModel model = study_model();
  const QuadratureRule quad = gauss_hermite(40);
  const double got = full_loglik(ModelVariant(model), kTruth, d, quad).value;

  const auto p1 = [](double) { return 0.25; };
  const auto p2 = [](double y2) {
    return 1.0 / (1.0 + std::exp((y2 - 50.0) / 7.0));
  };
  double expected = 0.0;
  expected += std::log((1.0 - p1(47.0)) * (1.0 - p2(58.0))) +
              biv_normal_logpdf(kTruth, 47.0, 58.0);
  expected += std::log(p1(55.0)) + univ_normal_logpdf(50.0, 15.0, 55.0);
  {
    const ConditionalY2 c = conditional_y2(kTruth, 61.0);
    const int n = 40000;
    const double lo = c.mean - 12.0 * c.sd, hi = c.mean + 12.0 * c.sd;
    const double h = (hi - lo) / n;
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
      const double y2 = lo + h * (static_cast<double>(i) + 0.5);
      integral += p2(y2) * normal_pdf(c.mean, c.sd, y2);
    }
    integral *= h;
    expected += std::log((1.0 - p1(61.0)) * integral) +
                univ_normal_logpdf(50.0, 15.0, 61.0);
  }
  CHECK(got == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("semi-direct likelihood of a single pattern-1 record (frozen value)") {
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({50.0, std::nullopt, 1});
  const QuadratureRule quad = gauss_hermite(40);
  // log f_Y1(50) = -log(15 sqrt(2 pi)).
  CHECK(semi_direct_loglik(study_model(), kTruth, d, quad).value ==
        doctest::Approx(-3.6269887343068827).epsilon(1e-12));
}

TEST_CASE("FL minus SDL is constant in (theta, tau2) with tau1 fixed") {
  RandomStream stream(314);
  const auto gen = simulate_dataset(kTruth, study_model(), 80, stream);
  const QuadratureRule quad = gauss_hermite(40);
  const LikelihoodEvaluator fl(ModelVariant(study_model()),
                               LikelihoodKind::full, gen.data, quad);
  const LikelihoodEvaluator sdl(ModelVariant(study_model()),
                                LikelihoodKind::semi_direct, gen.data, quad);

  double ref = 0.0;
  bool have_ref = false;
  double max_dev = 0.0;
  for (const double mu2 : {40.0, 50.0, 60.0})
    for (const double sigma2 : {10.0, 15.0})
      for (const double rho : {0.2, 0.6})
        for (const double t2a : {0.05, 0.2})
          for (const double t2b : {45.0, 55.0}) {
            const ThetaParams theta(50.0, mu2, 15.0, sigma2, rho);
            const std::vector<CauseMechanismSpec> taus = {
                Mcar{0.25}, NmarLogisticCentered{t2a, t2b}};
            const double diff = fl(theta, taus) - sdl(theta, taus);
            if (!have_ref) {
              ref = diff;
              have_ref = true;
            }
            max_dev = std::max(max_dev, std::abs(diff - ref));
          }
  CHECK(max_dev < 1e-9);
}

TEST_CASE("single observed record: FL minus SDL equals log 0.75 (frozen value)") {
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({50.0, 52.0, 0});
  const QuadratureRule quad = gauss_hermite(40);
  const double fl = full_loglik(ModelVariant(study_model()), kTruth, d, quad).value;
  const double sdl = semi_direct_loglik(study_model(), kTruth, d, quad).value;
  CHECK(fl - sdl == doctest::Approx(-0.2876820724517809).epsilon(1e-12));
}

TEST_CASE("all-MCAR full likelihood differs from the direct one by a theta-free constant") {
  const HierarchicalModel model{{{1, Mcar{0.25}}, {2, Mcar{0.4}}}};
  RandomStream stream(99);
  const auto gen = simulate_dataset(kTruth, model, 60, stream);
  const QuadratureRule quad = gauss_hermite(40);

  double ref = 0.0;
  bool have_ref = false;
  for (const double mu2 : {42.0, 50.0, 58.0})
    for (const double rho : {0.1, 0.6}) {
      const ThetaParams theta(50.0, mu2, 15.0, 15.0, rho);
      const double fl =
          full_loglik(ModelVariant(model), theta, gen.data, quad).value;
      const double dl = direct_loglik(theta, gen.data).value;
      if (!have_ref) {
        ref = fl - dl;
        have_ref = true;
      }
      CHECK(fl - dl == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("direct likelihood definitions") {
  Dataset complete;
  complete.cause_count = 2;
  complete.records.push_back({47.0, 52.0, 0});
  CHECK(direct_loglik(kTruth, complete).value ==
        doctest::Approx(biv_normal_logpdf(kTruth, 47.0, 52.0)).epsilon(1e-14));

  // Pattern-1 and pattern-2 records with equal y1 contribute identically.
  Dataset miss1, miss2;
  miss1.cause_count = miss2.cause_count = 2;
  miss1.records.push_back({63.0, std::nullopt, 1});
  miss2.records.push_back({63.0, std::nullopt, 2});
  CHECK(direct_loglik(kTruth, miss1).value ==
        direct_loglik(kTruth, miss2).value);

  // An all-missing dataset reduces to the y1 marginal.
  Dataset marg;
  marg.cause_count = 2;
  double expected = 0.0;
  for (const double y1 : {40.0, 50.0, 66.0}) {
    marg.records.push_back({y1, std::nullopt, 1});
    expected += univ_normal_logpdf(50.0, 15.0, y1);
  }
  CHECK(direct_loglik(kTruth, marg).value ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("log-likelihoods are invariant under record permutation") {
  RandomStream stream(2718);
  const auto gen = simulate_dataset(kTruth, study_model(), 50, stream);
  const QuadratureRule quad = gauss_hermite(40);

  Dataset shuffled = gen.data;
  std::mt19937_64 eng(4);
  std::shuffle(shuffled.records.begin(), shuffled.records.end(), eng);

  const auto model = ModelVariant(study_model());
  CHECK(full_loglik(model, kTruth, gen.data, quad).value ==
        doctest::Approx(full_loglik(model, kTruth, shuffled, quad).value)
            .epsilon(1e-12));
  CHECK(semi_direct_loglik(study_model(), kTruth, gen.data, quad).value ==
        doctest::Approx(
            semi_direct_loglik(study_model(), kTruth, shuffled, quad).value)
            .epsilon(1e-12));
  CHECK(direct_loglik(kTruth, gen.data).value ==
        doctest::Approx(direct_loglik(kTruth, shuffled).value).epsilon(1e-12));
  CHECK(merged_full_loglik(model, kTruth, gen.data, quad).value ==
        doctest::Approx(merged_full_loglik(model, kTruth, shuffled, quad).value)
            .epsilon(1e-12));
}

TEST_CASE("merged likelihood marginalizes the cause patterns") {
  // With one cause the merged and cause-coded full likelihoods coincide.
  const HierarchicalModel one{{{1, NmarLogisticCentered{0.2, 50.0}}}};
  RandomStream stream(55);
  const auto gen = simulate_dataset(kTruth, one, 70, stream);
  const QuadratureRule quad = gauss_hermite(40);
  CHECK(merged_full_loglik(ModelVariant(one), kTruth, gen.data, quad).value ==
        doctest::Approx(
            full_loglik(ModelVariant(one), kTruth, gen.data, quad).value)
            .epsilon(1e-10));

  // Two causes: the missing-record term is f(y1) * (p + (1-p) E[P2 | y1]).
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({61.0, std::nullopt, 1});
  const double got =
      merged_full_loglik(ModelVariant(study_model()), kTruth, d, quad).value;
  const double e2 = expected_mech_given_y1(NmarLogisticCentered{1.0 / 7.0, 50.0},
                                           kTruth, 61.0, quad);
  const double expected = univ_normal_logpdf(50.0, 15.0, 61.0) +
                          std::log(0.25 + 0.75 * e2);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("semi-direct with a flat model is a structure error") {
  const FlatModel flat{{{1, Mcar{0.2}}, {2, NmarLogisticCentered{0.1, 50.0}}}};
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({50.0, 52.0, 0});
  CHECK_THROWS_AS(LikelihoodEvaluator(ModelVariant(flat),
                                      LikelihoodKind::semi_direct, d,
                                      gauss_hermite(10)),
                  structure_error);
}

TEST_CASE("flat model invalidity propagates through the likelihood") {
  const FlatModel flat{{{1, Mcar{0.6}}, {2, Mcar{0.7}}}};
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({50.0, 52.0, 0});
  CHECK_THROWS_AS(
      full_loglik(ModelVariant(flat), kTruth, d, gauss_hermite(10)),
      flat_model_error);
}

TEST_CASE("flat full likelihood follows the additive decomposition") {
  const FlatModel flat{{{1, MarLogisticCentered{0.3, 55.0}},
                        {2, NmarLogisticCentered{0.15, 48.0}}}};
  const QuadratureRule quad = gauss_hermite(60);
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({52.0, 47.0, 0});
  d.records.push_back({44.0, std::nullopt, 1});
  d.records.push_back({58.0, std::nullopt, 2});
  const double got = full_loglik(ModelVariant(flat), kTruth, d, quad).value;

  const auto p1 = [](double y1) { return 1.0 / (1.0 + std::exp(0.3 * (y1 - 55.0))); };
  const auto p2 = [](double y2) { return 1.0 / (1.0 + std::exp(0.15 * (y2 - 48.0))); };
  double expected = std::log(1.0 - p1(52.0) - p2(47.0)) +
                    biv_normal_logpdf(kTruth, 52.0, 47.0);
  expected += std::log(p1(44.0)) + univ_normal_logpdf(50.0, 15.0, 44.0);
  expected += std::log(trapezoid_expected(NmarLogisticCentered{0.15, 48.0},
                                          kTruth, 58.0)) +
              univ_normal_logpdf(50.0, 15.0, 58.0);
  CHECK(got == doctest::Approx(expected).epsilon(1e-7));
}
