#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mcmiss/estimation.hpp"
#include "mcmiss/simulation.hpp"

using namespace mcmiss;

namespace {

const ThetaParams kTruth(50.0, 50.0, 15.0, 15.0, 0.6);

HierarchicalModel study_model() {
  return HierarchicalModel{
      {{1, Mcar{0.25}}, {2, NmarLogisticCentered{1.0 / 7.0, 50.0}}}};
}

struct Moments {
  double m1, m2, s1, s2, rho;
};

Moments complete_case_moments(const Dataset& d) {
  std::vector<double> y1, y2;
  for (const Observation& r : d.records)
    if (r.m2 == 0) {
      y1.push_back(r.y1);
      y2.push_back(*r.y2);
    }
  const double n = static_cast<double>(y1.size());
  double m1 = 0, m2 = 0;
  for (std::size_t i = 0; i < y1.size(); ++i) {
    m1 += y1[i];
    m2 += y2[i];
  }
  m1 /= n;
  m2 /= n;
  double v1 = 0, v2 = 0, cv = 0;
  for (std::size_t i = 0; i < y1.size(); ++i) {
    v1 += (y1[i] - m1) * (y1[i] - m1);
    v2 += (y2[i] - m2) * (y2[i] - m2);
    cv += (y1[i] - m1) * (y2[i] - m2);
  }
  v1 /= n;
  v2 /= n;
  cv /= n;
  return {m1, m2, std::sqrt(v1), std::sqrt(v2), cv / std::sqrt(v1 * v2)};
}

}  // namespace

TEST_CASE("maximize finds a 1-d quadratic peak") {
  const Objective f = [](std::span<const double> x) {
    return -(x[0] - 3.0) * (x[0] - 3.0);
  };
  const MaximizeResult r = maximize(f, {0.0});
  CHECK(r.argmax[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r.diag.converged);
}

TEST_CASE("maximize finds a separable 2-d quadratic peak") {
  const Objective f = [](std::span<const double> x) {
    return -(x[0] - 1.0) * (x[0] - 1.0) - (x[1] - 2.0) * (x[1] - 2.0);
  };
  const MaximizeResult r = maximize(f, {-4.0, 7.0});
  CHECK(r.argmax[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.argmax[1] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("maximize rejects a non-finite start") {
  const Objective f = [](std::span<const double> x) {
    return std::log(x[0]);  // -inf at 0
  };
  CHECK_THROWS_AS(maximize(f, {0.0}), std::invalid_argument);
}

TEST_CASE("maximize never reports a value below the start") {
  // A nasty objective with a cliff next to the start.
  const Objective f = [](std::span<const double> x) {
    return x[0] < 0.0 ? -1e12 : -x[0];
  };
  const MaximizeResult r = maximize(f, {0.0});
  CHECK(r.value >= f(std::vector<double>{0.0}));
}

TEST_CASE("maximize is deterministic") {
  const Objective f = [](std::span<const double> x) {
    return -std::pow(x[0] - 0.7, 4) - std::abs(x[1]) * 0.3 -
           std::sin(x[0] * 3.0) * 0.01;
  };
  const MaximizeResult a = maximize(f, {2.0, -1.0});
  const MaximizeResult b = maximize(f, {2.0, -1.0});
  CHECK(a.value == b.value);
  CHECK(a.argmax == b.argmax);
  CHECK(a.diag.iterations == b.diag.iterations);
  CHECK(a.diag.evaluations == b.diag.evaluations);
}

TEST_CASE("transform round-trips on random valid parameter points") {
  const ModelVariant model(study_model());
  const ParamTransform t_full(model, LikelihoodKind::full);
  REQUIRE(t_full.dim() == 8);
  const ParamTransform t_sdl(model, LikelihoodKind::semi_direct);
  REQUIRE(t_sdl.dim() == 7);
  const ParamTransform t_dl(model, LikelihoodKind::direct);
  REQUIRE(t_dl.dim() == 5);

  std::mt19937_64 eng(123);
  std::uniform_real_distribution<double> mu(-80.0, 80.0);
  std::uniform_real_distribution<double> sig(0.05, 200.0);
  std::uniform_real_distribution<double> rho(-0.995, 0.995);
  std::uniform_real_distribution<double> prob(0.01, 0.99);
  std::uniform_real_distribution<double> slope(-3.0, 3.0);
  std::uniform_real_distribution<double> mid(-50.0, 150.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Xi xi{ThetaParams(mu(eng), mu(eng), sig(eng), sig(eng), rho(eng)),
                {Mcar{prob(eng)}, NmarLogisticCentered{slope(eng), mid(eng)}}};
    const std::vector<double> v = t_full.pack(xi);
    const Xi back = t_full.unpack(v);
    worst = std::max(worst, std::abs(back.theta.mu1() - xi.theta.mu1()));
    worst = std::max(worst, std::abs(back.theta.mu2() - xi.theta.mu2()));
    worst = std::max(worst, std::abs(back.theta.sigma1() - xi.theta.sigma1()) /
                                xi.theta.sigma1());
    worst = std::max(worst, std::abs(back.theta.sigma2() - xi.theta.sigma2()) /
                                xi.theta.sigma2());
    worst = std::max(worst, std::abs(back.theta.rho() - xi.theta.rho()));
    worst = std::max(worst, std::abs(std::get<Mcar>(back.taus[0]).p -
                                     std::get<Mcar>(xi.taus[0]).p));
    const auto& nb = std::get<NmarLogisticCentered>(back.taus[1]);
    const auto& na = std::get<NmarLogisticCentered>(xi.taus[1]);
    worst = std::max(worst, std::abs(nb.tau_a - na.tau_a));
    worst = std::max(worst, std::abs(nb.tau_b - na.tau_b));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("complete-data fits recover the sample-moment MLE") {
  RandomStream stream(1001);
  const auto pairs = sample_bivnormal(kTruth, 120, stream);
  Dataset d;
  d.cause_count = 2;
  for (const auto& [y1, y2] : pairs) d.records.push_back({y1, y2, 0});
  const Moments mom = complete_case_moments(d);

  for (const LikelihoodKind kind :
       {LikelihoodKind::direct, LikelihoodKind::full}) {
    const FitResult fr = fit(ModelVariant(study_model()), kind, d);
    CHECK(fr.converged);
    CHECK(fr.xi_hat.theta.mu1() == doctest::Approx(mom.m1).epsilon(1e-4));
    CHECK(fr.xi_hat.theta.mu2() == doctest::Approx(mom.m2).epsilon(1e-4));
    CHECK(fr.xi_hat.theta.sigma1() == doctest::Approx(mom.s1).epsilon(1e-4));
    CHECK(fr.xi_hat.theta.sigma2() == doctest::Approx(mom.s2).epsilon(1e-4));
    CHECK(std::abs(fr.xi_hat.theta.rho() - mom.rho) < 1e-4);
  }
}

TEST_CASE("full and semi-direct fits agree on theta (ignorability)") {
  RandomStream stream(7321);
  const auto gen = simulate_dataset(kTruth, study_model(), 100, stream);
  const FitResult full =
      fit(ModelVariant(study_model()), LikelihoodKind::full, gen.data);
  const FitResult sdl =
      fit(ModelVariant(study_model()), LikelihoodKind::semi_direct, gen.data);
  REQUIRE(full.converged);
  REQUIRE(sdl.converged);
  CHECK(std::abs(full.xi_hat.theta.mu1() - sdl.xi_hat.theta.mu1()) < 1e-3);
  CHECK(std::abs(full.xi_hat.theta.mu2() - sdl.xi_hat.theta.mu2()) < 1e-3);
  CHECK(std::abs(full.xi_hat.theta.sigma1() - sdl.xi_hat.theta.sigma1()) < 1e-3);
  CHECK(std::abs(full.xi_hat.theta.sigma2() - sdl.xi_hat.theta.sigma2()) < 1e-3);
  CHECK(std::abs(full.xi_hat.theta.rho() - sdl.xi_hat.theta.rho()) < 1e-3);
  // The full fit's MCAR estimate matches the pattern-1 share implied by the
  // separable factor (n0 + n2) log(1-p) + n1 log p.
  std::size_t n1 = 0;
  for (const Observation& r : gen.data.records) n1 += r.m2 == 1;
  CHECK(std::get<Mcar>(full.xi_hat.taus[0]).p ==
        doctest::Approx(static_cast<double>(n1) /
                        static_cast<double>(gen.data.records.size()))
            .epsilon(1e-3));
}

TEST_CASE("fit is deterministic") {
  RandomStream stream(88);
  const auto gen = simulate_dataset(kTruth, study_model(), 60, stream);
  const FitResult a =
      fit(ModelVariant(study_model()), LikelihoodKind::semi_direct, gen.data);
  const FitResult b =
      fit(ModelVariant(study_model()), LikelihoodKind::semi_direct, gen.data);
  CHECK(a.loglik == b.loglik);
  CHECK(a.xi_hat.theta.mu2() == b.xi_hat.theta.mu2());
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("monotone ascent: the reported optimum dominates the start") {
  RandomStream stream(77);
  const auto gen = simulate_dataset(kTruth, study_model(), 60, stream);
  const ModelVariant model(study_model());
  const LikelihoodEvaluator eval(model, LikelihoodKind::semi_direct, gen.data,
                                 gauss_hermite(40));
  const ParamTransform transform(model, LikelihoodKind::semi_direct);
  const std::vector<double> start =
      default_start(gen.data, model, LikelihoodKind::semi_direct);
  const Xi xi0 = transform.unpack(start);
  const double f0 = eval(xi0.theta, xi0.taus);
  const FitResult fr = fit(model, LikelihoodKind::semi_direct, gen.data);
  CHECK(fr.loglik >= f0);
}

TEST_CASE("default start uses complete-case moments") {
  RandomStream stream(3141);
  const auto gen = simulate_dataset(kTruth, study_model(), 100, stream);
  const ModelVariant model(study_model());
  const std::vector<double> start =
      default_start(gen.data, model, LikelihoodKind::full);
  const Moments mom = complete_case_moments(gen.data);
  CHECK(start[0] == doctest::Approx(mom.m1).epsilon(1e-12));
  CHECK(start[1] == doctest::Approx(mom.m2).epsilon(1e-12));
  CHECK(start[2] == doctest::Approx(std::log(mom.s1)).epsilon(1e-12));
}

TEST_CASE("default start requires two complete records") {
  Dataset d;
  d.cause_count = 2;
  d.records.push_back({50.0, 51.0, 0});
  d.records.push_back({55.0, std::nullopt, 1});
  CHECK_THROWS_AS(
      default_start(d, ModelVariant(study_model()), LikelihoodKind::full),
      std::invalid_argument);
}

TEST_CASE("mechanism starts exist but are unused by a direct fit") {
  Dataset d;
  d.cause_count = 2;
  RandomStream stream(17);
  for (const auto& [y1, y2] : sample_bivnormal(kTruth, 30, stream))
    d.records.push_back({y1, y2, 0});
  const ModelVariant model(study_model());
  // Both likelihood kinds start fine; the direct transform has no
  // mechanism coordinates at all.
  CHECK(default_start(d, model, LikelihoodKind::full).size() == 8);
  CHECK(default_start(d, model, LikelihoodKind::direct).size() == 5);
}

TEST_CASE("hessian probe of a spherical quadratic is minus identity") {
  const Objective f = [](std::span<const double> x) {
    double acc = 0.0;
    for (const double v : x) acc += v * v;
    return -0.5 * acc;
  };
  const std::vector<double> point = {0.3, -1.2, 4.0};
  const HessianSummary h = hessian_probe(f, point);
  REQUIRE(h.finite);
  for (const double e : h.eigenvalues)
    CHECK(e == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(h.condition_number == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_FALSE(h.weakly_identified);
}

TEST_CASE("hessian probe flags an exactly flat direction") {
  const Objective f = [](std::span<const double> x) { return -x[0] * x[0]; };
  const HessianSummary h = hessian_probe(f, std::vector<double>{0.5, 2.0});
  REQUIRE(h.finite);
  double amin = HUGE_VAL;
  for (const double e : h.eigenvalues) amin = std::min(amin, std::abs(e));
  CHECK(amin < 1e-6);
  CHECK(h.weakly_identified);
}

TEST_CASE("no significant positive curvature at a reported interior optimum") {
  RandomStream stream(2024);
  const auto gen = simulate_dataset(kTruth, study_model(), 80, stream);
  const FitOptions opts{{}, true, kDefaultQuadratureOrder, std::nullopt};
  const FitResult fr =
      fit(ModelVariant(study_model()), LikelihoodKind::semi_direct, gen.data,
          opts);
  REQUIRE(fr.converged);
  REQUIRE(fr.hessian.has_value());
  REQUIRE(fr.hessian->finite);
  CHECK(fr.hessian->max_eigenvalue <= 1e-4);
}

TEST_CASE("semi-direct fit on a flat model is a structure error") {
  const FlatModel flat{{{1, Mcar{0.25}}, {2, NmarLogisticCentered{0.14, 50.0}}}};
  Dataset d;
  d.cause_count = 2;
  RandomStream stream(6);
  for (const auto& [y1, y2] : sample_bivnormal(kTruth, 20, stream))
    d.records.push_back({y1, y2, 0});
  CHECK_THROWS_AS(fit(ModelVariant(flat), LikelihoodKind::semi_direct, d),
                  structure_error);
}
