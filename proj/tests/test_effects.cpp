#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "freqchoice/effects.hpp"

using namespace freqchoice;

namespace {

// Central finite difference of category_pmf in one covariate.
std::vector<double> fd_effects(const ModelSpec& spec, const ParamSet& params,
                               const Observation& obs,
                               const std::string& covariate) {
  const double x = obs.covariates.at(covariate);
  const double h = 1e-6 * std::max(1.0, std::abs(x));
  Observation shifted = obs;
  shifted.covariates[covariate] = x + h;
  const auto hi = category_pmf(spec, params, shifted);
  shifted.covariates[covariate] = x - h;
  const auto lo = category_pmf(spec, params, shifted);
  std::vector<double> out(hi.size());
  for (std::size_t k = 0; k < hi.size(); ++k) out[k] = (hi[k] - lo[k]) / (2 * h);
  return out;
}

void check_against_fd(const ModelSpec& spec, const ParamSet& params,
                      const Observation& obs, const std::string& covariate) {
  const EffectsTable table = marginal_effects(spec, params, obs, covariate);
  const auto fd = fd_effects(spec, params, obs, covariate);
  REQUIRE(table.per_category.size() == fd.size());
  double total = 0.0;
  for (std::size_t k = 0; k < fd.size(); ++k) {
    const double a = table.per_category[k];
    const double tol = 1e-6 * std::max(std::abs(a), std::abs(fd[k])) + 1e-9;
    INFO("category " << k << ": analytic " << a << " fd " << fd[k]);
    CHECK(std::abs(a - fd[k]) <= tol);
    total += a;
  }
  CHECK(std::abs(total) <= 1e-10);
}

double uniform(std::mt19937& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

ParamSet random_params(const ModelSpec& spec, std::mt19937& rng) {
  const ParamLayout layout = ParamLayout::for_spec(spec);
  ParamSet p;
  for (std::size_t j = 0; j < layout.n_beta; ++j) {
    p.beta.push_back(uniform(rng, -1.0, 1.0));
  }
  double cut = uniform(rng, -1.5, -0.5);
  for (std::size_t j = 0; j < layout.n_thresholds; ++j) {
    p.thresholds.push_back(cut);
    cut += uniform(rng, 0.4, 1.2);
  }
  p.log_sigma2 = uniform(rng, -0.7, 0.7);
  for (std::size_t j = 0; j < layout.n_gamma; ++j) {
    p.gamma.push_back(uniform(rng, -1.0, 1.0));
  }
  p.log_r = uniform(rng, -0.5, 1.0);
  for (std::size_t j = 0; j < layout.n_omega; ++j) {
    p.omega.push_back(uniform(rng, -0.8, 0.8));
  }
  for (std::size_t j = 0; j < layout.n_theta; ++j) {
    p.theta.push_back(uniform(rng, -1.0, 1.0));
  }
  return p;
}

Observation random_obs(std::mt19937& rng) {
  Observation obs;
  obs.freq = 0;
  obs.covariates["x"] = uniform(rng, -2.0, 2.0);
  obs.covariates["w"] = uniform(rng, -1.5, 1.5);
  return obs;
}

FitResult fake_fit(const ModelSpec& spec, const ParamSet& params) {
  FitResult fit;
  fit.spec = spec;
  fit.params = params;
  fit.converged = true;
  return fit;
}

}  // namespace

TEST_CASE("ordered index effect matches the analytic logistic case") {
  // One threshold at zero, unit heterogeneity, zero index: the top-category
  // probability is logistic(v), whose derivative at v = 0 is exactly 1/4.
  ModelSpec s;
  s.family = Family::oev_gamma;
  s.top_code = 1;
  s.index_covariates = {{"x", Transform::identity}};
  s = validate_spec(s);
  ParamSet p;
  p.beta = {1.0};
  p.thresholds = {0.0};
  p.log_sigma2 = 0.0;
  Observation obs;
  obs.covariates["x"] = 0.0;
  const EffectsTable t = ordered_marginal_effects(s, p, obs, "x");
  REQUIRE(t.per_category.size() == 2);
  CHECK_THAT(t.per_category[0], Catch::Matchers::WithinAbs(-0.25, 1e-12));
  CHECK_THAT(t.per_category[1], Catch::Matchers::WithinAbs(0.25, 1e-12));
  CHECK(t.scope == EffectScope::at_observation);
  CHECK(t.kind == EffectKind::derivative);
  CHECK(t.covariate == "x");
}

TEST_CASE("ordered effects: finite differences, zero sum, sign coherence") {
  std::mt19937 rng(101);
  for (int rep = 0; rep < 1000; ++rep) {
    ModelSpec s;
    s.family = Family::oev_gamma;
    s.top_code = 1 + rep % 5;
    s.index_covariates = {{"x", Transform::identity},
                          {"w", Transform::identity}};
    s = validate_spec(s);
    const ParamSet p = random_params(s, rng);
    const Observation obs = random_obs(rng);
    check_against_fd(s, p, obs, "x");
    if (p.beta[0] > 0.0) {
      const auto t = ordered_marginal_effects(s, p, obs, "x").per_category;
      // Positive index coefficient shifts mass upward: the bottom category
      // must lose and the top category must gain.
      CHECK(t.front() < 0.0);
      CHECK(t.back() > 0.0);
    }
  }
}

TEST_CASE("split effects: hurdle channel, index channel, and both") {
  SECTION("covariate only in the split index") {
    ModelSpec s;
    s.family = Family::split_oev_gamma;
    s.top_code = 3;
    s.split_covariates = {{"z", Transform::identity}};
    s.index_covariates = {{"x", Transform::identity}};
    s = validate_spec(s);
    ParamSet p;
    p.gamma = {1.0};
    p.beta = {0.4};
    p.thresholds = {-0.2, 0.9};
    p.log_sigma2 = 0.1;
    Observation obs;
    obs.covariates["z"] = 0.0;
    obs.covariates["x"] = 0.7;
    const auto t = split_marginal_effects(s, p, obs, "z").per_category;
    // F = 1/2 at s = 0, so dPr(0)/dz = F(1-F) = 1/4 and the positive
    // categories give the quarter back in proportion to the latent pmf.
    CHECK_THAT(t[0], Catch::Matchers::WithinAbs(0.25, 1e-12));
    const auto pmf = category_pmf(s, p, obs);
    double positive_total = 0.0;
    for (int k = 1; k <= 3; ++k) {
      const double latent = pmf[k] / (1.0 - pmf[0]);
      CHECK_THAT(t[k], Catch::Matchers::WithinAbs(-0.25 * latent, 1e-12));
      positive_total += t[k];
    }
    CHECK_THAT(positive_total, Catch::Matchers::WithinAbs(-0.25, 1e-12));
  }
  SECTION("covariate only in the latent index leaves the hurdle untouched") {
    ModelSpec s;
    s.family = Family::split_oev_gamma;
    s.top_code = 2;
    s.split_intercept = true;
    s.index_covariates = {{"x", Transform::identity}};
    s = validate_spec(s);
    ParamSet p;
    p.gamma = {0.3};
    p.beta = {0.8};
    p.thresholds = {0.5};
    p.log_sigma2 = -0.2;
    Observation obs;
    obs.covariates["x"] = -0.4;
    const auto t = split_marginal_effects(s, p, obs, "x").per_category;
    CHECK(t[0] == 0.0);
    CHECK_THAT(t[1] + t[2], Catch::Matchers::WithinAbs(0.0, 1e-12));
  }
  SECTION("randomized draws with the covariate in both channels") {
    std::mt19937 rng(202);
    for (int rep = 0; rep < 1000; ++rep) {
      ModelSpec s;
      s.family = Family::split_oev_gamma;
      s.top_code = 1 + rep % 5;
      s.split_intercept = rep % 2 == 0;
      s.split_covariates = {{"x", Transform::identity}};
      s.index_covariates = {{"x", Transform::identity},
                            {"w", Transform::identity}};
      s = validate_spec(s);
      const ParamSet p = random_params(s, rng);
      const Observation obs = random_obs(rng);
      check_against_fd(s, p, obs, "x");
      check_against_fd(s, p, obs, "w");
    }
  }
}

TEST_CASE("count-family effects: every channel against finite differences") {
  std::mt19937 rng(303);
  for (int rep = 0; rep < 1000; ++rep) {
    ModelSpec s;
    s.family = rep % 2 == 0 ? Family::nb_ogev : Family::poisson_ogev;
    s.top_code = 2 + rep % 4;
    s.index_covariates = {{kConstColumn, Transform::identity},
                          {"x", Transform::identity}};
    // Rotate the extra channels so x sometimes hits utility shifters and
    // sometimes the nest correlation, including together.
    if (rep % 3 != 0) {
      s.count_specific_terms = {{rep % 2, "x", Transform::identity},
                                {s.top_code, "w", Transform::identity}};
    }
    if (rep % 4 < 2) {
      s.rho_intercept = true;
      s.rho_covariates = {{"x", Transform::identity}};
    } else if (rep % 4 == 2) {
      s.rho_covariates = {{"w", Transform::identity}};
    }
    s = validate_spec(s);
    const ParamSet p = random_params(s, rng);
    const Observation obs = random_obs(rng);
    check_against_fd(s, p, obs, "x");
    if (rep % 3 != 0 || rep % 4 == 2) check_against_fd(s, p, obs, "w");
  }
}

TEST_CASE("negative binomial effects collapse to Poisson as r grows") {
  ModelSpec nb;
  nb.family = Family::nb_ogev;
  nb.top_code = 4;
  nb.index_covariates = {{kConstColumn, Transform::identity},
                         {"x", Transform::identity}};
  nb.count_specific_terms = {{1, "x", Transform::identity}};
  nb.rho_intercept = true;
  nb = validate_spec(nb);
  ModelSpec pois = nb;
  pois.family = Family::poisson_ogev;
  pois = validate_spec(pois);

  std::mt19937 rng(404);
  for (int rep = 0; rep < 20; ++rep) {
    ParamSet p = random_params(nb, rng);
    p.log_r = std::log(1e8);
    Observation obs = random_obs(rng);
    const auto limit = ogev_marginal_effects(nb, p, obs, "x").per_category;
    ParamSet q = p;
    q.log_r = 0.0;
    const auto exact = ogev_marginal_effects(pois, q, obs, "x").per_category;
    for (std::size_t k = 0; k < exact.size(); ++k) {
      CHECK_THAT(limit[k], Catch::Matchers::WithinAbs(exact[k], 1e-6));
    }
  }
}

TEST_CASE("discrete change contrasts equal the pmf difference") {
  ModelSpec s;
  s.family = Family::poisson_ogev;
  s.top_code = 3;
  s.index_covariates = {{kConstColumn, Transform::identity},
                        {"d", Transform::identity}};
  s.rho_intercept = true;
  s = validate_spec(s);
  ParamSet p;
  p.beta = {0.2, 0.7};
  p.theta = {0.4};
  Observation obs;
  obs.covariates["d"] = 1.0;
  const EffectsTable t = discrete_change_effects(s, p, obs, "d");
  CHECK(t.kind == EffectKind::discrete_change);
  Observation at = obs;
  at.covariates["d"] = 1.0;
  const auto hi = category_pmf(s, p, at);
  at.covariates["d"] = 0.0;
  const auto lo = category_pmf(s, p, at);
  double total = 0.0;
  for (std::size_t k = 0; k < hi.size(); ++k) {
    CHECK_THAT(t.per_category[k],
               Catch::Matchers::WithinAbs(hi[k] - lo[k], 1e-15));
    total += t.per_category[k];
  }
  CHECK(std::abs(total) <= 1e-10);
}

TEST_CASE("sample averaging: identities, state guard, and Monte Carlo check") {
  ModelSpec s;
  s.family = Family::split_oev_gamma;
  s.top_code = 3;
  s.split_intercept = true;
  s.split_covariates = {{"x", Transform::identity}};
  s.index_covariates = {{"x", Transform::identity}};
  s = validate_spec(s);
  ParamSet p;
  p.gamma = {0.2, 0.4};
  p.beta = {0.5};
  p.thresholds = {0.3, 1.0};
  p.log_sigma2 = 0.2;
  const FitResult fit = fake_fit(s, p);

  SECTION("one observation reproduces the per-observation table") {
    const Dataset one({"x"}, {1}, {{0.37}});
    const auto avg = average_marginal_effects(fit, one, "x");
    CHECK(avg.scope == EffectScope::sample_average);
    Observation obs;
    obs.covariates["x"] = 0.37;
    const auto single = split_marginal_effects(s, p, obs, "x");
    for (std::size_t k = 0; k < single.per_category.size(); ++k) {
      CHECK(avg.per_category[k] == single.per_category[k]);
    }
  }
  SECTION("two observations average the two tables") {
    const Dataset two({"x"}, {0, 2}, {{-0.5, 1.25}});
    const auto avg = average_marginal_effects(fit, two, "x");
    Observation a, b;
    a.covariates["x"] = -0.5;
    b.covariates["x"] = 1.25;
    const auto ta = split_marginal_effects(s, p, a, "x");
    const auto tb = split_marginal_effects(s, p, b, "x");
    for (std::size_t k = 0; k < ta.per_category.size(); ++k) {
      CHECK_THAT(avg.per_category[k],
                 Catch::Matchers::WithinAbs(
                     0.5 * (ta.per_category[k] + tb.per_category[k]), 1e-16));
    }
  }
  SECTION("non-converged fits are refused") {
    FitResult bad = fit;
    bad.converged = false;
    const Dataset one({"x"}, {1}, {{0.0}});
    CHECK_THROWS_AS(average_marginal_effects(bad, one, "x"), StateError);
    CHECK_THROWS_AS(average_discrete_change(bad, one, "x"), StateError);
  }
  SECTION("empty datasets are refused") {
    const Dataset empty({"x"}, {}, {{}});
    CHECK_THROWS_AS(average_marginal_effects(fit, empty, "x"), DataError);
  }
  SECTION("average matches an independent finite-difference population draw") {
    // Two independent samples from the same covariate law: the analytic
    // sample average and a brute-force pmf-differencing average must agree
    // up to joint Monte Carlo error.
    const std::size_t n = 10000;
    std::mt19937 rng(555);
    std::normal_distribution<double> law(0.3, 1.0);
    std::vector<double> xs(n);
    for (auto& x : xs) x = law(rng);
    std::vector<double> xcol = xs;
    const Dataset data({"x"}, std::vector<int>(n, 0), {std::move(xcol)});
    const auto avg = average_marginal_effects(fit, data, "x");

    const std::size_t cats = avg.per_category.size();
    std::vector<double> mean_a(cats, 0.0), sq_a(cats, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      Observation obs;
      obs.covariates["x"] = xs[i];
      const auto t = split_marginal_effects(s, p, obs, "x").per_category;
      for (std::size_t k = 0; k < cats; ++k) {
        mean_a[k] += t[k];
        sq_a[k] += t[k] * t[k];
      }
    }
    std::vector<double> mean_b(cats, 0.0), sq_b(cats, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      Observation obs;
      obs.covariates["x"] = law(rng);
      const auto t = fd_effects(s, p, obs, "x");
      for (std::size_t k = 0; k < cats; ++k) {
        mean_b[k] += t[k];
        sq_b[k] += t[k] * t[k];
      }
    }
    for (std::size_t k = 0; k < cats; ++k) {
      mean_a[k] /= n;
      mean_b[k] /= n;
      const double var_a = sq_a[k] / n - mean_a[k] * mean_a[k];
      const double var_b = sq_b[k] / n - mean_b[k] * mean_b[k];
      const double se = std::sqrt((var_a + var_b) / n);
      INFO("category " << k << ": sample " << avg.per_category[k]
                       << " population " << mean_b[k] << " se " << se);
      CHECK(std::abs(avg.per_category[k] - mean_b[k]) <= 2.0 * se + 1e-12);
      CHECK_THAT(avg.per_category[k],
                 Catch::Matchers::WithinAbs(mean_a[k], 1e-12));
    }
  }
}

TEST_CASE("effects reject covariates outside the model") {
  ModelSpec s;
  s.family = Family::oev_gamma;
  s.top_code = 2;
  s.index_covariates = {{"x", Transform::identity}};
  s = validate_spec(s);
  ParamSet p;
  p.beta = {0.5};
  p.thresholds = {0.0, 1.0};
  Observation obs;
  obs.covariates["x"] = 0.2;
  obs.covariates["y"] = 1.0;
  CHECK_THROWS_AS(ordered_marginal_effects(s, p, obs, "y"), DataError);
  CHECK_THROWS_AS(ordered_marginal_effects(s, p, obs, "const"), DataError);
  CHECK_THROWS_AS(discrete_change_effects(s, p, obs, "y"), DataError);
  CHECK_THROWS_AS(split_marginal_effects(s, p, obs, "x"), SpecError);
  CHECK_THROWS_AS(ogev_marginal_effects(s, p, obs, "x"), SpecError);

  ModelSpec split = s;
  split.family = Family::split_oev_gamma;
  split.split_intercept = true;
  split = validate_spec(split);
  ParamSet sp;
  sp.beta = {0.5};
  sp.thresholds = {0.4};
  sp.gamma = {0.1};
  CHECK_THROWS_AS(split_marginal_effects(split, sp, obs, "y"), DataError);
  CHECK_THROWS_AS(ordered_marginal_effects(split, sp, obs, "x"), SpecError);
}
