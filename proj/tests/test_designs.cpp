#include <survey/designs.hpp>
#include <survey/oracle.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace survey;

namespace {

std::vector<double> random_working_p(std::size_t N, std::uint64_t seed)
{
  RandomStream rng(seed, N);
  std::vector<double> p(N);
  for (double& v : p)
    v = 0.05 + 0.9 * rng.uniform();
  return p;
}

std::vector<Design> small_designs()
{
  std::vector<Design> out;
  out.push_back(Design::srswor(6, 3));
  out.push_back(Design::bernoulli(5, 0.3));
  out.push_back(Design::poisson({ 0.1, 0.9, 0.5, 0.25, 1.0 }));
  out.push_back(Design::rejective({ 0.2, 0.5, 0.8 }, 2));
  out.push_back(Design::rejective(random_working_p(7, 3), 3));
  return out;
}

} // namespace

TEST(FirstOrderPi, Examples)
{
  for (double p : first_order_pi(Design::srswor(6, 3)))
    EXPECT_EQ(p, 0.5);
  for (double p : first_order_pi(Design::rejective({ 0.5, 0.5, 0.5 }, 2)))
    EXPECT_NEAR(p, 2.0 / 3.0, 1e-15);
  const auto d = Design::rejective({ 0.2, 0.5, 0.8 }, 2);
  const auto exact = oracle::first_order_pi(oracle::enumerate_design(d));
  const auto dp = first_order_pi(d);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(dp[i], exact[i], 1e-14);
}

TEST(SecondOrderPi, Examples)
{
  const auto si = second_order_pi(Design::srswor(6, 3));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i != j) {
        EXPECT_NEAR(si(i, j), 0.2, 1e-15);
        EXPECT_NEAR(si(i, j) - 0.25, -0.05, 1e-15);
      } else {
        EXPECT_EQ(si(i, j), 0.5);
      }
  const auto be = second_order_pi(Design::bernoulli(4, 0.5));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      EXPECT_EQ(be(i, j) - (i == j ? 0.5 : 0.25), 0.0);
  const auto rej = second_order_pi(Design::rejective({ 0.5, 0.5, 0.5 }, 2));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) {
        EXPECT_NEAR(rej(i, j), 1.0 / 3.0, 1e-15);
      }
}

TEST(Designs, DynamicProgramMatchesEnumeration)
{
  for (std::size_t N = 2; N <= 12; ++N)
    for (std::size_t n = 1; n < N; n += 2) {
      const auto d = Design::rejective(random_working_p(N, 10 * N + n), n);
      const auto e = oracle::enumerate_design(d);
      const auto pi = first_order_pi(d);
      const auto pi_e = oracle::first_order_pi(e);
      const auto pij = second_order_pi(d);
      const auto pij_e = oracle::second_order_pi(e);
      for (std::size_t i = 0; i < N; ++i) {
        EXPECT_NEAR(pi[i], pi_e[i], 1e-12);
        for (std::size_t j = 0; j < N; ++j)
          EXPECT_NEAR(pij(i, j), pij_e(i, j), 1e-12);
      }
    }
}

TEST(Designs, FixedSizeIdentities)
{
  const Design designs[] = {
    Design::srswor(9, 4),
    Design::rejective(random_working_p(9, 1), 4),
    Design::rejective(random_working_p(25, 2), 7),
  };
  for (const auto& d : designs) {
    const auto pi = first_order_pi(d);
    const auto pij = second_order_pi(d);
    EXPECT_NEAR(std::accumulate(pi.begin(), pi.end(), 0.0), d.expected_size(), 1e-9);
    for (std::size_t i = 0; i < d.N(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d.N(); ++j)
        if (j != i)
          s += pij(i, j) - pi[i] * pi[j];
      EXPECT_NEAR(s, -pi[i] * (1.0 - pi[i]), 1e-9);
    }
  }
}

TEST(Draw, FixedSizeDesignsDrawExactlyN)
{
  const auto si = Design::srswor(50, 7);
  const auto rej = Design::rejective(random_working_p(50, 5), 7);
  for (std::uint64_t s = 0; s < 200; ++s) {
    RandomStream a(s), b(s, 1);
    EXPECT_EQ(draw(si, a).size(), 7u);
    EXPECT_EQ(draw(rej, b).size(), 7u);
  }
}

TEST(Draw, BernoulliSizeWithinFiveSigma)
{
  const auto be = Design::bernoulli(10000, 0.5);
  const double band = 5.0 * std::sqrt(10000 * 0.25);
  for (std::uint64_t s = 0; s < 100; ++s) {
    RandomStream rng(s);
    const auto d = draw(be, rng);
    EXPECT_LE(std::abs(static_cast<double>(d.size()) - 5000.0), band);
  }
}

TEST(Draw, SampleDrawInvariants)
{
  for (const auto& des : small_designs()) {
    RandomStream rng(17);
    for (int r = 0; r < 50; ++r) {
      const auto d = draw(des, rng);
      ASSERT_EQ(d.indicators.size(), des.N());
      ASSERT_EQ(d.included.size(), d.pi_of_included.size());
      std::size_t k = 0;
      for (std::size_t i = 0; i < des.N(); ++i)
        if (d.indicators[i]) {
          ASSERT_LT(k, d.included.size());
          EXPECT_EQ(d.included[k], i);
          EXPECT_EQ(d.pi_of_included[k], des.pi(i));
          EXPECT_GT(d.pi_of_included[k], 0.0);
          EXPECT_LE(d.pi_of_included[k], 1.0);
          ++k;
        }
      EXPECT_EQ(k, d.included.size());
    }
  }
}

TEST(Draw, InclusionFrequenciesMatchPi)
{
  constexpr int draws = 10000;
  for (const auto& des : small_designs()) {
    std::vector<double> count(des.N(), 0.0);
    RandomStream rng(2024);
    for (int r = 0; r < draws; ++r)
      for (std::size_t i : draw(des, rng).included)
        count[i] += 1.0;
    const auto pi = first_order_pi(des);
    for (std::size_t i = 0; i < des.N(); ++i) {
      const double band = 5.0 * std::sqrt(pi[i] * (1.0 - pi[i]) / draws);
      EXPECT_LE(std::abs(count[i] / draws - pi[i]), band + 1e-12);
    }
  }
}

TEST(Draw, SameStreamSameSample)
{
  const auto des = Design::rejective(random_working_p(30, 8), 10);
  RandomStream a(5, 6, 7), b(5, 6, 7);
  EXPECT_EQ(draw(des, a).included, draw(des, b).included);
}

TEST(Designs, InvalidParameters)
{
  EXPECT_THROW(Design::srswor(5, 0), ParameterError);
  EXPECT_THROW(Design::srswor(5, 6), ParameterError);
  EXPECT_THROW(Design::bernoulli(5, 0.0), ParameterError);
  EXPECT_THROW(Design::bernoulli(5, 1.0), ParameterError);
  EXPECT_THROW(Design::poisson({ 0.5, 0.0 }), ParameterError);
  EXPECT_THROW(Design::poisson({ 0.5, 1.2 }), ParameterError);
  EXPECT_THROW(Design::rejective({ 0.5, 1.0, 0.2 }, 1), ParameterError);
  EXPECT_THROW(Design::rejective({ 0.5, 0.4, 0.2 }, 3), ParameterError);
}

TEST(Calibration, EqualTargetsGiveEqualP)
{
  const std::vector<double> target(8, 3.0 / 8.0);
  const auto r = calibrate_rejective_p(target, 3);
  for (double p : r.p)
    EXPECT_DOUBLE_EQ(p, 3.0 / 8.0);
  for (double p : first_order_pi(Design::rejective(r.p, 3)))
    EXPECT_NEAR(p, 3.0 / 8.0, 1e-12);
}

TEST(Calibration, RoundTripThroughEnumeration)
{
  const auto e = oracle::enumerate_design(Design::rejective({ 0.1, 0.3, 0.5, 0.7, 0.9 }, 2));
  const auto target = oracle::first_order_pi(e);
  const auto r = calibrate_rejective_p(target, 2);
  EXPECT_LE(r.residual, 1e-10);
  const auto back = oracle::first_order_pi(oracle::enumerate_design(Design::rejective(r.p, 2)));
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_NEAR(back[i], target[i], 1e-8);
}

TEST(Calibration, TargetsMustSumToN)
{
  const std::vector<double> target{ 0.2, 0.3, 0.4 };
  EXPECT_THROW(calibrate_rejective_p(target, 1), ParameterError);
}

TEST(Calibration, ReportsNonConvergence)
{
  const std::vector<double> target{ 0.02, 0.98, 0.5, 0.5 };
  try {
    calibrate_rejective_p(target, 2, 1e-14, 1);
    FAIL() << "expected a calibration error";
  } catch (const CalibrationError& err) {
    EXPECT_GT(err.residual(), 0.0);
  }
}

TEST(DesignConstants, Examples)
{
  const auto si = design_constants(Design::srswor(1000, 500));
  EXPECT_DOUBLE_EQ(si.lambda, 0.5);
  EXPECT_NEAR(si.mu_pi1, 0.5, 1e-12);
  EXPECT_NEAR(si.mu_pi2, -0.5, 1e-12);
  EXPECT_NEAR(si.gamma_pi1, 1.0, 1e-12);
  EXPECT_NEAR(si.gamma_pi2, -1.0, 1e-12);

  const auto be = design_constants(Design::bernoulli(10000, 0.05));
  EXPECT_NEAR(be.gamma_pi1, 1.0, 1e-12);
  EXPECT_EQ(be.mu_pi2, 0.0);
  EXPECT_NEAR(be.gamma_pi2, -0.05, 1e-15);

  RandomStream rng(3);
  const auto po = design_constants(make_two_level_poisson(10000, 0.02, 0.08, rng));
  EXPECT_NEAR(po.gamma_pi1, 1.5625, 1e-12);
  EXPECT_EQ(po.mu_pi2, 0.0);
  EXPECT_GE(po.mu_pi1, 0.0);
}

TEST(DesignConstants, RejectiveUsesFirstOrderExpansion)
{
  const auto d = Design::rejective(random_working_p(40, 4), 12);
  const auto c = design_constants(d);
  const auto pi = first_order_pi(d);
  const double N = 40.0, n = 12.0;
  double d_N = 0.0, sum_q = 0.0, sum_q2 = 0.0;
  for (double p : pi) {
    d_N += p * (1.0 - p);
    sum_q += 1.0 - p;
    sum_q2 += (1.0 - p) * (1.0 - p);
  }
  EXPECT_NEAR(c.d_N, d_N, 1e-12);
  EXPECT_NEAR(c.mu_pi2, -(n / (N * N)) * (sum_q * sum_q - sum_q2) / d_N, 1e-12);
  EXPECT_NEAR(c.gamma_pi1, c.mu_pi1 + c.lambda, 1e-15);
  EXPECT_NEAR(c.gamma_pi2, c.mu_pi2 - c.lambda, 1e-15);
}

TEST(TwoLevelPoisson, HalfLowHalfHigh)
{
  RandomStream rng(11);
  const auto d = make_two_level_poisson(1000, 0.02, 0.08, rng);
  const auto pi = first_order_pi(d);
  EXPECT_EQ(std::count(pi.begin(), pi.end(), 0.02), 500);
  EXPECT_EQ(std::count(pi.begin(), pi.end(), 0.08), 500);
  EXPECT_NEAR(d.expected_size(), 50.0, 1e-9);
}
