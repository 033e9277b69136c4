#include <survey/population.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace survey;

TEST(Population, PointMassIsConstant)
{
  const auto pop = generate_population(SuperPopulationLaw::discrete({ 5.0 }, { 1.0 }), 3, 42);
  ASSERT_EQ(pop.size(), 3u);
  for (double v : pop.y)
    EXPECT_EQ(v, 5.0);
  for (double z : pop.z)
    EXPECT_EQ(z, 1.0);
}

TEST(Population, ExponentialMeanWithinCltBand)
{
  const auto pop = generate_population(SuperPopulationLaw::exponential(1.0), 10000, 1);
  const double mean = std::accumulate(pop.y.begin(), pop.y.end(), 0.0) / 10000.0;
  EXPECT_GE(mean, 0.95);
  EXPECT_LE(mean, 1.05);
}

TEST(Population, UniformSupport)
{
  const auto pop = generate_population(SuperPopulationLaw::uniform01(), 4, 7);
  for (double v : pop.y) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Population, SameSeedSamePopulation)
{
  const auto law = SuperPopulationLaw::exponential(2.0);
  const auto a = generate_population(law, 500, 99, 3);
  const auto b = generate_population(law, 500, 99, 3);
  const auto c = generate_population(law, 500, 99, 4);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.y, c.y);
}

TEST(Population, InvalidLawsAreRejected)
{
  EXPECT_THROW(generate_population(SuperPopulationLaw::exponential(-1.0), 3, 1), ParameterError);
  EXPECT_THROW(generate_population(SuperPopulationLaw::discrete({ 1.0, 2.0 }, { 0.5, 0.4 }), 3, 1),
               ParameterError);
  EXPECT_THROW(generate_population(SuperPopulationLaw::exponential(1.0), 0, 1), ParameterError);
}

TEST(TrueCdf, Examples)
{
  EXPECT_NEAR(true_cdf(SuperPopulationLaw::exponential(1.0), std::log(2.0)), 0.5, 1e-15);
  EXPECT_EQ(true_cdf(SuperPopulationLaw::exponential(1.0), -1e300), 0.0);
  EXPECT_EQ(true_cdf(SuperPopulationLaw::uniform01(), -1e300), 0.0);
  const auto two = SuperPopulationLaw::discrete({ 1.0, 2.0 }, { 0.5, 0.5 });
  EXPECT_EQ(true_cdf(two, -1e300), 0.0);
  EXPECT_EQ(true_cdf(two, 1.0), 0.5);
  EXPECT_EQ(true_cdf(two, std::nextafter(1.0, 0.0)), 0.0);
}

TEST(TrueCdf, NondecreasingOnAGrid)
{
  const SuperPopulationLaw laws[] = {
    SuperPopulationLaw::exponential(1.0),
    SuperPopulationLaw::uniform01(),
    SuperPopulationLaw::discrete({ 0.0, 1.0, 3.0 }, { 0.2, 0.5, 0.3 }),
  };
  for (const auto& law : laws) {
    double prev = 0.0;
    for (double t = -2.0; t <= 6.0; t += 0.01) {
      const double v = true_cdf(law, t);
      EXPECT_GE(v, prev);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
  }
}

TEST(TrueQuantile, Examples)
{
  EXPECT_NEAR(true_quantile(SuperPopulationLaw::exponential(1.0), 0.5), std::log(2.0), 1e-15);
  EXPECT_NEAR(true_quantile(SuperPopulationLaw::uniform01(), 0.25), 0.25, 1e-15);
  const auto two = SuperPopulationLaw::discrete({ 1.0, 2.0 }, { 0.5, 0.5 });
  EXPECT_EQ(true_quantile(two, 0.5), 1.0);
  EXPECT_EQ(true_quantile(two, 0.5000001), 2.0);
}

TEST(TrueQuantile, RoundTripForContinuousLaws)
{
  const SuperPopulationLaw laws[] = {
    SuperPopulationLaw::exponential(1.0),
    SuperPopulationLaw::exponential(3.5),
    SuperPopulationLaw::uniform01(),
  };
  for (const auto& law : laws)
    for (int k = 1; k <= 99; ++k) {
      const double a = k / 100.0;
      EXPECT_NEAR(true_cdf(law, true_quantile(law, a)), a, 1e-12);
    }
}

TEST(TrueQuantile, InfDefinitionOnAtoms)
{
  const auto law = SuperPopulationLaw::discrete({ 0.0, 1.0, 3.0 }, { 0.2, 0.5, 0.3 });
  for (int k = 1; k <= 99; ++k) {
    const double a = k / 100.0;
    const double q = true_quantile(law, a);
    EXPECT_GE(true_cdf(law, q), a);
    EXPECT_LT(true_cdf(law, std::nextafter(q, -1e300)), a);
  }
}

TEST(TruePovertyRate, Examples)
{
  EXPECT_NEAR(true_poverty_rate(SuperPopulationLaw::exponential(1.0), 0.5, 0.6),
              1.0 - std::pow(2.0, -0.6), 1e-12);
  EXPECT_NEAR(true_poverty_rate(SuperPopulationLaw::uniform01(), 0.5, 0.5), 0.25, 1e-12);
  EXPECT_NEAR(true_poverty_rate(SuperPopulationLaw::exponential(1.0), 0.3, 1.0 - 1e-12), 0.3, 1e-9);
  EXPECT_EQ(true_poverty_rate(SuperPopulationLaw::point_mass(2.0), 0.5, 0.6), 0.0);
}

TEST(TruePovertyRate, ExponentialIsRateFree)
{
  const double base = true_poverty_rate(SuperPopulationLaw::exponential(1.0), 0.4, 0.7);
  for (double rate : { 0.1, 0.5, 2.0, 17.0 })
    EXPECT_NEAR(true_poverty_rate(SuperPopulationLaw::exponential(rate), 0.4, 0.7), base, 1e-12);
}
