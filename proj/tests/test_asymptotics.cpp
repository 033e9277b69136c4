#include <survey/asymptotics.hpp>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>

using namespace survey;

namespace {

DesignConstants constants(double lambda, double mu1, double mu2)
{
  return DesignConstants::from_mu(lambda, mu1, mu2);
}

const auto exp1 = SuperPopulationLaw::exponential(1.0);

} // namespace

TEST(LimitCovariance, Examples)
{
  const auto c1 = constants(0.0, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(limit_covariance(c1, CovarianceForm::HJ_vs_FN, 0.5, 0.5), 0.25);
  const auto si = constants(0.5, 0.5, -0.5);
  EXPECT_DOUBLE_EQ(limit_covariance(si, CovarianceForm::HT_vs_FN, 0.5, 0.5), 0.125);
  for (auto form : { CovarianceForm::HT_vs_FN, CovarianceForm::HT_vs_F,
                     CovarianceForm::HJ_vs_FN, CovarianceForm::HJ_vs_F })
    EXPECT_EQ(limit_covariance(si, exp1, form, -1.0, 0.7), 0.0);
}

TEST(LimitCovariance, LawOverloadUsesTheCdf)
{
  const auto c = constants(0.1, 0.9, -0.9);
  const double s = 0.4, t = 1.3;
  EXPECT_DOUBLE_EQ(limit_covariance(c, exp1, CovarianceForm::HT_vs_F, s, t),
                   limit_covariance(c, CovarianceForm::HT_vs_F, exp1.cdf(s), exp1.cdf(t)));
}

TEST(LimitCovariance, SymmetricAndHajekFormsArePositiveSemidefinite)
{
  const std::vector<double> grid{ 0.05, 0.2, 0.4, 0.7, 1.0, 1.5, 2.2, 3.5 };
  const DesignConstants cs[] = { constants(0.05, 0.95, -0.95), constants(0.05, 1.5125, 0.0),
                                 constants(0.5, 0.0, 0.0), constants(0.2, 3.0, -0.4) };
  for (const auto& c : cs)
    for (auto form : { CovarianceForm::HJ_vs_FN, CovarianceForm::HJ_vs_F,
                       CovarianceForm::HT_vs_FN, CovarianceForm::HT_vs_F }) {
      Eigen::MatrixXd m(grid.size(), grid.size());
      for (std::size_t a = 0; a < grid.size(); ++a)
        for (std::size_t b = 0; b < grid.size(); ++b)
          m(a, b) = limit_covariance(c, exp1, form, grid[a], grid[b]);
      EXPECT_EQ((m - m.transpose()).cwiseAbs().maxCoeff(), 0.0);
      if (form == CovarianceForm::HJ_vs_FN || form == CovarianceForm::HJ_vs_F) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
      }
    }
}

TEST(PovertyVariance, ExponentialExamples)
{
  // independent factors: phi = 1 - 2^-0.6, slope = 0.6 f(0.6 ln 2) / f(ln 2) = 1.2 * 2^-0.6
  const double phi = 1.0 - std::pow(2.0, -0.6);
  const double slope = 1.2 * std::pow(2.0, -0.6);
  const auto in = poverty_inputs(exp1, 0.5, 0.6);
  EXPECT_NEAR(in.phi, phi, 1e-14);
  EXPECT_NEAR(in.slope, slope, 1e-14);
  EXPECT_NEAR(in.phi, 0.340246, 1e-6);
  EXPECT_NEAR(in.slope, 0.791705, 1e-6);

  const double ht = slope * slope * 0.5 + phi - 2.0 * slope * phi;
  EXPECT_NEAR(poverty_variance_ht(1.0, 0.0, in), ht, 1e-14);
  EXPECT_NEAR(poverty_variance_ht(1.0, 0.0, in), 0.114895, 1e-6);

  const double hj = slope * slope * 0.25 + phi * (1.0 - phi) - slope * phi;
  EXPECT_NEAR(poverty_variance_hj(1.0, in), hj, 1e-14);
  EXPECT_NEAR(poverty_variance_hj(1.0, in), 0.111803, 1e-6);
}

TEST(PovertyVariance, DesignConstantOverloads)
{
  const auto c = design_constants(Design::srswor(1000, 500));
  const auto in = poverty_inputs(exp1, 0.5, 0.6);
  EXPECT_DOUBLE_EQ(poverty_variance_ht(c, exp1, 0.5, 0.6),
                   poverty_variance_ht(c.gamma_pi1, c.gamma_pi2, in));
  EXPECT_DOUBLE_EQ(poverty_variance_hj(c, exp1, 0.5, 0.6), poverty_variance_hj(c.gamma_pi1, in));
}

TEST(PovertyVariance, HtWithOppositeGammasIsHajek)
{
  for (int i = 1; i <= 9; ++i)
    for (int j = 1; j <= 9; ++j) {
      const auto in = poverty_inputs(exp1, i / 10.0, j / 10.0);
      for (double g : { 0.3, 1.0, 1.7 })
        EXPECT_NEAR(poverty_variance_ht(g, -g, in), poverty_variance_hj(g, in), 1e-12);
    }
}

TEST(PovertyVariance, HajekIsLinearInGamma)
{
  const auto in = poverty_inputs(exp1, 0.5, 0.6);
  const double base = poverty_variance_hj(1.0, in);
  for (double g : { 0.0, 0.25, 1.5625, 4.0 })
    EXPECT_NEAR(poverty_variance_hj(g, in), g * base, 1e-14);
}

TEST(PovertyVariance, BetaOneCancelsExactly)
{
  for (double a : { 0.1, 0.5, 0.9 })
    EXPECT_NEAR(poverty_variance_hj(1.3, poverty_inputs(exp1, a, 1.0)), 0.0, 1e-14);
}

TEST(PovertyVariance, VanishesAsAlphaShrinks)
{
  double prev = 1.0;
  for (double a : { 0.2, 0.1, 0.05, 0.01, 0.001, 1e-5 }) {
    const double v = poverty_variance_hj(1.0, poverty_inputs(exp1, a, 0.6));
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-5);
  EXPECT_LT(poverty_variance_ht(1.0, 0.0, poverty_inputs(exp1, 1e-5, 0.6)), 1e-5);
}

TEST(PovertyVariance, ScaleEquivariance)
{
  for (double rate : { 0.2, 3.0, 11.0 }) {
    const auto law = SuperPopulationLaw::exponential(rate);
    EXPECT_NEAR(poverty_variance_hj(1.0, poverty_inputs(law, 0.4, 0.7)),
                poverty_variance_hj(1.0, poverty_inputs(exp1, 0.4, 0.7)), 1e-12);
    EXPECT_NEAR(poverty_variance_ht(1.2, -0.3, poverty_inputs(law, 0.4, 0.7)),
                poverty_variance_ht(1.2, -0.3, poverty_inputs(exp1, 0.4, 0.7)), 1e-12);
  }
}

TEST(PovertyVariance, QuadraticFormRewrite)
{
  // sigma^2 = Var(-slope B(q) + B(beta q)) for the limit process B of each form.
  for (double a : { 0.2, 0.5, 0.8 })
    for (double b : { 0.3, 0.6, 0.9 }) {
      const auto in = poverty_inputs(exp1, a, b);
      const Eigen::Vector2d w(-in.slope, 1.0);
      const double Fq = a, Fbq = in.phi;
      for (double g1 : { 0.5, 1.0, 1.5625 }) {
        Eigen::Matrix2d hj, ht;
        const double g2 = -0.3;
        hj << g1 * (Fq - Fq * Fq), g1 * (std::min(Fq, Fbq) - Fq * Fbq),
          g1 * (std::min(Fq, Fbq) - Fq * Fbq), g1 * (Fbq - Fbq * Fbq);
        ht << g1 * Fq + g2 * Fq * Fq, g1 * std::min(Fq, Fbq) + g2 * Fq * Fbq,
          g1 * std::min(Fq, Fbq) + g2 * Fq * Fbq, g1 * Fbq + g2 * Fbq * Fbq;
        const double v_hj = w.dot(hj * w);
        EXPECT_NEAR(poverty_variance_hj(g1, in), v_hj, 1e-14);
        EXPECT_GE(v_hj, 0.0);
        EXPECT_NEAR(poverty_variance_ht(g1, g2, in), w.dot(ht * w), 1e-14);
      }
    }
}

TEST(PovertyInputs, ZeroDensityIsAnError)
{
  EXPECT_THROW(poverty_inputs(SuperPopulationLaw::point_mass(1.0), 0.5, 0.6),
               UndefinedDerivativeError);
}

TEST(Plugin, CensusDrawUsesPopulationQuantities)
{
  const auto pop = generate_population(exp1, 400, 2);
  const auto design = Design::poisson(std::vector<double>(400, 1.0));
  RandomStream rng(1);
  const auto d = design.draw(rng);
  ASSERT_EQ(d.size(), 400u);
  const auto c = design_constants(design);
  EXPECT_NEAR(c.gamma_pi1, 1.0, 1e-15);
  const auto est = plugin_poverty_estimate(d, pop.y, 400, c, 0.5, 0.6, Weighting::HJ);
  EXPECT_EQ(est.phi, poverty_rate(population_ecdf(pop.y), 0.5, 0.6));
  const PovertyInputs in{ 0.5, est.phi, 0.6 * est.f_beta_quantile / est.f_quantile };
  EXPECT_DOUBLE_EQ(est.variance, poverty_variance_hj(1.0, in));
}

TEST(Plugin, HajekEstimatesAreNonnegative)
{
  const auto pop = generate_population(exp1, 2000, 3);
  RandomStream prng(4);
  const auto design = make_two_level_poisson(2000, 0.02, 0.08, prng);
  const auto c = design_constants(design);
  RandomStream rng(5);
  for (int r = 0; r < 200; ++r) {
    const auto d = design.draw(rng);
    for (auto rule : { QuantileRule::Infimum, QuantileRule::Interpolated }) {
      const double v = plugin_poverty_variance(d, pop.y, 2000, c, 0.5, 0.6, Weighting::HJ, rule);
      EXPECT_GE(v, 0.0);
      EXPECT_TRUE(std::isfinite(v));
    }
  }
}
