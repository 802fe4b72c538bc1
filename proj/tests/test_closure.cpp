#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "soclab/closure.hpp"

using soclab::DriveRegime;
using soclab::Rational;

TEST(K41, UnitInputs) {
  const auto r = soclab::k41_relations(1, 1, 1);
  EXPECT_DOUBLE_EQ(r.reynolds, 1.0);
  EXPECT_DOUBLE_EQ(r.eta, 1.0);
}

TEST(K41, HighReynoldsExample) {
  const auto r = soclab::k41_relations(10, 1, 1e-3);
  EXPECT_NEAR(r.reynolds, 1e4, 1e-8);
  EXPECT_NEAR(r.eta, 1e-3, 1e-15);
}

TEST(K41, FractionalPower) {
  EXPECT_NEAR(soclab::k41_relations(2, 1, 1).eta, std::pow(2.0, -0.75), 1e-15);
  EXPECT_NEAR(soclab::k41_relations(2, 1, 1).eta, 0.5946, 1e-4);
}

TEST(K41, NonPositiveInputsAreDomainErrors) {
  EXPECT_THROW(soclab::k41_relations(0, 1, 1), std::domain_error);
  EXPECT_THROW(soclab::k41_relations(1, -1, 1), std::domain_error);
  EXPECT_THROW(soclab::k41_relations(1, 1, 0), std::domain_error);
}

TEST(K41, ScaleRatioToFourThirdsReproducesReynolds) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> logu(-3, 3);
  for (int k = 0; k < 10000; ++k) {
    const double U = std::pow(10.0, logu(rng)), L0 = std::pow(10.0, logu(rng)), nu = std::pow(10.0, logu(rng));
    const auto r = soclab::k41_relations(U, L0, nu);
    EXPECT_EQ(U * L0 / nu, r.reynolds);
    EXPECT_LT(std::abs(std::pow(L0 / r.eta, 4.0 / 3.0) / r.reynolds - 1.0), 1e-12);
    EXPECT_NEAR(r.dof_estimate / std::pow(L0 / r.eta, 3.0), 1.0, 1e-12);
  }
}

TEST(ClosureRelation, ExponentRatios) {
  EXPECT_EQ(soclab::ClosureRelation::kolmogorov().beta_n, Rational(4, 9));
  EXPECT_EQ(soclab::ClosureRelation::avalanche(2, Rational(2)).beta_n, Rational(-1));
  EXPECT_EQ(soclab::ClosureRelation::avalanche(2, Rational(3, 2)).beta_n, Rational(-4, 3));
  EXPECT_THROW(soclab::ClosureRelation(Rational(1), Rational(0)), std::domain_error);
}

TEST(AvalancheRelations, SteadyStateBalanceMatchesPrediction) {
  for (const double h : {1e-6, 0.3, 4.0, 250.0}) {
    const auto r = soclab::avalanche_relations(h, h * 100.0 * 100.0, 100.0, 2, 2.0);
    EXPECT_NEAR(r.control, 1e-4, 1e-18);
    EXPECT_NEAR(r.control_predicted, 1e-4, 1e-18);
  }
}

TEST(AvalancheRelations, ExponentAndSingleCellLimits) {
  EXPECT_DOUBLE_EQ(soclab::avalanche_relations(1, 1, 10, 2, 2.0).beta_n, -1.0);
  const auto one = soclab::avalanche_relations(1, 1, 1, 2, 1.5);
  EXPECT_DOUBLE_EQ(one.control_predicted, 1.0);
  EXPECT_DOUBLE_EQ(one.dof_estimate, 1.0);
}

TEST(AvalancheRelations, ZeroDissipationIsReported) {
  try {
    soclab::avalanche_relations(1, 0, 10, 2, 2.0);
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_STREQ(e.what(), "no dissipation channel");
  }
  EXPECT_THROW(soclab::avalanche_relations(-1, 1, 10, 2, 2.0), std::domain_error);
  EXPECT_THROW(soclab::avalanche_relations(1, 1, 0.5, 2, 2.0), std::domain_error);
  EXPECT_THROW(soclab::avalanche_relations(1, 1, 10, 4, 2.0), std::domain_error);
}

TEST(DriveRegime, Examples) {
  EXPECT_EQ(soclab::classify_drive_regime(0.1, 4, 100, 2), DriveRegime::SDIDT);
  EXPECT_EQ(soclab::classify_drive_regime(16, 4, 100, 2), DriveRegime::Intermediate);
  EXPECT_EQ(soclab::classify_drive_regime(4e4 * 0.6, 4, 100, 2), DriveRegime::Laminar);
}

TEST(DriveRegime, MonotoneInDrive) {
  int last = 0;
  for (double h = 0.01; h < 1e6; h *= 1.07) {
    const int now = static_cast<int>(soclab::classify_drive_regime(h, 4, 100, 2));
    EXPECT_GE(now, last);
    last = now;
  }
  EXPECT_EQ(last, static_cast<int>(DriveRegime::Laminar));
}

TEST(DriveRegime, PreconditionViolations) {
  EXPECT_THROW(soclab::classify_drive_regime(1, 4, 100, 2, 1.0), std::domain_error);
  EXPECT_THROW(soclab::classify_drive_regime(0, 4, 100, 2), std::domain_error);
}
