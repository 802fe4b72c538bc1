#include <gtest/gtest.h>

#include <random>
#include <stdexcept>

#include "soclab/rational.hpp"

using soclab::Rational;

TEST(Rational, ReducesAndNormalizesSign) {
  const Rational r(6, -4);
  EXPECT_EQ(r.num(), -3);
  EXPECT_EQ(r.den(), 2);
  EXPECT_EQ(Rational(0, 5), Rational(0));
}

TEST(Rational, Arithmetic) {
  EXPECT_EQ(Rational(1, 2) + Rational(1, 3), Rational(5, 6));
  EXPECT_EQ(Rational(1, 2) - Rational(1, 3), Rational(1, 6));
  EXPECT_EQ(Rational(2, 3) * Rational(9, 4), Rational(3, 2));
  EXPECT_EQ(Rational(2, 3) / Rational(4, 9), Rational(3, 2));
  EXPECT_EQ(-Rational(4, 3), Rational(-4, 3));
  EXPECT_LT(Rational(-1, 2), Rational(1, 3));
}

TEST(Rational, ZeroDenominatorAndDivisionThrow) {
  EXPECT_THROW(Rational(1, 0), std::domain_error);
  EXPECT_THROW(Rational(1) / Rational(0), std::domain_error);
}

TEST(Rational, OverflowIsDetected) {
  const Rational big(std::numeric_limits<std::int64_t>::max());
  EXPECT_THROW(big + big, std::overflow_error);
}

TEST(Rational, ParseAndPrint) {
  EXPECT_EQ(Rational::parse("4/3"), Rational(4, 3));
  EXPECT_EQ(Rational::parse("-2"), Rational(-2));
  EXPECT_EQ(Rational(4, 3).to_string(), "4/3");
  EXPECT_EQ(Rational(-2).to_string(), "-2");
  EXPECT_THROW(Rational::parse("x"), std::invalid_argument);
}

TEST(Rational, FieldIdentitiesOnRandomValues) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> d(-50, 50);
  for (int k = 0; k < 2000; ++k) {
    const auto nz = [&] {
      std::int64_t v = 0;
      while (v == 0) v = d(rng);
      return v;
    };
    const Rational a(d(rng), nz()), b(d(rng), nz()), c(d(rng), nz());
    EXPECT_EQ((a + b) + c, a + (b + c));
    EXPECT_EQ(a * (b + c), a * b + a * c);
    if (!b.is_zero()) {
      EXPECT_EQ((a / b) * b, a);
    }
  }
}
