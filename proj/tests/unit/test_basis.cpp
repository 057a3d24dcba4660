// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "numprobe/basis.hpp"
#include "numprobe/error.hpp"

namespace numprobe {
namespace {

std::vector<double> row(const BasisMatrix& b, Eigen::Index i) {
  const Vector r = b.values().row(i).transpose();
  return {r.data(), r.data() + r.size()};
}

// Base-2 digits by repeated division, most significant first.
std::vector<double> base2(long value, int width) {
  std::vector<double> digits(static_cast<std::size_t>(width), 0.0);
  for (int pos = width - 1; pos >= 0; --pos) {
    digits[static_cast<std::size_t>(pos)] = static_cast<double>(value % 2);
    value /= 2;
  }
  return digits;
}

TEST(BinaryBasis, SmallRows) {
  const BasisMatrix b = binary_basis(8);
  EXPECT_EQ(b.kind(), BasisKind::binary);
  EXPECT_EQ(b.n_features(), 3);
  EXPECT_EQ(row(b, 5), (std::vector<double>{1, 0, 1}));
  EXPECT_EQ(row(b, 0), (std::vector<double>{0, 0, 0}));
}

TEST(BinaryBasis, Row999OfAThousand) {
  const BasisMatrix b = binary_basis(1000);
  EXPECT_EQ(b.n_features(), 10);
  EXPECT_EQ(row(b, 999), (std::vector<double>{1, 1, 1, 1, 1, 0, 0, 1, 1, 1}));
  for (long i = 0; i < 1000; ++i) ASSERT_EQ(row(b, i), base2(i, 10)) << i;
}

TEST(BinaryBasis, WidthIsCeilLog2) {
  EXPECT_EQ(binary_basis(2).n_features(), 1);
  EXPECT_EQ(binary_basis(3).n_features(), 2);
  EXPECT_EQ(binary_basis(1024).n_features(), 10);
  EXPECT_EQ(binary_basis(1025).n_features(), 11);
  EXPECT_THROW(binary_basis(1), PreconditionError);
  EXPECT_THROW(binary_basis(0), PreconditionError);
}

TEST(BinaryBasis, PowersOfTwoReconstructTheInteger) {
  for (int n : {2, 7, 100, 1000, 4097}) {
    const BasisMatrix b = binary_basis(n);
    const int k = b.n_features();
    Vector powers(k);
    for (int j = 0; j < k; ++j) powers(j) = std::ldexp(1.0, k - 1 - j);
    const Vector recon = b.values() * powers;
    for (int i = 0; i < n; ++i) ASSERT_EQ(recon(i), i);
    EXPECT_TRUE((b.values().array() == 0.0 || b.values().array() == 1.0).all());
  }
}

TEST(FourierBasis, RowZeroIsSinZeroCosOne) {
  const BasisMatrix b = fourier_basis(50, 16);
  for (Eigen::Index j = 0; j < 16; ++j) EXPECT_EQ(b.values()(0, j), j % 2 ? 1.0 : 0.0);
}

TEST(FourierBasis, QuarterTurnFrequency) {
  const BasisMatrix b = fourier_basis(4, 2, FrequencySpec::from_periods({4.0}));
  ASSERT_EQ(b.frequencies().size(), 1u);
  EXPECT_NEAR(b.frequencies()[0], std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(b.values()(1, 0), 1.0, 1e-15);
  EXPECT_LT(std::abs(b.values()(1, 1)), 1e-12);
}

TEST(FourierBasis, ColumnsFollowSinCosLayout) {
  const std::vector<double> periods{3.0, 7.5, 40.0};
  const BasisMatrix b = fourier_basis(30, 6, FrequencySpec::from_periods(periods));
  for (int i = 0; i < 30; ++i) {
    for (std::size_t m = 0; m < periods.size(); ++m) {
      const double w = 2 * std::numbers::pi / periods[m];
      EXPECT_NEAR(b.values()(i, 2 * m), std::sin(i * w), 1e-12);
      EXPECT_NEAR(b.values()(i, 2 * m + 1), std::cos(i * w), 1e-12);
    }
  }
}

TEST(FourierBasis, DefaultThousandHasUnitPairsAndDistinctRows) {
  const BasisMatrix b = fourier_basis(1000);
  ASSERT_EQ(b.n_features(), 128);
  ASSERT_EQ(b.frequencies().size(), 64u);
  const Matrix& v = b.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index m = 0; m < 64; ++m) {
      ASSERT_NEAR(v(i, 2 * m) * v(i, 2 * m) + v(i, 2 * m + 1) * v(i, 2 * m + 1), 1.0, 1e-12);
    }
  }
  double closest = INFINITY;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < v.rows(); ++j) closest = std::min(closest, (v.row(i) - v.row(j)).squaredNorm());
  }
  EXPECT_GT(closest, 0.0);
}

TEST(FourierBasis, DefaultPeriodsSpanTheRangeAndIncludeBaseTen) {
  const std::vector<double> p = default_periods(1000, 128);
  ASSERT_EQ(p.size(), 64u);
  EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
  EXPECT_DOUBLE_EQ(p.front(), 2.0);
  EXPECT_DOUBLE_EQ(p.back(), 2000.0);
  for (double base : {10.0, 100.0, 1000.0}) EXPECT_NE(std::find(p.begin(), p.end(), base), p.end()) << base;
}

TEST(FourierBasis, RejectsBadSpecs) {
  EXPECT_THROW(fourier_basis(10, 7), PreconditionError);
  EXPECT_THROW(fourier_basis(10, 4, FrequencySpec::from_periods({5.0, 5.0})), PreconditionError);
  EXPECT_THROW(fourier_basis(10, 4, FrequencySpec::from_periods({5.0})), PreconditionError);
  EXPECT_THROW(fourier_basis(10, 2, FrequencySpec::from_periods({-3.0})), PreconditionError);
  // Period 1 maps every integer to the same row.
  EXPECT_THROW(fourier_basis(10, 2, FrequencySpec::from_periods({1.0})), PreconditionError);
}

TEST(FrequencySpec, ParsesDefaultAndLists) {
  EXPECT_TRUE(FrequencySpec::parse("default").is_default());
  const FrequencySpec s = FrequencySpec::parse("2,5,10.5");
  EXPECT_EQ(s.periods, (std::vector<double>{2, 5, 10.5}));
  EXPECT_EQ(FrequencySpec::parse(s.to_string()).periods, s.periods);
  EXPECT_EQ(FrequencySpec::default_spec().to_string(), "default");
  EXPECT_THROW(FrequencySpec::parse("2,x"), PreconditionError);
}

}  // namespace
}  // namespace numprobe
