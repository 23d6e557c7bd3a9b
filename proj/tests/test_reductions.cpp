#include "oracles.hpp"

#include "orbitlab/errors.hpp"
#include "orbitlab/linalg.hpp"
#include "orbitlab/reductions.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace orbitlab;
using namespace orbitlab::reductions;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST(Spectrum, Validation) {
  EXPECT_NO_THROW(Spectrum(vec({3, 1, 1, 0})));
  EXPECT_THROW(Spectrum(vec({1, 3})), InvalidArgument);
  EXPECT_THROW(Spectrum(vec({1, -1})), InvalidArgument);
  EXPECT_EQ(Spectrum::from_unsorted(vec({1, 3, 2})).values(), vec({3, 2, 1}));
}

TEST(BalancedScalar, Examples) {
  const auto a = balanced_scalar(4.0);
  EXPECT_EQ(a.u, 2.0);
  EXPECT_EQ(a.v, 2.0);
  EXPECT_EQ(a.cost, 8.0);
  const auto b = balanced_scalar(-9.0);
  EXPECT_EQ(b.u, 3.0);
  EXPECT_EQ(b.v, -3.0);
  EXPECT_EQ(b.cost, 18.0);
  const auto c = balanced_scalar(0.0);
  EXPECT_EQ(c.cost, 0.0);
}

TEST(BalancedScalar, GridOracle) {
  for (double z : {0.5, 1.0, 4.0}) {
    const auto grid = test::scalar_factorization_grid(z);
    EXPECT_NEAR(grid.value, balanced_scalar(z).cost, 1e-6) << z;
  }
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double z = rng.uniform(-20.0, 20.0);
    const auto s = balanced_scalar(z);
    EXPECT_NEAR(s.cost, 2.0 * std::abs(z), 1e-12 * (1.0 + std::abs(z)));
    EXPECT_NEAR(s.u * s.v, z, 1e-12 * (1.0 + std::abs(z)));
  }
  for (int k = 0; k < 20; ++k) {
    const double z = rng.uniform(-20.0, 20.0);
    EXPECT_GE(test::scalar_factorization_grid(z).value, balanced_scalar(z).cost - 1e-9);
  }
}

TEST(ReducedScalarBias, Examples) {
  EXPECT_NEAR(*reduced_scalar_bias(vec({1, -2}), FeatureOperator::identity).value, std::log(2.0), 1e-15);
  EXPECT_NEAR(*reduced_scalar_bias(vec({std::exp(1.0), std::exp(2.0)}), FeatureOperator::identity).value, 3.0, 1e-14);
  const auto flat = reduced_scalar_bias(vec({2, 2, 2, 2}), FeatureOperator::forward_difference);
  EXPECT_TRUE(flat.singular());
  EXPECT_EQ(flat.singular_indices, (std::vector<Index>{0, 1, 2}));
  const auto partial = reduced_scalar_bias(vec({0, 3}), FeatureOperator::identity);
  EXPECT_EQ(partial.singular_indices, (std::vector<Index>{0}));
  Matrix a(1, 2);
  a << 1, 1;
  EXPECT_NEAR(*reduced_scalar_bias(vec({1, 2}), a).value, std::log(3.0), 1e-15);
}

TEST(BalancedMatrix, Examples) {
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 4.0;
  z(1, 1) = 1.0;
  const auto f = balanced_matrix(z, 2);
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 2.0;
  expect(1, 1) = 1.0;
  EXPECT_LT((f.u_star - expect).norm(), 1e-14);
  EXPECT_LT((f.v_star - expect).norm(), 1e-14);
  EXPECT_NEAR(f.cost, 10.0, 1e-14);
  EXPECT_NEAR(f.nuclear_norm, 5.0, 1e-14);

  const auto zero = balanced_matrix(Matrix::Zero(3, 2), 1);
  EXPECT_EQ(zero.cost, 0.0);
  EXPECT_TRUE(zero.u_star.isZero());
  EXPECT_THROW(balanced_matrix(z, 1), InvalidArgument);
}

TEST(BalancedMatrix, RandomizedOrbitOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix z = linalg::random_normal(3, 2, rng);
    const auto f = balanced_matrix(z, 2);
    EXPECT_GE(test::orbit_search_min_cost(f.u_star, f.v_star, rng), f.cost - 1e-6);
  }
}

TEST(BalancedMatrix, BalancedAndNuclearOnRandomLowRank) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Index rows = 1 + static_cast<Index>(rng.below(8));
    const Index cols = 1 + static_cast<Index>(rng.below(6));
    const Index rank = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>({rows, cols, 4}))));
    const Matrix z = linalg::random_normal(rows, rank, rng) * linalg::random_normal(rank, cols, rng);
    const auto f = balanced_matrix(z, rank);
    EXPECT_LT((f.u_star.transpose() * f.u_star - f.v_star.transpose() * f.v_star).norm(), 1e-10 * (1.0 + z.norm()));
    EXPECT_LT((f.u_star * f.v_star.transpose() - z).norm(), 1e-10 * (1.0 + z.norm()));
    EXPECT_NEAR(f.cost, 2.0 * f.nuclear_norm, 1e-10 * f.cost);
    EXPECT_NEAR(f.nuclear_norm, Eigen::JacobiSVD<Matrix>(z).singularValues().sum(), 1e-10 * (1.0 + f.nuclear_norm));
  }
}

TEST(GlLogdetFull, Examples) {
  EXPECT_NEAR(gl_logdet_full(Spectrum(vec({1, 1}))), 4.0 * std::log(2.0), 1e-14);
  EXPECT_NEAR(gl_logdet_full(Spectrum(vec({2}))), std::log(4.0), 1e-15);
  EXPECT_NEAR(gl_logdet_full(Spectrum(vec({3, 1}))), std::log(6.0) + 2.0 * std::log(4.0) + std::log(2.0), 1e-14);
  EXPECT_NEAR(gl_logdet_full(Spectrum(vec({3, 1}))), 5.2574953720, 1e-9);
  EXPECT_THROW(gl_logdet_full(Spectrum(vec({1, 0}))), InvalidArgument);
  for (Index r = 1; r <= 5; ++r) {
    EXPECT_NEAR(gl_logdet_full(Spectrum(Vector::Constant(r, 1.7))), static_cast<double>(r * r) * std::log(3.4), 1e-13);
  }
}

TEST(GlDetGammaFamily, Examples) {
  EXPECT_NEAR(gl_det_gamma_family(Spectrum(vec({1, 1})), 1.0).product, 16.0, 1e-12);
  const auto g = gl_det_gamma_family(Spectrum(vec({1, 1})), 0.1);
  EXPECT_NEAR(g.lambda12, 0.02, 1e-15);
  EXPECT_NEAR(g.product, 100.01 * 0.02 * 200.0 * 100.01, 1e-6);
  EXPECT_NEAR(g.product, 4.00080e4, 0.01);
  EXPECT_NEAR(gl_det_gamma_family(Spectrum(vec({1, 1})), 0.01).lambda12, 2e-4, 1e-18);
  EXPECT_THROW(gl_det_gamma_family(Spectrum(vec({1})), 0.5), InvalidArgument);
}

TEST(DeepConvBalance, Examples) {
  for (int l : {1, 2, 5}) EXPECT_DOUBLE_EQ(deep_conv_balance(1.0, l, true).magnitude, 1.0);
  EXPECT_NEAR(deep_conv_balance(8.0, 2, true).magnitude, 2.0, 1e-15);
  EXPECT_NEAR(deep_conv_balance(8.0, 3, false).magnitude, 2.0, 1e-15);
}

TEST(DeepConvBalance, GridOracle) {
  const double c = 2.0;
  const int l = 3;
  const double big_c = c * c;
  const auto f = [&](double t) { return std::pow(t, l) + big_c * l / t; };
  const auto grid = test::grid_minimize(f, 1e-4, 10.0, 1e-4);
  const double t = deep_conv_balance(c, l, true).squared_magnitude;
  EXPECT_NEAR(grid.argmin, t, 1e-3);
  EXPECT_NEAR(grid.value, f(t), 1e-6);
}

TEST(DeepConvBalance, PowerIdentity) {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const double c = rng.uniform(0.01, 50.0);
    const int l = 1 + static_cast<int>(rng.below(6));
    const double t = deep_conv_balance(c, l, true).squared_magnitude;
    EXPECT_NEAR(std::pow(t, l + 1), c * c, 1e-12 * c * c);
  }
}

TEST(CpBalance, Examples) {
  const auto b = cp_balance(8.0, 3);
  EXPECT_NEAR(b.squared_norm, 2.0, 1e-15);
  EXPECT_NEAR(b.norm, std::sqrt(2.0), 1e-15);
  EXPECT_EQ(cp_balance(1.0, 4).squared_norm, 1.0);
  EXPECT_THROW(cp_balance(0.0, 3), InvalidArgument);
  EXPECT_THROW(cp_balance(2.0, 1), InvalidArgument);
}

TEST(CpBalance, ConstrainedOptimizerOracle) {
  Rng rng(5);
  const double x = cp_balance(27.0, 3).squared_norm;
  for (int start = 0; start < 50; ++start) {
    const auto r = test::cp_constrained_min(27.0, rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
    EXPECT_NEAR(r[0], x, 1e-6);
    EXPECT_NEAR(r[1], x, 1e-6);
    EXPECT_NEAR(r[2], x, 1e-6);
    EXPECT_NEAR(r[3], 3.0 * x * x, 1e-6);
  }
}

TEST(TtBalance, Examples) {
  const auto id = tt_balance(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  EXPECT_LT((id.a - Matrix::Identity(2, 2)).norm(), 1e-14);
  EXPECT_LT(id.residual_after, 1e-14);

  Matrix u1 = Matrix::Zero(2, 2), u2 = Matrix::Zero(2, 2);
  u1(0, 0) = 2.0;
  u1(1, 1) = 1.0;
  u2(0, 0) = 1.0;
  u2(1, 1) = 2.0;
  const auto d = tt_balance(u1, u2);
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = std::sqrt(0.5);
  expect(1, 1) = std::sqrt(2.0);
  EXPECT_LT((d.a - expect).norm(), 1e-14);
  const Matrix balanced = (u1 * d.a).transpose() * (u1 * d.a);
  EXPECT_LT((balanced - 2.0 * Matrix::Identity(2, 2)).norm(), 1e-14);

  EXPECT_THROW(tt_balance(Matrix::Zero(3, 2), Matrix::Identity(2, 2)), InvalidArgument);
}

TEST(TtBalance, RandomCores) {
  Rng rng(6);
  for (int k = 0; k < 50; ++k) {
    const Matrix u1 = linalg::random_normal(6, 2, rng);
    const Matrix u2 = linalg::random_normal(2, 12, rng);
    const auto b = tt_balance(u1, u2);
    const Matrix v1 = u1 * b.a;
    const Matrix v2 = b.a.inverse() * u2;
    EXPECT_LT(b.residual_after, 1e-10);
    EXPECT_LT((v1.transpose() * v1 - v2 * v2.transpose()).norm(), 1e-10);
    EXPECT_LT((v1 * v2 - u1 * u2).norm(), 1e-12 * (u1 * u2).norm());
  }
}

TEST(PcaLambdaSolve, Examples) {
  EXPECT_EQ(pca_lambda_solve(vec({1, 1, 1}), 0.0), Vector::Ones(3));
  const Vector boundary = pca_lambda_solve(vec({0, 1}), 0.1);
  EXPECT_EQ(boundary(0), 0.0);
  EXPECT_GT(boundary(1), 0.0);
  EXPECT_LT(boundary(1), 1.0);
  EXPECT_LT(pca_stationarity_residual(vec({0, 1}), 0.1, boundary), 1e-10);

  const Vector pair = pca_lambda_solve(vec({1, 1}), 0.1);
  const double root = (4.0 + std::sqrt(14.4)) / 8.0;
  EXPECT_NEAR(pair(0), root, 1e-12);
  EXPECT_NEAR(pair(1), root, 1e-12);
  EXPECT_NEAR(root, 0.974342, 1e-6);
}

TEST(PcaLambdaSolve, Properties) {
  Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    const Index r = 1 + static_cast<Index>(rng.below(6));
    Vector s(r);
    for (Index i = 0; i < r; ++i) s(i) = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.5, 5.0);
    EXPECT_EQ(pca_lambda_solve(s, 0.0), Vector::Ones(r));
    // kappa (r - 1) <= min s / 2 keeps an interior root in existence.
    const double kappa = rng.uniform(1e-6, 0.04);
    const Vector lambda = pca_lambda_solve(s, kappa);
    EXPECT_LT(pca_stationarity_residual(s, kappa, lambda), 1e-10);
    // A lone coordinate with nothing to couple to keeps its unconstrained root 1.
    const bool coupled = r >= 2;
    for (Index i = 0; i < r; ++i) {
      if (s(i) > 0.0 && !coupled) {
        EXPECT_EQ(lambda(i), 1.0);
      } else if (s(i) > 0.0) {
        EXPECT_GT(lambda(i), 0.0);
        EXPECT_LT(lambda(i), 1.0);
      } else {
        EXPECT_EQ(lambda(i), 0.0);
      }
    }
  }
}

TEST(PcaLambdaSolve, NoInteriorRootIsAnError) {
  EXPECT_THROW(pca_lambda_solve(vec({0.01, 0.01}), 5.0), NumericalFailure);
}

TEST(BlockBalance, Examples) {
  const auto b = block_balance(vec({3, 4}));
  EXPECT_NEAR(b.s_star, std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(b.value, 10.0, 1e-14);
  EXPECT_FALSE(b.boundary);
  const auto zero = block_balance(vec({0, 0}));
  EXPECT_EQ(zero.s_star, 0.0);
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_TRUE(zero.boundary);
}

TEST(BlockBalance, GridOracle) {
  const Vector w = vec({1, 0});
  const auto grid = test::grid_minimize([&](double s) { return s * s + w.squaredNorm() / (s * s); }, 1e-4, 10.0, 1e-4);
  EXPECT_NEAR(grid.value, block_balance(w).value, 1e-6);
  EXPECT_NEAR(grid.argmin, block_balance(w).s_star, 1e-4);
}

TEST(DiscreteOrbitSize, Examples) {
  Matrix same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  const auto all = discrete_orbit_size(same, Matrix::Ones(1, 3));
  EXPECT_EQ(all.stabilizer_size, 6u);
  EXPECT_EQ(all.orbit_size, 1u);

  Rng rng(8);
  const auto distinct = discrete_orbit_size(linalg::random_normal(3, 2, rng), linalg::random_normal(1, 3, rng));
  EXPECT_EQ(distinct.stabilizer_size, 1u);
  EXPECT_EQ(distinct.orbit_size, 6u);

  const auto [w1, w2] = test::neurons_with_multiplicities({2, 2}, 3, 1, rng);
  const auto pairs = discrete_orbit_size(w1, w2);
  EXPECT_EQ(pairs.stabilizer_size, 4u);
  EXPECT_EQ(pairs.orbit_size, 6u);
}

TEST(DiscreteOrbitSize, MatchesPermutationEnumeration) {
  Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const Index m = 1 + static_cast<Index>(rng.below(8));
    std::vector<Index> mult;
    for (Index left = m; left > 0;) {
      const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(left)));
      mult.push_back(k);
      left -= k;
    }
    const auto [w1, w2] = test::neurons_with_multiplicities(mult, 2, 2, rng);
    const auto count = discrete_orbit_size(w1, w2);
    EXPECT_EQ(count.orbit_size * count.stabilizer_size, factorial(static_cast<int>(m)));
    if (m <= 5) {
      const auto [orbit, stab] = test::enumerate_permutation_orbit(w1, w2);
      EXPECT_EQ(count.orbit_size, orbit);
      EXPECT_EQ(count.stabilizer_size, stab);
    }
  }
}

TEST(HomogeneityBalanceRatio, Examples) {
  EXPECT_EQ(homogeneity_balance_ratio(1.0), 1.0);
  EXPECT_NEAR(homogeneity_balance_ratio(4.0), 8.0, 1e-14);
  EXPECT_THROW(homogeneity_balance_ratio(0.0), InvalidArgument);
}

TEST(HomogeneityBalanceRatio, OrbitScanOracle) {
  Rng rng(10);
  for (double k : {2.0, 3.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      const double a = rng.uniform(0.1, 5.0), b = rng.uniform(0.1, 5.0);
      // Along w -> alpha w, v -> alpha^{-k} v: log(|alpha w|^2 + k^2 |alpha^{-k} v|^2).
      const auto f = [&](double log_alpha) {
        const double alpha = std::exp(log_alpha);
        return std::log(alpha * alpha * a + k * k * std::pow(alpha, -2.0 * k) * b);
      };
      const double alpha = std::exp(test::golden_minimize(f, -10.0, 10.0));
      const double ratio = alpha * std::sqrt(a) / (std::pow(alpha, -k) * std::sqrt(b));
      EXPECT_NEAR(ratio, homogeneity_balance_ratio(k), 1e-6 * homogeneity_balance_ratio(k));
    }
  }
}
