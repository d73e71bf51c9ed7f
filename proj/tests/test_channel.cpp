// SPDX-License-Identifier: Apache-2.0
//
// sparse-csi: sparsity-inspired CSI acquisition toolkit for massive MIMO
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#include <sparse_csi/channel.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace sparse_csi;

namespace
{
    std::vector<Index> intersection(const std::vector<AngularChannel> &g)
    {
        std::vector<Index> common = g.front().support;
        for (const auto &ch : g)
        {
            std::vector<Index> next;
            std::set_intersection(common.begin(), common.end(), ch.support.begin(), ch.support.end(),
                                  std::back_inserter(next));
            common = next;
        }
        return common;
    }

    double min_eigenvalue(const CMat &R)
    {
        return Eigen::SelfAdjointEigenSolver<CMat>(R, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    }

    double max_eigenvalue(const CMat &R)
    {
        return Eigen::SelfAdjointEigenSolver<CMat>(R, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    }
} // namespace

TEST(DftBasis, SmallCases)
{
    EXPECT_EQ(dft_basis(1)(0, 0), Complex(1.0, 0.0));
    const CMat U4 = dft_basis(4);
    for (Index m = 0; m < 4; ++m)
        EXPECT_NEAR(std::abs(U4(m, 0) - Complex(0.5, 0.0)), 0.0, 1e-15);
    EXPECT_THROW(dft_basis(0), std::invalid_argument);
}

TEST(DftBasis, UnitaryUpTo512)
{
    for (Index M : {2, 3, 8, 17, 64, 100, 257, 512})
    {
        const CMat U = dft_basis(M);
        EXPECT_LT((U.adjoint() * U - CMat::Identity(M, M)).norm(), 1e-10) << "M=" << M;
    }
}

TEST(DftBasis, ColumnsMatchDefinition)
{
    // independent oracle: explicit exponentials
    const Index M = 8;
    const CMat U = dft_basis(M);
    for (Index j = 0; j < M; ++j)
        for (Index m = 0; m < M; ++m)
            EXPECT_LT(std::abs(U(m, j) - std::exp(Complex(0, -2.0 * kPi * j * m / M)) / std::sqrt(8.0)), 1e-14);
}

TEST(SteeringVector, BroadsideAndModulus)
{
    const CVec a0 = steering_vector(0.0, 16);
    EXPECT_LT((a0 - CVec::Ones(16)).norm(), 1e-14);
    RandomStream rng(1);
    for (int t = 0; t < 20; ++t)
        EXPECT_NEAR(steering_vector(rng.uniform(-1.5, 1.5), 32).squaredNorm(), 32.0, 1e-10);
}

TEST(SteeringVector, FarApartAnglesAreNearlyOrthogonal)
{
    const Index M = 256;
    const CVec a = steering_vector(-0.6, M), b = steering_vector(0.5, M);
    EXPECT_LT(std::abs(a.dot(b)) / M, 0.1);
}

TEST(AngularChannel, SupportSizes)
{
    RandomStream rng(2);
    const auto ch = synthesize_angular_channel(100, 10, rng);
    EXPECT_EQ(ch.sparsity(), 10);
    EXPECT_TRUE(std::is_sorted(ch.support.begin(), ch.support.end()));
    Index nonzero = 0;
    for (Index i = 0; i < ch.size(); ++i)
        nonzero += std::abs(ch.coeffs[i]) > 0.0;
    EXPECT_EQ(nonzero, 10);

    const auto zero = synthesize_angular_channel(16, 0, rng);
    EXPECT_EQ(zero.coeffs.norm(), 0.0);
    EXPECT_TRUE(zero.support.empty());

    const auto full = synthesize_angular_channel(16, 16, rng);
    EXPECT_EQ(full.sparsity(), 16);
    EXPECT_GT(full.coeffs.cwiseAbs().minCoeff(), 0.0);
    EXPECT_THROW(synthesize_angular_channel(16, 17, rng), std::invalid_argument);
}

TEST(AngularChannel, FromCoeffsSupportMatchesNonzeros)
{
    CVec c = CVec::Zero(6);
    c[1] = 2.0;
    c[4] = Complex(0, 1e-300);
    const auto ch = AngularChannel::from_coeffs(c);
    EXPECT_EQ(ch.support, (std::vector<Index>{1, 4}));
}

TEST(ToDense, SingleAtomAndZero)
{
    const Index M = 12;
    const CMat U = dft_basis(M);
    CVec c = CVec::Zero(M);
    c[5] = 1.0;
    EXPECT_LT((to_dense(AngularChannel::from_coeffs(c)) - U.col(5)).norm(), 1e-14);
    EXPECT_EQ(to_dense(AngularChannel::from_coeffs(CVec::Zero(M))).norm(), 0.0);
}

TEST(ToDense, RoundTripAndParseval)
{
    RandomStream rng(3);
    const CMat U = dft_basis(64);
    for (int t = 0; t < 20; ++t)
    {
        const auto ch = synthesize_angular_channel(64, 8, rng);
        const CVec h = to_dense(ch, U);
        EXPECT_LT((U.adjoint() * h - ch.coeffs).norm(), 1e-12);
        EXPECT_NEAR(h.norm(), ch.coeffs.norm(), 1e-10);
    }
}

TEST(CommonSupportGroup, IntersectionContainsCommonSet)
{
    RandomStream rng(4);
    const auto full = synthesize_common_support_group(100, 4, 10, 10, rng);
    for (const auto &ch : full)
        EXPECT_EQ(ch.support, full.front().support);

    const auto none = synthesize_common_support_group(100, 4, 10, 0, rng);
    for (const auto &ch : none)
        EXPECT_EQ(ch.sparsity(), 10);

    for (int t = 0; t < 50; ++t)
    {
        const Index sc = t % 11;
        const auto g = synthesize_common_support_group(100, 4, 10, sc, rng);
        EXPECT_GE(static_cast<Index>(intersection(g).size()), sc);
        for (const auto &ch : g)
            EXPECT_EQ(ch.sparsity(), 10);
    }
    EXPECT_THROW(synthesize_common_support_group(20, 4, 10, 0, rng), std::invalid_argument);
}

TEST(MultipathChannel, SinglePathAtBroadside)
{
    RandomStream rng(5);
    const auto [mp, h] = synthesize_multipath_channel(1, {0.0, 0.0}, 16, 0.5, rng);
    EXPECT_EQ(mp.path_count(), 1);
    EXPECT_LT((h - mp.gains[0] * CVec::Ones(16)).norm(), 1e-12);
}

TEST(MultipathChannel, AoasInsideRange)
{
    RandomStream rng(6);
    const AoaRange r{-0.3, 0.1};
    for (int t = 0; t < 20; ++t)
    {
        const auto [mp, h] = synthesize_multipath_channel(7, r, 8, 0.5, rng);
        EXPECT_EQ(mp.gains.size(), 7);
        for (Index p = 0; p < 7; ++p)
            EXPECT_TRUE(r.contains(mp.aoas[p]));
    }
}

TEST(MultipathChannel, MeanPowerMatchesAntennaCount)
{
    RandomStream rng(7);
    double total = 0.0;
    const int n = 10000;
    for (int t = 0; t < n; ++t)
        total += synthesize_multipath_channel(4, {-1.0, 1.0}, 64, 0.5, rng).second.squaredNorm();
    const double mean = total / n;
    EXPECT_GE(mean, 60.8);
    EXPECT_LE(mean, 67.2);
}

TEST(MultipathChannel, LiesInSteeringSpan)
{
    RandomStream rng(8);
    const auto [mp, h] = synthesize_multipath_channel(2, {-1.0, 1.0}, 8, 0.5, rng);
    CMat B(8, 2);
    B.col(0) = steering_vector(mp.aoas[0], 8);
    B.col(1) = steering_vector(mp.aoas[1], 8);
    const CVec c = B.colPivHouseholderQr().solve(h);
    EXPECT_LT((B * c - h).norm(), 1e-12);
}

TEST(Covariance, DegenerateRangeIsRankOne)
{
    const double t0 = 0.3;
    const auto cov = covariance_from_aoa_range({t0, t0}, 16);
    const CVec a = steering_vector(t0, 16);
    EXPECT_LT((cov.matrix - a * a.adjoint()).norm(), 1e-10);
    EXPECT_EQ(cov.numeric_rank, 1);
}

TEST(Covariance, NarrowRangeIsLowRankFullRangeIsFull)
{
    EXPECT_LT(covariance_from_aoa_range({0.2, 0.3}, 64).numeric_rank, 10);
    EXPECT_EQ(covariance_from_aoa_range({-kPi / 2, kPi / 2}, 16).numeric_rank, 16);
}

TEST(Covariance, HermitianPsdTraceM)
{
    RandomStream rng(9);
    for (int t = 0; t < 20; ++t)
    {
        const double a = rng.uniform(-1.5, 1.4);
        const double b = rng.uniform(a, 1.5);
        const Index M = 8 + rng.uniform_index(60);
        const auto cov = covariance_from_aoa_range({a, b}, M);
        EXPECT_LT(max_abs_hermitian_defect(cov.matrix), 1e-12);
        EXPECT_GE(min_eigenvalue(cov.matrix), -1e-10 * max_eigenvalue(cov.matrix));
        EXPECT_NEAR(cov.matrix.trace().real(), static_cast<double>(M), 1e-9);
    }
}

TEST(Covariance, RankNondecreasingOnNestedRanges)
{
    Index prev = 0;
    for (double w : {0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.0})
    {
        const Index r = covariance_from_aoa_range({-w / 2, w / 2}, 48).numeric_rank;
        EXPECT_GE(r, prev) << "width " << w;
        prev = r;
    }
}

TEST(Covariance, MatchesSampleAverage)
{
    // Monte-Carlo oracle: E[a a^H] over uniform AoAs
    RandomStream rng(10);
    const AoaRange r{0.1, 0.5};
    const Index M = 8;
    CMat acc = CMat::Zero(M, M);
    const int n = 40000;
    for (int t = 0; t < n; ++t)
    {
        const CVec a = steering_vector(rng.uniform(r.min, r.max), M);
        acc += a * a.adjoint();
    }
    acc /= n;
    EXPECT_LT((acc - covariance_from_aoa_range(r, M).matrix).norm() / M, 0.02);
}

TEST(LowRankMultiuser, RankAndFactorization)
{
    RandomStream rng(11);
    const std::vector<double> one{0.4};
    const auto h1 = synthesize_lowrank_multiuser(12, 32, one, rng);
    const CVec a = steering_vector(0.4, 32);
    for (Index i = 0; i < 12; ++i)
    {
        const CVec row = h1.matrix.row(i).transpose();
        const Complex c = a.dot(row) / a.squaredNorm();
        EXPECT_LT((row - c * a).norm(), 1e-12 * std::max(1.0, row.norm()));
    }

    const std::vector<double> three{-0.5, 0.1, 0.7};
    const auto h3 = synthesize_lowrank_multiuser(12, 32, three, rng);
    EXPECT_EQ(numeric_rank(h3.matrix), 3);
    EXPECT_LT((h3.matrix - *h3.gains * *h3.steering).norm() / h3.matrix.norm(), 1e-12);
    EXPECT_THROW(synthesize_lowrank_multiuser(2, 32, three, rng), std::invalid_argument);
}

TEST(LowRankMultiuser, SteeringRowsNearlyOrthogonalAtLargeM)
{
    RandomStream rng(12);
    const std::vector<double> aoas{-0.9, -0.3, 0.2, 0.8};
    const auto h = synthesize_lowrank_multiuser(8, 4096, aoas, rng);
    const CMat &A = *h.steering;
    EXPECT_LT((A * A.adjoint() - CMat::Identity(4, 4)).norm(), 0.1);
}

TEST(SystemGeometry, Validation)
{
    EXPECT_NO_THROW((SystemGeometry{1, 1, 1, 0.5}.validate()));
    EXPECT_THROW((SystemGeometry{0, 1, 1, 0.5}.validate()), std::invalid_argument);
    EXPECT_THROW((SystemGeometry{1, 1, 1, 0.0}.validate()), std::invalid_argument);
    EXPECT_THROW((AoaRange{0.5, 0.1}.validate()), std::invalid_argument);
    EXPECT_THROW((AoaRange{-2.0, 0.1}.validate()), std::invalid_argument);
}
