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
#include <sparse_csi/estimators.hpp>
#include <sparse_csi/sparse_recovery.hpp>
#include <sparse_csi/training.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace sparse_csi;

namespace
{
    double median(std::vector<double> v)
    {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }

    CMat stack(const std::vector<EstimateReport> &reps)
    {
        CMat out(reps.front().estimate.rows(), static_cast<Index>(reps.size()));
        for (std::size_t k = 0; k < reps.size(); ++k)
            out.col(static_cast<Index>(k)) = reps[k].vector();
        return out;
    }

    CMat stack(const std::vector<AngularChannel> &g)
    {
        CMat out(g.front().size(), static_cast<Index>(g.size()));
        for (std::size_t k = 0; k < g.size(); ++k)
            out.col(static_cast<Index>(k)) = g[k].coeffs;
        return out;
    }

    // Median stacked NMSE of joint OMP at the given common-support size, 20 dB SNR.
    double joint_omp_median(Index s_common, int trials)
    {
        const Index M = 64, K = 4, s = 6, N = 20;
        const CMat U = dft_basis(M);
        std::vector<double> nmse;
        for (int t = 0; t < trials; ++t)
        {
            RandomStream rng(77, {static_cast<std::uint64_t>(s_common), static_cast<std::uint64_t>(t)});
            const auto g = synthesize_common_support_group(M, K, s, s_common, rng);
            const CMat A = make_gaussian_training(N, M, rng).matrix * U;
            std::vector<CVec> ys;
            for (const auto &ch : g)
            {
                CVec y = A * ch.coeffs;
                y += rng.complex_normal_vector(N, y.squaredNorm() / N / 100.0);
                ys.push_back(y);
            }
            nmse.push_back(nmse_db(stack(joint_omp_recover(ys, A, s, s_common)), stack(g)));
        }
        return median(nmse);
    }
} // namespace

TEST(JointOmp, SingleUeMatchesOmp)
{
    RandomStream rng(1);
    const CMat A = rng.complex_normal_matrix(15, 40, 1.0 / 15);
    const CVec y = rng.complex_normal_vector(15);
    const std::vector<CVec> one{y};
    const auto j = joint_omp_recover(one, A, 5, 0);
    const auto o = omp_recover(y, A, 5);
    EXPECT_EQ(j.front().estimate, o.estimate);
    EXPECT_EQ(o.method, "omp");
    EXPECT_EQ(j.front().method, "joint_omp");
}

TEST(JointOmp, OmpMatchesTextbookImplementation)
{
    // independent oracle: OMP via normal equations and explicit argmax loop
    RandomStream rng(2);
    for (int t = 0; t < 20; ++t)
    {
        const Index N = 12, M = 30, s = 4;
        const CMat A = rng.complex_normal_matrix(N, M, 1.0 / N);
        const CVec y = rng.complex_normal_vector(N);
        std::vector<Index> supp;
        CVec r = y, c;
        for (Index it = 0; it < s; ++it)
        {
            Index best = 0;
            double bs = -1;
            for (Index j = 0; j < M; ++j)
            {
                if (std::find(supp.begin(), supp.end(), j) != supp.end())
                    continue;
                const double v = std::norm(A.col(j).dot(r)) / A.col(j).squaredNorm();
                if (v > bs)
                {
                    bs = v;
                    best = j;
                }
            }
            supp.push_back(best);
            CMat As(N, static_cast<Index>(supp.size()));
            for (std::size_t q = 0; q < supp.size(); ++q)
                As.col(static_cast<Index>(q)) = A.col(supp[q]);
            c = (As.adjoint() * As).ldlt().solve(As.adjoint() * y);
            r = y - As * c;
        }
        CVec ref = CVec::Zero(M);
        for (std::size_t q = 0; q < supp.size(); ++q)
            ref[supp[q]] = c[static_cast<Index>(q)];
        EXPECT_LT((omp_recover(y, A, s).vector() - ref).norm(), 1e-9 * std::max(1.0, ref.norm()));
    }
}

TEST(JointOmp, TiesGoToLowestIndex)
{
    // identical columns 1 and 3 (and 0 orthogonal): the lower index must be picked
    CMat A = CMat::Zero(2, 4);
    A(0, 0) = 1.0;
    A(1, 1) = 1.0;
    A(0, 2) = 1.0;
    A(1, 3) = 1.0;
    CVec y(2);
    y << 0.0, 2.0;
    const auto rep = omp_recover(y, A, 1);
    EXPECT_NE(rep.estimate(1, 0), Complex(0, 0));
    EXPECT_EQ(rep.estimate(3, 0), Complex(0, 0));
}

TEST(JointOmp, BudgetErrors)
{
    const CMat A = CMat::Identity(5, 8);
    const std::vector<CVec> ys{CVec::Ones(5)};
    EXPECT_THROW(joint_omp_recover(ys, A, 6, 0), IllPosedError);
    EXPECT_THROW(joint_omp_recover(ys, A, 3, 4), std::invalid_argument);
    EXPECT_THROW(joint_omp_recover(ys, A, -1, 0), std::invalid_argument);
    const std::vector<CVec> bad{CVec::Ones(4)};
    EXPECT_THROW(joint_omp_recover(bad, A, 2, 0), std::invalid_argument);
    EXPECT_THROW(joint_omp_recover(std::vector<CVec>{}, A, 2, 0), std::invalid_argument);
}

TEST(JointOmp, SharedSupportNoiselessRecovery)
{
    const Index M = 64, K = 4, s = 6, N = 4 * s;
    const CMat U = dft_basis(M);
    int good = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t)
    {
        RandomStream rng(3, {static_cast<std::uint64_t>(t)});
        const auto g = synthesize_common_support_group(M, K, s, s, rng);
        const auto S = make_gaussian_training(N, M, rng);
        std::vector<CVec> ys;
        for (const auto &ch : g)
            ys.push_back(S.matrix * U * ch.coeffs);
        const auto reps = joint_omp_recover(ys, S, U, s, s);
        bool all = true;
        for (std::size_t k = 0; k < g.size(); ++k)
            all = all && nmse_db(reps[k].estimate, g[k].coeffs) < -80.0;
        good += all;
    }
    EXPECT_GE(good, 95);
}

TEST(JointOmp, AgreesWithExhaustiveSearchOnSmallInstances)
{
    const Index M = 12, s = 2, N = 10;
    int agree = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t)
    {
        RandomStream rng(4, {static_cast<std::uint64_t>(t)});
        const auto ch = synthesize_angular_channel(M, s, rng);
        const CMat A = rng.complex_normal_matrix(N, M, 1.0 / N);
        const CVec y = A * ch.coeffs;
        const auto best = oracle::sparsest_solution(A, y, s);
        ASSERT_TRUE(best.has_value());
        ASSERT_EQ(best->solutions_at_min_size, 1);
        agree += exact_recovery(omp_recover(y, A, s).vector(), best->x);
    }
    EXPECT_EQ(agree, trials);
}

TEST(JointOmp, CommonSupportLowersMedianNmse)
{
    const double none = joint_omp_median(0, 200);
    const double full = joint_omp_median(6, 200);
    EXPECT_LE(full, none) << "s_common=6: " << full << " dB, s_common=0: " << none << " dB";
}
