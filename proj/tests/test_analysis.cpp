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


#include <sparse_csi/analysis.hpp>
#include <sparse_csi/estimators.hpp>

#include <gtest/gtest.h>

#include <array>
#include <numbers>

using namespace sparse_csi;

TEST(Mrt, BasisVectorIsItsOwnPrecoder)
{
    CVec e = CVec::Zero(4);
    e[0] = 1.0;
    EXPECT_LT((mrt_precoder(e) - e).norm(), 1e-15);
}

TEST(Mrt, MatchedFilterGainIsTheChannelNorm)
{
    RandomStream rng(1);
    for (int t = 0; t < 20; ++t)
    {
        const CVec h = rng.complex_normal_vector(16);
        const CVec w = mrt_precoder(h);
        EXPECT_NEAR(w.norm(), 1.0, 1e-12);
        EXPECT_NEAR(std::abs(h.cwiseProduct(w).sum()), h.norm(), 1e-10);
    }
}

TEST(Mrt, ContaminatedEstimateSteersAtTheSum)
{
    RandomStream rng(2);
    const CVec a = rng.complex_normal_vector(8), b = rng.complex_normal_vector(8);
    const CVec w = mrt_precoder(CVec(a + b));
    const CVec expect = (a + b).conjugate() / (a + b).norm();
    EXPECT_LT((w - expect).norm(), 1e-12);
}

TEST(Mrt, ZeroEstimateIsRejected)
{
    EXPECT_THROW(mrt_precoder(CVec::Zero(3)), std::invalid_argument);
}

TEST(Interference, OrthogonalVictimSeesNothing)
{
    PrecodingScenario sc;
    CVec e0 = CVec::Zero(4), e1 = CVec::Zero(4), victim = CVec::Zero(4);
    e0[0] = 1.0;
    e1[1] = Complex(0.0, 2.0);
    victim[3] = 1.0;
    sc.csi = {e0, e1};
    sc.truth = sc.csi;
    sc.power_allocation = RVec::Constant(2, 0.5);
    RandomStream rng(3);
    EXPECT_EQ(std::abs(downlink_interference(sc, victim, rng)), 0.0);
}

TEST(Interference, ServedUeAsVictimGetsTheSignalTerm)
{
    RandomStream rng(4);
    const CVec h = rng.complex_normal_vector(32);
    PrecodingScenario sc;
    sc.csi = {h};
    sc.truth = {h};
    sc.power_allocation = RVec::Constant(1, 0.7);
    CVec x(1);
    x[0] = Complex(0.3, -0.4);
    const Complex I = downlink_interference(sc, h, x);
    EXPECT_LT(std::abs(I - std::sqrt(0.7) * h.norm() * x[0]), 1e-10);
}

TEST(Interference, ContaminatedPowerDoesNotVanishWithM)
{
    // victim shares the pilot with the served UE: the estimate h_a + h_v leaks ~M/2 of power to v
    RandomStream rng(5);
    for (Index M : {64, 256, 1024})
    {
        double power = 0.0;
        const int trials = 200;
        for (int t = 0; t < trials; ++t)
        {
            const CVec ha = rng.complex_normal_vector(M), hv = rng.complex_normal_vector(M);
            PrecodingScenario sc;
            sc.csi = {CVec(ha + hv)};
            sc.truth = {ha};
            sc.power_allocation = RVec::Ones(1);
            power += std::norm(downlink_interference(sc, hv, rng));
        }
        power /= trials;
        EXPECT_NEAR(power / (0.5 * M), 1.0, 0.15) << "M = " << M;
    }
}

TEST(Interference, ShapeErrors)
{
    PrecodingScenario sc;
    sc.csi = {CVec::Ones(3)};
    sc.truth = {CVec::Ones(4)};
    sc.power_allocation = RVec::Ones(1);
    EXPECT_THROW(sc.validate(), std::invalid_argument);
    sc.truth = {CVec::Ones(3)};
    sc.power_allocation = RVec::Constant(1, -1.0);
    EXPECT_THROW(sc.validate(), std::invalid_argument);
    sc.power_allocation = RVec::Ones(1);
    EXPECT_THROW(downlink_interference(sc, CVec::Ones(5), CVec::Ones(1)), std::invalid_argument);
    EXPECT_THROW((SinrTargets{{1.0, 0.0}}.validate()), std::invalid_argument);
}

TEST(BeamGain, MatchesDirectSum)
{
    RandomStream rng(6);
    std::vector<CVec> h, w;
    for (int k = 0; k < 3; ++k)
    {
        h.push_back(rng.complex_normal_vector(5));
        w.push_back(rng.complex_normal_vector(5));
    }
    const RMat G = beam_gain_matrix(h, w);
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
        {
            Complex s{0.0, 0.0};
            for (int m = 0; m < 5; ++m)
                s += h[k][m] * w[j][m];
            EXPECT_NEAR(G(k, j), std::norm(s), 1e-12);
        }
}

TEST(UserCapacity, ThreeLevelPattern)
{
    const auto t = SinrTargets::three_level_pattern(2);
    ASSERT_EQ(t.users(), 6);
    EXPECT_DOUBLE_EQ(t.gammas[1], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(t.gammas[2], 1.0);
    EXPECT_DOUBLE_EQ(t.gammas[5], 3.0);
}

TEST(UserCapacity, OrthogonalPilotsAdmitEveryone)
{
    UserCapacityOptions opt;
    for (auto scheme : {PilotScheme::Gwbe, PilotScheme::Wbe, PilotScheme::Fos})
    {
        const auto r = evaluate_admissibility(scheme, 9, SinrTargets::three_level_pattern(3), opt, RandomStream(7));
        EXPECT_TRUE(r.feasible);
        EXPECT_TRUE(r.admissible);
    }
}

TEST(UserCapacity, FosSharingMatchesTwoUeContaminationOracle)
{
    // tau = 3, K = 6: round robin puts UEs k and k + 3 on one pilot. Their estimates coincide,
    // so for large M the SINR of k tends to P_k / P_{partner}.
    UserCapacityOptions opt;
    EXPECT_TRUE(evaluate_admissibility(PilotScheme::Fos, 3, SinrTargets::three_level_pattern(1), opt, RandomStream(8))
                    .admissible);

    const auto targets = SinrTargets::three_level_pattern(2);
    const auto r = evaluate_admissibility(PilotScheme::Fos, 3, targets, opt, RandomStream(8));
    EXPECT_TRUE(r.feasible);
    EXPECT_FALSE(r.admissible);
    const RVec P = sinr_proportional_powers(targets.gammas);
    for (Index k = 0; k < 6; ++k)
    {
        const Index partner = (k + 3) % 6;
        const double oracle = P[k] / P[partner];
        EXPECT_NEAR(r.sinr[static_cast<std::size_t>(k)] / oracle, 1.0, 0.1) << "UE " << k;
    }
    // the gamma = 3 UE (index 5) shares with a gamma = 1 UE: SINR -> 0.75 / 0.5 = 1.5 < 3
    EXPECT_LT(r.sinr[5], 3.0 * (1.0 - opt.slack));
}

TEST(UserCapacity, SchemeOrderingAcrossTau)
{
    UserCapacityOptions opt;
    const std::array<Index, 3> taus{6, 9, 12};
    const auto g = user_capacity_sweep(PilotScheme::Gwbe, taus, opt);
    const auto w = user_capacity_sweep(PilotScheme::Wbe, taus, opt);
    const auto f = user_capacity_sweep(PilotScheme::Fos, taus, opt);
    for (std::size_t i = 0; i < taus.size(); ++i)
    {
        EXPECT_EQ(g[i].tau, taus[i]);
        EXPECT_GE(g[i].admissible_users, w[i].admissible_users) << "tau = " << taus[i];
        EXPECT_GE(w[i].admissible_users, f[i].admissible_users) << "tau = " << taus[i];
        EXPECT_GE(f[i].admissible_users, 3 * (taus[i] / 3)) << "orthogonal pilots cover K <= tau";
    }
}

TEST(UserCapacity, InfeasibleSchemeCountsAsInadmissible)
{
    UserCapacityOptions opt;
    opt.max_groups = 1;
    // GWBE with tau = 1 and three UEs of unequal power cannot be built
    const auto r = evaluate_admissibility(PilotScheme::Gwbe, 1, SinrTargets::three_level_pattern(1), opt, RandomStream(9));
    EXPECT_FALSE(r.admissible);
    EXPECT_EQ(max_admissible_users(PilotScheme::Gwbe, 1, opt), 0);
}

TEST(Db, Conversion)
{
    EXPECT_DOUBLE_EQ(to_db(100.0), 20.0);
    EXPECT_DOUBLE_EQ(to_db(1.0), 0.0);
}
