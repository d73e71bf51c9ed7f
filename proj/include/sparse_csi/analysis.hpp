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

#ifndef SPARSE_CSI_ANALYSIS_HPP
#define SPARSE_CSI_ANALYSIS_HPP

#include "estimators.hpp"
#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace sparse_csi
{
    // ---------- TYPES ----------

    struct SinrTargets
    {
        std::vector<double> gammas;

        Index users() const { return static_cast<Index>(gammas.size()); }

        void validate() const
        {
            for (double g : gammas)
                if (!(g > 0.0))
                    throw std::invalid_argument("SinrTargets: every SINR target must be positive.");
        }

        // K = 3l: first l UEs at 1/3, next l at 1, last l at 3.
        static SinrTargets three_level_pattern(Index l)
        {
            SinrTargets t;
            for (double g : {1.0 / 3.0, 1.0, 3.0})
                for (Index i = 0; i < l; ++i)
                    t.gammas.push_back(g);
            return t;
        }
    };

    struct PrecodingScenario
    {
        std::vector<CVec> csi;   // channel estimates used to build the precoders
        std::vector<CVec> truth; // true channels of the served UEs
        double data_symbol_power = 1.0;
        RVec power_allocation;   // P_k

        void validate() const
        {
            if (csi.size() != truth.size())
                throw std::invalid_argument("PrecodingScenario: csi and truth must list the same UEs.");
            if (power_allocation.size() != static_cast<Index>(csi.size()))
                throw std::invalid_argument("PrecodingScenario: need one power per UE.");
            for (std::size_t k = 0; k < csi.size(); ++k)
                if (csi[k].size() != truth[k].size())
                    throw std::invalid_argument("PrecodingScenario: csi and truth shapes differ for UE " +
                                                std::to_string(k) + ".");
            if (power_allocation.size() > 0 && power_allocation.minCoeff() < 0.0)
                throw std::invalid_argument("PrecodingScenario: powers must be nonnegative.");
        }
    };

    // ---------- PRECODING AND INTERFERENCE ----------

    // w_k = conj(h_k) / ||h_k||; the received sample of UE k is h_k^T w.
    inline CVec mrt_precoder(const CVec &csi)
    {
        const double n = csi.norm();
        if (!(n > 0.0))
            throw std::invalid_argument("mrt_precoder: channel estimate is zero.");
        return csi.conjugate() / n;
    }

    inline std::vector<CVec> mrt_precoder(std::span<const CVec> csi)
    {
        std::vector<CVec> w;
        w.reserve(csi.size());
        for (const auto &h : csi)
            w.push_back(mrt_precoder(h));
        return w;
    }

    // I = h_victim^T sum_k sqrt(P_k) w_k x_k.
    inline Complex downlink_interference(const PrecodingScenario &scenario, const CVec &victim, const CVec &symbols)
    {
        scenario.validate();
        if (symbols.size() != static_cast<Index>(scenario.csi.size()))
            throw std::invalid_argument("downlink_interference: need one data symbol per UE.");
        const auto w = mrt_precoder(scenario.csi);
        Complex sum{0.0, 0.0};
        for (std::size_t k = 0; k < w.size(); ++k)
        {
            if (w[k].size() != victim.size())
                throw std::invalid_argument("downlink_interference: victim channel length does not match the precoders.");
            sum += std::sqrt(scenario.power_allocation[static_cast<Index>(k)]) * victim.cwiseProduct(w[k]).sum() *
                   symbols[static_cast<Index>(k)];
        }
        return sum;
    }

    // Same, with unit-power CN(0, data_symbol_power) symbols drawn from `rng`.
    inline Complex downlink_interference(const PrecodingScenario &scenario, const CVec &victim, RandomStream &rng)
    {
        const CVec x = rng.complex_normal_vector(static_cast<Index>(scenario.csi.size()), scenario.data_symbol_power);
        return downlink_interference(scenario, victim, x);
    }

    // G(k, j) = |h_k^T w_j|^2: symbol-averaged power UE k receives from the beam of UE j.
    inline RMat beam_gain_matrix(std::span<const CVec> channels, std::span<const CVec> precoders)
    {
        RMat G(static_cast<Index>(channels.size()), static_cast<Index>(precoders.size()));
        for (std::size_t k = 0; k < channels.size(); ++k)
            for (std::size_t j = 0; j < precoders.size(); ++j)
                G(static_cast<Index>(k), static_cast<Index>(j)) =
                    std::norm(channels[k].cwiseProduct(precoders[j]).sum());
        return G;
    }

    inline double to_db(double linear) { return 10.0 * std::log10(linear); }

    // ---------- USER CAPACITY ----------

    struct UserCapacityOptions
    {
        Index asymptotic_M = 2048;
        int trials = 4;
        double slack = 0.05;              // admissible iff SINR_k >= gamma_k (1 - slack)
        double uplink_noise_var = 1e-6;   // per-antenna training noise
        double downlink_noise_var = 1e-6; // per-UE receiver noise, unit total transmit power
        Index max_groups = 0;             // l limit; 0 means 4 tau
        std::uint64_t seed = 42;
    };

    struct AdmissibilityResult
    {
        bool feasible = false;  // the pilot scheme could be built
        bool admissible = false;
        std::vector<double> sinr; // ratio-of-means SINR per UE (linear)
    };

    // Pilots (and uplink powers) a scheme uses for K UEs in one cell. K <= tau always gets
    // orthogonal pilots, since every scheme can then avoid contamination.
    inline PilotSet user_capacity_pilots(PilotScheme scheme, Index tau, const RVec &powers, RVec &uplink_powers)
    {
        const Index K = powers.size();
        uplink_powers = RVec::Ones(K);
        if (K <= tau)
            return make_orthogonal_pilots(tau, K);
        switch (scheme)
        {
        case PilotScheme::Gwbe:
        {
            std::vector<double> p(powers.data(), powers.data() + K);
            uplink_powers = powers * (static_cast<double>(K) / powers.sum());
            return make_gwbe_pilots(tau, p, OversizedUsers::Dedicate);
        }
        case PilotScheme::Wbe:
            return make_wbe_pilots(tau, K);
        case PilotScheme::Fos:
        {
            const auto a = round_robin_assignment(tau, K);
            return make_fos_pilots(tau, a);
        }
        case PilotScheme::Orthogonal:
            return make_orthogonal_pilots(tau, K);
        }
        throw std::invalid_argument("user_capacity_pilots: unknown scheme.");
    }

    // Single-cell TDD: uplink training with the scheme's pilots, correlator estimates
    // h_k = s_k^H Y / sqrt(q_k), downlink MRT with P_k ~ gamma_k / (1 + gamma_k).
    inline AdmissibilityResult evaluate_admissibility(PilotScheme scheme, Index tau, const SinrTargets &targets,
                                                      const UserCapacityOptions &opt, RandomStream rng)
    {
        targets.validate();
        const Index K = targets.users();
        const Index M = opt.asymptotic_M;
        const RVec P = sinr_proportional_powers(targets.gammas);
        AdmissibilityResult res;
        RVec q;
        PilotSet S;
        try
        {
            S = user_capacity_pilots(scheme, tau, P, q);
        }
        catch (const std::invalid_argument &)
        {
            return res;
        }
        res.feasible = true;

        RVec signal = RVec::Zero(K), interference = RVec::Zero(K);
        for (int t = 0; t < opt.trials; ++t)
        {
            const CMat H = rng.complex_normal_matrix(K, M, 1.0);
            CMat Y = S.matrix * (q.cwiseSqrt().asDiagonal() * H);
            if (opt.uplink_noise_var > 0.0)
                Y += rng.complex_normal_matrix(tau, M, opt.uplink_noise_var);
            const CMat est = (S.matrix.adjoint() * Y).array().colwise() / q.cwiseSqrt().cast<Complex>().array();
            std::vector<CVec> h(static_cast<std::size_t>(K)), w(static_cast<std::size_t>(K));
            for (Index k = 0; k < K; ++k)
            {
                h[static_cast<std::size_t>(k)] = H.row(k).transpose();
                w[static_cast<std::size_t>(k)] = mrt_precoder(CVec(est.row(k).transpose()));
            }
            const RMat G = beam_gain_matrix(h, w);
            for (Index k = 0; k < K; ++k)
            {
                signal[k] += P[k] * G(k, k);
                double i = opt.downlink_noise_var;
                for (Index j = 0; j < K; ++j)
                    if (j != k)
                        i += P[j] * G(k, j);
                interference[k] += i;
            }
        }
        res.admissible = true;
        for (Index k = 0; k < K; ++k)
        {
            const double sinr = signal[k] / interference[k];
            res.sinr.push_back(sinr);
            if (sinr < targets.gammas[static_cast<std::size_t>(k)] * (1.0 - opt.slack))
                res.admissible = false;
        }
        return res;
    }

    // Largest K = 3l such that every l' <= l is admissible (the search stops at the first failure).
    inline Index max_admissible_users(PilotScheme scheme, Index tau, const UserCapacityOptions &opt)
    {
        const Index limit = opt.max_groups > 0 ? opt.max_groups : 4 * tau;
        Index best = 0;
        for (Index l = 1; l <= limit; ++l)
        {
            RandomStream rng(opt.seed, {static_cast<std::uint64_t>(tau), static_cast<std::uint64_t>(l),
                                        static_cast<std::uint64_t>(scheme)});
            const auto r = evaluate_admissibility(scheme, tau, SinrTargets::three_level_pattern(l), opt, rng);
            if (!r.admissible)
                break;
            best = 3 * l;
        }
        return best;
    }

    struct UserCapacityPoint
    {
        Index tau = 0;
        Index admissible_users = 0;
    };

    inline std::vector<UserCapacityPoint> user_capacity_sweep(PilotScheme scheme, std::span<const Index> taus,
                                                              const UserCapacityOptions &opt = {})
    {
        std::vector<UserCapacityPoint> out;
        for (Index tau : taus)
            out.push_back({tau, max_admissible_users(scheme, tau, opt)});
        return out;
    }

} // namespace sparse_csi

#endif
