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

#ifndef SPARSE_CSI_RECOVERY_CONFIG_HPP
#define SPARSE_CSI_RECOVERY_CONFIG_HPP

#include "core.hpp"
#include "estimators.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <vector>

namespace sparse_csi
{
    // Index set believed to overlap the true angular support. `accuracy` is known only to the
    // experiment that fabricated the prior; solvers never read it.
    struct SupportPrior
    {
        std::vector<Index> indices;
        double accuracy = 0.0;

        Index declared_size() const { return static_cast<Index>(indices.size()); }
    };

    struct RecoveryConfig
    {
        double epsilon = 0.0;          // noise-ball radius for weighted l1
        RVec weights;                  // empty means all ones
        double nuclear_gamma = 1.0;    // nuclear-norm regularization
        int max_iterations = 2000;
        double tolerance = 1e-6;
        int gm_components = 2;
        double amp_damping = 1.0;      // 1 = undamped
        int amp_retries = 3;           // divergence restarts, each halving amp_damping
        bool amp_learn = true;         // EM updates of the prior and noise variance
        double gm_spike_variance = 1e-8; // 0 pins the first mixture component to a point mass
        double admm_penalty = 1.0;
        int certificate_interval = 10; // iterations between optimality-certificate checks (eps = 0)
        bool record_trace = false;

        static RecoveryConfig weighted_l1(double epsilon = 0.0, RVec w = {})
        {
            RecoveryConfig c;
            c.epsilon = epsilon;
            c.weights = std::move(w);
            return c;
        }

        static RecoveryConfig nuclear(double gamma)
        {
            RecoveryConfig c;
            c.nuclear_gamma = gamma;
            return c;
        }

        static RecoveryConfig gm_amp()
        {
            RecoveryConfig c;
            c.max_iterations = 50;
            return c;
        }

        void validate() const
        {
            if (!(epsilon >= 0.0))
                throw std::invalid_argument("RecoveryConfig: epsilon must be nonnegative.");
            if (weights.size() > 0 && weights.minCoeff() < 0.0)
                throw std::invalid_argument("RecoveryConfig: weights must be nonnegative.");
            if (max_iterations < 1)
                throw std::invalid_argument("RecoveryConfig: max_iterations must be positive.");
            if (!(tolerance > 0.0))
                throw std::invalid_argument("RecoveryConfig: tolerance must be positive.");
            if (gm_components < 2)
                throw std::invalid_argument("RecoveryConfig: gm_components must be at least 2.");
            if (!(amp_damping > 0.0 && amp_damping <= 1.0))
                throw std::invalid_argument("RecoveryConfig: amp_damping must lie in (0, 1].");
            if (amp_retries < 0)
                throw std::invalid_argument("RecoveryConfig: amp_retries must be nonnegative.");
            if (!(admm_penalty > 0.0))
                throw std::invalid_argument("RecoveryConfig: admm_penalty must be positive.");
        }
    };

    // w_i = 0 on the prior's indices, 1 elsewhere.
    inline RVec build_weights(const SupportPrior &prior, Index M)
    {
        RVec w = RVec::Ones(M);
        for (Index i : prior.indices)
        {
            if (i < 0 || i >= M)
                throw std::invalid_argument("build_weights: prior index " + std::to_string(i) + " is outside [0, M).");
            w[i] = 0.0;
        }
        return w;
    }

    // floor(alpha * s_hat) indices drawn from the true support, the rest from its complement.
    inline SupportPrior make_support_prior(std::span<const Index> true_support, Index s_hat, double alpha, Index M,
                                           RandomStream &rng)
    {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw std::invalid_argument("make_support_prior: accuracy must lie in [0, 1].");
        const Index hits = static_cast<Index>(std::floor(alpha * static_cast<double>(s_hat) + 1e-9));
        const Index misses = s_hat - hits;
        const Index support_size = static_cast<Index>(true_support.size());
        if (hits > support_size || misses > M - support_size)
            throw std::invalid_argument("make_support_prior: requested overlap is impossible for this support.");

        std::vector<char> in_support(static_cast<std::size_t>(M), 0);
        for (Index i : true_support)
            in_support[static_cast<std::size_t>(i)] = 1;
        std::vector<Index> outside;
        for (Index i = 0; i < M; ++i)
            if (!in_support[static_cast<std::size_t>(i)])
                outside.push_back(i);

        SupportPrior prior;
        prior.accuracy = alpha;
        for (Index pick : rng.sample_without_replacement(support_size, hits))
            prior.indices.push_back(true_support[static_cast<std::size_t>(pick)]);
        for (Index pick : rng.sample_without_replacement(static_cast<Index>(outside.size()), misses))
            prior.indices.push_back(outside[static_cast<std::size_t>(pick)]);
        std::sort(prior.indices.begin(), prior.indices.end());
        return prior;
    }

    // Exact-recovery rule: ||estimate - truth||_2 <= 1e-4.
    inline constexpr double kExactRecoveryThreshold = 1e-4;

    inline bool exact_recovery(const CVec &estimate, const CVec &truth)
    {
        return (estimate - truth).norm() <= kExactRecoveryThreshold;
    }

    // Convergence trace as CSV (iteration,objective,residual,aux).
    inline void write_trace_csv(std::ostream &os, std::span<const TraceRow> trace)
    {
        os << "iteration,objective,residual,aux\n";
        os.precision(12);
        for (const auto &r : trace)
            os << r.iteration << ',' << r.objective << ',' << r.residual << ',' << r.aux << '\n';
    }

} // namespace sparse_csi

#endif
