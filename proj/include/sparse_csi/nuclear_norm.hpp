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

#ifndef SPARSE_CSI_NUCLEAR_NORM_HPP
#define SPARSE_CSI_NUCLEAR_NORM_HPP

#include "recovery_config.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace sparse_csi
{
    // Singular-value soft-thresholding: prox of t * ||.||_*. `nuclear` receives ||result||_*.
    inline CMat singular_value_threshold(const CMat &G, double t, double *nuclear = nullptr)
    {
        Eigen::BDCSVD<CMat> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
        RVec sv = svd.singularValues();
        double nn = 0.0;
        Index keep = 0;
        for (Index i = 0; i < sv.size(); ++i)
        {
            sv[i] = std::max(0.0, sv[i] - t);
            nn += sv[i];
            if (sv[i] > 0.0)
                keep = i + 1;
        }
        if (nuclear)
            *nuclear = nn;
        if (keep == 0)
            return CMat::Zero(G.rows(), G.cols());
        return svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).adjoint();
    }

    struct NuclearNormProblem
    {
        CMat gram;   // S^H S
        CMat sy;     // S^H Y
        double y_energy = 0.0;
        double lipschitz = 0.0; // sigma_max(S)^2

        NuclearNormProblem(const CMat &Y, const CMat &S)
            : gram(S.adjoint() * S), sy(S.adjoint() * Y), y_energy(Y.squaredNorm()), lipschitz(spectral_norm(S))
        {
            lipschitz *= lipschitz;
        }

        CMat gradient(const CMat &H) const { return gram * H - sy; }

        // 0.5 ||Y - S H||_F^2 without forming S H
        double data_fit(const CMat &H) const
        {
            const double quad = (H.adjoint() * gram * H).trace().real();
            const double cross = (H.adjoint() * sy).trace().real();
            return 0.5 * std::max(0.0, y_energy - 2.0 * cross + quad);
        }
    };

    // || H - SVT(H - grad/L, gamma/L) ||_F / max(||H||_F, 1): zero exactly at the minimizer.
    inline double nuclear_fixed_point_residual(const NuclearNormProblem &p, const CMat &H, double gamma)
    {
        const double t = 1.0 / p.lipschitz;
        const CMat next = singular_value_threshold(H - t * p.gradient(H), t * gamma);
        return (H - next).norm() / std::max(1.0, H.norm());
    }

    // min 0.5 ||Y - S H||_F^2 + gamma ||H||_*, accelerated proximal gradient with step 1/sigma_max(S)^2
    // and objective-based restart. Returned matrix is KL x M.
    inline EstimateReport nuclear_norm_recover(const CMat &Y, const CMat &S, const RecoveryConfig &cfg)
    {
        cfg.validate();
        const double gamma = cfg.nuclear_gamma;
        if (!(gamma > 0.0))
            throw std::invalid_argument("nuclear_norm_recover: gamma must be positive.");
        if (S.rows() != Y.rows())
            throw std::invalid_argument("nuclear_norm_recover: composite pilot matrix has " + std::to_string(S.rows()) +
                                        " rows but the measurement has " + std::to_string(Y.rows()) + ".");

        const NuclearNormProblem p(Y, S);
        EstimateReport rep;
        rep.method = "nuclear_norm";
        rep.converged = false;
        const Index KL = S.cols();
        const Index M = Y.cols();
        if (p.lipschitz == 0.0)
        {
            rep.estimate = CMat::Zero(KL, M);
            rep.converged = true;
            rep.residual_norm = Y.norm();
            return rep;
        }
        const double t = 1.0 / p.lipschitz;

        CMat H = CMat::Zero(KL, M);
        CMat Z = H;
        double theta = 1.0;
        double nuclear = 0.0;
        double obj = p.data_fit(H);
        int k = 0;
        for (k = 1; k <= cfg.max_iterations; ++k)
        {
            double nn = 0.0;
            CMat H_new = singular_value_threshold(Z - t * p.gradient(Z), t * gamma, &nn);
            const double obj_new = p.data_fit(H_new) + gamma * nn;
            if (obj_new > obj && theta > 1.0)
            {
                // restart from a plain proximal-gradient step
                theta = 1.0;
                Z = H;
                H_new = singular_value_threshold(Z - t * p.gradient(Z), t * gamma, &nn);
            }
            const double change = (H_new - H).norm();
            const double scale = std::max(H.norm(), H_new.norm());
            const double theta_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            Z = H_new + ((theta - 1.0) / theta_new) * (H_new - H);
            theta = theta_new;
            H = std::move(H_new);
            nuclear = nn;
            obj = p.data_fit(H) + gamma * nuclear;
            const double rel = scale > 0.0 ? change / scale : 0.0;
            if (cfg.record_trace)
                rep.trace.push_back({k, obj, std::sqrt(2.0 * p.data_fit(H)), rel});
            if (rel < cfg.tolerance)
            {
                rep.converged = true;
                break;
            }
        }
        rep.iterations = std::min(k, cfg.max_iterations);
        rep.estimate = std::move(H);
        rep.residual_norm = (Y - S * rep.estimate).norm();
        return rep;
    }

} // namespace sparse_csi

#endif
