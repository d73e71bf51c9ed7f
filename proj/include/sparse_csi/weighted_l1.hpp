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

#ifndef SPARSE_CSI_WEIGHTED_L1_HPP
#define SPARSE_CSI_WEIGHTED_L1_HPP

#include "recovery_config.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace sparse_csi
{
    namespace detail
    {
        // Magnitude soft-thresholding; keeps the phase of every surviving entry.
        inline void complex_soft_threshold(const CVec &v, const RVec &thr, CVec &out)
        {
            out.resize(v.size());
            for (Index i = 0; i < v.size(); ++i)
            {
                const double m = std::abs(v[i]);
                out[i] = m > thr[i] ? v[i] * ((m - thr[i]) / m) : Complex(0.0, 0.0);
            }
        }

        inline CVec project_ball(const CVec &v, double radius)
        {
            const double n = v.norm();
            return n <= radius ? v : CVec(v * (radius / n));
        }

        inline double weighted_l1_norm(const CVec &x, const RVec &w)
        {
            double s = 0.0;
            for (Index i = 0; i < x.size(); ++i)
                s += w[i] * std::abs(x[i]);
            return s;
        }

        // Least-squares refit on T = supp(z) U {w = 0} followed by a dual certificate. On success the
        // refit is the unique minimizer of sum w|x| s.t. Ax = y.
        inline std::optional<CVec> certified_basis_pursuit(const CMat &A, const CVec &y, const RVec &w, const CVec &z)
        {
            const Index M = A.cols();
            const Index N = A.rows();
            std::vector<Index> T;
            for (Index i = 0; i < M; ++i)
                if (z[i] != Complex(0.0, 0.0) || w[i] == 0.0)
                    T.push_back(i);
            const Index t = static_cast<Index>(T.size());
            if (t > N)
                return std::nullopt;
            const double ytol = 1e-9 * std::max(1.0, y.norm());

            CVec xT = CVec::Zero(t);
            CVec lambda = CVec::Zero(N);
            if (t > 0)
            {
                CMat AT(N, t);
                for (Index j = 0; j < t; ++j)
                    AT.col(j) = A.col(T[static_cast<std::size_t>(j)]);
                Eigen::ColPivHouseholderQR<CMat> qr(AT);
                qr.setThreshold(1e-10);
                if (qr.rank() < t)
                    return std::nullopt;
                xT = qr.solve(y);
                if ((AT * xT - y).norm() > ytol)
                    return std::nullopt;
                CVec b(t);
                for (Index j = 0; j < t; ++j)
                {
                    const double wj = w[T[static_cast<std::size_t>(j)]];
                    const double m = std::abs(xT[j]);
                    if (wj == 0.0)
                        b[j] = 0.0;
                    else if (m == 0.0)
                        return std::nullopt;
                    else
                        b[j] = wj * xT[j] / m;
                }
                // minimum-norm multiplier with A_T^H lambda = b
                const CMat gram = AT.adjoint() * AT;
                lambda = AT * gram.ldlt().solve(b);
            }
            else if (y.norm() > ytol)
                return std::nullopt;

            const CVec corr = A.adjoint() * lambda;
            std::vector<char> inT(static_cast<std::size_t>(M), 0);
            for (Index i : T)
                inT[static_cast<std::size_t>(i)] = 1;
            for (Index i = 0; i < M; ++i)
                if (!inT[static_cast<std::size_t>(i)] && std::abs(corr[i]) >= w[i] * (1.0 - 1e-9))
                    return std::nullopt;

            CVec x = CVec::Zero(M);
            for (Index j = 0; j < t; ++j)
                x[T[static_cast<std::size_t>(j)]] = xT[j];
            return x;
        }
    } // namespace detail

    // min sum_i w_i |x_i|  s.t.  ||A x - y||_2 <= epsilon, by ADMM.
    //   epsilon = 0: x = P_affine(z - u), z = soft(x + u, w/rho), u += x - z.
    //   epsilon > 0: consensus splitting with an auxiliary v = A x - y kept in the epsilon-ball.
    // Trace aux column holds rho * (||dz||^2 + ||dv||^2 + ||du||^2), which is nonincreasing for ADMM
    // at fixed rho.
    inline EstimateReport weighted_l1_recover(const CVec &y, const CMat &A, const RecoveryConfig &cfg)
    {
        cfg.validate();
        const Index N = A.rows();
        const Index M = A.cols();
        if (y.size() != N)
            throw std::invalid_argument("weighted_l1_recover: y has length " + std::to_string(y.size()) +
                                        " but the sensing matrix has " + std::to_string(N) + " rows.");
        const RVec w = cfg.weights.size() == 0 ? RVec(RVec::Ones(M)) : cfg.weights;
        if (w.size() != M)
            throw std::invalid_argument("weighted_l1_recover: weight vector length must equal M.");
        const double eps = cfg.epsilon;
        const double rho = cfg.admm_penalty;
        const double tol = cfg.tolerance;

        Eigen::CompleteOrthogonalDecomposition<CMat> cod;
        cod.setThreshold(1e-10);
        cod.compute(A);
        const CVec x_ls = cod.solve(y);
        const double floor = (A * x_ls - y).norm();
        if (floor > eps * (1.0 + 1e-6) + 1e-9 * std::max(1.0, y.norm()))
            throw InfeasibleError("weighted_l1_recover: epsilon = " + std::to_string(eps) +
                                  " is below the least-squares residual floor " + std::to_string(floor) + ".");

        EstimateReport rep;
        rep.method = "weighted_l1";
        rep.converged = false;
        const RVec thr = w / rho;
        const double sqrtM = std::sqrt(static_cast<double>(M));

        CVec x = CVec::Zero(M), z = CVec::Zero(M), u = CVec::Zero(M), z_old(M), u_old(M);
        std::optional<CVec> certified;

        auto trace_row = [&](int k, double fpr)
        {
            if (cfg.record_trace)
                rep.trace.push_back({k, detail::weighted_l1_norm(z, w), (A * z - y).norm(), fpr});
        };

        if (eps == 0.0)
        {
            // affine projection x0 + (I - Qr Qr^H) v with Qr an orthonormal row-space basis
            const Index r = cod.rank();
            Eigen::HouseholderQR<CMat> qr(A.adjoint());
            const CMat Q = qr.householderQ();
            const bool use_row = r <= M - r;
            CMat basis;
            if (use_row)
            {
                // rank-revealing row basis when A is not full row rank
                if (r == N)
                    basis = Q.leftCols(r);
                else
                {
                    Eigen::ColPivHouseholderQR<CMat> piv(A.adjoint());
                    piv.setThreshold(1e-10);
                    const CMat Qp = piv.householderQ();
                    basis = Qp.leftCols(r);
                }
            }
            else
            {
                if (r == N)
                    basis = Q.rightCols(M - r);
                else
                {
                    Eigen::ColPivHouseholderQR<CMat> piv(A.adjoint());
                    piv.setThreshold(1e-10);
                    const CMat Qp = piv.householderQ();
                    basis = Qp.rightCols(M - r);
                }
            }
            auto project = [&](const CVec &v) -> CVec
            {
                if (use_row)
                    return x_ls + v - basis * (basis.adjoint() * v);
                return x_ls + basis * (basis.adjoint() * v);
            };

            int k = 0;
            for (k = 1; k <= cfg.max_iterations; ++k)
            {
                z_old = z;
                u_old = u;
                x = project(z - u);
                detail::complex_soft_threshold(x + u, thr, z);
                u += x - z;

                const double r_norm = (x - z).norm();
                const double s_norm = rho * (z - z_old).norm();
                trace_row(k, rho * ((z - z_old).squaredNorm() + (u - u_old).squaredNorm()));
                const double eps_pri = sqrtM * tol + tol * std::max(x.norm(), z.norm());
                const double eps_dual = sqrtM * tol + tol * rho * u.norm();
                if (cfg.certificate_interval > 0 && k % cfg.certificate_interval == 0)
                {
                    certified = detail::certified_basis_pursuit(A, y, w, z);
                    if (certified)
                        break;
                }
                if (r_norm <= eps_pri && s_norm <= eps_dual)
                {
                    rep.converged = true;
                    break;
                }
            }
            rep.iterations = std::min(k, cfg.max_iterations);
            if (!certified)
                certified = detail::certified_basis_pursuit(A, y, w, z);
            if (certified)
            {
                rep.converged = true;
                x = *certified;
            }
            else
                x = z + cod.solve(CVec(y - A * z)); // exact feasibility
        }
        else
        {
            // (I + A^H A)^{-1} through whichever Gram is smaller
            const bool wide = N <= M;
            Eigen::LLT<CMat> llt;
            if (wide)
                llt.compute(CMat::Identity(N, N) + A * A.adjoint());
            else
                llt.compute(CMat::Identity(M, M) + A.adjoint() * A);
            auto solve_x = [&](const CVec &b) -> CVec
            {
                if (wide)
                    return b - A.adjoint() * llt.solve(A * b);
                return llt.solve(b);
            };

            CVec v = CVec::Zero(N), u2 = CVec::Zero(N), v_old(N), u2_old(N);
            const double sqrtMN = std::sqrt(static_cast<double>(M + N));
            int k = 0;
            for (k = 1; k <= cfg.max_iterations; ++k)
            {
                z_old = z;
                u_old = u;
                v_old = v;
                u2_old = u2;
                x = solve_x((z - u) + A.adjoint() * (y + v - u2));
                const CVec Ax = A * x;
                detail::complex_soft_threshold(x + u, thr, z);
                v = detail::project_ball(Ax - y + u2, eps);
                u += x - z;
                u2 += Ax - y - v;

                const double r_norm = std::sqrt((x - z).squaredNorm() + (Ax - y - v).squaredNorm());
                const double s_norm = rho * ((z - z_old) + A.adjoint() * (v - v_old)).norm();
                trace_row(k, rho * ((z - z_old).squaredNorm() + (v - v_old).squaredNorm() +
                                    (u - u_old).squaredNorm() + (u2 - u2_old).squaredNorm()));
                const double eps_pri =
                    sqrtMN * tol +
                    tol * std::max(std::sqrt(x.squaredNorm() + Ax.squaredNorm()), std::sqrt(z.squaredNorm() + (v + y).squaredNorm()));
                const double eps_dual = sqrtM * tol + tol * rho * (u + A.adjoint() * u2).norm();
                if (r_norm <= eps_pri && s_norm <= eps_dual)
                {
                    rep.converged = true;
                    break;
                }
            }
            rep.iterations = std::min(k, cfg.max_iterations);

            // pull the sparse iterate back into the ball along the row space
            x = z;
            const CVec res = A * x - y;
            if (res.norm() > eps)
                x += cod.solve(CVec(detail::project_ball(res, eps) - res));
        }

        rep.estimate = x;
        rep.residual_norm = (A * x - y).norm();
        return rep;
    }

    inline EstimateReport weighted_l1_recover(const CVec &y, const TrainingMatrix &S, const CMat &U,
                                              const RecoveryConfig &cfg)
    {
        if (S.matrix.cols() != U.rows())
            throw std::invalid_argument("weighted_l1_recover: training width does not match the basis size.");
        return weighted_l1_recover(y, CMat(S.matrix * U), cfg);
    }

} // namespace sparse_csi

#endif
