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

#ifndef SPARSE_CSI_GM_AMP_HPP
#define SPARSE_CSI_GM_AMP_HPP

#include "recovery_config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace sparse_csi
{
    inline constexpr double kGmVarianceFloor = 1e-12;

    // Zero-mean complex Gaussian mixture sum_l weights[l] CN(0, variances[l]). A component whose
    // variance starts at exactly 0 is a point mass at the origin and stays one.
    class GaussMixturePrior
    {
    public:
        RVec weights;
        RVec variances;

        GaussMixturePrior(RVec w, RVec v) : weights(std::move(w)), variances(std::move(v))
        {
            pinned_.resize(static_cast<std::size_t>(variances.size()));
            for (Index l = 0; l < variances.size(); ++l)
                pinned_[static_cast<std::size_t>(l)] = variances[l] == 0.0;
        }

        double prior_variance() const { return weights.dot(variances); }
        double zero_weight() const { return weights[0]; }

        // Posterior mean/variance of x given r = x + CN(0, nu_r); keeps what EM needs.
        void denoise(const CVec &r, const RVec &nu_r, CVec &mean, RVec &var)
        {
            const Index n = r.size();
            const Index C = weights.size();
            mean.resize(n);
            var.resize(n);
            resp_.resize(n, C);
            second_.resize(n, C);
            std::vector<double> logp(static_cast<std::size_t>(C));
            for (Index j = 0; j < n; ++j)
            {
                const double r2 = std::norm(r[j]);
                double mx = -std::numeric_limits<double>::infinity();
                for (Index l = 0; l < C; ++l)
                {
                    const double s = variances[l] + nu_r[j];
                    const double lp = weights[l] > 0.0 ? std::log(weights[l]) - std::log(s) - r2 / s
                                                       : -std::numeric_limits<double>::infinity();
                    logp[static_cast<std::size_t>(l)] = lp;
                    mx = std::max(mx, lp);
                }
                double total = 0.0;
                for (Index l = 0; l < C; ++l)
                    total += std::exp(logp[static_cast<std::size_t>(l)] - mx);
                Complex m{0.0, 0.0};
                double e2 = 0.0;
                for (Index l = 0; l < C; ++l)
                {
                    const double beta = std::exp(logp[static_cast<std::size_t>(l)] - mx) / total;
                    const double s = variances[l] + nu_r[j];
                    const Complex ml = r[j] * (variances[l] / s);
                    const double gl = variances[l] * nu_r[j] / s;
                    resp_(j, l) = beta;
                    second_(j, l) = std::norm(ml) + gl;
                    m += beta * ml;
                    e2 += beta * (std::norm(ml) + gl);
                }
                mean[j] = m;
                var[j] = std::max(0.0, e2 - std::norm(m));
            }
        }

        void em_update()
        {
            const double n = static_cast<double>(resp_.rows());
            for (Index l = 0; l < weights.size(); ++l)
            {
                const double mass = resp_.col(l).sum();
                weights[l] = mass / n;
                if (!pinned_[static_cast<std::size_t>(l)] && mass > 0.0)
                    variances[l] = std::max(kGmVarianceFloor, resp_.col(l).dot(second_.col(l)) / mass);
            }
            weights /= weights.sum();
        }

    private:
        std::vector<bool> pinned_;
        RMat resp_, second_;
    };

    // Bernoulli-Gaussian prior (1 - lambda) delta_0 + lambda CN(0, v), written in closed form.
    class BernoulliGaussPrior
    {
    public:
        double lambda;
        double variance;

        BernoulliGaussPrior(double l, double v) : lambda(l), variance(v) {}

        double prior_variance() const { return lambda * variance; }
        double zero_weight() const { return 1.0 - lambda; }

        void denoise(const CVec &r, const RVec &nu_r, CVec &mean, RVec &var)
        {
            const Index n = r.size();
            mean.resize(n);
            var.resize(n);
            pi_.resize(n);
            second_.resize(n);
            for (Index j = 0; j < n; ++j)
            {
                const double s = variance + nu_r[j];
                const double r2 = std::norm(r[j]);
                // log of the zero/slab likelihood ratio
                const double log_ratio =
                    std::log1p(-lambda) - std::log(lambda) + std::log(s) - std::log(nu_r[j]) - r2 / nu_r[j] + r2 / s;
                const double pi = 1.0 / (1.0 + std::exp(log_ratio));
                const Complex m = r[j] * (variance / s);
                const double g = variance * nu_r[j] / s;
                pi_[j] = pi;
                second_[j] = std::norm(m) + g;
                mean[j] = pi * m;
                var[j] = std::max(0.0, pi * (std::norm(m) + g) - std::norm(mean[j]));
            }
        }

        void em_update()
        {
            const double mass = pi_.sum();
            lambda = mass / static_cast<double>(pi_.size());
            lambda = std::clamp(lambda, 1e-300, 1.0 - 1e-16);
            if (mass > 0.0)
                variance = std::max(kGmVarianceFloor, pi_.dot(second_) / mass);
        }

    private:
        RVec pi_, second_;
    };

    struct AmpColumnResult
    {
        CVec estimate;
        double noise_variance = 0.0;
        double zero_weight = 0.0; // learned mass of the zero/spike component
        std::vector<double> tau_r; // mean input-channel variance per iteration
        std::vector<double> residual_energy;
        int iterations = 0;
        bool converged = false;
    };

    namespace detail
    {
        struct AmpInit
        {
            double lambda;
            double slab;
            double noise;
        };

        inline AmpInit amp_initial_guess(const CVec &y, const CMat &A, double spike)
        {
            const double m = static_cast<double>(A.rows());
            const double n = static_cast<double>(A.cols());
            const double y2 = y.squaredNorm();
            AmpInit g;
            g.lambda = std::clamp(0.5 * m / n, 0.05, 0.5);
            g.noise = std::max(y2 / (m * 101.0), 1e-12);
            const double fro2 = A.squaredNorm();
            const double slab = fro2 > 0.0 ? (y2 - m * g.noise) / (fro2 * g.lambda) : 0.0;
            g.slab = std::max({slab, 100.0 * spike, 1e-6});
            return g;
        }

        // GAMP with an AWGN output channel, elementwise variances, EM on prior and noise. Means and
        // output variances are damped with the same factor.
        template <class Prior>
        AmpColumnResult amp_em_column_once(const CVec &y, const CMat &A, Prior prior, double noise,
                                      const RecoveryConfig &cfg)
        {
            const Index m = A.rows();
            const Index n = A.cols();
            const RMat A2 = A.cwiseAbs2();
            const RMat A2t = A2.transpose();
            const double beta = cfg.amp_damping;
            const double noise_floor = std::max(1e-12, 1e-10 * y.squaredNorm() / static_cast<double>(m));

            AmpColumnResult out;
            if (y.squaredNorm() == 0.0)
            {
                // likelihood is maximized by the point mass at zero
                out.estimate = CVec::Zero(n);
                out.noise_variance = noise_floor;
                out.zero_weight = 1.0;
                out.converged = true;
                return out;
            }
            CVec x = CVec::Zero(n);
            RVec nu_x = RVec::Constant(n, prior.prior_variance());
            CVec s = CVec::Zero(m);
            CVec x_new;
            RVec nu_x_new, nu_s_old;

            for (int t = 1; t <= cfg.max_iterations; ++t)
            {
                const RVec nu_p = (A2 * nu_x).cwiseMax(1e-300);
                const CVec p = A * x - (nu_p.cast<Complex>().cwiseProduct(s));
                const RVec denom = (nu_p.array() + noise).matrix();
                const CVec s_new = (y - p).cwiseQuotient(denom.cast<Complex>());
                RVec nu_s = denom.cwiseInverse();
                s = beta * s_new + (1.0 - beta) * s;
                if (t > 1)
                    nu_s = beta * nu_s + (1.0 - beta) * nu_s_old;
                nu_s_old = nu_s;

                const RVec nu_r = (A2t * nu_s).cwiseInverse();
                const CVec r = x + nu_r.cast<Complex>().cwiseProduct(A.adjoint() * s);
                prior.denoise(r, nu_r, x_new, nu_x_new);

                // noise EM from the output posterior z | y, p
                const CVec z = p + (nu_p.cwiseQuotient(denom)).cast<Complex>().cwiseProduct(y - p);
                const RVec nu_z = (nu_p * noise).cwiseQuotient(denom);
                double prior_shift = 0.0;
                if (cfg.amp_learn)
                {
                    noise = std::max(noise_floor, ((y - z).squaredNorm() + nu_z.sum()) / static_cast<double>(m));
                    const double before = prior.zero_weight();
                    prior.em_update();
                    prior_shift = std::abs(prior.zero_weight() - before);
                }

                const double change = (x_new - x).norm();
                x = beta * x_new + (1.0 - beta) * x;
                nu_x = beta * nu_x_new + (1.0 - beta) * nu_x;

                out.tau_r.push_back(nu_r.mean());
                out.residual_energy.push_back((y - A * x).squaredNorm());
                out.iterations = t;
                const std::size_t e = out.residual_energy.size();
                if (e > 5 && out.residual_energy[e - 1] > 10.0 * out.residual_energy[e - 6] &&
                    out.residual_energy[e - 1] > 1e-20)
                    throw DivergenceError("gm_amp_em_recover: residual energy grew more than 10x over 5 iterations"
                                          " (damping = " + std::to_string(beta) + "); retry with a smaller damping factor.");
                // an all-zero estimate also waits for the sparsity weight to settle
                if (prior_shift <= cfg.tolerance &&
                    (change <= cfg.tolerance * std::max(x.norm(), 1e-300) || (x.norm() == 0.0 && change == 0.0)))
                {
                    out.converged = true;
                    break;
                }
            }
            out.estimate = x;
            out.noise_variance = noise;
            out.zero_weight = prior.zero_weight();
            return out;
        }

        // Halves the damping factor after each divergence, up to cfg.amp_retries times.
        template <class Prior>
        AmpColumnResult amp_em_column(const CVec &y, const CMat &A, const Prior &prior, double noise,
                                      const RecoveryConfig &cfg)
        {
            RecoveryConfig c = cfg;
            for (int attempt = 0;; ++attempt)
            {
                try
                {
                    return amp_em_column_once(y, A, prior, noise, c);
                }
                catch (const DivergenceError &)
                {
                    if (attempt >= cfg.amp_retries)
                        throw;
                    c.amp_damping *= 0.5;
                }
            }
        }

        inline void check_amp_shapes(const CVec &y, const CMat &A)
        {
            if (y.size() != A.rows())
                throw std::invalid_argument("gm_amp_em_recover: measurement length does not match the pilot matrix.");
            if (A.cols() == 0 || A.rows() == 0)
                throw std::invalid_argument("gm_amp_em_recover: empty pilot matrix.");
        }
    } // namespace detail

    // Mixture starts with weight 1 - lambda on a spike of variance cfg.gm_spike_variance and the rest
    // split over gm_components - 1 slabs spread geometrically around the measured signal energy.
    inline AmpColumnResult gm_amp_em_column(const CVec &y, const CMat &A, const RecoveryConfig &cfg)
    {
        cfg.validate();
        detail::check_amp_shapes(y, A);
        const auto g = detail::amp_initial_guess(y, A, cfg.gm_spike_variance);
        const Index C = cfg.gm_components;
        RVec w(C), v(C);
        w[0] = 1.0 - g.lambda;
        v[0] = cfg.gm_spike_variance;
        for (Index l = 1; l < C; ++l)
        {
            w[l] = g.lambda / static_cast<double>(C - 1);
            v[l] = g.slab * std::pow(4.0, static_cast<double>(l - 1) - 0.5 * static_cast<double>(C - 2));
        }
        return detail::amp_em_column(y, A, GaussMixturePrior(w, v), g.noise, cfg);
    }

    // AMP with a caller-supplied prior and noise variance; EM learning follows cfg.amp_learn.
    template <class Prior>
    AmpColumnResult amp_column_with_prior(const CVec &y, const CMat &A, const Prior &prior, double noise_variance,
                                          const RecoveryConfig &cfg)
    {
        cfg.validate();
        detail::check_amp_shapes(y, A);
        return detail::amp_em_column(y, A, prior, noise_variance, cfg);
    }

    inline AmpColumnResult bg_amp_em_column(const CVec &y, const CMat &A, const RecoveryConfig &cfg)
    {
        cfg.validate();
        detail::check_amp_shapes(y, A);
        const auto g = detail::amp_initial_guess(y, A, 0.0);
        return detail::amp_em_column(y, A, BernoulliGaussPrior(g.lambda, g.slab), g.noise, cfg);
    }

    namespace detail
    {
        template <class ColumnSolver>
        EstimateReport amp_em_matrix(const CMat &Y, const CMat &S, const RecoveryConfig &cfg, const char *method,
                                     ColumnSolver solve)
        {
            if (S.rows() != Y.rows())
                throw std::invalid_argument(std::string(method) + ": composite pilot matrix has " +
                                            std::to_string(S.rows()) + " rows but the measurement has " +
                                            std::to_string(Y.rows()) + ".");
            EstimateReport rep;
            rep.method = method;
            rep.estimate = CMat::Zero(S.cols(), Y.cols());
            double noise = 0.0;
            for (Index c = 0; c < Y.cols(); ++c)
            {
                const AmpColumnResult col = solve(CVec(Y.col(c)), S, cfg);
                rep.estimate.col(c) = col.estimate;
                noise += col.noise_variance;
                rep.iterations = std::max(rep.iterations, col.iterations);
                rep.converged = rep.converged && col.converged;
                if (c == 0 && cfg.record_trace)
                    for (std::size_t t = 0; t < col.tau_r.size(); ++t)
                        rep.trace.push_back({static_cast<int>(t + 1), col.residual_energy[t],
                                             std::sqrt(col.residual_energy[t]), col.tau_r[t]});
            }
            rep.noise_variance = Y.cols() > 0 ? noise / static_cast<double>(Y.cols()) : 0.0;
            rep.residual_norm = (Y - S * rep.estimate).norm();
            return rep;
        }
    } // namespace detail

    // Column-by-column GM-AMP-EM; returns the KL x M posterior-mean channel matrix.
    inline EstimateReport gm_amp_em_recover(const CMat &Y, const CMat &S, const RecoveryConfig &cfg)
    {
        return detail::amp_em_matrix(Y, S, cfg, "gm_amp_em", gm_amp_em_column);
    }

    inline EstimateReport bg_amp_em_recover(const CMat &Y, const CMat &S, const RecoveryConfig &cfg)
    {
        return detail::amp_em_matrix(Y, S, cfg, "bg_amp_em", bg_amp_em_column);
    }

} // namespace sparse_csi

#endif
