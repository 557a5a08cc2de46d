#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "rbayes/ad.hpp"
#include "rbayes/dists.hpp"

// Experiment planner for sequence reuse: treats a survival distribution as a
// bag of coins with mean bias qbar and spread sigma, and asks how many times
// each coin (sequence) should be flipped (measured) before drawing a new one.
// First-moment estimation is scored by the cost-weighted Cramer-Rao bound of
// the beta-binomial model; second-moment estimation (as needed for unitarity)
// by the exact mean squared error of the sum-of-squares estimator.

namespace rbayes::design {

// Time to switch to a new random sequence (t_pick) and to take one shot
// (t_flip), both in seconds.
struct CostModel {
    double t_pick = 0.0;
    double t_flip = 1.0;

    void validate() const {
        if (t_pick < 0.0 || t_flip < 0.0)
            throw std::invalid_argument("CostModel: costs must be nonnegative");
        if (t_pick == 0.0 && t_flip == 0.0)
            throw std::invalid_argument("CostModel: costs cannot both be zero");
    }
};

// Bag of coins with mean bias qbar and bias variance sigma2; constructible
// from any of the equivalent second descriptors (sigma^2, spread t, raw second
// moment mu2).
struct BagParams {
    double qbar = 0.5;
    double sigma2 = 0.0;

    static BagParams from_sigma2(double qbar, double sigma2) {
        BagParams b{qbar, sigma2};
        b.validate();
        return b;
    }
    static BagParams from_t(double qbar, double t) {
        return from_sigma2(qbar, t * qbar * (1.0 - qbar));
    }
    static BagParams from_mu2(double qbar, double mu2) {
        return from_sigma2(qbar, mu2 - qbar * qbar);
    }

    double t() const { return sigma2 / (qbar * (1.0 - qbar)); }
    double mu2() const { return sigma2 + qbar * qbar; }

    void validate() const {
        if (!(qbar > 0.0 && qbar < 1.0))
            throw std::invalid_argument("BagParams: qbar outside (0,1)");
        if (!(sigma2 >= 0.0 && sigma2 < qbar * (1.0 - qbar)))
            throw std::invalid_argument("BagParams: variance outside [0, qbar(1-qbar))");
    }
};

// Variance of the first-moment estimator sum_i Q_i / (N I) over I draws of
// N flips each, by the law of total variance:
// (1/I) (qbar(1-qbar)/N + (N-1)/N sigma^2).
inline double mean_estimator_variance(const BagParams& bag, int N, double I) {
    bag.validate();
    if (N < 1 || I < 1.0)
        throw std::invalid_argument("mean_estimator_variance: N and I must be >= 1");
    double n = static_cast<double>(N);
    return (bag.qbar * (1.0 - bag.qbar) / n + (n - 1.0) / n * bag.sigma2) / I;
}

// Fisher information of Beta-Binom(N, qbar, t) in the (qbar, t)
// parameterization: J = sum_{Q=0}^{N} pmf(Q) * (-Hessian of log pmf), by exact
// summation with nested-dual Hessians. The matrix is exactly diagonal at
// qbar = 1/2, where the Q <-> N-Q symmetry makes the mixed derivative odd
// (verifiable in closed form at N = 2); away from the symmetric point the
// off-diagonal is genuinely nonzero, though small next to the diagonal, so the
// full matrix is returned and downstream bounds invert it rather than assume
// diagonality.
struct FisherInfo {
    double j11 = 0.0;  // qbar block
    double j22 = 0.0;  // t block
    double j12 = 0.0;  // cross term; zero only at qbar = 1/2

    // marginal Cramer-Rao bound on qbar with t unknown: [J^{-1}]_{11}.
    // At N = 1 the model is Bernoulli, t carries no information (j22 = 0) and
    // the marginal bound degenerates to the plain reciprocal.
    double crb_qbar() const {
        double det = j11 * j22 - j12 * j12;
        return (j22 > 0.0 && det > 0.0) ? j22 / det : 1.0 / j11;
    }
};

inline FisherInfo fisher_info_betabin(double qbar, double t, int N) {
    if (!(qbar > 0.0 && qbar < 1.0) || !(t > 0.0 && t < 1.0))
        throw std::invalid_argument("fisher_info_betabin: (qbar, t) outside the open unit box");
    if (N < 1) throw std::invalid_argument("fisher_info_betabin: N must be >= 1");
    FisherInfo info;
    const std::array<double, 2> x{qbar, t};
    for (int Q = 0; Q <= N; ++Q) {
        double value;
        std::array<double, 2> grad;
        std::array<double, 4> hess;
        ad::hessian(
            [&](std::span<const ad::dual2> u) {
                return dists::beta_binomial_logpmf(Q, N, u[0], u[1]);
            },
            std::span<const double>(x), value, std::span<double>(grad), std::span<double>(hess));
        double pmf = std::exp(value);
        info.j11 -= pmf * hess[0];
        info.j22 -= pmf * hess[3];
        info.j12 -= pmf * hess[1];
    }
    return info;
}

// Cost-weighted Cramer-Rao bound for qbar:
// (t_pick + N t_flip) * [J^{-1}]_{11}, the exact marginal bound with t
// treated as an unknown nuisance (identical to (t_pick + N t_flip)/J11
// wherever the information matrix is diagonal).
inline double wcrb(double qbar, double t, int N, const CostModel& cost) {
    cost.validate();
    return (cost.t_pick + N * cost.t_flip) * fisher_info_betabin(qbar, t, N).crb_qbar();
}

struct WcrbScan {
    int n_opt = 1;
    std::vector<double> bound;  // bound[k] is the WCRB at N = k + 1
};

inline WcrbScan wcrb_argmin(double qbar, double t, const CostModel& cost, int n_max) {
    if (n_max < 1) throw std::invalid_argument("wcrb_argmin: n_max must be >= 1");
    WcrbScan scan;
    scan.bound.reserve(static_cast<std::size_t>(n_max));
    for (int N = 1; N <= n_max; ++N) {
        scan.bound.push_back(wcrb(qbar, t, N, cost));
        if (scan.bound.back() < scan.bound[static_cast<std::size_t>(scan.n_opt - 1)])
            scan.n_opt = N;
    }
    return scan;
}

// Mean of the second-moment estimator sum_i Q_i^2 / (I N^2):
// mu2 + (qbar - mu2)/N, biased but not asymptotically so.
inline double second_moment_estimator_mean(double qbar, double mu2, int N) {
    return mu2 + (qbar - mu2) / static_cast<double>(N);
}

// Exact mean squared error of the same estimator about mu2: squared bias plus
// variance, the latter from E[(sum_i Q_i^2/(I N^2))^2] expanded over the iid
// draws, which needs the beta-binomial fourth moment.
inline double second_moment_mse(double qbar, double mu2, int N, double I) {
    BagParams::from_mu2(qbar, mu2).validate();
    if (N < 1 || I < 1.0) throw std::invalid_argument("second_moment_mse: N and I must be >= 1");
    double n = static_cast<double>(N);
    double q2 = dists::beta_binomial_moment(2, N, qbar, mu2);
    double q4 = dists::beta_binomial_moment(4, N, qbar, mu2);
    double bias = (qbar - mu2) / n;
    double var = (q4 - q2 * q2) / (I * n * n * n * n);
    return bias * bias + var;
}

namespace detail {

// Gauss-Legendre nodes/weights on (0,1), by Newton iteration on P_n from the
// Chebyshev-based initial guess.
struct Quadrature {
    std::vector<double> node, weight;
};

inline Quadrature gauss_legendre01(int n) {
    Quadrature q;
    q.node.resize(static_cast<std::size_t>(n));
    q.weight.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        q.node[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
        q.weight[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * pp * pp);
    }
    return q;
}

}  // namespace detail

// Optimal number of repetitions N for second-moment estimation under a total
// shot budget T and switching ratio tau = t_pick / t_flip. The objective at
// each integer N is the cost-weighted MSE, (tau + N) * (T/N) * MSE(N, I=T/N)
// (reducing to T * MSE at tau = 0), averaged over the uniform prior on the
// validity region {(mu, mu2) : l < mu < 1, mu^2 < mu2 < mu} by 64x64
// Gauss-Legendre quadrature on the mapped triangle; the argmin comes from an
// exhaustive scan of N up to ceil(10 T^{1/3}), with the known T^{1/3}
// asymptotics serving only as a cross-check, never as the answer.
struct PlanResult {
    int n_opt = 1;
    double coefficient = 0.0;       // n_opt / T^{1/3}
    std::vector<double> objective;  // objective[k] is the averaged cost at N = k + 1
};

inline PlanResult optimal_N_second_moment(double T, double tau = 0.0, double l = 0.0) {
    if (T < 2.0) throw std::invalid_argument("optimal_N_second_moment: budget T must be >= 2");
    if (tau < 0.0) throw std::invalid_argument("optimal_N_second_moment: tau must be >= 0");
    if (!(l >= 0.0 && l < 1.0))
        throw std::invalid_argument("optimal_N_second_moment: lower bound outside [0,1)");
    static const detail::Quadrature quad = detail::gauss_legendre01(64);
    const int n_quad = static_cast<int>(quad.node.size());
    const int n_max = std::max(1, static_cast<int>(std::ceil(10.0 * std::cbrt(T))));

    PlanResult plan;
    plan.objective.reserve(static_cast<std::size_t>(n_max));
    for (int N = 1; N <= n_max && N <= static_cast<int>(T); ++N) {
        double I = T / static_cast<double>(N);
        double acc = 0.0, norm = 0.0;
        for (int a = 0; a < n_quad; ++a) {
            double mu = l + (1.0 - l) * quad.node[static_cast<std::size_t>(a)];
            double span = mu - mu * mu;  // height of the validity slice at mu
            for (int b = 0; b < n_quad; ++b) {
                double mu2 = mu * mu + span * quad.node[static_cast<std::size_t>(b)];
                double w = quad.weight[static_cast<std::size_t>(a)] *
                           quad.weight[static_cast<std::size_t>(b)] * span;
                acc += w * (tau + N) * I * second_moment_mse(mu, mu2, N, I);
                norm += w;
            }
        }
        plan.objective.push_back(acc / norm);
        if (plan.objective.back() <
            plan.objective[static_cast<std::size_t>(plan.n_opt - 1)])
            plan.n_opt = N;
    }
    plan.coefficient = plan.n_opt / std::cbrt(T);
    return plan;
}

}  // namespace rbayes::design
