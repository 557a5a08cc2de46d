#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbayes/ad.hpp"

// Beta family under five parameterizations, beta-binomial pmf and moments,
// PAL priors, stick-breaking weights, and the moment-constrained beta
// mixtures used as nonparametric survival-distribution priors.

namespace rbayes::dists {

using ad::digamma;
using ad::value_of;

enum class BetaView { AlphaBeta, MeanVar, MeanM2, MeanT, MeanR, MeanS };

inline const char* view_name(BetaView v) {
    switch (v) {
        case BetaView::AlphaBeta: return "(alpha,beta)";
        case BetaView::MeanVar: return "(mu,var)";
        case BetaView::MeanM2: return "(mu,mu2)";
        case BetaView::MeanT: return "(mu,t)";
        case BetaView::MeanR: return "(mu,r)";
        case BetaView::MeanS: return "(mu,s)";
    }
    return "?";
}

struct BetaParams {
    BetaView view;
    double a;  // first component (alpha or mu)
    double b;  // second component

    void validate() const {
        auto fail = [this](const std::string& why) {
            throw std::domain_error("invalid beta parameters " + std::string(view_name(view)) + ": " + why);
        };
        switch (view) {
            case BetaView::AlphaBeta:
                if (!(a > 0.0 && b > 0.0)) fail("alpha, beta must be positive");
                break;
            case BetaView::MeanVar:
                if (!(a > 0.0 && a < 1.0)) fail("mu outside (0,1)");
                if (!(b > 0.0 && b < a * (1.0 - a))) fail("var outside (0, mu(1-mu))");
                break;
            case BetaView::MeanM2:
                if (!(a > 0.0 && a < 1.0)) fail("mu outside (0,1)");
                if (!(b > a * a && b < a)) fail("mu2 outside (mu^2, mu)");
                break;
            case BetaView::MeanT:
            case BetaView::MeanR:
                if (!(a > 0.0 && a < 1.0)) fail("mu outside (0,1)");
                if (!(b > 0.0 && b < 1.0)) fail("second component outside (0,1)");
                break;
            case BetaView::MeanS:
                if (!(a > 0.0 && a < 1.0)) fail("mu outside (0,1)");
                if (!(b > 0.0)) fail("s must be positive");
                break;
        }
    }
};

// exact algebraic conversions through the (alpha, beta) view
template <class T>
void beta_view_to_ab(BetaView view, const T& a, const T& b, T& alpha, T& beta) {
    switch (view) {
        case BetaView::AlphaBeta:
            alpha = a; beta = b;
            break;
        case BetaView::MeanVar:
            alpha = a * a * (1.0 - a) / b - a;
            beta = a * (1.0 - a) * (1.0 - a) / b - (1.0 - a);
            break;
        case BetaView::MeanM2:
            alpha = a * (a - b) / (b - a * a);
            beta = (1.0 - a) * (a - b) / (b - a * a);
            break;
        case BetaView::MeanT:
            alpha = a * (1.0 / b - 1.0);
            beta = (1.0 - a) * (1.0 - b) / b;
            break;
        case BetaView::MeanR:
            alpha = 1.0 / (b * (1.0 - a)) - a;
            beta = 1.0 / (b * a) + a - 1.0;
            break;
        case BetaView::MeanS:
            alpha = b * a;
            beta = b * (1.0 - a);
            break;
    }
}

template <class T>
void beta_ab_to_view(BetaView view, const T& alpha, const T& beta, T& a, T& b) {
    T s = alpha + beta;
    switch (view) {
        case BetaView::AlphaBeta:
            a = alpha; b = beta;
            break;
        case BetaView::MeanVar:
            a = alpha / s;
            b = alpha * beta / (s * s * (s + 1.0));
            break;
        case BetaView::MeanM2:
            a = alpha / s;
            b = alpha * (1.0 + alpha) / (s * (1.0 + s));
            break;
        case BetaView::MeanT:
            a = alpha / s;
            b = 1.0 / (1.0 + s);
            break;
        case BetaView::MeanR:
            a = alpha / s;
            b = s * s / (alpha * beta * (1.0 + s));
            break;
        case BetaView::MeanS:
            a = alpha / s;
            b = s;
            break;
    }
}

inline BetaParams beta_convert(const BetaParams& p, BetaView target) {
    p.validate();
    double alpha, beta;
    beta_view_to_ab(p.view, p.a, p.b, alpha, beta);
    if (!(alpha > 0.0 && beta > 0.0))
        throw std::domain_error("beta_convert: inconsistent input, implied (alpha,beta) not positive");
    BetaParams out{target, 0.0, 0.0};
    beta_ab_to_view(target, alpha, beta, out.a, out.b);
    out.validate();
    return out;
}

template <class T>
T lbeta(const T& a, const T& b) {
    using ad::lgamma;
    using std::lgamma;
    return lgamma(a) + lgamma(b) - lgamma(a + b);
}

template <class T>
T beta_logpdf_ab(const T& q, const T& alpha, const T& beta) {
    using ad::log;
    using std::log;
    return (alpha - 1.0) * log(q) + (beta - 1.0) * log(1.0 - q) - lbeta(alpha, beta);
}

inline double beta_logpdf(double q, const BetaParams& p) {
    if (!(q > 0.0 && q < 1.0)) throw std::domain_error("beta_logpdf: q outside (0,1)");
    BetaParams ab = beta_convert(p, BetaView::AlphaBeta);
    return beta_logpdf_ab(q, ab.a, ab.b);
}

// log Beta-Binomial(Q | N, alpha, beta) without the data-only binomial term
template <class T>
T beta_binomial_kernel(int Q, int N, const T& alpha, const T& beta) {
    using std::log;
    // Tiny spreads t give shape sums s = alpha + beta of order 1/t, where the
    // lgamma-difference form cancels catastrophically (absolute error of order
    // eps * s * log s). The ratios of gamma functions telescope into N exact
    // log factors, so past s ~ 1e4 the product form is both exact and cheap.
    if (value_of(alpha + beta) > 1e4) {
        T acc(0.0);
        for (int j = 0; j < Q; ++j) acc += log(alpha + static_cast<double>(j));
        for (int j = 0; j < N - Q; ++j) acc += log(beta + static_cast<double>(j));
        for (int j = 0; j < N; ++j) acc -= log(alpha + beta + static_cast<double>(j));
        return acc;
    }
    return lbeta(T(Q + alpha), T(N - Q + beta)) - lbeta(alpha, beta);
}

inline double lchoose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

template <class T>
T beta_binomial_logpmf_ab(int Q, int N, const T& alpha, const T& beta) {
    if (Q < 0 || Q > N) throw std::domain_error("beta_binomial_logpmf: Q outside [0,N]");
    return lchoose(N, Q) + beta_binomial_kernel(Q, N, alpha, beta);
}

template <class T>
T beta_binomial_logpmf(int Q, int N, const T& mu, const T& t) {
    T alpha, beta;
    beta_view_to_ab(BetaView::MeanT, mu, t, alpha, beta);
    return beta_binomial_logpmf_ab(Q, N, alpha, beta);
}

// E[Q^k] for Q ~ Beta-Binom(N, mu, mu2), k <= 4.
// Falling-factorial moments E[(Q)_k] = (N)_k m_k with m_k the beta moments;
// powers recovered through Stirling numbers of the second kind.
inline double beta_binomial_moment(int k, int N, double mu, double mu2) {
    if (k < 0 || k > 4) throw std::domain_error("beta_binomial_moment: order must be in 0..4");
    BetaParams ab = beta_convert({BetaView::MeanM2, mu, mu2}, BetaView::AlphaBeta);
    double alpha = ab.a, beta = ab.b, s = alpha + beta;
    // beta raw moments m_j = prod_{i<j} (alpha+i)/(s+i)
    std::array<double, 5> m{1.0, 0, 0, 0, 0};
    for (int j = 1; j <= 4; ++j) m[j] = m[j - 1] * (alpha + j - 1) / (s + j - 1);
    std::array<double, 5> ff{1.0, 0, 0, 0, 0};  // (N)_j falling factorial
    for (int j = 1; j <= 4; ++j) ff[j] = ff[j - 1] * (N - j + 1);
    // Stirling numbers S(k, j)
    static const double S[5][5] = {
        {1, 0, 0, 0, 0},
        {0, 1, 0, 0, 0},
        {0, 1, 1, 0, 0},
        {0, 1, 3, 1, 0},
        {0, 1, 7, 6, 1},
    };
    double out = 0.0;
    for (int j = 0; j <= k; ++j) out += S[k][j] * ff[j] * m[j];
    return out;
}

struct PALParams {
    double p0;
    double z;
    bool smooth = false;

    void validate() const {
        if (!(p0 > 0.0 && p0 < 1.0)) throw std::domain_error("PAL: p0 outside (0,1)");
        if (!(z > 0.0 && z <= p0)) throw std::domain_error("PAL: z outside (0,p0]");
    }
};

// "probably at least" prior: uniform plateau above p0, decaying tail below
// carrying total mass z; the smooth variant has a continuous derivative at p0.
template <class T>
T pal_logpdf(const T& x, const PALParams& p) {
    using ad::log;
    using ad::pow;
    using std::log;
    using std::pow;
    if (!(x > 0.0 && x < 1.0)) throw std::domain_error("pal_logpdf: x outside (0,1)");
    double plateau = std::log((1.0 - p.z) / (1.0 - p.p0));
    if (x >= p.p0) return T(plateau);
    double k = (p.p0 - p.z) / (p.z * (1.0 - p.p0));
    if (!p.smooth) return plateau + k * log(x / p.p0);
    T g = (p.p0 * p.p0 * (2.0 - p.z) + 2.0 * x * p.z - p.p0 * (2.0 * x + p.z)) / (p.z * p.p0 * (1.0 - p.p0));
    return plateau + log(g) + 2.0 * k * log(x / p.p0);
}

// w_k = v_k prod_{l<k} (1-v_l); the last weight takes the remainder so the
// output sums to one exactly.
template <class T>
std::vector<T> stick_break(std::span<const T> v) {
    std::vector<T> w(v.size() + 1);
    T stick = T(1.0);
    for (std::size_t k = 0; k < v.size(); ++k) {
        w[k] = v[k] * stick;
        stick = stick * (1.0 - v[k]);
    }
    w[v.size()] = stick;
    return w;
}

template <class T>
T inv_logit(const T& x) {
    using ad::exp;
    using std::exp;
    if (value_of(x) >= 0.0) {
        T e = exp(-x);
        return 1.0 / (1.0 + e);
    }
    T e = exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

namespace detail {

// residual sum_k w_k inv_logit(nu*_k + h) - mu1 and its h-derivative
template <class T>
void mean_residual(std::span<const T> nu_star, std::span<const T> w, const T& h, const T& mu1,
                   T& res, T& slope) {
    res = -mu1;
    slope = T(0.0);
    for (std::size_t k = 0; k < nu_star.size(); ++k) {
        T nu = inv_logit(T(nu_star[k] + h));
        res += w[k] * nu;
        slope += w[k] * nu * (1.0 - nu);
    }
}

}  // namespace detail

// Solve for the shift h making the weighted mixture mean equal mu1, then
// return nu_k = inv_logit(nu*_k + h). Five Newton steps from the exact-when-
// degenerate initial guess; if the residual check fails, fall back to
// bisection (the mean is strictly increasing in h with full range (0,1)).
template <class T>
std::vector<T> cdpbm_constrain_mean(std::span<const T> nu_star, std::span<const T> w, const T& mu1,
                                    T* h_out = nullptr) {
    T h = T(logit(value_of(mu1)));
    for (std::size_t k = 0; k < nu_star.size(); ++k) h -= w[k] * nu_star[k];

    T res, slope;
    for (int it = 0; it < 5; ++it) {
        detail::mean_residual(nu_star, w, h, mu1, res, slope);
        h -= res / slope;
    }
    detail::mean_residual(nu_star, w, h, mu1, res, slope);
    if (std::fabs(value_of(res)) > 1e-10) {
        // bracket in value space, bisect, then polish in T so tangents are exact
        double lo = -40.0, hi = 40.0;
        double mu_v = value_of(mu1);
        std::vector<double> nsv(nu_star.size()), wv(w.size());
        for (std::size_t k = 0; k < nu_star.size(); ++k) { nsv[k] = value_of(nu_star[k]); wv[k] = value_of(w[k]); }
        auto f = [&](double hh) {
            double r = -mu_v;
            for (std::size_t k = 0; k < nsv.size(); ++k) r += wv[k] * inv_logit(nsv[k] + hh);
            return r;
        };
        for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
            double mid = 0.5 * (lo + hi);
            (f(mid) < 0.0 ? lo : hi) = mid;
        }
        h = T(0.5 * (lo + hi)) + (h - value_of(h));  // keep tangent continuity via polish below
        for (int it = 0; it < 3; ++it) {
            detail::mean_residual(nu_star, w, h, mu1, res, slope);
            h -= res / slope;
        }
    }
    if (h_out) *h_out = h;
    std::vector<T> nu(nu_star.size());
    for (std::size_t k = 0; k < nu.size(); ++k) nu[k] = inv_logit(T(nu_star[k] + h));
    return nu;
}

// second raw moment of Beta in the (mu, r) view
template <class T>
T beta_m2_mu_r(const T& nu, const T& r) {
    T alpha, beta;
    beta_view_to_ab(BetaView::MeanR, nu, r, alpha, beta);
    T s = alpha + beta;
    return alpha * (1.0 + alpha) / (s * (1.0 + s));
}

// Two-moment constraint: find (h1, h2) with nu_k = inv_logit(h1 nu*_k + h2)
// such that the mixture's first two raw moments hit (mu1, mu2). Damped Newton
// with a finite-difference Jacobian from several starts; among converged
// solutions the one closest to the unshifted locations is kept.
template <class T>
std::vector<T> cdpbm_constrain_two_moments(std::span<const T> nu_star, std::span<const T> r,
                                           std::span<const T> w, const T& mu1, const T& mu2,
                                           std::array<T, 2>* h_out = nullptr) {
    double m1v = value_of(mu1), m2v = value_of(mu2);
    if (!(m1v > 0.0 && m1v < 1.0 && m2v > m1v * m1v && m2v < m1v))
        throw std::domain_error("cdpbm_constrain_two_moments: (mu1,mu2) outside valid box");
    const std::size_t K = nu_star.size();
    std::vector<double> nsv(K), rv(K), wv(K);
    for (std::size_t k = 0; k < K; ++k) {
        nsv[k] = value_of(nu_star[k]); rv[k] = value_of(r[k]); wv[k] = value_of(w[k]);
    }
    auto resid = [&](double h1, double h2, double& f1, double& f2) {
        f1 = -m1v; f2 = -m2v;
        for (std::size_t k = 0; k < K; ++k) {
            double nu = inv_logit(h1 * nsv[k] + h2);
            f1 += wv[k] * nu;
            f2 += wv[k] * beta_m2_mu_r(nu, rv[k]);
        }
    };

    // When all nu* coincide, the (h1, h2) map is rank-one: every component mean
    // equals inv_logit(h1 nu* + h2), so fix h1 = 1, satisfy the mean exactly,
    // and check that the second moment (then fully determined by r) agrees.
    double ns_lo = nsv[0], ns_hi = nsv[0];
    for (double x : nsv) { ns_lo = std::min(ns_lo, x); ns_hi = std::max(ns_hi, x); }
    if (ns_hi - ns_lo < 1e-12) {
        double f1d, f2d;
        resid(1.0, logit(m1v) - nsv[0], f1d, f2d);
        if (std::fabs(f2d) > 1e-8)
            throw std::runtime_error(
                "cdpbm_constrain_two_moments: degenerate components cannot match mu2");
        using ad::log;
        using std::log;
        T h1 = T(1.0), h2 = log(mu1 / (1.0 - mu1)) - nu_star[0];
        if (h_out) (*h_out) = {h1, h2};
        std::vector<T> nu(K);
        for (std::size_t k = 0; k < K; ++k) nu[k] = inv_logit(h1 * nu_star[k] + h2);
        return nu;
    }

    double mean_ns = 0.0;
    for (std::size_t k = 0; k < K; ++k) mean_ns += wv[k] * nsv[k];
    const double starts[4][2] = {
        {1.0, logit(m1v) - mean_ns}, {0.5, logit(m1v)}, {2.0, logit(m1v) - 2.0 * mean_ns}, {0.1, logit(m1v)}};
    bool found = false;
    double best[2] = {0, 0}, best_dist = 0;
    for (auto& s0 : starts) {
        double h1 = s0[0], h2 = s0[1];
        bool ok = false;
        for (int it = 0; it < 200; ++it) {
            double f1, f2;
            resid(h1, h2, f1, f2);
            if (std::fabs(f1) < 1e-12 && std::fabs(f2) < 1e-12) { ok = true; break; }
            const double eps = 1e-7;
            double a1, a2, b1, b2;
            resid(h1 + eps, h2, a1, a2);
            resid(h1, h2 + eps, b1, b2);
            double j11 = (a1 - f1) / eps, j12 = (b1 - f1) / eps;
            double j21 = (a2 - f2) / eps, j22 = (b2 - f2) / eps;
            double det = j11 * j22 - j12 * j21;
            if (std::fabs(det) < 1e-300) break;
            double d1 = (f1 * j22 - f2 * j12) / det;
            double d2 = (j11 * f2 - j21 * f1) / det;
            double step = 1.0;
            double n0 = f1 * f1 + f2 * f2;
            for (int half = 0; half < 30; ++half) {
                double g1, g2;
                resid(h1 - step * d1, h2 - step * d2, g1, g2);
                if (g1 * g1 + g2 * g2 < n0) break;
                step *= 0.5;
            }
            h1 -= step * d1;
            h2 -= step * d2;
        }
        double f1, f2;
        resid(h1, h2, f1, f2);
        if (ok || (std::fabs(f1) < 1e-8 && std::fabs(f2) < 1e-8)) {
            double dist = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                double d = inv_logit(h1 * nsv[k] + h2) - inv_logit(nsv[k]);
                dist += d * d;
            }
            if (!found || dist < best_dist) { found = true; best_dist = dist; best[0] = h1; best[1] = h2; }
        }
    }
    if (!found)
        throw std::runtime_error("cdpbm_constrain_two_moments: constraint infeasible within iteration budget");
    // polish in T for exact tangents
    T h1 = T(best[0]), h2 = T(best[1]);
    for (int it = 0; it < 3; ++it) {
        T f1 = -mu1, f2 = -mu2, j11 = T(0), j12 = T(0), j21 = T(0), j22 = T(0);
        for (std::size_t k = 0; k < K; ++k) {
            T x = h1 * nu_star[k] + h2;
            T nu = inv_logit(x);
            T dnu = nu * (1.0 - nu);
            f1 += w[k] * nu;
            // m2 and its nu-derivative via one nested forward sweep
            ad::Dual<T> m2d = beta_m2_mu_r(ad::Dual<T>(nu, T(1.0)), ad::Dual<T>(r[k]));
            f2 += w[k] * m2d.v;
            j11 += w[k] * dnu * nu_star[k];
            j12 += w[k] * dnu;
            j21 += w[k] * m2d.d * dnu * nu_star[k];
            j22 += w[k] * m2d.d * dnu;
        }
        T det = j11 * j22 - j12 * j21;
        h1 -= (f1 * j22 - f2 * j12) / det;
        h2 -= (j11 * f2 - j21 * f1) / det;
    }
    if (h_out) (*h_out) = {h1, h2};
    std::vector<T> nu(K);
    for (std::size_t k = 0; k < K; ++k) nu[k] = inv_logit(T(h1 * nu_star[k] + h2));
    return nu;
}

struct BetaMixture {
    std::vector<double> w;   // simplex weights
    std::vector<double> nu;  // component means, (mu,r) view
    std::vector<double> r;   // component spreads
};

inline double mixture_logpdf(double q, const BetaMixture& mix) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(mix.w.size());
    for (std::size_t k = 0; k < mix.w.size(); ++k) {
        terms[k] = std::log(mix.w[k]) + beta_logpdf(q, {BetaView::MeanR, mix.nu[k], mix.r[k]});
        best = std::max(best, terms[k]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
}

inline double mixture_moment(int order, const BetaMixture& mix) {
    double out = 0.0;
    for (std::size_t k = 0; k < mix.w.size(); ++k) {
        BetaParams ab = beta_convert({BetaView::MeanR, mix.nu[k], mix.r[k]}, BetaView::AlphaBeta);
        double m = 1.0, s = ab.a + ab.b;
        for (int j = 0; j < order; ++j) m *= (ab.a + j) / (s + j);
        out += mix.w[k] * m;
    }
    return out;
}

}  // namespace rbayes::dists
