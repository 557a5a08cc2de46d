#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "rbayes/bayes.hpp"
#include "rbayes/rng.hpp"
#include "rbayes/simulate.hpp"

// Posterior sampling: a Metropolis-Hastings reference sampler, Hamiltonian
// Monte Carlo with multinomial NUTS, convergence diagnostics (split R-hat,
// rank-based ESS), and posterior summaries.

namespace rbayes::sampler {

struct SamplerConfig {
    int chains = 4;
    int warmup = 1000;
    int keep = 1000;
    std::uint64_t seed = 0;
    int thin = 1;                  // MH: keep every thin-th draw
    double mh_scale = 0.1;         // MH proposal standard deviation
    std::optional<double> step_size;  // NUTS: fixed initial ε (skips the heuristic);
                                      // with warmup == 0 it is used as-is
    double target_accept = 0.8;    // NUTS dual-averaging target
    int max_tree_depth = 10;
    double divergence_threshold = 1000.0;  // nats of energy error
    double init_jitter = 0.1;
    std::optional<std::vector<double>> init;  // unconstrained initial point override
};

// A sampling target: log-density over unconstrained coordinates, its exact
// gradient (required by NUTS), and an optional map to constrained/reporting
// coordinates.
struct Target {
    int dim = 0;
    std::function<double(std::span<const double>)> logdensity;
    std::function<std::vector<double>(std::span<const double>)> grad;
    std::function<std::vector<double>(std::span<const double>)> constrain;  // optional
    std::vector<std::string> names;                                         // optional
    std::vector<double> init;                                               // optional

    std::vector<double> to_constrained(std::span<const double> u) const {
        if (constrain) return constrain(u);
        return std::vector<double>(u.begin(), u.end());
    }
};

inline Target make_target(const bayes::HierarchicalModel& m) {
    Target t;
    t.dim = m.dim();
    t.logdensity = [&m](std::span<const double> u) { return bayes::log_posterior(m, u); };
    t.grad = [&m](std::span<const double> u) { return bayes::grad_log_posterior(m, u); };
    t.constrain = [&m](std::span<const double> u) { return m.constrain(u); };
    t.names = m.param_names();
    t.init = m.initial_point();
    return t;
}

struct PosteriorChains {
    std::vector<std::string> names;
    std::vector<Eigen::MatrixXd> draws;  // per chain: keep x dim, constrained coordinates
    std::vector<double> accept_rate;     // per chain
    std::vector<long> divergences;       // per chain (NUTS; zero for MH)
    std::vector<double> step_size;       // per chain (NUTS)

    int n_chains() const { return static_cast<int>(draws.size()); }
    int n_draws() const { return draws.empty() ? 0 : static_cast<int>(draws[0].rows()); }
    int n_params() const { return draws.empty() ? 0 : static_cast<int>(draws[0].cols()); }

    std::vector<double> flat(int param) const {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(n_chains()) * n_draws());
        for (const auto& d : draws)
            for (int i = 0; i < d.rows(); ++i) out.push_back(d(i, param));
        return out;
    }

    long total_divergences() const {
        long s = 0;
        for (long d : divergences) s += d;
        return s;
    }
};

namespace detail {

inline std::vector<double> chain_init(const Target& target, const SamplerConfig& cfg,
                                      std::mt19937_64& gen) {
    std::vector<double> base =
        cfg.init ? *cfg.init
                 : (target.init.empty() ? std::vector<double>(target.dim, 0.0) : target.init);
    if (static_cast<int>(base.size()) != target.dim)
        throw std::invalid_argument("sampler: initial point has the wrong dimension");
    std::normal_distribution<double> n(0.0, cfg.init_jitter);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<double> u = base;
        for (auto& x : u) x += n(gen);
        if (std::isfinite(target.logdensity(u))) return u;
    }
    throw std::runtime_error("sampler: no finite initial density found in 100 attempts");
}

inline void run_parallel(int n_jobs, const std::function<void(int)>& job) {
    int workers = std::min<int>(qsim::worker_count(), n_jobs);
    if (workers <= 1) {
        for (int j = 0; j < n_jobs; ++j) job(j);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int j = next.fetch_add(1); j < n_jobs; j = next.fetch_add(1)) job(j);
        });
    for (auto& t : pool) t.join();
}

}  // namespace detail

// ---- Metropolis-Hastings --------------------------------------------------

// Gaussian random-walk MH. The proposal is symmetric, so the acceptance
// probability is the plain density ratio. Deterministic given the seed;
// chains use independent, pre-split RNG streams.
inline PosteriorChains metropolis_hastings(const Target& target, const SamplerConfig& cfg) {
    if (cfg.chains < 1 || cfg.keep < 1 || cfg.warmup < 0 || cfg.thin < 1)
        throw std::invalid_argument("metropolis_hastings: invalid configuration");
    PosteriorChains out;
    out.names = target.names;
    out.draws.resize(cfg.chains);
    out.accept_rate.resize(cfg.chains, 0.0);
    out.divergences.resize(cfg.chains, 0);
    out.step_size.resize(cfg.chains, cfg.mh_scale);

    detail::run_parallel(cfg.chains, [&](int c) {
        auto gen = rng::engine_for(cfg.seed, static_cast<std::uint64_t>(c));
        std::normal_distribution<double> nd(0.0, 1.0);
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        std::vector<double> u = detail::chain_init(target, cfg, gen);
        double lp = target.logdensity(u);
        int n_report = static_cast<int>(target.to_constrained(u).size());
        Eigen::MatrixXd d(cfg.keep, n_report);
        long accepted = 0, total = 0;
        std::vector<double> prop(u.size());
        int stored = 0;
        long steps = static_cast<long>(cfg.warmup) + static_cast<long>(cfg.keep) * cfg.thin;
        for (long it = 0; it < steps; ++it) {
            for (std::size_t i = 0; i < u.size(); ++i) prop[i] = u[i] + cfg.mh_scale * nd(gen);
            double lp2 = target.logdensity(prop);
            ++total;
            if (std::log(ud(gen)) <= lp2 - lp) {
                u = prop;
                lp = lp2;
                ++accepted;
            }
            if (it >= cfg.warmup && (it - cfg.warmup + 1) % cfg.thin == 0) {
                auto x = target.to_constrained(u);
                for (int j = 0; j < n_report; ++j) d(stored, j) = x[j];
                ++stored;
            }
        }
        out.draws[c] = std::move(d);
        out.accept_rate[c] = double(accepted) / double(total);
    });
    return out;
}

// ---- NUTS -----------------------------------------------------------------

namespace detail {

struct Phase {
    std::vector<double> theta, r, grad;
    double lp = 0.0;
};

struct NutsCtx {
    const Target* target;
    std::vector<double> inv_mass;  // 1/m_i
    double eps = 1.0;
    double divergence_threshold = 1000.0;
    long divergences = 0;
    long grad_evals = 0;
};

inline double kinetic(const NutsCtx& ctx, const std::vector<double>& r) {
    double k = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) k += 0.5 * r[i] * r[i] * ctx.inv_mass[i];
    return k;
}

inline void leapfrog(NutsCtx& ctx, Phase& z, double dir) {
    const double e = dir * ctx.eps;
    for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] += 0.5 * e * z.grad[i];
    for (std::size_t i = 0; i < z.theta.size(); ++i)
        z.theta[i] += e * z.r[i] * ctx.inv_mass[i];
    z.lp = ctx.target->logdensity(z.theta);
    z.grad = ctx.target->grad(z.theta);
    ++ctx.grad_evals;
    for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] += 0.5 * e * z.grad[i];
}

// U-turn criterion across the subtree endpoints, in the metric induced by the
// mass matrix: stop when the span stops expanding along either edge momentum.
inline bool uturn(const NutsCtx& ctx, const Phase& minus, const Phase& plus) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < minus.theta.size(); ++i) {
        double dt = plus.theta[i] - minus.theta[i];
        a += dt * minus.r[i] * ctx.inv_mass[i];
        b += dt * plus.r[i] * ctx.inv_mass[i];
    }
    return a < 0.0 || b < 0.0;
}

struct Subtree {
    Phase minus, plus, sample;
    double log_w = -std::numeric_limits<double>::infinity();  // log sum of exp(-H + H0)
    bool bad = false;                                         // divergent or turning
    double sum_accept = 0.0;
    long n_leaves = 0;
};

inline double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// recursive doubling; multinomial weights exp(H0 - H) per leaf
inline Subtree build_tree(NutsCtx& ctx, const Phase& z, double dir, int depth, double h0,
                          std::mt19937_64& gen) {
    if (depth == 0) {
        Subtree t;
        Phase leaf = z;
        leapfrog(ctx, leaf, dir);
        double h = std::isfinite(leaf.lp) ? -leaf.lp + kinetic(ctx, leaf.r)
                                          : std::numeric_limits<double>::infinity();
        double dh = h - h0;
        if (!(dh < ctx.divergence_threshold)) {
            ++ctx.divergences;
            t.bad = true;
            t.minus = t.plus = t.sample = leaf;
            t.sum_accept = 0.0;
            t.n_leaves = 1;
            return t;
        }
        t.minus = t.plus = t.sample = leaf;
        t.log_w = -dh;
        t.sum_accept = std::min(1.0, std::exp(-dh));
        t.n_leaves = 1;
        return t;
    }
    Subtree first = build_tree(ctx, z, dir, depth - 1, h0, gen);
    if (first.bad) return first;
    Subtree second = build_tree(ctx, dir > 0 ? first.plus : first.minus, dir, depth - 1, h0, gen);
    Subtree t;
    t.minus = dir > 0 ? first.minus : second.minus;
    t.plus = dir > 0 ? second.plus : first.plus;
    t.sum_accept = first.sum_accept + second.sum_accept;
    t.n_leaves = first.n_leaves + second.n_leaves;
    if (second.bad) {
        t.bad = true;
        t.sample = first.sample;
        t.log_w = first.log_w;
        return t;
    }
    t.log_w = log_add(first.log_w, second.log_w);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    t.sample = (std::log(ud(gen)) <= second.log_w - t.log_w) ? second.sample : first.sample;
    t.bad = uturn(ctx, t.minus, t.plus);
    return t;
}

// one NUTS transition; returns the mean leaf acceptance statistic for dual
// averaging
inline double nuts_transition(NutsCtx& ctx, Phase& z, int max_depth, std::mt19937_64& gen) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] = nd(gen) / std::sqrt(ctx.inv_mass[i]);
    double h0 = -z.lp + kinetic(ctx, z.r);
    Phase minus = z, plus = z;
    Phase sample = z;
    double log_w = 0.0;  // the initial point has weight exp(0)
    double sum_accept = 0.0;
    long n_leaves = 0;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int depth = 0; depth < max_depth; ++depth) {
        double dir = ud(gen) < 0.5 ? -1.0 : 1.0;
        Subtree t = build_tree(ctx, dir > 0 ? plus : minus, dir, depth, h0, gen);
        sum_accept += t.sum_accept;
        n_leaves += t.n_leaves;
        if (t.bad) break;
        // biased progressive sampling favors the fresh subtree
        if (std::log(ud(gen)) <= t.log_w - log_w) sample = t.sample;
        log_w = log_add(log_w, t.log_w);
        if (dir > 0)
            plus = t.plus;
        else
            minus = t.minus;
        if (uturn(ctx, minus, plus)) break;
    }
    z = sample;
    return n_leaves > 0 ? sum_accept / double(n_leaves) : 0.0;
}

// cheap step-size heuristic: scale until one leapfrog step flips the
// acceptance probability across 0.5
inline double initial_step_size(NutsCtx& ctx, const Phase& z0, std::mt19937_64& gen) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Phase z = z0;
    for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] = nd(gen) / std::sqrt(ctx.inv_mass[i]);
    double h0 = -z.lp + kinetic(ctx, z.r);
    ctx.eps = 1.0;
    auto accept_log = [&]() {
        Phase trial = z;
        leapfrog(ctx, trial, 1.0);
        if (!std::isfinite(trial.lp)) return -std::numeric_limits<double>::infinity();
        return h0 - (-trial.lp + kinetic(ctx, trial.r));
    };
    double a0 = accept_log();
    double dir = a0 > std::log(0.5) ? 1.0 : -1.0;
    for (int it = 0; it < 50; ++it) {
        ctx.eps *= std::pow(2.0, dir);
        double a = accept_log();
        if (dir > 0 ? a <= std::log(0.5) : a > std::log(0.5)) break;
    }
    return ctx.eps;
}

struct DualAveraging {
    double mu = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
    double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    long m = 0;
    double target = 0.8;

    void reset(double eps0) {
        mu = std::log(10.0 * eps0);
        log_eps_bar = std::log(eps0);
        h_bar = 0.0;
        m = 0;
    }
    double update(double accept_stat) {
        ++m;
        h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (target - accept_stat) / (m + t0);
        double log_eps = mu - std::sqrt(double(m)) / gamma * h_bar;
        double w = std::pow(double(m), -kappa);
        log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
        return std::exp(log_eps);
    }
    double final_eps() const { return std::exp(log_eps_bar); }
};

}  // namespace detail

// Multinomial NUTS with dual-averaged step size and a diagonal mass matrix
// estimated during warmup (from the second half, excluding a final 10% slice
// that re-tunes the step size under the new metric).
inline PosteriorChains hmc_nuts(const Target& target, const SamplerConfig& cfg) {
    if (!target.grad) throw std::invalid_argument("hmc_nuts: target must provide a gradient");
    if (cfg.chains < 1 || cfg.keep < 1 || cfg.warmup < 0)
        throw std::invalid_argument("hmc_nuts: invalid configuration");
    PosteriorChains out;
    out.names = target.names;
    out.draws.resize(cfg.chains);
    out.accept_rate.resize(cfg.chains, 0.0);
    out.divergences.resize(cfg.chains, 0);
    out.step_size.resize(cfg.chains, 0.0);

    detail::run_parallel(cfg.chains, [&](int c) {
        auto gen = rng::engine_for(cfg.seed, static_cast<std::uint64_t>(c));
        detail::NutsCtx ctx;
        ctx.target = &target;
        ctx.inv_mass.assign(target.dim, 1.0);
        ctx.divergence_threshold = cfg.divergence_threshold;

        detail::Phase z;
        z.theta = detail::chain_init(target, cfg, gen);
        z.r.assign(target.dim, 0.0);
        z.lp = target.logdensity(z.theta);
        z.grad = target.grad(z.theta);

        detail::DualAveraging da;
        da.target = cfg.target_accept;
        da.reset(cfg.step_size ? *cfg.step_size : detail::initial_step_size(ctx, z, gen));
        ctx.eps = std::exp(da.mu) / 10.0;

        const int mass_begin = cfg.warmup / 2;
        const int mass_end = cfg.warmup - std::max(1, cfg.warmup / 10);
        std::vector<double> mean(target.dim, 0.0), m2(target.dim, 0.0);
        long n_acc = 0;

        for (int it = 0; it < cfg.warmup; ++it) {
            double a = detail::nuts_transition(ctx, z, cfg.max_tree_depth, gen);
            ctx.eps = da.update(a);
            if (it >= mass_begin && it < mass_end) {
                ++n_acc;
                for (int i = 0; i < target.dim; ++i) {
                    double d = z.theta[i] - mean[i];
                    mean[i] += d / double(n_acc);
                    m2[i] += d * (z.theta[i] - mean[i]);
                }
            }
            if (it + 1 == mass_end && n_acc >= 10) {
                for (int i = 0; i < target.dim; ++i) {
                    double var = m2[i] / double(n_acc - 1);
                    // regularize toward unity as Stan does for short windows
                    double w = double(n_acc) / (n_acc + 5.0);
                    ctx.inv_mass[i] = std::max(w * var + (1.0 - w) * 1e-3, 1e-10);
                }
                da.reset(detail::initial_step_size(ctx, z, gen));
                ctx.eps = std::exp(da.mu) / 10.0;
            }
        }
        ctx.eps = cfg.warmup > 0 ? da.final_eps() : ctx.eps;
        ctx.divergences = 0;  // report post-warmup divergences only

        int n_report = static_cast<int>(target.to_constrained(z.theta).size());
        Eigen::MatrixXd d(cfg.keep, n_report);
        double accept_sum = 0.0;
        for (int it = 0; it < cfg.keep; ++it) {
            accept_sum += detail::nuts_transition(ctx, z, cfg.max_tree_depth, gen);
            auto x = target.to_constrained(z.theta);
            for (int j = 0; j < n_report; ++j) d(it, j) = x[j];
        }
        out.draws[c] = std::move(d);
        out.accept_rate[c] = accept_sum / double(cfg.keep);
        out.divergences[c] = ctx.divergences;
        out.step_size[c] = ctx.eps;
    });
    return out;
}

// ---- diagnostics ----------------------------------------------------------

namespace detail {

// inverse standard-normal CDF (Acklam's rational approximation, ~1e-9)
inline double inv_normal_cdf(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    if (p > phigh) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// split each chain in half; sequences as columns of a matrix
inline Eigen::MatrixXd split_chains(const PosteriorChains& ch, int param) {
    int n = ch.n_draws() / 2;
    int c2 = 2 * ch.n_chains();
    Eigen::MatrixXd s(n, c2);
    for (int c = 0; c < ch.n_chains(); ++c)
        for (int i = 0; i < n; ++i) {
            s(i, 2 * c) = ch.draws[c](i, param);
            s(i, 2 * c + 1) = ch.draws[c](ch.n_draws() - n + i, param);
        }
    return s;
}

// rank-normalize across all sequences jointly (average ranks for ties)
inline Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& s) {
    const long total = s.size();
    std::vector<std::pair<double, long>> v(total);
    for (long i = 0; i < total; ++i) v[i] = {s(i % s.rows(), i / s.rows()), i};
    std::sort(v.begin(), v.end());
    std::vector<double> rank(total);
    long i = 0;
    while (i < total) {
        long j = i;
        while (j + 1 < total && v[j + 1].first == v[i].first) ++j;
        double avg = 0.5 * (i + j) + 1.0;  // average 1-based rank
        for (long k = i; k <= j; ++k) rank[v[k].second] = avg;
        i = j + 1;
    }
    Eigen::MatrixXd z(s.rows(), s.cols());
    for (long k = 0; k < total; ++k)
        z(k % s.rows(), k / s.rows()) =
            inv_normal_cdf((rank[k] - 0.375) / (double(total) + 0.25));
    return z;
}

inline double rhat_of(const Eigen::MatrixXd& s) {
    const int n = static_cast<int>(s.rows()), m = static_cast<int>(s.cols());
    if (n < 2 || m < 2) return std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd means = s.colwise().mean();
    double grand = means.mean();
    double b = 0.0, w = 0.0;
    for (int c = 0; c < m; ++c) {
        b += (means[c] - grand) * (means[c] - grand);
        w += (s.col(c).array() - means[c]).square().sum() / double(n - 1);
    }
    b *= double(n) / double(m - 1);
    w /= double(m);
    if (w <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    double var_plus = double(n - 1) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

inline double ess_of(const Eigen::MatrixXd& s) {
    const int n = static_cast<int>(s.rows()), m = static_cast<int>(s.cols());
    if (n < 4) return std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd means = s.colwise().mean();
    Eigen::VectorXd vars(m);
    for (int c = 0; c < m; ++c)
        vars[c] = (s.col(c).array() - means[c]).square().sum() / double(n - 1);
    double w = vars.mean();
    double grand = means.mean();
    double b = 0.0;
    for (int c = 0; c < m; ++c) b += (means[c] - grand) * (means[c] - grand);
    b *= m > 1 ? double(n) / double(m - 1) : 0.0;
    double var_plus = double(n - 1) / n * w + (m > 1 ? b / n : 0.0);
    if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

    // mean autocovariance across chains at each lag
    auto acov = [&](int t) {
        double acc = 0.0;
        for (int c = 0; c < m; ++c) {
            double sum = 0.0;
            for (int i = 0; i < n - t; ++i)
                sum += (s(i, c) - means[c]) * (s(i + t, c) - means[c]);
            acc += sum / double(n);
        }
        return acc / double(m);
    };

    // Geyer initial monotone positive sequence over paired lags
    double tau = 1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (int t = 1; t + 1 < n; t += 2) {
        double rho_a = 1.0 - (w - acov(t)) / var_plus;
        double rho_b = 1.0 - (w - acov(t + 1)) / var_plus;
        double pair = rho_a + rho_b;
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair);  // enforce monotonicity
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    return double(n) * double(m) / tau;
}

}  // namespace detail

struct Diagnostics {
    std::vector<double> r_hat;  // NaN when single-chain
    std::vector<double> ess;
    long divergences = 0;
    bool r_hat_available = true;
    std::vector<std::string> notes;
};

inline Diagnostics diagnostics(const PosteriorChains& ch) {
    Diagnostics d;
    d.divergences = ch.total_divergences();
    d.r_hat_available = ch.n_chains() >= 2;
    if (!d.r_hat_available) d.notes.push_back("single chain: split R-hat omitted");
    long total_draws = static_cast<long>(ch.n_chains()) * ch.n_draws();
    if (total_draws > 0 && d.divergences * 5 > total_draws)
        d.notes.push_back("more than 20% of post-warmup transitions diverged; "
                          "posterior geometry is likely pathological");
    for (int p = 0; p < ch.n_params(); ++p) {
        Eigen::MatrixXd s = detail::split_chains(ch, p);
        bool constant = true;
        for (long i = 1; i < s.size() && constant; ++i)
            constant = s(i % s.rows(), i / s.rows()) == s(0, 0);
        if (constant) {
            d.r_hat.push_back(std::numeric_limits<double>::quiet_NaN());
            d.ess.push_back(0.0);
            if (std::find(d.notes.begin(), d.notes.end(),
                          "constant chain detected: ESS degenerate") == d.notes.end())
                d.notes.push_back("constant chain detected: ESS degenerate");
            continue;
        }
        Eigen::MatrixXd z = detail::rank_normalize(s);
        d.r_hat.push_back(d.r_hat_available ? detail::rhat_of(z)
                                            : std::numeric_limits<double>::quiet_NaN());
        d.ess.push_back(detail::ess_of(z));
    }
    return d;
}

// ---- summaries ------------------------------------------------------------

struct SummaryRow {
    std::string name;
    double mean = 0.0, sd = 0.0;
    // per requested alpha: central (1-alpha) interval and the one-sided lower
    // credibility bound p_alpha, the (1-alpha) empirical quantile: with
    // probability alpha the parameter exceeds p_alpha
    std::vector<double> central_lo, central_hi, one_sided;
};

inline double empirical_quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
    std::sort(v.begin(), v.end());
    double pos = q * (v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    double frac = pos - lo;
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

inline std::vector<SummaryRow> summarize(const PosteriorChains& ch,
                                         const std::vector<double>& alpha_levels = {0.05}) {
    std::vector<SummaryRow> rows;
    for (int p = 0; p < ch.n_params(); ++p) {
        auto v = ch.flat(p);
        SummaryRow row;
        row.name = p < static_cast<int>(ch.names.size()) ? ch.names[p]
                                                         : "param" + std::to_string(p);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= v.size();
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
        row.mean = mean;
        row.sd = std::sqrt(var);
        for (double a : alpha_levels) {
            row.central_lo.push_back(empirical_quantile(v, a / 2.0));
            row.central_hi.push_back(empirical_quantile(v, 1.0 - a / 2.0));
            row.one_sided.push_back(empirical_quantile(v, 1.0 - a));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace rbayes::sampler
