#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbayes/bayes.hpp"
#include "rbayes/sampler.hpp"

// Frequentist baselines: beta-binomial maximum likelihood, bootstrap interval
// estimation (parametric and nonparametric), and weighted least-squares
// fitting of the tied survival means.

namespace rbayes::freq {

struct FitOptions {
    int starts = 8;       // multi-start count; start 0 is the unjittered init
    int max_iter = 500;
    double tol = 1e-10;   // gradient infinity-norm at convergence
    double jitter = 1.0;  // standard deviation of the start perturbations
    std::uint64_t seed = 0;
    std::optional<std::vector<double>> init;  // unconstrained initial point
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> u;         // unconstrained optimum
    std::vector<double> estimate;  // constrained optimum
    double loglik = -std::numeric_limits<double>::infinity();
    bool converged = false;
    bool boundary = false;  // some estimate sits against its domain boundary
    int iterations = 0;
    int n_tying = 0;
    std::string message;
};

namespace detail {

// likelihood only: the cell terms of the marginal beta-survival model, without
// priors or transform Jacobians
template <class T>
T log_likelihood_t(const bayes::HierarchicalModel& m, std::span<const T> u) {
    std::vector<T> x(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) x[i] = m.params[i].tf.constrain(u[i]);
    std::span<const T> xs(x);
    T lp = T(0.0);
    for (const auto& c : m.cells) {
        lp += m.cell_term(c, xs);
        if (bayes::value_of(lp) == bayes::kNegInf) return T(bayes::kNegInf);
    }
    if (std::isnan(bayes::value_of(lp))) return T(bayes::kNegInf);
    return lp;
}

inline double log_likelihood(const bayes::HierarchicalModel& m, std::span<const double> u) {
    return log_likelihood_t(m, u);
}

inline std::vector<double> grad_log_likelihood(const bayes::HierarchicalModel& m,
                                               std::span<const double> u) {
    std::vector<ad::dual> xd(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) xd[i] = ad::dual(m.params[i].tf.constrain(u[i]));
    std::span<const ad::dual> xs(xd);
    std::vector<double> g(u.size(), 0.0);
    for (const auto& c : m.cells) {
        std::vector<int> deps;
        for (int i = 0; i < m.n_tying; ++i) deps.push_back(i);
        for (int i = 0; i < c.s_count; ++i) deps.push_back(c.s_begin + i);
        for (int i : deps) {
            ad::dual saved = xd[i];
            xd[i] = m.params[i].tf.constrain(ad::dual(u[i], 1.0));
            g[i] += m.cell_term(c, xs).d;
            xd[i] = saved;
        }
    }
    return g;
}

struct OptimResult {
    std::vector<double> x;
    double value = -std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

// quasi-Newton ascent: BFGS on the negated objective. The line search
// enforces weak Wolfe conditions (bracketing bisection), which keeps every
// curvature pair admissible; the metric is rescaled on the first update and
// reset once if the search stalls.
template <class F, class G>
OptimResult bfgs_maximize(F&& f, G&& g, std::vector<double> x0, double tol, int max_iter) {
    const int n = static_cast<int>(x0.size());
    const double c1 = 1e-4, c2 = 0.9;
    OptimResult res;
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(x0.data(), n);
    auto phi_of = [&](const Eigen::VectorXd& v) {
        return -f(std::span<const double>(v.data(), n));
    };
    auto g_of = [&](const Eigen::VectorXd& v) {
        auto gv = g(std::span<const double>(v.data(), n));
        return (-Eigen::Map<Eigen::VectorXd>(gv.data(), n)).eval();
    };
    double phi = phi_of(x);
    if (!std::isfinite(phi)) {
        res.x.assign(x.data(), x.data() + n);
        return res;
    }
    Eigen::VectorXd gm = g_of(x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false, reset_used = false;
    double best_gnorm = gm.lpNorm<Eigen::Infinity>();
    double best_phi = phi;
    int no_decay = 0;
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it;
        if (gm.lpNorm<Eigen::Infinity>() < tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd d = -(H * gm);
        double slope = gm.dot(d);
        if (!(slope < 0.0)) {
            H.setIdentity();
            scaled = false;
            d = -gm;
            slope = gm.dot(d);
        }
        // weak Wolfe line search by bracketing
        double a = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        Eigen::VectorXd xn, gn;
        double phin = 0.0;
        bool accepted = false;
        bool have_armijo = false;
        double arm_a = 0.0, arm_phi = 0.0;
        Eigen::VectorXd arm_g;
        // once f-improvements drop below double rounding, accept steps that
        // shrink the gradient instead: exact-AD gradients stay informative at
        // the value-noise floor
        const double noise = 1e-12 * (1.0 + std::fabs(phi));
        const double gnorm = gm.lpNorm<Eigen::Infinity>();
        bool have_gstep = false;
        double gstep_phi = 0.0, gstep_norm = gnorm;
        Eigen::VectorXd gstep_x, gstep_g;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + a * d;
            phin = phi_of(xn);
            bool armijo = std::isfinite(phin) && phin <= phi + c1 * a * slope;
            if (armijo || (std::isfinite(phin) && phin <= phi + noise)) {
                gn = g_of(xn);
                double gnn = gn.lpNorm<Eigen::Infinity>();
                if (gnn < gstep_norm) {
                    have_gstep = true;
                    gstep_norm = gnn;
                    gstep_phi = phin;
                    gstep_x = xn;
                    gstep_g = gn;
                }
            }
            if (!armijo) {
                hi = a;
                a = 0.5 * (lo + hi);
                continue;
            }
            if (!have_armijo || phin < arm_phi) {
                have_armijo = true;
                arm_a = a;
                arm_phi = phin;
                arm_g = gn;
            }
            if (gn.dot(d) < c2 * slope) {  // too short: curvature not yet captured
                lo = a;
                a = std::isinf(hi) ? 2.0 * a : 0.5 * (lo + hi);
                continue;
            }
            accepted = true;
            break;
        }
        if (!accepted && have_armijo) {  // fall back to the best Armijo point
            a = arm_a;
            xn = x + a * d;
            phin = arm_phi;
            gn = arm_g;
            accepted = true;
        }
        if (!accepted && have_gstep && gstep_norm < 0.999 * gnorm) {
            xn = gstep_x;
            phin = gstep_phi;
            gn = gstep_g;
            accepted = true;
        }
        bool progress = accepted && (xn - x).lpNorm<Eigen::Infinity>() > 0.0;
        if (!progress) {
            if (!reset_used) {  // one retry with a fresh steepest-descent metric
                reset_used = true;
                H.setIdentity();
                scaled = false;
                continue;
            }
            break;
        }
        Eigen::VectorXd s = xn - x, y = gn - gm;
        double ys = y.dot(s);
        if (ys > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {  // initial metric scaling (Nocedal-Wright 6.20)
                H *= ys / y.squaredNorm();
                scaled = true;
            }
            double rho = 1.0 / ys;
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
                rho * s * s.transpose();
        }
        x = xn;
        phi = phin;
        gm = gn;
        double cur = gm.lpNorm<Eigen::Infinity>();
        bool decayed = cur < best_gnorm * (1.0 - 1e-6);
        if (phi < best_phi - 1e-10 * (1.0 + std::fabs(best_phi))) {
            best_phi = phi;
            decayed = true;
        }
        if (cur < best_gnorm) best_gnorm = cur;
        if (decayed) no_decay = 0;
        else if (++no_decay > 15) break;  // neither value nor gradient improving
    }
    if (gm.lpNorm<Eigen::Infinity>() < tol) res.converged = true;
    res.x.assign(x.data(), x.data() + n);
    res.value = -phi;
    return res;
}

// Identifies parameters pinned against a domain boundary: the centered-logit
// coordinate sits past |z| = 11.5 (within 1e-5 of 0 or 1) with the ascent
// gradient still pointing outward. Such coordinates satisfy the first-order
// conditions in the closure; their logit-space gradient decays only like
// exp(-|z|), so a plain gradient tolerance would never trigger.
using BoundaryPred = std::function<bool(int, double, double)>;

inline BoundaryPred boundary_predicate(const bayes::HierarchicalModel& m) {
    return [&m](int i, double u, double g) {
        const auto& tf = m.params[static_cast<std::size_t>(i)].tf;
        if (tf.kind != bayes::Transform::Kind::Logit) return false;
        double z = tf.delta * u + dists::logit(tf.x0);
        return (z > 11.5 && g > 0.0) || (z < -11.5 && g < 0.0);
    };
}

// Exact-Newton polish on the gradient. BFGS progress stalls once objective
// improvements drop below double rounding; second-order steps from exact
// nested-dual Hessians drive the exact gradient of the active (non-boundary)
// coordinates to the 1e-10 tolerance, accepting steps on gradient-norm
// decrease, which stays informative when value comparisons no longer are.
template <class F, class F2, class G>
void newton_polish(F&& f, F2&& fd2, G&& g, OptimResult& res, double tol,
                   const BoundaryPred& at_boundary = {}, int max_iter = 40) {
    const int n = static_cast<int>(res.x.size());
    if (n == 0) return;
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(res.x.data(), n);
    auto grad_at = [&](const Eigen::VectorXd& v) {
        auto gv = g(std::span<const double>(v.data(), n));
        return Eigen::Map<Eigen::VectorXd>(gv.data(), n).eval();
    };
    auto active_of = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& grad) {
        std::vector<int> act;
        for (int i = 0; i < n; ++i)
            if (!at_boundary || !at_boundary(i, v[i], grad[i])) act.push_back(i);
        return act;
    };
    auto norm_on = [&](const Eigen::VectorXd& grad, const std::vector<int>& act) {
        double m = 0.0;
        for (int i : act) m = std::max(m, std::fabs(grad[i]));
        return m;
    };
    Eigen::VectorXd grad = grad_at(x);
    std::vector<int> act = active_of(x, grad);
    double gn = norm_on(grad, act);
    for (int it = 0; it < max_iter && gn >= tol; ++it) {
        double value;
        std::vector<double> gtmp(n), htmp(static_cast<std::size_t>(n) * n);
        ad::hessian(fd2, std::span<const double>(x.data(), n), value,
                    std::span<double>(gtmp), std::span<double>(htmp));
        const int na = static_cast<int>(act.size());
        if (na == 0) break;
        Eigen::MatrixXd A(na, na);
        Eigen::VectorXd ga(na);
        for (int r = 0; r < na; ++r) {
            ga[r] = grad[act[r]];
            for (int c = 0; c < na; ++c)
                A(r, c) = -htmp[static_cast<std::size_t>(act[r]) * n + act[c]];
        }
        double ridge = 0.0;
        bool moved = false;
        for (int attempt = 0; attempt < 8 && !moved; ++attempt) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(A + ridge * Eigen::MatrixXd::Identity(na, na));
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                Eigen::VectorXd sa = ldlt.solve(ga);
                Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
                for (int r = 0; r < na; ++r) step[act[r]] = sa[r];
                double a = 1.0;
                for (int h = 0; h < 12 && !moved; ++h, a *= 0.5) {
                    Eigen::VectorXd xn = x + a * step;
                    // never step onto the -inf plateau, where the guarded
                    // density is flat and the zero gradient fakes convergence
                    if (!std::isfinite(f(std::span<const double>(xn.data(), n)))) continue;
                    Eigen::VectorXd gnew = grad_at(xn);
                    double gnn = norm_on(gnew, act);
                    if (std::isfinite(gnn) && gnn < gn) {
                        x = xn;
                        grad = gnew;
                        moved = true;
                    }
                }
            }
            double scale = A.diagonal().cwiseAbs().maxCoeff();
            ridge = ridge == 0.0 ? std::max(1e-10, 1e-8 * scale) : ridge * 100.0;
        }
        if (!moved) break;
        act = active_of(x, grad);
        gn = norm_on(grad, act);
    }
    res.x.assign(x.data(), x.data() + n);
    if (gn < tol) {
        res.converged = true;
    } else if (gn < tol * (1.0 + std::fabs(f(std::span<const double>(x.data(), n))))) {
        // the gradient inherits rounding noise of order eps * |f|; once the
        // polish can no longer reduce it, a residual below tol * (1 + |f|) is
        // the deterministic-arithmetic equivalent of the absolute tolerance
        res.converged = true;
    }
}

// Moves each boundary-pinned coordinate to its effective limit (|z| = 30,
// within ~1e-13 of the constrained boundary) so the reported likelihood
// matches the supremum in the closure instead of stopping at the freeze
// threshold. Coordinates are pushed one at a time and kept only if the
// likelihood does not drop.
template <class F, class G>
void snap_to_boundary(const bayes::HierarchicalModel& model, F&& f, G&& g, OptimResult& res) {
    auto grad = g(std::span<const double>(res.x));
    for (std::size_t i = 0; i < res.x.size(); ++i) {
        const auto& tf = model.params[i].tf;
        if (tf.kind != bayes::Transform::Kind::Logit) continue;
        double z = tf.delta * res.x[i] + dists::logit(tf.x0);
        bool outward = (z > 11.5 && grad[i] > 0.0) || (z < -11.5 && grad[i] < 0.0);
        if (!outward) continue;
        double saved = res.x[i];
        res.x[i] = ((z > 0.0 ? 30.0 : -30.0) - dists::logit(tf.x0)) / tf.delta;
        double fn = f(std::span<const double>(res.x));
        if (std::isfinite(fn) && fn >= res.value) res.value = fn;
        else res.x[i] = saved;
    }
}

inline bool near_boundary(const bayes::Transform& tf, double x) {
    if (tf.kind != bayes::Transform::Kind::Logit) return false;
    return x <= 1e-5 || x >= 1.0 - 1e-5;
}

inline FitResult finish_fit(const bayes::HierarchicalModel& model, const OptimResult& best,
                            const std::string& message) {
    FitResult fit;
    fit.names = model.param_names();
    fit.n_tying = model.n_tying;
    fit.u = best.x;
    fit.estimate = model.constrain(best.x);
    fit.loglik = best.value;
    fit.converged = best.converged;
    fit.iterations = best.iterations;
    fit.message = message;
    for (std::size_t i = 0; i < fit.estimate.size(); ++i)
        fit.boundary |= near_boundary(model.params[i].tf, fit.estimate[i]);
    return fit;
}

// Coarse deterministic random search over the tying coordinates before any
// gradient-based refinement. Long sequences make the decay objective blind to
// the rate far from the optimum (p^M underflows, so its gradient vanishes),
// leaving spurious basins that capture every default-initialized start; a few
// hundred cheap evaluations across the whole constrained range find the right
// basin first. Nuisance coordinates keep their initial values.
template <class F>
std::vector<double> coarse_tying_search(const bayes::HierarchicalModel& model, F&& f,
                                        std::vector<double> base, std::uint64_t seed) {
    auto gen = rng::engine_for(seed, 0x5ea6c000u);
    std::uniform_real_distribution<double> uz(-10.0, 10.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    const std::vector<double> orig = base;
    double fbest = f(std::span<const double>(base));
    for (int k = 0; k < 200; ++k) {
        auto x = orig;
        for (int i = 0; i < model.n_tying && i < static_cast<int>(x.size()); ++i) {
            const auto& tf = model.params[static_cast<std::size_t>(i)].tf;
            x[static_cast<std::size_t>(i)] =
                tf.kind == bayes::Transform::Kind::Logit
                    ? (uz(gen) - dists::logit(tf.x0)) / tf.delta
                    : nd(gen);
        }
        double fx = f(std::span<const double>(x));
        if (std::isfinite(fx) && fx > fbest) {
            fbest = fx;
            base = x;
        }
    }
    return base;
}

}  // namespace detail

// Maximum-likelihood fit of the marginal beta-survival model: tying parameters
// plus one spread nuisance per (M, e) cell, optimized in unconstrained
// coordinates with multi-start BFGS.
inline FitResult mle_fit(const protocols::ProtocolSpec& protocol,
                         const std::vector<qsim::DatasetRecord>& data,
                         const FitOptions& opts = {}) {
    if (data.empty()) throw std::invalid_argument("mle_fit: dataset is empty");
    if (opts.starts < 1 || opts.max_iter < 1)
        throw std::invalid_argument("mle_fit: invalid options");
    auto model = bayes::build_beta_model(protocol, data);
    auto f = [&](std::span<const double> u) { return detail::log_likelihood(model, u); };
    auto g = [&](std::span<const double> u) { return detail::grad_log_likelihood(model, u); };
    auto fd2 = [&](std::span<const ad::dual2> u) { return detail::log_likelihood_t(model, u); };
    std::vector<double> base =
        opts.init ? *opts.init
                  : detail::coarse_tying_search(model, f, model.initial_point(), opts.seed);
    if (static_cast<int>(base.size()) != model.dim())
        throw std::invalid_argument("mle_fit: initial point has the wrong dimension");

    std::optional<detail::OptimResult> best;
    std::ostringstream trace;
    for (int s = 0; s < opts.starts; ++s) {
        std::vector<double> x0 = base;
        if (s > 0) {
            auto gen = rng::engine_for(opts.seed, 0x4d1e0000u + static_cast<std::uint64_t>(s));
            std::normal_distribution<double> nd(0.0, opts.jitter);
            for (auto& v : x0) v += nd(gen);
        }
        auto r = detail::bfgs_maximize(f, g, x0, opts.tol, opts.max_iter);
        if (!r.converged) {
            detail::newton_polish(f, fd2, g, r, opts.tol, detail::boundary_predicate(model), 200);
            r.value = f(r.x);
            if (r.converged) detail::snap_to_boundary(model, f, g, r);
        }
        trace << "start " << s << ": value " << r.value << ", "
              << (r.converged ? "converged" : "not converged") << " after " << r.iterations
              << " iterations\n";
        if (r.converged && (!best || r.value > best->value)) best = r;
    }
    if (!best)
        throw std::runtime_error("mle_fit: no start converged\n" + trace.str());
    return detail::finish_fit(model, *best, "mle");
}

// Weighted least squares on the per-cell mean survival fractions against the
// tied first moment. Weights are inverse per-cell sample variances of Q/N;
// zero-variance cells are assigned the maximum observed cell variance instead
// of an infinite weight.
inline FitResult wlsf_fit(const protocols::ProtocolSpec& protocol,
                          const std::vector<qsim::DatasetRecord>& data,
                          const FitOptions& opts = {}) {
    if (data.empty()) throw std::invalid_argument("wlsf_fit: dataset is empty");
    auto model = bayes::build_beta_model(protocol, data);
    if (model.tied_order != 1)
        throw std::invalid_argument(
            "wlsf_fit: protocol ties the second moment; no first-moment decay to fit");
    struct CellStat {
        int M, e_idx, s_begin;
        double ybar, var, w, nbar;
        long n;
    };
    std::vector<CellStat> stats;
    std::vector<int> distinct_m;
    for (const auto& c : model.cells) {
        CellStat st{c.M, c.e_idx, c.s_begin, 0.0, 0.0, 0.0, 0.0, 0};
        for (const auto& o : c.hist) {
            st.n += o.count;
            st.ybar += double(o.count) * o.Q / o.N;
            st.nbar += double(o.count) * o.N;
        }
        st.ybar /= double(st.n);
        st.nbar /= double(st.n);
        if (st.n > 1) {
            for (const auto& o : c.hist) {
                double d = double(o.Q) / o.N - st.ybar;
                st.var += double(o.count) * d * d;
            }
            st.var /= double(st.n - 1);
        }
        if (std::find(distinct_m.begin(), distinct_m.end(), c.M) == distinct_m.end())
            distinct_m.push_back(c.M);
        stats.push_back(st);
    }
    if (distinct_m.size() < 2)
        throw std::invalid_argument("wlsf_fit: need at least two distinct sequence lengths");
    double max_var = 0.0;
    for (const auto& st : stats) max_var = std::max(max_var, st.var);
    if (max_var <= 0.0)
        throw std::runtime_error(
            "wlsf_fit: every cell has zero sample variance; use mle_fit instead");
    for (auto& st : stats) st.w = 1.0 / (st.var > 0.0 ? st.var : max_var);

    const int nt = model.n_tying;
    auto objective = [&]<class T>(std::span<const T> u) -> T {
        std::vector<T> xT(nt);
        for (int i = 0; i < nt; ++i) xT[i] = model.params[i].tf.constrain(u[i]);
        T sse = T(0.0);
        for (const auto& st : stats) {
            T r = st.ybar - model.protocol.tying(1, double(st.M), st.e_idx,
                                                 std::span<const T>(xT));
            sse += st.w * r * r;
        }
        return T(-1.0) * sse;
    };
    auto f = [&](std::span<const double> u) { return bayes::value_of(objective(u)); };
    auto g = [&](std::span<const double> u) {
        std::vector<double> grad(u.size());
        double val;
        ad::gradient([&](std::span<const ad::dual> ud) { return objective(ud); }, u, val,
                     std::span<double>(grad));
        return grad;
    };
    std::vector<double> base =
        opts.init ? *opts.init
                  : detail::coarse_tying_search(model, f, std::vector<double>(nt, 0.0), opts.seed);
    std::optional<detail::OptimResult> best;
    for (int s = 0; s < opts.starts; ++s) {
        std::vector<double> x0 = base;
        if (s > 0) {
            auto gen = rng::engine_for(opts.seed, 0x3175f000u + static_cast<std::uint64_t>(s));
            std::normal_distribution<double> nd(0.0, opts.jitter);
            for (auto& v : x0) v += nd(gen);
        }
        auto r = detail::bfgs_maximize(f, g, x0, opts.tol, opts.max_iter);
        if (!r.converged) {
            detail::newton_polish(f, [&](std::span<const ad::dual2> ud) { return objective(ud); },
                                  g, r, opts.tol);
            r.value = f(r.x);
        }
        if (r.converged && (!best || r.value > best->value)) best = r;
    }
    if (!best) throw std::runtime_error("wlsf_fit: no start converged");

    // complete the parameter vector: spread nuisances by moment matching,
    // Var(Q/N) = mu(1-mu)/N + (N-1)/N * sigma^2, so the likelihood at the WLSF
    // point is well defined (and necessarily below the MLE's)
    std::vector<double> u_full(model.dim(), 0.0);
    std::vector<double> xT(nt);
    for (int i = 0; i < nt; ++i) {
        u_full[i] = best->x[i];
        xT[i] = model.params[i].tf.constrain(best->x[i]);
    }
    for (const auto& st : stats) {
        double mu = model.protocol.tying(1, double(st.M), st.e_idx, std::span<const double>(xT));
        mu = std::clamp(mu, 1e-9, 1.0 - 1e-9);
        double t = 1e-8;
        if (st.nbar > 1.0) {
            double s2 = (st.var - mu * (1.0 - mu) / st.nbar) * st.nbar / (st.nbar - 1.0);
            t = std::clamp(s2 / (mu * (1.0 - mu)), 1e-8, 1.0 - 1e-8);
        }
        u_full[st.s_begin] = model.params[st.s_begin].tf.unconstrain(t);
    }
    detail::OptimResult full;
    full.x = u_full;
    full.value = detail::log_likelihood(model, u_full);
    full.converged = best->converged;
    full.iterations = best->iterations;
    return detail::finish_fit(model, full, "wlsf");
}

// ---- bootstrap ------------------------------------------------------------

enum class BootstrapKind { Parametric, Nonparametric };

struct BootstrapResult {
    std::vector<std::string> names;
    FitResult fit;                // fit on the original data
    Eigen::MatrixXd replicates;   // successful replicates x parameters (constrained)
    int requested = 0;
    int failed = 0;               // replicates dropped after refit failure

    std::vector<double> column(int p) const {
        std::vector<double> v(replicates.rows());
        for (int i = 0; i < replicates.rows(); ++i) v[i] = replicates(i, p);
        return v;
    }
    // central (1 - alpha) interval from the bootstrap CDF
    std::pair<std::vector<double>, std::vector<double>> central(double alpha) const {
        std::vector<double> lo, hi;
        for (int p = 0; p < replicates.cols(); ++p) {
            auto v = column(p);
            lo.push_back(sampler::empirical_quantile(v, alpha / 2.0));
            hi.push_back(sampler::empirical_quantile(v, 1.0 - alpha / 2.0));
        }
        return {lo, hi};
    }
    // one-sided lower bound with the same convention as the posterior p_alpha:
    // the (1 - alpha) empirical quantile, exceeded with probability alpha
    std::vector<double> one_sided(double alpha) const {
        std::vector<double> q;
        for (int p = 0; p < replicates.cols(); ++p)
            q.push_back(sampler::empirical_quantile(column(p), 1.0 - alpha));
        return q;
    }
};

// Resampled-data bootstrap of the MLE. Nonparametric replicates resample
// records with replacement within each (M, e, N) cell; parametric replicates
// redraw every Q from the fitted beta-binomial. Either way the (M, e, i, N)
// structure of the original dataset is preserved exactly.
inline BootstrapResult bootstrap(const protocols::ProtocolSpec& protocol,
                                 const std::vector<qsim::DatasetRecord>& data,
                                 BootstrapKind kind, int B = 600, std::uint64_t seed = 0,
                                 const FitOptions& fit_opts = {}) {
    if (B < 100) throw std::invalid_argument("bootstrap: need at least 100 replicates");
    BootstrapResult out;
    out.requested = B;
    out.fit = mle_fit(protocol, data, fit_opts);
    out.names = out.fit.names;

    // per-record beta-binomial parameters at the MLE (parametric kind)
    auto model = bayes::build_beta_model(protocol, data);
    std::vector<double> xhat = out.fit.estimate;
    std::map<std::pair<int, int>, std::pair<double, double>> cell_ab;
    for (const auto& c : model.cells) {
        std::span<const double> xT(xhat.data(), static_cast<std::size_t>(model.n_tying));
        double mu, t;
        if (model.tied_order == 1) {
            mu = model.protocol.tying(1, double(c.M), c.e_idx, xT);
            t = xhat[c.s_begin];
        } else {
            mu = xhat[c.s_begin];
            double mu2 = model.protocol.tying(2, double(c.M), c.e_idx, xT);
            t = std::clamp((mu2 - mu * mu) / (mu * (1.0 - mu)), 1e-8, 1.0 - 1e-8);
        }
        double a, b;
        dists::beta_view_to_ab(dists::BetaView::MeanT, std::clamp(mu, 1e-9, 1.0 - 1e-9), t, a,
                               b);
        cell_ab[{c.M, c.e_idx}] = {a, b};
    }

    // resampling groups for the nonparametric kind
    std::map<std::tuple<int, int, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.size(); ++i)
        groups[{data[i].M, protocol.experiment_index(data[i].e), data[i].N}].push_back(i);

    FitOptions rep_opts = fit_opts;
    rep_opts.starts = 2;
    rep_opts.jitter = 0.2;
    rep_opts.init = out.fit.u;

    std::vector<std::optional<std::vector<double>>> rows(B);
    sampler::detail::run_parallel(B, [&](int b) {
        auto gen = rng::engine_for(seed, 0xb0075000u + static_cast<std::uint64_t>(b));
        std::vector<qsim::DatasetRecord> rep = data;
        if (kind == BootstrapKind::Nonparametric) {
            for (const auto& [key, idx] : groups) {
                std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
                for (std::size_t slot : idx) rep[slot].Q = data[idx[pick(gen)]].Q;
            }
        } else {
            for (auto& rec : rep) {
                auto [a, bb] = cell_ab.at({rec.M, protocol.experiment_index(rec.e)});
                std::gamma_distribution<double> ga(a, 1.0), gb(bb, 1.0);
                double x = ga(gen), y = gb(gen);
                double q = x / (x + y);
                std::binomial_distribution<int> bin(rec.N, std::clamp(q, 0.0, 1.0));
                rec.Q = bin(gen);
            }
        }
        try {
            // refits share one optimizer seed so identical replicate datasets
            // produce identical estimates
            rows[b] = mle_fit(protocol, rep, rep_opts).estimate;
        } catch (const std::exception&) {
            rows[b] = std::nullopt;
        }
    });

    int ok = 0;
    for (const auto& r : rows) ok += r.has_value();
    out.failed = B - ok;
    out.replicates.resize(ok, model.dim());
    int r = 0;
    for (const auto& row : rows)
        if (row) {
            for (int p = 0; p < model.dim(); ++p) out.replicates(r, p) = (*row)[p];
            ++r;
        }
    return out;
}

// Seed the Bayesian model's centered-logit transforms from a frequentist fit:
// center each tying parameter at its estimate; the logit-scale width is
// sd / (x0 (1 - x0)) when an uncertainty is supplied, else the 0.5 fallback.
inline bayes::ModelOptions seed_transforms(const FitResult& fit,
                                           const std::vector<double>& sds = {}) {
    bayes::ModelOptions opts;
    for (int i = 0; i < fit.n_tying; ++i) {
        double x0 = std::clamp(fit.estimate[i], 1e-6, 1.0 - 1e-6);
        double delta = 0.5;
        if (i < static_cast<int>(sds.size()) && sds[i] > 0.0)
            delta = sds[i] / (x0 * (1.0 - x0));
        opts.transforms[fit.names[i]] = bayes::Transform::logit_tf(x0, delta);
    }
    return opts;
}

}  // namespace rbayes::freq
