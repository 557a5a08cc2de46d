#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbayes/ad.hpp"
#include "rbayes/dists.hpp"
#include "rbayes/protocols.hpp"
#include "rbayes/simulate.hpp"

// Hierarchical Bayesian models for RB+ data. A model is a log-density over
// unconstrained coordinates u: each parameter is mapped to its constrained
// value through a per-parameter transform (with the log-Jacobian folded into
// the density), priors are attached per parameter, and the likelihood couples
// the tying parameters to per-(M, e) survival-distribution blocks.
//
// Parameter layout (fixed, documented ordering):
//   [tying parameters x_T] [per-cell survival nuisances x_S, cells sorted by
//   (M, e)] [per-cell latent q blocks, same cell order, when latent] [NV rates]

namespace rbayes::bayes {

using ad::dual;
using ad::value_of;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---- transforms -----------------------------------------------------------

// Map between the unconstrained sampling coordinate u and the constrained
// value x. Probability parameters use a centered logit,
// x = inv-logit(logit(x0) + delta * u), so that u = 0 corresponds to x = x0
// and a unit step in u corresponds to roughly delta in logit space.
struct Transform {
    enum class Kind { Logit, Log, Identity };
    Kind kind = Kind::Identity;
    double x0 = 0.5;     // Logit centering
    double delta = 1.0;  // Logit scale

    static Transform logit_tf(double x0 = 0.5, double delta = 1.0) {
        if (!(x0 > 0.0 && x0 < 1.0 && delta > 0.0))
            throw std::invalid_argument("Transform: logit centering needs x0 in (0,1), delta > 0");
        return {Kind::Logit, x0, delta};
    }
    static Transform log_tf() { return {Kind::Log}; }
    static Transform identity_tf() { return {Kind::Identity}; }

    template <class T>
    T constrain(const T& u) const {
        using ad::exp;
        using std::exp;
        switch (kind) {
            case Kind::Logit: return dists::inv_logit(T(delta * u + dists::logit(x0)));
            case Kind::Log: return exp(u);
            case Kind::Identity: break;
        }
        return u;
    }

    template <class T>
    T log_jacobian(const T& u) const {
        using ad::log;
        using std::log;
        switch (kind) {
            case Kind::Logit: {
                T x = constrain(u);
                return std::log(delta) + log(x) + log(1.0 - x);
            }
            case Kind::Log: return u;
            case Kind::Identity: break;
        }
        return T(0.0);
    }

    double unconstrain(double x) const {
        switch (kind) {
            case Kind::Logit: return (dists::logit(x) - dists::logit(x0)) / delta;
            case Kind::Log: return std::log(x);
            case Kind::Identity: break;
        }
        return x;
    }
};

// ---- priors ---------------------------------------------------------------

struct Prior {
    enum class Kind { Uniform01, Beta, Gamma, Normal, Pal };
    Kind kind = Kind::Uniform01;
    double a = 1.0, b = 1.0;  // beta(a,b); gamma(shape a, rate b); normal(mean a, sd b)
    dists::PALParams pal{0.5, 0.25, false};

    static Prior uniform01() { return {}; }
    static Prior beta(double a, double b) { return {Kind::Beta, a, b}; }
    static Prior gamma(double shape, double rate) { return {Kind::Gamma, shape, rate}; }
    static Prior normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }
    static Prior pal_prior(dists::PALParams p) {
        Prior out{Kind::Pal};
        out.pal = p;
        return out;
    }

    template <class T>
    T logpdf(const T& x) const {
        using ad::log;
        using std::log;
        const double v = value_of(x);
        switch (kind) {
            case Kind::Uniform01:
                return (v > 0.0 && v < 1.0) ? T(0.0) : T(kNegInf);
            case Kind::Beta:
                if (!(v > 0.0 && v < 1.0)) return T(kNegInf);
                return dists::beta_logpdf_ab(x, T(a), T(b));
            case Kind::Gamma:
                if (!(v > 0.0)) return T(kNegInf);
                return a * std::log(b) - std::lgamma(a) + (a - 1.0) * log(x) - b * x;
            case Kind::Normal: {
                T z = (x - a) / b;
                return -0.5 * z * z - std::log(b) - 0.91893853320467274178;
            }
            case Kind::Pal:
                if (!(v > 0.0 && v < 1.0)) return T(kNegInf);
                return dists::pal_logpdf(x, pal);
        }
        return T(kNegInf);
    }

    // mean of the prior, used to seed initial points
    double mean() const {
        switch (kind) {
            case Kind::Uniform01: return 0.5;
            case Kind::Beta: return a / (a + b);
            case Kind::Gamma: return a / b;
            case Kind::Normal: return a;
            case Kind::Pal: return 0.5 * (pal.p0 + 1.0);  // rough plateau center
        }
        return 0.5;
    }
};

// Joint Dirichlet(a0, a1, a2) prior on (x_i0, x_i1, 1 - x_i0 - x_i1), used for
// the LRB leakage/seepage pair under the constraint L1 + L2 <= 1.
struct DirichletPair {
    int i0 = -1, i1 = -1;
    std::array<double, 3> conc{1.0, 1.0, 100.0};

    template <class T>
    T logpdf(const T& x0, const T& x1) const {
        using ad::log;
        using std::log;
        T rest = 1.0 - x0 - x1;
        if (!(value_of(x0) > 0.0 && value_of(x1) > 0.0 && value_of(rest) > 0.0))
            return T(kNegInf);
        double norm = std::lgamma(conc[0] + conc[1] + conc[2]) - std::lgamma(conc[0]) -
                      std::lgamma(conc[1]) - std::lgamma(conc[2]);
        return norm + (conc[0] - 1.0) * log(x0) + (conc[1] - 1.0) * log(x1) +
               (conc[2] - 1.0) * log(rest);
    }
};

struct ParamDef {
    std::string name;
    Transform tf;
    Prior prior;
    // parameters whose prior is joint (Dirichlet pair) or hierarchical (stick
    // fractions, latent q) skip the scalar prior; their density contribution
    // lives with the structure that owns them
    bool skip_prior = false;
    double init_u = 0.0;
};

// Named prior overrides plus family defaults. `pick` resolves a parameter name
// to its prior.
struct PriorTable {
    std::map<std::string, Prior> overrides;
    Prior tying_default = Prior::uniform01();
    Prior nuisance_default = Prior::uniform01();
    std::optional<std::array<double, 3>> lrb_dirichlet;  // concentrations for (L1, L2, rest)

    const Prior& pick(const std::string& name, const Prior& fallback) const {
        auto it = overrides.find(name);
        return it == overrides.end() ? fallback : it->second;
    }
};

// The two SPAM prior presets for leakage RB: both put Dir(1, 1, 100) on
// (L1, L2, 1-L1-L2); the tighter variant additionally concentrates the
// measurement nuisances A ~ Beta(100, 100) and B ~ Beta(1, 100).
inline PriorTable lrb_spam_priors(const protocols::ProtocolSpec& protocol, bool tighter) {
    PriorTable t;
    t.lrb_dirichlet = {{1.0, 1.0, 100.0}};
    if (tighter) {
        for (int l = 0; l < protocol.d1; ++l) {
            t.overrides["A" + std::to_string(l)] = Prior::beta(100.0, 100.0);
            t.overrides["B" + std::to_string(l)] = Prior::beta(1.0, 100.0);
        }
    }
    return t;
}

// ---- model structure ------------------------------------------------------

enum class SurvivalFamily { Beta, Cdpbm };

struct ModelOptions {
    std::map<std::string, Transform> transforms;  // per-name transform overrides
    int K = 10;            // CDPBM truncation
    bool latent_q = false;  // CDPBM: keep latent q explicit instead of marginalizing
};

struct CellObs {
    int N = 0;
    int Q = 0;
    int count = 0;  // multiplicity of this (N, Q) pair in the cell
};

struct NvObs {
    long x = 0, y = 0, z = 0;
    double lconst = 0.0;  // -lgamma(x+1) - lgamma(y+1) - lgamma(z+1)
};

struct Cell {
    int M = 0;
    int e_idx = 0;
    int s_begin = 0, s_count = 0;  // survival-nuisance parameter slice
    int q_begin = -1, q_count = 0;  // latent q slice (one per record) when latent
    std::vector<CellObs> hist;                  // aggregated binomial observations
    std::vector<std::array<int, 2>> latent_nq;  // (N, Q) per latent record
    std::vector<NvObs> nv;                      // Poisson triplets per latent record
};

template <class T>
T logsumexp(std::span<const T> terms) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < terms.size(); ++i)
        if (value_of(terms[i]) > value_of(terms[best])) best = i;
    if (value_of(terms[best]) == kNegInf) return T(kNegInf);
    using ad::exp;
    using ad::log;
    using std::exp;
    using std::log;
    T acc = T(0.0);
    for (std::size_t i = 0; i < terms.size(); ++i) acc += exp(terms[i] - terms[best]);
    return terms[best] + log(acc);
}

struct HierarchicalModel {
    protocols::ProtocolSpec protocol;
    SurvivalFamily family = SurvivalFamily::Beta;
    bool nv = false;
    bool latent = false;  // explicit latent q parameters (always true in NV mode)
    int K = 0;            // CDPBM truncation (0 for the beta family)
    int tied_order = 1;   // moment order tied by the protocol (1, or 2 for unitarity)
    int n_tying = 0;
    int rate_begin = -1;  // NV: index of alpha; beta = alpha + x[rate_begin + 1]
    Prior rate_prior = Prior::gamma(1.0, 0.01);
    std::vector<ParamDef> params;
    std::vector<Cell> cells;
    std::optional<DirichletPair> dirichlet;
    std::shared_ptr<std::atomic<long>> guard_events = std::make_shared<std::atomic<long>>(0);

    int dim() const { return static_cast<int>(params.size()); }

    std::vector<std::string> param_names() const {
        std::vector<std::string> out;
        out.reserve(params.size());
        for (const auto& p : params) out.push_back(p.name);
        return out;
    }

    std::vector<double> constrain(std::span<const double> u) const {
        std::vector<double> x(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) x[i] = params[i].tf.constrain(u[i]);
        return x;
    }

    std::vector<double> initial_point() const {
        std::vector<double> u(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) u[i] = params[i].init_u;
        return u;
    }

    // priors, transforms' log-Jacobians, and the joint pieces (Dirichlet pair,
    // NV beta-rate prior)
    template <class T>
    T prior_terms(std::span<const T> u, std::span<const T> x) const {
        T lp = T(0.0);
        for (std::size_t i = 0; i < params.size(); ++i) {
            lp += params[i].tf.log_jacobian(u[i]);
            if (!params[i].skip_prior) lp += params[i].prior.logpdf(x[i]);
            if (value_of(lp) == kNegInf) return T(kNegInf);
        }
        if (dirichlet) lp += dirichlet->logpdf(x[dirichlet->i0], x[dirichlet->i1]);
        if (nv) lp += rate_prior.logpdf(T(x[rate_begin] + x[rate_begin + 1]));
        return lp;
    }

    // one record's observation factor given its latent survival probability
    template <class T>
    T latent_obs_term(const Cell& c, int j, const T& q, std::span<const T> x) const {
        using ad::log;
        using std::log;
        if (nv) {
            const NvObs& o = c.nv[j];
            T ar = x[rate_begin];
            T br = ar + x[rate_begin + 1];
            T lz = br + (ar - br) * q;
            return double(o.x) * log(ar) - ar + double(o.y) * log(br) - br +
                   double(o.z) * log(lz) - lz + o.lconst;
        }
        const auto& [N, Q] = c.latent_nq[j];
        T lp = T(dists::lchoose(N, Q));
        if (Q > 0) lp += double(Q) * log(q);
        if (Q < N) lp += double(N - Q) * log(1.0 - q);
        return lp;
    }

    // likelihood contribution of one (M, e) cell, including the hierarchical
    // pieces owned by the cell (stick-fraction priors, latent-q priors)
    template <class T>
    T cell_term(const Cell& c, std::span<const T> x) const {
        using ad::log;
        using std::log;
        std::span<const T> xT(x.data(), static_cast<std::size_t>(n_tying));
        T lp = T(0.0);

        if (family == SurvivalFamily::Beta) {
            T mu, t;
            if (tied_order == 1) {
                mu = protocol.tying(1, double(c.M), c.e_idx, xT);
                if (!(value_of(mu) > 0.0 && value_of(mu) < 1.0)) return T(kNegInf);
                t = x[c.s_begin];
            } else {
                mu = x[c.s_begin];
                T mu2 = protocol.tying(2, double(c.M), c.e_idx, xT);
                double m = value_of(mu), m2 = value_of(mu2);
                if (!(m2 > m * m && m2 < m)) return T(kNegInf);
                t = (mu2 - mu * mu) / (mu * (1.0 - mu));
            }
            if (!latent) {
                for (const CellObs& o : c.hist)
                    lp += double(o.count) * dists::beta_binomial_logpmf(o.Q, o.N, mu, t);
            } else {
                T a, b;
                dists::beta_view_to_ab(dists::BetaView::MeanT, mu, t, a, b);
                for (int j = 0; j < c.q_count; ++j) {
                    const T& q = x[c.q_begin + j];
                    lp += dists::beta_logpdf_ab(q, a, b);
                    lp += latent_obs_term(c, j, q, x);
                }
            }
            return lp;
        }

        // CDPBM cell block: [mu (order-2 only)] [alpha] [v x (K-1)] [nu* x K] [r x K]
        int off = c.s_begin;
        T mu_free;
        if (tied_order == 2) mu_free = x[off++];
        const T& alpha = x[off];
        std::span<const T> v(x.data() + off + 1, static_cast<std::size_t>(K - 1));
        std::span<const T> ns(x.data() + off + K, static_cast<std::size_t>(K));
        std::span<const T> r(x.data() + off + 2 * K, static_cast<std::size_t>(K));

        // stick fractions v_k ~ Beta(1, alpha)
        for (const T& vk : v) lp += log(alpha) + (alpha - 1.0) * log(1.0 - vk);

        std::vector<T> w = dists::stick_break(v);
        std::vector<T> nu;
        try {
            if (tied_order == 1) {
                T mu1 = protocol.tying(1, double(c.M), c.e_idx, xT);
                if (!(value_of(mu1) > 0.0 && value_of(mu1) < 1.0)) return T(kNegInf);
                nu = dists::cdpbm_constrain_mean(ns, std::span<const T>(w), mu1);
            } else {
                T mu2 = protocol.tying(2, double(c.M), c.e_idx, xT);
                double m = value_of(mu_free), m2 = value_of(mu2);
                if (!(m2 > m * m && m2 < m)) return T(kNegInf);
                nu = dists::cdpbm_constrain_two_moments(ns, r, std::span<const T>(w), mu_free,
                                                        mu2);
            }
        } catch (const std::exception&) {
            ++(*guard_events);
            return T(kNegInf);
        }

        std::vector<T> comp_a(K), comp_b(K), logw(K), terms(K);
        for (int k = 0; k < K; ++k) {
            dists::beta_view_to_ab(dists::BetaView::MeanR, nu[k], r[k], comp_a[k], comp_b[k]);
            logw[k] = log(w[k]);
        }
        if (!latent) {
            // marginal likelihood: a finite mixture of beta-binomials
            for (const CellObs& o : c.hist) {
                for (int k = 0; k < K; ++k)
                    terms[k] = logw[k] +
                               dists::beta_binomial_logpmf_ab(o.Q, o.N, comp_a[k], comp_b[k]);
                lp += double(o.count) * logsumexp(std::span<const T>(terms));
            }
        } else {
            for (int j = 0; j < c.q_count; ++j) {
                const T& q = x[c.q_begin + j];
                for (int k = 0; k < K; ++k)
                    terms[k] = logw[k] + dists::beta_logpdf_ab(q, comp_a[k], comp_b[k]);
                lp += logsumexp(std::span<const T>(terms));
                lp += latent_obs_term(c, j, q, x);
            }
        }
        return lp;
    }

    template <class T>
    T logdensity(std::span<const T> u) const {
        if (u.size() != params.size())
            throw std::invalid_argument("logdensity: wrong parameter-vector length");
        std::vector<T> x(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) x[i] = params[i].tf.constrain(u[i]);
        std::span<const T> xs(x);
        T lp = prior_terms(u, xs);
        if (value_of(lp) == kNegInf) return T(kNegInf);
        for (const Cell& c : cells) {
            lp += cell_term(c, xs);
            if (value_of(lp) == kNegInf) return T(kNegInf);
        }
        if (std::isnan(value_of(lp))) {
            ++(*guard_events);
            return T(kNegInf);
        }
        return lp;
    }
};

inline double log_posterior(const HierarchicalModel& m, std::span<const double> u) {
    return m.logdensity(u);
}

// Exact gradient via forward-mode sweeps, exploiting the block structure:
// each cell's likelihood depends only on the tying parameters, its own block,
// its latent slice, and (in NV mode) the rate pair, so sweeps stay local
// instead of costing dim() full evaluations.
inline std::vector<double> grad_log_posterior(const HierarchicalModel& m,
                                              std::span<const double> u) {
    const std::size_t n = u.size();
    if (n != m.params.size())
        throw std::invalid_argument("grad_log_posterior: wrong parameter-vector length");
    std::vector<dual> xd(n);
    for (std::size_t i = 0; i < n; ++i) xd[i] = dual(m.params[i].tf.constrain(u[i]));
    std::span<const dual> xs(xd);
    std::vector<double> g(n, 0.0);

    auto sweep = [&](int i, auto&& term) {
        dual saved = xd[i];
        xd[i] = m.params[i].tf.constrain(dual(u[i], 1.0));
        dual y = term();
        g[i] += y.d;
        xd[i] = saved;
    };

    // per-parameter transform Jacobians and scalar priors
    for (std::size_t i = 0; i < n; ++i) {
        dual ui(u[i], 1.0);
        dual xi = m.params[i].tf.constrain(ui);
        dual y = m.params[i].tf.log_jacobian(ui);
        if (!m.params[i].skip_prior) y += m.params[i].prior.logpdf(xi);
        g[i] += y.d;
    }
    if (m.dirichlet) {
        for (int i : {m.dirichlet->i0, m.dirichlet->i1})
            sweep(i, [&] { return m.dirichlet->logpdf(xd[m.dirichlet->i0], xd[m.dirichlet->i1]); });
    }
    if (m.nv) {
        for (int i : {m.rate_begin, m.rate_begin + 1})
            sweep(i, [&] {
                return m.rate_prior.logpdf(dual(xd[m.rate_begin] + xd[m.rate_begin + 1]));
            });
    }
    for (const Cell& c : m.cells) {
        std::vector<int> deps;
        for (int i = 0; i < m.n_tying; ++i) deps.push_back(i);
        for (int i = 0; i < c.s_count; ++i) deps.push_back(c.s_begin + i);
        for (int i = 0; i < c.q_count; ++i) deps.push_back(c.q_begin + i);
        if (m.nv) {
            deps.push_back(m.rate_begin);
            deps.push_back(m.rate_begin + 1);
        }
        for (int i : deps) sweep(i, [&] { return m.cell_term(c, xs); });
    }
    for (double v : g)
        if (!std::isfinite(v)) {
            ++(*m.guard_events);
            break;
        }
    return g;
}

// ---- builders -------------------------------------------------------------

namespace detail {

inline HierarchicalModel build_model(const protocols::ProtocolSpec& protocol,
                                     const std::vector<qsim::DatasetRecord>& data,
                                     SurvivalFamily family, bool nv, const PriorTable& priors,
                                     const ModelOptions& opts) {
    HierarchicalModel m;
    m.protocol = protocol;
    m.family = family;
    m.nv = nv;
    m.latent = nv || (family == SurvivalFamily::Cdpbm && opts.latent_q);
    m.K = family == SurvivalFamily::Cdpbm ? opts.K : 0;
    if (family == SurvivalFamily::Cdpbm && m.K < 2)
        throw std::invalid_argument("build_cdpbm_model: truncation K must be at least 2");
    auto orders = protocol.moment_orders();
    m.tied_order = orders.at(0);
    m.n_tying = protocol.n_tying();

    auto add_param = [&](const std::string& name, Transform def_tf, Prior prior,
                         bool skip = false) {
        auto it = opts.transforms.find(name);
        m.params.push_back({name, it == opts.transforms.end() ? def_tf : it->second, prior, skip});
        return static_cast<int>(m.params.size()) - 1;
    };

    for (const std::string& name : protocol.tying_names())
        add_param(name, Transform::logit_tf(), priors.pick(name, priors.tying_default));
    if (protocol.id == protocols::ProtocolId::Lrb) {
        DirichletPair d;
        d.i0 = 0;
        d.i1 = 1;
        d.conc = priors.lrb_dirichlet.value_or(std::array<double, 3>{1.0, 1.0, 100.0});
        m.dirichlet = d;
        m.params[0].skip_prior = true;
        m.params[1].skip_prior = true;
    }

    std::map<std::pair<int, int>, Cell> bucket;
    std::map<std::pair<int, int>, std::map<std::pair<int, int>, int>> hists;
    for (const auto& rec : data) {
        int e = protocol.experiment_index(rec.e);
        if (rec.M < 1 || rec.N < 1)
            throw std::invalid_argument("build_model: records need M >= 1 and N >= 1");
        auto key = std::make_pair(rec.M, e);
        Cell& c = bucket[key];
        c.M = rec.M;
        c.e_idx = e;
        if (nv) {
            if (!rec.nv) throw std::invalid_argument("build_nv_model: record lacks (X, Y, Z) counts");
            if (rec.nv->x < 0 || rec.nv->y < 0 || rec.nv->z < 0)
                throw std::invalid_argument("build_nv_model: negative counts");
            NvObs o{rec.nv->x, rec.nv->y, rec.nv->z, 0.0};
            o.lconst = -std::lgamma(double(o.x) + 1.0) - std::lgamma(double(o.y) + 1.0) -
                       std::lgamma(double(o.z) + 1.0);
            c.nv.push_back(o);
        } else {
            if (rec.Q < 0 || rec.Q > rec.N)
                throw std::invalid_argument("build_model: Q outside [0, N]");
            if (m.latent)
                c.latent_nq.push_back({rec.N, rec.Q});
            else
                hists[key][{rec.N, rec.Q}]++;
        }
    }

    for (auto& [key, c] : bucket) {
        if (!m.latent)
            for (const auto& [nq, count] : hists[key]) c.hist.push_back({nq.first, nq.second, count});
        std::string suf = "_M" + std::to_string(c.M) + "_e" + protocol.etypes[c.e_idx].label;
        c.s_begin = static_cast<int>(m.params.size());
        if (family == SurvivalFamily::Beta) {
            std::string name = (m.tied_order == 1 ? "t" : "mu") + suf;
            add_param(name, Transform::logit_tf(), priors.pick(name, priors.nuisance_default));
        } else {
            if (m.tied_order == 2) {
                std::string name = "mu" + suf;
                add_param(name, Transform::logit_tf(), priors.pick(name, priors.nuisance_default));
            }
            add_param("alpha" + suf, Transform::log_tf(), Prior::gamma(1.0, 1.0));
            for (int k = 1; k < m.K; ++k)
                add_param("v" + std::to_string(k) + suf, Transform::logit_tf(),
                          Prior::uniform01(), /*skip=*/true);  // Beta(1, alpha), owned by the cell
            for (int k = 1; k <= m.K; ++k)
                add_param("nustar" + std::to_string(k) + suf, Transform::identity_tf(),
                          Prior::normal(0.0, 1.9));
            for (int k = 1; k <= m.K; ++k)
                add_param("r" + std::to_string(k) + suf, Transform::logit_tf(),
                          Prior::uniform01());
        }
        c.s_count = static_cast<int>(m.params.size()) - c.s_begin;
    }
    if (m.latent) {
        for (auto& [key, c] : bucket) {
            std::string suf = "_M" + std::to_string(c.M) + "_e" + protocol.etypes[c.e_idx].label;
            c.q_begin = static_cast<int>(m.params.size());
            c.q_count = static_cast<int>(nv ? c.nv.size() : c.latent_nq.size());
            for (int j = 0; j < c.q_count; ++j)
                add_param("q" + suf + "_" + std::to_string(j), Transform::logit_tf(),
                          Prior::uniform01(), /*skip=*/true);  // drawn from the survival layer
        }
    }
    if (nv) {
        // rates: alpha > 0 and beta = alpha + gap with gap > 0 enforce 0 < alpha < beta;
        // both rates carry Gam(1, 0.01) priors (beta's is applied jointly)
        m.rate_begin = add_param("rate_alpha", Transform::log_tf(), Prior::gamma(1.0, 0.01));
        add_param("rate_gap", Transform::log_tf(), Prior::uniform01(), /*skip=*/true);
        double sx = 0.0, sy = 0.0;
        long cnt = 0;
        for (const auto& rec : data) {
            sx += double(rec.nv->x);
            sy += double(rec.nv->y);
            ++cnt;
        }
        double mx = cnt ? std::max(sx / cnt, 1.0) : 100.0;
        double my = cnt ? std::max(sy / cnt, mx + 1.0) : 200.0;
        m.params[m.rate_begin].init_u = std::log(mx);
        m.params[m.rate_begin + 1].init_u = std::log(my - mx);
    }

    m.cells.reserve(bucket.size());
    for (auto& [key, c] : bucket) m.cells.push_back(std::move(c));
    return m;
}

}  // namespace detail

inline HierarchicalModel build_beta_model(const protocols::ProtocolSpec& protocol,
                                          const std::vector<qsim::DatasetRecord>& data,
                                          const PriorTable& priors = {},
                                          const ModelOptions& opts = {}) {
    return detail::build_model(protocol, data, SurvivalFamily::Beta, false, priors, opts);
}

inline HierarchicalModel build_cdpbm_model(const protocols::ProtocolSpec& protocol,
                                           const std::vector<qsim::DatasetRecord>& data,
                                           const PriorTable& priors = {},
                                           const ModelOptions& opts = {}) {
    return detail::build_model(protocol, data, SurvivalFamily::Cdpbm, false, priors, opts);
}

inline HierarchicalModel build_nv_model(const protocols::ProtocolSpec& protocol,
                                        const std::vector<qsim::DatasetRecord>& data,
                                        const PriorTable& priors = {},
                                        SurvivalFamily family = SurvivalFamily::Beta,
                                        const ModelOptions& opts = {}) {
    return detail::build_model(protocol, data, family, true, priors, opts);
}

}  // namespace rbayes::bayes
