#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "rbayes/freq.hpp"
#include "rbayes/simulate.hpp"

using namespace rbayes;

namespace {

qsim::cmat ket0_proj() {
    qsim::cmat p = qsim::cmat::Zero(2, 2);
    p(0, 0) = 1.0;
    return p;
}

std::vector<qsim::DatasetRecord> depolarizing_rb_dataset(double s, const std::vector<int>& ms,
                                                         int I, int N, std::uint64_t seed) {
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    auto dep = qsim::NoiseModel::gate_independent(qsim::depolarizing_channel(s));
    std::map<std::string, qsim::SpamConfig> spam{{"0", {ket0_proj(), 0.99 * ket0_proj()}}};
    return qsim::simulate_dataset(proto, dep, spam, ms, I, N, seed);
}

int index_of(const std::vector<std::string>& names, const std::string& want) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == want) return static_cast<int>(i);
    return -1;
}

}  // namespace

TEST_CASE("all-successes N=1 data drives the fit onto the boundary ridge") {
    std::vector<qsim::DatasetRecord> data;
    for (int M : {1, 2, 4})
        for (int i = 0; i < 5; ++i) data.push_back({M, "0", i, 1, 1, std::nullopt});
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    auto fit = freq::mle_fit(proto, data);
    CHECK(fit.converged);
    CHECK(fit.boundary);
    // the likelihood supremum is 0 (every record certain); the optimizer should
    // get essentially there
    CHECK(fit.loglik > -1e-6);
    CHECK(fit.loglik <= 0.0);
}

TEST_CASE("MLE recovers known decay parameters within bootstrap standard errors") {
    auto data = depolarizing_rb_dataset(0.0002, {1, 100, 500, 1000, 2000}, 20, 30, 314);
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    auto boot = freq::bootstrap(proto, data, freq::BootstrapKind::Nonparametric, 120, 5);
    REQUIRE(boot.fit.converged);
    // measurement 0.99|0><0|: A = 0.99, B = 0.495
    const std::map<std::string, double> truth{
        {"p", 0.9998}, {"A", 0.99}, {"B", 0.495}};
    for (const auto& [name, value] : truth) {
        int idx = index_of(boot.names, name);
        REQUIRE(idx >= 0);
        auto col = boot.column(idx);
        double m = 0.0;
        for (double x : col) m += x;
        m /= col.size();
        double sd = 0.0;
        for (double x : col) sd += (x - m) * (x - m);
        sd = std::sqrt(sd / (col.size() - 1));
        INFO(name << ": estimate " << boot.fit.estimate[idx] << ", sd " << sd);
        CHECK(std::fabs(boot.fit.estimate[idx] - value) < 3.0 * sd);
    }
}

TEST_CASE("single-cell MLE matches a grid-search beta-binomial oracle") {
    auto data = depolarizing_rb_dataset(0.01, {10}, 40, 25, 99);
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    auto fit = freq::mle_fit(proto, data);
    REQUIRE(fit.converged);
    auto model = bayes::build_beta_model(proto, data);
    std::span<const double> xT(fit.estimate.data(), static_cast<std::size_t>(fit.n_tying));
    double mu_hat = model.protocol.tying(1, 10.0, 0, xT);
    double t_hat = fit.estimate[model.cells[0].s_begin];

    auto cell_loglik = [&](double mu, double t) {
        double lp = 0.0;
        for (const auto& rec : data)
            lp += dists::beta_binomial_logpmf(rec.Q, rec.N, mu, t);
        return lp;
    };
    // refined 2-D grid search
    double lo_mu = 0.01, hi_mu = 0.99, lo_t = 1e-6, hi_t = 0.5;
    double best_mu = 0.5, best_t = 0.01;
    for (int pass = 0; pass < 5; ++pass) {
        double best = -1e300;
        for (int i = 0; i <= 60; ++i)
            for (int j = 0; j <= 60; ++j) {
                double mu = lo_mu + (hi_mu - lo_mu) * i / 60.0;
                double t = lo_t + (hi_t - lo_t) * j / 60.0;
                double lp = cell_loglik(mu, t);
                if (lp > best) {
                    best = lp;
                    best_mu = mu;
                    best_t = t;
                }
            }
        double wm = (hi_mu - lo_mu) / 10.0, wt = (hi_t - lo_t) / 10.0;
        lo_mu = std::max(0.001, best_mu - wm);
        hi_mu = std::min(0.999, best_mu + wm);
        lo_t = std::max(1e-8, best_t - wt);
        hi_t = std::min(0.999, best_t + wt);
    }
    CHECK(mu_hat == Catch::Approx(best_mu).margin(1e-4));
    CHECK(t_hat == Catch::Approx(best_t).margin(1e-4));
    CHECK(fit.loglik >= cell_loglik(best_mu, best_t) - 1e-6);
}

TEST_CASE("WLSF recovers exact exponential means to optimizer tolerance") {
    // T(M) = 0.48 * 0.5^M + 0.4 gives integer expected counts at N = 100;
    // symmetric +-2 perturbations keep every cell mean exact with equal
    // variances
    std::vector<qsim::DatasetRecord> data;
    const std::map<int, int> exact{{1, 64}, {2, 52}, {3, 46}};
    for (const auto& [M, q] : exact) {
        data.push_back({M, "0", 0, 100, q - 2, std::nullopt});
        data.push_back({M, "0", 1, 100, q + 2, std::nullopt});
    }
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    auto fit = freq::wlsf_fit(proto, data);
    REQUIRE(fit.converged);
    CHECK(fit.estimate[index_of(fit.names, "p")] == Catch::Approx(0.5).margin(1e-7));
    CHECK(fit.estimate[index_of(fit.names, "A")] == Catch::Approx(0.88).margin(1e-7));
    CHECK(fit.estimate[index_of(fit.names, "B")] == Catch::Approx(0.4).margin(1e-7));
}

TEST_CASE("WLSF degenerate-variance handling") {
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    SECTION("zero-variance cells fall back to the maximum observed variance") {
        std::vector<qsim::DatasetRecord> data;
        const std::map<int, int> exact{{1, 64}, {2, 52}};
        for (const auto& [M, q] : exact) {
            data.push_back({M, "0", 0, 100, q - 2, std::nullopt});
            data.push_back({M, "0", 1, 100, q + 2, std::nullopt});
        }
        // an all-ones low-data cell with zero sample variance
        data.push_back({3, "0", 0, 1, 1, std::nullopt});
        data.push_back({3, "0", 1, 1, 1, std::nullopt});
        auto fit = freq::wlsf_fit(proto, data);
        CHECK(fit.converged);
        for (double x : fit.estimate) CHECK(std::isfinite(x));
    }
    SECTION("all cells zero-variance is an error pointing at the MLE") {
        std::vector<qsim::DatasetRecord> data{{1, "0", 0, 10, 9, std::nullopt},
                                              {1, "0", 1, 10, 9, std::nullopt},
                                              {2, "0", 0, 10, 8, std::nullopt},
                                              {2, "0", 1, 10, 8, std::nullopt}};
        CHECK_THROWS_AS(freq::wlsf_fit(proto, data), std::runtime_error);
    }
    SECTION("fewer than two distinct lengths is invalid") {
        std::vector<qsim::DatasetRecord> data{{5, "0", 0, 10, 9, std::nullopt},
                                              {5, "0", 1, 10, 6, std::nullopt}};
        CHECK_THROWS_AS(freq::wlsf_fit(proto, data), std::invalid_argument);
    }
}

TEST_CASE("MLE log-likelihood dominates the WLSF-implied parameters") {
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    for (std::uint64_t seed : {7u, 21u, 63u}) {
        auto data = depolarizing_rb_dataset(0.005, {1, 20, 60, 150}, 12, 20, seed);
        auto mle = freq::mle_fit(proto, data);
        auto wlsf = freq::wlsf_fit(proto, data);
        INFO("seed " << seed);
        CHECK(mle.loglik >= wlsf.loglik - 1e-9);
    }
}

TEST_CASE("bootstrap of identical data gives zero-width intervals") {
    std::vector<qsim::DatasetRecord> data;
    for (int M : {1, 10, 40})
        for (int i = 0; i < 4; ++i) data.push_back({M, "0", i, 30, 20, std::nullopt});
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    auto boot = freq::bootstrap(proto, data, freq::BootstrapKind::Nonparametric, 100, 2);
    CHECK(boot.failed == 0);
    auto [lo, hi] = boot.central(0.05);
    for (std::size_t p = 0; p < lo.size(); ++p)
        CHECK(hi[p] - lo[p] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("parametric and nonparametric bootstrap agree on large data") {
    auto data = depolarizing_rb_dataset(0.002, {1, 50, 150, 400}, 25, 30, 2718);
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    auto np = freq::bootstrap(proto, data, freq::BootstrapKind::Nonparametric, 150, 10);
    auto pa = freq::bootstrap(proto, data, freq::BootstrapKind::Parametric, 150, 11);
    int idx = index_of(np.names, "p");
    auto stats = [&](const freq::BootstrapResult& b) {
        auto col = b.column(idx);
        double m = 0.0;
        for (double x : col) m += x;
        m /= col.size();
        double v = 0.0;
        for (double x : col) v += (x - m) * (x - m);
        v /= (col.size() - 1.0);
        return std::pair<double, double>{m, std::sqrt(v / col.size())};
    };
    auto [m1, se1] = stats(np);
    auto [m2, se2] = stats(pa);
    CHECK(std::fabs(m1 - m2) < 3.0 * std::sqrt(se1 * se1 + se2 * se2));
}

TEST_CASE("argument validation") {
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    CHECK_THROWS_AS(freq::mle_fit(proto, {}), std::invalid_argument);
    std::vector<qsim::DatasetRecord> data{{1, "0", 0, 10, 9, std::nullopt}};
    CHECK_THROWS_AS(freq::bootstrap(proto, data, freq::BootstrapKind::Parametric, 50),
                    std::invalid_argument);
}

TEST_CASE("frequentist fits seed the centered-logit transforms") {
    auto data = depolarizing_rb_dataset(0.01, {1, 10, 40}, 10, 20, 5);
    auto proto = protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    auto fit = freq::wlsf_fit(proto, data);
    auto opts = freq::seed_transforms(fit, {0.002, 0.0, 0.01});
    REQUIRE(opts.transforms.size() == static_cast<std::size_t>(fit.n_tying));
    const auto& tp = opts.transforms.at("p");
    CHECK(tp.x0 == Catch::Approx(fit.estimate[index_of(fit.names, "p")]));
    CHECK(tp.delta == Catch::Approx(0.002 / (tp.x0 * (1.0 - tp.x0))));
    // missing or zero uncertainties use the documented 0.5 fallback
    CHECK(opts.transforms.at("A").delta == 0.5);
    // the centered model still evaluates to a finite posterior at u = 0
    auto model = bayes::build_beta_model(proto, data, {}, opts);
    std::vector<double> zero(model.dim(), 0.0);
    CHECK(std::isfinite(bayes::log_posterior(model, zero)));
}
