#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rbayes/bayes.hpp"
#include "rbayes/design.hpp"
#include "rbayes/freq.hpp"
#include "rbayes/io.hpp"
#include "rbayes/protocols.hpp"
#include "rbayes/sampler.hpp"
#include "rbayes/simulate.hpp"

// Command-line front end: `simulate` writes datasets, `fit` runs Bayesian or
// frequentist inference, `plan` evaluates the experiment-design bounds, and
// `diagnose` re-analyzes a chains file. Every run writes its resolved
// configuration next to its outputs, so any output is reproducible from the
// config and seed alone. Exit codes: 0 success, 1 inference warning
// (divergent transitions or a non-converged fit), 2 user error.

namespace rbayes::cli {

namespace detail {

inline std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw CLI::ValidationError(std::string(what) + ": '" + tok + "' is not a number");
        }
    }
    if (out.empty()) throw CLI::ValidationError(std::string(what) + ": empty list");
    return out;
}

inline std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    for (double x : parse_double_list(s, what)) {
        if (x != std::floor(x))
            throw CLI::ValidationError(std::string(what) + ": expected integers");
        out.push_back(static_cast<int>(x));
    }
    return out;
}

inline qsim::cmat pauli_x() {
    qsim::cmat m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline qsim::cmat pauli_z() {
    qsim::cmat m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

struct ProtocolChoice {
    std::string name = "rb";
    int interleave = -1;   // irb: gate index; -1 picks the first non-identity gate
    int leak_levels = 1;   // lrb: dimension of the leakage block
};

inline protocols::ProtocolSpec build_protocol(const ProtocolChoice& pc) {
    if (pc.name == "rb") return protocols::make_rb_protocol(protocols::clifford_subgroup_12());
    if (pc.name == "irb") {
        auto gs = protocols::clifford_subgroup_12();
        int idx = pc.interleave;
        if (idx < 0)
            for (int g = 0; g < static_cast<int>(gs.gates.size()); ++g)
                if (g != gs.identity_index) { idx = g; break; }
        if (idx < 0 || idx >= static_cast<int>(gs.gates.size()))
            throw CLI::ValidationError("irb: interleaved gate index out of range");
        return protocols::make_irb_protocol(std::move(gs), idx);
    }
    if (pc.name == "unitarity")
        return protocols::make_unitarity_protocol(protocols::clifford_subgroup_12());
    if (pc.name == "dihedral") {
        auto dg = qsim::generate_group({qsim::Unitary(pauli_x()), qsim::Unitary(pauli_z())});
        return protocols::make_dihedral_protocol(dg, dg.find(pauli_x()), dg.find(pauli_z()));
    }
    if (pc.name == "lrb") {
        if (pc.leak_levels < 1) throw CLI::ValidationError("lrb: --leak-levels must be >= 1");
        return protocols::make_lrb_protocol(protocols::clifford_subgroup_12(), pc.leak_levels,
                                            /*n_init=*/1, /*p_free=*/false, {0.0});
    }
    throw CLI::ValidationError("unknown protocol '" + pc.name + "'");
}

// Noise specs are "kind" or "kind:a,b,...": none, depolarizing:s, dephasing:s,
// overrotation:eps (per-gate), dle:l1,l2,s (leakage lift of depolarizing).
inline qsim::NoiseModel build_noise(const std::string& spec,
                                    const protocols::ProtocolSpec& proto) {
    std::string kind = spec;
    std::vector<double> args;
    if (auto colon = spec.find(':'); colon != std::string::npos) {
        kind = spec.substr(0, colon);
        args = parse_double_list(spec.substr(colon + 1), "--noise");
    }
    const int d = proto.gateset.dim;
    auto need = [&](std::size_t n) {
        if (args.size() != n)
            throw CLI::ValidationError("--noise " + kind + ": expected " + std::to_string(n) +
                                       " parameter(s)");
    };
    if (kind == "none") {
        need(0);
        return qsim::NoiseModel::gate_independent(qsim::identity_channel(d));
    }
    if (kind == "depolarizing") {
        need(1);
        return qsim::NoiseModel::gate_independent(qsim::depolarizing_channel(args[0], d));
    }
    if (kind == "dephasing") {
        need(1);
        if (d != 2) throw CLI::ValidationError("--noise dephasing: qubit protocols only");
        return qsim::NoiseModel::gate_independent(qsim::dephasing_channel(args[0]));
    }
    if (kind == "overrotation") {
        need(1);
        if (d != 2) throw CLI::ValidationError("--noise overrotation: qubit protocols only");
        std::vector<qsim::Channel> per_gate;
        per_gate.reserve(proto.gateset.gates.size());
        for (const auto& g : proto.gateset.gates)
            per_gate.push_back(qsim::overrotation_channel(g, args[0]));
        return qsim::NoiseModel::gate_dependent(std::move(per_gate));
    }
    if (kind == "dle") {
        need(3);
        if (proto.id != protocols::ProtocolId::Lrb)
            throw CLI::ValidationError("--noise dle: only meaningful for --protocol lrb");
        return qsim::NoiseModel::gate_independent(qsim::dle_channel(
            qsim::depolarizing_channel(args[2], proto.d1), args[0], args[1], proto.d2));
    }
    throw CLI::ValidationError("unknown noise kind '" + kind + "'");
}

// Ideal SPAM: prepare |0>, measure the level named by the experiment type
// (lrb labels "m<l>i<k>" select level l; every other protocol measures |0>).
inline std::map<std::string, qsim::SpamConfig> default_spam(
    const protocols::ProtocolSpec& proto) {
    const int d = proto.gateset.dim;
    auto level_proj = [&](int l) {
        qsim::cmat m = qsim::cmat::Zero(d, d);
        m(l, l) = 1.0;
        return m;
    };
    std::map<std::string, qsim::SpamConfig> spam;
    for (const auto& e : proto.etypes) {
        int level = 0;
        if (proto.id == protocols::ProtocolId::Lrb) level = e.meas;
        spam[e.label] = qsim::SpamConfig{level_proj(0), level_proj(level)};
    }
    return spam;
}

// Geometric grid of sequence lengths from 1 to M_max = ceil(1/(1-F)), the
// longest length at which the signal has not yet fully decayed.
inline std::vector<int> m_list_from_fidelity(double fidelity, int points) {
    if (!(fidelity > 0.0 && fidelity < 1.0))
        throw CLI::ValidationError("--m-max-fidelity: F must lie in (0,1)");
    int m_max = static_cast<int>(std::ceil(1.0 / (1.0 - fidelity)));
    std::vector<int> ms;
    for (int k = 0; k < points; ++k) {
        double f = points == 1 ? 1.0 : double(k) / (points - 1);
        int m = static_cast<int>(std::lround(std::pow(double(m_max), f)));
        if (ms.empty() || m > ms.back()) ms.push_back(m);
    }
    return ms;
}

inline std::filesystem::path prepare_out_dir(const std::string& out_dir) {
    std::filesystem::path p(out_dir);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_csv_table(const std::filesystem::path& path,
                            const std::vector<std::string>& header,
                            const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    for (std::size_t c = 0; c < header.size(); ++c)
        f << (c ? "," : "") << header[c];
    f << "\n";
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            f << (c ? "," : "") << io::format_double(row[c]);
        f << "\n";
    }
}

}  // namespace detail

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
    detail::ProtocolChoice protocol;
    std::string noise = "none";
    std::string m_list;
    double m_max_fidelity = 0.0;  // alternative to an explicit list
    int m_points = 8;
    int sequences = 20;
    int shots = 30;
    std::uint64_t seed = 0;
    bool shuffle = false;
    std::string nv_rates;  // "alpha,beta" switches on Poisson observation
    std::string out_dir = ".";
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    auto proto = detail::build_protocol(a.protocol);
    auto noise = detail::build_noise(a.noise, proto);
    std::vector<int> ms;
    if (!a.m_list.empty())
        ms = detail::parse_int_list(a.m_list, "--m-list");
    else if (a.m_max_fidelity > 0.0)
        ms = detail::m_list_from_fidelity(a.m_max_fidelity, a.m_points);
    else
        throw CLI::ValidationError("simulate: need --m-list or --m-max-fidelity");

    qsim::SimulateOptions opts;
    opts.shuffle = a.shuffle;
    if (!a.nv_rates.empty()) {
        auto r = detail::parse_double_list(a.nv_rates, "--nv-rates");
        if (r.size() != 2 || !(r[0] > 0.0 && r[0] < r[1]))
            throw CLI::ValidationError("--nv-rates: need 0 < alpha < beta");
        opts.nv_rates = {r[0], r[1]};
    }
    auto data = qsim::simulate_dataset(proto, noise, detail::default_spam(proto), ms,
                                       a.sequences, a.shots, a.seed, opts);

    auto dir = detail::prepare_out_dir(a.out_dir);
    io::write_dataset((dir / "dataset.jsonl").string(), data);
    nlohmann::json cfg{{"command", "simulate"},
                       {"protocol", a.protocol.name},
                       {"interleave", a.protocol.interleave},
                       {"leak_levels", a.protocol.leak_levels},
                       {"noise", a.noise},
                       {"m_list", ms},
                       {"sequences", a.sequences},
                       {"shots", a.shots},
                       {"seed", a.seed},
                       {"shuffle", a.shuffle},
                       {"nv_rates", a.nv_rates}};
    io::write_json((dir / "config.json").string(), cfg);

    long shots_total = 0;
    for (const auto& rec : data) shots_total += rec.N;
    out << "wrote " << data.size() << " records (" << shots_total << " shots) to "
        << (dir / "dataset.jsonl").string() << "\n";
    return 0;
}

// ---- fit ------------------------------------------------------------------

struct FitArgs {
    std::string data_path;
    detail::ProtocolChoice protocol;
    std::string model = "beta";   // beta | cdpbm | nv
    std::string method = "nuts";  // nuts | mh | mle | bootstrap | wlsf
    int chains = 4;
    int warmup = 1000;
    int draws = 1000;
    std::uint64_t seed = 0;
    std::string alpha_levels = "0.05";
    int truncation = 10;          // CDPBM mixands
    int replicates = 600;         // bootstrap sample count
    bool parametric = false;      // bootstrap kind
    std::string out_dir = ".";
};

namespace detail {

inline bayes::HierarchicalModel build_fit_model(const FitArgs& a,
                                                const protocols::ProtocolSpec& proto,
                                                const std::vector<qsim::DatasetRecord>& data) {
    bayes::PriorTable priors;
    if (proto.id == protocols::ProtocolId::Lrb)
        priors = bayes::lrb_spam_priors(proto, /*tighter=*/false);
    bayes::ModelOptions opts;
    opts.K = a.truncation;
    if (a.model == "beta" || a.model == "cdpbm") {
        // center the sampling transforms at the MLE when one is available, so
        // chains start inside the dominant basin
        try {
            auto fit = freq::mle_fit(proto, data);
            if (fit.converged) opts.transforms = freq::seed_transforms(fit).transforms;
        } catch (const std::exception&) {
        }
    }
    if (a.model == "beta") return bayes::build_beta_model(proto, data, priors, opts);
    if (a.model == "cdpbm") return bayes::build_cdpbm_model(proto, data, priors, opts);
    if (a.model == "nv") return bayes::build_nv_model(proto, data, priors,
                                                      bayes::SurvivalFamily::Beta, opts);
    throw CLI::ValidationError("unknown model '" + a.model + "'");
}

inline void print_summary(std::ostream& out, const std::vector<sampler::SummaryRow>& rows,
                          const std::vector<double>& alphas) {
    out << "param mean sd";
    for (double al : alphas) out << " p_" << al;
    out << "\n";
    for (const auto& r : rows) {
        out << r.name << " " << r.mean << " " << r.sd;
        for (double q : r.one_sided) out << " " << q;
        out << "\n";
    }
}

}  // namespace detail

inline int cmd_fit(const FitArgs& a, std::ostream& out) {
    auto proto = detail::build_protocol(a.protocol);
    auto data = io::read_dataset(a.data_path);
    if (data.empty()) throw std::runtime_error(a.data_path + ": dataset is empty");
    auto alphas = detail::parse_double_list(a.alpha_levels, "--alpha-levels");
    for (double al : alphas)
        if (!(al > 0.0 && al < 1.0))
            throw CLI::ValidationError("--alpha-levels: values must lie in (0,1)");
    auto dir = detail::prepare_out_dir(a.out_dir);

    nlohmann::json cfg{{"command", "fit"},        {"data", a.data_path},
                       {"protocol", a.protocol.name}, {"model", a.model},
                       {"method", a.method},      {"chains", a.chains},
                       {"warmup", a.warmup},      {"draws", a.draws},
                       {"seed", a.seed},          {"alpha_levels", alphas},
                       {"truncation", a.truncation}, {"replicates", a.replicates}};
    io::write_json((dir / "config.json").string(), cfg);

    if (a.method == "nuts" || a.method == "mh") {
        auto model = detail::build_fit_model(a, proto, data);
        auto target = sampler::make_target(model);
        sampler::SamplerConfig cfg_s;
        cfg_s.chains = a.chains;
        cfg_s.warmup = a.warmup;
        cfg_s.keep = a.draws;
        cfg_s.seed = a.seed;
        auto chains = a.method == "nuts" ? sampler::hmc_nuts(target, cfg_s)
                                         : sampler::metropolis_hastings(target, cfg_s);
        auto diag = sampler::diagnostics(chains);
        auto rows = sampler::summarize(chains, alphas);
        io::write_chains_csv((dir / "chains.csv").string(), chains);
        io::write_json((dir / "diagnostics.json").string(),
                       io::diagnostics_to_json(diag, chains.names));
        io::write_json((dir / "summary.json").string(), io::summary_to_json(rows, alphas));
        detail::print_summary(out, rows, alphas);
        if (diag.divergences > 0) {
            out << "warning: " << diag.divergences << " divergent transitions\n";
            return 1;
        }
        return 0;
    }

    if (a.method == "mle" || a.method == "wlsf") {
        freq::FitOptions fo;
        fo.seed = a.seed;
        auto fit = a.method == "mle" ? freq::mle_fit(proto, data) : freq::wlsf_fit(proto, data, fo);
        nlohmann::json js{{"method", a.method},
                          {"converged", fit.converged},
                          {"boundary", fit.boundary},
                          {"loglik", fit.loglik},
                          {"message", fit.message}};
        nlohmann::json params = nlohmann::json::array();
        for (std::size_t p = 0; p < fit.names.size(); ++p)
            params.push_back({{"name", fit.names[p]}, {"estimate", fit.estimate[p]}});
        js["params"] = std::move(params);
        io::write_json((dir / "summary.json").string(), js);
        for (std::size_t p = 0; p < fit.names.size(); ++p)
            out << fit.names[p] << " " << fit.estimate[p] << "\n";
        if (!fit.converged) {
            out << "warning: fit did not converge: " << fit.message << "\n";
            return 1;
        }
        return 0;
    }

    if (a.method == "bootstrap") {
        freq::FitOptions fo;
        fo.seed = a.seed;
        auto kind = a.parametric ? freq::BootstrapKind::Parametric
                                 : freq::BootstrapKind::Nonparametric;
        auto bs = freq::bootstrap(proto, data, kind, a.replicates, a.seed, fo);
        // replicates as a CSV of refit estimates, one row per replicate
        {
            std::ofstream f(dir / "replicates.csv");
            for (std::size_t p = 0; p < bs.names.size(); ++p) f << (p ? "," : "") << bs.names[p];
            f << "\n";
            for (int i = 0; i < bs.replicates.rows(); ++i) {
                for (int p = 0; p < bs.replicates.cols(); ++p)
                    f << (p ? "," : "") << io::format_double(bs.replicates(i, p));
                f << "\n";
            }
        }
        nlohmann::json js{{"method", "bootstrap"},
                          {"requested", bs.requested},
                          {"failed", bs.failed},
                          {"alpha_levels", alphas}};
        nlohmann::json params = nlohmann::json::array();
        for (std::size_t p = 0; p < bs.names.size(); ++p) {
            nlohmann::json row{{"name", bs.names[p]}, {"estimate", bs.fit.estimate[p]}};
            nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array(),
                           os = nlohmann::json::array();
            for (double al : alphas) {
                auto [clo, chi] = bs.central(al);
                lo.push_back(clo[p]);
                hi.push_back(chi[p]);
                os.push_back(bs.one_sided(al)[p]);
            }
            row["central_lo"] = std::move(lo);
            row["central_hi"] = std::move(hi);
            row["p_alpha"] = std::move(os);
            params.push_back(std::move(row));
        }
        js["params"] = std::move(params);
        io::write_json((dir / "summary.json").string(), js);
        out << "bootstrap: " << (bs.requested - bs.failed) << "/" << bs.requested
            << " replicates\n";
        return bs.fit.converged ? 0 : 1;
    }

    throw CLI::ValidationError("unknown method '" + a.method + "'");
}

// ---- plan -----------------------------------------------------------------

struct PlanArgs {
    int moment = 1;
    // first moment: cost-weighted CRB scan
    double qbar = 0.5;
    double t = 0.5;
    double t_pick = 0.0;
    double t_flip = 1.0;
    int n_max = 200;
    // second moment: budgeted repetition count
    double budget = 8000.0;
    double tau = 0.0;
    double lower_bound = 0.0;
    std::string out_dir = ".";
};

inline int cmd_plan(const PlanArgs& a, std::ostream& out) {
    auto dir = detail::prepare_out_dir(a.out_dir);
    if (a.moment == 1) {
        design::CostModel cost{a.t_pick, a.t_flip};
        auto scan = design::wcrb_argmin(a.qbar, a.t, cost, a.n_max);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < scan.bound.size(); ++k)
            rows.push_back({double(k + 1), scan.bound[k]});
        detail::write_csv_table(dir / "wcrb.csv", {"N", "wcrb"}, rows);
        io::write_json((dir / "plan.json").string(),
                       {{"moment", 1},
                        {"n_opt", scan.n_opt},
                        {"bound", scan.bound[static_cast<std::size_t>(scan.n_opt - 1)]}});
        out << "first-moment plan: N = " << scan.n_opt << "\n";
        return 0;
    }
    if (a.moment == 2) {
        auto plan = design::optimal_N_second_moment(a.budget, a.tau, a.lower_bound);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < plan.objective.size(); ++k)
            rows.push_back({double(k + 1), plan.objective[k]});
        detail::write_csv_table(dir / "objective.csv", {"N", "objective"}, rows);
        io::write_json((dir / "plan.json").string(), {{"moment", 2},
                                                      {"n_opt", plan.n_opt},
                                                      {"coefficient", plan.coefficient},
                                                      {"budget", a.budget}});
        out << "second-moment plan: N = " << plan.n_opt
            << " (coefficient " << plan.coefficient << ")\n";
        return 0;
    }
    throw CLI::ValidationError("--moment must be 1 or 2");
}

// ---- diagnose -------------------------------------------------------------

struct DiagnoseArgs {
    std::string chains_path;
    std::string alpha_levels = "0.05";
    std::string out_dir = ".";
};

inline int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
    auto chains = io::read_chains_csv(a.chains_path);
    auto alphas = detail::parse_double_list(a.alpha_levels, "--alpha-levels");
    auto diag = sampler::diagnostics(chains);
    auto rows = sampler::summarize(chains, alphas);
    auto dir = detail::prepare_out_dir(a.out_dir);

    bool stuck = false;
    for (double r : diag.r_hat)
        if (std::isfinite(r) && r > 1.1) stuck = true;
    if (stuck) diag.notes.push_back("split R-hat above 1.1: chains have not mixed");

    io::write_json((dir / "diagnostics.json").string(),
                   io::diagnostics_to_json(diag, chains.names));
    {
        std::ofstream f(dir / "summary.csv");
        f << "name,mean,sd,r_hat,ess\n";
        for (std::size_t p = 0; p < rows.size(); ++p) {
            f << rows[p].name << "," << io::format_double(rows[p].mean) << ","
              << io::format_double(rows[p].sd) << ",";
            if (diag.r_hat_available && std::isfinite(diag.r_hat[p]))
                f << io::format_double(diag.r_hat[p]);
            f << "," << io::format_double(diag.ess[p]) << "\n";
        }
    }
    // per-(M, e) survival summaries: every cell-scoped parameter carries its
    // coordinates in its name, so the mixture-mean curve with its pointwise
    // credible envelope is recoverable from the chains alone
    {
        static const std::regex cell_re("^(.*)_M([0-9]+)_e([^_]+)$");
        std::ofstream f(dir / "survival_summary.csv");
        f << "M,e,name,mean";
        for (double al : alphas) f << ",lo_" << al << ",hi_" << al;
        f << "\n";
        for (const auto& r : rows) {
            std::smatch m;
            if (!std::regex_match(r.name, m, cell_re)) continue;
            f << m[2] << "," << m[3] << "," << r.name << "," << io::format_double(r.mean);
            for (std::size_t k = 0; k < alphas.size(); ++k)
                f << "," << io::format_double(r.central_lo[k]) << ","
                  << io::format_double(r.central_hi[k]);
            f << "\n";
        }
    }
    for (const auto& n : diag.notes) out << "note: " << n << "\n";
    out << "diagnostics written to " << dir.string() << "\n";
    return 0;
}

// ---- entry point ----------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian analysis of randomized benchmarking experiments"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "simulate a benchmarking dataset");
    s->add_option("--protocol", sim.protocol.name, "rb | irb | unitarity | dihedral | lrb");
    s->add_option("--interleave", sim.protocol.interleave, "irb: interleaved gate index");
    s->add_option("--leak-levels", sim.protocol.leak_levels, "lrb: leakage block dimension");
    s->add_option("--noise", sim.noise,
                  "none | depolarizing:s | dephasing:s | overrotation:eps | dle:l1,l2,s");
    s->add_option("--m-list", sim.m_list, "comma-separated sequence lengths");
    s->add_option("--m-max-fidelity", sim.m_max_fidelity,
                  "derive lengths up to ceil(1/(1-F)) from an expected fidelity");
    s->add_option("--m-points", sim.m_points, "number of lengths on the derived grid");
    s->add_option("-I,--sequences", sim.sequences, "random sequences per length");
    s->add_option("-N,--shots", sim.shots, "shots per sequence");
    s->add_option("--seed", sim.seed, "RNG seed");
    s->add_flag("--shuffle", sim.shuffle, "randomize record order");
    s->add_option("--nv-rates", sim.nv_rates, "alpha,beta: emit Poisson photon counts");
    s->add_option("--out-dir", sim.out_dir, "output directory");

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "fit a model to a dataset");
    f->add_option("--data", fit.data_path, "dataset (JSON lines)")->required();
    f->add_option("--protocol", fit.protocol.name, "rb | irb | unitarity | dihedral | lrb");
    f->add_option("--interleave", fit.protocol.interleave, "irb: interleaved gate index");
    f->add_option("--leak-levels", fit.protocol.leak_levels, "lrb: leakage block dimension");
    f->add_option("--model", fit.model, "beta | cdpbm | nv");
    f->add_option("--method", fit.method, "nuts | mh | mle | bootstrap | wlsf");
    f->add_option("--chains", fit.chains, "MCMC chains");
    f->add_option("--warmup", fit.warmup, "warmup iterations per chain");
    f->add_option("--draws", fit.draws, "kept draws per chain");
    f->add_option("--seed", fit.seed, "RNG seed");
    f->add_option("--alpha-levels", fit.alpha_levels, "comma-separated credibility levels");
    f->add_option("--truncation", fit.truncation, "CDPBM mixand count");
    f->add_option("--replicates", fit.replicates, "bootstrap replicates");
    f->add_flag("--parametric", fit.parametric, "parametric (refitted-model) bootstrap");
    f->add_option("--out-dir", fit.out_dir, "output directory");

    PlanArgs plan;
    auto* p = app.add_subcommand("plan", "evaluate experiment-design bounds");
    p->add_option("--moment", plan.moment, "1: decay estimation, 2: unitarity");
    p->add_option("--qbar", plan.qbar, "mean survival probability");
    p->add_option("--t", plan.t, "survival spread parameter");
    p->add_option("--t-pick", plan.t_pick, "seconds to switch sequences");
    p->add_option("--t-flip", plan.t_flip, "seconds per shot");
    p->add_option("--n-max", plan.n_max, "largest repetition count scanned");
    p->add_option("--budget", plan.budget, "total shot budget T");
    p->add_option("--tau", plan.tau, "switching cost ratio t_pick/t_flip");
    p->add_option("--lower-bound", plan.lower_bound, "prior lower bound on the mean");
    p->add_option("--out-dir", plan.out_dir, "output directory");

    DiagnoseArgs dg;
    auto* d = app.add_subcommand("diagnose", "re-analyze a chains file");
    d->add_option("--chains-file", dg.chains_path, "chains CSV")->required();
    d->add_option("--alpha-levels", dg.alpha_levels, "comma-separated credibility levels");
    d->add_option("--out-dir", dg.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    }

    try {
        if (*s) return cmd_simulate(sim, out);
        if (*f) return cmd_fit(fit, out);
        if (*p) return cmd_plan(plan, out);
        if (*d) return cmd_diagnose(dg, out);
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"rbayes"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace rbayes::cli
