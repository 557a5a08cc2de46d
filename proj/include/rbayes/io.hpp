#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "rbayes/sampler.hpp"
#include "rbayes/simulate.hpp"

// File formats for the command-line workflows: datasets as JSON lines (one
// record per line), posterior chains as CSV, summaries and diagnostics as
// JSON. All writers are deterministic, so a fixed config and seed reproduce
// output files byte for byte.

namespace rbayes::io {

// doubles are written with enough digits to round-trip exactly
inline std::string format_double(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

// ---- datasets (JSON lines) ------------------------------------------------

inline nlohmann::json record_to_json(const qsim::DatasetRecord& rec) {
    nlohmann::json j{{"M", rec.M}, {"e", rec.e}, {"i", rec.i}, {"N", rec.N}, {"Q", rec.Q}};
    if (rec.nv) {
        j["x"] = rec.nv->x;
        j["y"] = rec.nv->y;
        j["z"] = rec.nv->z;
    }
    return j;
}

inline qsim::DatasetRecord record_from_json(const nlohmann::json& j) {
    qsim::DatasetRecord rec;
    rec.M = j.at("M").get<int>();
    rec.e = j.at("e").get<std::string>();
    rec.i = j.at("i").get<int>();
    rec.N = j.at("N").get<int>();
    rec.Q = j.at("Q").get<int>();
    if (j.contains("x"))
        rec.nv = qsim::NvCounts{j.at("x").get<long>(), j.at("y").get<long>(),
                                j.at("z").get<long>()};
    return rec;
}

inline void write_dataset(const std::string& path,
                          const std::vector<qsim::DatasetRecord>& records) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& rec : records) f << record_to_json(rec).dump() << "\n";
}

inline std::vector<qsim::DatasetRecord> read_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open dataset: " + path);
    std::vector<qsim::DatasetRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": not a JSON record");
        records.push_back(record_from_json(j));
    }
    return records;
}

// ---- chains (CSV) ---------------------------------------------------------

inline void write_chains_csv(const std::string& path, const sampler::PosteriorChains& ch) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "chain,draw";
    for (int p = 0; p < ch.n_params(); ++p)
        f << "," << (p < static_cast<int>(ch.names.size()) ? ch.names[p]
                                                           : "param" + std::to_string(p));
    f << "\n";
    for (int c = 0; c < ch.n_chains(); ++c)
        for (int i = 0; i < ch.n_draws(); ++i) {
            f << c << "," << i;
            for (int p = 0; p < ch.n_params(); ++p)
                f << "," << format_double(ch.draws[static_cast<std::size_t>(c)](i, p));
            f << "\n";
        }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

inline sampler::PosteriorChains read_chains_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open chains file: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path + ": empty chains file");
    auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "chain" || header[1] != "draw")
        throw std::runtime_error(path + ": header must start with chain,draw");
    const int n_params = static_cast<int>(header.size()) - 2;

    sampler::PosteriorChains ch;
    ch.names.assign(header.begin() + 2, header.end());
    std::vector<std::vector<std::vector<double>>> rows;  // per chain, per draw
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (static_cast<int>(fields.size()) != n_params + 2)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": wrong field count");
        try {
            std::size_t c = std::stoul(fields[0]);
            if (c >= rows.size()) rows.resize(c + 1);
            std::vector<double> draw(static_cast<std::size_t>(n_params));
            for (int p = 0; p < n_params; ++p)
                draw[static_cast<std::size_t>(p)] = std::stod(fields[static_cast<std::size_t>(p) + 2]);
            rows[c].push_back(std::move(draw));
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed numeric field");
        }
    }
    if (rows.empty()) throw std::runtime_error(path + ": no draws");
    for (const auto& chain : rows) {
        if (chain.empty() || chain.size() != rows[0].size())
            throw std::runtime_error(path + ": chains have unequal lengths");
        Eigen::MatrixXd m(static_cast<long>(chain.size()), n_params);
        for (std::size_t i = 0; i < chain.size(); ++i)
            for (int p = 0; p < n_params; ++p) m(static_cast<long>(i), p) = chain[i][static_cast<std::size_t>(p)];
        ch.draws.push_back(std::move(m));
    }
    ch.accept_rate.assign(ch.draws.size(), 0.0);
    ch.divergences.assign(ch.draws.size(), 0);
    return ch;
}

// ---- summaries and diagnostics (JSON) -------------------------------------

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

inline nlohmann::json summary_to_json(const std::vector<sampler::SummaryRow>& rows,
                                      const std::vector<double>& alpha_levels) {
    nlohmann::json out;
    out["alpha_levels"] = alpha_levels;
    nlohmann::json params = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json p{{"name", r.name}, {"mean", r.mean}, {"sd", r.sd}};
        p["central_lo"] = r.central_lo;
        p["central_hi"] = r.central_hi;
        p["p_alpha"] = r.one_sided;
        params.push_back(std::move(p));
    }
    out["params"] = std::move(params);
    return out;
}

inline nlohmann::json diagnostics_to_json(const sampler::Diagnostics& d,
                                          const std::vector<std::string>& names) {
    nlohmann::json out;
    out["divergences"] = d.divergences;
    out["r_hat_available"] = d.r_hat_available;
    out["notes"] = d.notes;
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t p = 0; p < d.ess.size(); ++p) {
        nlohmann::json row;
        row["name"] = p < names.size() ? names[p] : "param" + std::to_string(p);
        row["ess"] = d.ess[p];
        if (d.r_hat_available && std::isfinite(d.r_hat[p])) row["r_hat"] = d.r_hat[p];
        params.push_back(std::move(row));
    }
    out["params"] = std::move(params);
    return out;
}

}  // namespace rbayes::io
