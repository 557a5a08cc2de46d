#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <thread>
#include <vector>

#include "rbayes/protocols.hpp"
#include "rbayes/rng.hpp"

// Dataset simulation and the exhaustive survival-distribution oracle.

namespace rbayes::qsim {

struct NvCounts {
    long x = 0, y = 0, z = 0;
};

struct DatasetRecord {
    int M = 0;
    std::string e;
    int i = 0;
    int N = 0;
    int Q = 0;
    std::optional<NvCounts> nv;
};

inline int worker_count() {
    if (const char* env = std::getenv("RBAYES_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

struct SimulateOptions {
    NoiseOrder order = NoiseOrder::AfterGate;
    int burn_in_gates = 0;  // random gates prepended to redefine the initial state
    // NV-mode Poisson observation; when set, records carry (X, Y, Z) counts
    std::optional<std::pair<double, double>> nv_rates;  // (alpha, beta), alpha < beta
    bool shuffle = false;   // randomize record order as done experimentally
};

// One record per (M, e, i): draw an allowable sequence, compute its survival
// probability, then draw Q ~ Binomial(N, q). Each record uses its own RNG
// stream derived from the seed, so results are reproducible independently of
// the evaluation order or worker count.
inline std::vector<DatasetRecord> simulate_dataset(
    const protocols::ProtocolSpec& protocol, const NoiseModel& noise,
    const std::map<std::string, SpamConfig>& spam_per_e, const std::vector<int>& m_list,
    int sequences_per_length, int shots, std::uint64_t seed, SimulateOptions opts = {}) {
    if (m_list.empty() || sequences_per_length < 1 || shots < 1)
        throw std::invalid_argument("simulate_dataset: need nonempty M list, I >= 1, N >= 1");

    std::vector<cmat> noisy;
    if (noise.kind != NoiseKind::PositionDependent)
        noisy = noisy_gate_superops(protocol.gateset, noise, opts.order);

    struct Job { int M; int e_idx; int i; std::uint64_t stream; };
    std::vector<Job> jobs;
    std::uint64_t stream = 0;
    for (int m : m_list)
        for (int e = 0; e < protocol.n_experiments(); ++e)
            for (int i = 0; i < sequences_per_length; ++i)
                jobs.push_back({m, e, i, stream++});

    std::vector<DatasetRecord> records(jobs.size());
    auto run = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) {
            const Job& job = jobs[j];
            auto gen = rng::engine_for(seed, job.stream);
            std::vector<int> seq = protocol.sample_sequence(job.M, job.e_idx, gen);
            if (opts.burn_in_gates > 0) {
                std::uniform_int_distribution<int> pick(0, protocol.gateset.size() - 1);
                std::vector<int> burn(opts.burn_in_gates);
                for (auto& g : burn) g = pick(gen);
                seq.insert(seq.begin(), burn.begin(), burn.end());
            }
            const SpamConfig& spam = spam_per_e.at(protocol.etypes[job.e_idx].label);
            double q;
            if (noisy.empty()) {
                q = survival_probability(seq, protocol.gateset, noise, spam, opts.order);
            } else {
                cvec state = vectorize(spam.rho);
                for (int r : seq) state = noisy[r] * state;
                q = finalize_survival((spam.effect.adjoint() * unvectorize(state, protocol.gateset.dim)).trace());
            }
            DatasetRecord rec;
            rec.M = job.M;
            rec.e = protocol.etypes[job.e_idx].label;
            rec.i = job.i;
            rec.N = shots;
            if (opts.nv_rates) {
                auto [alpha, beta] = *opts.nv_rates;
                NvCounts nv;
                nv.x = std::poisson_distribution<long>(alpha)(gen);
                nv.y = std::poisson_distribution<long>(beta)(gen);
                nv.z = std::poisson_distribution<long>(beta + (alpha - beta) * q)(gen);
                rec.nv = nv;
            } else {
                rec.Q = std::binomial_distribution<int>(shots, q)(gen);
            }
            records[j] = std::move(rec);
        }
    };

    int workers = std::min<int>(worker_count(), static_cast<int>(jobs.size()));
    if (workers <= 1) {
        run(0, jobs.size());
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (jobs.size() + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            std::size_t lo = w * chunk, hi = std::min(jobs.size(), lo + chunk);
            if (lo < hi) pool.emplace_back(run, lo, hi);
        }
        for (auto& t : pool) t.join();
    }

    if (opts.shuffle) {
        auto gen = rng::engine_for(seed, 0xfffffffful);
        std::shuffle(records.begin(), records.end(), gen);
    }
    return records;
}

struct SurvivalAtom {
    double q;
    double prob;
};

// Exact atoms and weights of the survival distribution S_{M,e}, found by
// exhaustive enumeration of the allowable sequences. Serves as the
// brute-force oracle for survival moments.
inline std::vector<SurvivalAtom> enumerate_survival_distribution(
    const protocols::ProtocolSpec& protocol, const NoiseModel& noise, const SpamConfig& spam,
    int M, int e_idx, NoiseOrder order = NoiseOrder::AfterGate, std::size_t cap = 1000000) {
    using protocols::ProtocolId;
    const GateSet& gs = protocol.gateset;
    const int r = gs.size();

    // count allowable sequences: the free positions are the M random slots
    double count = std::pow(static_cast<double>(r), M);
    if (protocol.id == ProtocolId::Dihedral) count *= 2.0;
    if (count > static_cast<double>(cap))
        throw std::runtime_error(
            "enumerate_survival_distribution: allowable-sequence count exceeds the enumeration "
            "cap; estimate moments by Monte Carlo instead");

    std::vector<cmat> noisy;
    std::function<cvec(const cvec&, int, int)> step;
    if (noise.kind == NoiseKind::PositionDependent) {
        step = [&](const cvec& s, int gate, int pos) {
            cmat g = conjugation_channel(gs.gates[gate]).superop;
            cmat e = noise.assign(gate, pos).superop;
            return order == NoiseOrder::BeforeGate ? cvec(g * (e * s)) : cvec(e * (g * s));
        };
    } else {
        noisy = noisy_gate_superops(gs, noise, order);
        step = [&](const cvec& s, int gate, int) { return cvec(noisy[gate] * s); };
    }

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(count));
    cvec init = vectorize(spam.rho);
    auto survival_of = [&](const cvec& state) {
        return finalize_survival((spam.effect.adjoint() * unvectorize(state, gs.dim)).trace());
    };

    // depth-first over the M free slots, sharing prefixes
    std::function<void(const cvec&, int, int)> recurse = [&](const cvec& state, int depth, int comp) {
        if (depth == M) {
            switch (protocol.id) {
                case ProtocolId::Rb:
                case ProtocolId::Lrb: {
                    int inv = gs.inverse[comp];
                    values.push_back(survival_of(step(state, inv, M)));
                    break;
                }
                case ProtocolId::Irb: {
                    int inv = gs.inverse[comp];
                    values.push_back(survival_of(step(state, inv, 2 * M)));
                    break;
                }
                case ProtocolId::Unitarity:
                    values.push_back(survival_of(state));
                    break;
                case ProtocolId::Dihedral: {
                    for (int target : {gs.identity_index, protocol.etypes[e_idx].terminal}) {
                        int fin = gs.mult[target][gs.inverse[comp]];
                        values.push_back(survival_of(step(state, fin, M)));
                    }
                    break;
                }
            }
            return;
        }
        for (int g = 0; g < r; ++g) {
            cvec next = step(state, g, protocol.id == ProtocolId::Irb && e_idx == 1 ? 2 * depth : depth);
            int comp_next = gs.mult[g][comp];
            if (protocol.id == ProtocolId::Irb && e_idx == 1) {
                next = step(next, protocol.interleave_gate, 2 * depth + 1);
                comp_next = gs.mult[protocol.interleave_gate][comp_next];
            }
            recurse(next, depth + 1, comp_next);
        }
    };
    recurse(init, 0, gs.identity_index);

    std::sort(values.begin(), values.end());
    std::vector<SurvivalAtom> atoms;
    double w = 1.0 / static_cast<double>(values.size());
    for (double v : values) {
        if (!atoms.empty() && v - atoms.back().q < 1e-12)
            atoms.back().prob += w;
        else
            atoms.push_back({v, w});
    }
    return atoms;
}

inline double survival_moment(const std::vector<SurvivalAtom>& atoms, int order) {
    double out = 0.0;
    for (const auto& a : atoms) out += a.prob * std::pow(a.q, order);
    return out;
}

}  // namespace rbayes::qsim
