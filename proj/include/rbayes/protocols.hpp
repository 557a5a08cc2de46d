#pragma once

#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbayes/ad.hpp"
#include "rbayes/qsim.hpp"

// RB+ protocol descriptions: experiment types, allowable-sequence samplers,
// sequence-length bookkeeping, and the tying functions that link survival
// moments across sequence lengths.

namespace rbayes::protocols {

using qsim::GateSet;

enum class ProtocolId { Rb, Irb, Unitarity, Dihedral, Lrb };

inline ProtocolId protocol_from_string(const std::string& s) {
    if (s == "rb") return ProtocolId::Rb;
    if (s == "irb") return ProtocolId::Irb;
    if (s == "unitarity") return ProtocolId::Unitarity;
    if (s == "dihedral") return ProtocolId::Dihedral;
    if (s == "lrb") return ProtocolId::Lrb;
    throw std::invalid_argument("unknown protocol id: " + s);
}

inline std::string protocol_to_string(ProtocolId id) {
    switch (id) {
        case ProtocolId::Rb: return "rb";
        case ProtocolId::Irb: return "irb";
        case ProtocolId::Unitarity: return "unitarity";
        case ProtocolId::Dihedral: return "dihedral";
        case ProtocolId::Lrb: return "lrb";
    }
    return "?";
}

struct ExperimentType {
    std::string label;
    int terminal = -1;   // dihedral: gate-set index of the allowed non-identity terminal
    int meas = 0;        // lrb: measurement label lambda
    int init = 0;        // lrb: initial-state index i
};

// ---- tying functions ------------------------------------------------------

template <class T>
T tying_rb(int t, double M, std::span<const T> x) {
    if (t != 1) throw std::invalid_argument("tying_rb: only first moments are tied");
    using ad::pow;
    using std::pow;
    const T &p = x[0], &a = x[1], &b = x[2];
    return (a - b) * pow(p, M) + b;
}

template <class T>
T tying_irb(int t, double M, int e_idx, std::span<const T> x) {
    if (t != 1) throw std::invalid_argument("tying_irb: only first moments are tied");
    if (e_idx != 0 && e_idx != 1) throw std::invalid_argument("tying_irb: invalid experiment type");
    using ad::pow;
    using std::pow;
    const T& pe = x[e_idx];  // (p0, pr, A, B)
    return (x[2] - x[3]) * pow(pe, M) + x[3];
}

template <class T>
T tying_unitarity(int t, double M, std::span<const T> x) {
    if (t != 2) throw std::invalid_argument("tying_unitarity: ties second moments only");
    if (M < 1) throw std::invalid_argument("tying_unitarity: M >= 1 required");
    using ad::pow;
    using std::pow;
    return x[1] + x[2] * pow(x[0], M - 1.0);  // A + B u^(M-1), x = (u, A, B)
}

template <class T>
T tying_dihedral(int t, double M, int e_idx, std::span<const T> x) {
    if (t != 1) throw std::invalid_argument("tying_dihedral: only first moments are tied");
    if (e_idx != 0 && e_idx != 1) throw std::invalid_argument("tying_dihedral: invalid experiment type");
    using ad::pow;
    using std::pow;
    // x = (pX, pZ, A, BX, BZ)
    return x[2] + x[3 + e_idx] * pow(x[e_idx], M);
}

inline constexpr double kLrbDegenerateEps = 1e-12;

// x = (L1, L2, mu1, A_l, B_l, C_{i,l}, p_i); the last block only when the
// initial-state overlaps are free parameters rather than known constants.
template <class T>
T tying_lrb(int t, double M, const T& l1, const T& l2, const T& mu1, const T& a, const T& b,
            const T& c, const T& pi) {
    if (t != 1) throw std::invalid_argument("tying_lrb: only first moments are tied");
    using ad::pow;
    using ad::value_of;
    using std::pow;
    T lsum = l1 + l2;
    T offset = value_of(lsum) > kLrbDegenerateEps ? T((l2 * a + l1 * b) / lsum) : T(0.5 * (a + b));
    T frac = value_of(lsum) > kLrbDegenerateEps ? T(l1 / lsum) : T(0.5);
    T lam1 = 1.0 - l1 - l2;
    T lam2 = mu1 * (1.0 - l1);
    return offset + (frac - pi) * (a - b) * pow(lam1, M) + (1.0 - pi) * (c - a) * pow(lam2, M);
}

// L1 = 1 - Tr[P1 E(P1/d1)], L2 = Tr[P1 E(P2/d2)]
inline std::pair<double, double> leakage_seepage(const qsim::Channel& channel, int d1, int d2) {
    if (channel.dim != d1 + d2) throw std::invalid_argument("leakage_seepage: dimension mismatch");
    int d = channel.dim;
    qsim::cmat p1 = qsim::cmat::Zero(d, d), p2 = qsim::cmat::Zero(d, d);
    p1.topLeftCorner(d1, d1).setIdentity();
    p2.bottomRightCorner(d2, d2).setIdentity();
    double l1 = 1.0 - (p1 * channel.apply(p1 / d1)).trace().real();
    double l2 = (p1 * channel.apply(p2 / d2)).trace().real();
    if (l1 < -1e-10 || l2 < -1e-10 || l1 + l2 > 1.0 + 1e-10)
        throw std::runtime_error("leakage_seepage: values outside the physical range");
    return {l1, l2};
}

// ---- protocol specification ----------------------------------------------

struct ProtocolSpec {
    ProtocolId id;
    GateSet gateset;
    std::vector<ExperimentType> etypes;

    // lrb configuration
    int d1 = 0, d2 = 0;
    bool lrb_p_free = false;            // initial-state overlaps p_i as tying parameters?
    std::vector<double> lrb_p_fixed;    // used when !lrb_p_free
    int n_init = 1;                     // number of initial states (lrb)
    int interleave_gate = -1;           // irb

    int n_experiments() const { return static_cast<int>(etypes.size()); }

    int experiment_index(const std::string& label) const {
        for (int k = 0; k < n_experiments(); ++k)
            if (etypes[k].label == label) return k;
        throw std::invalid_argument("unknown experiment type: " + label);
    }

    int seq_len(int M, int e_idx) const {
        switch (id) {
            case ProtocolId::Rb:
            case ProtocolId::Dihedral:
            case ProtocolId::Lrb:
                return M + 1;
            case ProtocolId::Irb:
                return e_idx == 0 ? M + 1 : 2 * M + 1;
            case ProtocolId::Unitarity:
                return M;
        }
        return 0;
    }

    std::vector<int> moment_orders() const {
        return id == ProtocolId::Unitarity ? std::vector<int>{2} : std::vector<int>{1};
    }

    int n_tying() const {
        switch (id) {
            case ProtocolId::Rb: return 3;
            case ProtocolId::Irb: return 4;
            case ProtocolId::Unitarity: return 3;
            case ProtocolId::Dihedral: return 5;
            case ProtocolId::Lrb:
                return 3 + 2 * d1 + n_init * d1 + (lrb_p_free ? n_init : 0);
        }
        return 0;
    }

    std::vector<std::string> tying_names() const {
        switch (id) {
            case ProtocolId::Rb: return {"p", "A", "B"};
            case ProtocolId::Irb: return {"p0", "pr", "A", "B"};
            case ProtocolId::Unitarity: return {"u", "A", "B"};
            case ProtocolId::Dihedral: return {"pX", "pZ", "A", "BX", "BZ"};
            case ProtocolId::Lrb: {
                std::vector<std::string> n{"L1", "L2", "mu1"};
                for (int l = 0; l < d1; ++l) n.push_back("A" + std::to_string(l));
                for (int l = 0; l < d1; ++l) n.push_back("B" + std::to_string(l));
                for (int i = 0; i < n_init; ++i)
                    for (int l = 0; l < d1; ++l)
                        n.push_back("C" + std::to_string(i) + std::to_string(l));
                if (lrb_p_free)
                    for (int i = 0; i < n_init; ++i) n.push_back("pinit" + std::to_string(i));
                return n;
            }
        }
        return {};
    }

    template <class T>
    T tying(int t, double M, int e_idx, std::span<const T> x) const {
        switch (id) {
            case ProtocolId::Rb: return tying_rb(t, M, x);
            case ProtocolId::Irb: return tying_irb(t, M, e_idx, x);
            case ProtocolId::Unitarity: return tying_unitarity(t, M, x);
            case ProtocolId::Dihedral: return tying_dihedral(t, M, e_idx, x);
            case ProtocolId::Lrb: {
                const ExperimentType& e = etypes.at(e_idx);
                int l = e.meas, i = e.init;
                const T& a = x[3 + l];
                const T& b = x[3 + d1 + l];
                const T& c = x[3 + 2 * d1 + i * d1 + l];
                T pi = lrb_p_free ? x[3 + 2 * d1 + n_init * d1 + i] : T(lrb_p_fixed.at(i));
                return tying_lrb(t, M, x[0], x[1], x[2], a, b, c, pi);
            }
        }
        throw std::logic_error("unreachable");
    }

    // Allowable-sequence sampler. RB-style protocols draw M uniform gates and
    // close with the group inverse (optionally composed with a random element
    // of the terminal set); unitarity draws M unconstrained gates.
    std::vector<int> sample_sequence(int M, int e_idx, std::mt19937_64& gen) const {
        if (M < 1) throw std::invalid_argument("sample_sequence: M >= 1 required");
        std::uniform_int_distribution<int> pick(0, gateset.size() - 1);
        std::vector<int> seq;
        switch (id) {
            case ProtocolId::Rb:
            case ProtocolId::Lrb: {
                seq.reserve(M + 1);
                for (int k = 0; k < M; ++k) seq.push_back(pick(gen));
                seq.push_back(gateset.inverse[gateset.compose(seq)]);
                break;
            }
            case ProtocolId::Irb: {
                if (e_idx == 0) {
                    for (int k = 0; k < M; ++k) seq.push_back(pick(gen));
                } else {
                    for (int k = 0; k < M; ++k) {
                        seq.push_back(pick(gen));
                        seq.push_back(interleave_gate);
                    }
                }
                seq.push_back(gateset.inverse[gateset.compose(seq)]);
                break;
            }
            case ProtocolId::Unitarity: {
                for (int k = 0; k < M; ++k) seq.push_back(pick(gen));
                break;
            }
            case ProtocolId::Dihedral: {
                for (int k = 0; k < M; ++k) seq.push_back(pick(gen));
                int target = std::uniform_int_distribution<int>(0, 1)(gen) == 0
                                 ? gateset.identity_index
                                 : etypes.at(e_idx).terminal;
                int inv = gateset.inverse[gateset.compose(seq)];
                seq.push_back(gateset.mult[target][inv]);  // G_final = target * prefix^-1
                break;
            }
        }
        return seq;
    }
};

// ---- standard constructions ----------------------------------------------

inline GateSet clifford_subgroup_12() {
    using qsim::cmat;
    cmat z(2, 2), h(2, 2), sz(2, 2);
    z << 1, 0, 0, -1;
    h << 1, 1, 1, -1;
    h /= std::sqrt(2.0);
    sz << 1, 0, 0, std::polar(1.0, M_PI / 2.0);
    return qsim::generate_group({qsim::Unitary(z), qsim::Unitary(cmat(sz * h))}, 64);
}

inline ProtocolSpec make_rb_protocol(GateSet gs) {
    return ProtocolSpec{ProtocolId::Rb, std::move(gs), {{"0"}}};
}

inline ProtocolSpec make_irb_protocol(GateSet gs, int interleave) {
    ProtocolSpec p{ProtocolId::Irb, std::move(gs), {{"0"}, {"r"}}};
    p.interleave_gate = interleave;
    return p;
}

inline ProtocolSpec make_unitarity_protocol(GateSet gs) {
    return ProtocolSpec{ProtocolId::Unitarity, std::move(gs), {{"0"}}};
}

inline ProtocolSpec make_dihedral_protocol(GateSet gs, int x_index, int z_index) {
    ProtocolSpec p{ProtocolId::Dihedral, std::move(gs), {}};
    p.etypes = {{"X", x_index}, {"Z", z_index}};
    return p;
}

// Qubit gate set embedded block-diagonally on a d1 + d2 space, acting as the
// identity on the leakage block.
inline GateSet embed_gateset(const GateSet& gs, int d2) {
    GateSet out = gs;
    int d = gs.dim + d2;
    out.dim = d;
    for (auto& g : out.gates) {
        qsim::cmat big = qsim::cmat::Identity(d, d);
        big.topLeftCorner(gs.dim, gs.dim) = g;
        g = qsim::phase_canonicalize(big);
    }
    return out;
}

inline ProtocolSpec make_lrb_protocol(const GateSet& qubit_gs, int d2, int n_init,
                                      bool p_free, std::vector<double> p_fixed = {}) {
    ProtocolSpec p{ProtocolId::Lrb, embed_gateset(qubit_gs, d2), {}};
    p.d1 = qubit_gs.dim;
    p.d2 = d2;
    p.n_init = n_init;
    p.lrb_p_free = p_free;
    p.lrb_p_fixed = std::move(p_fixed);
    for (int i = 0; i < n_init; ++i)
        for (int l = 0; l < p.d1; ++l) {
            ExperimentType e;
            e.label = "m" + std::to_string(l) + "i" + std::to_string(i);
            e.meas = l;
            e.init = i;
            p.etypes.push_back(e);
        }
    return p;
}

}  // namespace rbayes::protocols
