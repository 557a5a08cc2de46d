#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Gates, noise channels, and survival probabilities. Channels are stored as
// d^2 x d^2 superoperators acting on column-vectorized density operators:
// vec(A rho B) = (B^T kron A) vec(rho).

namespace rbayes::qsim {

using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using cd = std::complex<double>;

inline cmat kron(const cmat& a, const cmat& b) {
    cmat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline cvec vectorize(const cmat& m) { return Eigen::Map<const cvec>(m.data(), m.size()); }
inline cmat unvectorize(const cvec& v, int d) { return Eigen::Map<const cmat>(v.data(), d, d); }

// Canonical global phase: the first nonzero entry in row-major scan order is
// made real and positive, so equality-up-to-phase becomes plain equality.
inline cmat phase_canonicalize(const cmat& m, double tol = 1e-10) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (std::abs(m(i, j)) > tol) {
                cd phase = m(i, j) / std::abs(m(i, j));
                return m / phase;
            }
    return m;
}

struct Unitary {
    cmat matrix;

    explicit Unitary(cmat m) : matrix(std::move(m)) {
        if (matrix.rows() != matrix.cols()) throw std::invalid_argument("Unitary: matrix not square");
        cmat err = matrix.adjoint() * matrix - cmat::Identity(matrix.rows(), matrix.cols());
        if (err.cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("Unitary: U^dag U != I beyond 1e-12");
    }
    int dim() const { return static_cast<int>(matrix.rows()); }
};

struct Channel {
    cmat superop;
    int dim;

    Channel() : dim(0) {}
    Channel(cmat s, int d) : superop(std::move(s)), dim(d) {
        if (superop.rows() != d * d || superop.cols() != d * d)
            throw std::invalid_argument("Channel: superoperator must be d^2 x d^2");
    }

    cmat apply(const cmat& rho) const { return unvectorize(superop * vectorize(rho), dim); }

    // max deviation of Tr[Lambda(rho)] from Tr[rho] over all rho
    double trace_preservation_defect() const {
        cvec t = vectorize(cmat::Identity(dim, dim));
        return (superop.adjoint() * t - t).cwiseAbs().maxCoeff();
    }

    cmat choi() const {
        cmat c = cmat::Zero(dim * dim, dim * dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) {
                cmat eij = cmat::Zero(dim, dim);
                eij(i, j) = 1.0;
                c.block(i * dim, j * dim, dim, dim) = apply(eij);
            }
        return c;
    }

    double choi_min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<cmat> es(choi());
        return es.eigenvalues().minCoeff();
    }
};

inline Channel identity_channel(int d) { return Channel(cmat::Identity(d * d, d * d), d); }

inline Channel conjugation_channel(const cmat& u) {
    int d = static_cast<int>(u.rows());
    return Channel(kron(u.conjugate(), u), d);
}

// rho -> (1-s) rho + s Tr[rho] I/d
inline Channel depolarizing_channel(double s, int d = 2) {
    if (s < 0.0 || s > 1.0) throw std::invalid_argument("depolarizing: s outside [0,1]");
    cvec t = vectorize(cmat::Identity(d, d));
    cmat sup = (1.0 - s) * cmat::Identity(d * d, d * d) + (s / d) * (t * t.adjoint());
    return Channel(sup, d);
}

// rho -> (1-s) rho + s Z rho Z  (qubit)
inline Channel dephasing_channel(double s) {
    if (s < 0.0 || s > 1.0) throw std::invalid_argument("dephasing: s outside [0,1]");
    cmat z(2, 2);
    z << 1, 0, 0, -1;
    cmat sup = (1.0 - s) * cmat::Identity(4, 4) + s * conjugation_channel(z).superop;
    return Channel(sup, 2);
}

inline bool is_z_rotation(const cmat& u, double tol = 1e-10) {
    if (u.rows() != 2) return false;
    return std::abs(u(0, 1)) < tol && std::abs(u(1, 0)) < tol;
}

inline cmat matrix_power_frac(const cmat& u, double eps) {
    // principal branch via unitary eigendecomposition
    Eigen::ComplexEigenSolver<cmat> es(u);
    cmat v = es.eigenvectors();
    cvec lam = es.eigenvalues();
    cvec lam_eps(lam.size());
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
        double theta = std::arg(lam(k));
        lam_eps(k) = std::polar(1.0, eps * theta);
    }
    return v * lam_eps.asDiagonal() * v.adjoint();
}

// Transverse overrotation Theta[U, eps]: identity when U is a z-rotation,
// otherwise conjugation by U^eps.
inline Channel overrotation_channel(const cmat& u, double eps, bool z_exempt = true) {
    int d = static_cast<int>(u.rows());
    if (z_exempt && is_z_rotation(u)) return identity_channel(d);
    return conjugation_channel(matrix_power_frac(u, eps));
}

// rho -> Tr[rho] (p1 |psi><psi| + p2 I/2) + (1 - p1 - p2) rho
inline Channel reset_mixture_channel(double p1, double p2, const cvec& psi) {
    if (p1 < 0.0 || p2 < 0.0 || p1 + p2 > 1.0)
        throw std::invalid_argument("reset_mixture: require p1, p2 >= 0 and p1 + p2 <= 1");
    if (std::abs(psi.norm() - 1.0) > 1e-12) throw std::invalid_argument("reset_mixture: psi not normalized");
    int d = static_cast<int>(psi.size());
    cmat target = p1 * (psi * psi.adjoint()) + (p2 / d) * cmat::Identity(d, d);
    cvec t = vectorize(cmat::Identity(d, d));
    cmat sup = (1.0 - p1 - p2) * cmat::Identity(d * d, d * d) + vectorize(target) * t.adjoint();
    return Channel(sup, d);
}

// Depolarizing leakage extension: lifts a channel on the computational block
// X1 (dim d1) to X1 + X2 with leakage L1 and seepage L2. Coherences between
// the blocks and within X2 are discarded; leaked/seeped population lands on
// the maximally mixed state of the destination block.
inline Channel dle_channel(const Channel& base, double l1, double l2, int d2) {
    if (l1 < 0.0 || l2 < 0.0 || l1 + l2 > 1.0)
        throw std::invalid_argument("dle: require L1, L2 >= 0 and L1 + L2 <= 1");
    int d1 = base.dim;
    int d = d1 + d2;
    cmat p1 = cmat::Zero(d, d), p2 = cmat::Zero(d, d);
    p1.topLeftCorner(d1, d1).setIdentity();
    p2.bottomRightCorner(d2, d2).setIdentity();
    cmat sup = cmat::Zero(d * d, d * d);
    // (1 - L1) E1 on the X1 block
    for (int i = 0; i < d1; ++i)
        for (int j = 0; j < d1; ++j) {
            cmat eij = cmat::Zero(d, d);
            eij(i, j) = 1.0;
            cmat out = cmat::Zero(d, d);
            out.topLeftCorner(d1, d1) = base.apply(eij.topLeftCorner(d1, d1));
            sup.col(i + d * j) += (1.0 - l1) * vectorize(out);
        }
    cvec t1(d * d), t2(d * d);
    t1 = vectorize(p1);
    t2 = vectorize(p2);
    cvec mix1 = vectorize(cmat(p1 / d1)), mix2 = vectorize(cmat(p2 / d2));
    sup += l1 * mix2 * t1.adjoint();            // leakage X1 -> X2
    sup += l2 * mix1 * t2.adjoint();            // seepage X2 -> X1
    sup += (1.0 - l2) * mix2 * t2.adjoint();    // remainder stays in X2
    return Channel(sup, d);
}

struct SpamConfig {
    cmat rho;
    cmat effect;

    void validate() const {
        if (std::abs(rho.trace().real() - 1.0) > 1e-12 || std::abs(rho.trace().imag()) > 1e-12)
            throw std::invalid_argument("SpamConfig: Tr[rho] != 1");
        Eigen::SelfAdjointEigenSolver<cmat> er(rho);
        if (er.eigenvalues().minCoeff() < -1e-12) throw std::invalid_argument("SpamConfig: rho not PSD");
        Eigen::SelfAdjointEigenSolver<cmat> ee(effect);
        if (ee.eigenvalues().minCoeff() < -1e-12 || ee.eigenvalues().maxCoeff() > 1.0 + 1e-12)
            throw std::invalid_argument("SpamConfig: effect eigenvalues outside [0,1]");
    }
};

struct GateSet {
    std::vector<cmat> gates;            // phase-canonicalized
    std::vector<std::vector<int>> mult; // mult[a][b] = index of G_a * G_b
    std::vector<int> inverse;
    int identity_index = -1;
    int dim = 0;

    int size() const { return static_cast<int>(gates.size()); }

    int find(const cmat& m, double tol = 1e-10) const {
        cmat c = phase_canonicalize(m, tol);
        for (int k = 0; k < size(); ++k)
            if ((gates[k] - c).cwiseAbs().maxCoeff() < tol) return k;
        return -1;
    }

    // index of the product of a gate-index sequence (applied left to right)
    int compose(const std::vector<int>& seq) const {
        int acc = identity_index;
        for (int j : seq) acc = mult[j][acc];  // G_j acts after the accumulated prefix
        return acc;
    }
};

// Closure of the generators under multiplication modulo global phase,
// breadth-first, deterministic ordering.
inline GateSet generate_group(const std::vector<Unitary>& generators, int max_size = 4096) {
    if (generators.empty()) throw std::invalid_argument("generate_group: no generators");
    int d = generators[0].dim();
    GateSet gs;
    gs.dim = d;
    for (const auto& g : generators) {
        if (g.dim() != d) throw std::invalid_argument("generate_group: dimension mismatch");
        cmat c = phase_canonicalize(g.matrix);
        if (gs.find(c) < 0) gs.gates.push_back(c);
    }
    for (std::size_t a = 0; a < gs.gates.size(); ++a) {
        for (const auto& g : generators) {
            cmat prod = phase_canonicalize(gs.gates[a] * g.matrix);
            if (gs.find(prod) < 0) {
                gs.gates.push_back(prod);
                if (static_cast<int>(gs.gates.size()) > max_size)
                    throw std::runtime_error("generate_group: group too large");
            }
        }
    }
    int r = gs.size();
    gs.mult.assign(r, std::vector<int>(r, -1));
    for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) {
            int k = gs.find(gs.gates[a] * gs.gates[b]);
            if (k < 0) throw std::runtime_error("generate_group: set not closed under composition");
            gs.mult[a][b] = k;
        }
    gs.identity_index = gs.find(cmat::Identity(d, d));
    if (gs.identity_index < 0) throw std::runtime_error("generate_group: identity not in closure");
    gs.inverse.assign(r, -1);
    for (int a = 0; a < r; ++a) {
        for (int b = 0; b < r; ++b)
            if (gs.mult[a][b] == gs.identity_index) { gs.inverse[a] = b; break; }
        if (gs.inverse[a] < 0) throw std::runtime_error("generate_group: element without inverse");
    }
    return gs;
}

enum class NoiseKind { GateIndependent, GateDependent, PositionDependent };

// Whether the noise channel acts before or after the ideal gate in each
// imperfect gate. The default, AfterGate, realizes the composition
// E o G (gate first, then its noise); all the reference decay-base values are
// invariant under this choice.
enum class NoiseOrder { BeforeGate, AfterGate };

struct NoiseModel {
    NoiseKind kind;
    std::function<Channel(int r, int k)> assign;  // gate index r (0-based), position k (0-based)

    static NoiseModel gate_independent(Channel e) {
        return {NoiseKind::GateIndependent, [e = std::move(e)](int, int) { return e; }};
    }
    static NoiseModel gate_dependent(std::vector<Channel> per_gate) {
        return {NoiseKind::GateDependent,
                [v = std::move(per_gate)](int r, int) { return v.at(r); }};
    }
    static NoiseModel position_dependent(std::function<Channel(int, int)> f) {
        return {NoiseKind::PositionDependent, std::move(f)};
    }
};

// Per-gate noisy superoperators; valid when noise is not position dependent.
inline std::vector<cmat> noisy_gate_superops(const GateSet& gs, const NoiseModel& noise,
                                             NoiseOrder order) {
    std::vector<cmat> out(gs.size());
    for (int r = 0; r < gs.size(); ++r) {
        cmat g = conjugation_channel(gs.gates[r]).superop;
        cmat e = noise.assign(r, 0).superop;
        out[r] = (order == NoiseOrder::BeforeGate) ? cmat(g * e) : cmat(e * g);
    }
    return out;
}

inline double finalize_survival(std::complex<double> val) {
    double p = val.real();
    if (p < -1e-9 || p > 1.0 + 1e-9)
        throw std::runtime_error("survival probability outside [0,1] beyond tolerance: " + std::to_string(p));
    return std::clamp(p, 0.0, 1.0);
}

inline double survival_probability(const std::vector<int>& seq, const GateSet& gs,
                                   const NoiseModel& noise, const SpamConfig& spam,
                                   NoiseOrder order = NoiseOrder::AfterGate) {
    int d = gs.dim;
    cvec state = vectorize(spam.rho);
    if (noise.kind == NoiseKind::PositionDependent) {
        for (std::size_t k = 0; k < seq.size(); ++k) {
            int r = seq[k];
            cmat g = conjugation_channel(gs.gates[r]).superop;
            cmat e = noise.assign(r, static_cast<int>(k)).superop;
            state = (order == NoiseOrder::BeforeGate) ? cvec(g * (e * state)) : cvec(e * (g * state));
        }
    } else {
        auto noisy = noisy_gate_superops(gs, noise, order);
        for (int r : seq) state = noisy[r] * state;
    }
    cmat out = unvectorize(state, d);
    return finalize_survival((spam.effect.adjoint() * out).trace());
}

}  // namespace rbayes::qsim
