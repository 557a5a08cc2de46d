#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "rbayes/qsim.hpp"

using namespace rbayes::qsim;

namespace {

cmat pauli_x() {
    cmat x(2, 2);
    x << 0, 1, 1, 0;
    return x;
}

cmat pauli_z() {
    cmat z(2, 2);
    z << 1, 0, 0, -1;
    return z;
}

cmat hadamard() {
    cmat h(2, 2);
    h << 1, 1, 1, -1;
    return h / std::sqrt(2.0);
}

cmat ket0_proj() {
    cmat p = cmat::Zero(2, 2);
    p(0, 0) = 1.0;
    return p;
}

cmat random_density(std::mt19937_64& gen, int d) {
    std::normal_distribution<double> n(0.0, 1.0);
    cmat a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = cd(n(gen), n(gen));
    cmat rho = a * a.adjoint();
    return rho / rho.trace();
}

void check_cptp(const Channel& ch) {
    CHECK(ch.trace_preservation_defect() < 1e-12);
    CHECK(ch.choi_min_eigenvalue() > -1e-12);
}

}  // namespace

TEST_CASE("vectorization identity vec(A rho B) = (B^T kron A) vec(rho)") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> n(0.0, 1.0);
    auto rand_mat = [&](int d) {
        cmat m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = cd(n(gen), n(gen));
        return m;
    };
    for (int d : {2, 3}) {
        cmat a = rand_mat(d), b = rand_mat(d), rho = rand_mat(d);
        cvec lhs = vectorize(cmat(a * rho * b));
        cvec rhs = kron(b.transpose(), a) * vectorize(rho);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((unvectorize(vectorize(rho), d) - rho).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("phase canonicalization removes global phase") {
    cmat h = hadamard();
    cmat rotated = std::polar(1.0, 1.234) * h;
    CHECK((phase_canonicalize(rotated) - phase_canonicalize(h)).cwiseAbs().maxCoeff() < 1e-12);
    cmat c = phase_canonicalize(rotated);
    CHECK(c(0, 0).imag() == Catch::Approx(0.0).margin(1e-14));
    CHECK(c(0, 0).real() > 0.0);
    CHECK((phase_canonicalize(c) - c).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("depolarizing channel limits") {
    std::mt19937_64 gen(9);
    cmat rho = random_density(gen, 2);

    Channel none = depolarizing_channel(0.0);
    CHECK((none.apply(rho) - rho).cwiseAbs().maxCoeff() < 1e-14);

    Channel full = depolarizing_channel(1.0);
    CHECK((full.apply(rho) - cmat::Identity(2, 2) / 2.0).cwiseAbs().maxCoeff() < 1e-14);

    for (double s : {0.0002, 0.1, 0.5, 1.0}) check_cptp(depolarizing_channel(s));
    CHECK_THROWS_AS(depolarizing_channel(-0.1), std::invalid_argument);
}

TEST_CASE("dephasing channel is CPTP and kills coherences at s = 1/2") {
    for (double s : {0.003, 0.25, 0.5}) check_cptp(dephasing_channel(s));
    std::mt19937_64 gen(13);
    cmat rho = random_density(gen, 2);
    cmat out = dephasing_channel(0.5).apply(rho);
    CHECK(std::abs(out(0, 1)) < 1e-14);
    CHECK(std::abs(out(0, 0) - rho(0, 0)) < 1e-14);
}

TEST_CASE("reset mixture: CPTP and the pathological decay base") {
    // psi = e^{-i 0.05 (X + Y)} |0>
    double th = 0.05;
    cmat xy = pauli_x();
    cmat y(2, 2);
    y << 0, cd(0, -1), cd(0, 1), 0;
    xy += y;
    Eigen::SelfAdjointEigenSolver<cmat> es(xy);
    cvec phases(2);
    for (int k = 0; k < 2; ++k) phases(k) = std::polar(1.0, -th * es.eigenvalues()(k));
    cmat u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    cvec psi = u.col(0);

    Channel reset = reset_mixture_channel(0.9, 0.001, psi);
    check_cptp(reset);

    // unital-twirl decay base (Tr S - 1)/(d^2 - 1) = 1 - p1 - p2
    double p = (reset.superop.trace().real() - 1.0) / 3.0;
    CHECK(p == Catch::Approx(0.099).epsilon(1e-12));

    CHECK_THROWS_AS(reset_mixture_channel(0.9, 0.2, psi), std::invalid_argument);
}

TEST_CASE("overrotation channel") {
    // z-rotations are exempt
    cmat sz(2, 2);
    sz << 1, 0, 0, cd(0, 1);
    CHECK(is_z_rotation(sz));
    Channel exempt = overrotation_channel(sz, 0.3);
    CHECK((exempt.superop - cmat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-14);

    // fractional powers: U^1 = U, U^0 = I, (U^(1/2))^2 = U
    cmat h = hadamard();
    CHECK(!is_z_rotation(h));
    CHECK((matrix_power_frac(h, 1.0) - h).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((matrix_power_frac(h, 0.0) - cmat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    cmat r = matrix_power_frac(h, 0.5);
    CHECK((r * r - h).cwiseAbs().maxCoeff() < 1e-12);

    check_cptp(overrotation_channel(h, 0.11132));
}

TEST_CASE("depolarizing leakage extension is CPTP with the specified population flow") {
    Channel base = dephasing_channel(0.003);
    Channel dle = dle_channel(base, 0.001, 0.0015, 1);
    REQUIRE(dle.dim == 3);
    check_cptp(dle);

    // population starting in X1 leaks at rate L1
    std::mt19937_64 gen(21);
    cmat rho1 = cmat::Zero(3, 3);
    rho1.topLeftCorner(2, 2) = random_density(gen, 2);
    cmat out1 = dle.apply(rho1);
    CHECK(out1(2, 2).real() == Catch::Approx(0.001).epsilon(1e-12));

    // population starting in X2 seeps at rate L2
    cmat rho2 = cmat::Zero(3, 3);
    rho2(2, 2) = 1.0;
    cmat out2 = dle.apply(rho2);
    CHECK((out2(0, 0) + out2(1, 1)).real() == Catch::Approx(0.0015).epsilon(1e-12));

    CHECK_THROWS_AS(dle_channel(base, 0.7, 0.5, 1), std::invalid_argument);
}

TEST_CASE("spam validation") {
    SpamConfig good{ket0_proj(), 0.99 * ket0_proj()};
    CHECK_NOTHROW(good.validate());
    SpamConfig bad_trace{2.0 * ket0_proj(), ket0_proj()};
    CHECK_THROWS_AS(bad_trace.validate(), std::invalid_argument);
    SpamConfig bad_effect{ket0_proj(), 1.5 * ket0_proj()};
    CHECK_THROWS_AS(bad_effect.validate(), std::invalid_argument);
}

TEST_CASE("group generation") {
    GateSet trivial = generate_group({Unitary(cmat::Identity(2, 2))});
    CHECK(trivial.size() == 1);
    CHECK(trivial.identity_index == 0);

    GateSet x2 = generate_group({Unitary(pauli_x())});
    CHECK(x2.size() == 2);
    CHECK(x2.mult[x2.find(pauli_x())][x2.find(pauli_x())] == x2.identity_index);

    // multiplication table consistency and inverses
    for (int a = 0; a < x2.size(); ++a) {
        CHECK(x2.mult[x2.identity_index][a] == a);
        CHECK(x2.mult[a][x2.inverse[a]] == x2.identity_index);
    }

    // compose applies gates left to right: index of G_b G_a for sequence {a, b}
    GateSet hz = generate_group({Unitary(hadamard()), Unitary(pauli_z())});
    std::mt19937_64 gen(31);
    std::uniform_int_distribution<int> pick(0, hz.size() - 1);
    for (int rep = 0; rep < 50; ++rep) {
        int a = pick(gen), b = pick(gen);
        int composed = hz.compose({a, b});
        CHECK(composed == hz.find(cmat(hz.gates[b] * hz.gates[a])));
    }

    CHECK_THROWS_AS(generate_group({Unitary(hadamard()), Unitary(pauli_z())}, 3), std::runtime_error);
}

TEST_CASE("survival probabilities") {
    GateSet gs = generate_group({Unitary(pauli_x())});
    SpamConfig spam{ket0_proj(), ket0_proj()};
    int xi = gs.find(pauli_x());

    // noiseless identity-composing sequence returns Tr[E rho] = 1
    NoiseModel none = NoiseModel::gate_independent(identity_channel(2));
    CHECK(survival_probability({xi, xi, xi, xi}, gs, none, spam) == Catch::Approx(1.0));

    // gate-independent depolarizing closed form, length M + 1 = 4
    double s = 0.05;
    NoiseModel dep = NoiseModel::gate_independent(depolarizing_channel(s));
    double expect = std::pow(1.0 - s, 4) * 1.0 + (1.0 - std::pow(1.0 - s, 4)) * 0.5;
    CHECK(survival_probability({xi, xi, xi, xi}, gs, dep, spam) == Catch::Approx(expect).epsilon(1e-12));

    // noise order: BeforeGate and AfterGate agree for gate-independent depolarizing
    CHECK(survival_probability({xi, xi, xi, xi}, gs, dep, spam, NoiseOrder::AfterGate) ==
          Catch::Approx(expect).epsilon(1e-12));

    // position-dependent noise hits the advertised positions
    NoiseModel pos = NoiseModel::position_dependent([&](int, int k) {
        return k == 0 ? depolarizing_channel(0.5) : identity_channel(2);
    });
    double one_hit = 0.5 * 1.0 + 0.5 * 0.5;
    CHECK(survival_probability({xi, xi}, gs, pos, spam) == Catch::Approx(one_hit).epsilon(1e-12));
}

TEST_CASE("finalize_survival clamps roundoff but rejects real violations") {
    CHECK(finalize_survival(cd(1.0 + 1e-12, 0.0)) == 1.0);
    CHECK(finalize_survival(cd(-1e-12, 0.0)) == 0.0);
    CHECK_THROWS_AS(finalize_survival(cd(1.1, 0.0)), std::runtime_error);
}
