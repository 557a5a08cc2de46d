#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <set>
#include <vector>

#include "rbayes/protocols.hpp"
#include "rbayes/rng.hpp"
#include "rbayes/simulate.hpp"

using namespace rbayes;
using namespace rbayes::protocols;
using qsim::Channel;
using qsim::cmat;
using qsim::cvec;
using qsim::cd;

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

cmat ket0_proj(int d = 2) {
    cmat p = cmat::Zero(d, d);
    p(0, 0) = 1.0;
    return p;
}

// decay-base estimate from three consecutive first moments of an exponential
double decay_from_moments(double m1, double m2, double m3) { return (m2 - m3) / (m1 - m2); }

std::vector<double> moments_at(const ProtocolSpec& proto, const qsim::NoiseModel& noise,
                               const qsim::SpamConfig& spam, const std::vector<int>& ms,
                               int e_idx, int order) {
    std::vector<double> out;
    for (int m : ms) {
        auto atoms = qsim::enumerate_survival_distribution(proto, noise, spam, m, e_idx);
        out.push_back(qsim::survival_moment(atoms, order));
    }
    return out;
}

// Haar-average gate fidelity of a (possibly trace-decreasing) qubit map given
// by its action rho -> lambda(rho)
double average_fidelity_qubit(const std::function<cmat(const cmat&)>& lambda) {
    cmat swap = cmat::Zero(4, 4);
    swap(0, 0) = swap(3, 3) = 1.0;
    swap(1, 2) = swap(2, 1) = 1.0;
    auto extend = [&](const cmat& a) {  // (lambda x id)(a)
        cmat out = cmat::Zero(4, 4);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                cmat eij = cmat::Zero(2, 2);
                eij(i, j) = 1.0;
                cmat lij = lambda(eij);
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l < 2; ++l)
                        for (int p = 0; p < 2; ++p)
                            for (int q = 0; q < 2; ++q)
                                out(2 * p + k, 2 * q + l) += lij(p, q) * a(2 * i + k, 2 * j + l);
            }
        return out;
    };
    cmat avg_in = cmat::Identity(4, 4) + swap;
    return ((extend(avg_in) * swap).trace().real()) / 6.0;
}

}  // namespace

TEST_CASE("tying function direct evaluations") {
    using std::pow;
    std::vector<double> rb1{0.3, 0.7, 0.7};
    CHECK(tying_rb(1, 123.0, std::span<const double>(rb1)) == Catch::Approx(0.7));
    std::vector<double> rb2{1.0, 0.8, 0.2};
    CHECK(tying_rb(1, 55.0, std::span<const double>(rb2)) == Catch::Approx(0.8));
    std::vector<double> rb3{0.9998, 0.99, 0.5};
    CHECK(tying_rb(1, 5000.0, std::span<const double>(rb3)) ==
          Catch::Approx(0.5 + 0.49 * pow(0.9998, 5000.0)).epsilon(1e-12));
    CHECK_THROWS_AS(tying_rb(2, 1.0, std::span<const double>(rb3)), std::invalid_argument);

    std::vector<double> irb{0.999, 0.998, 1.0, 0.5};
    double v0 = tying_irb(1, 100.0, 0, std::span<const double>(irb));
    double vr = tying_irb(1, 100.0, 1, std::span<const double>(irb));
    CHECK(v0 - vr == Catch::Approx(0.5 * (pow(0.999, 100.0) - pow(0.998, 100.0))).epsilon(1e-10));
    std::vector<double> irb_same{0.999, 0.999, 1.0, 0.5};
    CHECK(tying_irb(1, 40.0, 0, std::span<const double>(irb_same)) ==
          tying_irb(1, 40.0, 1, std::span<const double>(irb_same)));

    std::vector<double> uni{0.99, 0.25, 0.5};
    CHECK(tying_unitarity(2, 1.0, std::span<const double>(uni)) == Catch::Approx(0.75));
    CHECK(tying_unitarity(2, 11.0, std::span<const double>(uni)) ==
          Catch::Approx(0.25 + 0.5 * pow(0.99, 10.0)).epsilon(1e-12));
    std::vector<double> uni0{0.0, 0.25, 0.5};
    CHECK(tying_unitarity(2, 5.0, std::span<const double>(uni0)) == Catch::Approx(0.25));

    std::vector<double> dih{0.999, 0.97, 0.5, 0.45, 0.0};
    CHECK(tying_dihedral(1, 200.0, 0, std::span<const double>(dih)) ==
          Catch::Approx(0.5 + 0.45 * pow(0.999, 200.0)).epsilon(1e-12));
    CHECK(tying_dihedral(1, 200.0, 1, std::span<const double>(dih)) == Catch::Approx(0.5));
}

TEST_CASE("lrb tying function structure") {
    const double a = 0.8, b = 0.3, c = 0.95, pi = 0.9;
    // L1 = L2 and A = B leave only the lambda2 branch
    double v = tying_lrb(1, 10.0, 0.001, 0.001, 0.99, a, a, c, pi);
    double lam2 = 0.99 * (1.0 - 0.001);
    CHECK(v == Catch::Approx(a + (1.0 - pi) * (c - a) * std::pow(lam2, 10.0)).epsilon(1e-12));

    // asymptote (L2 A + L1 B)/(L1 + L2)
    double inf = tying_lrb(1, 1e9, 0.001, 0.0015, 0.99, a, b, c, pi);
    CHECK(inf == Catch::Approx((0.0015 * a + 0.001 * b) / 0.0025).epsilon(1e-12));

    // degenerate L1 + L2 -> 0 limit is continuous
    double exact0 = tying_lrb(1, 7.0, 0.0, 0.0, 0.99, a, b, c, pi);
    double near0 = tying_lrb(1, 7.0, 1e-14, 1e-14, 0.99, a, b, c, pi);
    CHECK(exact0 == Catch::Approx(near0).margin(1e-9));
}

TEST_CASE("order-12 Clifford subgroup") {
    qsim::GateSet gs = clifford_subgroup_12();
    CHECK(gs.size() == 12);
    CHECK(gs.find(pauli_z()) >= 0);
    CHECK(gs.find(pauli_x()) >= 0);  // contains the pi rotations
}

TEST_CASE("allowable-sequence samplers") {
    qsim::GateSet gs = clifford_subgroup_12();
    auto gen = rng::engine_for(42, 0);

    ProtocolSpec rb = make_rb_protocol(gs);
    std::set<int> first_seen;
    for (int rep = 0; rep < 500; ++rep) {
        auto seq = rb.sample_sequence(1, 0, gen);
        REQUIRE(seq.size() == 2);
        CHECK(gs.compose(seq) == gs.identity_index);
        first_seen.insert(seq[0]);
    }
    CHECK(first_seen.size() == 12);
    for (int rep = 0; rep < 50; ++rep) {
        auto seq = rb.sample_sequence(6, 0, gen);
        REQUIRE(seq.size() == 7);
        CHECK(gs.compose(seq) == gs.identity_index);
    }

    int r = gs.find(pauli_x());
    ProtocolSpec irb = make_irb_protocol(gs, r);
    for (int rep = 0; rep < 50; ++rep) {
        auto s0 = irb.sample_sequence(2, 0, gen);
        REQUIRE(s0.size() == 3);
        CHECK(gs.compose(s0) == gs.identity_index);
        auto s1 = irb.sample_sequence(2, 1, gen);
        REQUIRE(s1.size() == 5);
        CHECK(s1[1] == r);
        CHECK(s1[3] == r);
        CHECK(gs.compose(s1) == gs.identity_index);
    }

    ProtocolSpec uni = make_unitarity_protocol(gs);
    auto su = uni.sample_sequence(3, 0, gen);
    CHECK(su.size() == 3);

    qsim::GateSet dg = qsim::generate_group({qsim::Unitary(pauli_x()), qsim::Unitary(pauli_z())});
    ProtocolSpec dih = make_dihedral_protocol(dg, dg.find(pauli_x()), dg.find(pauli_z()));
    std::set<int> finals;
    for (int rep = 0; rep < 200; ++rep) {
        auto sd = dih.sample_sequence(3, 0, gen);
        REQUIRE(sd.size() == 4);
        finals.insert(dg.compose(sd));
    }
    CHECK(finals == std::set<int>{dg.identity_index, dg.find(pauli_x())});

    ProtocolSpec lrb = make_lrb_protocol(gs, 1, 1, false, {0.0});
    for (int rep = 0; rep < 20; ++rep) {
        auto sl = lrb.sample_sequence(4, 0, gen);
        REQUIRE(sl.size() == 5);
        CHECK(lrb.gateset.compose(sl) == lrb.gateset.identity_index);
    }
}

TEST_CASE("enumerated survival: noiseless and gate-independent depolarizing") {
    qsim::GateSet gs = clifford_subgroup_12();
    ProtocolSpec rb = make_rb_protocol(gs);
    qsim::SpamConfig spam{ket0_proj(), 0.99 * ket0_proj()};

    auto none = qsim::NoiseModel::gate_independent(qsim::identity_channel(2));
    auto atoms0 = qsim::enumerate_survival_distribution(rb, none, spam, 2, 0);
    REQUIRE(atoms0.size() == 1);
    CHECK(atoms0[0].q == Catch::Approx(0.99).epsilon(1e-12));

    const double s = 0.0002;
    auto dep = qsim::NoiseModel::gate_independent(qsim::depolarizing_channel(s));
    for (int M : {1, 2, 3}) {
        auto atoms = qsim::enumerate_survival_distribution(rb, dep, spam, M, 0);
        REQUIRE(atoms.size() == 1);  // depolarizing commutes with everything
        // closed form and the tying function with p = 1 - s
        double expect = 0.99 * (0.5 + 0.5 * std::pow(1.0 - s, M + 1));
        CHECK(std::fabs(atoms[0].q - expect) < 1e-12);
        std::vector<double> x{1.0 - s, 0.99 * (0.5 + 0.5 * (1.0 - s)), 0.99 * 0.5};
        CHECK(std::fabs(qsim::survival_moment(atoms, 1) -
                        tying_rb(1, double(M), std::span<const double>(x))) < 1e-8);
    }
}

TEST_CASE("enumerated survival: overrotation models reproduce the 0.9998 decay base") {
    qsim::GateSet gs = clifford_subgroup_12();
    ProtocolSpec rb = make_rb_protocol(gs);
    qsim::SpamConfig spam{ket0_proj(), 0.99 * ket0_proj()};

    // purely gate-dependent overrotation, eps3 = 0.011132. The first-moment
    // ratio has a short transient for coherent gate-dependent noise, so the
    // decay base is read off a consecutive triple starting at M = 3.
    std::vector<Channel> noise3;
    for (int r = 0; r < gs.size(); ++r)
        noise3.push_back(qsim::overrotation_channel(gs.gates[r], 0.011132));
    auto n3 = qsim::NoiseModel::gate_dependent(noise3);
    auto atoms1 = qsim::enumerate_survival_distribution(rb, n3, spam, 1, 0);
    CHECK(atoms1.size() <= 12);
    auto m = moments_at(rb, n3, spam, {3, 4, 5}, 0, 1);
    CHECK(decay_from_moments(m[0], m[1], m[2]) == Catch::Approx(0.9998).margin(5e-5));

    // dephasing s2 combined with overrotation eps2 lands on the same base
    std::vector<Channel> noise2;
    for (int r = 0; r < gs.size(); ++r) {
        Channel rot = qsim::overrotation_channel(gs.gates[r], 0.01);
        noise2.emplace_back(cmat(qsim::dephasing_channel(0.000028954).superop * rot.superop), 2);
    }
    auto n2 = qsim::NoiseModel::gate_dependent(noise2);
    auto m2 = moments_at(rb, n2, spam, {3, 4, 5}, 0, 1);
    CHECK(decay_from_moments(m2[0], m2[1], m2[2]) == Catch::Approx(0.9998).margin(5e-5));
}

TEST_CASE("enumerated survival: interleaved RB closed forms") {
    qsim::GateSet gs = clifford_subgroup_12();
    int r = gs.find(pauli_x());
    ProtocolSpec irb = make_irb_protocol(gs, r);
    qsim::SpamConfig spam{ket0_proj(), ket0_proj()};
    const double s = 0.01;
    auto dep = qsim::NoiseModel::gate_independent(qsim::depolarizing_channel(s));

    std::vector<double> x{1.0 - s, (1.0 - s) * (1.0 - s), 0.5 + 0.5 * (1.0 - s), 0.5};
    for (int M : {1, 2}) {
        for (int e = 0; e < 2; ++e) {
            auto atoms = qsim::enumerate_survival_distribution(irb, dep, spam, M, e);
            REQUIRE(atoms.size() == 1);
            CHECK(std::fabs(qsim::survival_moment(atoms, 1) -
                            tying_irb(1, double(M), e, std::span<const double>(x))) < 1e-9);
        }
    }
}

TEST_CASE("enumerated survival: unitarity ties second moments with u = (1-s)^2") {
    qsim::GateSet gs = clifford_subgroup_12();
    ProtocolSpec uni = make_unitarity_protocol(gs);
    qsim::SpamConfig spam{ket0_proj(), ket0_proj()};
    const double s = 0.01;
    auto dep = qsim::NoiseModel::gate_independent(qsim::depolarizing_channel(s));
    auto m2 = moments_at(uni, dep, spam, {1, 2, 3}, 0, 2);
    CHECK(decay_from_moments(m2[0], m2[1], m2[2]) ==
          Catch::Approx((1.0 - s) * (1.0 - s)).epsilon(1e-9));
}

TEST_CASE("enumerated survival: dihedral closed forms under depolarizing noise") {
    qsim::GateSet dg = qsim::generate_group({qsim::Unitary(pauli_x()), qsim::Unitary(pauli_z())});
    ProtocolSpec dih = make_dihedral_protocol(dg, dg.find(pauli_x()), dg.find(pauli_z()));
    qsim::SpamConfig spam{ket0_proj(), ket0_proj()};
    const double s = 0.02;
    auto dep = qsim::NoiseModel::gate_independent(qsim::depolarizing_channel(s));
    for (int M : {1, 2, 3}) {
        // Z-type experiment: both terminals fix |0>, one atom on the RB curve
        auto az = qsim::enumerate_survival_distribution(dih, dep, spam, M, 1);
        REQUIRE(az.size() == 1);
        CHECK(az[0].q == Catch::Approx(0.5 + 0.5 * std::pow(1.0 - s, M + 1)).epsilon(1e-12));
        // X-type experiment: terminals I and X average to 1/2 (B_X = 0 here)
        auto ax = qsim::enumerate_survival_distribution(dih, dep, spam, M, 0);
        CHECK(qsim::survival_moment(ax, 1) == Catch::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("leakage and seepage") {
    auto id3 = qsim::identity_channel(3);
    auto [l1i, l2i] = leakage_seepage(id3, 2, 1);
    CHECK(l1i == Catch::Approx(0.0).margin(1e-14));
    CHECK(l2i == Catch::Approx(0.0).margin(1e-14));

    Channel dle = qsim::dle_channel(qsim::dephasing_channel(0.003), 0.001, 0.0015, 1);
    auto [l1, l2] = leakage_seepage(dle, 2, 1);
    CHECK(l1 == Catch::Approx(0.001).epsilon(1e-10));
    CHECK(l2 == Catch::Approx(0.0015).epsilon(1e-10));

    // depolarizing confined to the computational block: no leakage, finite infidelity
    Channel dep_block = qsim::dle_channel(qsim::depolarizing_channel(0.1), 0.0, 0.0, 1);
    auto [l1d, l2d] = leakage_seepage(dep_block, 2, 1);
    CHECK(l1d == Catch::Approx(0.0).margin(1e-12));
    CHECK(l2d == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("lrb noise model: fidelity, rates, and two-exponential structure") {
    // gate-independent DLE of dephasing(0.003) composed with a 0.1 degree z-rotation
    const double s = 0.003, alpha = 0.1 * M_PI / 180.0, L1 = 0.001, L2 = 0.0015;
    cmat rz(2, 2);
    rz << std::polar(1.0, -alpha / 2.0), 0, 0, std::polar(1.0, alpha / 2.0);
    Channel base(cmat(qsim::dephasing_channel(s).superop * qsim::conjugation_channel(rz).superop), 2);
    Channel noise = qsim::dle_channel(base, L1, L2, 1);

    // average gate fidelity over computational-subspace states
    auto lambda = [&](const cmat& rho2) {
        cmat big = cmat::Zero(3, 3);
        big.topLeftCorner(2, 2) = rho2;
        return cmat(noise.apply(big).topLeftCorner(2, 2));
    };
    CHECK(average_fidelity_qubit(lambda) == Catch::Approx(0.997001).margin(2e-6));

    // population exchange between the blocks decays at lambda1 = 1 - L1 - L2
    cmat rho = cmat::Zero(3, 3);
    rho(0, 0) = 1.0;
    double pstar = L2 / (L1 + L2);
    double prev = 1.0;
    for (int step = 0; step < 3; ++step) {
        rho = noise.apply(rho);
        double p1 = (rho(0, 0) + rho(1, 1)).real();
        CHECK((p1 - pstar) / (prev - pstar) == Catch::Approx(1.0 - L1 - L2).epsilon(1e-10));
        prev = p1;
    }

    // enumerated first moments follow offset + a lambda1^M + b lambda2^M:
    // solve for the coefficients at M = 1..3 and predict M = 4
    double mu1 = (base.superop.trace().real() - 1.0) / 3.0;
    double lam1 = 1.0 - L1 - L2, lam2 = mu1 * (1.0 - L1);
    qsim::GateSet gs = clifford_subgroup_12();
    ProtocolSpec lrb = make_lrb_protocol(gs, 1, 1, false, {0.0});
    qsim::SpamConfig spam{ket0_proj(3), ket0_proj(3)};
    auto nm = qsim::NoiseModel::gate_independent(noise);
    auto m = moments_at(lrb, nm, spam, {1, 2, 3, 4}, 0, 1);
    Eigen::Matrix3d v;
    Eigen::Vector3d rhs;
    for (int i = 0; i < 3; ++i) {
        double M = i + 1.0;
        v(i, 0) = 1.0;
        v(i, 1) = std::pow(lam1, M);
        v(i, 2) = std::pow(lam2, M);
        rhs(i) = m[i];
    }
    Eigen::Vector3d coef = v.fullPivLu().solve(rhs);
    double predict = coef(0) + coef(1) * std::pow(lam1, 4.0) + coef(2) * std::pow(lam2, 4.0);
    CHECK(std::fabs(predict - m[3]) < 1e-8);
}
