#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace vktest;

namespace {

DifferentialVessel load(const std::string& name) { return vessel_from_json(Json::parse(read_file(fixture(name)))); }

NullPoleTriple evolve(const NullPoleData& d, const TimeGrid& g, const ComplexMatrix& sigma2) {
    const auto m = d.b0.cols();
    return evolve_null_pole(d.c0, d.a_pi, d.a_xi, d.b0, constant(g, identity(m)), constant(g, sigma2),
                            constant(g, d.gamma_star));
}

}  // namespace

TEST(NullPole, ZeroSigma2KeepsXConstant) {
    std::mt19937_64 rng(41);
    const NullPoleData d = random_null_pole(3, 2, rng);
    const TimeGrid g(0.0, 1.0, 50);
    const NullPoleTriple t = evolve(d, g, ComplexMatrix::Zero(2, 2));
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_EQ(t.x[i], t.x[0]);
    EXPECT_LT(max_sylvester_residual(t, constant(g, identity(2))), 1e-9);
}

TEST(NullPole, ScalarCouplingClosedForm) {
    const TimeGrid g(0.0, 1.0, 200);
    const Complex a_pi(-0.4, 0.3), a_xi(0.6, 0.1);
    const NullPoleTriple t = evolve_null_pole(scalar(Complex(0.5, 0.2)), scalar(a_pi), scalar(a_xi), scalar(0.9),
                                              constant(g, scalar(1.0)), constant(g, scalar(0.7)),
                                              constant(g, scalar(Complex(0, 0.3))));
    for (std::size_t i : {0, 100, 200}) {
        const Complex expect = t.bn[i](0, 0) * t.c[i](0, 0) / (a_pi - a_xi);
        EXPECT_LT(std::abs(t.x[i](0, 0) - expect), 1e-9);
    }
}

TEST(NullPole, PairEquationsHold) {
    std::mt19937_64 rng(42);
    const NullPoleData d = random_null_pole(2, 2, rng);
    const TimeGrid g(0.0, 1.0, 200);
    const NullPoleTriple t = evolve(d, g, d.sigma2);
    const PairOdeResiduals r =
        pair_ode_residuals(t, constant(g, identity(2)), constant(g, d.sigma2), constant(g, d.gamma_star));
    EXPECT_LT(r.pole_pair, 1e-3);
    EXPECT_LT(r.null_pair, 1e-3);
}

TEST(NullPole, InconsistentInitialCoupling) {
    const TimeGrid g(0.0, 1.0, 10);
    const GridFamily one = constant(g, scalar(1.0));
    EXPECT_EQ(error_kind([&] { evolve_coupling(one, scalar(1.0), scalar(-1.0), one, scalar(5.0), one, one); }),
              ErrorKind::InconsistentInitialData);
}

TEST(NullPole, VaryingSigma1Rejected) {
    const TimeGrid g(0.0, 1.0, 10);
    const GridFamily s1 = GridFamily::sample(g, [](double t) { return scalar(1.0 + t); });
    EXPECT_EQ(error_kind([&] {
                  evolve_null_pole(scalar(1.0), scalar(-1.0), scalar(1.0), scalar(1.0), s1, constant(g, scalar(0.0)),
                                   constant(g, scalar(0.0)));
              }),
              ErrorKind::InvalidInput);
}

TEST(Realization, ConstantTripleIsExact) {
    std::mt19937_64 rng(43);
    const NullPoleData d = random_null_pole(3, 2, rng);
    const TimeGrid g(0.0, 1.0, 20);
    const ComplexMatrix zero = ComplexMatrix::Zero(2, 2);
    const NullPoleTriple t = evolve_null_pole(d.c0, d.a_pi, d.a_xi, d.b0, constant(g, identity(2)), constant(g, zero),
                                              constant(g, zero));
    const ZeroPoleRealization rz = zero_pole_realize(t, constant(g, zero), constant(g, identity(2)), constant(g, zero));
    const ComplexMatrix bt = t.x[0].partialPivLu().solve(d.b0);
    const Complex lambda(0.5, 1.5);
    const ComplexMatrix expect = identity(2) + d.c0 * resolvent(d.a_pi, lambda) * bt;
    EXPECT_LT((rz.transfer(lambda, 10) - expect).norm(), 1e-12);
    EXPECT_TRUE(rz.singular_nodes().empty());
}

TEST(Realization, BlaschkeRoundTrip) {
    const DifferentialVessel v = load("blaschke_vessel.json");
    const NullPoleTriple t = extract_null_pole(v, 0);
    EXPECT_LT(std::abs(t.a_xi(0, 0) + std::conj(v.a1()[0](0, 0))), 1e-15);
    const ZeroPoleRealization rz = zero_pole_realize(t, v.gamma_star(), v.sigma1(), v.sigma2());
    for (std::size_t i : {0, 50, 100}) {
        for (Complex lambda : {Complex(1.0, 0.0), Complex(0.2, -1.3)}) {
            EXPECT_LT((rz.transfer(lambda, i) - v.transfer(lambda, i)).norm(), 1e-8);
        }
    }
}

TEST(Realization, SynthesizedVesselRoundTrip) {
    const DifferentialVessel v = three_factor_synthesis(200).vessel;
    const NullPoleTriple t = extract_null_pole(v, 0);
    const ZeroPoleRealization rz = zero_pole_realize(t, v.gamma_star(), v.sigma1(), v.sigma2());
    const Complex lambda(0.9, 0.4);
    EXPECT_LT((rz.transfer(lambda, 0) - v.transfer(lambda, 0)).norm(), 1e-12);
    for (std::size_t i : {100, 200}) EXPECT_LT((rz.transfer(lambda, i) - v.transfer(lambda, i)).norm(), 1e-6);
    const auto r = rz.condition_residuals();
    EXPECT_LT(r.linkage, 1e-6);
}

TEST(Realization, NonMinimalVesselRejected) {
    const DifferentialVessel v = load("trivial_vessel.json");
    EXPECT_EQ(error_kind([&] { extract_null_pole(v, 0); }), ErrorKind::NotMinimal);
}

TEST(Realization, SingularCouplingIsListed) {
    const TimeGrid g(0.0, 1.0, 4);
    const ComplexMatrix zero = ComplexMatrix::Zero(1, 1);
    const NullPoleTriple t = evolve_null_pole(scalar(1.0), scalar(-1.0), scalar(1.0), zero, constant(g, scalar(1.0)),
                                              constant(g, zero), constant(g, zero));
    const ZeroPoleRealization rz = zero_pole_realize(t, constant(g, zero), constant(g, scalar(1.0)), constant(g, zero));
    EXPECT_EQ(rz.singular_nodes().size(), g.size());
    EXPECT_EQ(error_kind([&] { rz.transfer(2.0, 1); }), ErrorKind::CouplingSingular);
}

TEST(Realization, NonSquareTripleRejected) {
    std::mt19937_64 rng(44);
    const TimeGrid g(0.0, 1.0, 4);
    const ComplexMatrix a_pi = -identity(2);
    const ComplexMatrix a_xi = scalar(1.0);
    const NullPoleTriple t = evolve_null_pole(random_matrix(1, 2, rng), a_pi, a_xi, random_matrix(1, 1, rng),
                                              constant(g, scalar(1.0)), constant(g, scalar(0.0)),
                                              constant(g, scalar(0.0)));
    EXPECT_EQ(error_kind([&] { zero_pole_realize(t, constant(g, scalar(0.0)), constant(g, scalar(1.0)), constant(g, scalar(0.0))); }),
              ErrorKind::ShapeMismatch);
}

TEST(Hermitian, ScalarClosedForm) {
    const TimeGrid g(0.0, 1.0, 2);
    const Complex a(-0.4, 0.9);
    const Complex c(0.6, -0.8);
    const HermitianRealization hr = hermitian_realize(constant(g, scalar(c)), scalar(a), constant(g, scalar(1.0)));
    const double x = std::norm(c) / (-2.0 * a.real());
    EXPECT_NEAR(hr.x[1](0, 0).real(), x, 1e-14);
    EXPECT_NEAR(hr.y[1](0, 0).real(), std::sqrt(x), 1e-14);
    EXPECT_LT(hr.colligation_residual, 1e-14);
    const Complex lambda(0.3, 0.2);
    EXPECT_LT((hr.transfer(lambda, 0) - hr.transfer_tilde(lambda, 0)).norm(), 1e-14);
}

TEST(Hermitian, UnobservablePairRejected) {
    const TimeGrid g(0.0, 1.0, 2);
    EXPECT_EQ(error_kind([&] {
                  hermitian_realize(constant(g, ComplexMatrix::Zero(1, 2)), ComplexMatrix(-identity(2)),
                                    constant(g, scalar(1.0)));
              }),
              ErrorKind::NotMinimal);
}

TEST(Hermitian, SimilarityInvariance) {
    std::mt19937_64 rng(45);
    const TimeGrid g(0.0, 1.0, 2);
    const ComplexMatrix p = random_matrix(3, 3, rng, 0.5);
    const ComplexMatrix a1 = random_skew(3, rng) - (p * p.adjoint() + 0.3 * identity(3));
    const ComplexMatrix c = random_matrix(2, 3, rng);
    const ComplexMatrix t = random_matrix(3, 3, rng) + 3.0 * identity(3);
    const ComplexMatrix t_inv = t.inverse();
    const HermitianRealization h1 = hermitian_realize(constant(g, c), a1, constant(g, identity(2)));
    const HermitianRealization h2 =
        hermitian_realize(constant(g, ComplexMatrix(c * t_inv)), ComplexMatrix(t * a1 * t_inv), constant(g, identity(2)));
    for (Complex lambda : probes_off(eigenvalues(ComplexMatrix(-a1)), 5, rng)) {
        EXPECT_LT((h1.transfer(lambda, 0) - h2.transfer(lambda, 0)).norm(), 1e-9);
        EXPECT_LT((h1.transfer(lambda, 0) - h1.transfer_tilde(lambda, 0)).norm(), 1e-9);
    }
    const auto probes = probes_off(eigenvalues(ComplexMatrix(-a1)), 5, rng);
    EXPECT_LT(inverse_symmetry_residual([&](Complex l) { return h1.transfer(l, 1); }, identity(2), probes), 1e-10);
}
