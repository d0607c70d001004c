#include <gtest/gtest.h>

#include <numbers>

#include "test_support.hpp"

using namespace vktest;

TEST(TimeGrid, NodesAndValidation) {
    const TimeGrid g(0.0, 2.0, 8);
    EXPECT_EQ(g.size(), 9u);
    EXPECT_DOUBLE_EQ(g.step(), 0.25);
    EXPECT_DOUBLE_EQ(g.node(8), 2.0);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g.node(i), g.node(i - 1));
    EXPECT_EQ(error_kind([] { TimeGrid(1.0, 1.0, 4); }), ErrorKind::InvalidInput);
    EXPECT_EQ(error_kind([] { TimeGrid(0.0, 1.0, 0); }), ErrorKind::InvalidInput);
    EXPECT_EQ(make_grid(0.0, 1.5, 200).n_steps, 300u);
}

TEST(GridFamily, RejectsWrongCountAndShape) {
    const TimeGrid g(0.0, 1.0, 2);
    EXPECT_EQ(error_kind([&] { GridFamily(g, {identity(2), identity(2)}); }), ErrorKind::GridMismatch);
    EXPECT_EQ(error_kind([&] { GridFamily(g, {identity(2), identity(2), identity(3)}); }), ErrorKind::ShapeMismatch);
}

TEST(GridFamily, InterpolationIsExactForCubics) {
    const TimeGrid g(0.0, 1.0, 10);
    const GridFamily f = GridFamily::sample(g, [](double t) { return scalar(t * t * t - 2.0 * t); });
    EXPECT_LT(std::abs(f.at(0.537)(0, 0) - (std::pow(0.537, 3) - 2.0 * 0.537)), 1e-13);
}

TEST(Integrator, ZeroCoefficientKeepsIdentity) {
    const TimeGrid g(0.0, 1.0, 20);
    const GridFamily f = integrate_linear_ode([](std::size_t) { return ComplexMatrix::Zero(2, 2); }, identity(2), g);
    for (const auto& s : f.samples()) EXPECT_EQ(s, identity(2));
}

TEST(Integrator, ConstantCoefficientMatchesExponential) {
    std::mt19937_64 rng(11);
    const ComplexMatrix k = random_matrix(3, 3, rng, 0.7);
    auto endpoint_error = [&](std::size_t steps) {
        const TimeGrid g(0.0, 1.0, steps);
        const GridFamily f = integrate_linear_ode([&](std::size_t) { return k; }, identity(3), g);
        return (f[steps] - matrix_exp(k)).norm();
    };
    const double e1 = endpoint_error(20), e2 = endpoint_error(40);
    EXPECT_LT(e2, 1e-6);
    EXPECT_GE(e1 / e2, 12.0);
    EXPECT_LE(e1 / e2, 20.0);
}

TEST(Integrator, BackwardDirection) {
    const TimeGrid g(0.0, 1.0, 100);
    const ComplexMatrix k = scalar(Complex(0.3, 1.0));
    const GridFamily f = integrate_linear_ode([&](std::size_t) { return k; }, identity(1), g, Direction::Backward);
    EXPECT_EQ(f[100], identity(1));
    EXPECT_LT(std::abs(f[0](0, 0) - std::exp(-k(0, 0))), 1e-9);
}

TEST(Integrator, Deterministic) {
    const TimeGrid g(0.0, 1.0, 50);
    auto run = [&] {
        return integrate_linear_ode_continuous([](double t) { return scalar(Complex(std::sin(t), t)); }, identity(1), g);
    };
    EXPECT_TRUE(run() == run());
}

TEST(FundamentalMatrix, ConstantCoefficientClosedForm) {
    const TimeGrid g(0.0, 1.0, 200);
    std::mt19937_64 rng(12);
    const ComplexMatrix gamma = random_skew(2, rng);
    const Complex lambda(0.4, -0.8);
    const FundamentalMatrix phi = fundamental_matrix(lambda, constant(g, identity(2)), constant(g, identity(2)),
                                                     constant(g, gamma), 50);
    EXPECT_EQ(phi[50], identity(2));
    for (std::size_t i : {0, 100, 200}) {
        const ComplexMatrix expect = matrix_exp(ComplexMatrix((lambda * identity(2) + gamma) * (g.node(i) - g.node(50))));
        EXPECT_LT((phi[i] - expect).norm(), 1e-9);
    }
}

TEST(FundamentalMatrix, ScalarExponential) {
    const TimeGrid g(0.0, 1.0, 200);
    const FundamentalMatrix phi =
        fundamental_matrix(1.0, constant(g, scalar(1.0)), constant(g, scalar(1.0)), constant(g, scalar(0.0)));
    EXPECT_NEAR(std::abs(phi[200](0, 0) - std::numbers::e), 0.0, 1e-8);
}

TEST(FundamentalMatrix, Cocycle) {
    const TimeGrid g(0.0, 1.0, 100);
    auto s2 = GridFamily::sample(g, [](double t) { return scalar(0.5 + t); });
    auto gam = GridFamily::sample(g, [](double t) { return scalar(Complex(0, std::cos(t))); });
    const GridFamily s1 = constant(g, scalar(1.0));
    const Complex lambda(0.2, 0.9);
    const auto from0 = fundamental_matrix(lambda, s1, s2, gam, 0);
    const auto from40 = fundamental_matrix(lambda, s1, s2, gam, 40);
    EXPECT_LT((from0[90] - from40[90] * from0[40]).norm(), 1e-9);
}

TEST(FundamentalMatrix, SingularSigma1Rejected) {
    const TimeGrid g(0.0, 1.0, 10);
    const GridFamily z = constant(g, ComplexMatrix::Zero(1, 1));
    EXPECT_EQ(error_kind([&] { fundamental_matrix(1.0, z, z, z); }), ErrorKind::SingularSigma1);
}

TEST(PhiIdentities, SymmetryWithSkewGamma) {
    const TimeGrid g(0.0, 1.0, 200);
    std::mt19937_64 rng(13);
    const GridFamily s1 = constant(g, identity(2)), s2 = constant(g, identity(2)), gam = constant(g, random_skew(2, rng));
    for (Complex lambda : {Complex(0.7, 0.4), Complex(0.0, 1.3)}) {
        const auto phi = fundamental_matrix(lambda, s1, s2, gam, 0);
        const auto ref = fundamental_matrix(-std::conj(lambda), s1, s2, gam, 0);
        EXPECT_LT(phi_symmetry_residual(phi, ref, s1), 1e-7);
    }
}

TEST(PhiIdentities, BaseNodeContributesZero) {
    const TimeGrid g(0.0, 1.0, 1);
    const GridFamily s1 = constant(g, scalar(1.0)), s2 = constant(g, scalar(1.0)), gam = constant(g, scalar(0.0));
    const auto phi = fundamental_matrix(Complex(0.3, 0.1), s1, s2, gam, 0);
    const auto ref = fundamental_matrix(Complex(-0.3, 0.1), s1, s2, gam, 0);
    const ComplexMatrix d = s1[0] * phi[0] - ref[0].adjoint().inverse() * s1[0];
    EXPECT_EQ(d.norm(), 0.0);
}

TEST(PhiIdentities, BilinearForms) {
    const TimeGrid g(0.0, 1.0, 400);
    const GridFamily s1 = constant(g, scalar(1.0)), s2 = constant(g, scalar(0.6)), gam = constant(g, scalar(Complex(0, 0.4)));
    const Complex lambda(0.5, 0.3);
    const auto phi = fundamental_matrix(lambda, s1, s2, gam, 0);
    // mu = -conj(lambda): the form is constant
    const auto ref = fundamental_matrix(-std::conj(lambda), s1, s2, gam, 0);
    EXPECT_LT(phi_bilinear_residual(ref, phi, s1, s2), 1e-6);
    // scalar closed form: Phi(mu)^* Phi(lambda) = exp((lambda + conj(mu)) 0.6 t)
    const Complex mu(-0.2, 0.8);
    const auto phi_mu = fundamental_matrix(mu, s1, s2, gam, 0);
    EXPECT_LT(phi_bilinear_residual(phi_mu, phi, s1, s2), 1e-6);
    const Complex form = std::conj(phi_mu[400](0, 0)) * phi[400](0, 0);
    EXPECT_LT(std::abs(form - std::exp((lambda + std::conj(mu)) * 0.6)), 1e-6);
}

TEST(PhiIdentities, ZeroSigma2Conserves) {
    const TimeGrid g(0.0, 1.0, 100);
    std::mt19937_64 rng(14);
    const GridFamily s1 = constant(g, identity(2)), s2 = constant(g, ComplexMatrix::Zero(2, 2));
    const GridFamily gam = constant(g, random_skew(2, rng));
    const auto a = fundamental_matrix(Complex(0.3, 0.2), s1, s2, gam, 0);
    const auto b = fundamental_matrix(Complex(-1.0, 2.0), s1, s2, gam, 0);
    EXPECT_LT(phi_bilinear_residual(a, b, s1, s2), 1e-7);
}

TEST(PhiIdentities, MismatchedSidesRejected) {
    const TimeGrid g(0.0, 1.0, 10);
    const GridFamily one = constant(g, scalar(1.0));
    const auto a = fundamental_matrix(1.0, one, one, one, 0, Side::Input);
    const auto b = fundamental_matrix(-1.0, one, one, one, 0, Side::Output);
    EXPECT_EQ(error_kind([&] { phi_symmetry_residual(a, b, one); }), ErrorKind::InvalidInput);
    const auto c = fundamental_matrix(-1.0, one, one, one, 3, Side::Input);
    EXPECT_EQ(error_kind([&] { phi_symmetry_residual(a, c, one); }), ErrorKind::GridMismatch);
}
