#pragma once

// Differential-form conservative vessels: condition residuals, transfer
// functions, coupling, energy balance along separated trajectories and gauge
// (unitary frame) equivalence.
//
// Sign convention used throughout:
//     dx/dt1 = A1 x + B sigma1 u,   dx/dt2 = A2 x + B sigma2 u,   y = u - B^H x,
//     S(lambda, t2) = I - B^H (lambda I - A1)^{-1} B sigma1.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vesselkit/matrix_kernel.hpp"
#include "vesselkit/ode.hpp"

namespace vesselkit {

class DifferentialVessel {
   public:
    DifferentialVessel(GridFamily a1, GridFamily a2, GridFamily b, GridFamily sigma1, GridFamily sigma2,
                       GridFamily gamma, GridFamily gamma_star, const KernelConfig& cfg = {})
        : a1_(std::move(a1)),
          a2_(std::move(a2)),
          b_(std::move(b)),
          sigma1_(std::move(sigma1)),
          sigma2_(std::move(sigma2)),
          gamma_(std::move(gamma)),
          gamma_star_(std::move(gamma_star)) {
        const TimeGrid& g = a1_.grid();
        for (const GridFamily* f : {&a2_, &b_, &sigma1_, &sigma2_, &gamma_, &gamma_star_}) {
            require_same_grid(*f, g, "vessel operator");
        }
        const auto n = a1_.rows();
        const auto m = b_.cols();
        require_shape(a1_, n, n, "A1");
        require_shape(a2_, n, n, "A2");
        require_shape(b_, n, m, "B");
        require_shape(sigma1_, m, m, "sigma1");
        require_shape(sigma2_, m, m, "sigma2");
        require_shape(gamma_, m, m, "gamma");
        require_shape(gamma_star_, m, m, "gamma_star");
        for (std::size_t i = 0; i < g.size(); ++i) {
            for (const GridFamily* s : {&sigma1_, &sigma2_}) {
                const ComplexMatrix& x = (*s)[i];
                if ((x - x.adjoint()).norm() > 1e-10 * (1.0 + x.norm())) {
                    fail(ErrorKind::InvalidInput, "sigma1/sigma2 must be Hermitian (node " + std::to_string(i) + ")");
                }
            }
        }
        require_invertible_sigma1(sigma1_, cfg);
    }

    Eigen::Index state_dim() const { return a1_.rows(); }
    Eigen::Index signal_dim() const { return b_.cols(); }
    const TimeGrid& grid() const { return a1_.grid(); }

    const GridFamily& a1() const { return a1_; }
    const GridFamily& a2() const { return a2_; }
    const GridFamily& b() const { return b_; }
    const GridFamily& sigma1() const { return sigma1_; }
    const GridFamily& sigma2() const { return sigma2_; }
    const GridFamily& gamma() const { return gamma_; }
    const GridFamily& gamma_star() const { return gamma_star_; }

    /// S(lambda, t2) at a grid node.
    ComplexMatrix transfer(Complex lambda, std::size_t node, const KernelConfig& cfg = {}) const {
        const ComplexMatrix& bn = b_[node];
        return identity(signal_dim()) - bn.adjoint() * resolvent(a1_[node], lambda, cfg) * bn * sigma1_[node];
    }

    friend bool operator==(const DifferentialVessel& x, const DifferentialVessel& y) {
        return x.a1_ == y.a1_ && x.a2_ == y.a2_ && x.b_ == y.b_ && x.sigma1_ == y.sigma1_ &&
               x.sigma2_ == y.sigma2_ && x.gamma_ == y.gamma_ && x.gamma_star_ == y.gamma_star_;
    }

   private:
    GridFamily a1_, a2_, b_, sigma1_, sigma2_, gamma_, gamma_star_;
};

/// Anything with input/output coefficient families and a transfer function sampled at nodes.
template <class T>
concept TransferModel = requires(const T& model, Complex lambda, std::size_t node) {
    { model.grid() } -> std::convertible_to<TimeGrid>;
    { model.sigma1() } -> std::convertible_to<GridFamily>;
    { model.sigma2() } -> std::convertible_to<GridFamily>;
    { model.gamma() } -> std::convertible_to<GridFamily>;
    { model.gamma_star() } -> std::convertible_to<GridFamily>;
    { model.transfer(lambda, node) } -> std::convertible_to<ComplexMatrix>;
};

inline ComplexMatrix eval_transfer(const DifferentialVessel& v, Complex lambda, std::size_t node,
                                   const KernelConfig& cfg = {}) {
    if (node >= v.grid().size()) fail(ErrorKind::InvalidInput, "node index out of range");
    return v.transfer(lambda, node, cfg);
}

/// Gamma_* forced by the linkage condition: gamma + sigma2 B^H B sigma1 - sigma1 B^H B sigma2.
inline ComplexMatrix linked_gamma_star(const ComplexMatrix& gamma, const ComplexMatrix& b, const ComplexMatrix& sigma1,
                                       const ComplexMatrix& sigma2) {
    const ComplexMatrix bhb = b.adjoint() * b;
    return gamma + sigma2 * bhb * sigma1 - sigma1 * bhb * sigma2;
}

struct ConditionReport {
    double lax_residual = 0.0;
    double colligation1_residual = 0.0;
    double colligation2_residual = 0.0;
    double input_vessel_residual = 0.0;
    double output_vessel_residual = 0.0;
    double linkage_residual = 0.0;

    bool lax_passed = false;
    bool colligation1_passed = false;
    bool colligation2_passed = false;
    bool input_vessel_passed = false;
    bool output_vessel_passed = false;
    bool linkage_passed = false;

    double tol = 0.0;
    /// Extra slack granted to conditions containing a d/dt2 (finite-difference truncation).
    double derivative_allowance = 0.0;

    bool all_passed() const {
        return lax_passed && colligation1_passed && colligation2_passed && input_vessel_passed &&
               output_vessel_passed && linkage_passed;
    }

    /// (name, residual, passed) in a fixed order.
    std::vector<std::tuple<std::string, double, bool>> entries() const {
        return {{"lax", lax_residual, lax_passed},
                {"colligation1", colligation1_residual, colligation1_passed},
                {"colligation2", colligation2_residual, colligation2_passed},
                {"input_vessel", input_vessel_residual, input_vessel_passed},
                {"output_vessel", output_vessel_residual, output_vessel_passed},
                {"linkage", linkage_residual, linkage_passed}};
    }
};

/// Residuals of every vessel axiom, each the maximum Frobenius norm over the nodes.
/// Never throws on a failing condition: failure is part of the report.
inline ConditionReport verify_vessel(const DifferentialVessel& v, double tol, double allowance_coefficient = 10.0) {
    const TimeGrid& g = v.grid();
    if (g.n_steps < 2) fail(ErrorKind::GridMismatch, "verification needs at least two grid steps");
    const double h = g.step();
    ConditionReport r;
    r.tol = tol;
    r.derivative_allowance = allowance_coefficient * h * h;

    std::vector<ComplexMatrix> b_sigma1(g.size()), b_adj(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        b_sigma1[i] = v.b()[i] * v.sigma1()[i];
        b_adj[i] = v.b()[i].adjoint();
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        const ComplexMatrix& a1 = v.a1()[i];
        const ComplexMatrix& a2 = v.a2()[i];
        const ComplexMatrix& b = v.b()[i];
        const ComplexMatrix& s1 = v.sigma1()[i];
        const ComplexMatrix& s2 = v.sigma2()[i];
        const ComplexMatrix& gam = v.gamma()[i];
        const ComplexMatrix& gam_star = v.gamma_star()[i];

        const ComplexMatrix lax = v.a1().derivative(i) - (a2 * a1 - a1 * a2);
        const ComplexMatrix coll1 = a1 + a1.adjoint() + b * s1 * b.adjoint();
        const ComplexMatrix coll2 = a2 + a2.adjoint() + b * s2 * b.adjoint();
        const ComplexMatrix input = grid_derivative(b_sigma1, h, i) - a2 * b * s1 + a1 * b * s2 + b * gam;
        const ComplexMatrix output = s1 * grid_derivative(b_adj, h, i) + s1 * b.adjoint() * a2 -
                                     s2 * b.adjoint() * a1 - gam_star * b.adjoint();
        const ComplexMatrix link = gam_star - linked_gamma_star(gam, b, s1, s2);

        r.lax_residual = std::max(r.lax_residual, lax.norm());
        r.colligation1_residual = std::max(r.colligation1_residual, coll1.norm());
        r.colligation2_residual = std::max(r.colligation2_residual, coll2.norm());
        r.input_vessel_residual = std::max(r.input_vessel_residual, input.norm());
        r.output_vessel_residual = std::max(r.output_vessel_residual, output.norm());
        r.linkage_residual = std::max(r.linkage_residual, link.norm());
    }
    const double slack = tol + r.derivative_allowance;
    r.lax_passed = r.lax_residual <= slack;
    r.colligation1_passed = r.colligation1_residual <= tol;
    r.colligation2_passed = r.colligation2_residual <= tol;
    r.input_vessel_passed = r.input_vessel_residual <= slack;
    r.output_vessel_passed = r.output_vessel_residual <= slack;
    r.linkage_passed = r.linkage_residual <= tol;
    return r;
}

/// Cascade: the output of `first` drives `second`; S = S_second * S_first.
inline DifferentialVessel couple(const DifferentialVessel& first, const DifferentialVessel& second,
                                 double chain_tol = 1e-8) {
    const TimeGrid& g = first.grid();
    if (!(second.grid() == g)) fail(ErrorKind::GridMismatch, "coupled vessels live on different grids");
    if (first.signal_dim() != second.signal_dim()) fail(ErrorKind::ShapeMismatch, "signal dimensions differ");
    const auto n1 = first.state_dim();
    const auto n2 = second.state_dim();
    const auto m = first.signal_dim();
    std::vector<ComplexMatrix> a1(g.size()), a2(g.size()), b(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double scale = 1.0 + first.gamma_star()[i].norm();
        if ((first.sigma1()[i] - second.sigma1()[i]).norm() > chain_tol * (1.0 + first.sigma1()[i].norm()) ||
            (first.sigma2()[i] - second.sigma2()[i]).norm() > chain_tol * (1.0 + first.sigma2()[i].norm())) {
            fail(ErrorKind::ChainMismatch, "sigma1/sigma2 differ at node " + std::to_string(i));
        }
        if ((second.gamma()[i] - first.gamma_star()[i]).norm() > chain_tol * scale) {
            fail(ErrorKind::ChainMismatch, "gamma of the second vessel differs from gamma_* of the first at node " +
                                               std::to_string(i));
        }
        const ComplexMatrix& b1 = first.b()[i];
        const ComplexMatrix& b2 = second.b()[i];
        a1[i] = ComplexMatrix::Zero(n1 + n2, n1 + n2);
        a1[i].topLeftCorner(n1, n1) = first.a1()[i];
        a1[i].bottomRightCorner(n2, n2) = second.a1()[i];
        a1[i].bottomLeftCorner(n2, n1) = -b2 * first.sigma1()[i] * b1.adjoint();
        a2[i] = ComplexMatrix::Zero(n1 + n2, n1 + n2);
        a2[i].topLeftCorner(n1, n1) = first.a2()[i];
        a2[i].bottomRightCorner(n2, n2) = second.a2()[i];
        a2[i].bottomLeftCorner(n2, n1) = -b2 * first.sigma2()[i] * b1.adjoint();
        b[i] = ComplexMatrix(n1 + n2, m);
        b[i] << b1, b2;
    }
    return DifferentialVessel(GridFamily(g, std::move(a1)), GridFamily(g, std::move(a2)), GridFamily(g, std::move(b)),
                              first.sigma1(), first.sigma2(), first.gamma(), second.gamma_star());
}

/// || S(-conj(lambda))^H sigma1 S(lambda) - sigma1 ||_F at a node.
inline double adjoint_symmetry_residual(const DifferentialVessel& v, Complex lambda, std::size_t node,
                                        const KernelConfig& cfg = {}) {
    const ComplexMatrix s = eval_transfer(v, lambda, node, cfg);
    const ComplexMatrix s_reflected = eval_transfer(v, -std::conj(lambda), node, cfg);
    const ComplexMatrix& s1 = v.sigma1()[node];
    return (s_reflected.adjoint() * s1 * s - s1).norm();
}

struct ExpansivityReport {
    HermitianMatrix defect;  ///< S^H sigma1 S - sigma1
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    /// Distance between the defect and -2 Re(lambda) sigma1 B^H R(lambda)^H R(lambda) B sigma1.
    /// Under colligation 1 that is an identity, so S is sigma1-contractive where Re(lambda) > 0
    /// and sigma1-expansive where Re(lambda) < 0.
    double closed_form_residual = 0.0;
};

inline ExpansivityReport expansivity_check(const DifferentialVessel& v, Complex lambda, std::size_t node,
                                           const KernelConfig& cfg = {}) {
    const ComplexMatrix s = eval_transfer(v, lambda, node, cfg);
    const ComplexMatrix& s1 = v.sigma1()[node];
    const ComplexMatrix& b = v.b()[node];
    ExpansivityReport rep;
    rep.defect = HermitianMatrix(ComplexMatrix(s.adjoint() * s1 * s - s1));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(rep.defect.matrix(), Eigen::EigenvaluesOnly);
    rep.min_eigenvalue = eig.eigenvalues().minCoeff();
    rep.max_eigenvalue = eig.eigenvalues().maxCoeff();
    const ComplexMatrix rb = resolvent(v.a1()[node], lambda, cfg) * b * s1;
    const ComplexMatrix closed = -2.0 * lambda.real() * rb.adjoint() * rb;
    rep.closed_form_residual = (rep.defect.matrix() - closed).norm();
    return rep;
}

/// max over interior nodes of || dS/dt2 - sigma1^{-1}(sigma2 lambda + gamma_*) S + S sigma1^{-1}(sigma2 lambda + gamma) ||_F.
template <TransferModel Model>
double transfer_pde_residual(const Model& model, Complex lambda) {
    const TimeGrid g = model.grid();
    if (g.n_steps < 2) fail(ErrorKind::GridMismatch, "transfer PDE residual needs at least two steps");
    std::vector<ComplexMatrix> s(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) s[i] = model.transfer(lambda, i);
    const GridFamily& s1 = model.sigma1();
    const GridFamily& s2 = model.sigma2();
    const GridFamily& gam = model.gamma();
    const GridFamily& gam_star = model.gamma_star();
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        auto lu = s1[i].partialPivLu();
        const ComplexMatrix out_coeff = lu.solve(ComplexMatrix(lambda * s2[i] + gam_star[i]));
        const ComplexMatrix in_coeff = lu.solve(ComplexMatrix(lambda * s2[i] + gam[i]));
        const ComplexMatrix res = grid_derivative(s, g.step(), i) - out_coeff * s[i] + s[i] * in_coeff;
        worst = std::max(worst, res.norm());
    }
    return worst;
}

/// max_t || S(t) Phi(lambda,t,tau) - Phi_*(lambda,t,tau) S(tau) ||_F with both fundamental matrices based at `base`.
template <TransferModel Model>
double intertwining_residual(const Model& model, Complex lambda, std::size_t base = 0) {
    const FundamentalMatrix phi_in =
        fundamental_matrix(lambda, model.sigma1(), model.sigma2(), model.gamma(), base, Side::Input);
    const FundamentalMatrix phi_out =
        fundamental_matrix(lambda, model.sigma1(), model.sigma2(), model.gamma_star(), base, Side::Output);
    const ComplexMatrix s_base = model.transfer(lambda, base);
    double worst = 0.0;
    for (std::size_t i = 0; i < model.grid().size(); ++i) {
        worst = std::max(worst, (model.transfer(lambda, i) * phi_in[i] - phi_out[i] * s_base).norm());
    }
    return worst;
}

/// Separated-variable trajectory u(t1,t2) = u_lambda(t2) e^{lambda t1} sampled at t1 = 0.
struct Trajectory {
    Complex lambda;
    GridFamily u, x, y;
    /// 2 Re<A1 x + B sigma1 u, x> + <sigma1 y, y> - <sigma1 u, u> per node (1x1).
    GridFamily energy_defect_t1;
    /// max over interior nodes of |d<x,x>/dt2 - <sigma2 u,u> + <sigma2 y,y>|.
    double energy_defect_t2 = 0.0;

    double max_energy_defect_t1() const {
        double w = 0.0;
        for (const auto& d : energy_defect_t1.samples()) w = std::max(w, std::abs(d(0, 0)));
        return w;
    }
};

inline Trajectory simulate(const DifferentialVessel& v, Complex lambda, const ComplexVector& u0,
                           const KernelConfig& cfg = {}) {
    const auto m = v.signal_dim();
    if (u0.size() != m) fail(ErrorKind::ShapeMismatch, "initial input must have signal dimension");
    const TimeGrid& g = v.grid();
    const FundamentalMatrix phi = fundamental_matrix(lambda, v.sigma1(), v.sigma2(), v.gamma(), 0, Side::Input, cfg);
    std::vector<ComplexMatrix> u(g.size()), x(g.size()), y(g.size()), e1(g.size());
    std::vector<double> xx(g.size());
    auto inner = [](const ComplexMatrix& a, const ComplexMatrix& b) { return (b.adjoint() * a)(0, 0); };
    for (std::size_t i = 0; i < g.size(); ++i) {
        const ComplexMatrix& a1 = v.a1()[i];
        const ComplexMatrix& b = v.b()[i];
        const ComplexMatrix& s1 = v.sigma1()[i];
        u[i] = phi[i] * u0;
        x[i] = resolvent(a1, lambda, cfg) * b * s1 * u[i];
        y[i] = u[i] - b.adjoint() * x[i];
        const ComplexMatrix x_t1 = a1 * x[i] + b * s1 * u[i];
        const double defect = 2.0 * inner(x_t1, x[i]).real() + inner(ComplexMatrix(s1 * y[i]), y[i]).real() -
                              inner(ComplexMatrix(s1 * u[i]), u[i]).real();
        e1[i] = ComplexMatrix::Constant(1, 1, Complex(defect, 0.0));
        xx[i] = x[i].squaredNorm();
    }
    double e2 = 0.0;
    if (g.n_steps >= 2) {
        for (std::size_t i = 1; i + 1 < g.size(); ++i) {
            const double dxx = (xx[i + 1] - xx[i - 1]) / (2.0 * g.step());
            const ComplexMatrix& s2 = v.sigma2()[i];
            const double balance = dxx - inner(ComplexMatrix(s2 * u[i]), u[i]).real() +
                                   inner(ComplexMatrix(s2 * y[i]), y[i]).real();
            e2 = std::max(e2, std::abs(balance));
        }
    }
    return Trajectory{lambda,
                      GridFamily(g, std::move(u)),
                      GridFamily(g, std::move(x)),
                      GridFamily(g, std::move(y)),
                      GridFamily(g, std::move(e1)),
                      e2};
}

/// dU with dU U^H forced skew-Hermitian, as it is for an exactly unitary U.
inline GridFamily skew_derivative(const GridFamily& u) {
    return u.map([&](const ComplexMatrix& ui, std::size_t i) {
        const ComplexMatrix t = u.derivative(i) * ui.adjoint();
        return ComplexMatrix(0.5 * (t - t.adjoint()) * ui);
    });
}

/// Unitary change of state frame U(t2) together with its t2-derivative.
struct GaugeMap {
    GridFamily u;
    GridFamily du;

    /// Builds the map from U alone; dU comes from second-order finite differences.
    /// U' U^H is exactly skew for unitary U, so the estimate is projected onto that part
    /// (otherwise the second colligation picks up an O(h^2) Hermitian error).
    static GaugeMap from_unitary(GridFamily u, double unitary_tol = 1e-8) {
        require_unitary(u, unitary_tol);
        GridFamily du = skew_derivative(u);
        return GaugeMap{std::move(u), std::move(du)};
    }

    static GaugeMap constant(const TimeGrid& grid, const ComplexMatrix& u0, double unitary_tol = 1e-8) {
        GridFamily u = GridFamily::constant(grid, u0);
        require_unitary(u, unitary_tol);
        return GaugeMap{u, GridFamily::constant(grid, ComplexMatrix::Zero(u0.rows(), u0.cols()))};
    }

    double unitarity_defect() const {
        double w = 0.0;
        for (const auto& s : u.samples()) w = std::max(w, (s.adjoint() * s - identity(s.rows())).norm());
        return w;
    }

   private:
    static void require_unitary(const GridFamily& u, double tol) {
        require_shape(u, u.rows(), u.rows(), "gauge map");
        for (std::size_t i = 0; i < u.size(); ++i) {
            if ((u[i].adjoint() * u[i] - identity(u.rows())).norm() > tol) {
                fail(ErrorKind::InvalidInput, "gauge map is not unitary at node " + std::to_string(i));
            }
        }
    }
};

/// A1 -> U A1 U^H, B -> U B, A2 -> U A2 U^H + U' U^H.
inline DifferentialVessel gauge_transform(const DifferentialVessel& v, const GaugeMap& gauge) {
    const TimeGrid& g = v.grid();
    require_same_grid(gauge.u, g, "gauge map");
    require_same_grid(gauge.du, g, "gauge derivative");
    require_shape(gauge.u, v.state_dim(), v.state_dim(), "gauge map");
    require_shape(gauge.du, v.state_dim(), v.state_dim(), "gauge derivative");
    std::vector<ComplexMatrix> a1(g.size()), a2(g.size()), b(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const ComplexMatrix& u = gauge.u[i];
        a1[i] = u * v.a1()[i] * u.adjoint();
        a2[i] = u * v.a2()[i] * u.adjoint() + gauge.du[i] * u.adjoint();
        b[i] = u * v.b()[i];
    }
    return DifferentialVessel(GridFamily(g, std::move(a1)), GridFamily(g, std::move(a2)), GridFamily(g, std::move(b)),
                              v.sigma1(), v.sigma2(), v.gamma(), v.gamma_star());
}

/// [B, A1 B, ..., A1^{n-1} B] in that column order.
inline ComplexMatrix krylov_matrix(const ComplexMatrix& a1, const ComplexMatrix& b) {
    const auto n = a1.rows();
    const auto m = b.cols();
    ComplexMatrix k(n, n * m);
    ComplexMatrix block = b;
    for (Eigen::Index j = 0; j < n; ++j) {
        k.middleCols(j * m, m) = block;
        block = a1 * block;
    }
    return k;
}

inline Eigen::Index krylov_rank(const DifferentialVessel& v, std::size_t node, double rel_tol = 1e-10) {
    return numerical_rank(krylov_matrix(v.a1()[node], v.b()[node]), rel_tol);
}

struct GaugeEquivalence {
    bool equivalent = false;
    std::optional<GaugeMap> map;
    double unitarity_defect = 0.0;
    double transfer_mismatch = 0.0;
    std::string reason;
};

/// Deterministic probe points on a circle that encloses both spectra with margin.
inline std::vector<Complex> circle_probes(double radius, std::size_t count) {
    std::vector<Complex> out;
    out.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double angle = 2.0 * std::numbers::pi * (static_cast<double>(j) + 0.37) / static_cast<double>(count);
        out.push_back(std::polar(radius, angle));
    }
    return out;
}

/// Recovers the unitary U with U A1^k B = A1'^k B' on the Krylov columns at every node and
/// checks it against transfer-function probes. Both vessels must be minimal.
inline GaugeEquivalence gauge_equivalence(const DifferentialVessel& v1, const DifferentialVessel& v2, std::size_t node,
                                          std::size_t probes = 20, double tol = 1e-8) {
    const TimeGrid& g = v1.grid();
    if (!(v2.grid() == g)) fail(ErrorKind::GridMismatch, "vessels live on different grids");
    if (node >= g.size()) fail(ErrorKind::InvalidInput, "node index out of range");
    GaugeEquivalence out;
    if (v1.state_dim() != v2.state_dim() || v1.signal_dim() != v2.signal_dim()) {
        out.reason = "dimension mismatch";
        return out;
    }
    const auto n = v1.state_dim();
    for (const auto* v : {&v1, &v2}) {
        const auto rank = krylov_rank(*v, node);
        if (rank < n) fail(ErrorKind::NotMinimal, "Krylov rank " + std::to_string(rank) + " < " + std::to_string(n));
    }
    std::vector<ComplexMatrix> us(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const ComplexMatrix k1 = krylov_matrix(v1.a1()[i], v1.b()[i]);
        const ComplexMatrix k2 = krylov_matrix(v2.a1()[i], v2.b()[i]);
        // U K1 = K2  <=>  K1^H U^H = K2^H, solved by column-pivoted QR.
        us[i] = ComplexMatrix(k1.adjoint()).colPivHouseholderQr().solve(ComplexMatrix(k2.adjoint())).adjoint();
    }
    GridFamily u(g, std::move(us));
    for (const auto& s : u.samples()) {
        out.unitarity_defect = std::max(out.unitarity_defect, (s.adjoint() * s - identity(n)).norm());
    }
    const double radius = 2.0 * std::max(v1.a1()[node].norm(), v2.a1()[node].norm()) + 1.0;
    for (const Complex lambda : circle_probes(radius, probes)) {
        out.transfer_mismatch = std::max(
            out.transfer_mismatch, (eval_transfer(v1, lambda, node) - eval_transfer(v2, lambda, node)).norm());
    }
    if (out.unitarity_defect >= tol) {
        out.reason = "Krylov map is not unitary";
    } else if (out.transfer_mismatch >= tol) {
        out.reason = "transfer functions differ at probes";
    } else {
        out.equivalent = true;
        GridFamily du = skew_derivative(u);
        out.map = GaugeMap{std::move(u), std::move(du)};
    }
    return out;
}

}  // namespace vesselkit
