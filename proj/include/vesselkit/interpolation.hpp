#pragma once

// Zero/pole interpolation data and the realizations built from it.
//
// Realizations here are written as S = I + C (lambda I - A_pi)^{-1} X^{-1} B sigma1.
// A conservative vessel maps to this form by A_pi = A1, C = -B^H, A_xi = -A1^H, X = I.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vesselkit/matrix_kernel.hpp"
#include "vesselkit/ode.hpp"
#include "vesselkit/vessel.hpp"

namespace vesselkit {

/// (C, A_pi) right pole pair, (A_xi, B) left null pair and their coupling matrix X.
struct NullPoleTriple {
    GridFamily c;        ///< m x n
    ComplexMatrix a_pi;  ///< n x n
    ComplexMatrix a_xi;  ///< k x k
    GridFamily bn;       ///< k x m
    GridFamily x;        ///< k x n
};

namespace detail {

inline void require_constant(const GridFamily& f, const char* what) {
    for (std::size_t i = 1; i < f.size(); ++i) {
        if (f[i] != f[0]) fail(ErrorKind::InvalidInput, std::string(what) + " must be constant in t2 here");
    }
}

inline void check_pair_shapes(const GridFamily& c, const ComplexMatrix& a_pi, const ComplexMatrix& a_xi,
                              const GridFamily& bn, const GridFamily& sigma1) {
    require_square(a_pi, "A_pi");
    require_square(a_xi, "A_xi");
    const auto m = sigma1.rows();
    require_shape(c, m, a_pi.rows(), "C");
    require_shape(bn, a_xi.rows(), m, "B");
    require_same_grid(c, sigma1.grid(), "C");
    require_same_grid(bn, sigma1.grid(), "B");
}

}  // namespace detail

/// || X A_pi - A_xi X - B sigma1 C ||_F at one node.
inline double sylvester_residual(const NullPoleTriple& t, const GridFamily& sigma1, std::size_t node) {
    return (t.x[node] * t.a_pi - t.a_xi * t.x[node] - t.bn[node] * sigma1[node] * t.c[node]).norm();
}

inline double max_sylvester_residual(const NullPoleTriple& t, const GridFamily& sigma1) {
    double w = 0.0;
    for (std::size_t i = 0; i < t.x.size(); ++i) w = std::max(w, sylvester_residual(t, sigma1, i));
    return w;
}

/// Magnitude of the terms in the Sylvester equation at one node, for relative tolerances.
inline double sylvester_scale(const NullPoleTriple& t, const GridFamily& sigma1, std::size_t node) {
    return 1.0 + t.x[node].norm() * (t.a_pi.norm() + t.a_xi.norm()) +
           (t.bn[node] * sigma1[node] * t.c[node]).norm();
}

/// Residuals of sigma1 C' = sigma2 C A_pi + gamma_* C and B' sigma1 = -A_xi B sigma2 - B gamma_*.
struct PairOdeResiduals {
    double pole_pair = 0.0;
    double null_pair = 0.0;
};

inline PairOdeResiduals pair_ode_residuals(const NullPoleTriple& t, const GridFamily& sigma1, const GridFamily& sigma2,
                                           const GridFamily& gamma_star) {
    PairOdeResiduals r;
    for (std::size_t i = 0; i < t.c.size(); ++i) {
        const ComplexMatrix rc = sigma1[i] * t.c.derivative(i) - sigma2[i] * t.c[i] * t.a_pi - gamma_star[i] * t.c[i];
        const ComplexMatrix rb =
            t.bn.derivative(i) * sigma1[i] + t.a_xi * t.bn[i] * sigma2[i] + t.bn[i] * gamma_star[i];
        r.pole_pair = std::max(r.pole_pair, rc.norm());
        r.null_pair = std::max(r.null_pair, rb.norm());
    }
    return r;
}

/// X' = B sigma2 C from X0 at node `base`, forward and backward. X0 must solve the
/// Sylvester equation at the base node; with sigma1 constant the residual is then conserved.
inline GridFamily evolve_coupling(const GridFamily& c, const ComplexMatrix& a_pi, const ComplexMatrix& a_xi,
                                  const GridFamily& bn, const ComplexMatrix& x0, const GridFamily& sigma1,
                                  const GridFamily& sigma2, std::size_t base = 0, double tol = 1e-8) {
    detail::check_pair_shapes(c, a_pi, a_xi, bn, sigma1);
    require_same_grid(sigma2, sigma1.grid(), "sigma2");
    const TimeGrid& g = sigma1.grid();
    if (base >= g.size()) fail(ErrorKind::InvalidInput, "base node out of range");
    if (x0.rows() != a_xi.rows() || x0.cols() != a_pi.rows()) fail(ErrorKind::ShapeMismatch, "X0 must be k x n");
    const ComplexMatrix q0 = bn[base] * sigma1[base] * c[base];
    const double r0 = (x0 * a_pi - a_xi * x0 - q0).norm();
    const double scale = 1.0 + x0.norm() * (a_pi.norm() + a_xi.norm()) + q0.norm();
    if (!(r0 <= tol * scale)) {
        fail(ErrorKind::InconsistentInitialData, "initial Sylvester residual " + std::to_string(r0));
    }
    auto rhs = [&](double t, const ComplexMatrix&) -> ComplexMatrix { return bn.at(t) * sigma2.at(t) * c.at(t); };
    return GridFamily(g, integrate_rk4(rhs, x0, g, base));
}

/// Evolves C and B by their pair equations from values at `base`, then X by evolve_coupling
/// with X(base) the Sylvester solution.
inline NullPoleTriple evolve_null_pole(const ComplexMatrix& c0, const ComplexMatrix& a_pi, const ComplexMatrix& a_xi,
                                       const ComplexMatrix& bn0, const GridFamily& sigma1, const GridFamily& sigma2,
                                       const GridFamily& gamma_star, std::size_t base = 0,
                                       const KernelConfig& cfg = {}) {
    const TimeGrid& g = sigma1.grid();
    require_same_grid(sigma2, g, "sigma2");
    require_same_grid(gamma_star, g, "gamma_star");
    require_invertible_sigma1(sigma1, cfg);
    detail::require_constant(sigma1, "sigma1");
    require_square(a_pi, "A_pi");
    require_square(a_xi, "A_xi");
    const auto m = sigma1.rows();
    if (c0.rows() != m || c0.cols() != a_pi.rows()) fail(ErrorKind::ShapeMismatch, "C must be m x n");
    if (bn0.rows() != a_xi.rows() || bn0.cols() != m) fail(ErrorKind::ShapeMismatch, "B must be k x m");
    const ComplexMatrix s1_inv = sigma1[0].partialPivLu().solve(identity(m));
    auto c_rhs = [&](double t, const ComplexMatrix& c) -> ComplexMatrix {
        return s1_inv * (sigma2.at(t) * c * a_pi + gamma_star.at(t) * c);
    };
    auto b_rhs = [&](double t, const ComplexMatrix& b) -> ComplexMatrix {
        return (-a_xi * b * sigma2.at(t) - b * gamma_star.at(t)) * s1_inv;
    };
    GridFamily c(g, integrate_rk4(c_rhs, c0, g, base));
    GridFamily bn(g, integrate_rk4(b_rhs, bn0, g, base));
    const ComplexMatrix x0 = solve_sylvester(a_pi, a_xi, ComplexMatrix(bn0 * sigma1[base] * c0), cfg);
    GridFamily x = evolve_coupling(c, a_pi, a_xi, bn, x0, sigma1, sigma2, base);
    return NullPoleTriple{std::move(c), a_pi, a_xi, std::move(bn), std::move(x)};
}

/// Realization I + C (lambda - A_pi)^{-1} Bt sigma1 with Bt = X^{-1} B and gamma from the linkage formula.
/// It need not be conservative, so it is kept apart from DifferentialVessel; its state operators are
/// A1 = A_pi, A2 = 0, input operator Bt and output operator C.
class ZeroPoleRealization {
   public:
    ZeroPoleRealization(TimeGrid grid, ComplexMatrix a_pi, std::vector<ComplexMatrix> c, std::vector<ComplexMatrix> bt,
                        GridFamily sigma1, GridFamily sigma2, GridFamily gamma, GridFamily gamma_star,
                        std::vector<std::size_t> singular_nodes, KernelConfig cfg)
        : grid_(grid),
          a_pi_(std::move(a_pi)),
          c_(std::move(c)),
          bt_(std::move(bt)),
          sigma1_(std::move(sigma1)),
          sigma2_(std::move(sigma2)),
          gamma_(std::move(gamma)),
          gamma_star_(std::move(gamma_star)),
          singular_(std::move(singular_nodes)),
          cfg_(cfg) {}

    const TimeGrid& grid() const { return grid_; }
    const ComplexMatrix& a_pi() const { return a_pi_; }
    const GridFamily& sigma1() const { return sigma1_; }
    const GridFamily& sigma2() const { return sigma2_; }
    /// Placeholder gamma_* at singular nodes, where no realization exists.
    const GridFamily& gamma() const { return gamma_; }
    const GridFamily& gamma_star() const { return gamma_star_; }
    const std::vector<std::size_t>& singular_nodes() const { return singular_; }
    bool is_singular(std::size_t node) const { return std::find(singular_.begin(), singular_.end(), node) != singular_.end(); }
    const ComplexMatrix& c(std::size_t node) const { return c_[node]; }
    const ComplexMatrix& b_tilde(std::size_t node) const { return bt_[node]; }

    ComplexMatrix transfer(Complex lambda, std::size_t node) const {
        if (node >= grid_.size()) fail(ErrorKind::InvalidInput, "node index out of range");
        if (is_singular(node)) fail(ErrorKind::CouplingSingular, "X is singular at node " + std::to_string(node));
        const auto m = sigma1_.rows();
        return identity(m) + c_[node] * resolvent(a_pi_, lambda, cfg_) * bt_[node] * sigma1_[node];
    }

    struct Residuals {
        double input = 0.0;    ///< Bt' sigma1 + A_pi Bt sigma2 + Bt gamma
        double output = 0.0;   ///< sigma1 C' - sigma2 C A_pi - gamma_* C
        double linkage = 0.0;  ///< gamma_* - gamma - sigma1 C Bt sigma2 + sigma2 C Bt sigma1
    };

    /// Condition residuals over nodes whose neighbours are all regular.
    Residuals condition_residuals() const {
        Residuals r;
        const double h = grid_.step();
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            if (is_singular(i) || (i > 0 && is_singular(i - 1)) || (i + 1 < grid_.size() && is_singular(i + 1))) continue;
            const ComplexMatrix& s1 = sigma1_[i];
            const ComplexMatrix& s2 = sigma2_[i];
            const ComplexMatrix in =
                grid_derivative(bt_, h, i) * s1 + a_pi_ * bt_[i] * s2 + bt_[i] * gamma_[i];
            const ComplexMatrix out = s1 * grid_derivative(c_, h, i) - s2 * c_[i] * a_pi_ - gamma_star_[i] * c_[i];
            const ComplexMatrix cb = c_[i] * bt_[i];
            const ComplexMatrix link = gamma_star_[i] - gamma_[i] - s1 * cb * s2 + s2 * cb * s1;
            r.input = std::max(r.input, in.norm());
            r.output = std::max(r.output, out.norm());
            r.linkage = std::max(r.linkage, link.norm());
        }
        return r;
    }

   private:
    TimeGrid grid_;
    ComplexMatrix a_pi_;
    std::vector<ComplexMatrix> c_, bt_;
    GridFamily sigma1_, sigma2_, gamma_, gamma_star_;
    std::vector<std::size_t> singular_;
    KernelConfig cfg_;
};

/// Builds the unique realization carried by a square triple. Nodes where |det X| <= eps_det
/// are listed, not fatal; transfer() raises CouplingSingular there.
inline ZeroPoleRealization zero_pole_realize(const NullPoleTriple& t, const GridFamily& gamma_star,
                                             const GridFamily& sigma1, const GridFamily& sigma2,
                                             const KernelConfig& cfg = {}, double eps_det = 1e-10) {
    const TimeGrid& g = sigma1.grid();
    detail::check_pair_shapes(t.c, t.a_pi, t.a_xi, t.bn, sigma1);
    require_same_grid(sigma2, g, "sigma2");
    require_same_grid(gamma_star, g, "gamma_star");
    require_same_grid(t.x, g, "X");
    if (t.a_pi.rows() != t.a_xi.rows()) fail(ErrorKind::ShapeMismatch, "realization needs n = k");
    require_shape(t.x, t.a_xi.rows(), t.a_pi.rows(), "X");
    require_invertible_sigma1(sigma1, cfg);
    const auto m = sigma1.rows();
    const auto n = t.a_pi.rows();

    std::vector<ComplexMatrix> c(g.size()), bt(g.size()), gam(g.size());
    std::vector<std::size_t> singular;
    for (std::size_t i = 0; i < g.size(); ++i) {
        c[i] = t.c[i];
        auto lu = t.x[i].fullPivLu();
        if (!(std::abs(lu.determinant()) > eps_det) || lu.rank() < n) {
            singular.push_back(i);
            bt[i] = ComplexMatrix::Zero(n, m);
            gam[i] = gamma_star[i];
            continue;
        }
        bt[i] = lu.solve(t.bn[i]);
        const ComplexMatrix cb = c[i] * bt[i];
        gam[i] = sigma2[i] * cb * sigma1[i] - sigma1[i] * cb * sigma2[i] + gamma_star[i];
    }
    return ZeroPoleRealization(g, t.a_pi, std::move(c), std::move(bt), sigma1, sigma2, GridFamily(g, std::move(gam)),
                               gamma_star, std::move(singular), cfg);
}

/// Null-pole triple of a minimal vessel, anchored at `node_ref` and carried to every node by the
/// pair equations and evolve_coupling. Needs sigma1 constant in t2.
inline NullPoleTriple extract_null_pole(const DifferentialVessel& v, std::size_t node_ref, const KernelConfig& cfg = {}) {
    if (node_ref >= v.grid().size()) fail(ErrorKind::InvalidInput, "reference node out of range");
    const auto n = v.state_dim();
    const auto rank = krylov_rank(v, node_ref);
    if (rank < n) fail(ErrorKind::NotMinimal, "Krylov rank " + std::to_string(rank) + " < " + std::to_string(n));
    const ComplexMatrix& a1 = v.a1()[node_ref];
    const ComplexMatrix& b = v.b()[node_ref];
    return evolve_null_pole(ComplexMatrix(-b.adjoint()), a1, ComplexMatrix(-a1.adjoint()), b, v.sigma1(), v.sigma2(),
                            v.gamma_star(), node_ref, cfg);
}

/// Per-node Lyapunov solution X A1 + A1^H X = -C^H sigma1 C and the frame Y = sqrt(X) in which
/// (Y A1 Y^{-1}, C Y^{-1}) is a colligation.
struct HermitianRealization {
    GridFamily c;
    ComplexMatrix a1;
    GridFamily sigma1;
    GridFamily x;
    GridFamily y;
    GridFamily a1_tilde;
    GridFamily c_tilde;
    std::vector<double> min_eigenvalue;  ///< of X, per node
    double max_x_jump = 0.0;             ///< max ||X_{i+1} - X_i||_F
    double colligation_residual = 0.0;   ///< max ||At + At^H + Ct^H sigma1 Ct||_F
    KernelConfig cfg{};

    /// I + C (lambda + A1)^{-1} X^{-1} C^H sigma1.
    ComplexMatrix transfer(Complex lambda, std::size_t node) const {
        const auto m = sigma1.rows();
        const ComplexMatrix xinv_ch = x[node].partialPivLu().solve(ComplexMatrix(c[node].adjoint()));
        return identity(m) + c[node] * resolvent(ComplexMatrix(-a1), lambda, cfg) * xinv_ch * sigma1[node];
    }

    /// I + Ct (lambda + At)^{-1} Ct^H sigma1, the same function in the transformed frame.
    ComplexMatrix transfer_tilde(Complex lambda, std::size_t node) const {
        const auto m = sigma1.rows();
        return identity(m) + c_tilde[node] * resolvent(ComplexMatrix(-a1_tilde[node]), lambda, cfg) *
                                 c_tilde[node].adjoint() * sigma1[node];
    }
};

inline HermitianRealization hermitian_realize(const GridFamily& c, const ComplexMatrix& a1, const GridFamily& sigma1,
                                              const KernelConfig& cfg = {}) {
    require_square(a1, "A1");
    require_finite(a1, "A1");
    const TimeGrid& g = sigma1.grid();
    require_same_grid(c, g, "C");
    const auto n = a1.rows();
    const auto m = sigma1.rows();
    require_shape(c, m, n, "C");
    require_invertible_sigma1(sigma1, cfg);

    HermitianRealization out;
    out.c = c;
    out.a1 = a1;
    out.sigma1 = sigma1;
    out.cfg = cfg;
    std::vector<ComplexMatrix> xs(g.size()), ys(g.size()), at(g.size()), ct(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const ComplexMatrix obs = krylov_matrix(ComplexMatrix(a1.adjoint()), ComplexMatrix(c[i].adjoint()));
        const auto rank = numerical_rank(obs);
        if (rank < n) {
            fail(ErrorKind::NotMinimal, "(A1, C) not observable at node " + std::to_string(i) + ": rank " +
                                            std::to_string(rank));
        }
        const ComplexMatrix q = -c[i].adjoint() * sigma1[i] * c[i];
        const HermitianMatrix x(solve_sylvester(a1, ComplexMatrix(-a1.adjoint()), q, cfg));
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(x.matrix(), Eigen::EigenvaluesOnly);
        out.min_eigenvalue.push_back(eig.eigenvalues().minCoeff());
        const HermitianMatrix y = hermitian_sqrt(x, true, cfg);
        const ComplexMatrix y_inv = y.matrix().partialPivLu().solve(identity(n));
        xs[i] = x.matrix();
        ys[i] = y.matrix();
        at[i] = y.matrix() * a1 * y_inv;
        ct[i] = c[i] * y_inv;
        const ComplexMatrix coll = at[i] + at[i].adjoint() + ct[i].adjoint() * sigma1[i] * ct[i];
        out.colligation_residual = std::max(out.colligation_residual, coll.norm());
        if (i > 0) out.max_x_jump = std::max(out.max_x_jump, (xs[i] - xs[i - 1]).norm());
    }
    out.x = GridFamily(g, std::move(xs));
    out.y = GridFamily(g, std::move(ys));
    out.a1_tilde = GridFamily(g, std::move(at));
    out.c_tilde = GridFamily(g, std::move(ct));
    return out;
}

/// max over probes of || S(lambda) sigma1^{-1} S(-conj(lambda))^H - sigma1^{-1} ||_F at a node.
template <class Transfer>
double inverse_symmetry_residual(Transfer&& transfer, const ComplexMatrix& sigma1, const std::vector<Complex>& probes) {
    const ComplexMatrix s1_inv = sigma1.partialPivLu().solve(identity(sigma1.rows()));
    double worst = 0.0;
    for (const Complex lambda : probes) {
        const ComplexMatrix s = transfer(lambda);
        const ComplexMatrix s_ref = transfer(-std::conj(lambda));
        worst = std::max(worst, (s * s1_inv * s_ref.adjoint() - s1_inv).norm());
    }
    return worst;
}

}  // namespace vesselkit
