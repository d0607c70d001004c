#pragma once

// Uniform t2 grids, grid-sampled operator families and the fixed-step
// integrator used for every linear ODE with a spectral parameter.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vesselkit/matrix_kernel.hpp"

namespace vesselkit {

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    std::size_t n_steps = 1;

    TimeGrid() = default;
    TimeGrid(double start, double end, std::size_t steps) : t_start(start), t_end(end), n_steps(steps) {
        validate();
    }

    void validate() const {
        if (n_steps < 1) fail(ErrorKind::InvalidInput, "time grid needs at least one step");
        if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_end > t_start)) {
            fail(ErrorKind::InvalidInput, "time grid needs finite t_start < t_end");
        }
    }

    double step() const { return (t_end - t_start) / static_cast<double>(n_steps); }
    std::size_t size() const { return n_steps + 1; }
    double node(std::size_t i) const {
        return i == n_steps ? t_end : t_start + static_cast<double>(i) * step();
    }

    /// Grid with twice as many steps over the same interval.
    TimeGrid refined() const { return TimeGrid(t_start, t_end, 2 * n_steps); }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
        return a.t_start == b.t_start && a.t_end == b.t_end && a.n_steps == b.n_steps;
    }
};

/// Uniform grid with the default resolution of `steps_per_unit` steps per unit of t2.
inline TimeGrid make_grid(double t_start, double t_end, std::size_t steps_per_unit = 200) {
    const auto steps = static_cast<std::size_t>(std::ceil((t_end - t_start) * static_cast<double>(steps_per_unit)));
    return TimeGrid(t_start, t_end, std::max<std::size_t>(steps, 1));
}

/// Second-order difference quotient at node i: central inside, three-point one-sided at the ends.
template <class Matrix>
Matrix grid_derivative(const std::vector<Matrix>& samples, double h, std::size_t i) {
    const std::size_t last = samples.size() - 1;
    if (samples.size() < 3) {
        return (samples[last] - samples[0]) / (h * static_cast<double>(last));
    }
    if (i == 0) return (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * h);
    if (i == last) return (3.0 * samples[last] - 4.0 * samples[last - 1] + samples[last - 2]) / (2.0 * h);
    return (samples[i + 1] - samples[i - 1]) / (2.0 * h);
}

/// One matrix sample per node of a TimeGrid, all of the same shape.
class GridFamily {
   public:
    GridFamily() = default;
    GridFamily(TimeGrid grid, std::vector<ComplexMatrix> samples) : grid_(grid), samples_(std::move(samples)) {
        validate();
    }

    /// Family equal to `value` at every node.
    static GridFamily constant(const TimeGrid& grid, const ComplexMatrix& value) {
        return GridFamily(grid, std::vector<ComplexMatrix>(grid.size(), value));
    }

    /// Family sampled from a function of t2.
    template <class Fn>
    static GridFamily sample(const TimeGrid& grid, Fn&& fn) {
        std::vector<ComplexMatrix> s;
        s.reserve(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) s.emplace_back(fn(grid.node(i)));
        return GridFamily(grid, std::move(s));
    }

    const TimeGrid& grid() const { return grid_; }
    std::size_t size() const { return samples_.size(); }
    Eigen::Index rows() const { return samples_.front().rows(); }
    Eigen::Index cols() const { return samples_.front().cols(); }
    const ComplexMatrix& operator[](std::size_t i) const { return samples_[i]; }
    const std::vector<ComplexMatrix>& samples() const { return samples_; }

    /// Value between nodes by four-point Lagrange interpolation (exact at nodes).
    ComplexMatrix at(double t) const {
        const std::size_t count = samples_.size();
        const double h = grid_.step();
        const double pos = (t - grid_.t_start) / h;
        const std::size_t width = std::min<std::size_t>(4, count);
        auto nearest = static_cast<long>(std::llround(pos));
        if (std::abs(pos - static_cast<double>(nearest)) < 1e-12 && nearest >= 0 &&
            nearest < static_cast<long>(count)) {
            return samples_[static_cast<std::size_t>(nearest)];
        }
        long first = static_cast<long>(std::floor(pos)) - static_cast<long>(width / 2) + 1;
        first = std::clamp<long>(first, 0, static_cast<long>(count - width));
        ComplexMatrix out = ComplexMatrix::Zero(rows(), cols());
        for (std::size_t a = 0; a < width; ++a) {
            double w = 1.0;
            const double xa = static_cast<double>(first + static_cast<long>(a));
            for (std::size_t b = 0; b < width; ++b) {
                if (a == b) continue;
                const double xb = static_cast<double>(first + static_cast<long>(b));
                w *= (pos - xb) / (xa - xb);
            }
            out += w * samples_[static_cast<std::size_t>(first) + a];
        }
        return out;
    }

    /// d/dt2 at node i by second-order finite differences.
    ComplexMatrix derivative(std::size_t i) const { return grid_derivative(samples_, grid_.step(), i); }

    GridFamily derivative_family() const {
        std::vector<ComplexMatrix> d;
        d.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) d.push_back(derivative(i));
        return GridFamily(grid_, std::move(d));
    }

    /// Pointwise transform of every sample.
    template <class Fn>
    GridFamily map(Fn&& fn) const {
        std::vector<ComplexMatrix> out;
        out.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) out.emplace_back(fn(samples_[i], i));
        return GridFamily(grid_, std::move(out));
    }

    friend bool operator==(const GridFamily& a, const GridFamily& b) {
        if (!(a.grid_ == b.grid_) || a.samples_.size() != b.samples_.size()) return false;
        for (std::size_t i = 0; i < a.samples_.size(); ++i) {
            if (a.samples_[i].rows() != b.samples_[i].rows() || a.samples_[i].cols() != b.samples_[i].cols() ||
                a.samples_[i] != b.samples_[i]) {
                return false;
            }
        }
        return true;
    }

   private:
    void validate() const {
        grid_.validate();
        if (samples_.size() != grid_.size()) {
            fail(ErrorKind::GridMismatch, "family has " + std::to_string(samples_.size()) + " samples for " +
                                              std::to_string(grid_.size()) + " grid nodes");
        }
        for (const auto& s : samples_) {
            require_nonempty(s, "family sample");
            require_finite(s, "family sample");
            if (s.rows() != samples_.front().rows() || s.cols() != samples_.front().cols()) {
                fail(ErrorKind::ShapeMismatch, "family samples differ in shape");
            }
        }
    }

    TimeGrid grid_;
    std::vector<ComplexMatrix> samples_;
};

inline void require_shape(const GridFamily& f, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (f.rows() != rows || f.cols() != cols) {
        fail(ErrorKind::ShapeMismatch, std::string(what) + " must be " + std::to_string(rows) + "x" +
                                           std::to_string(cols) + ", got " + std::to_string(f.rows()) + "x" +
                                           std::to_string(f.cols()));
    }
}

inline void require_same_grid(const GridFamily& f, const TimeGrid& grid, const char* what) {
    if (!(f.grid() == grid)) fail(ErrorKind::GridMismatch, std::string(what) + " lives on a different grid");
}

enum class Direction { Forward, Backward };

/// Classical fourth-order Runge-Kutta for M' = rhs(t, M), sampled at every node.
/// The initial value sits at `base`; the solution is marched forward to the last node
/// and backward (integrating with negative step) to node 0.
template <class Rhs>
std::vector<ComplexMatrix> integrate_rk4(Rhs&& rhs, const ComplexMatrix& m0, const TimeGrid& grid,
                                         std::size_t base) {
    if (base >= grid.size()) fail(ErrorKind::InvalidInput, "integration base node out of range");
    require_finite(m0, "initial value");
    std::vector<ComplexMatrix> out(grid.size());
    out[base] = m0;
    const double h = grid.step();
    auto step = [&](const ComplexMatrix& m, double t, double dt) {
        const ComplexMatrix k1 = rhs(t, m);
        const ComplexMatrix k2 = rhs(t + dt / 2, ComplexMatrix(m + (dt / 2) * k1));
        const ComplexMatrix k3 = rhs(t + dt / 2, ComplexMatrix(m + (dt / 2) * k2));
        const ComplexMatrix k4 = rhs(t + dt, ComplexMatrix(m + dt * k3));
        ComplexMatrix next = m + (dt / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!next.allFinite()) {
            fail(ErrorKind::NonFinite, "integration blew up near t = " + std::to_string(t));
        }
        return next;
    };
    for (std::size_t i = base; i + 1 < grid.size(); ++i) out[i + 1] = step(out[i], grid.node(i), h);
    for (std::size_t i = base; i > 0; --i) out[i - 1] = step(out[i], grid.node(i), -h);
    return out;
}

/// M' = coeff(t) M with a coefficient given as a function of continuous t2.
template <class Coeff>
GridFamily integrate_linear_ode_continuous(Coeff&& coeff, const ComplexMatrix& m0, const TimeGrid& grid,
                                           Direction direction = Direction::Forward) {
    const std::size_t base = direction == Direction::Forward ? 0 : grid.n_steps;
    auto rhs = [&](double t, const ComplexMatrix& m) -> ComplexMatrix { return coeff(t) * m; };
    return GridFamily(grid, integrate_rk4(rhs, m0, grid, base));
}

/// M' = coeff M where the coefficient is known at grid nodes only; RK stages between
/// nodes use the interpolated coefficient family.
template <class CoeffAtNode>
GridFamily integrate_linear_ode(CoeffAtNode&& coeff_at_node, const ComplexMatrix& m0, const TimeGrid& grid,
                                Direction direction = Direction::Forward) {
    const GridFamily coeff = GridFamily::sample(grid, [&, i = std::size_t{0}](double) mutable {
        return ComplexMatrix(coeff_at_node(i++));
    });
    if (coeff.rows() != coeff.cols() || coeff.cols() != m0.rows()) {
        fail(ErrorKind::ShapeMismatch, "coefficient and initial value shapes do not chain");
    }
    return integrate_linear_ode_continuous([&](double t) { return coeff.at(t); }, m0, grid, direction);
}

enum class Side { Input, Output };

inline const char* to_string(Side side) { return side == Side::Input ? "input" : "output"; }

/// Grid-sampled solution of  lambda sigma2 u - sigma1 u' + gamma u = 0  normalised to I at the base node.
struct FundamentalMatrix {
    Complex lambda;
    std::size_t base_index = 0;
    GridFamily family;
    Side side = Side::Input;

    double base_point() const { return family.grid().node(base_index); }
    const ComplexMatrix& operator[](std::size_t i) const { return family[i]; }
};

/// Checks that sigma1 is invertible at every node of the family.
inline void require_invertible_sigma1(const GridFamily& sigma1, const KernelConfig& cfg = {}) {
    for (std::size_t i = 0; i < sigma1.size(); ++i) {
        const double smin = min_singular_value(sigma1[i]);
        if (!(smin > cfg.eps_spec * sigma1[i].norm())) {
            fail(ErrorKind::SingularSigma1, "sigma1 is singular at node " + std::to_string(i));
        }
    }
}

/// Coefficient sigma1^{-1}(lambda sigma2 + gamma) of the spectral ODE at continuous t2.
inline ComplexMatrix spectral_coefficient(const GridFamily& sigma1, const GridFamily& sigma2,
                                          const GridFamily& gamma, Complex lambda, double t) {
    const ComplexMatrix rhs = lambda * sigma2.at(t) + gamma.at(t);
    return sigma1.at(t).partialPivLu().solve(rhs);
}

/// Phi' = sigma1^{-1}(lambda sigma2 + gamma) Phi with Phi = I at `base_index`.
/// Pass gamma_* instead of gamma (and Side::Output) for the output equation.
inline FundamentalMatrix fundamental_matrix(Complex lambda, const GridFamily& sigma1, const GridFamily& sigma2,
                                            const GridFamily& gamma, std::size_t base_index = 0,
                                            Side side = Side::Input, const KernelConfig& cfg = {}) {
    const TimeGrid& grid = sigma1.grid();
    require_same_grid(sigma2, grid, "sigma2");
    require_same_grid(gamma, grid, "gamma");
    const auto m = sigma1.rows();
    require_shape(sigma1, m, m, "sigma1");
    require_shape(sigma2, m, m, "sigma2");
    require_shape(gamma, m, m, "gamma");
    require_invertible_sigma1(sigma1, cfg);
    auto rhs = [&](double t, const ComplexMatrix& phi) -> ComplexMatrix {
        return spectral_coefficient(sigma1, sigma2, gamma, lambda, t) * phi;
    };
    return FundamentalMatrix{lambda, base_index, GridFamily(grid, integrate_rk4(rhs, identity(m), grid, base_index)),
                             side};
}

inline void require_compatible(const FundamentalMatrix& a, const FundamentalMatrix& b) {
    if (!(a.family.grid() == b.family.grid()) || a.base_index != b.base_index) {
        fail(ErrorKind::GridMismatch, "fundamental matrices live on different grids or base points");
    }
    if (a.side != b.side) fail(ErrorKind::InvalidInput, "fundamental matrices belong to different sides");
}

/// max_t || sigma1(t) Phi(lambda,t) - Phi(-conj(lambda),t)^{-H} sigma1(tau) ||_F.
inline double phi_symmetry_residual(const FundamentalMatrix& phi, const FundamentalMatrix& phi_conj,
                                    const GridFamily& sigma1) {
    require_compatible(phi, phi_conj);
    require_same_grid(sigma1, phi.family.grid(), "sigma1");
    if (std::abs(phi_conj.lambda + std::conj(phi.lambda)) > 1e-12 * (1.0 + std::abs(phi.lambda))) {
        fail(ErrorKind::InvalidInput, "second fundamental matrix must be taken at -conj(lambda)");
    }
    const ComplexMatrix& sigma_base = sigma1[phi.base_index];
    double worst = 0.0;
    for (std::size_t i = 0; i < phi.family.size(); ++i) {
        const ComplexMatrix inv_adj = phi_conj[i].adjoint().partialPivLu().solve(sigma_base);
        worst = std::max(worst, (sigma1[i] * phi[i] - inv_adj).norm());
    }
    return worst;
}

/// max over interior nodes of || d/dt[Phi(mu)^H sigma1 Phi(lambda)] - (lambda + conj(mu)) Phi(mu)^H sigma2 Phi(lambda) ||_F.
inline double phi_bilinear_residual(const FundamentalMatrix& phi_mu, const FundamentalMatrix& phi_lam,
                                    const GridFamily& sigma1, const GridFamily& sigma2) {
    require_compatible(phi_mu, phi_lam);
    const TimeGrid& grid = phi_mu.family.grid();
    require_same_grid(sigma1, grid, "sigma1");
    require_same_grid(sigma2, grid, "sigma2");
    if (grid.n_steps < 2) fail(ErrorKind::GridMismatch, "bilinear residual needs at least two steps");
    std::vector<ComplexMatrix> form(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) form[i] = phi_mu[i].adjoint() * sigma1[i] * phi_lam[i];
    const Complex factor = phi_lam.lambda + std::conj(phi_mu.lambda);
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const ComplexMatrix d = grid_derivative(form, grid.step(), i);
        worst = std::max(worst, (d - factor * phi_mu[i].adjoint() * sigma2[i] * phi_lam[i]).norm());
    }
    return worst;
}

}  // namespace vesselkit
