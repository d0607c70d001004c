#pragma once

// Vessels from spectral data: elementary one-point vessels, finite couplings of
// them, extraction of a single Blaschke factor, and the multiplicative-integral
// model of a continuous spectrum.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vesselkit/matrix_kernel.hpp"
#include "vesselkit/ode.hpp"
#include "vesselkit/vessel.hpp"

namespace vesselkit {

/// One spectral point z with its channel vector b0 (a column, value at the grid start)
/// and an optional real gauge phase theta(t2).
struct SpectralDatum {
    Complex z;
    ComplexVector b0;
    std::optional<GridFamily> theta;
};

enum class A2Rule {
    /// a2 = -b^H sigma2 b / (2 b^H sigma1 b) + i theta'.
    Ratio,
    /// a2 = -b^H sigma2 b / 2 + i theta', which is what the second colligation forces.
    Colligation,
};

struct ElementaryOptions {
    A2Rule a2_rule = A2Rule::Ratio;
    /// Rescale b0 so that |b0^H sigma1 b0| = 1 at the grid start.
    bool normalize = false;
    KernelConfig kernel{};
};

namespace detail {

inline double quad_form(const ComplexVector& b, const ComplexMatrix& s) { return (b.adjoint() * s * b)(0, 0).real(); }

inline void check_families(const GridFamily& gamma, const GridFamily& sigma1, const GridFamily& sigma2) {
    const TimeGrid& g = sigma1.grid();
    require_same_grid(sigma2, g, "sigma2");
    require_same_grid(gamma, g, "gamma");
    const auto m = sigma1.rows();
    require_shape(sigma1, m, m, "sigma1");
    require_shape(sigma2, m, m, "sigma2");
    require_shape(gamma, m, m, "gamma");
}

}  // namespace detail

/// One-dimensional vessel with A1 = z. The row B = b^H follows the input condition,
///     (sigma1 b)' = (conj(a2) - conj(z) sigma2 sigma1^{-1} - gamma^H sigma1^{-1}) sigma1 b,
/// and gamma_* comes from the linkage condition.
inline DifferentialVessel build_elementary(const SpectralDatum& datum, const GridFamily& gamma, const GridFamily& sigma1,
                                           const GridFamily& sigma2, const ElementaryOptions& opt = {}) {
    detail::check_families(gamma, sigma1, sigma2);
    const TimeGrid& g = sigma1.grid();
    const auto m = sigma1.rows();
    if (datum.b0.size() != m) fail(ErrorKind::ShapeMismatch, "b0 must have the signal dimension");
    if (!datum.b0.allFinite() || !std::isfinite(datum.z.real()) || !std::isfinite(datum.z.imag())) {
        fail(ErrorKind::NonFinite, "spectral datum is not finite");
    }
    if (datum.b0.norm() == 0.0) fail(ErrorKind::InvalidInput, "b0 must be nonzero");
    require_invertible_sigma1(sigma1, opt.kernel);

    GridFamily dtheta = GridFamily::constant(g, ComplexMatrix::Zero(1, 1));
    if (datum.theta) {
        require_same_grid(*datum.theta, g, "theta");
        require_shape(*datum.theta, 1, 1, "theta");
        dtheta = datum.theta->derivative_family();
    }

    ComplexVector b0 = datum.b0;
    if (opt.normalize) {
        const double q = std::abs(detail::quad_form(b0, sigma1[0]));
        if (!(q > 1e-14 * b0.squaredNorm() * sigma1[0].norm())) {
            fail(ErrorKind::DegenerateB, "b0^H sigma1 b0 vanishes, cannot normalize");
        }
        b0 /= std::sqrt(q);
    }

    const Complex z = datum.z;
    auto a2_of = [&](const ComplexVector& b, const ComplexMatrix& s1, const ComplexMatrix& s2, double dth) {
        const double num = detail::quad_form(b, s2);
        if (opt.a2_rule == A2Rule::Colligation) return Complex(-num / 2.0, dth);
        const double den = detail::quad_form(b, s1);
        if (!(std::abs(den) > 1e-14 * b.squaredNorm() * s1.norm())) {
            fail(ErrorKind::DegenerateB, "b^H sigma1 b vanishes along the evolution");
        }
        return Complex(-num / (2.0 * den), dth);
    };

    // Integrate p = sigma1 b, which keeps the input condition exact for any gamma.
    auto rhs = [&](double t, const ComplexMatrix& p) -> ComplexMatrix {
        const ComplexMatrix s1 = sigma1.at(t);
        const ComplexMatrix s2 = sigma2.at(t);
        const ComplexMatrix gam = gamma.at(t);
        auto lu = s1.partialPivLu();
        const ComplexVector b = lu.solve(p);
        const Complex a2 = a2_of(b, s1, s2, dtheta.at(t)(0, 0).real());
        return std::conj(a2) * p - std::conj(z) * s2 * b - gam.adjoint() * b;
    };
    const ComplexMatrix p0 = sigma1[0] * b0;
    const std::vector<ComplexMatrix> p = integrate_rk4(rhs, p0, g, 0);

    std::vector<ComplexMatrix> a2(g.size()), row(g.size()), gam_star(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const ComplexVector b = sigma1[i].partialPivLu().solve(p[i]);
        a2[i] = ComplexMatrix::Constant(1, 1, a2_of(b, sigma1[i], sigma2[i], dtheta[i](0, 0).real()));
        row[i] = b.adjoint();
        gam_star[i] = linked_gamma_star(gamma[i], row[i], sigma1[i], sigma2[i]);
    }
    return DifferentialVessel(GridFamily::constant(g, ComplexMatrix::Constant(1, 1, z)), GridFamily(g, std::move(a2)),
                              GridFamily(g, std::move(row)), sigma1, sigma2, gamma, GridFamily(g, std::move(gam_star)),
                              opt.kernel);
}

/// gamma chain and evolved channel vectors produced along a discrete synthesis.
struct DiscreteSynthesisState {
    std::vector<GridFamily> gamma_chain;  ///< gamma_0, gamma_1, ..., gamma_N
    std::vector<GridFamily> b_evolved;    ///< b^(h) as m x 1 columns
};

struct DiscreteSynthesis {
    DifferentialVessel vessel;
    std::vector<DifferentialVessel> factors;
    DiscreteSynthesisState state;
};

/// Couples elementary vessels for z_1, ..., z_N in that order; factor h is driven by gamma_{h-1*}.
/// A1 is lower triangular with A1(i,j) = -b_i^H sigma1 b_j below the diagonal.
inline DiscreteSynthesis synthesize_discrete(const std::vector<SpectralDatum>& data, const GridFamily& gamma0,
                                             const GridFamily& sigma1, const GridFamily& sigma2,
                                             const ElementaryOptions& opt = {}) {
    if (data.empty()) fail(ErrorKind::InvalidInput, "spectral data list is empty");
    detail::check_families(gamma0, sigma1, sigma2);
    const TimeGrid& g = sigma1.grid();
    const auto m = sigma1.rows();
    const auto n = static_cast<Eigen::Index>(data.size());

    std::vector<DifferentialVessel> factors;
    DiscreteSynthesisState state;
    state.gamma_chain.push_back(gamma0);
    for (const auto& d : data) {
        factors.push_back(build_elementary(d, state.gamma_chain.back(), sigma1, sigma2, opt));
        state.gamma_chain.push_back(factors.back().gamma_star());
        state.b_evolved.push_back(factors.back().b().map([](const ComplexMatrix& r, std::size_t) {
            return ComplexMatrix(r.adjoint());
        }));
    }

    std::vector<ComplexMatrix> a1(g.size()), a2(g.size()), b(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        a1[i] = ComplexMatrix::Zero(n, n);
        a2[i] = ComplexMatrix::Zero(n, n);
        b[i] = ComplexMatrix(n, m);
        for (Eigen::Index h = 0; h < n; ++h) {
            const auto& f = factors[static_cast<std::size_t>(h)];
            a1[i](h, h) = f.a1()[i](0, 0);
            a2[i](h, h) = f.a2()[i](0, 0);
            b[i].row(h) = f.b()[i];
            for (Eigen::Index j = 0; j < h; ++j) {
                const ComplexMatrix& bj = state.b_evolved[static_cast<std::size_t>(j)][i];
                const ComplexMatrix& bh = state.b_evolved[static_cast<std::size_t>(h)][i];
                a1[i](h, j) = -(bh.adjoint() * sigma1[i] * bj)(0, 0);
                a2[i](h, j) = -(bh.adjoint() * sigma2[i] * bj)(0, 0);
            }
        }
    }
    DifferentialVessel v(GridFamily(g, std::move(a1)), GridFamily(g, std::move(a2)), GridFamily(g, std::move(b)),
                         sigma1, sigma2, gamma0, state.gamma_chain.back(), opt.kernel);
    return DiscreteSynthesis{std::move(v), std::move(factors), std::move(state)};
}

inline DifferentialVessel build_discrete(const std::vector<SpectralDatum>& data, const GridFamily& gamma0,
                                         const GridFamily& sigma1, const GridFamily& sigma2,
                                         const ElementaryOptions& opt = {}) {
    return synthesize_discrete(data, gamma0, sigma1, sigma2, opt).vessel;
}

using TransferCallback = std::function<ComplexMatrix(Complex, std::size_t)>;

struct ExtractionResult {
    Complex z;
    DifferentialVessel factor;
    /// Compression to the orthogonal complement; empty when the vessel was one-dimensional.
    std::optional<DifferentialVessel> quotient;
    /// S(lambda) S_factor(lambda)^{-1}.
    TransferCallback quotient_transfer;
    /// |eps| * ||quotient_transfer(z + eps)||, small when the pole at z has been removed.
    double residue_at_z = 0.0;
    /// Largest distance between the transported and the exact left eigenvector.
    double transport_defect = 0.0;
};

namespace detail {

/// Unit vector spanning ker(M), from the smallest right singular vector.
inline ComplexVector null_vector(const ComplexMatrix& m) {
    Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeFullV);
    return svd.matrixV().col(m.cols() - 1);
}

/// (U^H)' U for an orthonormal frame U. The exact value is skew-Hermitian because U^H U = I,
/// so the finite-difference estimate is projected onto that part.
inline ComplexMatrix frame_derivative_term(const GridFamily& frame, std::size_t i) {
    const ComplexMatrix t = frame.derivative(i).adjoint() * frame[i];
    return (t - t.adjoint()) / 2.0;
}

}  // namespace detail

/// Splits off the elementary factor for the eigenvalue of A1(node_ref) nearest `target`.
/// The left eigenvector w (A1^H w = conj(z) w) is carried along t2 by w' = -A2^H w; at every
/// node it is snapped to the exact eigenvector with the transported phase.
inline ExtractionResult extract_elementary(const DifferentialVessel& v, Complex target, std::size_t node_ref,
                                           const KernelConfig& cfg = {}, double transport_tol = 1e-4) {
    const TimeGrid& g = v.grid();
    if (node_ref >= g.size()) fail(ErrorKind::InvalidInput, "reference node out of range");
    const auto n = v.state_dim();
    const ComplexMatrix& a_ref = v.a1()[node_ref];
    const auto spectrum = eigenvalues(a_ref);
    std::size_t pick = 0;
    for (std::size_t k = 1; k < spectrum.size(); ++k) {
        if (std::abs(spectrum[k] - target) < std::abs(spectrum[pick] - target)) pick = k;
    }
    const Complex z = spectrum[pick];
    const double gap_tol = std::max(cfg.eps_spec * a_ref.norm(), 1e-12);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        if (k != pick && std::abs(spectrum[k] - z) <= gap_tol) {
            fail(ErrorKind::DegenerateEigenvalue, "eigenvalue is not simple at the reference node");
        }
    }

    const ComplexVector w_ref = detail::null_vector(ComplexMatrix(a_ref.adjoint() - std::conj(z) * identity(n)));
    const GridFamily neg_a2h = v.a2().map([](const ComplexMatrix& a, std::size_t) { return ComplexMatrix(-a.adjoint()); });
    auto rhs = [&](double t, const ComplexMatrix& w) -> ComplexMatrix { return neg_a2h.at(t) * w; };
    const std::vector<ComplexMatrix> transported = integrate_rk4(rhs, w_ref, g, node_ref);

    std::vector<ComplexMatrix> w(g.size());
    double transport_defect = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double len = transported[i].norm();
        if (!(len > 1e-12) || !std::isfinite(len)) fail(ErrorKind::TransportBreakdown, "eigenvector transport lost its norm");
        const ComplexVector wt = transported[i] / len;
        ComplexVector we = detail::null_vector(ComplexMatrix(v.a1()[i].adjoint() - std::conj(z) * identity(n)));
        const Complex overlap = (we.adjoint() * wt)(0, 0);
        if (std::abs(overlap) < 0.5) fail(ErrorKind::TransportBreakdown, "transported vector left the eigenspace");
        we *= overlap / std::abs(overlap);
        transport_defect = std::max(transport_defect, (we - wt).norm());
        w[i] = we;
    }
    if (transport_defect > transport_tol) {
        fail(ErrorKind::TransportBreakdown, "eigenvector transport drifted by " + std::to_string(transport_defect));
    }
    const GridFamily w_family(g, std::move(w));

    auto make_factor = [&]() {
        std::vector<ComplexMatrix> a2(g.size()), row(g.size()), gam_star(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const ComplexMatrix& wi = w_family[i];
            a2[i] = wi.adjoint() * v.a2()[i] * wi + detail::frame_derivative_term(w_family, i);
            row[i] = wi.adjoint() * v.b()[i];
            gam_star[i] = linked_gamma_star(v.gamma()[i], row[i], v.sigma1()[i], v.sigma2()[i]);
        }
        return DifferentialVessel(GridFamily::constant(g, ComplexMatrix::Constant(1, 1, z)),
                                  GridFamily(g, std::move(a2)), GridFamily(g, std::move(row)), v.sigma1(), v.sigma2(),
                                  v.gamma(), GridFamily(g, std::move(gam_star)), cfg);
    };
    DifferentialVessel factor = make_factor();

    std::optional<DifferentialVessel> quotient;
    if (n > 1) {
        // Fixed complement at the reference node, then the closest orthonormal frame at each node.
        Eigen::HouseholderQR<ComplexMatrix> qr(ComplexMatrix(w_family[node_ref]));
        const ComplexMatrix full = qr.householderQ() * identity(n);
        const ComplexMatrix q_ref = full.rightCols(n - 1);
        std::vector<ComplexMatrix> q(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const ComplexMatrix& wi = w_family[i];
            const ComplexMatrix proj = q_ref - wi * (wi.adjoint() * q_ref);
            const ComplexMatrix gram = proj.adjoint() * proj;
            if (min_singular_value(gram) < 1e-6) fail(ErrorKind::TransportBreakdown, "complement frame degenerated");
            const HermitianMatrix root = hermitian_sqrt(HermitianMatrix(gram), true, cfg);
            q[i] = proj * root.matrix().partialPivLu().solve(identity(n - 1));
        }
        const GridFamily q_family(g, std::move(q));
        std::vector<ComplexMatrix> a1(g.size()), a2(g.size()), bq(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const ComplexMatrix& qi = q_family[i];
            a1[i] = qi.adjoint() * v.a1()[i] * qi;
            a2[i] = qi.adjoint() * v.a2()[i] * qi + detail::frame_derivative_term(q_family, i);
            bq[i] = qi.adjoint() * v.b()[i];
        }
        quotient.emplace(GridFamily(g, std::move(a1)), GridFamily(g, std::move(a2)), GridFamily(g, std::move(bq)),
                         v.sigma1(), v.sigma2(), factor.gamma_star(), v.gamma_star(), cfg);
    }

    auto whole = std::make_shared<const DifferentialVessel>(v);
    auto part = std::make_shared<const DifferentialVessel>(factor);
    TransferCallback quotient_transfer = [whole, part, cfg](Complex lambda, std::size_t node) {
        const ComplexMatrix s = eval_transfer(*whole, lambda, node, cfg);
        const ComplexMatrix sf = eval_transfer(*part, lambda, node, cfg);
        return ComplexMatrix(sf.transpose().partialPivLu().solve(s.transpose()).transpose());
    };

    const double eps = 1e-6 * (1.0 + std::abs(z));
    double residue = 0.0;
    for (std::size_t i = 0; i < g.size(); i += std::max<std::size_t>(1, g.n_steps / 4)) {
        residue = std::max(residue, eps * quotient_transfer(z + Complex(eps, 0.0), i).norm());
    }

    return ExtractionResult{z, std::move(factor), std::move(quotient), std::move(quotient_transfer), residue,
                            transport_defect};
}

enum class ProductRule {
    /// exp(K(s_j) ds / (lambda + c(s_j))): first order.
    LeftPoint,
    /// exp of the average of the generator at both ends of the step: second order.
    Midpoint,
};

/// Partial products W_0 = I, W_{j+1} = exp(G_j ds) W_j with G = K/(lambda + c); one entry per s-node.
inline std::vector<ComplexMatrix> mult_integral_path(const GridFamily& k, const std::vector<double>& c, Complex lambda,
                                                     ProductRule rule = ProductRule::LeftPoint,
                                                     const KernelConfig& cfg = {}) {
    const TimeGrid& s = k.grid();
    if (c.size() != s.size()) fail(ErrorKind::GridMismatch, "c must be sampled on the kernel grid");
    if (k.rows() != k.cols()) fail(ErrorKind::ShapeMismatch, "kernel must be square");
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (!std::isfinite(c[j])) fail(ErrorKind::NonFinite, "c is not finite");
        if (!(std::abs(lambda + c[j]) > cfg.eps_spec)) {
            fail(ErrorKind::SpectrumClash, "lambda meets -c(s) at s-node " + std::to_string(j));
        }
    }
    const double ds = s.step();
    std::vector<ComplexMatrix> w(s.size());
    w[0] = identity(k.rows());
    for (std::size_t j = 0; j + 1 < s.size(); ++j) {
        ComplexMatrix gen = k[j] / (lambda + c[j]);
        if (rule == ProductRule::Midpoint) gen = 0.5 * (gen + k[j + 1] / (lambda + c[j + 1]));
        w[j + 1] = matrix_exp(ComplexMatrix(gen * ds)) * w[j];
    }
    return w;
}

/// Left-ordered product integral up to s-node `s_upper` (the last factor applied is the leftmost).
inline ComplexMatrix mult_integral(const GridFamily& k, const std::vector<double>& c, Complex lambda,
                                   std::size_t s_upper, ProductRule rule = ProductRule::LeftPoint,
                                   const KernelConfig& cfg = {}) {
    if (s_upper >= k.grid().size()) fail(ErrorKind::InvalidInput, "s_upper beyond the last s-node");
    return mult_integral_path(k, c, lambda, rule, cfg)[s_upper];
}

/// Kernel data at the initial t2: beta(s) is m x p at every s-node, c(s) real.
struct ContinuousSpectrumModel {
    TimeGrid s_grid;
    std::vector<double> c;
    std::vector<ComplexMatrix> beta;
};

using NodeTable = std::vector<std::vector<ComplexMatrix>>;  ///< [t-node][s-node]

struct ContinuousModelResiduals {
    double dgamma = 0.0;          ///< sigma1^{-1} dgamma/ds + sigma1^{-1} sigma2 K - K sigma1^{-1} sigma2
    double dk = 0.0;              ///< dK/dt2 - [sigma1^{-1}(-c sigma2 + gamma(s)), K]
    double ds_law = 0.0;          ///< (W_{j+1} - W_j)/ds - K W_j/(lambda + c), first-order product
    double mixed_partial = 0.0;   ///< D_s(dW/dt2) - D_t2(dW/ds), second-order product
    double alpha_identity = 0.0;  ///< alpha - beta^H sigma1
};

struct ContinuousModelEvolution {
    TimeGrid t_grid;
    TimeGrid s_grid;
    std::vector<double> c;
    NodeTable beta, alpha, kernel, gamma;
    ContinuousModelResiduals residuals;

    /// K(t-node, .) as a family over s.
    GridFamily kernel_family(std::size_t t) const { return GridFamily(s_grid, kernel[t]); }
};

namespace detail {

struct ModelState {
    std::vector<ComplexMatrix> beta, alpha;
};

inline std::vector<ComplexMatrix> cumulative_gamma(const ComplexMatrix& gamma_start, const std::vector<ComplexMatrix>& beta,
                                                   const std::vector<ComplexMatrix>& alpha, const ComplexMatrix& s1,
                                                   const ComplexMatrix& s1_inv, const ComplexMatrix& s2, double ds) {
    std::vector<ComplexMatrix> out(beta.size());
    auto rate = [&](std::size_t j) {
        const ComplexMatrix k = beta[j] * alpha[j];
        return ComplexMatrix(s1 * k * s1_inv * s2 - s2 * k);
    };
    out[0] = gamma_start;
    ComplexMatrix prev = rate(0);
    for (std::size_t j = 0; j + 1 < beta.size(); ++j) {
        const ComplexMatrix next = rate(j + 1);
        out[j + 1] = out[j] + 0.5 * ds * (prev + next);
        prev = next;
    }
    return out;
}

}  // namespace detail

/// Marches beta and alpha in t2 for all s-nodes at once. gamma(t2, s) is the running integral in s of
/// sigma1 K sigma1^{-1} sigma2 - sigma2 K starting from gamma_t(t2), so the system is coupled through s.
/// sigma1 and sigma2 must be constant in t2. Residuals use `probes` for the W laws.
inline ContinuousModelEvolution continuous_model_evolve(const ContinuousSpectrumModel& model, const GridFamily& gamma_t,
                                                        const GridFamily& sigma1, const GridFamily& sigma2,
                                                        const std::vector<Complex>& probes,
                                                        const KernelConfig& cfg = {}) {
    detail::check_families(gamma_t, sigma1, sigma2);
    const TimeGrid& tg = sigma1.grid();
    const TimeGrid& sg = model.s_grid;
    sg.validate();
    if (model.c.size() != sg.size() || model.beta.size() != sg.size()) {
        fail(ErrorKind::GridMismatch, "c and beta must be sampled on the s-grid");
    }
    require_invertible_sigma1(sigma1, cfg);
    for (std::size_t i = 1; i < tg.size(); ++i) {
        if (sigma1[i] != sigma1[0] || sigma2[i] != sigma2[0]) {
            fail(ErrorKind::InvalidInput, "the continuous model needs sigma1, sigma2 constant in t2");
        }
    }
    const auto m = sigma1.rows();
    const auto p = model.beta.front().cols();
    for (const auto& b : model.beta) {
        if (b.rows() != m || b.cols() != p) fail(ErrorKind::ShapeMismatch, "beta must be m x p at every s-node");
        require_finite(b, "beta");
    }
    if (tg.n_steps < 2 || sg.n_steps < 2) fail(ErrorKind::GridMismatch, "both grids need at least two steps");

    const ComplexMatrix s1 = sigma1[0];
    const ComplexMatrix s2 = sigma2[0];
    const ComplexMatrix s1_inv = s1.partialPivLu().solve(identity(m));
    const double ds = sg.step();
    const std::size_t ns = sg.size();

    auto rhs = [&](double t, const detail::ModelState& st) {
        const auto gam = detail::cumulative_gamma(gamma_t.at(t), st.beta, st.alpha, s1, s1_inv, s2, ds);
        detail::ModelState d{std::vector<ComplexMatrix>(ns), std::vector<ComplexMatrix>(ns)};
        for (std::size_t j = 0; j < ns; ++j) {
            const ComplexMatrix gen = s1_inv * (-model.c[j] * s2 + gam[j]);
            d.beta[j] = gen * st.beta[j];
            d.alpha[j] = -st.alpha[j] * gen;
        }
        return d;
    };
    auto axpy = [&](const detail::ModelState& x, double a, const detail::ModelState& y) {
        detail::ModelState out = x;
        for (std::size_t j = 0; j < ns; ++j) {
            out.beta[j] += a * y.beta[j];
            out.alpha[j] += a * y.alpha[j];
        }
        return out;
    };

    detail::ModelState state{model.beta, {}};
    for (const auto& b : model.beta) state.alpha.push_back(b.adjoint() * s1);

    ContinuousModelEvolution out;
    out.t_grid = tg;
    out.s_grid = sg;
    out.c = model.c;
    const double h = tg.step();
    for (std::size_t i = 0; i < tg.size(); ++i) {
        out.beta.push_back(state.beta);
        out.alpha.push_back(state.alpha);
        if (i + 1 == tg.size()) break;
        const double t = tg.node(i);
        const auto k1 = rhs(t, state);
        const auto k2 = rhs(t + h / 2, axpy(state, h / 2, k1));
        const auto k3 = rhs(t + h / 2, axpy(state, h / 2, k2));
        const auto k4 = rhs(t + h, axpy(state, h, k3));
        for (std::size_t j = 0; j < ns; ++j) {
            state.beta[j] += (h / 6) * (k1.beta[j] + 2.0 * k2.beta[j] + 2.0 * k3.beta[j] + k4.beta[j]);
            state.alpha[j] += (h / 6) * (k1.alpha[j] + 2.0 * k2.alpha[j] + 2.0 * k3.alpha[j] + k4.alpha[j]);
            if (!state.beta[j].allFinite() || !state.alpha[j].allFinite()) {
                fail(ErrorKind::NonFinite, "continuous model blew up near t2 = " + std::to_string(t));
            }
        }
    }
    for (std::size_t i = 0; i < tg.size(); ++i) {
        std::vector<ComplexMatrix> k(ns);
        for (std::size_t j = 0; j < ns; ++j) k[j] = out.beta[i][j] * out.alpha[i][j];
        out.kernel.push_back(std::move(k));
        out.gamma.push_back(detail::cumulative_gamma(gamma_t[i], out.beta[i], out.alpha[i], s1, s1_inv, s2, ds));
    }

    ContinuousModelResiduals& r = out.residuals;
    for (std::size_t i = 0; i < tg.size(); ++i) {
        for (std::size_t j = 0; j < ns; ++j) {
            r.alpha_identity =
                std::max(r.alpha_identity, (out.alpha[i][j] - out.beta[i][j].adjoint() * s1).norm());
            if (j > 0 && j + 1 < ns) {
                const ComplexMatrix& k = out.kernel[i][j];
                const ComplexMatrix dg = (out.gamma[i][j + 1] - out.gamma[i][j - 1]) / (2.0 * ds);
                r.dgamma = std::max(r.dgamma, (s1_inv * dg + s1_inv * s2 * k - k * s1_inv * s2).norm());
            }
            if (i > 0 && i + 1 < tg.size()) {
                const ComplexMatrix& k = out.kernel[i][j];
                const ComplexMatrix dk = (out.kernel[i + 1][j] - out.kernel[i - 1][j]) / (2.0 * h);
                const ComplexMatrix gen = s1_inv * (-model.c[j] * s2 + out.gamma[i][j]);
                r.dk = std::max(r.dk, (dk - gen * k + k * gen).norm());
            }
        }
    }

    for (const Complex lambda : probes) {
        std::vector<std::vector<ComplexMatrix>> w_mid(tg.size());
        for (std::size_t i = 0; i < tg.size(); ++i) {
            const GridFamily kf = out.kernel_family(i);
            const auto w = mult_integral_path(kf, model.c, lambda, ProductRule::LeftPoint, cfg);
            for (std::size_t j = 0; j + 1 < ns; ++j) {
                const ComplexMatrix law = (w[j + 1] - w[j]) / ds - out.kernel[i][j] * w[j] / (lambda + model.c[j]);
                r.ds_law = std::max(r.ds_law, law.norm());
            }
            w_mid[i] = mult_integral_path(kf, model.c, lambda, ProductRule::Midpoint, cfg);
        }
        // dW/dt2 from the t2-law, dW/ds from the s-law; their cross derivatives must agree.
        auto t_law = [&](std::size_t i, std::size_t j) {
            const ComplexMatrix& w = w_mid[i][j];
            return ComplexMatrix(s1_inv * (lambda * s2 + out.gamma[i][j]) * w -
                                 w * s1_inv * (lambda * s2 + out.gamma[i][0]));
        };
        auto s_law = [&](std::size_t i, std::size_t j) {
            return ComplexMatrix(out.kernel[i][j] * w_mid[i][j] / (lambda + model.c[j]));
        };
        for (std::size_t i = 1; i + 1 < tg.size(); ++i) {
            for (std::size_t j = 1; j + 1 < ns; ++j) {
                const ComplexMatrix e1 = (t_law(i, j + 1) - t_law(i, j - 1)) / (2.0 * ds);
                const ComplexMatrix e2 = (s_law(i + 1, j) - s_law(i - 1, j)) / (2.0 * h);
                r.mixed_partial = std::max(r.mixed_partial, (e1 - e2).norm());
            }
        }
    }
    return out;
}

}  // namespace vesselkit
