#pragma once

// Dense complex primitives shared by every other module: resolvents, Hermitian
// square roots, Sylvester solves and the matrix exponential.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "vesselkit/errors.hpp"

namespace vesselkit {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Spectral and definiteness thresholds. Both are relative to the Frobenius norm of the operand.
struct KernelConfig {
    double eps_spec = 1e-9;
    double eps_pd = 1e-12;
};

inline bool all_finite(const ComplexMatrix& m) { return m.allFinite(); }

inline void require_finite(const ComplexMatrix& m, const char* what) {
    if (!m.allFinite()) fail(ErrorKind::NonFinite, std::string(what) + " has non-finite entries");
}

inline void require_nonempty(const ComplexMatrix& m, const char* what) {
    if (m.rows() < 1 || m.cols() < 1) fail(ErrorKind::ShapeMismatch, std::string(what) + " is empty");
}

inline void require_square(const ComplexMatrix& m, const char* what) {
    require_nonempty(m, what);
    if (m.rows() != m.cols()) {
        fail(ErrorKind::ShapeMismatch, std::string(what) + " must be square, got " + std::to_string(m.rows()) +
                                           "x" + std::to_string(m.cols()));
    }
}

inline ComplexMatrix identity(Eigen::Index n) { return ComplexMatrix::Identity(n, n); }

/// Hermitian matrix; the Hermitian part of the input is kept, so M = M^H holds exactly.
class HermitianMatrix {
   public:
    HermitianMatrix() = default;
    explicit HermitianMatrix(const ComplexMatrix& m) {
        require_square(m, "Hermitian matrix");
        require_finite(m, "Hermitian matrix");
        data_ = (m + m.adjoint()) / 2.0;
    }

    Eigen::Index dim() const { return data_.rows(); }
    const ComplexMatrix& matrix() const { return data_; }
    operator const ComplexMatrix&() const { return data_; }

   private:
    ComplexMatrix data_;
};

struct SpectrumReport {
    std::vector<Complex> eigenvalues;
    double min_pairwise_gap = std::numeric_limits<double>::infinity();
};

inline std::vector<Complex> eigenvalues(const ComplexMatrix& a) {
    require_square(a, "eigenvalue operand");
    require_finite(a, "eigenvalue operand");
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, false);
    if (solver.info() != Eigen::Success) fail(ErrorKind::SingularSystem, "eigenvalue iteration did not converge");
    const auto& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

inline SpectrumReport spectrum_report(const ComplexMatrix& a) {
    SpectrumReport report;
    report.eigenvalues = eigenvalues(a);
    const auto& ev = report.eigenvalues;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        for (std::size_t j = i + 1; j < ev.size(); ++j) {
            report.min_pairwise_gap = std::min(report.min_pairwise_gap, std::abs(ev[i] - ev[j]));
        }
    }
    return report;
}

/// Smallest distance between a point and a finite set of spectral values.
inline double distance_to(const std::vector<Complex>& spectrum, Complex z) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& e : spectrum) d = std::min(d, std::abs(z - e));
    return d;
}

/// Smallest distance between two spectra.
inline double spectral_separation(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& e : a) d = std::min(d, distance_to(b, e));
    return d;
}

/// (lambda I - A)^{-1}.
inline ComplexMatrix resolvent(const ComplexMatrix& a, Complex lambda, const KernelConfig& cfg = {}) {
    require_square(a, "resolvent operand");
    require_finite(a, "resolvent operand");
    if (!std::isfinite(lambda.real()) || !std::isfinite(lambda.imag())) {
        fail(ErrorKind::NonFinite, "spectral parameter is not finite");
    }
    const double eps = cfg.eps_spec * a.norm();
    const double dist = distance_to(eigenvalues(a), lambda);
    if (!(dist > eps) || dist == 0.0) {
        fail(ErrorKind::SpectrumClash, "lambda lies within " + std::to_string(dist) + " of the spectrum");
    }
    const auto n = a.rows();
    ComplexMatrix shifted = lambda * identity(n) - a;
    return shifted.partialPivLu().solve(identity(n));
}

/// Principal square root of a Hermitian matrix through its eigendecomposition.
inline HermitianMatrix hermitian_sqrt(const HermitianMatrix& x, bool require_pd, const KernelConfig& cfg = {}) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(x.matrix());
    if (solver.info() != Eigen::Success) fail(ErrorKind::SingularSystem, "Hermitian eigensolver failed");
    Eigen::VectorXd w = solver.eigenvalues();
    const double scale = x.matrix().norm();
    const double threshold = cfg.eps_pd * scale;
    const double min_eig = w.minCoeff();
    if (require_pd && !(min_eig > threshold)) {
        fail(ErrorKind::NotPositiveDefinite, "minimum eigenvalue " + std::to_string(min_eig));
    }
    if (min_eig < -threshold) {
        fail(ErrorKind::NotPositiveDefinite, "no Hermitian root: minimum eigenvalue " + std::to_string(min_eig));
    }
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = std::sqrt(std::max(w(i), 0.0));
    const ComplexMatrix& v = solver.eigenvectors();
    return HermitianMatrix(v * w.cast<Complex>().asDiagonal() * v.adjoint());
}

/// Solves X A_pi - A_xi X = Q through the vectorized (n k) x (n k) system.
inline ComplexMatrix solve_sylvester(const ComplexMatrix& a_pi, const ComplexMatrix& a_xi, const ComplexMatrix& q,
                                     const KernelConfig& cfg = {}) {
    require_square(a_pi, "A_pi");
    require_square(a_xi, "A_xi");
    require_finite(q, "Sylvester right-hand side");
    const auto n = a_pi.rows();
    const auto k = a_xi.rows();
    if (q.rows() != k || q.cols() != n) {
        fail(ErrorKind::ShapeMismatch, "Sylvester right-hand side must be " + std::to_string(k) + "x" +
                                           std::to_string(n));
    }
    const double sep = spectral_separation(eigenvalues(a_pi), eigenvalues(a_xi));
    const double eps = cfg.eps_spec * (a_pi.norm() + a_xi.norm());
    if (!(sep > eps) || sep == 0.0) {
        fail(ErrorKind::SpectrumClash, "spectra of A_pi and A_xi are " + std::to_string(sep) + " apart");
    }
    // Column-major vec: vec(X A_pi) = (A_pi^T (x) I_k) vec X, vec(A_xi X) = (I_n (x) A_xi) vec X.
    ComplexMatrix system = ComplexMatrix::Zero(n * k, n * k);
    for (Eigen::Index col = 0; col < n; ++col) {
        for (Eigen::Index row = 0; row < n; ++row) {
            system.block(row * k, col * k, k, k).diagonal().array() += a_pi(col, row);
        }
        system.block(col * k, col * k, k, k) -= a_xi;
    }
    Eigen::Map<const ComplexVector> rhs(q.data(), n * k);
    ComplexVector sol = system.fullPivLu().solve(ComplexVector(rhs));
    if (!sol.allFinite()) fail(ErrorKind::SingularSystem, "Sylvester system solve produced non-finite values");
    return Eigen::Map<ComplexMatrix>(sol.data(), k, n);
}

/// exp(M) by scaling and squaring with the degree-13 Pade approximant.
inline ComplexMatrix matrix_exp(const ComplexMatrix& m) {
    require_square(m, "exponent");
    require_finite(m, "exponent");
    static constexpr double b[] = {64764752532480000.0,
                                   32382376266240000.0,
                                   7771770303897600.0,
                                   1187353796428800.0,
                                   129060195264000.0,
                                   10559470521600.0,
                                   670442572800.0,
                                   33522128640.0,
                                   1323241920.0,
                                   40840800.0,
                                   960960.0,
                                   16380.0,
                                   182.0,
                                   1.0};
    constexpr double theta13 = 5.371920351148152;
    const auto n = m.rows();
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const ComplexMatrix a = m / std::ldexp(1.0, squarings);
    const ComplexMatrix id = identity(n);
    const ComplexMatrix a2 = a * a;
    const ComplexMatrix a4 = a2 * a2;
    const ComplexMatrix a6 = a4 * a2;
    const ComplexMatrix u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
    const ComplexMatrix u = a * (a6 * u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    const ComplexMatrix v_inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
    const ComplexMatrix v = a6 * v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    ComplexMatrix r = (v - u).partialPivLu().solve(ComplexMatrix(v + u));
    for (int i = 0; i < squarings; ++i) r = r * r;
    if (!r.allFinite()) fail(ErrorKind::NonFinite, "matrix exponential overflowed");
    return r;
}

/// Rank of a matrix from its singular values, relative to the largest one.
inline Eigen::Index numerical_rank(const ComplexMatrix& m, double rel_tol = 1e-10) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > rel_tol * s(0)) ++rank;
    }
    return rank;
}

inline double min_singular_value(const ComplexMatrix& m) {
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    return svd.singularValues().minCoeff();
}

}  // namespace vesselkit
