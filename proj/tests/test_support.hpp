#pragma once

// Shared fixture builders for the unit and acceptance tests.

#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "vesselkit/vesselkit.hpp"

namespace vktest {

using namespace vesselkit;

inline ComplexMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, 1.0);
    ComplexMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Complex(d(rng), d(rng)) * scale;
    }
    return m;
}

inline ComplexMatrix random_hermitian(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
    const ComplexMatrix a = random_matrix(n, n, rng, scale);
    return (a + a.adjoint()) / 2.0;
}

inline ComplexMatrix random_skew(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
    const ComplexMatrix a = random_matrix(n, n, rng, scale);
    return (a - a.adjoint()) / 2.0;
}

inline ComplexMatrix random_unitary(Eigen::Index n, std::mt19937_64& rng) {
    Eigen::HouseholderQR<ComplexMatrix> qr(random_matrix(n, n, rng));
    return qr.householderQ() * identity(n);
}

/// Kind of the VesselError thrown by fn, or nothing if it returned normally.
template <class Fn>
std::optional<ErrorKind> error_kind(Fn&& fn) {
    try {
        fn();
    } catch (const VesselError& e) {
        return e.kind();
    }
    return std::nullopt;
}

inline GridFamily constant(const TimeGrid& g, const ComplexMatrix& m) { return GridFamily::constant(g, m); }

inline ComplexMatrix scalar(Complex z) { return ComplexMatrix::Constant(1, 1, z); }

/// sigma1 = I, sigma2 and gamma fixed 2x2 data used across tests.
struct Coefficients {
    ComplexMatrix sigma1, sigma2, gamma;
};

inline Coefficients standard_coefficients() {
    Coefficients c;
    c.sigma1 = identity(2);
    c.sigma2.resize(2, 2);
    c.sigma2 << 1.0, Complex(0, 0.3), Complex(0, -0.3), -0.5;
    c.gamma.resize(2, 2);
    c.gamma << Complex(0, 0.3), Complex(0.1, 0.2), Complex(-0.1, 0.2), Complex(0, -0.2);
    return c;
}

/// b rescaled so that |b|^2 = -2 Re z, which keeps both colligations exact with sigma1 = I.
inline SpectralDatum datum(Complex z, ComplexVector b) {
    b *= std::sqrt(-2.0 * z.real()) / b.norm();
    return SpectralDatum{z, b, std::nullopt};
}

inline std::vector<SpectralDatum> three_data() {
    std::vector<SpectralDatum> data;
    ComplexVector b(2);
    b << 1.0, Complex(0.5, 0.5);
    data.push_back(datum(Complex(-0.7, 1.0), b));
    b << Complex(0.2, -1.0), 0.8;
    data.push_back(datum(Complex(-0.3, -0.5), b));
    b << 0.4, Complex(-0.6, 0.1);
    data.push_back(datum(Complex(-1.1, 0.2), b));
    return data;
}

inline ElementaryOptions colligation_options() {
    ElementaryOptions opt;
    opt.a2_rule = A2Rule::Colligation;
    return opt;
}

inline DiscreteSynthesis three_factor_synthesis(std::size_t steps) {
    const TimeGrid g(0.0, 1.0, steps);
    const Coefficients k = standard_coefficients();
    return synthesize_discrete(three_data(), constant(g, k.gamma), constant(g, k.sigma1), constant(g, k.sigma2),
                               colligation_options());
}

/// Random synthesized vessel on the standard coefficients, starting from gamma0.
inline DiscreteSynthesis random_synthesis(const TimeGrid& g, const GridFamily& gamma0, std::size_t count,
                                          std::mt19937_64& rng) {
    const Coefficients k = standard_coefficients();
    std::uniform_real_distribution<double> re(-1.5, -0.2), im(-1.5, 1.5);
    std::vector<SpectralDatum> data;
    for (std::size_t h = 0; h < count; ++h) {
        data.push_back(datum(Complex(re(rng), im(rng)), random_matrix(2, 1, rng).col(0)));
    }
    return synthesize_discrete(data, gamma0, constant(g, k.sigma1), constant(g, k.sigma2), colligation_options());
}

/// Constant vessel that satisfies colligation 1 to rounding: A1 = K - B sigma1 B^H / 2 with K skew.
/// A2 = 0, sigma2 = 0 and gamma = gamma_* = 0 make every other condition trivial.
inline DifferentialVessel colligation_exact_vessel(Eigen::Index n, Eigen::Index m, const ComplexMatrix& sigma1,
                                                   std::mt19937_64& rng, std::size_t steps = 8) {
    const TimeGrid g(0.0, 1.0, steps);
    const ComplexMatrix b = random_matrix(n, m, rng, 0.7);
    const ComplexMatrix a1 = random_skew(n, rng) - 0.5 * b * sigma1 * b.adjoint();
    const ComplexMatrix zero_m = ComplexMatrix::Zero(m, m);
    return DifferentialVessel(constant(g, a1), constant(g, ComplexMatrix::Zero(n, n)), constant(g, b),
                              constant(g, sigma1), constant(g, zero_m), constant(g, zero_m), constant(g, zero_m));
}

/// Probe points that keep a distance from a spectrum and from its reflection -conj.
inline std::vector<Complex> probes_off(const std::vector<Complex>& spectrum, std::size_t count, std::mt19937_64& rng,
                                       double radius = 3.0, double sign_of_re = 0.0) {
    std::uniform_real_distribution<double> coord(-radius, radius);
    std::vector<Complex> out;
    while (out.size() < count) {
        Complex z(coord(rng), coord(rng));
        if (sign_of_re != 0.0) z = Complex(sign_of_re * std::abs(z.real()), z.imag());
        if (std::abs(z.real()) < 0.05) continue;
        if (distance_to(spectrum, z) < 0.1 || distance_to(spectrum, -std::conj(z)) < 0.1) continue;
        out.push_back(z);
    }
    return out;
}

/// Null-pole data of Lyapunov type: A_xi = -A_pi^H and C0 = -B0^H, which keeps X well conditioned.
struct NullPoleData {
    ComplexMatrix a_pi, a_xi, c0, b0, sigma2, gamma_star;
};

inline NullPoleData random_null_pole(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng) {
    NullPoleData d;
    d.a_pi = random_matrix(n, n, rng, 0.3) - 0.8 * identity(n);
    d.a_xi = -d.a_pi.adjoint();
    d.b0 = random_matrix(n, m, rng, 0.5);
    d.c0 = -d.b0.adjoint();
    d.sigma2 = random_hermitian(m, rng, 0.3);
    d.gamma_star = random_skew(m, rng, 0.3);
    return d;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int exit_code = -1;
    std::string out;
};

/// Runs the command-line tool; stderr is discarded.
inline CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(VESSELKIT_CLI) + " " + args + " 2>/dev/null";
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    char buf[4096];
    std::size_t got = 0;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::string fixture(const std::string& name) { return std::string(VESSELKIT_FIXTURES) + "/" + name; }

}  // namespace vktest
