#pragma once

// JSON encoding. A complex scalar is [re, im]; a matrix is a list of rows; a family is a
// list of matrices, one per grid node. Keys keep a fixed order so output is canonical,
// and doubles are printed in shortest round-trip form, so parse(write(x)) == x bit for bit.

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "vesselkit/errors.hpp"
#include "vesselkit/ode.hpp"
#include "vesselkit/vessel.hpp"

namespace vesselkit {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "vesselkit/1";

inline Json encode_complex(Complex z) { return Json::array({z.real(), z.imag()}); }

inline double decode_real(const Json& j, const std::string& what) {
    if (!j.is_number()) fail(ErrorKind::InvalidInput, what + ": expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(ErrorKind::InvalidInput, what + ": non-finite number");
    return x;
}

inline Complex decode_complex(const Json& j, const std::string& what) {
    if (j.is_number()) return {decode_real(j, what), 0.0};
    if (!j.is_array() || j.size() != 2) fail(ErrorKind::InvalidInput, what + ": complex must be [re, im]");
    return {decode_real(j[0], what), decode_real(j[1], what)};
}

inline Json encode_matrix(const ComplexMatrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(encode_complex(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline ComplexMatrix decode_matrix(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
        fail(ErrorKind::InvalidInput, what + ": matrix must be a non-empty list of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    ComplexMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            fail(ErrorKind::InvalidInput, what + ": ragged matrix rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = decode_complex(row[static_cast<std::size_t>(c)], what);
    }
    return m;
}

inline ComplexVector decode_vector(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) fail(ErrorKind::InvalidInput, what + ": vector must be a non-empty list");
    ComplexVector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = decode_complex(j[i], what);
    return v;
}

inline Json encode_grid(const TimeGrid& g) {
    return Json{{"t_start", g.t_start}, {"t_end", g.t_end}, {"n_steps", g.n_steps}};
}

/// `default_steps_per_unit` fills in n_steps when the document leaves it out.
inline TimeGrid decode_grid(const Json& j, std::size_t default_steps_per_unit = 200) {
    if (!j.is_object() || !j.contains("t_start") || !j.contains("t_end")) {
        fail(ErrorKind::InvalidInput, "grid needs t_start and t_end");
    }
    const double a = decode_real(j["t_start"], "grid.t_start");
    const double b = decode_real(j["t_end"], "grid.t_end");
    if (!(b > a)) fail(ErrorKind::InvalidInput, "grid needs t_start < t_end");
    if (!j.contains("n_steps")) return make_grid(a, b, default_steps_per_unit);
    if (!j["n_steps"].is_number_unsigned() || j["n_steps"].get<std::size_t>() == 0) {
        fail(ErrorKind::InvalidInput, "grid.n_steps must be a positive integer");
    }
    return TimeGrid(a, b, j["n_steps"].get<std::size_t>());
}

inline Json encode_family(const GridFamily& f) {
    Json out = Json::array();
    for (const auto& s : f.samples()) out.push_back(encode_matrix(s));
    return out;
}

inline GridFamily decode_family(const Json& j, const TimeGrid& grid, const std::string& what) {
    if (!j.is_array()) fail(ErrorKind::InvalidInput, what + ": family must be a list of matrices");
    if (j.size() != grid.size()) {
        fail(ErrorKind::InvalidInput, what + ": family has " + std::to_string(j.size()) + " samples for " +
                                          std::to_string(grid.size()) + " nodes");
    }
    std::vector<ComplexMatrix> samples;
    samples.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) samples.push_back(decode_matrix(j[i], what + "[" + std::to_string(i) + "]"));
    for (const auto& s : samples) {
        if (s.rows() != samples[0].rows() || s.cols() != samples[0].cols()) {
            fail(ErrorKind::InvalidInput, what + ": samples differ in shape");
        }
    }
    return GridFamily(grid, std::move(samples));
}

/// A single matrix means "the same at every node"; a list of matrices is a family.
inline GridFamily decode_matrix_or_family(const Json& j, const TimeGrid& grid, const std::string& what) {
    const bool is_family = j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array() &&
                           !j[0][0].empty() && j[0][0][0].is_array();
    if (is_family) return decode_family(j, grid, what);
    return GridFamily::constant(grid, decode_matrix(j, what));
}

inline const Json& require_key(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) fail(ErrorKind::InvalidInput, where + ": missing key \"" + key + "\"");
    return j[key];
}

inline Json vessel_to_json(const DifferentialVessel& v) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["dims"] = Json{{"n", v.state_dim()}, {"m", v.signal_dim()}};
    j["grid"] = encode_grid(v.grid());
    j["A1"] = encode_family(v.a1());
    j["A2"] = encode_family(v.a2());
    j["B"] = encode_family(v.b());
    j["sigma1"] = encode_family(v.sigma1());
    j["sigma2"] = encode_family(v.sigma2());
    j["gamma"] = encode_family(v.gamma());
    j["gamma_star"] = encode_family(v.gamma_star());
    return j;
}

inline DifferentialVessel vessel_from_json(const Json& j, const KernelConfig& cfg = {}) {
    const std::string where = "vessel";
    if (!j.is_object()) fail(ErrorKind::InvalidInput, "vessel document must be a JSON object");
    const Json& version = require_key(j, "schema_version", where);
    if (!version.is_string() || version.get<std::string>() != kSchemaVersion) {
        fail(ErrorKind::InvalidInput, std::string("unsupported schema_version, expected ") + kSchemaVersion);
    }
    const Json& dims = require_key(j, "dims", where);
    const Json& jn = require_key(dims, "n", "dims");
    const Json& jm = require_key(dims, "m", "dims");
    if (!jn.is_number_unsigned() || !jm.is_number_unsigned() || jn.get<std::size_t>() == 0 ||
        jm.get<std::size_t>() == 0) {
        fail(ErrorKind::InvalidInput, "dims.n and dims.m must be positive integers");
    }
    const auto n = static_cast<Eigen::Index>(jn.get<std::size_t>());
    const auto m = static_cast<Eigen::Index>(jm.get<std::size_t>());
    const Json& jg = require_key(j, "grid", where);
    if (!jg.contains("n_steps")) fail(ErrorKind::InvalidInput, "vessel grid needs n_steps");
    const TimeGrid grid = decode_grid(jg);
    auto family = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
        GridFamily f = decode_family(require_key(j, key, where), grid, key);
        if (f.rows() != rows || f.cols() != cols) {
            fail(ErrorKind::ShapeMismatch, std::string(key) + " has shape " + std::to_string(f.rows()) + "x" +
                                               std::to_string(f.cols()) + ", dims say " + std::to_string(rows) +
                                               "x" + std::to_string(cols));
        }
        return f;
    };
    return DifferentialVessel(family("A1", n, n), family("A2", n, n), family("B", n, m), family("sigma1", m, m),
                              family("sigma2", m, m), family("gamma", m, m), family("gamma_star", m, m), cfg);
}

/// Canonical text: two-space indentation, fixed key order, trailing newline.
inline std::string dump_canonical(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace vesselkit
