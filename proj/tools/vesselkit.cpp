// vesselkit command-line tool.
//
// Exit codes: 0 pass, 1 input error, 2 numerical failure, 3 a checked condition failed.
// stdout carries one JSON document; stderr carries human-readable notes.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vesselkit/vesselkit.hpp"

using namespace vesselkit;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitCondition = 3;

struct Options {
    std::optional<double> tol;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> probes;
    std::uint64_t seed = 0;
    bool timing = false;
    std::string output;
    std::vector<std::string> lambdas;
    std::size_t node = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> u0;
    std::string side = "input";
    std::string rule = "left";
    std::string a2_rule;
    bool normalize = false;
};

struct Context {
    Config cfg;
    Options opt;
    std::string command;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

Complex parse_lambda(const std::string& text) {
    std::string s = text;
    for (char& ch : s) {
        if (ch == ',') ch = ' ';
    }
    std::istringstream in(s);
    double re = 0.0;
    double im = 0.0;
    if (!(in >> re)) fail(ErrorKind::InvalidInput, "cannot parse complex value \"" + text + "\"");
    if (!(in >> im)) im = 0.0;
    std::string rest;
    if (in >> rest) fail(ErrorKind::InvalidInput, "trailing characters in complex value \"" + text + "\"");
    if (!std::isfinite(re) || !std::isfinite(im)) fail(ErrorKind::InvalidInput, "complex value is not finite");
    return {re, im};
}

std::vector<Complex> parse_lambdas(const std::vector<std::string>& texts) {
    std::vector<Complex> out;
    for (const auto& t : texts) out.push_back(parse_lambda(t));
    return out;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::InvalidInput, "cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidInput, path + " is not valid JSON: " + e.what());
    }
}

double elapsed_ms(const Context& ctx) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - ctx.start).count();
}

/// Timing is wall-clock and so breaks byte-identical reruns; it only appears with --timing.
void emit(const Context& ctx, Json doc) {
    if (ctx.opt.timing && doc.is_object()) doc["timing"] = Json{{"elapsed_ms", elapsed_ms(ctx)}};
    const std::string text = dump_canonical(doc);
    if (ctx.opt.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(ctx.opt.output);
    if (!out) fail(ErrorKind::InvalidInput, "cannot write " + ctx.opt.output);
    out << text;
}

Json report_header(const Context& ctx) {
    Json r;
    r["command"] = ctx.command;
    r["tolerances"] = Json{{"tol", ctx.cfg.tol},
                           {"allowance", ctx.cfg.allowance},
                           {"eps_spec", ctx.cfg.eps_spec},
                           {"eps_pd", ctx.cfg.eps_pd},
                           {"eps_det", ctx.cfg.eps_det}};
    r["residuals"] = Json::array();
    r["probes"] = Json::array();
    return r;
}

void add_residual(Json& report, const std::string& name, double value, bool passed) {
    report["residuals"].push_back(Json{{"name", name}, {"value", value}, {"passed", passed}});
}

bool all_passed(const Json& report) {
    for (const auto& r : report["residuals"]) {
        if (!r["passed"].get<bool>()) return false;
    }
    return true;
}

/// Deterministic probe points: off every listed spectrum (and its reflection -conj when asked),
/// half of them in the right half-plane.
std::vector<Complex> make_probes(std::size_t count, std::uint64_t seed, double radius,
                                 const std::vector<std::vector<Complex>>& spectra, bool reflect) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(-radius, radius);
    std::vector<Complex> out;
    const double margin = 1e-2 * radius;
    std::size_t attempts = 0;
    while (out.size() < count) {
        if (++attempts > 100000) fail(ErrorKind::SingularSystem, "could not place probe points off the spectrum");
        Complex z(coord(rng), coord(rng));
        if (out.size() % 2 == 0) z = Complex(std::abs(z.real()), z.imag());
        bool ok = std::abs(z.real()) > margin;
        for (const auto& s : spectra) {
            ok = ok && distance_to(s, z) > margin;
            if (reflect) ok = ok && distance_to(s, -std::conj(z)) > margin;
        }
        if (ok) out.push_back(z);
    }
    return out;
}

std::vector<std::vector<Complex>> sampled_spectra(const GridFamily& a1) {
    const std::size_t last = a1.size() - 1;
    return {eigenvalues(a1[0]), eigenvalues(a1[last / 2]), eigenvalues(a1[last])};
}

double probe_radius(const GridFamily& a1) {
    double r = 0.0;
    for (const auto& a : a1.samples()) r = std::max(r, a.norm());
    return 2.0 * r + 1.0;
}

std::size_t require_node(const TimeGrid& g, std::size_t node) {
    if (node >= g.size()) fail(ErrorKind::InvalidInput, "--node beyond the last grid node");
    return node;
}

DifferentialVessel load_vessel(const Context& ctx, const std::string& path) {
    return vessel_from_json(read_json_file(path), ctx.cfg.kernel());
}

void require_inputs(const Context& ctx, std::size_t count) {
    if (ctx.opt.inputs.size() != count) {
        fail(ErrorKind::InvalidInput, ctx.command + " expects " + std::to_string(count) + " input file(s)");
    }
}

// ---------------------------------------------------------------------------------------------

int cmd_verify(const Context& ctx) {
    require_inputs(ctx, 1);
    const DifferentialVessel v = load_vessel(ctx, ctx.opt.inputs[0]);
    Json report = report_header(ctx);
    const double tol = ctx.cfg.tol;
    const double h = v.grid().step();

    const ConditionReport cond = verify_vessel(v, tol, ctx.cfg.allowance);
    for (const auto& [name, value, passed] : cond.entries()) add_residual(report, name, value, passed);

    try {
        std::vector<Complex> probes = parse_lambdas(ctx.opt.lambdas);
        if (probes.empty()) {
            probes = make_probes(ctx.cfg.probes, ctx.opt.seed, probe_radius(v.a1()), sampled_spectra(v.a1()), true);
        }
        const std::size_t last = v.grid().n_steps;
        // The finite-difference error in dS/dt2 grows with |lambda|, so the h^2 slack is scaled per probe.
        double pde_excess = 0.0, pde = 0.0, sym = 0.0, sign = 0.0, closed = 0.0;
        for (std::size_t k = 0; k < probes.size(); ++k) {
            const Complex lambda = probes[k];
            const std::size_t node = probes.size() > 1 ? k * last / (probes.size() - 1) : 0;
            report["probes"].push_back(Json{{"lambda", encode_complex(lambda)}, {"node", node}});
            const double r = transfer_pde_residual(v, lambda);
            const double scale = std::pow(1.0 + std::abs(lambda), 2);
            pde = std::max(pde, r);
            pde_excess = std::max(pde_excess, r - (tol + ctx.cfg.allowance * h * h * scale));
            sym = std::max(sym, adjoint_symmetry_residual(v, lambda, node, ctx.cfg.kernel()));
            const ExpansivityReport e = expansivity_check(v, lambda, node, ctx.cfg.kernel());
            closed = std::max(closed, e.closed_form_residual);
            // contractive on the right half-plane, expansive on the left
            sign = std::max(sign, lambda.real() > 0.0 ? e.max_eigenvalue : -e.min_eigenvalue);
        }
        add_residual(report, "transfer_pde", pde, pde_excess <= 0.0);
        add_residual(report, "adjoint_symmetry", sym, sym <= tol);
        add_residual(report, "defect_sign", std::max(sign, 0.0), sign <= tol);
        add_residual(report, "defect_closed_form", closed, closed <= tol);
    } catch (const VesselError& e) {
        report["error"] = Json{{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
        emit(ctx, report);
        return e.is_input_error() ? kExitInput : kExitNumerical;
    }
    emit(ctx, report);
    return all_passed(report) ? kExitPass : kExitCondition;
}

ElementaryOptions elementary_options(const Context& ctx, const Json& spec) {
    ElementaryOptions opt;
    opt.kernel = ctx.cfg.kernel();
    std::string rule = "ratio";
    if (spec.contains("options")) {
        const Json& o = spec["options"];
        if (!o.is_object()) fail(ErrorKind::InvalidInput, "options must be an object");
        if (o.contains("a2_rule")) {
            if (!o["a2_rule"].is_string()) fail(ErrorKind::InvalidInput, "options.a2_rule must be a string");
            rule = o["a2_rule"].get<std::string>();
        }
        if (o.contains("normalize")) {
            if (!o["normalize"].is_boolean()) fail(ErrorKind::InvalidInput, "options.normalize must be a boolean");
            opt.normalize = o["normalize"].get<bool>();
        }
    }
    if (!ctx.opt.a2_rule.empty()) rule = ctx.opt.a2_rule;
    if (ctx.opt.normalize) opt.normalize = true;
    if (rule == "ratio") {
        opt.a2_rule = A2Rule::Ratio;
    } else if (rule == "colligation") {
        opt.a2_rule = A2Rule::Colligation;
    } else {
        fail(ErrorKind::InvalidInput, "a2_rule must be \"ratio\" or \"colligation\"");
    }
    return opt;
}

int cmd_synthesize(const Context& ctx) {
    require_inputs(ctx, 1);
    const Json spec = read_json_file(ctx.opt.inputs[0]);
    if (!spec.is_object()) fail(ErrorKind::InvalidInput, "spectral spec must be a JSON object");
    const TimeGrid g = decode_grid(require_key(spec, "grid", "spec"), ctx.cfg.steps_per_unit);
    const GridFamily s1 = decode_matrix_or_family(require_key(spec, "sigma1", "spec"), g, "sigma1");
    const GridFamily s2 = decode_matrix_or_family(require_key(spec, "sigma2", "spec"), g, "sigma2");
    const GridFamily g0 = decode_matrix_or_family(require_key(spec, "gamma0", "spec"), g, "gamma0");
    const Json& jd = require_key(spec, "data", "spec");
    if (!jd.is_array() || jd.empty()) fail(ErrorKind::InvalidInput, "data must be a non-empty list");
    std::vector<SpectralDatum> data;
    for (std::size_t h = 0; h < jd.size(); ++h) {
        const std::string where = "data[" + std::to_string(h) + "]";
        SpectralDatum d;
        d.z = decode_complex(require_key(jd[h], "z", where), where + ".z");
        d.b0 = decode_vector(require_key(jd[h], "b0", where), where + ".b0");
        if (jd[h].contains("theta")) {
            const Json& th = jd[h]["theta"];
            if (!th.is_array() || th.size() != g.size()) {
                fail(ErrorKind::InvalidInput, where + ".theta must list one real value per grid node");
            }
            std::vector<ComplexMatrix> samples;
            for (const auto& x : th) samples.push_back(ComplexMatrix::Constant(1, 1, decode_real(x, where + ".theta")));
            d.theta = GridFamily(g, std::move(samples));
        }
        data.push_back(std::move(d));
    }
    const DifferentialVessel v = build_discrete(data, g0, s1, s2, elementary_options(ctx, spec));
    emit(ctx, vessel_to_json(v));
    return kExitPass;
}

int cmd_transfer(const Context& ctx) {
    require_inputs(ctx, 1);
    const DifferentialVessel v = load_vessel(ctx, ctx.opt.inputs[0]);
    const auto lambdas = parse_lambdas(ctx.opt.lambdas);
    if (lambdas.empty()) fail(ErrorKind::InvalidInput, "transfer needs at least one --lambda");
    const std::size_t node = require_node(v.grid(), ctx.opt.node);
    Json out;
    out["command"] = ctx.command;
    out["results"] = Json::array();
    for (const Complex lambda : lambdas) {
        out["results"].push_back(Json{{"lambda", encode_complex(lambda)},
                                      {"node", node},
                                      {"S", encode_matrix(eval_transfer(v, lambda, node, ctx.cfg.kernel()))}});
    }
    emit(ctx, out);
    return kExitPass;
}

int cmd_couple(const Context& ctx) {
    require_inputs(ctx, 2);
    const DifferentialVessel a = load_vessel(ctx, ctx.opt.inputs[0]);
    const DifferentialVessel b = load_vessel(ctx, ctx.opt.inputs[1]);
    emit(ctx, vessel_to_json(couple(a, b, ctx.cfg.tol)));
    return kExitPass;
}

int cmd_simulate(const Context& ctx) {
    require_inputs(ctx, 1);
    const DifferentialVessel v = load_vessel(ctx, ctx.opt.inputs[0]);
    const auto lambdas = parse_lambdas(ctx.opt.lambdas);
    if (lambdas.size() != 1) fail(ErrorKind::InvalidInput, "simulate needs exactly one --lambda");
    ComplexVector u0 = ComplexVector::Ones(v.signal_dim());
    if (!ctx.opt.u0.empty()) {
        if (static_cast<Eigen::Index>(ctx.opt.u0.size()) != v.signal_dim()) {
            fail(ErrorKind::InvalidInput, "--u0 must be given once per signal component");
        }
        for (std::size_t i = 0; i < ctx.opt.u0.size(); ++i) u0(static_cast<Eigen::Index>(i)) = parse_lambda(ctx.opt.u0[i]);
    }
    const Trajectory tr = simulate(v, lambdas[0], u0, ctx.cfg.kernel());
    Json report = report_header(ctx);
    const double h = v.grid().step();
    report["probes"].push_back(Json{{"lambda", encode_complex(lambdas[0])}, {"node", 0}});
    const double e1 = tr.max_energy_defect_t1();
    add_residual(report, "energy_t1", e1, e1 <= ctx.cfg.tol);
    add_residual(report, "energy_t2", tr.energy_defect_t2,
                 tr.energy_defect_t2 <= ctx.cfg.tol + ctx.cfg.allowance * h * h);
    report["trajectory"] = Json{{"u", encode_family(tr.u)}, {"x", encode_family(tr.x)}, {"y", encode_family(tr.y)}};
    emit(ctx, report);
    return all_passed(report) ? kExitPass : kExitCondition;
}

int cmd_fundamental(const Context& ctx) {
    require_inputs(ctx, 1);
    const Json doc = read_json_file(ctx.opt.inputs[0]);
    const auto lambdas = parse_lambdas(ctx.opt.lambdas);
    if (lambdas.size() != 1) fail(ErrorKind::InvalidInput, "fundamental needs exactly one --lambda");
    if (ctx.opt.side != "input" && ctx.opt.side != "output") fail(ErrorKind::InvalidInput, "--side is input or output");
    const Side side = ctx.opt.side == "input" ? Side::Input : Side::Output;
    std::optional<GridFamily> s1, s2, gam;
    if (doc.is_object() && doc.contains("schema_version")) {
        const DifferentialVessel v = vessel_from_json(doc, ctx.cfg.kernel());
        s1 = v.sigma1();
        s2 = v.sigma2();
        gam = side == Side::Input ? v.gamma() : v.gamma_star();
    } else {
        const TimeGrid g = decode_grid(require_key(doc, "grid", "coefficients"), ctx.cfg.steps_per_unit);
        s1 = decode_matrix_or_family(require_key(doc, "sigma1", "coefficients"), g, "sigma1");
        s2 = decode_matrix_or_family(require_key(doc, "sigma2", "coefficients"), g, "sigma2");
        gam = decode_matrix_or_family(require_key(doc, "gamma", "coefficients"), g, "gamma");
    }
    const std::size_t base = require_node(s1->grid(), ctx.opt.node);
    const FundamentalMatrix phi = fundamental_matrix(lambdas[0], *s1, *s2, *gam, base, side, ctx.cfg.kernel());
    const FundamentalMatrix phi_ref =
        fundamental_matrix(-std::conj(lambdas[0]), *s1, *s2, *gam, base, side, ctx.cfg.kernel());
    Json out;
    out["command"] = ctx.command;
    out["lambda"] = encode_complex(lambdas[0]);
    out["base"] = base;
    out["side"] = to_string(side);
    out["grid"] = encode_grid(s1->grid());
    out["diagnostics"] = Json{{"phi_symmetry", phi_symmetry_residual(phi, phi_ref, *s1)}};
    out["family"] = encode_family(phi.family);
    emit(ctx, out);
    return kExitPass;
}

int cmd_multint(const Context& ctx) {
    require_inputs(ctx, 1);
    const Json doc = read_json_file(ctx.opt.inputs[0]);
    const TimeGrid sg = decode_grid(require_key(doc, "s_grid", "kernel"), ctx.cfg.steps_per_unit);
    const GridFamily k = decode_matrix_or_family(require_key(doc, "K", "kernel"), sg, "K");
    std::vector<double> c(sg.size(), 0.0);
    if (doc.contains("c")) {
        const Json& jc = doc["c"];
        if (jc.is_number()) {
            std::fill(c.begin(), c.end(), decode_real(jc, "c"));
        } else if (jc.is_array() && jc.size() == sg.size()) {
            for (std::size_t j = 0; j < jc.size(); ++j) c[j] = decode_real(jc[j], "c");
        } else {
            fail(ErrorKind::InvalidInput, "c must be a number or one value per s-node");
        }
    }
    if (ctx.opt.rule != "left" && ctx.opt.rule != "midpoint") fail(ErrorKind::InvalidInput, "--rule is left or midpoint");
    const ProductRule rule = ctx.opt.rule == "left" ? ProductRule::LeftPoint : ProductRule::Midpoint;
    const auto lambdas = parse_lambdas(ctx.opt.lambdas);
    if (lambdas.empty()) fail(ErrorKind::InvalidInput, "multint needs at least one --lambda");
    Json out;
    out["command"] = ctx.command;
    out["rule"] = ctx.opt.rule;
    out["results"] = Json::array();
    for (const Complex lambda : lambdas) {
        const ComplexMatrix w = mult_integral(k, c, lambda, sg.n_steps, rule, ctx.cfg.kernel());
        out["results"].push_back(Json{{"lambda", encode_complex(lambda)}, {"W", encode_matrix(w)}});
    }
    emit(ctx, out);
    return kExitPass;
}

int cmd_realize(const Context& ctx) {
    require_inputs(ctx, 1);
    const Json doc = read_json_file(ctx.opt.inputs[0]);
    std::optional<NullPoleTriple> triple;
    std::optional<GridFamily> s1, s2, gs;
    std::optional<DifferentialVessel> source;
    if (doc.is_object() && doc.contains("schema_version")) {
        source.emplace(vessel_from_json(doc, ctx.cfg.kernel()));
        require_node(source->grid(), ctx.opt.node);
        triple = extract_null_pole(*source, ctx.opt.node, ctx.cfg.kernel());
        s1 = source->sigma1();
        s2 = source->sigma2();
        gs = source->gamma_star();
    } else {
        const TimeGrid g = decode_grid(require_key(doc, "grid", "triple"), ctx.cfg.steps_per_unit);
        s1 = decode_matrix_or_family(require_key(doc, "sigma1", "triple"), g, "sigma1");
        s2 = decode_matrix_or_family(require_key(doc, "sigma2", "triple"), g, "sigma2");
        gs = decode_matrix_or_family(require_key(doc, "gamma_star", "triple"), g, "gamma_star");
        const ComplexMatrix a_pi = decode_matrix(require_key(doc, "A_pi", "triple"), "A_pi");
        const ComplexMatrix a_xi = decode_matrix(require_key(doc, "A_xi", "triple"), "A_xi");
        const ComplexMatrix c0 = decode_matrix(require_key(doc, "C0", "triple"), "C0");
        const ComplexMatrix b0 = decode_matrix(require_key(doc, "B0", "triple"), "B0");
        triple = evolve_null_pole(c0, a_pi, a_xi, b0, *s1, *s2, *gs, require_node(g, ctx.opt.node), ctx.cfg.kernel());
    }
    const ZeroPoleRealization rz = zero_pole_realize(*triple, *gs, *s1, *s2, ctx.cfg.kernel(), ctx.cfg.eps_det);
    Json report = report_header(ctx);
    const TimeGrid& g = rz.grid();
    const double h = g.step();
    const double slack = ctx.cfg.tol + ctx.cfg.allowance * h * h;
    report["singular_nodes"] = rz.singular_nodes();
    // drift allowed by the fourth-order coupling integration
    const double syl = max_sylvester_residual(*triple, *s1);
    const double syl_bound = sylvester_residual(*triple, *s1, ctx.opt.node) + ctx.cfg.tol +
                             100.0 * std::pow(h, 4) * sylvester_scale(*triple, *s1, ctx.opt.node);
    add_residual(report, "sylvester", syl, syl <= syl_bound);
    const auto cr = rz.condition_residuals();
    add_residual(report, "input_vessel", cr.input, cr.input <= slack);
    add_residual(report, "output_vessel", cr.output, cr.output <= slack);
    add_residual(report, "linkage", cr.linkage, cr.linkage <= ctx.cfg.tol);
    if (!rz.singular_nodes().empty()) {
        report["error"] = Json{{"kind", "CouplingSingular"}, {"message", "X is singular at listed nodes"}};
        emit(ctx, report);
        return kExitNumerical;
    }
    std::vector<Complex> probes = parse_lambdas(ctx.opt.lambdas);
    if (probes.empty()) {
        probes = make_probes(std::min<std::size_t>(ctx.cfg.probes, 10), ctx.opt.seed, 2.0 * rz.a_pi().norm() + 1.0,
                             {eigenvalues(rz.a_pi())}, false);
    }
    double pde = 0.0, pde_excess = 0.0, itw = 0.0, agree = 0.0;
    for (const Complex lambda : probes) {
        report["probes"].push_back(Json{{"lambda", encode_complex(lambda)}, {"node", ctx.opt.node}});
        const double r = transfer_pde_residual(rz, lambda);
        pde = std::max(pde, r);
        pde_excess = std::max(pde_excess, r - (ctx.cfg.tol + ctx.cfg.allowance * h * h * std::pow(1.0 + std::abs(lambda), 2)));
        itw = std::max(itw, intertwining_residual(rz, lambda, ctx.opt.node));
        if (source) {
            for (std::size_t i = 0; i < g.size(); i += std::max<std::size_t>(1, g.n_steps / 8)) {
                agree = std::max(agree, (rz.transfer(lambda, i) - eval_transfer(*source, lambda, i)).norm());
            }
        }
    }
    add_residual(report, "transfer_pde", pde, pde_excess <= 0.0);
    add_residual(report, "intertwining", itw, itw <= slack);
    if (source) add_residual(report, "source_agreement", agree, agree <= slack);
    emit(ctx, report);
    return all_passed(report) ? kExitPass : kExitCondition;
}

int cmd_factor(const Context& ctx) {
    require_inputs(ctx, 1);
    const DifferentialVessel v = load_vessel(ctx, ctx.opt.inputs[0]);
    const auto lambdas = parse_lambdas(ctx.opt.lambdas);
    if (lambdas.size() != 1) fail(ErrorKind::InvalidInput, "factor needs exactly one --lambda naming the target point");
    const ExtractionResult ex = extract_elementary(v, lambdas[0], require_node(v.grid(), ctx.opt.node), ctx.cfg.kernel());
    Json out;
    out["command"] = ctx.command;
    out["z"] = encode_complex(ex.z);
    out["residue_at_z"] = ex.residue_at_z;
    out["transport_defect"] = ex.transport_defect;
    out["factor"] = vessel_to_json(ex.factor);
    out["quotient"] = ex.quotient ? vessel_to_json(*ex.quotient) : Json(nullptr);
    emit(ctx, out);
    return kExitPass;
}

int cmd_gauge(const Context& ctx) {
    require_inputs(ctx, 2);
    const DifferentialVessel a = load_vessel(ctx, ctx.opt.inputs[0]);
    const DifferentialVessel b = load_vessel(ctx, ctx.opt.inputs[1]);
    const GaugeEquivalence ge =
        gauge_equivalence(a, b, require_node(a.grid(), ctx.opt.node), ctx.cfg.probes, ctx.cfg.tol);
    Json report = report_header(ctx);
    add_residual(report, "unitarity", ge.unitarity_defect, ge.unitarity_defect < ctx.cfg.tol);
    add_residual(report, "transfer_mismatch", ge.transfer_mismatch, ge.transfer_mismatch < ctx.cfg.tol);
    report["equivalent"] = ge.equivalent;
    if (!ge.equivalent) report["reason"] = ge.reason;
    emit(ctx, report);
    return ge.equivalent ? kExitPass : kExitCondition;
}

int cmd_hermitian(const Context& ctx) {
    require_inputs(ctx, 1);
    const Json doc = read_json_file(ctx.opt.inputs[0]);
    const TimeGrid g = decode_grid(require_key(doc, "grid", "hermitian"), ctx.cfg.steps_per_unit);
    const ComplexMatrix a1 = decode_matrix(require_key(doc, "A1", "hermitian"), "A1");
    const GridFamily c = decode_matrix_or_family(require_key(doc, "C", "hermitian"), g, "C");
    const GridFamily s1 = decode_matrix_or_family(require_key(doc, "sigma1", "hermitian"), g, "sigma1");
    const HermitianRealization hr = hermitian_realize(c, a1, s1, ctx.cfg.kernel());
    Json report = report_header(ctx);
    std::vector<Complex> probes = parse_lambdas(ctx.opt.lambdas);
    if (probes.empty()) {
        const auto spec = eigenvalues(ComplexMatrix(-a1));
        probes = make_probes(ctx.cfg.probes, ctx.opt.seed, 2.0 * a1.norm() + 1.0, {spec}, true);
    }
    double sym = 0.0, frames = 0.0;
    for (std::size_t i = 0; i < g.size(); i += std::max<std::size_t>(1, g.n_steps / 8)) {
        sym = std::max(sym, inverse_symmetry_residual([&](Complex l) { return hr.transfer(l, i); }, s1[i], probes));
        for (const Complex l : probes) frames = std::max(frames, (hr.transfer(l, i) - hr.transfer_tilde(l, i)).norm());
    }
    for (const Complex l : probes) report["probes"].push_back(Json{{"lambda", encode_complex(l)}, {"node", 0}});
    double min_eig = hr.min_eigenvalue.front();
    for (const double e : hr.min_eigenvalue) min_eig = std::min(min_eig, e);
    add_residual(report, "colligation", hr.colligation_residual, hr.colligation_residual <= ctx.cfg.tol);
    add_residual(report, "inverse_symmetry", sym, sym <= ctx.cfg.tol);
    add_residual(report, "frame_agreement", frames, frames <= ctx.cfg.tol);
    report["min_eigenvalue_X"] = min_eig;
    report["max_X_jump"] = hr.max_x_jump;
    emit(ctx, report);
    return all_passed(report) ? kExitPass : kExitCondition;
}

Json error_document(const std::string& command, const std::string& kind, const std::string& message) {
    Json j;
    j["command"] = command;
    j["error"] = Json{{"kind", kind}, {"message", message}};
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vesselkit: conservative vessels, transfer functions and their realizations"};
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App* sub, std::size_t inputs) {
        sub->add_option("inputs", opt.inputs, "input JSON file(s)")->expected(static_cast<int>(inputs))->required();
        sub->add_option("-o,--output", opt.output, "write the result here instead of stdout");
        sub->add_option("--tol", opt.tol, "residual tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--steps", opt.steps, "grid steps per unit t2 when a document omits n_steps")
            ->check(CLI::PositiveNumber);
        sub->add_option("--probes", opt.probes, "number of probe points")->check(CLI::PositiveNumber);
        sub->add_option("--seed", opt.seed, "seed for probe placement");
        sub->add_option("--lambda", opt.lambdas, "spectral parameter \"re,im\" (repeatable)");
        sub->add_option("--node", opt.node, "grid node index");
        sub->add_flag("--timing", opt.timing, "put elapsed time into the JSON report");
    };

    auto* verify = app.add_subcommand("verify", "check every vessel condition and transfer-function identity");
    common(verify, 1);
    auto* synthesize = app.add_subcommand("synthesize", "build a vessel from discrete spectral data");
    common(synthesize, 1);
    synthesize->add_option("--a2-rule", opt.a2_rule, "ratio or colligation");
    synthesize->add_flag("--normalize", opt.normalize, "rescale each b0 so |b0^H sigma1 b0| = 1");
    auto* transfer = app.add_subcommand("transfer", "evaluate S(lambda) at a node");
    common(transfer, 1);
    auto* couple_cmd = app.add_subcommand("couple", "cascade two vessels (first, then second)");
    common(couple_cmd, 2);
    auto* simulate_cmd = app.add_subcommand("simulate", "separated trajectory and energy balance");
    common(simulate_cmd, 1);
    simulate_cmd->add_option("--u0", opt.u0, "initial input component \"re,im\" (repeat per component)");
    auto* fundamental = app.add_subcommand("fundamental", "fundamental matrix of the input or output equation");
    common(fundamental, 1);
    fundamental->add_option("--side", opt.side, "input or output");
    auto* multint = app.add_subcommand("multint", "multiplicative integral of a kernel");
    common(multint, 1);
    multint->add_option("--rule", opt.rule, "left or midpoint");
    auto* realize = app.add_subcommand("realize", "zero/pole realization from a triple or a vessel");
    common(realize, 1);
    auto* factor = app.add_subcommand("factor", "split off the elementary factor nearest --lambda");
    common(factor, 1);
    auto* gauge = app.add_subcommand("gauge", "test two vessels for gauge equivalence");
    common(gauge, 2);
    auto* hermitian = app.add_subcommand("hermitian", "Hermitian realization from (A1, C, sigma1)");
    common(hermitian, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cout << dump_canonical(error_document("", "InvalidInput", e.what()));
        return kExitInput;
    }

    Context ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    int code = kExitPass;
    try {
        ctx.cfg = load_config();
        if (opt.tol) ctx.cfg.tol = *opt.tol;
        if (opt.steps) ctx.cfg.steps_per_unit = *opt.steps;
        if (opt.probes) ctx.cfg.probes = *opt.probes;
        ctx.opt = opt;
        const std::string& c = ctx.command;
        if (c == "verify") code = cmd_verify(ctx);
        else if (c == "synthesize") code = cmd_synthesize(ctx);
        else if (c == "transfer") code = cmd_transfer(ctx);
        else if (c == "couple") code = cmd_couple(ctx);
        else if (c == "simulate") code = cmd_simulate(ctx);
        else if (c == "fundamental") code = cmd_fundamental(ctx);
        else if (c == "multint") code = cmd_multint(ctx);
        else if (c == "realize") code = cmd_realize(ctx);
        else if (c == "factor") code = cmd_factor(ctx);
        else if (c == "gauge") code = cmd_gauge(ctx);
        else if (c == "hermitian") code = cmd_hermitian(ctx);
    } catch (const VesselError& e) {
        std::cerr << "vesselkit " << ctx.command << ": " << e.what() << "\n";
        std::cout << dump_canonical(error_document(ctx.command, std::string(to_string(e.kind())), e.what()));
        code = e.is_input_error() ? kExitInput : kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "vesselkit " << ctx.command << ": " << e.what() << "\n";
        std::cout << dump_canonical(error_document(ctx.command, "InvalidInput", e.what()));
        code = kExitInput;
    }
    std::cerr << "vesselkit " << ctx.command << ": " << elapsed_ms(ctx) << " ms\n";
    return code;
}
