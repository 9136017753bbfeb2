#pragma once

// Command-line front end.
//
// Subcommands: validate, random, synthesize, verify, colorsets; plus
// --batch <file> to run one job per line. Exit codes: 0 ok, 1 verification
// failure, 2 parse/input error, 3 infeasible target, 4 non-generic coupler
// after randomisation attempts.
//
// verify recomputes sequence products with a strict left fold in application
// order; it shares nothing with synthesize beyond the input files.

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "guc/colorsets.hpp"
#include "guc/decouple.hpp"
#include "guc/io.hpp"
#include "guc/rng.hpp"
#include "guc/sequence.hpp"
#include "guc/symplectic.hpp"
#include "guc/synth.hpp"

namespace guc::cli {

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitParseError = 2;
constexpr int kExitInfeasibleTarget = 3;
constexpr int kExitNonGeneric = 4;

inline int exit_code_for(const Error& e) {
    switch (e.code()) {
        case Errc::target_crosses_color_sets:
            return kExitInfeasibleTarget;
        case Errc::non_generic_coupler:
        case Errc::non_generic_pair:
        case Errc::non_generic_intermediate:
        case Errc::retry_budget_exhausted:
        case Errc::saturation_not_reached:
            return kExitNonGeneric;
        default:
            return kExitParseError;
    }
}

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(3) << std::scientific << v;
    return os.str();
}

// Accepts "1,3" or "1 3"; returns 0-based indices.
inline std::vector<int> parse_modes(const std::string& text, int n_modes) {
    std::vector<int> modes;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        std::istringstream fields(item);
        std::string tok;
        while (fields >> tok) {
            int v = 0;
            try {
                v = std::stoi(tok);
            } catch (...) {
                throw Error(Errc::invalid_argument, "bad mode index: " + tok);
            }
            if (v < 1 || v > n_modes)
                throw Error(Errc::invalid_argument, "mode index " + tok + " out of range 1.." +
                                                        std::to_string(n_modes));
            modes.push_back(v - 1);
        }
    }
    if (modes.empty()) throw Error(Errc::invalid_argument, "empty mode list");
    return modes;
}

inline SymplecticMatrix load_symplectic(const std::string& path, double tol = -1.0) {
    const MatrixFile f = read_matrix(read_file(path));
    try {
        return SymplecticMatrix(f.data, tol);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

inline void emit(const std::string& path, const std::string& content, std::ostream& out) {
    if (path == "-")
        out << content;
    else
        write_file(path, content);
}

inline std::string render_sequence(const CompiledSequence& seq) {
    // Matrix order (last applied first), the way the product is written.
    std::string s;
    for (auto it = seq.steps.rbegin(); it != seq.steps.rend(); ++it)
        s += it->kind == Step::Kind::coupler ? "S " : "L ";
    if (!s.empty()) s.pop_back();
    return s;
}

// Partial-product symplectic residuals, one line per step in application order.
inline void render_step_residuals(const CompiledSequence& seq, const SymplecticMatrix& coupler,
                                  std::ostream& out) {
    Mat acc = Mat::Identity(2 * seq.n_modes, 2 * seq.n_modes);
    int idx = 0;
    for (const auto& step : seq.steps) {
        acc = (step.kind == Step::Kind::coupler ? coupler.mat() : embed_local_matrix(step.layer)) * acc;
        out << "  step " << std::setw(3) << ++idx << "  "
            << (step.kind == Step::Kind::coupler ? "coupler" : "local  ")
            << "  partial residual " << fmt(symplectic_residual(acc)) << "\n";
    }
}

}  // namespace detail

// --- validate ----------------------------------------------------------------

inline int cmd_validate(const std::string& path, double tol, double block_eps, const std::string& format,
                        std::ostream& out, std::ostream& err) {
    MatrixFile file;
    try {
        file = read_matrix(read_file(path));
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitParseError;
    }
    const double residual = symplectic_residual(file.data);
    const double accept = tol > 0 ? tol : Tolerances{}.symp_tol(file.n_modes);
    const bool symplectic = residual <= accept;

    // Analysis runs regardless of the verdict; the constructor tolerance is
    // relaxed so a failing matrix can still be inspected.
    SymplecticMatrix s(file.data, std::max(residual * 2 + 1e-300, accept));
    const GenericityReport gen = genericity_check(s, block_eps);
    const ColorPartition part = contract(build_graph(s, block_eps));

    if (format == "json") {
        ordered_json j;
        j["n_modes"] = file.n_modes;
        j["symplectic_residual"] = residual;
        j["tolerance"] = accept;
        j["symplectic"] = symplectic;
        j["is_generic"] = gen.is_generic;
        j["genericity_violations"] = gen.violations.size();
        ordered_json sets = ordered_json::array();
        for (const auto& set : part.sets) {
            ordered_json one = ordered_json::array();
            for (int m : set) one.push_back(m + 1);
            sets.push_back(std::move(one));
        }
        j["color_sets"] = std::move(sets);
        out << j.dump() << "\n";
    } else {
        out << "modes:               " << file.n_modes << "\n";
        out << "symplectic residual: " << detail::fmt(residual) << "  (tolerance " << detail::fmt(accept)
            << ") -> " << (symplectic ? "ok" : "FAIL") << "\n";
        out << "generic:             " << (gen.is_generic ? "yes" : "no") << "  ("
            << gen.violations.size() << " vanishing quadrature pairs)\n";
        if (!gen.is_generic) {
            size_t shown = 0;
            for (const auto& v : gen.violations) {
                if (shown++ == 8) {
                    out << "  ...\n";
                    break;
                }
                out << "  " << (v.row_side ? "row" : "column") << " pair k=" << v.quad_index + 1
                    << " mode=" << v.mode + 1 << "\n";
            }
        }
        out << "color sets:          ";
        for (const auto& set : part.sets) {
            out << "{";
            for (size_t i = 0; i < set.size(); ++i) out << (i ? "," : "") << set[i] + 1;
            out << "} ";
        }
        out << "\n";
    }
    return symplectic ? kExitOk : kExitVerificationFailure;
}

// --- random ------------------------------------------------------------------

inline int cmd_random(int n_modes, std::uint64_t seed, const std::string& scheme, double squeeze_cap,
                      const std::string& output, std::ostream& out, std::ostream& err) {
    try {
        RngSpec spec;
        spec.seed = seed;
        spec.squeeze_cap = squeeze_cap;
        if (scheme == "exponential")
            spec.scheme = RngSpec::Scheme::exponential;
        else if (scheme != "factored")
            throw Error(Errc::invalid_argument, "unknown scheme: " + scheme);
        const SymplecticMatrix s = random_symplectic(n_modes, spec);
        detail::emit(output, write_matrix(s), out);
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

// --- synthesize --------------------------------------------------------------

inline int cmd_synthesize(const std::string& coupler_path, const std::string& target_path,
                          const std::string& modes_str, std::uint64_t seed, double tol, double block_eps,
                          const std::string& output, const std::string& format, std::ostream& out,
                          std::ostream& err) {
    try {
        const SymplecticMatrix coupler = detail::load_symplectic(coupler_path);
        const SymplecticMatrix target = detail::load_symplectic(target_path);
        const std::vector<int> modes = detail::parse_modes(modes_str, coupler.modes());
        const int n = coupler.modes();

        Tolerances tols;
        tols.block_eps = block_eps;
        if (tol > 0) tols.synth = tol;

        const ColorPartition part = contract(build_graph(coupler, block_eps));
        if (!feasibility(part, modes)) {
            err << "error: " << guc::detail::describe_sets(part, modes) << "\n";
            return kExitInfeasibleTarget;
        }

        // Non-generic couplers get wrapped in random local layers; a genuine
        // edge case keeps its vanishing blocks under every wrapping and fails.
        LocalLayer pre = identity_layer(n);
        LocalLayer post = identity_layer(n);
        if (!genericity_check(coupler, block_eps).is_generic) {
            SeededRng wrap_rng(seed ^ 0x9e3779b97f4a7c15ULL);
            bool fixed = false;
            for (int i = 0; i < 8 && !fixed; ++i) {
                LocalLayer a = random_local_layer(n, wrap_rng, 1.0);
                LocalLayer b = random_local_layer(n, wrap_rng, 1.0);
                const SymplecticMatrix eff = compose(embed_local(b), compose(coupler, embed_local(a)));
                if (genericity_check(eff, block_eps).is_generic) {
                    pre = std::move(a);
                    post = std::move(b);
                    fixed = true;
                }
            }
            if (!fixed) {
                err << "error: coupler is non-generic and randomisation cannot remove the vanishing "
                       "blocks (edge case)\n";
                return kExitNonGeneric;
            }
        }

        RngSpec rng_spec;
        rng_spec.seed = seed;
        const SynthesisResult result =
            synthesize_wrapped(coupler, pre, post, target, modes, tols, rng_spec);

        detail::emit(output, write_sequence(result.sequence, &result.report), out);

        const double rel_target = result.report.target_block_residual / result.report.scale;
        const double rel_cross = result.report.cross_block_residual / result.report.scale;
        const bool ok = rel_target <= tols.synth && rel_cross <= tols.synth;
        std::ostream& rep = (output == "-") ? err : out;
        if (format == "json") {
            ordered_json j;
            j["coupler_uses"] = result.sequence.coupler_count();
            j["scale"] = result.report.scale;
            j["target_block_residual"] = result.report.target_block_residual;
            j["cross_block_residual"] = result.report.cross_block_residual;
            j["decouple_cross_residual"] = result.report.decouple_cross_residual;
            j["recovery_residual"] = result.report.recovery_residual;
            j["achieved_residual"] = result.report.achieved_residual;
            j["ok"] = ok;
            rep << j.dump() << "\n";
        } else {
            rep << "sequence: " << detail::render_sequence(result.sequence) << "\n";
            rep << "coupler uses:            " << result.sequence.coupler_count() << "\n";
            rep << "scale:                   " << detail::fmt(result.report.scale) << "\n";
            rep << "target block residual:   " << detail::fmt(result.report.target_block_residual)
                << "  (relative " << detail::fmt(rel_target) << ")\n";
            rep << "cross block residual:    " << detail::fmt(result.report.cross_block_residual)
                << "  (relative " << detail::fmt(rel_cross) << ")\n";
            rep << "decoupling contribution: " << detail::fmt(result.report.decouple_cross_residual) << "\n";
            rep << "recovery contribution:   " << detail::fmt(result.report.recovery_residual) << "\n";
            detail::render_step_residuals(result.sequence, coupler, rep);
            rep << (ok ? "ok" : "FAIL") << "\n";
        }
        return ok ? kExitOk : kExitVerificationFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

// --- verify ------------------------------------------------------------------

inline int cmd_verify(const std::string& coupler_path, const std::string& sequence_path,
                      const std::string& target_path, double tol, const std::string& format,
                      std::ostream& out, std::ostream& err) {
    try {
        const SymplecticMatrix coupler = detail::load_symplectic(coupler_path);
        const SequenceFile file = read_sequence(read_file(sequence_path));
        if (file.sequence.n_modes != coupler.modes())
            throw Error(Errc::dimension_mismatch, "sequence and coupler disagree on the mode count");

        // Strict left fold in application order.
        Mat product = Mat::Identity(coupler.dim(), coupler.dim());
        for (const auto& step : file.sequence.steps)
            product = (step.kind == Step::Kind::coupler ? coupler.mat() : embed_local_matrix(step.layer)) *
                      product;

        const double scale = std::max(1.0, max_abs(product));
        bool ok = true;

        double report_dev = -1.0;
        if (file.report && file.report->achieved.size() > 0) {
            if (file.report->achieved.rows() != product.rows())
                throw Error(Errc::dimension_mismatch, "embedded report has the wrong dimensions");
            report_dev = max_abs(product - file.report->achieved) /
                         std::max(1.0, max_abs(file.report->achieved));
            if (report_dev > 1e-12) ok = false;
        }

        double target_dev = -1.0;
        double cross_dev = -1.0;
        if (!target_path.empty()) {
            const SymplecticMatrix target = detail::load_symplectic(target_path);
            const double accept = (tol > 0 ? tol : Tolerances{}.synth) * scale;
            if (file.sequence.target_modes.empty()) {
                if (target.modes() != file.sequence.n_modes)
                    throw Error(Errc::dimension_mismatch, "target size does not match the sequence");
                target_dev = max_abs(product - target.mat());
            } else {
                if (target.modes() != static_cast<int>(file.sequence.target_modes.size()))
                    throw Error(Errc::dimension_mismatch, "target size does not match the sequence");
                target_dev = max_abs(extract_modes(product, file.sequence.target_modes) - target.mat());
                cross_dev = cross_block_residual(product, file.sequence.target_modes);
            }
            if (target_dev > accept || (cross_dev >= 0 && cross_dev > accept)) ok = false;
        }

        if (format == "json") {
            ordered_json j;
            j["coupler_uses"] = file.sequence.coupler_count();
            j["scale"] = scale;
            if (report_dev >= 0) j["deviation_from_report"] = report_dev;
            if (target_dev >= 0) j["target_block_residual"] = target_dev;
            if (cross_dev >= 0) j["cross_block_residual"] = cross_dev;
            j["ok"] = ok;
            out << j.dump() << "\n";
        } else {
            out << "coupler uses: " << file.sequence.coupler_count() << "\n";
            if (report_dev >= 0)
                out << "deviation from embedded report: " << detail::fmt(report_dev) << " (relative)\n";
            else
                out << "no embedded report\n";
            if (target_dev >= 0) out << "target block residual: " << detail::fmt(target_dev) << "\n";
            if (cross_dev >= 0) out << "cross block residual:  " << detail::fmt(cross_dev) << "\n";
            out << (ok ? "ok" : "FAIL") << "\n";
        }
        return ok ? kExitOk : kExitVerificationFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

// --- colorsets ---------------------------------------------------------------

inline int cmd_colorsets(const std::string& path, double block_eps, bool saturate, std::uint64_t seed,
                         const std::string& output, std::ostream& out, std::ostream& err) {
    try {
        const SymplecticMatrix s = detail::load_symplectic(path);
        int copies = 0;
        ColorPartition part = contract(build_graph(s, block_eps));
        if (saturate) {
            RngSpec spec;
            spec.seed = seed;
            SaturatedForm sat = randomize_saturate(s, spec, -1, block_eps);
            part = std::move(sat.partition);
            copies = sat.copies_used;
        }
        detail::emit(output, write_partition(part, copies), out);
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

// --- driver ------------------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline int run_batch(const std::string& path, std::ostream& out, std::ostream& err) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitParseError;
    }
    std::istringstream lines(text);
    std::string line;
    int job = 0;
    int first_failure = 0;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> args;
        std::istringstream fields(line);
        std::string tok;
        while (fields >> tok) args.push_back(tok);
        if (args.empty()) continue;
        ++job;
        const int code = run_cli(args, out, err);
        err << "[job " << job << "] exit=" << code << "\n";
        if (code != 0 && first_failure == 0) first_failure = code;
    }
    return first_failure;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (args.size() >= 2 && args[0] == "--batch") return run_batch(args[1], out, err);

    CLI::App app{"gucsynth: compile Gaussian operations onto a fixed multi-mode coupler"};
    app.require_subcommand(1);

    std::string matrix_path, coupler_path, target_path, sequence_path;
    std::string modes_str, scheme = "factored", format = "human", output = "-";
    std::uint64_t seed = 0;
    double tol = -1.0;
    double block_eps = Tolerances{}.block_eps;
    double squeeze_cap = 1.0;
    int n_modes = 0;
    bool saturate = false;

    auto* validate = app.add_subcommand("validate", "check a matrix file: residual, genericity, color sets");
    validate->add_option("matrix", matrix_path, "matrix JSON file")->required();
    validate->add_option("--tol", tol, "symplectic residual tolerance (default 1e-9 * 2N)");
    validate->add_option("--block-eps", block_eps, "zero-block threshold");
    validate->add_option("--format", format, "human|json")->check(CLI::IsMember({"human", "json"}));

    auto* random = app.add_subcommand("random", "write a seeded random coupler file");
    random->add_option("--modes", n_modes, "number of modes")->required();
    random->add_option("--seed", seed, "rng seed");
    random->add_option("--scheme", scheme, "factored|exponential")
        ->check(CLI::IsMember({"factored", "exponential"}));
    random->add_option("--squeeze-cap", squeeze_cap, "squeeze bound for sampled blocks");
    random->add_option("--output,-o", output, "output path or - for stdout");

    auto* synth = app.add_subcommand("synthesize", "compile a target operation into coupler uses");
    synth->add_option("coupler", coupler_path, "coupler matrix JSON")->required();
    synth->add_option("target", target_path, "target matrix JSON (l modes)")->required();
    synth->add_option("--modes", modes_str, "target modes, 1-based, comma separated")->required();
    synth->add_option("--seed", seed, "rng seed");
    synth->add_option("--tol", tol, "relative residual tolerance (default 1e-7)");
    synth->add_option("--block-eps", block_eps, "zero-block threshold");
    synth->add_option("--output,-o", output, "sequence output path or - for stdout");
    synth->add_option("--format", format, "human|json")->check(CLI::IsMember({"human", "json"}));

    auto* verify = app.add_subcommand("verify", "independently re-evaluate a sequence file");
    verify->add_option("coupler", coupler_path, "coupler matrix JSON")->required();
    verify->add_option("sequence", sequence_path, "sequence JSON")->required();
    verify->add_option("target", target_path, "optional target matrix JSON");
    verify->add_option("--tol", tol, "relative tolerance for the target comparison");
    verify->add_option("--format", format, "human|json")->check(CLI::IsMember({"human", "json"}));

    auto* colors = app.add_subcommand("colorsets", "emit the color partition of a coupler");
    colors->add_option("matrix", matrix_path, "matrix JSON file")->required();
    colors->add_option("--block-eps", block_eps, "zero-block threshold");
    colors->add_flag("--saturate", saturate, "also run randomize-and-saturate and report copies used");
    colors->add_option("--seed", seed, "rng seed for --saturate");
    colors->add_option("--output,-o", output, "output path or - for stdout");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream usage;
        const int code = app.exit(e, usage, usage);
        (code == 0 ? out : err) << usage.str();
        return code;
    }

    if (validate->parsed()) return cmd_validate(matrix_path, tol, block_eps, format, out, err);
    if (random->parsed()) return cmd_random(n_modes, seed, scheme, squeeze_cap, output, out, err);
    if (synth->parsed())
        return cmd_synthesize(coupler_path, target_path, modes_str, seed, tol, block_eps, output, format,
                              out, err);
    if (verify->parsed()) return cmd_verify(coupler_path, sequence_path, target_path, tol, format, out, err);
    if (colors->parsed()) return cmd_colorsets(matrix_path, block_eps, saturate, seed, output, out, err);
    err << "no subcommand\n";
    return kExitParseError;
}

}  // namespace guc::cli
