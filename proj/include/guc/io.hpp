#pragma once

// JSON file formats.
//
// Matrix:    {"version":1,"n_modes":N,"ordering":"q1p1","data":[[2N floats] x 2N]}
// Sequence:  {"version":1,"n_modes":N,"target_modes":[...],"seed":s,
//             "steps":[{"type":"coupler"}|{"type":"local","blocks":[[[a,b],[c,d]] x N]}],
//             "report":{...}}  (steps in application order; report optional)
// Partition: {"color_sets":[[...]],"permutation":[...],"copies_used":k}
//
// Mode and color indices in files are 1-based; in-memory indices are 0-based.
// Floats are emitted as shortest round-trip decimals, so writing, parsing and
// re-writing a file reproduces it byte for byte.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "guc/colorsets.hpp"
#include "guc/sequence.hpp"
#include "guc/symplectic.hpp"
#include "guc/synth.hpp"

namespace guc {

inline constexpr const char* kQuadratureOrdering = "q1p1";
inline constexpr int kFormatVersion = 1;

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace detail {

inline json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::parse_error, e.what());
    }
}

inline ordered_json matrix_to_rows(const Mat& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Mat rows_to_matrix(const json& rows, const std::string& what) {
    if (!rows.is_array() || rows.empty())
        throw Error(Errc::parse_error, what + ": expected a non-empty array of rows");
    const size_t nr = rows.size();
    const size_t nc = rows[0].is_array() ? rows[0].size() : 0;
    if (nc == 0) throw Error(Errc::parse_error, what + ": rows must be non-empty arrays");
    Mat m(nr, nc);
    for (size_t i = 0; i < nr; ++i) {
        if (!rows[i].is_array() || rows[i].size() != nc)
            throw Error(Errc::parse_error, what + ": ragged row " + std::to_string(i));
        for (size_t j = 0; j < nc; ++j) {
            if (!rows[i][j].is_number())
                throw Error(Errc::parse_error, what + ": non-numeric entry at row " + std::to_string(i));
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
        }
    }
    if (!m.allFinite()) throw Error(Errc::parse_error, what + ": entries must be finite");
    return m;
}

inline void require_version(const json& j) {
    if (!j.is_object()) throw Error(Errc::parse_error, "expected a JSON object at top level");
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kFormatVersion)
        throw Error(Errc::parse_error, "missing or unsupported format version");
}

}  // namespace detail

// --- matrix files ------------------------------------------------------------

struct MatrixFile {
    Mat data;
    int n_modes = 0;
};

inline std::string write_matrix(const Mat& m, int n_modes) {
    ordered_json j;
    j["version"] = kFormatVersion;
    j["n_modes"] = n_modes;
    j["ordering"] = kQuadratureOrdering;
    j["data"] = detail::matrix_to_rows(m);
    return j.dump() + "\n";
}

inline std::string write_matrix(const SymplecticMatrix& s) { return write_matrix(s.mat(), s.modes()); }

inline MatrixFile read_matrix(const std::string& text) {
    const json j = detail::parse_json(text);
    detail::require_version(j);
    if (!j.contains("n_modes") || !j["n_modes"].is_number_integer())
        throw Error(Errc::parse_error, "missing n_modes");
    const int n = j["n_modes"].get<int>();
    if (n < 1) throw Error(Errc::parse_error, "n_modes must be >= 1");
    if (!j.contains("ordering") || j["ordering"] != kQuadratureOrdering)
        throw Error(Errc::parse_error, std::string("ordering must be \"") + kQuadratureOrdering + "\"");
    if (!j.contains("data")) throw Error(Errc::parse_error, "missing data");
    Mat m = detail::rows_to_matrix(j["data"], "data");
    if (m.rows() != 2 * n || m.cols() != 2 * n)
        throw Error(Errc::parse_error, "data must be a 2N x 2N matrix");
    return MatrixFile{std::move(m), n};
}

// --- sequence files ----------------------------------------------------------

struct EmbeddedReport {
    double scale = 1.0;
    double achieved_residual = 0.0;
    double target_block_residual = 0.0;
    double cross_block_residual = 0.0;
    double decouple_cross_residual = 0.0;
    double recovery_residual = 0.0;
    Mat achieved;
    Mat remainder;
};

struct SequenceFile {
    CompiledSequence sequence;
    std::optional<EmbeddedReport> report;
};

inline std::string write_sequence(const CompiledSequence& seq, const SynthesisReport* report = nullptr) {
    ordered_json j;
    j["version"] = kFormatVersion;
    j["n_modes"] = seq.n_modes;
    ordered_json tm = ordered_json::array();
    for (int m : seq.target_modes) tm.push_back(m + 1);
    j["target_modes"] = std::move(tm);
    j["seed"] = seq.seed;
    ordered_json steps = ordered_json::array();
    for (const auto& step : seq.steps) {
        ordered_json s;
        if (step.kind == Step::Kind::coupler) {
            s["type"] = "coupler";
        } else {
            s["type"] = "local";
            ordered_json blocks = ordered_json::array();
            for (const auto& b : step.layer.blocks) {
                ordered_json blk = ordered_json::array();
                blk.push_back(ordered_json::array({b.m(0, 0), b.m(0, 1)}));
                blk.push_back(ordered_json::array({b.m(1, 0), b.m(1, 1)}));
                blocks.push_back(std::move(blk));
            }
            s["blocks"] = std::move(blocks);
        }
        steps.push_back(std::move(s));
    }
    j["steps"] = std::move(steps);
    if (report) {
        ordered_json r;
        r["coupler_count"] = seq.coupler_count();
        r["scale"] = report->scale;
        r["achieved_residual"] = report->achieved_residual;
        r["target_block_residual"] = report->target_block_residual;
        r["cross_block_residual"] = report->cross_block_residual;
        r["decouple_cross_residual"] = report->decouple_cross_residual;
        r["recovery_residual"] = report->recovery_residual;
        r["achieved"] = detail::matrix_to_rows(report->achieved);
        r["remainder"] = detail::matrix_to_rows(report->remainder.mat());
        j["report"] = std::move(r);
    }
    return j.dump() + "\n";
}

inline SequenceFile read_sequence(const std::string& text) {
    const json j = detail::parse_json(text);
    detail::require_version(j);
    if (!j.contains("n_modes") || !j["n_modes"].is_number_integer())
        throw Error(Errc::parse_error, "missing n_modes");
    SequenceFile out{CompiledSequence{}, std::nullopt};
    out.sequence.n_modes = j["n_modes"].get<int>();
    if (out.sequence.n_modes < 1) throw Error(Errc::parse_error, "n_modes must be >= 1");
    if (j.contains("target_modes")) {
        for (const auto& m : j["target_modes"]) {
            if (!m.is_number_integer()) throw Error(Errc::parse_error, "target_modes must be integers");
            const int v = m.get<int>() - 1;
            if (v < 0 || v >= out.sequence.n_modes)
                throw Error(Errc::parse_error, "target mode out of range");
            out.sequence.target_modes.push_back(v);
        }
    }
    if (j.contains("seed")) out.sequence.seed = j["seed"].get<std::uint64_t>();
    if (!j.contains("steps") || !j["steps"].is_array())
        throw Error(Errc::parse_error, "missing steps array");
    for (const auto& s : j["steps"]) {
        if (!s.is_object() || !s.contains("type")) throw Error(Errc::parse_error, "step without type");
        const std::string type = s["type"].get<std::string>();
        if (type == "coupler") {
            out.sequence.steps.push_back(Step::coupler_use());
        } else if (type == "local") {
            if (!s.contains("blocks") || !s["blocks"].is_array() ||
                s["blocks"].size() != static_cast<size_t>(out.sequence.n_modes))
                throw Error(Errc::parse_error, "local step needs one 2x2 block per mode");
            LocalLayer layer;
            for (const auto& blk : s["blocks"]) {
                Mat b = detail::rows_to_matrix(blk, "local block");
                if (b.rows() != 2 || b.cols() != 2) throw Error(Errc::parse_error, "local block must be 2x2");
                try {
                    layer.blocks.push_back(LocalBlock(b, 1e-6));
                } catch (const Error&) {
                    throw Error(Errc::parse_error, "local block is not symplectic (det != 1)");
                }
            }
            out.sequence.steps.push_back(Step::local(std::move(layer)));
        } else {
            throw Error(Errc::parse_error, "unknown step type: " + type);
        }
    }
    if (j.contains("report")) {
        const auto& r = j["report"];
        EmbeddedReport rep;
        if (r.contains("scale")) rep.scale = r["scale"].get<double>();
        if (r.contains("achieved_residual")) rep.achieved_residual = r["achieved_residual"].get<double>();
        if (r.contains("target_block_residual"))
            rep.target_block_residual = r["target_block_residual"].get<double>();
        if (r.contains("cross_block_residual"))
            rep.cross_block_residual = r["cross_block_residual"].get<double>();
        if (r.contains("decouple_cross_residual"))
            rep.decouple_cross_residual = r["decouple_cross_residual"].get<double>();
        if (r.contains("recovery_residual")) rep.recovery_residual = r["recovery_residual"].get<double>();
        if (r.contains("achieved")) rep.achieved = detail::rows_to_matrix(r["achieved"], "report.achieved");
        if (r.contains("remainder")) rep.remainder = detail::rows_to_matrix(r["remainder"], "report.remainder");
        out.report = std::move(rep);
    }
    return out;
}

// --- partition files ---------------------------------------------------------

inline std::string write_partition(const ColorPartition& part, int copies_used) {
    ordered_json j;
    ordered_json sets = ordered_json::array();
    for (const auto& set : part.sets) {
        ordered_json s = ordered_json::array();
        for (int m : set) s.push_back(m + 1);
        sets.push_back(std::move(s));
    }
    j["color_sets"] = std::move(sets);
    ordered_json perm = ordered_json::array();
    for (int c : part.induced) perm.push_back(c + 1);
    j["permutation"] = std::move(perm);
    j["copies_used"] = copies_used;
    return j.dump() + "\n";
}

// --- filesystem helpers ------------------------------------------------------

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    out << content;
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

}  // namespace guc
