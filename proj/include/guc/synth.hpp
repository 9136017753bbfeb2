#pragma once

// Compiling a target operation on selected modes into coupler uses.
//
// The first coupler use is fictitiously split into S = S' * (target + I), the
// multi-mode decoupling protocol is run on [S', S, ..., S] (4^l entries), and
// a final recovery layer cancels the stray single-mode blocks, leaving
// target + remainder. The emitted sequence contains only physical steps: the
// fictitious factor never appears, and exactly 4^l coupler uses remain.

#include <string>
#include <vector>

#include "guc/colorsets.hpp"
#include "guc/decouple.hpp"
#include "guc/rng.hpp"
#include "guc/sequence.hpp"
#include "guc/symplectic.hpp"

namespace guc {

struct SynthesisRequest {
    SymplecticMatrix coupler;
    SymplecticMatrix target;        // l-mode operation
    std::vector<int> target_modes;  // 0-based, distinct, l < N
    Tolerances tol{};
};

struct SynthesisReport {
    Mat achieved;             // evaluated product of the emitted sequence
    double scale = 1.0;       // max(1, max-abs of achieved)
    double achieved_residual = 0.0;       // symplectic residual of achieved
    double target_block_residual = 0.0;   // absolute, on the target block
    double cross_block_residual = 0.0;    // absolute, target modes vs rest
    double decouple_cross_residual = 0.0; // decoupling stage contribution
    double recovery_residual = 0.0;       // recovery cancellation contribution
    SymplecticMatrix remainder;           // complement modes, ascending order
};

struct SynthesisResult {
    CompiledSequence sequence;
    SynthesisReport report;
};

// S' with S' * (target + I) = S; always exists since symplectic matrices are
// invertible in closed form.
inline SymplecticMatrix fictitious_decompose(const SymplecticMatrix& s, const SymplecticMatrix& target,
                                             const std::vector<int>& target_modes) {
    return compose(s, symplectic_inverse(embed_target(target, target_modes, s.modes())));
}

// Inverse blocks at the target modes, identity everywhere else.
inline LocalLayer recovery_layer(const std::vector<LocalBlock>& blocks, const std::vector<int>& target_modes,
                                 int n_modes) {
    if (blocks.size() != target_modes.size())
        throw Error(Errc::dimension_mismatch, "recovery_layer: one block per target mode required");
    LocalLayer layer = identity_layer(n_modes);
    for (size_t i = 0; i < blocks.size(); ++i) {
        check_mode_index(target_modes[i], n_modes);
        layer.blocks[static_cast<size_t>(target_modes[i])] = inverse_block(blocks[i]);
    }
    return layer;
}

namespace detail {

inline std::string describe_sets(const ColorPartition& part, const std::vector<int>& target_modes) {
    std::string msg = "target modes span separate color sets:";
    std::vector<bool> named(part.sets.size(), false);
    for (int m : target_modes) {
        const int c = part.color_of(m);
        if (named[static_cast<size_t>(c)]) continue;
        named[static_cast<size_t>(c)] = true;
        msg += " {";
        for (size_t i = 0; i < part.sets[static_cast<size_t>(c)].size(); ++i)
            msg += (i ? "," : "") + std::to_string(part.sets[static_cast<size_t>(c)][i] + 1);
        msg += "}";
    }
    return msg;
}

}  // namespace detail

// Core path. `pre`/`post` wrap every coupler use after the first, so that a
// coupler needing randomisation still yields a sequence of raw coupler uses:
// the effective coupler is post * S * pre and the wrapping layers are folded
// into the neighbouring local slots.
inline SynthesisResult synthesize_wrapped(const SymplecticMatrix& coupler, const LocalLayer& pre,
                                          const LocalLayer& post, const SymplecticMatrix& target,
                                          const std::vector<int>& target_modes, const Tolerances& tol,
                                          const RngSpec& rng_spec) {
    const int n = coupler.modes();
    const int ell = static_cast<int>(target_modes.size());
    if (ell < 1) throw Error(Errc::invalid_argument, "synthesize: no target modes given");
    if (ell >= n)
        throw Error(Errc::invalid_argument, "synthesize: target must leave at least one mode untouched");
    if (target.modes() != ell)
        throw Error(Errc::dimension_mismatch, "synthesize: target size does not match target mode list");

    const SymplecticMatrix eff =
        compose(embed_local(post), compose(coupler, embed_local(pre)));

    const ColorPartition part = contract(build_graph(eff, tol.block_eps));
    if (!feasibility(part, target_modes))
        throw Error(Errc::target_crosses_color_sets, detail::describe_sets(part, target_modes));
    if (!genericity_check(eff, tol.block_eps).is_generic)
        throw Error(Errc::non_generic_coupler, "coupler fails the genericity scan");

    size_t uses = 1;
    for (int i = 0; i < ell; ++i) uses *= 4;

    // The fictitious split applies to the raw coupler: the first physical step
    // stays S with no leading local layer.
    std::vector<SymplecticMatrix> s_list;
    s_list.reserve(uses);
    s_list.push_back(fictitious_decompose(coupler, target, target_modes));
    for (size_t i = 1; i < uses; ++i) s_list.push_back(eff);

    DecoupleOptions opt;
    opt.tol = tol;
    SeededRng rng(rng_spec.seed);
    MultiDecoupled md = decouple_many(s_list, target_modes, opt, &rng);

    const LocalLayer recovery = recovery_layer(md.per_mode_blocks, target_modes, n);

    CompiledSequence seq;
    seq.n_modes = n;
    seq.target_modes = target_modes;
    seq.seed = rng_spec.seed;
    seq.steps.reserve(2 * uses);
    seq.steps.push_back(Step::coupler_use());
    for (size_t j = 1; j < uses; ++j) {
        LocalLayer slot = compose_layers(pre, md.layers[j - 1]);
        if (j >= 2) slot = compose_layers(slot, post);
        seq.steps.push_back(Step::local(std::move(slot)));
        seq.steps.push_back(Step::coupler_use());
    }
    seq.steps.push_back(Step::local(compose_layers(recovery, post)));

    Mat achieved = evaluate(seq, coupler);
    SynthesisReport report{Mat(), 1.0, 0.0, 0.0, 0.0, md.cross_residual, 0.0, md.remainder};
    report.scale = std::max(1.0, max_abs(achieved));
    report.achieved_residual = symplectic_residual(achieved);
    report.target_block_residual = max_abs(extract_modes(achieved, target_modes) - target.mat());
    report.cross_block_residual = cross_block_residual(achieved, target_modes);
    for (size_t i = 0; i < md.per_mode_blocks.size(); ++i) {
        const Block2 cancel =
            recovery.blocks[static_cast<size_t>(target_modes[i])].m * md.per_mode_blocks[i].m;
        report.recovery_residual =
            std::max(report.recovery_residual, (cancel - Block2::Identity()).cwiseAbs().maxCoeff());
    }
    const std::vector<int> rest = complement_modes(n, target_modes);
    const double rem_tol = std::max(Tolerances{}.symp_tol(static_cast<int>(rest.size())),
                                    report.achieved_residual +
                                        8.0 * report.cross_block_residual * report.scale);
    report.remainder = SymplecticMatrix(extract_modes(achieved, rest), rem_tol);
    report.achieved = std::move(achieved);
    return SynthesisResult{std::move(seq), std::move(report)};
}

inline SynthesisResult synthesize(const SynthesisRequest& req, const RngSpec& rng_spec = {}) {
    const LocalLayer id = identity_layer(req.coupler.modes());
    return synthesize_wrapped(req.coupler, id, id, req.target, req.target_modes, req.tol, rng_spec);
}

}  // namespace guc
