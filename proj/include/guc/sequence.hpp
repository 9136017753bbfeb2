#pragma once

// Compiled interference sequences: coupler uses interleaved with local layers.
//
// Steps are stored in application order (steps[0] acts first). Coupler uses
// are stored by reference only -- the coupler matrix is supplied when the
// sequence is evaluated.

#include <cstdint>
#include <vector>

#include "guc/symplectic.hpp"

namespace guc {

struct Step {
    enum class Kind { coupler, local };

    Kind kind = Kind::coupler;
    LocalLayer layer;  // meaningful for Kind::local only

    static Step coupler_use() { return Step{Kind::coupler, LocalLayer{}}; }
    static Step local(LocalLayer l) { return Step{Kind::local, std::move(l)}; }
};

struct CompiledSequence {
    int n_modes = 0;
    std::vector<int> target_modes;  // 0-based; empty for saturation sequences
    std::uint64_t seed = 0;
    std::vector<Step> steps;

    int coupler_count() const {
        int c = 0;
        for (const auto& s : steps)
            if (s.kind == Step::Kind::coupler) ++c;
        return c;
    }
};

// Ordered product of all steps, multiplying from the last-applied step down.
// Empty sequences evaluate to the identity.
inline Mat evaluate(const CompiledSequence& seq, const SymplecticMatrix& coupler) {
    if (coupler.modes() != seq.n_modes)
        throw Error(Errc::dimension_mismatch, "evaluate: coupler does not match sequence mode count");
    Mat acc = Mat::Identity(2 * seq.n_modes, 2 * seq.n_modes);
    for (auto it = seq.steps.rbegin(); it != seq.steps.rend(); ++it) {
        if (it->kind == Step::Kind::coupler)
            acc = acc * coupler.mat();
        else
            acc = acc * embed_local_matrix(it->layer);
    }
    return acc;
}

}  // namespace guc
