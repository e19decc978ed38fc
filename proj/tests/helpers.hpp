#pragma once

#include "gapweaver/resonance.hpp"

// Shared, lazily computed fixtures for the W = 1 - cos x example potential.
namespace testutil {

inline const gapweaver::PeriodicPotential& cosine_potential() {
    static auto p = gapweaver::PeriodicPotential::one_minus_cos();
    return p;
}

inline const gapweaver::ResonanceCoefficients& example_coeffs() {
    static auto c = gapweaver::compute_coefficients(cosine_potential(), 0.174475, 512);
    return c;
}

inline const gapweaver::EdgeEigenfunctions& example_efs() {
    static auto e = gapweaver::edge_eigenfunctions(cosine_potential(), 0.174475, 2, 512);
    return e;
}

}  // namespace testutil
