#pragma once

#include <vector>

#include "gapweaver/resonance.hpp"

namespace gapweaver {

enum class RadialClass { A, Bi };

/// Ground-state (separatrix) profile of
///   R'' + R'/r - m^2 R / r^2 - kappa2 R + g R^3 = 0,
/// R ~ r^m near zero and R -> 0 at infinity, in the scaled radial variable of
/// its solution class.
struct RadialProfile {
    RadialClass cls = RadialClass::A;
    int m = 0;
    double Omega = 0.0;
    int sigma = +1;
    double kappa2 = 0.0;  // linear decay constant squared (scaled variable)
    double g = 0.0;       // cubic coefficient
    double dr = 0.0, r_max = 0.0;
    std::vector<double> r, R;
    double amplitude0 = 0.0;   // R(0) for m=0, shooting amplitude Q(0) otherwise
    double alpha_eff = 0.0;    // |alpha3| (class A), sqrt(alpha1 alpha2) (class B-i)
    double decay_rate = 0.0;   // sqrt(kappa2 / alpha_eff): decay in y units

    /// Cubic interpolation inside the grid, analytic e^{-kappa r}/sqrt(r)
    /// tail beyond it.
    double eval(double rq) const;
};

/// Shooting solve of the profile equation: bisection on the amplitude until
/// the solution decays without a sign change past the core. m >= 1 shoots on
/// the desingularized Q = r^-m R equation.
RadialProfile shoot_profile(double kappa2, double g, int m, double r_max, double dr);

/// Class-aware front end: checks admissibility (sign of sigma, side of the
/// edge), picks kappa2 and g from the coefficients, verifies the tail decay.
/// r_max <= 0 or dr <= 0 select defaults scaled by the decay constant.
RadialProfile solve_radial_profile(RadialClass cls, int m, double Omega, int sigma,
                                   const ResonanceCoefficients& c, double r_max = 0.0,
                                   double dr = 0.0);

}  // namespace gapweaver
