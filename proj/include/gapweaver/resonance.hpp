#pragma once

#include <cstdint>
#include <vector>

#include "gapweaver/bloch1d.hpp"
#include "gapweaver/potential.hpp"

namespace gapweaver {

/// All constants of the coupled-mode system for one potential at eta0.
struct ResonanceCoefficients {
    double eta0 = 0.0;
    double omega0 = 0.0;
    double beta1 = 0.0, beta2 = 0.0;
    double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0, gamma4 = 0.0;
    double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
    // provenance
    int grid_n = 0;
    double root_tol = 0.0;
    std::uint64_t potential_hash = 0;
};

/// lambda_1 + mu_2 - 2 mu_1 at the given coupling; the gap opens at its root.
double resonance_residual(const PeriodicPotential& p, double eta, int grid_n);

struct BifurcationResult {
    double eta0, omega0;
    double lambda1, mu1, mu2;
    double residual;  // |g(eta0)|
    int evals;
};

/// Bracketed root of g(eta) = lambda1 + mu2 - 2 mu1: bisection to width 1e-6,
/// then secant polish to |g| <= 1e-10.
BifurcationResult find_bifurcation_eta(const PeriodicPotential& p, double eta_lo,
                                       double eta_hi, int grid_n);

/// The eleven constants: betas and gammas from eigenfunction quadrature,
/// alphas from band curvatures. Periodic trapezoid rule on the eigenfunction
/// grid; refuses if normalization has drifted beyond 1e-6.
ResonanceCoefficients compute_coefficients(const PeriodicPotential& p, double eta0,
                                           int grid_n);

/// d rho_n(k0) / d eta = <u, W u> with the edge eigenfunction (k0 in {0,1/2}).
double linear_band_shift(const PeriodicPotential& p, double eta, int band, double k0,
                         int grid_n);

struct GapInterval {
    bool open = false;
    double lo = 0.0, hi = 0.0;                  // in Omega
    double omega_lo = 0.0, omega_hi = 0.0;      // in omega = omega0 + eps*Omega
};

/// Band-gap interval for the given eps = eta - eta0, from the curvature and
/// band-shift sign conditions. Empty when the signs do not open a gap.
GapInterval gap_interval(const ResonanceCoefficients& c, double eps);

enum class AlgebraicReduction {
    AOnly,   // A1 = A2 = 0
    BOnly,   // A3 = 0, A1 = A2 real
    Single,  // A2 = A3 = 0
};

/// Closed-form |A|^2 of the invariant reductions of the truncated algebraic
/// coupled-mode system. Returns the admissible non-negative amplitudes
/// (possibly none).
std::vector<double> solve_algebraic_cme(const ResonanceCoefficients& c, double Omega,
                                        int sigma, AlgebraicReduction red);

struct NonresonanceReport {
    double min_value = 0.0;
    int n1 = 0, n2 = 0, j1 = 0, j2 = 0, j3 = 0;  // attaining tuple
    double k1 = 0.0, k2 = 0.0;                   // reduced quasi-momenta
    int excluded = 0;                            // direct resonances skipped
    bool certified = false;                      // tail argument closed
    int tail_n = 0;                              // index where the tail closes
    double c_minus = 0.0, c_shift = 0.0;         // fitted growth constants
};

/// Brute-force infimum of |rho_{n1}(k1) + rho_{n2}(k2) - M omega0| over the
/// finite index set of the non-resonance condition, with an analytic tail
/// certificate from the fitted n^2 growth of the bands.
NonresonanceReport check_nonresonance(const PeriodicPotential& p, double eta0,
                                      double omega0, int n_max, int grid_n);

/// Largest pairwise 4pi x 4pi inner product among the three resonant modes.
double resonant_triple_orthogonality(const EdgeEigenfunctions& efs);

}  // namespace gapweaver
