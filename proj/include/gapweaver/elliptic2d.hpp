#pragma once

#include <Eigen/Dense>

#include "gapweaver/cme2d.hpp"

namespace gapweaver {

/// Scalar complex field on a uniform square grid over [-X, X]^2 (boundary
/// included; dx = 2X/(n-1)). X is always an integer multiple of pi so the
/// separable potential is periodic on the box.
struct GridField2D {
    int n = 0;
    double X = 0.0, dx = 0.0;
    double epsilon = 0.0, omega = 0.0, eta = 0.0;
    int sigma = +1;
    CmeClass cls = CmeClass::General;
    Eigen::VectorXcd phi;

    double x(int i) const { return -X + i * dx; }
    int idx(int i1, int i2) const { return i1 * n + i2; }
    std::size_t cells() const { return static_cast<std::size_t>(n) * n; }
};

/// phi^(1)(x) = sqrt(eps) [A1(sqrt(eps) x) psi1(x1) phi2(x2)
///                        + A2(...) phi2(x1) psi1(x2) + A3(...) phi1(x1) phi1(x2)],
/// envelopes by bicubic interpolation, eigenfunctions by their 4pi-periodic
/// trigonometric interpolants. The box is the largest multiple of pi covered
/// by the envelope support scaled by 1/sqrt(eps); x_periods > 0 requests a
/// specific half-width in pi units and fails if the envelope cannot cover it.
GridField2D reconstruct_leading_order(const CMEField& env, const EdgeEigenfunctions& efs,
                                      double eps, int pts_per_period = 100,
                                      int x_periods = 0);

struct EllipticOptions {
    double tol = 1e-9;              // max-norm residual
    int max_iter = 30;
    std::size_t cell_budget = 24'000'000;
    std::size_t direct_cells = 270'000;  // sparse direct up to this many cells
    double prec_shift = 0.0;        // 0: automatic
    double minres_rtol_cap = 1e-4;  // loosest forcing tolerance
    int minres_max_iter = 1500;
};

/// Newton iteration on the 2nd-order discretization of
///   lap phi + omega phi - V phi - sigma |phi|^2 phi = 0
/// with zero Dirichlet boundary. Real solution classes run on the real
/// subspace and switch from a sparse direct factorization to MINRES with a
/// DST-diagonalized shifted-Poisson preconditioner past the direct budget.
NewtonReport solve_elliptic_newton(GridField2D& f, const PeriodicPotential& p,
                                   const EllipticOptions& opt = {});

double elliptic_residual_norm(const GridField2D& f, const PeriodicPotential& p);

/// Relative violation of the class symmetry relations of phi on the grid.
double grid_symmetry_error(const GridField2D& f);

struct ConvergenceStudy {
    std::vector<double> eps, err;
    std::vector<int> grid_n;
    double slope = 0.0, intercept = 0.0;
    bool complete = false;
    std::string note;
};

struct StudyOptions {
    double envelope_D = 20.0;
    double envelope_dy = 0.14;
    int pts_per_period = 100;
    double newton_tol = 1e-8;
    int homotopy_steps = 6;
    EllipticOptions elliptic{};
};

/// err(eps) = max-norm of phi - phi^(1) with phi the converged elliptic
/// solution seeded by phi^(1); the slope is the least-squares fit of
/// log err against log eps.
ConvergenceStudy convergence_study(CmeClass cls, double Omega,
                                   const std::vector<double>& eps_list,
                                   const PeriodicPotential& p,
                                   const ResonanceCoefficients& c,
                                   const EdgeEigenfunctions& efs,
                                   const StudyOptions& opt = {});

struct GpReport {
    double mass_initial = 0.0;
    double mass_final = 0.0;
    int steps = 0;
};

/// Strang split-step on the periodically padded box: spectral kinetic step,
/// exact pointwise potential+nonlinear step. Throws on 10x amplitude growth.
GpReport integrate_gp_time(GridField2D& f, const PeriodicPotential& p, double t_end,
                           double dt);

double gp_mass(const GridField2D& f);

struct TrackingOptions {
    double T0 = 1.0;       // compare over t in [0, T0/eps]
    double dt = 2e-3;      // GP step
    int pts_per_period = 24;
    double sample_interval = 0.25;
};

struct TrackingResult {
    double sup_error = 0.0;   // sup_t max-norm of E - E_ans
    double mass_drift = 0.0;
    int samples = 0;
};

/// Finite-time comparison of the Gross-Pitaevskii evolution started from the
/// leading-order ansatz against the coupled-mode prediction E_ans built from
/// the co-evolved envelopes.
TrackingResult finite_time_tracking(const CMEField& envelope0,
                                    const EdgeEigenfunctions& efs,
                                    const PeriodicPotential& p, double eps,
                                    const TrackingOptions& opt = {});

}  // namespace gapweaver
