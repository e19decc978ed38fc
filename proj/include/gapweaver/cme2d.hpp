#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <string>
#include <vector>

#include "gapweaver/radial.hpp"
#include "gapweaver/resonance.hpp"

namespace gapweaver {

/// Reversible solution classes of the coupled-mode system.
enum class CmeClass { A_m0, A_m1, Bi_m0, Bi_m1, Bii, Biii, Biv, General };

const char* class_tag(CmeClass c);
CmeClass class_from_tag(const std::string& tag);

/// Three complex envelopes on a uniform square grid over [-D, D]^2 with the
/// boundary rows included (zero Dirichlet).
struct CMEField {
    int n = 0;  // points per side, boundary included
    double D = 0.0, dy = 0.0;
    double omega = 0.0;
    int sigma = +1;
    CmeClass cls = CmeClass::General;
    ResonanceCoefficients coeffs;
    std::array<Eigen::VectorXcd, 3> a;

    double y(int i) const { return -D + i * dy; }
    int idx(int i1, int i2) const { return i1 * n + i2; }
    std::size_t cells() const { return static_cast<std::size_t>(n) * n; }
};

/// Which components and real/imaginary parts carry degrees of freedom.
struct ClassStructure {
    std::array<bool, 3> active{};
    std::array<bool, 3> use_re{}, use_im{};
    bool needs_phase_fix = false;  // any fully complex component
};
ClassStructure class_structure(CmeClass c);

/// Stationary residual F_c = (Omega - beta_c) A_c + L_c A_c - sigma C_c(A) on
/// the full grid. alpha_override (two values) replaces (alpha1, alpha2) for
/// the first two components, as used by the homotopy path.
void cme_residual(const CMEField& f, std::array<Eigen::VectorXcd, 3>& F,
                  const double* alpha_override = nullptr, int fd_order = 4);
double cme_residual_norm(const CMEField& f, const double* alpha_override = nullptr,
                         int fd_order = 4);

/// Realified Newton system on the active degrees of freedom (or on all
/// re/im planes of the active components when full_planes is set, which is
/// what the linearization diagnostics use).
struct RealifiedCmeSystem {
    std::vector<std::pair<int, int>> planes;  // (component, 0=Re / 1=Im)
    int n = 0, m = 0;                         // full and interior points per side
    Eigen::SparseMatrix<double> J;
    Eigen::VectorXd F;
};
RealifiedCmeSystem assemble_cme_system(const CMEField& f, bool full_planes,
                                       const double* alpha_override = nullptr,
                                       int fd_order = 4);

struct NewtonOptions {
    double tol = 1e-10;  // max-norm of the discrete residual
    int max_iter = 50;
    int fd_order = 4;
};

struct NewtonReport {
    int iters = 0;
    double residual = 0.0;
    std::vector<double> history;
};

/// Newton iteration with a sparse direct solve; complex classes get one
/// phase-fixing row replacing the imaginary-part equation at a reference
/// point so the gauge kernel never reaches the factorization.
NewtonReport solve_cme_newton(CMEField& f, const NewtonOptions& opt = {},
                              const double* alpha_override = nullptr);

/// Radial-profile seed for a solution class. Coupled two-component classes
/// are seeded at the isotropic mean curvature alpha-bar; one-component
/// classes are exact reductions at the true coefficients.
CMEField make_class_seed(CmeClass cls, double Omega, const ResonanceCoefficients& c,
                         double D, double dy);

/// Deform a field converged at alpha1 = alpha2 = alpha-bar into the target
/// coefficients along a linear homotopy path with Newton re-solves; failed
/// steps are bisected up to 8 times.
CMEField homotopy_continue(const CMEField& start, const ResonanceCoefficients& target,
                           int steps, const NewtonOptions& opt = {});

/// Seed + (for coupled classes) homotopy + final Newton polish.
CMEField solve_class(CmeClass cls, double Omega, const ResonanceCoefficients& c, double D,
                     double dy, const NewtonOptions& opt = {}, int homotopy_steps = 6);

/// max over the grid of sqrt(|A1|^2 + |A2|^2 + |A3|^2).
double amplitude_measure(const CMEField& f);

/// Largest boundary modulus relative to the peak (localization check).
double boundary_amplitude_ratio(const CMEField& f);

/// Relative violation of the class reversibility relations on the grid.
double reversibility_error(const CMEField& f);

/// Bicubic resample onto a new box (crop or zero-padded grow).
CMEField resample_box(const CMEField& f, double new_D, double new_dy);

struct SolutionBranch {
    std::vector<double> omega;
    std::vector<double> amplitude;
    std::vector<CMEField> fields;  // filled when keep_fields is set
};

/// Natural-parameter continuation in Omega with Newton correction at each
/// step. The branch ends when the amplitude drops below 1e-4 (edge reached)
/// or when Newton keeps failing after 6 step halvings (fold reported).
SolutionBranch continue_in_omega(const CMEField& seed, double omega_end, double step,
                                 const NewtonOptions& opt = {}, bool keep_fields = false);

struct TimeIntegrationReport {
    double power_initial = 0.0;
    double power_final = 0.0;
    int steps = 0;
};

/// Strang-split evolution of the time-dependent system: exact spectral step
/// for the anisotropic linear parts on the periodically padded box, RK4 for
/// the pointwise cubic flow. Throws on blow-up (10x amplitude growth).
TimeIntegrationReport integrate_cme_time(CMEField& f, double T_end, double dt);

/// Total power sum_j int |A_j|^2 on the periodic cell.
double cme_power(const CMEField& f);

}  // namespace gapweaver
