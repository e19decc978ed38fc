#pragma once

#include <array>
#include <complex>

namespace gapweaver {

using cdouble = std::complex<double>;

// Hot data-parallel loops. Each kernel has an OpenMP version (default) and a
// serial reference implementation used by the tests and the benchmark. All
// grids are n x n row-major; Dirichlet operators treat points outside the
// grid as zero.

/// out = (a1 d^2/dy1^2 + a2 d^2/dy2^2) in, central differences of the given
/// order (2 or 4); boundary rows/cols of out are set to zero.
void stencil_apply(cdouble* out, const cdouble* in, int n, double a1, double a2, double h,
                   int order);
void stencil_apply_serial(cdouble* out, const cdouble* in, int n, double a1, double a2,
                          double h, int order);
void stencil_apply_real(double* out, const double* in, int n, double a1, double a2,
                        double h, int order);
void stencil_apply_real_serial(double* out, const double* in, int n, double a1, double a2,
                               double h, int order);

struct CmeCubicCoeffs {
    double g1, g2, g3, g4;
    int sigma;
};

/// The cubic coupling of the three-component coupled-mode system:
///   out1 = sigma [ g1|A1|^2 A1 + g2(2|A2|^2 A1 + A2^2 conj A1)
///                 + g3(2|A3|^2 A1 + A3^2 conj A1) ]   (and 1 <-> 2)
///   out3 = sigma [ g4|A3|^2 A3 + 2 g3(|A1|^2+|A2|^2) A3
///                 + g3(A1^2+A2^2) conj A3 ]
void cme_cubic(std::array<cdouble*, 3> out, std::array<const cdouble*, 3> in, int count,
               const CmeCubicCoeffs& c);
void cme_cubic_serial(std::array<cdouble*, 3> out, std::array<const cdouble*, 3> in,
                      int count, const CmeCubicCoeffs& c);

/// One RK4 step of the pointwise flow i dA/dT = sigma C(A) at every point.
void cme_cubic_rk4_step(std::array<cdouble*, 3> a, int count, const CmeCubicCoeffs& c,
                        double dt);
void cme_cubic_rk4_step_serial(std::array<cdouble*, 3> a, int count,
                               const CmeCubicCoeffs& c, double dt);

/// E_j *= exp(-i (V_j + sigma |E_j|^2) dt): the exact potential + nonlinear
/// substep of the Gross-Pitaevskii splitting.
void gp_phase_step(cdouble* e, const double* V, int count, int sigma, double dt);
void gp_phase_step_serial(cdouble* e, const double* V, int count, int sigma, double dt);

/// out = lap(phi) + (omega - V) phi - sigma |phi|^2 phi (2nd-order stencil),
/// the stationary elliptic residual; boundary entries are zeroed.
void elliptic_residual_kernel(cdouble* out, const cdouble* phi, const double* V, int n,
                              double omega, int sigma, double h);
void elliptic_residual_kernel_serial(cdouble* out, const cdouble* phi, const double* V,
                                     int n, double omega, int sigma, double h);

/// out = lap(v) + m v with a precomputed multiplier field m (real Jacobian
/// apply for the matrix-free elliptic Newton step).
void elliptic_jacobian_apply(double* out, const double* v, const double* mfield, int n,
                             double h);
void elliptic_jacobian_apply_serial(double* out, const double* v, const double* mfield,
                                    int n, double h);

double max_abs(const cdouble* v, int count);
double max_abs_serial(const cdouble* v, int count);
double dot(const double* a, const double* b, int count);
double dot_serial(const double* a, const double* b, int count);

}  // namespace gapweaver
