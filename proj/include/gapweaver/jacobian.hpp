#pragma once

#include <Eigen/Sparse>

#include "gapweaver/cme2d.hpp"

namespace gapweaver {

/// Realified linearization of the coupled-mode system about a field: both
/// re/im planes of every active component, symmetric by construction.
struct LinearizedOperator {
    Eigen::SparseMatrix<double> J;
    std::vector<std::pair<int, int>> planes;  // (component, 0=Re / 1=Im)
    int n = 0, m = 0;                         // grid points (full / interior)
    double dy = 0.0;
    double symmetry_defect = 0.0;
    std::string block_tag = "full";           // "full" or "J+/J-"
};

/// Assemble D_A F(A) about a (converged) field with 4th-order differences and
/// zero Dirichlet boundary, and verify its symmetry to 1e-12.
LinearizedOperator assemble_jacobian(const CMEField& f,
                                     const double* alpha_override = nullptr);

/// Realified discrete kernel candidates about the field: d/dy1 A, d/dy2 A and
/// iA on the operator's degrees of freedom.
Eigen::MatrixXd kernel_candidates(const CMEField& f, const LinearizedOperator& op);

/// Split into the two decoupled blocks available for the real classes:
/// B-ii: (Re1,Re2) + (Im1,Im2); B-iii: (Re1,Im2) + (Im1,Re2).
/// B-iv has to be treated in full and throws.
struct JacobianBlocks {
    Eigen::SparseMatrix<double> plus, minus;
    std::vector<int> plus_planes, minus_planes;  // plane indices of op.planes
};
JacobianBlocks block_diagonalize(const LinearizedOperator& op, CmeClass cls);

struct EigResult {
    double value = 0.0;
    Eigen::VectorXd vector;
    double residual = 0.0;  // ||J v - value v||_2
};

/// count eigenvalues of smallest modulus about the shift: shift-invert Lanczos
/// on a sparse LU factorization; a factorization hitting an exact eigenvalue
/// retries with a perturbed shift.
std::vector<EigResult> smallest_eigs(const Eigen::SparseMatrix<double>& J, int count,
                                     double shift = 0.0);

/// Dense reference path for small operators (the test oracle).
std::vector<double> smallest_eigs_dense(const Eigen::SparseMatrix<double>& J, int count);

struct KernelReportRow {
    double D = 0.0;
    std::array<double, 4> eigs{};  // four smallest |lambda|
    double subspace_angle = 0.0;   // largest principal angle, radians
};

struct KernelReport {
    std::vector<KernelReportRow> rows;
    bool verdict = false;
    bool computed = true;  // false when the kernel is known analytically
    std::string note;
};

/// Re-solve the field on each box half-width D, extract the four smallest
/// Jacobian eigenvalues and the angle between the near-kernel eigenvectors
/// and span{d_y1 A, d_y2 A, iA}. Verdict: three eigenvalues shrink towards
/// zero with the fourth bounded away and the angle small at the largest D.
KernelReport kernel_report(const CMEField& base, const std::vector<double>& D_list,
                           const NewtonOptions& opt = {});

}  // namespace gapweaver
