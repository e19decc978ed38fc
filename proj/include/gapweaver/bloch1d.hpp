#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "gapweaver/potential.hpp"

namespace gapweaver {

/// Eigenfunction parity on the real line (W even is assumed).
enum class Parity { Even, Odd };

struct SturmLiouvilleResult {
    std::vector<double> rho;                 // ascending eigenvalues
    std::vector<Parity> parity;              // meaningful for k in {0, 1/2}
    // Eigenvectors on the period grid x_j = 2*pi*j/grid_n, j = 0..grid_n-1,
    // normalized so that sum |u_j|^2 h = 1. Only filled on request.
    std::vector<Eigen::VectorXd> vectors;
};

/// Eigenvalues (and optionally eigenfunctions at the band edges) of
///   -u'' + eta W u = rho u,  u(2pi) = e^{i 2pi k} u(0)
/// discretized by second-order central differences on grid_n points.
/// Band edges k in {0, +-1/2} reduce to real tridiagonal parity sectors;
/// interior k is solved through the discriminant of the discrete transfer
/// matrix, so no complex matrix is ever formed.
SturmLiouvilleResult solve_sturm_liouville(const PeriodicPotential& p, double eta, double k,
                                           int n_eigs, int grid_n, bool want_vectors = false);

struct EdgeEigenvalues {
    std::vector<double> lambda;  // periodic edge, rho_n(0)
    std::vector<double> mu;      // antiperiodic edge, rho_n(1/2)
    bool interlacing_ok = true;
    std::string warning;         // set when the interlacing check fails
};

EdgeEigenvalues edge_eigenvalues(const PeriodicPotential& p, double eta, int n_eigs,
                                 int grid_n);

/// rho_n over a k grid. With richardson=true the values combine grid_n and
/// 2*grid_n solves, cancelling the leading O(h^2) discretization error.
std::vector<double> band_function(const PeriodicPotential& p, double eta, int band,
                                  const std::vector<double>& k_grid, int grid_n,
                                  bool richardson = true);

/// rho_n''(k0) for k0 in {0, 1/2} by one-sided differences into the band
/// interior (the band is even about the edge) with one Richardson level.
double band_curvature(const PeriodicPotential& p, double eta, int band, double k0,
                      int grid_n, double hk = 0.04);

struct EdgeEigenfunctions {
    int grid_n = 0;           // points per 2pi period
    double h = 0.0;           // spacing, 2pi/grid_n
    std::vector<double> x;    // 2*grid_n+1 samples spanning [-2pi, 2pi]
    // 4pi-normalized: sum v^2 h over one 4pi period = 1
    std::vector<Eigen::VectorXd> psi;  // periodic, psi[i] ~ psi_{i+1}
    std::vector<Eigen::VectorXd> phi;  // antiperiodic
    std::vector<Parity> psi_parity, phi_parity;

    /// Value at arbitrary x by trigonometric interpolation (4pi-periodic).
    double eval(const Eigen::VectorXd& v, double xq) const;
};

/// First `count` periodic and antiperiodic edge eigenfunctions on [-2pi,2pi],
/// 4pi-normalized, parity-verified, sign-fixed (even: v(0)>0, odd: v'(0)>0).
EdgeEigenfunctions edge_eigenfunctions(const PeriodicPotential& p, double eta, int count,
                                       int grid_n);

struct BandData {
    double eta = 0.0;
    int grid_n = 0;
    std::vector<double> k_grid;
    Eigen::MatrixXd bands;  // n_eigs x k_grid.size()
    std::vector<double> lambda, mu;
};

BandData compute_band_data(const PeriodicPotential& p, double eta, int n_eigs,
                           const std::vector<double>& k_grid, int grid_n,
                           bool richardson = true);

/// Fit of C- n^2 <= |rho_n(k)| + c <= C+ n^2 over the computed bands.
struct AsymptoticFit {
    double c, c_minus, c_plus;
};
AsymptoticFit fit_asymptotic_growth(const BandData& bd);

/// Sign changes of a sampled function on the open interval (xa, xb).
int count_sign_changes(const std::vector<double>& x, const Eigen::VectorXd& v, double xa,
                       double xb);

}  // namespace gapweaver
