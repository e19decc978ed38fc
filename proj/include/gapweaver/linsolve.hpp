#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>

#include "gapweaver/fftplan.hpp"

namespace gapweaver {

/// Exact inverse of (-lap_h + c) with zero Dirichlet boundary on an L x L
/// interior grid (2nd-order stencil), diagonalized by DST-I. SPD for c > 0;
/// used as the MINRES preconditioner of the large elliptic Newton systems.
class DirichletShiftedPoisson {
  public:
    DirichletShiftedPoisson(int L, double h, double c);
    void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z);
    double shift() const { return c_; }

  private:
    int L_;
    double c_;
    std::vector<double> lam_;  // 1D Dirichlet Laplacian eigenvalues
    Dst2 dst_;
};

struct MinresOptions {
    int max_iter = 1200;
    double rtol = 1e-9;
};

struct MinresResult {
    int iters = 0;
    double relres = 0.0;  // preconditioned residual estimate / initial
    bool converged = false;
};

/// Preconditioned MINRES for symmetric (possibly indefinite) A with an SPD
/// preconditioner M^{-1}. apply_M may be empty for the unpreconditioned run.
MinresResult minres(const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply_A,
                    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply_M,
                    const Eigen::VectorXd& b, Eigen::VectorXd& x, const MinresOptions& opt);

}  // namespace gapweaver
