#include "gapweaver/linsolve.hpp"

#include <cmath>

#include "gapweaver/errors.hpp"

namespace gapweaver {

DirichletShiftedPoisson::DirichletShiftedPoisson(int L, double h, double c)
    : L_(L), c_(c), lam_(L), dst_(L) {
    if (c <= 0.0) throw Error("preconditioner shift must be positive");
    for (int j = 0; j < L; ++j) {
        double s = std::sin(0.5 * M_PI * (j + 1) / (L + 1));
        lam_[j] = 4.0 * s * s / (h * h);  // (2 - 2cos(pi (j+1)/(L+1))) / h^2
    }
}

void DirichletShiftedPoisson::apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) {
    double* buf = dst_.data();
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(L_) * L_;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) buf[i] = r[i];
    dst_.execute();
    const double norm = 1.0 / (4.0 * (L_ + 1.0) * (L_ + 1.0));
#pragma omp parallel for schedule(static)
    for (int i1 = 0; i1 < L_; ++i1) {
        double* row = buf + static_cast<std::ptrdiff_t>(i1) * L_;
        for (int i2 = 0; i2 < L_; ++i2) row[i2] *= norm / (lam_[i1] + lam_[i2] + c_);
    }
    dst_.execute();
    z.resize(count);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) z[i] = buf[i];
}

MinresResult minres(const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply_A,
                    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply_M,
                    const Eigen::VectorXd& b, Eigen::VectorXd& x, const MinresOptions& opt) {
    // Paige-Saunders MINRES with an SPD preconditioner; residuals are
    // monitored in the M^{-1} inner product.
    const auto n = b.size();
    if (x.size() != n) x = Eigen::VectorXd::Zero(n);

    Eigen::VectorXd r1 = b, y(n), v(n), tmp(n);
    if (x.squaredNorm() > 0) {
        apply_A(x, tmp);
        r1 = b - tmp;
    }
    if (apply_M)
        apply_M(r1, y);
    else
        y = r1;
    double beta1 = r1.dot(y);
    MinresResult res;
    if (beta1 < 0) throw Error("minres: preconditioner is not positive definite");
    if (beta1 == 0.0) {
        res.converged = true;
        return res;
    }
    beta1 = std::sqrt(beta1);

    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0, oldeps = 0.0;
    Eigen::VectorXd r2 = r1, w = Eigen::VectorXd::Zero(n), w2 = Eigen::VectorXd::Zero(n),
                    w1(n);

    for (int it = 1; it <= opt.max_iter; ++it) {
        const double s = 1.0 / beta;
        v = s * y;
        apply_A(v, y);
        if (it >= 2) y -= (beta / oldb) * r1;
        const double alfa = v.dot(y);
        y -= (alfa / beta) * r2;
        r1 = r2;
        r2 = y;
        if (apply_M)
            apply_M(r2, y);
        else
            y = r2;
        oldb = beta;
        double beta2 = r2.dot(y);
        if (beta2 < 0) throw Error("minres: preconditioner lost positive definiteness");
        beta = std::sqrt(beta2);

        oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        double gamma = std::sqrt(gbar * gbar + beta * beta);
        gamma = std::max(gamma, 1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        w1 = w2;
        w2 = w;
        w = (v - oldeps * w1 - delta * w2) / gamma;
        x += phi * w;

        res.iters = it;
        res.relres = phibar / beta1;
        if (res.relres <= opt.rtol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace gapweaver
