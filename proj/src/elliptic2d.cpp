#include "gapweaver/elliptic2d.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "gapweaver/errors.hpp"
#include "gapweaver/fftplan.hpp"
#include "gapweaver/kernels.hpp"
#include "gapweaver/linsolve.hpp"

namespace gapweaver {

namespace {

using cd = std::complex<double>;
constexpr double kPi = 3.1415926535897932384626433832795;

bool real_class(CmeClass cls) {
    return cls == CmeClass::A_m0 || cls == CmeClass::Bi_m0 || cls == CmeClass::Bii;
}

// psi1, phi1, phi2 evaluated on an arbitrary x grid through the 4pi-periodic
// trig interpolants
struct ModeRows {
    Eigen::VectorXd psi1, phi1, phi2;
};

ModeRows eval_modes(const EdgeEigenfunctions& efs, const std::vector<double>& xs) {
    ModeRows m;
    const int count = static_cast<int>(xs.size());
    m.psi1.resize(count);
    m.phi1.resize(count);
    m.phi2.resize(count);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
        m.psi1[i] = efs.eval(efs.psi[0], xs[i]);
        m.phi1[i] = efs.eval(efs.phi[0], xs[i]);
        m.phi2[i] = efs.eval(efs.phi[1], xs[i]);
    }
    return m;
}

cd envelope_at(const CMEField& env, int comp, double y1, double y2);

// shared bicubic lookup into the envelope grid
cd envelope_at(const CMEField& env, int comp, double y1, double y2) {
    auto value = [&](int i1, int i2) -> cd {
        if (i1 < 0 || i2 < 0 || i1 >= env.n || i2 >= env.n) return cd(0.0);
        return env.a[comp][i1 * env.n + i2];
    };
    auto cubic = [](cd p0, cd p1, cd p2, cd p3, double t) {
        cd a1 = 0.5 * (p2 - p0);
        cd a2 = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        cd a3 = 0.5 * (p3 - p0) + 1.5 * (p1 - p2);
        return p1 + t * (a1 + t * (a2 + t * a3));
    };
    const double s1 = (y1 + env.D) / env.dy, s2 = (y2 + env.D) / env.dy;
    const int i1 = static_cast<int>(std::floor(s1)), i2 = static_cast<int>(std::floor(s2));
    const double t1 = s1 - i1, t2 = s2 - i2;
    cd rows[4];
    for (int r = 0; r < 4; ++r)
        rows[r] = cubic(value(i1 - 1 + r, i2 - 1), value(i1 - 1 + r, i2),
                        value(i1 - 1 + r, i2 + 1), value(i1 - 1 + r, i2 + 2), t2);
    return cubic(rows[0], rows[1], rows[2], rows[3], t1);
}

void fill_leading_order(Eigen::VectorXcd& out, const CMEField& env, const ModeRows& modes,
                        const std::vector<double>& xs, double eps) {
    const int count = static_cast<int>(xs.size());
    const double se = std::sqrt(eps);
    out.resize(static_cast<std::ptrdiff_t>(count) * count);
#pragma omp parallel for schedule(static)
    for (int i1 = 0; i1 < count; ++i1) {
        const double y1 = se * xs[i1];
        for (int i2 = 0; i2 < count; ++i2) {
            const double y2 = se * xs[i2];
            cd v = envelope_at(env, 0, y1, y2) * modes.psi1[i1] * modes.phi2[i2] +
                   envelope_at(env, 1, y1, y2) * modes.phi2[i1] * modes.psi1[i2] +
                   envelope_at(env, 2, y1, y2) * modes.phi1[i1] * modes.phi1[i2];
            out[static_cast<std::ptrdiff_t>(i1) * count + i2] = se * v;
        }
    }
}

Eigen::VectorXd potential_grid(const PeriodicPotential& p, double eta,
                               const std::vector<double>& xs) {
    const int count = static_cast<int>(xs.size());
    Eigen::VectorXd w(count);
    for (int i = 0; i < count; ++i) w[i] = p(xs[i]);
    Eigen::VectorXd V(static_cast<std::ptrdiff_t>(count) * count);
#pragma omp parallel for schedule(static)
    for (int i1 = 0; i1 < count; ++i1)
        for (int i2 = 0; i2 < count; ++i2)
            V[static_cast<std::ptrdiff_t>(i1) * count + i2] = eta * (w[i1] + w[i2]);
    return V;
}

}  // namespace

GridField2D reconstruct_leading_order(const CMEField& env, const EdgeEigenfunctions& efs,
                                      double eps, int pts_per_period, int x_periods) {
    if (eps <= 0.0) throw Error("reconstruction requires eps > 0");
    const double se = std::sqrt(eps);
    const int max_periods = static_cast<int>(std::floor(env.D / (se * kPi)));
    if (x_periods <= 0) x_periods = max_periods;
    if (x_periods < 1 || x_periods > max_periods)
        throw CoverageError("requested x-box of " + std::to_string(x_periods) +
                            " pi exceeds the envelope support (" +
                            std::to_string(max_periods) + " pi at this eps)");

    GridField2D g;
    g.X = x_periods * kPi;
    g.n = x_periods * pts_per_period + 1;
    g.dx = 2.0 * g.X / (g.n - 1);
    g.epsilon = eps;
    g.omega = env.coeffs.omega0 + eps * env.omega;
    g.eta = env.coeffs.eta0 + eps;
    g.sigma = env.sigma;
    g.cls = env.cls;

    std::vector<double> xs(g.n);
    for (int i = 0; i < g.n; ++i) xs[i] = g.x(i);
    ModeRows modes = eval_modes(efs, xs);
    fill_leading_order(g.phi, env, modes, xs, eps);
    // Dirichlet ring
    for (int i = 0; i < g.n; ++i) {
        g.phi[g.idx(0, i)] = cd(0);
        g.phi[g.idx(g.n - 1, i)] = cd(0);
        g.phi[g.idx(i, 0)] = cd(0);
        g.phi[g.idx(i, g.n - 1)] = cd(0);
    }
    return g;
}

double elliptic_residual_norm(const GridField2D& f, const PeriodicPotential& p) {
    std::vector<double> xs(f.n);
    for (int i = 0; i < f.n; ++i) xs[i] = f.x(i);
    Eigen::VectorXd V = potential_grid(p, f.eta, xs);
    Eigen::VectorXcd R(f.phi.size());
    elliptic_residual_kernel(R.data(), f.phi.data(), V.data(), f.n, f.omega, f.sigma, f.dx);
    return max_abs(R.data(), f.n * f.n);
}

namespace {

// real-subspace Newton with the two-tier linear solver
NewtonReport newton_real(GridField2D& f, const Eigen::VectorXd& V,
                         const EllipticOptions& opt) {
    const int n = f.n, m = n - 2;
    const std::size_t mdofs = static_cast<std::size_t>(m) * m;
    NewtonReport rep;

    Eigen::VectorXd phi(f.cells());
    for (std::size_t i = 0; i < f.cells(); ++i) phi[i] = f.phi[i].real();

    Eigen::VectorXd Ffull(f.cells()), mfield(f.cells());
    Eigen::VectorXd scratch_in(f.cells()), scratch_out(f.cells());

    auto residual = [&]() {
        // F = lap phi + (omega - V) phi - sigma phi^3 (real)
        Eigen::VectorXd mres(f.cells());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(f.cells()); ++i)
            mres[i] = f.omega - V[i] - f.sigma * phi[i] * phi[i];
        elliptic_jacobian_apply(Ffull.data(), phi.data(), mres.data(), n, f.dx);
        double mx = 0.0;
#pragma omp parallel for schedule(static) reduction(max : mx)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(f.cells()); ++i)
            mx = std::max(mx, std::abs(Ffull[i]));
        return mx;
    };

    const bool direct = mdofs <= opt.direct_cells;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool analyzed = false;

    double resnorm = residual();
    rep.history.push_back(resnorm);
    double res0 = std::max(resnorm, 1e-300);

    // preconditioner shift fixed for the whole Newton run
    std::unique_ptr<DirichletShiftedPoisson> prec;
    if (!direct) {
        double mn = 1e300, mxv = -1e300;
        for (std::size_t i = 0; i < f.cells(); ++i) {
            const double v = f.omega - V[i] - 3.0 * f.sigma * phi[i] * phi[i];
            mn = std::min(mn, v);
            mxv = std::max(mxv, v);
        }
        const double c = (opt.prec_shift > 0.0) ? opt.prec_shift
                                                : std::max(0.3, 1.1 * std::max(mxv, -mn));
        prec = std::make_unique<DirichletShiftedPoisson>(m, f.dx, c);
    }

    for (int it = 0; it < opt.max_iter; ++it) {
        if (resnorm <= opt.tol) {
            rep.iters = it;
            rep.residual = resnorm;
            for (std::size_t i = 0; i < f.cells(); ++i) f.phi[i] = cd(phi[i], 0.0);
            return rep;
        }
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(f.cells()); ++i)
            mfield[i] = f.omega - V[i] - 3.0 * f.sigma * phi[i] * phi[i];

        Eigen::VectorXd rhs(mdofs), delta(mdofs);
        for (int i1 = 1; i1 <= m; ++i1)
            for (int i2 = 1; i2 <= m; ++i2)
                rhs[static_cast<std::size_t>(i1 - 1) * m + (i2 - 1)] = -Ffull[f.idx(i1, i2)];

        if (direct) {
            std::vector<Eigen::Triplet<double>> trips;
            trips.reserve(mdofs * 5);
            const double ih2 = 1.0 / (f.dx * f.dx);
            auto dof = [&](int i1, int i2) {
                return static_cast<int>(static_cast<std::size_t>(i1 - 1) * m + (i2 - 1));
            };
            for (int i1 = 1; i1 <= m; ++i1)
                for (int i2 = 1; i2 <= m; ++i2) {
                    const int r = dof(i1, i2);
                    trips.emplace_back(r, r, -4.0 * ih2 + mfield[f.idx(i1, i2)]);
                    if (i1 > 1) trips.emplace_back(r, dof(i1 - 1, i2), ih2);
                    if (i1 < m) trips.emplace_back(r, dof(i1 + 1, i2), ih2);
                    if (i2 > 1) trips.emplace_back(r, dof(i1, i2 - 1), ih2);
                    if (i2 < m) trips.emplace_back(r, dof(i1, i2 + 1), ih2);
                }
            Eigen::SparseMatrix<double> J(mdofs, mdofs);
            J.setFromTriplets(trips.begin(), trips.end());
            if (!analyzed) {
                lu.analyzePattern(J);
                analyzed = true;
            }
            lu.factorize(J);
            if (lu.info() != Eigen::Success)
                throw SingularSystem("elliptic Jacobian factorization failed");
            delta = lu.solve(rhs);
        } else {
            // matrix-free MINRES with the DST-diagonalized (-lap + c)^{-1}
            auto apply_A = [&](const Eigen::VectorXd& vin, Eigen::VectorXd& vout) {
                scratch_in.setZero();
                for (int i1 = 1; i1 <= m; ++i1)
                    std::memcpy(scratch_in.data() + f.idx(i1, 1),
                                vin.data() + static_cast<std::size_t>(i1 - 1) * m,
                                sizeof(double) * m);
                elliptic_jacobian_apply(scratch_out.data(), scratch_in.data(), mfield.data(),
                                        n, f.dx);
                vout.resize(mdofs);
                for (int i1 = 1; i1 <= m; ++i1)
                    std::memcpy(vout.data() + static_cast<std::size_t>(i1 - 1) * m,
                                scratch_out.data() + f.idx(i1, 1), sizeof(double) * m);
            };
            auto apply_M = [&](const Eigen::VectorXd& vin, Eigen::VectorXd& vout) {
                prec->apply(vin, vout);
            };
            MinresOptions mo;
            mo.max_iter = opt.minres_max_iter;
            // inexact forcing: loose early, tight near convergence
            mo.rtol = std::clamp(0.01 * resnorm / res0, 1e-10, opt.minres_rtol_cap);
            delta.setZero(mdofs);
            auto mres = minres(apply_A, apply_M, rhs, delta, mo);
            if (!mres.converged && mres.relres > 1e-2)
                throw NewtonDivergence("elliptic MINRES stalled (relres " +
                                           std::to_string(mres.relres) + ")",
                                       rep.history);
        }

        auto apply_step = [&](double s) {
            for (int i1 = 1; i1 <= m; ++i1)
                for (int i2 = 1; i2 <= m; ++i2)
                    phi[f.idx(i1, i2)] +=
                        s * delta[static_cast<std::size_t>(i1 - 1) * m + (i2 - 1)];
        };
        double step = 1.0;
        apply_step(step);
        double newres = residual();
        int backtracks = 0;
        while (newres > resnorm && backtracks < 4 && newres > opt.tol) {
            apply_step(-step / 2);
            step /= 2;
            newres = residual();
            ++backtracks;
        }
        resnorm = newres;
        rep.history.push_back(resnorm);
    }
    if (resnorm <= opt.tol) {
        rep.iters = opt.max_iter;
        rep.residual = resnorm;
        for (std::size_t i = 0; i < f.cells(); ++i) f.phi[i] = cd(phi[i], 0.0);
        return rep;
    }
    throw NewtonDivergence("elliptic Newton did not converge", rep.history);
}

// realified complex Newton (direct solver only); one phase row pins the gauge
NewtonReport newton_complex(GridField2D& f, const Eigen::VectorXd& V,
                            const EllipticOptions& opt) {
    const int n = f.n, m = n - 2;
    const std::size_t mdofs = 2 * static_cast<std::size_t>(m) * m;
    if (static_cast<std::size_t>(m) * m > opt.direct_cells)
        throw CellBudgetExceeded(
            "complex elliptic Newton needs the sparse direct path; grid " +
            std::to_string(n) + "^2 exceeds direct budget");
    NewtonReport rep;

    Eigen::VectorXcd R(f.cells());
    auto residual = [&]() {
        elliptic_residual_kernel(R.data(), f.phi.data(), V.data(), n, f.omega, f.sigma,
                                 f.dx);
        return max_abs(R.data(), n * n);
    };

    // phase reference: largest modulus
    Eigen::Index ref;
    f.phi.cwiseAbs().maxCoeff(&ref);
    {
        const cd v = f.phi[ref];
        if (std::abs(v) > 0) f.phi *= std::conj(v) / std::abs(v);
    }

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool analyzed = false;
    double resnorm = residual();
    rep.history.push_back(resnorm);

    auto dof = [&](int i1, int i2, int q) {
        return static_cast<int>((static_cast<std::size_t>(q) * m + (i1 - 1)) * m + (i2 - 1));
    };
    const int ref_i1 = static_cast<int>(ref) / n, ref_i2 = static_cast<int>(ref) % n;
    const int phase_row = dof(std::clamp(ref_i1, 1, m), std::clamp(ref_i2, 1, m), 1);

    for (int it = 0; it < opt.max_iter; ++it) {
        if (resnorm <= opt.tol) {
            rep.iters = it;
            rep.residual = resnorm;
            return rep;
        }
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(mdofs * 7);
        const double ih2 = 1.0 / (f.dx * f.dx);
        Eigen::VectorXd rhs(mdofs);
        for (int i1 = 1; i1 <= m; ++i1)
            for (int i2 = 1; i2 <= m; ++i2) {
                const cd ph = f.phi[f.idx(i1, i2)];
                const double lin = f.omega - V[f.idx(i1, i2)];
                const double P = 2.0 * f.sigma * std::norm(ph);
                const cd Q = double(f.sigma) * ph * ph;
                for (int q = 0; q < 2; ++q) {
                    const int r = dof(i1, i2, q);
                    double diag = -4.0 * ih2 + lin - (P + (q == 0 ? Q.real() : -Q.real()));
                    trips.emplace_back(r, r, diag);
                    trips.emplace_back(r, dof(i1, i2, 1 - q), -Q.imag());
                    if (i1 > 1) trips.emplace_back(r, dof(i1 - 1, i2, q), ih2);
                    if (i1 < m) trips.emplace_back(r, dof(i1 + 1, i2, q), ih2);
                    if (i2 > 1) trips.emplace_back(r, dof(i1, i2 - 1, q), ih2);
                    if (i2 < m) trips.emplace_back(r, dof(i1, i2 + 1, q), ih2);
                    rhs[r] = -((q == 0) ? R[f.idx(i1, i2)].real() : R[f.idx(i1, i2)].imag());
                }
            }
        // gauge row
        for (auto& t : trips)
            if (t.row() == phase_row)
                t = Eigen::Triplet<double>(t.row(), t.col(),
                                           (t.col() == phase_row) ? 1.0 : 0.0);
        rhs[phase_row] = 0.0;

        Eigen::SparseMatrix<double> J(mdofs, mdofs);
        J.setFromTriplets(trips.begin(), trips.end());
        if (!analyzed) {
            lu.analyzePattern(J);
            analyzed = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success)
            throw SingularSystem("elliptic Jacobian factorization failed");
        Eigen::VectorXd delta = lu.solve(rhs);
        for (int i1 = 1; i1 <= m; ++i1)
            for (int i2 = 1; i2 <= m; ++i2)
                f.phi[f.idx(i1, i2)] += cd(delta[dof(i1, i2, 0)], delta[dof(i1, i2, 1)]);
        resnorm = residual();
        rep.history.push_back(resnorm);
        if (rep.history.size() > 3 &&
            resnorm > 10.0 * rep.history[rep.history.size() - 2])
            throw NewtonDivergence("elliptic Newton diverging", rep.history);
    }
    if (resnorm <= opt.tol) {
        rep.iters = opt.max_iter;
        rep.residual = resnorm;
        return rep;
    }
    throw NewtonDivergence("elliptic Newton did not converge", rep.history);
}

}  // namespace

NewtonReport solve_elliptic_newton(GridField2D& f, const PeriodicPotential& p,
                                   const EllipticOptions& opt) {
    if (f.cells() > opt.cell_budget)
        throw CellBudgetExceeded("grid " + std::to_string(f.n) + "x" + std::to_string(f.n) +
                                 " = " + std::to_string(f.cells()) +
                                 " cells exceeds the configured budget of " +
                                 std::to_string(opt.cell_budget));
    std::vector<double> xs(f.n);
    for (int i = 0; i < f.n; ++i) xs[i] = f.x(i);
    Eigen::VectorXd V = potential_grid(p, f.eta, xs);

    if (real_class(f.cls)) {
        double imax = 0.0;
        for (std::size_t i = 0; i < f.cells(); ++i)
            imax = std::max(imax, std::abs(f.phi[i].imag()));
        const double amp = max_abs(f.phi.data(), f.n * f.n);
        if (imax > 1e-8 * std::max(amp, 1e-30))
            throw Error("real solution class carries an imaginary part");
        return newton_real(f, V, opt);
    }
    return newton_complex(f, V, opt);
}

double grid_symmetry_error(const GridField2D& f) {
    const int n = f.n;
    const double amp = max_abs(f.phi.data(), n * n);
    if (amp <= 0) return 0.0;
    auto at = [&](int i1, int i2) { return f.phi[f.idx(i1, i2)]; };
    double worst = 0.0;
    auto upd = [&](double v) { worst = std::max(worst, v); };
    for (int i1 = 0; i1 < n; ++i1)
        for (int i2 = 0; i2 < n; ++i2) {
            const cd v = at(i1, i2);
            const cd vx = at(n - 1 - i1, i2), vy = at(i1, n - 1 - i2);
            const cd vs = at(i2, i1);
            switch (f.cls) {
                case CmeClass::A_m0:
                    upd(std::abs(v.imag()));
                    upd(std::abs(v - vx));
                    upd(std::abs(v - vy));
                    break;
                case CmeClass::Bi_m0:
                    upd(std::abs(v.imag()));
                    upd(std::abs(v - vx));
                    upd(std::abs(v + vy));
                    break;
                case CmeClass::Bii: {
                    const double d1 = std::abs(v - vs), d2 = std::abs(v + vs);
                    upd(std::abs(v.imag()));
                    upd(std::min(d1, d2));
                    break;
                }
                case CmeClass::A_m1:
                    upd(std::abs(v + std::conj(vx)));
                    upd(std::abs(v - std::conj(vy)));
                    break;
                default:
                    break;
            }
        }
    return worst / amp;
}

ConvergenceStudy convergence_study(CmeClass cls, double Omega,
                                   const std::vector<double>& eps_list,
                                   const PeriodicPotential& p,
                                   const ResonanceCoefficients& c,
                                   const EdgeEigenfunctions& efs, const StudyOptions& opt) {
    ConvergenceStudy st;
    st.complete = true;
    CMEField env;
    try {
        env = solve_class(cls, Omega, c, opt.envelope_D, opt.envelope_dy,
                          NewtonOptions{1e-10, 50, 4}, opt.homotopy_steps);
    } catch (const Error& e) {
        st.complete = false;
        st.note = std::string("envelope solve failed: ") + e.what();
        return st;
    }
    for (double eps : eps_list) {
        try {
            GridField2D g = reconstruct_leading_order(env, efs, eps, opt.pts_per_period);
            Eigen::VectorXcd phi1 = g.phi;
            EllipticOptions eo = opt.elliptic;
            eo.tol = opt.newton_tol;
            solve_elliptic_newton(g, p, eo);
            Eigen::VectorXcd diff = g.phi - phi1;
            st.eps.push_back(eps);
            st.err.push_back(max_abs(diff.data(), g.n * g.n));
            st.grid_n.push_back(g.n);
        } catch (const Error& e) {
            st.complete = false;
            st.note = "eps = " + std::to_string(eps) + " failed: " + e.what();
        }
    }
    if (st.eps.size() >= 2) {
        // least squares on log err = slope log eps + intercept
        const int k = static_cast<int>(st.eps.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < k; ++i) {
            const double lx = std::log(st.eps[i]), ly = std::log(st.err[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        st.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
        st.intercept = (sy - st.slope * sx) / k;
    } else {
        st.complete = false;
    }
    return st;
}

double gp_mass(const GridField2D& f) {
    const int nf = f.n - 1;
    double s = 0.0;
    for (int i1 = 0; i1 < nf; ++i1)
        for (int i2 = 0; i2 < nf; ++i2) s += std::norm(f.phi[f.idx(i1, i2)]);
    return s * f.dx * f.dx;
}

GpReport integrate_gp_time(GridField2D& f, const PeriodicPotential& p, double t_end,
                           double dt) {
    GpReport rep;
    rep.mass_initial = gp_mass(f);
    const int nf = f.n - 1;
    const int steps = std::max(1, static_cast<int>(std::round(t_end / dt)));
    const double dt_eff = t_end / steps;
    rep.steps = steps;

    std::vector<double> xs(nf);
    for (int i = 0; i < nf; ++i) xs[i] = f.x(i);
    Eigen::VectorXd w(nf);
    for (int i = 0; i < nf; ++i) w[i] = p(xs[i]);
    Eigen::VectorXd V(static_cast<std::ptrdiff_t>(nf) * nf);
    for (int i1 = 0; i1 < nf; ++i1)
        for (int i2 = 0; i2 < nf; ++i2)
            V[static_cast<std::ptrdiff_t>(i1) * nf + i2] = f.eta * (w[i1] + w[i2]);

    Fft2 fft(nf);
    const auto ks = fft_wavenumbers(nf, 2.0 * f.X);
    Eigen::VectorXcd kin(static_cast<std::ptrdiff_t>(nf) * nf);
    for (int i1 = 0; i1 < nf; ++i1)
        for (int i2 = 0; i2 < nf; ++i2) {
            const double p2 = ks[i1] * ks[i1] + ks[i2] * ks[i2];
            kin[static_cast<std::ptrdiff_t>(i1) * nf + i2] = std::polar(1.0, -p2 * dt_eff);
        }

    Eigen::VectorXcd e(static_cast<std::ptrdiff_t>(nf) * nf);
    for (int i1 = 0; i1 < nf; ++i1)
        for (int i2 = 0; i2 < nf; ++i2)
            e[static_cast<std::ptrdiff_t>(i1) * nf + i2] = f.phi[f.idx(i1, i2)];
    const double amp0 = max_abs(e.data(), nf * nf);

    auto kinetic_full = [&]() {
        std::memcpy(fft.data(), e.data(), sizeof(cd) * nf * nf);
        fft.forward();
        cd* buf = fft.data();
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(nf) * nf; ++i)
            buf[i] *= kin[i];
        fft.backward_scaled();
        std::memcpy(e.data(), fft.data(), sizeof(cd) * nf * nf);
    };

    for (int s = 0; s < steps; ++s) {
        gp_phase_step(e.data(), V.data(), nf * nf, f.sigma, 0.5 * dt_eff);
        kinetic_full();
        gp_phase_step(e.data(), V.data(), nf * nf, f.sigma, 0.5 * dt_eff);
        if ((s & 31) == 0 && max_abs(e.data(), nf * nf) > 10.0 * amp0)
            throw Error("Gross-Pitaevskii evolution blew up at t = " +
                        std::to_string((s + 1) * dt_eff));
    }
    for (int i1 = 0; i1 < nf; ++i1)
        for (int i2 = 0; i2 < nf; ++i2)
            f.phi[f.idx(i1, i2)] = e[static_cast<std::ptrdiff_t>(i1) * nf + i2];
    for (int i = 0; i < f.n; ++i) {
        f.phi[f.idx(f.n - 1, i)] = f.phi[f.idx(0, i % nf)];
        f.phi[f.idx(i, f.n - 1)] = f.phi[f.idx(i % nf, 0)];
    }
    rep.mass_final = gp_mass(f);
    return rep;
}

TrackingResult finite_time_tracking(const CMEField& envelope0,
                                    const EdgeEigenfunctions& efs,
                                    const PeriodicPotential& p, double eps,
                                    const TrackingOptions& opt) {
    TrackingResult out;
    const double se = std::sqrt(eps);
    const int periods = static_cast<int>(std::floor(envelope0.D / (se * kPi)));
    if (periods < 1) throw CoverageError("envelope too small for the requested eps");
    const double X = periods * kPi;
    const int nf = periods * opt.pts_per_period;

    std::vector<double> xs(nf);
    for (int i = 0; i < nf; ++i) xs[i] = -X + i * (2.0 * X / nf);
    ModeRows modes = eval_modes(efs, xs);

    CMEField env = envelope0;
    auto build_ansatz = [&](double t, Eigen::VectorXcd& ans) {
        ans.resize(static_cast<std::ptrdiff_t>(nf) * nf);
        const cd carrier = std::polar(1.0, -env.coeffs.omega0 * t);
#pragma omp parallel for schedule(static)
        for (int i1 = 0; i1 < nf; ++i1) {
            const double y1 = se * xs[i1];
            for (int i2 = 0; i2 < nf; ++i2) {
                const double y2 = se * xs[i2];
                cd v = envelope_at(env, 0, y1, y2) * modes.psi1[i1] * modes.phi2[i2] +
                       envelope_at(env, 1, y1, y2) * modes.phi2[i1] * modes.psi1[i2] +
                       envelope_at(env, 2, y1, y2) * modes.phi1[i1] * modes.phi1[i2];
                ans[static_cast<std::ptrdiff_t>(i1) * nf + i2] = se * carrier * v;
            }
        }
    };

    // GP field on the same periodic grid, packed as a GridField2D with the
    // duplicate boundary row appended
    GridField2D g;
    g.n = nf + 1;
    g.X = X;
    g.dx = 2.0 * X / nf;
    g.epsilon = eps;
    g.omega = env.coeffs.omega0 + eps * env.omega;
    g.eta = env.coeffs.eta0 + eps;
    g.sigma = env.sigma;
    g.cls = CmeClass::General;
    g.phi = Eigen::VectorXcd::Zero(g.cells());
    {
        Eigen::VectorXcd ans;
        build_ansatz(0.0, ans);
        for (int i1 = 0; i1 < nf; ++i1)
            for (int i2 = 0; i2 < nf; ++i2)
                g.phi[g.idx(i1, i2)] = ans[static_cast<std::ptrdiff_t>(i1) * nf + i2];
    }
    const double mass0 = gp_mass(g);

    const double t_total = opt.T0 / eps;
    const int chunks = std::max(1, static_cast<int>(std::round(t_total / opt.sample_interval)));
    const double t_chunk = t_total / chunks;

    Eigen::VectorXcd ans, diff(static_cast<std::ptrdiff_t>(nf) * nf);
    double t = 0.0;
    for (int chunk = 0; chunk < chunks; ++chunk) {
        integrate_gp_time(g, p, t_chunk, opt.dt);
        integrate_cme_time(env, eps * t_chunk, eps * opt.dt);
        t += t_chunk;
        build_ansatz(t, ans);
        for (int i1 = 0; i1 < nf; ++i1)
            for (int i2 = 0; i2 < nf; ++i2)
                diff[static_cast<std::ptrdiff_t>(i1) * nf + i2] =
                    g.phi[g.idx(i1, i2)] - ans[static_cast<std::ptrdiff_t>(i1) * nf + i2];
        out.sup_error = std::max(out.sup_error, max_abs(diff.data(), nf * nf));
        ++out.samples;
    }
    out.mass_drift = std::abs(gp_mass(g) - mass0) / std::max(mass0, 1e-300);
    return out;
}

}  // namespace gapweaver
