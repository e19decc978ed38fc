#include "gapweaver/cme2d.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "gapweaver/errors.hpp"
#include "gapweaver/fftplan.hpp"
#include "gapweaver/kernels.hpp"

namespace gapweaver {

namespace {

using cd = std::complex<double>;

double beta_of(int comp, const ResonanceCoefficients& c) {
    return comp == 2 ? c.beta2 : c.beta1;
}

void alphas_of(int comp, const ResonanceCoefficients& c, const double* ov, double& a1,
               double& a2) {
    const double o1 = ov ? ov[0] : c.alpha1;
    const double o2 = ov ? ov[1] : c.alpha2;
    if (comp == 0) {
        a1 = o1;
        a2 = o2;
    } else if (comp == 1) {
        a1 = o2;
        a2 = o1;
    } else {
        a1 = c.alpha3;
        a2 = c.alpha3;
    }
}

int odd_points(double D, double dy) {
    int n = static_cast<int>(std::round(2.0 * D / dy)) + 1;
    if (n % 2 == 0) ++n;
    return std::max(n, 17);
}

// Catmull-Rom sample of a row-major n x n complex grid over [-D,D]^2,
// zero outside the box.
cd sample_bicubic(const Eigen::VectorXcd& a, int n, double D, double dy, double y1,
                  double y2) {
    auto value = [&](int i1, int i2) -> cd {
        if (i1 < 0 || i2 < 0 || i1 >= n || i2 >= n) return cd(0.0);
        return a[i1 * n + i2];
    };
    auto cubic = [](cd p0, cd p1, cd p2, cd p3, double t) {
        cd a1 = 0.5 * (p2 - p0);
        cd a2 = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        cd a3 = 0.5 * (p3 - p0) + 1.5 * (p1 - p2);
        return p1 + t * (a1 + t * (a2 + t * a3));
    };
    const double s1 = (y1 + D) / dy, s2 = (y2 + D) / dy;
    if (s1 < -2 || s2 < -2 || s1 > n + 1 || s2 > n + 1) return cd(0.0);
    const int i1 = static_cast<int>(std::floor(s1)), i2 = static_cast<int>(std::floor(s2));
    const double t1 = s1 - i1, t2 = s2 - i2;
    cd rows[4];
    for (int r = 0; r < 4; ++r)
        rows[r] = cubic(value(i1 - 1 + r, i2 - 1), value(i1 - 1 + r, i2),
                        value(i1 - 1 + r, i2 + 1), value(i1 - 1 + r, i2 + 2), t2);
    return cubic(rows[0], rows[1], rows[2], rows[3], t1);
}

void zero_boundary(CMEField& f) {
    const int n = f.n;
    for (auto& comp : f.a) {
        for (int i = 0; i < n; ++i) {
            comp[f.idx(0, i)] = cd(0);
            comp[f.idx(n - 1, i)] = cd(0);
            comp[f.idx(i, 0)] = cd(0);
            comp[f.idx(i, n - 1)] = cd(0);
        }
    }
}

// phase-fix reference: grid point and component whose imaginary part is
// pinned to zero. For the vortex classes it sits on the symmetry axis where
// the class relations force the field to be real.
struct PhaseRef {
    int comp = 0;
    int index = 0;
};

PhaseRef phase_reference(const CMEField& f) {
    const int ic = (f.n - 1) / 2;
    PhaseRef ref;
    switch (f.cls) {
        case CmeClass::A_m1:
            ref.comp = 2;
            break;
        case CmeClass::Bi_m1:
        case CmeClass::Biv:
            ref.comp = 0;
            break;
        default: {
            // general complex field: point of largest modulus in the
            // dominant component
            int best_c = 0;
            double best = -1.0;
            for (int c = 0; c < 3; ++c) {
                double m = f.a[c].cwiseAbs().maxCoeff();
                if (m > best) {
                    best = m;
                    best_c = c;
                }
            }
            ref.comp = best_c;
            Eigen::Index im;
            f.a[best_c].cwiseAbs().maxCoeff(&im);
            ref.index = static_cast<int>(im);
            return ref;
        }
    }
    // scan the positive y1 axis (y2 = 0) for the largest |Re|
    double best = -1.0;
    for (int i1 = 1; i1 < f.n - 1; ++i1) {
        double v = std::abs(f.a[ref.comp][f.idx(i1, ic)].real());
        if (v > best) {
            best = v;
            ref.index = f.idx(i1, ic);
        }
    }
    return ref;
}

struct LocalBlocks {
    // P real, Q complex for every active pair (row comp, col comp)
    double P[3][3];
    cd Q[3][3];
};

void cubic_blocks(const ResonanceCoefficients& co, const cd& A1, const cd& A2, const cd& A3,
                  LocalBlocks& b) {
    const double n1 = std::norm(A1), n2 = std::norm(A2), n3 = std::norm(A3);
    b.P[0][0] = 2 * co.gamma1 * n1 + 2 * co.gamma2 * n2 + 2 * co.gamma3 * n3;
    b.Q[0][0] = co.gamma1 * A1 * A1 + co.gamma2 * A2 * A2 + co.gamma3 * A3 * A3;
    b.P[1][1] = 2 * co.gamma1 * n2 + 2 * co.gamma2 * n1 + 2 * co.gamma3 * n3;
    b.Q[1][1] = co.gamma1 * A2 * A2 + co.gamma2 * A1 * A1 + co.gamma3 * A3 * A3;
    b.P[2][2] = 2 * co.gamma4 * n3 + 2 * co.gamma3 * (n1 + n2);
    b.Q[2][2] = co.gamma4 * A3 * A3 + co.gamma3 * (A1 * A1 + A2 * A2);
    b.P[0][1] = b.P[1][0] = 4 * co.gamma2 * (A1 * std::conj(A2)).real();
    b.Q[0][1] = b.Q[1][0] = 2 * co.gamma2 * A1 * A2;
    b.P[0][2] = b.P[2][0] = 4 * co.gamma3 * (A1 * std::conj(A3)).real();
    b.Q[0][2] = b.Q[2][0] = 2 * co.gamma3 * A1 * A3;
    b.P[1][2] = b.P[2][1] = 4 * co.gamma3 * (A2 * std::conj(A3)).real();
    b.Q[1][2] = b.Q[2][1] = 2 * co.gamma3 * A2 * A3;
}

}  // namespace

const char* class_tag(CmeClass c) {
    switch (c) {
        case CmeClass::A_m0: return "A-m0";
        case CmeClass::A_m1: return "A-m1";
        case CmeClass::Bi_m0: return "B-i-m0";
        case CmeClass::Bi_m1: return "B-i-m1";
        case CmeClass::Bii: return "B-ii";
        case CmeClass::Biii: return "B-iii";
        case CmeClass::Biv: return "B-iv";
        case CmeClass::General: return "general";
    }
    return "general";
}

CmeClass class_from_tag(const std::string& tag) {
    for (CmeClass c : {CmeClass::A_m0, CmeClass::A_m1, CmeClass::Bi_m0, CmeClass::Bi_m1,
                       CmeClass::Bii, CmeClass::Biii, CmeClass::Biv, CmeClass::General})
        if (tag == class_tag(c)) return c;
    throw Error("unknown solution class tag: " + tag);
}

ClassStructure class_structure(CmeClass c) {
    ClassStructure s;
    switch (c) {
        case CmeClass::A_m0:
            s.active = {false, false, true};
            s.use_re = {false, false, true};
            break;
        case CmeClass::A_m1:
            s.active = {false, false, true};
            s.use_re = {false, false, true};
            s.use_im = {false, false, true};
            s.needs_phase_fix = true;
            break;
        case CmeClass::Bi_m0:
            s.active = {true, false, false};
            s.use_re = {true, false, false};
            break;
        case CmeClass::Bi_m1:
            s.active = {true, false, false};
            s.use_re = {true, false, false};
            s.use_im = {true, false, false};
            s.needs_phase_fix = true;
            break;
        case CmeClass::Bii:
            s.active = {true, true, false};
            s.use_re = {true, true, false};
            break;
        case CmeClass::Biii:
            // A1 real, A2 purely imaginary: one real plane each
            s.active = {true, true, false};
            s.use_re = {true, false, false};
            s.use_im = {false, true, false};
            break;
        case CmeClass::Biv:
            s.active = {true, true, false};
            s.use_re = {true, true, false};
            s.use_im = {true, true, false};
            s.needs_phase_fix = true;
            break;
        case CmeClass::General:
            s.active = {true, true, true};
            s.use_re = {true, true, true};
            s.use_im = {true, true, true};
            s.needs_phase_fix = true;
            break;
    }
    return s;
}

void cme_residual(const CMEField& f, std::array<Eigen::VectorXcd, 3>& F,
                  const double* alpha_override, int fd_order) {
    const int n = f.n;
    const int count = n * n;
    std::array<Eigen::VectorXcd, 3> cub;
    for (int c = 0; c < 3; ++c) {
        F[c].resize(count);
        cub[c].resize(count);
    }
    CmeCubicCoeffs cc{f.coeffs.gamma1, f.coeffs.gamma2, f.coeffs.gamma3, f.coeffs.gamma4,
                      f.sigma};
    cme_cubic({cub[0].data(), cub[1].data(), cub[2].data()},
              {f.a[0].data(), f.a[1].data(), f.a[2].data()}, count, cc);
    for (int c = 0; c < 3; ++c) {
        double a1, a2;
        alphas_of(c, f.coeffs, alpha_override, a1, a2);
        stencil_apply(F[c].data(), f.a[c].data(), n, a1, a2, f.dy, fd_order);
        const double lin = f.omega - beta_of(c, f.coeffs);
        const cd* a = f.a[c].data();
        cd* out = F[c].data();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < count; ++i) out[i] += lin * a[i] - cub[c][i];
        // Dirichlet rows carry no equations
        for (int i = 0; i < n; ++i) {
            out[f.idx(0, i)] = cd(0);
            out[f.idx(n - 1, i)] = cd(0);
            out[f.idx(i, 0)] = cd(0);
            out[f.idx(i, n - 1)] = cd(0);
        }
    }
}

double cme_residual_norm(const CMEField& f, const double* alpha_override, int fd_order) {
    std::array<Eigen::VectorXcd, 3> F;
    cme_residual(f, F, alpha_override, fd_order);
    double m = 0.0;
    for (int c = 0; c < 3; ++c) m = std::max(m, max_abs(F[c].data(), f.n * f.n));
    return m;
}

RealifiedCmeSystem assemble_cme_system(const CMEField& f, bool full_planes,
                                       const double* alpha_override, int fd_order) {
    const ClassStructure st = class_structure(f.cls);
    RealifiedCmeSystem sys;
    sys.n = f.n;
    sys.m = f.n - 2;
    for (int c = 0; c < 3; ++c) {
        if (!st.active[c]) continue;
        if (full_planes || st.use_re[c]) sys.planes.push_back({c, 0});
        if (full_planes || st.use_im[c]) sys.planes.push_back({c, 1});
    }
    const int np = static_cast<int>(sys.planes.size());
    const int m = sys.m;
    const std::size_t block = static_cast<std::size_t>(m) * m;
    const std::size_t dofs = np * block;

    // plane lookup: plane_of[comp][reim] -> plane index or -1
    int plane_of[3][2];
    for (auto& row : plane_of) row[0] = row[1] = -1;
    for (int p = 0; p < np; ++p)
        plane_of[sys.planes[p].first][sys.planes[p].second] = p;

    auto dof = [&](int p, int i1, int i2) {
        return static_cast<std::ptrdiff_t>(p) * block + static_cast<std::size_t>(i1 - 1) * m +
               (i2 - 1);
    };

    // residual on the dofs
    std::array<Eigen::VectorXcd, 3> F;
    cme_residual(f, F, alpha_override, fd_order);
    sys.F.resize(dofs);
    for (int p = 0; p < np; ++p) {
        auto [c, q] = sys.planes[p];
        for (int i1 = 1; i1 <= m; ++i1)
            for (int i2 = 1; i2 <= m; ++i2) {
                const cd v = F[c][f.idx(i1, i2)];
                sys.F[dof(p, i1, i2)] = (q == 0) ? v.real() : v.imag();
            }
    }

    // Jacobian triplets
    const double ih2 = 1.0 / (f.dy * f.dy);
    const int reach = (fd_order == 2) ? 1 : 2;
    double w0 = (fd_order == 2) ? -2.0 * ih2 : -30.0 / 12.0 * ih2;
    double w1 = (fd_order == 2) ? ih2 : 16.0 / 12.0 * ih2;
    double w2 = (fd_order == 2) ? 0.0 : -1.0 / 12.0 * ih2;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(dofs * (4 * reach + 1 + 2 * np));

    for (int p = 0; p < np; ++p) {
        auto [c, q] = sys.planes[p];
        double a1, a2;
        alphas_of(c, f.coeffs, alpha_override, a1, a2);
        const double diag_lin = (a1 + a2) * w0 + (f.omega - beta_of(c, f.coeffs));
        for (int i1 = 1; i1 <= m; ++i1)
            for (int i2 = 1; i2 <= m; ++i2) {
                const auto r = dof(p, i1, i2);
                trips.emplace_back(r, r, diag_lin);
                for (int o = 1; o <= reach; ++o) {
                    const double w = (o == 1) ? w1 : w2;
                    if (i1 - o >= 1) trips.emplace_back(r, dof(p, i1 - o, i2), a1 * w);
                    if (i1 + o <= m) trips.emplace_back(r, dof(p, i1 + o, i2), a1 * w);
                    if (i2 - o >= 1) trips.emplace_back(r, dof(p, i1, i2 - o), a2 * w);
                    if (i2 + o <= m) trips.emplace_back(r, dof(p, i1, i2 + o), a2 * w);
                }
            }
        (void)q;
    }

    // local cubic blocks, -sigma d C
    const double sg = static_cast<double>(f.sigma);
    LocalBlocks lb;
    for (int i1 = 1; i1 <= m; ++i1)
        for (int i2 = 1; i2 <= m; ++i2) {
            const int g = f.idx(i1, i2);
            cubic_blocks(f.coeffs, f.a[0][g], f.a[1][g], f.a[2][g], lb);
            for (int pr = 0; pr < np; ++pr) {
                auto [cj, qr] = sys.planes[pr];
                for (int pc = 0; pc < np; ++pc) {
                    auto [cm, qc] = sys.planes[pc];
                    const double P = lb.P[cj][cm];
                    const cd Q = lb.Q[cj][cm];
                    double entry;
                    if (qr == 0 && qc == 0)
                        entry = P + Q.real();
                    else if (qr == 1 && qc == 1)
                        entry = P - Q.real();
                    else
                        entry = Q.imag();
                    if (entry != 0.0)
                        trips.emplace_back(dof(pr, i1, i2), dof(pc, i1, i2), -sg * entry);
                }
            }
        }

    sys.J.resize(dofs, dofs);
    sys.J.setFromTriplets(trips.begin(), trips.end());
    return sys;
}

NewtonReport solve_cme_newton(CMEField& f, const NewtonOptions& opt,
                              const double* alpha_override) {
    const ClassStructure st = class_structure(f.cls);
    NewtonReport rep;

    PhaseRef ref{};
    std::ptrdiff_t phase_row = -1;
    if (st.needs_phase_fix) {
        ref = phase_reference(f);
        if (f.cls == CmeClass::General) {
            // rotate the global phase so the reference value is real
            const cd v = f.a[ref.comp][ref.index];
            if (std::abs(v) > 0) {
                const cd rot = std::conj(v) / std::abs(v);
                for (auto& comp : f.a) comp *= rot;
            }
        }
    }

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool analyzed = false;

    double resnorm = cme_residual_norm(f, alpha_override, opt.fd_order);
    rep.history.push_back(resnorm);

    for (int it = 0; it < opt.max_iter; ++it) {
        if (resnorm <= opt.tol) {
            rep.iters = it;
            rep.residual = resnorm;
            return rep;
        }
        RealifiedCmeSystem sys = assemble_cme_system(f, false, alpha_override, opt.fd_order);

        if (st.needs_phase_fix) {
            // locate the imaginary plane of the reference component
            int p_im = -1;
            for (std::size_t p = 0; p < sys.planes.size(); ++p)
                if (sys.planes[p].first == ref.comp && sys.planes[p].second == 1)
                    p_im = static_cast<int>(p);
            const int m = sys.m;
            const int i1 = ref.index / f.n, i2 = ref.index % f.n;
            phase_row = static_cast<std::ptrdiff_t>(p_im) * m * m +
                        static_cast<std::ptrdiff_t>(i1 - 1) * m + (i2 - 1);
            // replace the row with the scalar constraint Im A(ref) = 0
            for (int k = 0; k < sys.J.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator itJ(sys.J, k); itJ; ++itJ)
                    if (itJ.row() == phase_row) itJ.valueRef() = (itJ.col() == phase_row);
            sys.F[phase_row] = f.a[ref.comp][ref.index].imag();
        }

        if (!analyzed) {
            lu.analyzePattern(sys.J);
            analyzed = true;
        }
        lu.factorize(sys.J);
        if (lu.info() != Eigen::Success)
            throw SingularSystem("coupled-mode Jacobian is singular to working precision");
        Eigen::VectorXd delta = lu.solve(-sys.F);

        // apply with backtracking
        const std::size_t block = static_cast<std::size_t>(sys.m) * sys.m;
        auto apply = [&](double scale) {
            for (std::size_t p = 0; p < sys.planes.size(); ++p) {
                auto [c, q] = sys.planes[p];
                for (int i1 = 1; i1 <= sys.m; ++i1)
                    for (int i2 = 1; i2 <= sys.m; ++i2) {
                        const double d =
                            scale * delta[p * block + static_cast<std::size_t>(i1 - 1) * sys.m +
                                          (i2 - 1)];
                        cd& v = f.a[c][f.idx(i1, i2)];
                        v += (q == 0) ? cd(d, 0.0) : cd(0.0, d);
                    }
            }
        };
        double step = 1.0;
        apply(step);
        double newres = cme_residual_norm(f, alpha_override, opt.fd_order);
        int backtracks = 0;
        while (newres > resnorm && backtracks < 5 && newres > opt.tol) {
            apply(-step / 2);  // halve the applied step
            step /= 2;
            newres = cme_residual_norm(f, alpha_override, opt.fd_order);
            ++backtracks;
        }
        resnorm = newres;
        rep.history.push_back(resnorm);
    }
    if (resnorm <= opt.tol) {
        rep.iters = opt.max_iter;
        rep.residual = resnorm;
        return rep;
    }
    throw NewtonDivergence("coupled-mode Newton did not converge", rep.history);
}

CMEField make_class_seed(CmeClass cls, double Omega, const ResonanceCoefficients& c,
                         double D, double dy) {
    CMEField f;
    f.n = odd_points(D, dy);
    f.D = D;
    f.dy = 2.0 * D / (f.n - 1);
    f.omega = Omega;
    f.cls = cls;
    f.coeffs = c;
    for (auto& comp : f.a) comp = Eigen::VectorXcd::Zero(f.cells());

    const double abar = 0.5 * (c.alpha1 + c.alpha2);
    auto fill = [&](int comp, auto&& fn) {
        for (int i1 = 0; i1 < f.n; ++i1)
            for (int i2 = 0; i2 < f.n; ++i2)
                f.a[comp][f.idx(i1, i2)] = fn(f.y(i1), f.y(i2));
    };

    switch (cls) {
        case CmeClass::A_m0:
        case CmeClass::A_m1: {
            f.sigma = +1;
            const int m = (cls == CmeClass::A_m1) ? 1 : 0;
            RadialProfile prof = solve_radial_profile(RadialClass::A, m, Omega, +1, c);
            const double sa = std::sqrt(std::abs(c.alpha3));
            fill(2, [&](double y1, double y2) {
                const double r = std::hypot(y1, y2) / sa;
                const double th = std::atan2(y2, y1);
                return std::polar(prof.eval(r), m * th);
            });
            break;
        }
        case CmeClass::Bi_m0:
        case CmeClass::Bi_m1: {
            f.sigma = -1;
            const int m = (cls == CmeClass::Bi_m1) ? 1 : 0;
            RadialProfile prof = solve_radial_profile(RadialClass::Bi, m, Omega, -1, c);
            const double s1 = std::sqrt(c.alpha1), s2 = std::sqrt(c.alpha2);
            fill(0, [&](double y1, double y2) {
                const double x1 = y1 / s1, x2 = y2 / s2;
                const double r = std::hypot(x1, x2);
                const double th = std::atan2(x2, x1);
                return std::polar(prof.eval(r), m * th);
            });
            break;
        }
        case CmeClass::Bii:
        case CmeClass::Biii:
        case CmeClass::Biv: {
            f.sigma = -1;
            const double kappa2 = c.beta1 - Omega;
            if (kappa2 <= 0.0)
                throw NoLocalizedSolution("coupled B classes need Omega below beta1");
            const double geff = (cls == CmeClass::Biii) ? (c.gamma1 + c.gamma2)
                                                        : (c.gamma1 + 3.0 * c.gamma2);
            const double kappa = std::sqrt(kappa2);
            const int m = (cls == CmeClass::Biv) ? 1 : 0;
            RadialProfile prof = shoot_profile(kappa2, geff, m, 25.0 / kappa, 25.0 / kappa / 30000.0);
            const double sa = std::sqrt(abar);
            auto radial = [&](double y1, double y2) { return prof.eval(std::hypot(y1, y2) / sa); };
            if (cls == CmeClass::Bii) {
                fill(0, [&](double y1, double y2) { return cd(radial(y1, y2), 0.0); });
                f.a[1] = f.a[0];
            } else if (cls == CmeClass::Biii) {
                fill(0, [&](double y1, double y2) { return cd(radial(y1, y2), 0.0); });
                fill(1, [&](double y1, double y2) { return cd(0.0, -radial(y1, y2)); });
            } else {
                fill(0, [&](double y1, double y2) {
                    const double th = std::atan2(y2, y1);
                    return std::polar(radial(y1, y2), th);
                });
                f.a[1] = -f.a[0];
            }
            break;
        }
        case CmeClass::General:
            f.sigma = +1;
            break;
    }
    zero_boundary(f);
    return f;
}

CMEField homotopy_continue(const CMEField& start, const ResonanceCoefficients& target,
                           int steps, const NewtonOptions& opt) {
    CMEField f = start;
    f.coeffs = target;
    if (steps <= 0) return f;

    const double abar = 0.5 * (target.alpha1 + target.alpha2);
    if (std::abs(target.alpha1 - target.alpha2) < 1e-14) {
        solve_cme_newton(f, opt);  // constant path, one polish
        return f;
    }
    {
        double ov[2] = {abar, abar};
        const double r0 = cme_residual_norm(f, ov, opt.fd_order);
        if (r0 > 1e-6 * std::max(1.0, amplitude_measure(f)))
            throw Error("homotopy start is not converged at the mean curvature");
    }

    double s = 0.0;
    double ds = 1.0 / steps;
    int halvings = 0;
    while (s < 1.0 - 1e-12) {
        const double s_try = std::min(1.0, s + ds);
        CMEField trial = f;
        double ov[2] = {(1 - s_try) * abar + s_try * target.alpha1,
                        (1 - s_try) * abar + s_try * target.alpha2};
        try {
            NewtonOptions o = opt;
            o.tol = (s_try >= 1.0) ? opt.tol : std::max(opt.tol, 1e-9);
            solve_cme_newton(trial, o, s_try >= 1.0 ? nullptr : ov);
            f = trial;
            s = s_try;
        } catch (const Error&) {
            ds /= 2;
            if (++halvings > 8)
                throw NewtonDivergence("homotopy stalled at s = " + std::to_string(s));
        }
    }
    return f;
}

CMEField solve_class(CmeClass cls, double Omega, const ResonanceCoefficients& c, double D,
                     double dy, const NewtonOptions& opt, int homotopy_steps) {
    CMEField f = make_class_seed(cls, Omega, c, D, dy);
    const bool coupled =
        (cls == CmeClass::Bii || cls == CmeClass::Biii || cls == CmeClass::Biv);
    if (!coupled) {
        solve_cme_newton(f, opt);
        return f;
    }
    const double abar = 0.5 * (c.alpha1 + c.alpha2);
    double ov[2] = {abar, abar};
    NewtonOptions pre = opt;
    pre.tol = std::max(opt.tol, 1e-10);
    solve_cme_newton(f, pre, ov);
    return homotopy_continue(f, c, homotopy_steps, opt);
}

double amplitude_measure(const CMEField& f) {
    double m = 0.0;
    const int count = f.n * f.n;
#pragma omp parallel for schedule(static) reduction(max : m)
    for (int i = 0; i < count; ++i) {
        const double s = std::norm(f.a[0][i]) + std::norm(f.a[1][i]) + std::norm(f.a[2][i]);
        m = std::max(m, s);
    }
    return std::sqrt(m);
}

double boundary_amplitude_ratio(const CMEField& f) {
    // ring one cell inside the Dirichlet boundary
    double worst = 0.0;
    const int n = f.n;
    for (int c = 0; c < 3; ++c) {
        for (int i = 1; i < n - 1; ++i) {
            worst = std::max({worst, std::abs(f.a[c][f.idx(1, i)]),
                              std::abs(f.a[c][f.idx(n - 2, i)]),
                              std::abs(f.a[c][f.idx(i, 1)]),
                              std::abs(f.a[c][f.idx(i, n - 2)])});
        }
    }
    const double amp = amplitude_measure(f);
    return (amp > 0) ? worst / amp : 0.0;
}

namespace {

double rel_max_diff(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, double scale) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m / scale;
}

Eigen::VectorXcd transform_grid(const Eigen::VectorXcd& a, int n, bool swap_axes, int sx,
                                int sy, bool conj) {
    // value at (i1,i2) taken from (sx? n-1-i1 : i1, ...) with optional axis
    // swap and conjugation
    Eigen::VectorXcd out(a.size());
    for (int i1 = 0; i1 < n; ++i1)
        for (int i2 = 0; i2 < n; ++i2) {
            int j1 = sx ? (n - 1 - i1) : i1;
            int j2 = sy ? (n - 1 - i2) : i2;
            if (swap_axes) std::swap(j1, j2);
            cd v = a[j1 * n + j2];
            out[i1 * n + i2] = conj ? std::conj(v) : v;
        }
    return out;
}

}  // namespace

double reversibility_error(const CMEField& f) {
    const double amp = amplitude_measure(f);
    if (amp <= 0) return 0.0;
    const int n = f.n;
    auto T = [&](const Eigen::VectorXcd& a, bool sw, int sx, int sy, bool cj) {
        return transform_grid(a, n, sw, sx, sy, cj);
    };
    auto imag_part = [&](const Eigen::VectorXcd& a) {
        double m = 0.0;
        for (Eigen::Index i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i].imag()));
        return m / amp;
    };
    auto min_sign = [&](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
        return std::min(rel_max_diff(a, b, amp), rel_max_diff(a, -b, amp));
    };

    switch (f.cls) {
        case CmeClass::A_m0:
            return std::max({imag_part(f.a[2]), rel_max_diff(f.a[2], T(f.a[2], false, 1, 0, false), amp),
                             rel_max_diff(f.a[2], T(f.a[2], false, 0, 1, false), amp)});
        case CmeClass::Bi_m0:
            return std::max({imag_part(f.a[0]), rel_max_diff(f.a[0], T(f.a[0], false, 1, 0, false), amp),
                             rel_max_diff(f.a[0], T(f.a[0], false, 0, 1, false), amp)});
        case CmeClass::A_m1:
            return std::max(rel_max_diff(f.a[2], -T(f.a[2], false, 1, 0, true), amp),
                            rel_max_diff(f.a[2], T(f.a[2], false, 0, 1, true), amp));
        case CmeClass::Bi_m1:
            return std::max(rel_max_diff(f.a[0], -T(f.a[0], false, 1, 0, true), amp),
                            rel_max_diff(f.a[0], T(f.a[0], false, 0, 1, true), amp));
        case CmeClass::Bii: {
            double rel = min_sign(f.a[0], T(f.a[1], true, 0, 0, false));
            double even = std::max(rel_max_diff(f.a[0], T(f.a[0], false, 1, 0, false), amp),
                                   rel_max_diff(f.a[0], T(f.a[0], false, 0, 1, false), amp));
            return std::max({imag_part(f.a[0]), imag_part(f.a[1]), rel, even});
        }
        case CmeClass::Biii: {
            // A2 = -+ i A1(swap); A1 real and even in each variable
            Eigen::VectorXcd swapped = T(f.a[0], true, 0, 0, false);
            for (Eigen::Index i = 0; i < swapped.size(); ++i) swapped[i] *= cd(0.0, -1.0);
            double rel = min_sign(f.a[1], swapped);
            double even = std::max(rel_max_diff(f.a[0], T(f.a[0], false, 1, 0, false), amp),
                                   rel_max_diff(f.a[0], T(f.a[0], false, 0, 1, false), amp));
            return std::max({imag_part(f.a[0]), rel, even});
        }
        case CmeClass::Biv: {
            Eigen::VectorXcd rhs = T(f.a[1], true, 0, 0, true);
            for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs[i] *= cd(0.0, 1.0);
            double rel = min_sign(f.a[0], rhs);
            double par = std::max(rel_max_diff(f.a[0], -T(f.a[0], false, 1, 0, true), amp),
                                  rel_max_diff(f.a[0], T(f.a[0], false, 0, 1, true), amp));
            return std::max(rel, par);
        }
        case CmeClass::General:
            return 0.0;
    }
    return 0.0;
}

CMEField resample_box(const CMEField& f, double new_D, double new_dy) {
    CMEField g;
    g.n = odd_points(new_D, new_dy);
    g.D = new_D;
    g.dy = 2.0 * new_D / (g.n - 1);
    g.omega = f.omega;
    g.sigma = f.sigma;
    g.cls = f.cls;
    g.coeffs = f.coeffs;
    for (int c = 0; c < 3; ++c) {
        g.a[c].resize(g.cells());
#pragma omp parallel for schedule(static)
        for (int i1 = 0; i1 < g.n; ++i1)
            for (int i2 = 0; i2 < g.n; ++i2)
                g.a[c][g.idx(i1, i2)] =
                    sample_bicubic(f.a[c], f.n, f.D, f.dy, g.y(i1), g.y(i2));
    }
    zero_boundary(g);
    return g;
}

SolutionBranch continue_in_omega(const CMEField& seed, double omega_end, double step,
                                 const NewtonOptions& opt, bool keep_fields) {
    SolutionBranch br;
    CMEField f = seed;
    br.omega.push_back(f.omega);
    br.amplitude.push_back(amplitude_measure(f));
    if (keep_fields) br.fields.push_back(f);

    const double dir = (omega_end >= f.omega) ? 1.0 : -1.0;
    double ds = std::abs(step);
    int halvings = 0;
    while (dir * (omega_end - f.omega) > 1e-12) {
        const double remaining = dir * (omega_end - f.omega);
        CMEField trial = f;
        trial.omega = f.omega + dir * std::min(ds, remaining);
        try {
            solve_cme_newton(trial, opt);
        } catch (const Error&) {
            ds /= 2;
            if (++halvings > 6) break;  // fold: report the branch end
            continue;
        }
        f = trial;
        br.omega.push_back(f.omega);
        br.amplitude.push_back(amplitude_measure(f));
        if (keep_fields) br.fields.push_back(f);
        if (br.amplitude.back() < 1e-4) break;  // edge reached
    }
    return br;
}

double cme_power(const CMEField& f) {
    const int nf = f.n - 1;  // unique periodic cell
    double s = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int i1 = 0; i1 < nf; ++i1)
            for (int i2 = 0; i2 < nf; ++i2) s += std::norm(f.a[c][f.idx(i1, i2)]);
    return s * f.dy * f.dy;
}

TimeIntegrationReport integrate_cme_time(CMEField& f, double T_end, double dt) {
    TimeIntegrationReport rep;
    rep.power_initial = cme_power(f);
    const int nf = f.n - 1;
    const int steps = std::max(1, static_cast<int>(std::round(T_end / dt)));
    const double dt_eff = T_end / steps;
    rep.steps = steps;

    Fft2 fft(nf);
    const auto ks = fft_wavenumbers(nf, 2.0 * f.D);
    std::array<Eigen::VectorXcd, 3> mult;
    for (int c = 0; c < 3; ++c) {
        double a1, a2;
        alphas_of(c, f.coeffs, nullptr, a1, a2);
        const double b = beta_of(c, f.coeffs);
        mult[c].resize(static_cast<std::ptrdiff_t>(nf) * nf);
        for (int i1 = 0; i1 < nf; ++i1)
            for (int i2 = 0; i2 < nf; ++i2) {
                const double sym = b + a1 * ks[i1] * ks[i1] + a2 * ks[i2] * ks[i2];
                mult[c][i1 * nf + i2] = std::polar(1.0, -sym * dt_eff);
            }
    }
    CmeCubicCoeffs cc{f.coeffs.gamma1, f.coeffs.gamma2, f.coeffs.gamma3, f.coeffs.gamma4,
                      f.sigma};
    const double amp0 = amplitude_measure(f);

    auto nonlinear_half = [&]() {
        cme_cubic_rk4_step({f.a[0].data(), f.a[1].data(), f.a[2].data()}, f.n * f.n, cc,
                           0.5 * dt_eff);
    };
    auto linear_full = [&]() {
        for (int c = 0; c < 3; ++c) {
            cd* buf = fft.data();
            for (int i1 = 0; i1 < nf; ++i1)
                std::memcpy(buf + static_cast<std::ptrdiff_t>(i1) * nf,
                            f.a[c].data() + f.idx(i1, 0), sizeof(cd) * nf);
            fft.forward();
            const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(nf) * nf;
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < count; ++i) buf[i] *= mult[c][i];
            fft.backward_scaled();
            for (int i1 = 0; i1 < nf; ++i1)
                std::memcpy(f.a[c].data() + f.idx(i1, 0),
                            buf + static_cast<std::ptrdiff_t>(i1) * nf, sizeof(cd) * nf);
            // periodic image row/column
            for (int i = 0; i < f.n; ++i) {
                f.a[c][f.idx(f.n - 1, i)] = f.a[c][f.idx(0, i % nf)];
                f.a[c][f.idx(i, f.n - 1)] = f.a[c][f.idx(i % nf, 0)];
            }
        }
    };

    for (int s = 0; s < steps; ++s) {
        nonlinear_half();
        linear_full();
        nonlinear_half();
        if ((s & 15) == 0 && amplitude_measure(f) > 10.0 * amp0)
            throw Error("coupled-mode evolution blew up at T = " +
                        std::to_string((s + 1) * dt_eff));
    }
    rep.power_final = cme_power(f);
    return rep;
}

}  // namespace gapweaver
