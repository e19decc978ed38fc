#include "gapweaver/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gapweaver/errors.hpp"
#include "gapweaver/rootfind.hpp"

namespace gapweaver {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double reduce_k(double k) {
    k -= std::round(k);
    return std::abs(k);
}
}  // namespace

double resonance_residual(const PeriodicPotential& p, double eta, int grid_n) {
    auto ev = edge_eigenvalues(p, eta, 2, grid_n);
    return ev.lambda[0] + ev.mu[1] - 2.0 * ev.mu[0];
}

BifurcationResult find_bifurcation_eta(const PeriodicPotential& p, double eta_lo,
                                       double eta_hi, int grid_n) {
    int evals = 0;
    auto g = [&](double eta) {
        ++evals;
        return resonance_residual(p, eta, grid_n);
    };
    double glo = g(eta_lo), ghi = g(eta_hi);
    if (std::signbit(glo) == std::signbit(ghi)) {
        auto e_lo = edge_eigenvalues(p, eta_lo, 2, grid_n);
        auto e_hi = edge_eigenvalues(p, eta_hi, 2, grid_n);
        if (e_lo.mu[1] - e_lo.mu[0] < 1e-12 && e_hi.mu[1] - e_hi.mu[0] < 1e-12)
            throw BracketError(
                "potential never separates the antiperiodic pair on the bracket");
        throw BracketError("no bifurcation in bracket: residual has no sign change");
    }
    auto root = find_root_bracketed([&](double e) { return g(e); }, eta_lo, eta_hi, 1e-6,
                                    1e-10, glo, ghi);
    auto ev = edge_eigenvalues(p, root.x, 2, grid_n);
    BifurcationResult out;
    out.eta0 = root.x;
    out.lambda1 = ev.lambda[0];
    out.mu1 = ev.mu[0];
    out.mu2 = ev.mu[1];
    out.omega0 = 2.0 * ev.mu[0];
    out.residual = std::abs(root.fx);
    out.evals = evals;
    return out;
}

ResonanceCoefficients compute_coefficients(const PeriodicPotential& p, double eta0,
                                           int grid_n) {
    EdgeEigenfunctions efs = edge_eigenfunctions(p, eta0, 2, grid_n);
    const int m = 2 * efs.grid_n;  // unique samples over the 4pi period
    const double h = efs.h;

    auto ip = [&](const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += f[j] * g[j];
        return s * h;
    };
    const Eigen::VectorXd& psi1 = efs.psi[0];
    const Eigen::VectorXd& phi1 = efs.phi[0];
    const Eigen::VectorXd& phi2 = efs.phi[1];

    for (const Eigen::VectorXd* v : {&psi1, &phi1, &phi2}) {
        double drift = std::abs(ip(*v, *v) - 1.0);
        if (drift > 1e-6)
            throw NumericalFailure("eigenfunction normalization drift too large", drift);
    }

    Eigen::VectorXd W(m + 1);
    for (int j = 0; j <= m; ++j) W[j] = p(efs.x[j]);
    Eigen::VectorXd p1s = psi1.cwiseProduct(psi1), f1s = phi1.cwiseProduct(phi1),
                    f2s = phi2.cwiseProduct(phi2);

    ResonanceCoefficients c;
    c.eta0 = eta0;
    auto ev = edge_eigenvalues(p, eta0, 2, grid_n);
    c.omega0 = ev.lambda[0] + ev.mu[1];
    c.beta1 = ip(psi1, W.cwiseProduct(psi1)) + ip(phi2, W.cwiseProduct(phi2));
    c.beta2 = 2.0 * ip(phi1, W.cwiseProduct(phi1));
    c.gamma1 = ip(p1s, p1s) * ip(f2s, f2s);
    const double x12 = ip(p1s, f2s);
    c.gamma2 = x12 * x12;
    c.gamma3 = ip(p1s, f1s) * ip(f1s, f2s);
    const double x33 = ip(f1s, f1s);
    c.gamma4 = x33 * x33;
    c.alpha1 = 0.5 * band_curvature(p, eta0, 1, 0.0, grid_n);
    c.alpha2 = 0.5 * band_curvature(p, eta0, 2, 0.5, grid_n);
    c.alpha3 = 0.5 * band_curvature(p, eta0, 1, 0.5, grid_n);
    c.grid_n = grid_n;
    c.root_tol = 1e-10;
    c.potential_hash = potential_hash(p);
    return c;
}

double linear_band_shift(const PeriodicPotential& p, double eta, int band, double k0,
                         int grid_n) {
    k0 = reduce_k(k0);
    if (!(k0 == 0.0 || k0 == 0.5))
        throw Error("linear_band_shift requires k0 in {0, 1/2}");
    auto r = solve_sturm_liouville(p, eta, k0, band + 1, grid_n, true);
    double sep = 1e300;
    if (band > 1) sep = std::min(sep, r.rho[band - 1] - r.rho[band - 2]);
    if (band < static_cast<int>(r.rho.size()))
        sep = std::min(sep, r.rho[band] - r.rho[band - 1]);
    if (sep <= 1e-8) throw DegenerateEigenvalue("band shift undefined at degenerate edge");
    const Eigen::VectorXd& u = r.vectors[band - 1];  // L2([0,2pi]) normalized
    const int n = static_cast<int>(u.size());
    const double h = kTwoPi / n;
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += u[j] * u[j] * p(h * j);
    return s * h;
}

GapInterval gap_interval(const ResonanceCoefficients& c, double eps) {
    GapInterval gi;
    if (eps == 0.0) return gi;
    // vertex X sees the antiperiodic band 2 curvature (alpha2) and shift
    // beta1; vertex M sees the antiperiodic band 1 curvature (alpha3) and
    // shift beta2
    const bool open_above = c.alpha2 > 0.0 && c.alpha3 < 0.0 && eps * c.beta1 > eps * c.beta2;
    const bool open_below = c.alpha2 < 0.0 && c.alpha3 > 0.0 && eps * c.beta1 < eps * c.beta2;
    if (!(open_above || open_below)) return gi;
    gi.open = true;
    gi.lo = std::min(c.beta1, c.beta2);
    gi.hi = std::max(c.beta1, c.beta2);
    gi.omega_lo = c.omega0 + eps * gi.lo;
    gi.omega_hi = c.omega0 + eps * gi.hi;
    return gi;
}

std::vector<double> solve_algebraic_cme(const ResonanceCoefficients& c, double Omega,
                                        int sigma, AlgebraicReduction red) {
    double num = 0.0, den = 0.0;
    switch (red) {
        case AlgebraicReduction::AOnly:
            num = Omega - c.beta2;
            den = sigma * c.gamma4;
            break;
        case AlgebraicReduction::BOnly:
            num = Omega - c.beta1;
            den = sigma * (c.gamma1 + 3.0 * c.gamma2);
            break;
        case AlgebraicReduction::Single:
            num = Omega - c.beta1;
            den = sigma * c.gamma1;
            break;
    }
    if (std::abs(den) < 1e-14)
        throw Error("degenerate coefficient: vanishing cubic denominator");
    const double a2 = num / den;
    if (a2 < 0.0) return {};
    return {a2};
}

NonresonanceReport check_nonresonance(const PeriodicPotential& p, double eta0,
                                      double omega0, int n_max, int grid_n) {
    static const int js[6] = {-5, -3, -1, 1, 3, 5};

    // distinct reduced quasi-momenta appearing in the condition
    std::map<double, std::vector<double>> bands_at_k;
    for (int a : js)
        for (int b : js) bands_at_k[reduce_k(0.5 * (a + b))] = {};
    for (auto& [k, vals] : bands_at_k) {
        if (k == 0.0 || k == 0.5) {
            vals = solve_sturm_liouville(p, eta0, k, n_max, grid_n).rho;
        } else {
            vals.resize(n_max);
            std::vector<double> kg = {k};
            for (int b = 1; b <= n_max; ++b)
                vals[b - 1] = band_function(p, eta0, b, kg, grid_n, false)[0];
        }
    }

    // the direct resonances generating the cubic terms: the three resonant
    // (band, momentum) pairs at M = 1
    auto is_direct = [&](int n1, double k1, int n2, double k2, int M) {
        if (M != 1) return false;
        auto pr = [](int n, double k, int nn, double kk) { return n == nn && k == kk; };
        return (pr(n1, k1, 1, 0.0) && pr(n2, k2, 2, 0.5)) ||
               (pr(n1, k1, 2, 0.5) && pr(n2, k2, 1, 0.0)) ||
               (pr(n1, k1, 2, 0.5) && pr(n2, k2, 2, 0.5));
    };

    NonresonanceReport rep;
    rep.min_value = 1e300;
    for (int j1 : js)
        for (int j2 : js)
            for (int j3 : js) {
                const int M = std::abs(j1 + j2 + j3);
                if (M > 5) continue;
                const double k1 = reduce_k(0.5 * (j2 + j3));
                const double k2 = reduce_k(0.5 * (j1 + j3));
                const auto& r1 = bands_at_k[k1];
                const auto& r2 = bands_at_k[k2];
                for (int n1 = 1; n1 <= n_max; ++n1)
                    for (int n2 = 1; n2 <= n_max; ++n2) {
                        if (is_direct(n1, k1, n2, k2, M)) {
                            ++rep.excluded;
                            continue;
                        }
                        const double v = std::abs(r1[n1 - 1] + r2[n2 - 1] - M * omega0);
                        if (v < rep.min_value) {
                            rep.min_value = v;
                            rep.n1 = n1;
                            rep.n2 = n2;
                            rep.j1 = j1;
                            rep.j2 = j2;
                            rep.j3 = j3;
                            rep.k1 = k1;
                            rep.k2 = k2;
                        }
                    }
            }

    // tail certificate: rho_n(k) >= C- n^2 - c uniformly in k, and the
    // smallest partner value is the bottom of band 1; beyond tail_n no tuple
    // can undercut the brute-force minimum
    std::vector<double> ks = {0.0, 0.25, 0.5};
    auto bd = compute_band_data(p, eta0, n_max, ks, grid_n, false);
    auto fit = fit_asymptotic_growth(bd);
    rep.c_minus = fit.c_minus;
    rep.c_shift = fit.c;
    const double rho1_min = bd.bands.row(0).minCoeff();
    for (int n = 2; n <= n_max; ++n) {
        const double bound = (fit.c_minus * n * n - fit.c) + rho1_min - 5.0 * omega0;
        if (bound > rep.min_value) {
            rep.certified = true;
            rep.tail_n = n;
            break;
        }
    }
    return rep;
}

double resonant_triple_orthogonality(const EdgeEigenfunctions& efs) {
    const int m = 2 * efs.grid_n;
    const double h = efs.h;
    auto ip = [&](const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += f[j] * g[j];
        return s * h;
    };
    // the 2D inner products factor over the separable modes
    const double p12 = ip(efs.psi[0], efs.phi[1]);
    const double p11 = ip(efs.psi[0], efs.phi[0]);
    const double p21 = ip(efs.phi[0], efs.phi[1]);
    const double o12 = p12 * p12;          // <Phi1, Phi2>
    const double o13 = p11 * p21;          // <Phi1, Phi3>
    const double o23 = p21 * p11;          // <Phi2, Phi3>
    return std::max({std::abs(o12), std::abs(o13), std::abs(o23)});
}

}  // namespace gapweaver
