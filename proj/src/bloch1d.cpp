#include "gapweaver/bloch1d.hpp"

#include <algorithm>
#include <cmath>

#include "gapweaver/errors.hpp"
#include "gapweaver/rootfind.hpp"

namespace gapweaver {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;

// Reduce k into [0, 1/2] using 1-periodicity and evenness of rho_n(k).
double reduce_k(double k) {
    k -= std::round(k);
    return std::abs(k);
}

struct Tridiag {
    Eigen::VectorXd diag, sub;
};

struct SectorPair {
    Tridiag even, odd;
};

// Parity-sector tridiagonal reductions of the quasi-periodic FD matrix at
// the band edges. Requires grid_n even and W even on the grid.
SectorPair edge_sectors(const std::vector<double>& W, double eta, double k_edge, int n) {
    const double h = kTwoPi / n;
    const double t = 1.0 / (h * h);
    Eigen::VectorXd d(n);
    for (int j = 0; j < n; ++j) d[j] = 2.0 * t + eta * W[j];
    const int half = n / 2;
    SectorPair sp;
    if (k_edge == 0.0) {
        // even: [e0, (e_j+e_{n-j})/sqrt2, e_{n/2}], odd: [(e_j-e_{n-j})/sqrt2]
        sp.even.diag.resize(half + 1);
        sp.even.sub.resize(half);
        sp.even.diag[0] = d[0];
        for (int j = 1; j < half; ++j) sp.even.diag[j] = d[j];
        sp.even.diag[half] = d[half];
        sp.even.sub[0] = -std::sqrt(2.0) * t;
        for (int j = 1; j < half - 1; ++j) sp.even.sub[j] = -t;
        sp.even.sub[half - 1] = -std::sqrt(2.0) * t;
        sp.odd.diag.resize(half - 1);
        sp.odd.sub.resize(half - 2);
        for (int j = 1; j < half; ++j) sp.odd.diag[j - 1] = d[j];
        for (int j = 0; j < half - 2; ++j) sp.odd.sub[j] = -t;
    } else {
        // antiperiodic: even-on-R: [e0, (e_j-e_{n-j})/sqrt2],
        //               odd-on-R:  [(e_j+e_{n-j})/sqrt2, e_{n/2}]
        sp.even.diag.resize(half);
        sp.even.sub.resize(half - 1);
        sp.even.diag[0] = d[0];
        for (int j = 1; j < half; ++j) sp.even.diag[j] = d[j];
        sp.even.sub[0] = -std::sqrt(2.0) * t;
        for (int j = 1; j < half - 1; ++j) sp.even.sub[j] = -t;
        sp.odd.diag.resize(half);
        sp.odd.sub.resize(half - 1);
        for (int j = 1; j < half; ++j) sp.odd.diag[j - 1] = d[j];
        sp.odd.diag[half - 1] = d[half];
        for (int j = 0; j < half - 2; ++j) sp.odd.sub[j] = -t;
        sp.odd.sub[half - 2] = -std::sqrt(2.0) * t;
    }
    return sp;
}

// Reconstruct a full-period eigenvector from a sector eigenvector.
Eigen::VectorXd sector_to_full(const Eigen::VectorXd& v, double k_edge, Parity parity, int n) {
    const int half = n / 2;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    if (k_edge == 0.0) {
        if (parity == Parity::Even) {
            u[0] = v[0];
            for (int j = 1; j < half; ++j) {
                u[j] = v[j] * inv_sqrt2;
                u[n - j] = v[j] * inv_sqrt2;
            }
            u[half] = v[half];
        } else {
            for (int j = 1; j < half; ++j) {
                u[j] = v[j - 1] * inv_sqrt2;
                u[n - j] = -v[j - 1] * inv_sqrt2;
            }
        }
    } else {
        if (parity == Parity::Even) {
            u[0] = v[0];
            for (int j = 1; j < half; ++j) {
                u[j] = v[j] * inv_sqrt2;
                u[n - j] = -v[j] * inv_sqrt2;
            }
        } else {
            for (int j = 1; j < half; ++j) {
                u[j] = v[j - 1] * inv_sqrt2;
                u[n - j] = v[j - 1] * inv_sqrt2;
            }
            u[half] = v[half - 1];
        }
    }
    return u;
}

struct EdgeSolve {
    std::vector<double> rho;
    std::vector<Parity> parity;
    std::vector<Eigen::VectorXd> vectors;  // full-period, L2([0,2pi]) normalized
};

EdgeSolve solve_edge(const std::vector<double>& W, double eta, double k_edge, int n_eigs,
                     int n, bool want_vectors) {
    SectorPair sp = edge_sectors(W, eta, k_edge, n);
    auto opt = want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> se, so;
    se.computeFromTridiagonal(sp.even.diag, sp.even.sub, opt);
    so.computeFromTridiagonal(sp.odd.diag, sp.odd.sub, opt);
    if (se.info() != Eigen::Success || so.info() != Eigen::Success)
        throw NumericalFailure("tridiagonal eigensolver failed", 0.0);

    struct Entry {
        double rho;
        Parity par;
        int idx;
    };
    std::vector<Entry> all;
    for (int i = 0; i < se.eigenvalues().size(); ++i)
        all.push_back({se.eigenvalues()[i], Parity::Even, i});
    for (int i = 0; i < so.eigenvalues().size(); ++i)
        all.push_back({so.eigenvalues()[i], Parity::Odd, i});
    const double scale = 1.0 + std::abs(all.back().rho);
    std::sort(all.begin(), all.end(), [&](const Entry& a, const Entry& b) {
        if (std::abs(a.rho - b.rho) > 1e-11 * scale) return a.rho < b.rho;
        return a.par == Parity::Even && b.par == Parity::Odd;  // even first on ties
    });

    EdgeSolve out;
    const double h = kTwoPi / n;
    for (int i = 0; i < n_eigs && i < static_cast<int>(all.size()); ++i) {
        out.rho.push_back(all[i].rho);
        out.parity.push_back(all[i].par);
        if (want_vectors) {
            const auto& solver = (all[i].par == Parity::Even) ? se : so;
            Eigen::VectorXd u = sector_to_full(solver.eigenvectors().col(all[i].idx), k_edge,
                                               all[i].par, n);
            u /= std::sqrt(u.squaredNorm() * h);
            out.vectors.push_back(std::move(u));
        }
    }
    return out;
}

// Discriminant of the discrete problem: trace of the transfer matrix of
// u_{j+1} = (2 + h^2 (eta W_j - rho)) u_j - u_{j-1} across one period.
// Quasi-periodic eigenvalues solve Delta(rho) = 2 cos(2 pi k).
double discriminant(const std::vector<double>& W, double eta, double rho, int n) {
    const double h = kTwoPi / n;
    const double h2 = h * h;
    double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;
    double rescale_log = 0.0;
    for (int j = 0; j < n; ++j) {
        const double a = 2.0 + h2 * (eta * W[j] - rho);
        const double n00 = a * m00 - m10;
        const double n01 = a * m01 - m11;
        m10 = m00;
        m11 = m01;
        m00 = n00;
        m01 = n01;
        double mx = std::max(std::max(std::abs(m00), std::abs(m01)),
                             std::max(std::abs(m10), std::abs(m11)));
        if (mx > 1e120) {
            m00 /= mx;
            m01 /= mx;
            m10 /= mx;
            m11 /= mx;
            rescale_log += std::log(mx);
        }
    }
    double tr = m00 + m11;
    if (rescale_log > 0.0)
        return (tr >= 0 ? 1.0 : -1.0) * std::exp(std::min(rescale_log + std::log(std::abs(tr) + 1e-300), 700.0));
    return tr;
}

// Band interval endpoints from the edge eigenvalues: odd bands run from
// lambda_n up to mu_n, even bands from mu_n up to lambda_n.
std::pair<double, double> band_interval(int band, const std::vector<double>& lambda,
                                        const std::vector<double>& mu) {
    double a = lambda[band - 1], b = mu[band - 1];
    if (band % 2 == 0) std::swap(a, b);
    return {a, b};
}

double interior_rho(const std::vector<double>& W, double eta, int band, double k, int n,
                    const std::vector<double>& lambda, const std::vector<double>& mu) {
    auto [lo, hi] = band_interval(band, lambda, mu);
    if (hi - lo <= 4e-13 * (1.0 + std::abs(lo))) return 0.5 * (lo + hi);  // collapsed band
    const double target = 2.0 * std::cos(kTwoPi * k);
    const double inset = 1e-13 * (1.0 + std::abs(hi));
    auto f = [&](double r) { return discriminant(W, eta, r, n) - target; };
    double a = lo + inset, b = hi - inset;
    double fa = f(a), fb = f(b);
    if (std::signbit(fa) == std::signbit(fb)) {
        // k so close to an edge that the inset overshoots the root
        return (std::abs(fa) < std::abs(fb)) ? a : b;
    }
    auto res = find_root_bracketed(f, a, b, 1e-9 * (1.0 + std::abs(hi)), 1e-13, fa, fb);
    return res.x;
}

int even_grid(int grid_n) {
    if (grid_n < 32) throw Error("grid_n must be >= 32");
    return grid_n + (grid_n % 2);
}

void require_even_potential(const PeriodicPotential& p) {
    auto rep = check_evenness(p);
    if (!rep.even)
        throw InvalidPotential("potential is not even: max asymmetry " +
                               std::to_string(rep.max_asymmetry));
}

}  // namespace

SturmLiouvilleResult solve_sturm_liouville(const PeriodicPotential& p, double eta, double k,
                                           int n_eigs, int grid_n, bool want_vectors) {
    grid_n = even_grid(grid_n);
    if (n_eigs > grid_n / 4) throw Error("n_eigs must be <= grid_n/4");
    require_even_potential(p);
    const std::vector<double> W = sample_potential(p, grid_n);
    const double kr = reduce_k(k);

    SturmLiouvilleResult out;
    if (kr == 0.0 || kr == 0.5) {
        EdgeSolve es = solve_edge(W, eta, kr, n_eigs, grid_n, want_vectors);
        out.rho = std::move(es.rho);
        out.parity = std::move(es.parity);
        out.vectors = std::move(es.vectors);
        return out;
    }
    EdgeSolve e0 = solve_edge(W, eta, 0.0, n_eigs, grid_n, false);
    EdgeSolve eh = solve_edge(W, eta, 0.5, n_eigs, grid_n, false);
    for (int b = 1; b <= n_eigs; ++b)
        out.rho.push_back(interior_rho(W, eta, b, kr, grid_n, e0.rho, eh.rho));
    if (want_vectors) {
        // interior-k eigenfunctions are rarely needed; use a dense Hermitian
        // solve as the reference path
        const double h = kTwoPi / grid_n;
        const double t = 1.0 / (h * h);
        Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(grid_n, grid_n);
        for (int j = 0; j < grid_n; ++j) {
            A(j, j) = 2.0 * t + eta * W[j];
            A(j, (j + 1) % grid_n) += -t;
            A((j + 1) % grid_n, j) += -t;
        }
        std::complex<double> ph = std::exp(std::complex<double>(0.0, kTwoPi * kr));
        A(0, grid_n - 1) = -std::conj(ph) * t;
        A(grid_n - 1, 0) = -ph * t;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(A);
        if (solver.info() != Eigen::Success)
            throw NumericalFailure("dense Hermitian eigensolver failed", 0.0);
        for (int i = 0; i < n_eigs; ++i) {
            out.rho[i] = solver.eigenvalues()[i];
            Eigen::VectorXd mod = solver.eigenvectors().col(i).cwiseAbs();
            mod /= std::sqrt(mod.squaredNorm() * h);
            out.vectors.push_back(mod);  // modulus only; phase is gauge
        }
    }
    return out;
}

EdgeEigenvalues edge_eigenvalues(const PeriodicPotential& p, double eta, int n_eigs,
                                 int grid_n) {
    grid_n = even_grid(grid_n);
    require_even_potential(p);
    const std::vector<double> W = sample_potential(p, grid_n);
    EdgeSolve e0 = solve_edge(W, eta, 0.0, n_eigs, grid_n, false);
    EdgeSolve eh = solve_edge(W, eta, 0.5, n_eigs, grid_n, false);
    EdgeEigenvalues out;
    out.lambda = e0.rho;
    out.mu = eh.rho;

    // interlacing: lambda_1 < mu_1 < mu_2 < lambda_2 <= lambda_3 < mu_3 <= mu_4 < ...
    // i.e. the merged sequence [l1, m1, m2, l2, l3, m3, m4, l4, l5, ...] is sorted
    std::vector<double> merged;
    merged.push_back(out.lambda[0]);
    std::size_t il = 1, im = 0;
    bool take_mu = true;
    while (il < out.lambda.size() || im < out.mu.size()) {
        auto& src = take_mu ? out.mu : out.lambda;
        auto& pos = take_mu ? im : il;
        for (int r = 0; r < 2 && pos < src.size(); ++r) merged.push_back(src[pos++]);
        take_mu = !take_mu;
    }
    const double tol = 1e-9 * (1.0 + std::abs(merged.back()));
    for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
        if (merged[i] > merged[i + 1] + tol) {
            out.interlacing_ok = false;
            out.warning = "interlacing violated at merged index " + std::to_string(i) +
                          "; spectrum may be under-resolved";
            break;
        }
    }
    return out;
}

std::vector<double> band_function(const PeriodicPotential& p, double eta, int band,
                                  const std::vector<double>& k_grid, int grid_n,
                                  bool richardson) {
    auto values_at = [&](int n) {
        n = even_grid(n);
        const std::vector<double> W = sample_potential(p, n);
        EdgeSolve e0 = solve_edge(W, eta, 0.0, band, n, false);
        EdgeSolve eh = solve_edge(W, eta, 0.5, band, n, false);
        std::vector<double> v(k_grid.size());
        for (std::size_t i = 0; i < k_grid.size(); ++i) {
            double kr = reduce_k(k_grid[i]);
            if (kr == 0.0)
                v[i] = e0.rho[band - 1];
            else if (kr == 0.5)
                v[i] = eh.rho[band - 1];
            else
                v[i] = interior_rho(W, eta, band, kr, n, e0.rho, eh.rho);
        }
        return v;
    };
    std::vector<double> v1 = values_at(grid_n);
    if (!richardson) return v1;
    std::vector<double> v2 = values_at(2 * grid_n);
    for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = (4.0 * v2[i] - v1[i]) / 3.0;
    return v1;
}

double band_curvature(const PeriodicPotential& p, double eta, int band, double k0, int grid_n,
                      double hk) {
    grid_n = even_grid(grid_n);
    if (!(k0 == 0.0 || k0 == 0.5)) throw Error("band_curvature requires k0 in {0, 1/2}");
    require_even_potential(p);
    const std::vector<double> W = sample_potential(p, grid_n);
    const int need = band + 1;
    EdgeSolve e0 = solve_edge(W, eta, 0.0, need, grid_n, false);
    EdgeSolve eh = solve_edge(W, eta, 0.5, need, grid_n, false);

    // simplicity of the edge eigenvalue: neighbor separation in the same
    // boundary-condition family must exceed 1e-8
    const std::vector<double>& fam = (k0 == 0.0) ? e0.rho : eh.rho;
    double sep = 1e300;
    if (band > 1) sep = std::min(sep, fam[band - 1] - fam[band - 2]);
    if (band < static_cast<int>(fam.size())) sep = std::min(sep, fam[band] - fam[band - 1]);
    if (sep <= 1e-8)
        throw DegenerateEigenvalue("edge eigenvalue is degenerate; curvature undefined");

    const double r0 = fam[band - 1];
    auto rho_at = [&](double dk) {
        double k = (k0 == 0.0) ? dk : 0.5 - dk;  // one-sided into the band interior
        return interior_rho(W, eta, band, k, grid_n, e0.rho, eh.rho);
    };
    const double d1 = 2.0 * (rho_at(hk) - r0) / (hk * hk);
    const double d2 = 2.0 * (rho_at(hk / 2) - r0) / (hk * hk / 4);
    return (4.0 * d2 - d1) / 3.0;
}

double EdgeEigenfunctions::eval(const Eigen::VectorXd& v, double xq) const {
    // v holds samples of a 4pi-periodic function at x[0..2n]; evaluate the
    // trigonometric interpolant directly from the 2n unique samples
    const int m = 2 * grid_n;  // unique samples over the 4pi period
    double s = std::fmod(xq + kTwoPi, 2.0 * kTwoPi);  // position in [0, 4pi)
    if (s < 0) s += 2.0 * kTwoPi;
    // Dirichlet-kernel form of the even-m trig interpolant on period L=4pi:
    //   f(s) = (1/m) sum_j v_j sin(m theta_j) cot(theta_j), theta_j = pi (s - s_j) / L
    const double hs = 2.0 * kTwoPi / m;
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
        double theta = 0.25 * (s - j * hs);
        double w;
        double st = std::sin(theta);
        if (std::abs(st) < 1e-12) {
            w = m * std::cos(m * theta) / std::cos(theta);
        } else {
            w = std::sin(m * theta) * std::cos(theta) / st;
        }
        acc += v[j] * w;
    }
    return acc / m;
}

EdgeEigenfunctions edge_eigenfunctions(const PeriodicPotential& p, double eta, int count,
                                       int grid_n) {
    grid_n = even_grid(grid_n);
    require_even_potential(p);
    const std::vector<double> W = sample_potential(p, grid_n);
    EdgeSolve e0 = solve_edge(W, eta, 0.0, count, grid_n, true);
    EdgeSolve eh = solve_edge(W, eta, 0.5, count, grid_n, true);

    EdgeEigenfunctions out;
    out.grid_n = grid_n;
    out.h = kTwoPi / grid_n;
    out.x.resize(2 * grid_n + 1);
    for (int j = 0; j <= 2 * grid_n; ++j) out.x[j] = -kTwoPi + j * out.h;

    auto extend = [&](const Eigen::VectorXd& u, bool antiperiodic) {
        Eigen::VectorXd v(2 * grid_n + 1);
        const double sign = antiperiodic ? -1.0 : 1.0;
        for (int j = 0; j < grid_n; ++j) v[j] = sign * u[j];  // [-2pi, 0)
        for (int j = 0; j < grid_n; ++j) v[grid_n + j] = u[j];
        v[2 * grid_n] = v[0];
        // normalize over the 4pi period (periodic rectangle quadrature)
        double nrm = 0.0;
        for (int j = 0; j < 2 * grid_n; ++j) nrm += v[j] * v[j];
        v /= std::sqrt(nrm * out.h);
        return v;
    };

    auto finalize = [&](Eigen::VectorXd& v, Parity par, int n_index, const char* fam) {
        const int i0 = grid_n;  // x = 0
        if (par == Parity::Even) {
            if (v[i0] < 0) v = -v;
        } else {
            if (v[i0 + 1] - v[i0 - 1] < 0) v = -v;
        }
        // parity residual on the sample grid
        double worst = 0.0, amp = v.cwiseAbs().maxCoeff();
        for (int j = 0; j <= 2 * grid_n; ++j) {
            double mirrored = v[2 * grid_n - j];
            double expect = (par == Parity::Even) ? mirrored : -mirrored;
            worst = std::max(worst, std::abs(v[j] - expect));
        }
        if (worst > 1e-6 * amp)
            throw NumericalFailure(std::string(fam) +
                                       " eigenfunction parity violated; symmetry-breaking artifact",
                                   worst);
        int nodes = count_sign_changes(out.x, v, -kPi, kPi);
        if (nodes != n_index - 1)
            throw NumericalFailure(std::string(fam) + std::to_string(n_index) +
                                       " node count mismatch: got " + std::to_string(nodes),
                                   nodes);
    };

    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd vpsi = extend(e0.vectors[i], false);
        finalize(vpsi, e0.parity[i], i + 1, "psi");
        out.psi.push_back(std::move(vpsi));
        out.psi_parity.push_back(e0.parity[i]);

        Eigen::VectorXd vphi = extend(eh.vectors[i], true);
        finalize(vphi, eh.parity[i], i + 1, "phi");
        out.phi.push_back(std::move(vphi));
        out.phi_parity.push_back(eh.parity[i]);
    }
    return out;
}

BandData compute_band_data(const PeriodicPotential& p, double eta, int n_eigs,
                           const std::vector<double>& k_grid, int grid_n, bool richardson) {
    BandData bd;
    bd.eta = eta;
    bd.grid_n = grid_n;
    bd.k_grid = k_grid;
    bd.bands.resize(n_eigs, k_grid.size());
    for (int b = 1; b <= n_eigs; ++b) {
        auto row = band_function(p, eta, b, k_grid, grid_n, richardson);
        for (std::size_t i = 0; i < k_grid.size(); ++i) bd.bands(b - 1, i) = row[i];
    }
    auto ev = edge_eigenvalues(p, eta, n_eigs, grid_n);
    bd.lambda = ev.lambda;
    bd.mu = ev.mu;
    return bd;
}

AsymptoticFit fit_asymptotic_growth(const BandData& bd) {
    AsymptoticFit fit;
    double min_rho = bd.bands.minCoeff();
    fit.c = std::max(0.0, -min_rho) + 1.0;
    fit.c_minus = 1e300;
    fit.c_plus = 0.0;
    for (int b = 0; b < bd.bands.rows(); ++b) {
        double lo = bd.bands.row(b).minCoeff() + fit.c;
        double hi = bd.bands.row(b).maxCoeff() + fit.c;
        double n2 = double(b + 1) * (b + 1);
        fit.c_minus = std::min(fit.c_minus, lo / n2);
        fit.c_plus = std::max(fit.c_plus, hi / n2);
    }
    return fit;
}

int count_sign_changes(const std::vector<double>& x, const Eigen::VectorXd& v, double xa,
                       double xb) {
    double amp = v.cwiseAbs().maxCoeff();
    int changes = 0;
    int last_sign = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] <= xa || x[j] >= xb) continue;
        if (std::abs(v[j]) < 1e-9 * amp) continue;
        int s = v[j] > 0 ? 1 : -1;
        if (last_sign != 0 && s != last_sign) ++changes;
        last_sign = s;
    }
    return changes;
}

}  // namespace gapweaver
