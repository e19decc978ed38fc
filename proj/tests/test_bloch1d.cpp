#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "doctest.h"
#include "gapweaver/bloch1d.hpp"
#include "gapweaver/errors.hpp"
#include "gapweaver/potential.hpp"

using namespace gapweaver;

namespace {

// Independent oracle: dense assembly of the quasi-periodic FD matrix.
std::vector<double> dense_eigenvalues(const PeriodicPotential& p, double eta, double k,
                                      int n_eigs, int n) {
    const double h = 2 * M_PI / n;
    const double t = 1.0 / (h * h);
    auto W = sample_potential(p, n);
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        A(j, j) = 2 * t + eta * W[j];
        if (j + 1 < n) {
            A(j, j + 1) = -t;
            A(j + 1, j) = -t;
        }
    }
    std::complex<double> ph = std::exp(std::complex<double>(0, 2 * M_PI * k));
    A(0, n - 1) = -std::conj(ph) * t;
    A(n - 1, 0) = -ph * t;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, Eigen::EigenvaluesOnly);
    std::vector<double> out(n_eigs);
    for (int i = 0; i < n_eigs; ++i) out[i] = es.eigenvalues()[i];
    return out;
}

}  // namespace

TEST_CASE("free operator: periodic and antiperiodic spectra") {
    auto z = PeriodicPotential::zero();
    auto r0 = solve_sturm_liouville(z, 0.3, 0.0, 5, 256);
    // rho = {0, 1, 1, 4, 4} up to O(grid_n^-2)
    CHECK(std::abs(r0.rho[0]) < 1e-8);
    CHECK(r0.rho[1] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r0.rho[2] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r0.rho[3] == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(r0.rho[4] == doctest::Approx(4.0).epsilon(1e-3));

    auto rh = solve_sturm_liouville(z, 0.0, 0.5, 4, 256);
    CHECK(rh.rho[0] == doctest::Approx(0.25).epsilon(1e-4));
    CHECK(rh.rho[1] == doctest::Approx(0.25).epsilon(1e-4));
    CHECK(rh.rho[2] == doctest::Approx(2.25).epsilon(1e-3));
    CHECK(rh.rho[3] == doctest::Approx(2.25).epsilon(1e-3));
}

TEST_CASE("sector solver agrees with dense Hermitian oracle") {
    auto p = PeriodicPotential::one_minus_cos();
    const int n = 64;
    for (double k : {0.0, 0.5}) {
        auto mine = solve_sturm_liouville(p, 0.37, k, 6, n);
        auto ref = dense_eigenvalues(p, 0.37, k, 6, n);
        for (int i = 0; i < 6; ++i)
            CHECK(mine.rho[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
    // interior k: transfer-matrix root finding vs dense
    for (double k : {0.11, 0.25, 0.43}) {
        auto mine = solve_sturm_liouville(p, 0.37, k, 5, n);
        auto ref = dense_eigenvalues(p, 0.37, k, 5, n);
        for (int i = 0; i < 5; ++i)
            CHECK(mine.rho[i] == doctest::Approx(ref[i]).epsilon(1e-10));
    }
}

TEST_CASE("example 1 eigenvalues near the bifurcation point") {
    auto p = PeriodicPotential::one_minus_cos();
    auto r = solve_sturm_liouville(p, 0.1745, 0.0, 1, 512);
    CHECK(r.rho[0] == doctest::Approx(0.1595).epsilon(2e-3));

    auto ev = edge_eigenvalues(p, 0.1745, 3, 512);
    CHECK(ev.lambda[0] == doctest::Approx(0.1595).epsilon(2e-3));
    CHECK(ev.mu[0] == doctest::Approx(0.3336).epsilon(2e-3));
    CHECK(ev.mu[1] == doctest::Approx(0.5077).epsilon(2e-3));
    CHECK(ev.interlacing_ok);
    // omega0 = lambda1 + mu2 = 2 mu1 at the bifurcation value
    CHECK(ev.lambda[0] + ev.mu[1] == doctest::Approx(2 * ev.mu[0]).epsilon(1e-3));
}

TEST_CASE("band function: free dispersion and evenness in k") {
    auto z = PeriodicPotential::zero();
    std::vector<double> ks;
    for (int i = 0; i <= 10; ++i) ks.push_back(0.05 * i);
    auto band1 = band_function(z, 0.0, 1, ks, 128);
    for (std::size_t i = 0; i < ks.size(); ++i)
        CHECK(std::abs(band1[i] - ks[i] * ks[i]) < 5e-7);

    auto p = PeriodicPotential::one_minus_cos();
    std::vector<double> kneg, kpos;
    for (int i = 1; i <= 4; ++i) {
        kpos.push_back(0.1 * i);
        kneg.push_back(-0.1 * i);
    }
    auto bp = band_function(p, 0.1745, 2, kpos, 128);
    auto bn = band_function(p, 0.1745, 2, kneg, 128);
    for (std::size_t i = 0; i < kpos.size(); ++i)
        CHECK(bp[i] == doctest::Approx(bn[i]).epsilon(1e-13));
}

TEST_CASE("band extremality and monotonicity between edges") {
    auto p = PeriodicPotential::one_minus_cos();
    std::vector<double> ks;
    for (int i = 0; i <= 20; ++i) ks.push_back(0.025 * i);
    for (int band : {1, 2}) {
        auto v = band_function(p, 0.1745, band, ks, 128);
        double lo = *std::min_element(v.begin(), v.end());
        double hi = *std::max_element(v.begin(), v.end());
        // extrema at the endpoints of the k grid
        CHECK((v.front() == lo || v.front() == hi));
        CHECK((v.back() == lo || v.back() == hi));
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            if (band == 1)
                CHECK(v[i] <= v[i + 1] + 1e-12);  // min at k=0
            else
                CHECK(v[i] >= v[i + 1] - 1e-12);  // min at k=1/2
        }
    }
}

TEST_CASE("first band gap is non-empty for the cosine potential") {
    auto p = PeriodicPotential::one_minus_cos();
    auto ev = edge_eigenvalues(p, 0.1745, 2, 256);
    std::vector<double> ks;
    for (int i = 0; i <= 10; ++i) ks.push_back(0.05 * i);
    auto band2 = band_function(p, 0.1745, 2, ks, 256);
    double min2 = *std::min_element(band2.begin(), band2.end());
    CHECK(ev.mu[0] < min2);            // mu1 below the whole second band
    CHECK(ev.lambda[0] < ev.mu[0]);    // lambda1 < mu1 strictly
}

TEST_CASE("discretization convergence is second order") {
    auto p = PeriodicPotential::one_minus_cos();
    double r128 = solve_sturm_liouville(p, 0.3, 0.0, 1, 128).rho[0];
    double r256 = solve_sturm_liouville(p, 0.3, 0.0, 1, 256).rho[0];
    double r512 = solve_sturm_liouville(p, 0.3, 0.0, 1, 512).rho[0];
    double e1 = std::abs(r128 - r512);
    double e2 = std::abs(r256 - r512);
    CHECK(e1 / e2 > 3.0);  // ~4 for O(h^2)
    CHECK(e1 / e2 < 5.5);
}

TEST_CASE("band curvature") {
    auto z = PeriodicPotential::zero();
    CHECK(band_curvature(z, 0.0, 1, 0.0, 128) == doctest::Approx(2.0).epsilon(1e-6));

    auto p = PeriodicPotential::one_minus_cos();
    const double eta0 = 0.174475;
    CHECK(0.5 * band_curvature(p, eta0, 1, 0.0, 512) == doctest::Approx(0.9422).epsilon(0.01));
    CHECK(0.5 * band_curvature(p, eta0, 2, 0.5, 512) == doctest::Approx(6.7813).epsilon(0.01));
    CHECK(0.5 * band_curvature(p, eta0, 1, 0.5, 512) == doctest::Approx(-4.7890).epsilon(0.01));

    // degenerate pair at the antiperiodic edge of the free operator
    CHECK_THROWS_AS(band_curvature(z, 0.0, 1, 0.5, 128), DegenerateEigenvalue);
}

TEST_CASE("edge eigenfunctions: normalization, parity, nodes, signs") {
    auto p = PeriodicPotential::one_minus_cos();
    auto efs = edge_eigenfunctions(p, 0.174475, 3, 512);
    const double h = efs.h;

    for (const auto& v : efs.psi) {
        double nrm = 0.0;
        for (int j = 0; j < 2 * efs.grid_n; ++j) nrm += v[j] * v[j];
        CHECK(nrm * h == doctest::Approx(1.0).epsilon(1e-8));
    }
    // parity pattern: even for odd n, odd for even n
    CHECK(efs.psi_parity[0] == Parity::Even);
    CHECK(efs.psi_parity[1] == Parity::Odd);
    CHECK(efs.psi_parity[2] == Parity::Even);
    CHECK(efs.phi_parity[0] == Parity::Even);
    CHECK(efs.phi_parity[1] == Parity::Odd);

    // psi1 strictly positive; phi1 positive on (-pi,pi) where it lives before
    // the antiperiodic flip; phi2 odd with one node
    CHECK(efs.psi[0].minCoeff() > 0.0);
    for (int j = 0; j <= 2 * efs.grid_n; ++j)
        if (efs.x[j] > -M_PI + 1e-9 && efs.x[j] < M_PI - 1e-9) CHECK(efs.phi[0][j] > 0.0);
    CHECK(count_sign_changes(efs.x, efs.phi[1], -M_PI, M_PI) == 1);

    // sign conventions at x = 0
    const int i0 = efs.grid_n;
    CHECK(efs.psi[0][i0] > 0.0);
    CHECK(efs.phi[0][i0] > 0.0);
    CHECK(efs.phi[1][i0 + 1] - efs.phi[1][i0 - 1] > 0.0);

    // <psi1, phi1>_{4pi} = 0 on the doubled interval
    double ip = 0.0;
    for (int j = 0; j < 2 * efs.grid_n; ++j) ip += efs.psi[0][j] * efs.phi[0][j];
    CHECK(std::abs(ip * h) < 1e-10);
}

TEST_CASE("free ground state is constant") {
    auto efs = edge_eigenfunctions(PeriodicPotential::zero(), 0.7, 1, 128);
    const double expect = 1.0 / std::sqrt(4 * M_PI);
    for (int j = 0; j < 2 * efs.grid_n; ++j)
        CHECK(efs.psi[0][j] == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("trig evaluation of edge eigenfunctions matches samples") {
    auto p = PeriodicPotential::one_minus_cos();
    auto efs = edge_eigenfunctions(p, 0.1745, 2, 64);
    for (int j : {3, 31, 77, 100}) {
        CHECK(efs.eval(efs.psi[0], efs.x[j]) == doctest::Approx(efs.psi[0][j]).epsilon(1e-10));
        CHECK(efs.eval(efs.phi[1], efs.x[j]) == doctest::Approx(efs.phi[1][j]).epsilon(1e-10));
    }
    // 4pi periodicity of the interpolant
    CHECK(efs.eval(efs.phi[0], 1.0) == doctest::Approx(efs.eval(efs.phi[0], 1.0 + 4 * M_PI)).epsilon(1e-10));
}

TEST_CASE("asymptotic growth fit brackets the computed bands") {
    auto p = PeriodicPotential::one_minus_cos();
    std::vector<double> ks = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    auto bd = compute_band_data(p, 0.1745, 8, ks, 128, false);
    auto fit = fit_asymptotic_growth(bd);
    CHECK(fit.c_minus > 0.0);
    CHECK(fit.c_plus >= fit.c_minus);
    for (int b = 0; b < 8; ++b)
        for (int i = 0; i < 6; ++i) {
            double v = std::abs(bd.bands(b, i)) + fit.c;
            CHECK(v >= fit.c_minus * (b + 1) * (b + 1) - 1e-9);
            CHECK(v <= fit.c_plus * (b + 1) * (b + 1) + 1e-9);
        }
}

TEST_CASE("uneven potential is rejected by the edge solver") {
    const int n = 32;
    std::vector<double> sine(n);
    for (int j = 0; j < n; ++j) sine[j] = std::sin(2 * M_PI * j / n);
    auto p = PeriodicPotential::table(sine);
    CHECK_THROWS_AS(solve_sturm_liouville(p, 0.2, 0.0, 2, 64), InvalidPotential);
}
